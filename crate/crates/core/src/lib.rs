//! Spectral Galerkin simulation and finite-time Lyapunov exponents (FTLEs)
//! for stochastic PDEs of the form
//!
//! ```text
//! du = [A u + nu*u + F(u)] dt + sigma dW
//! ```
//!
//! where `A` is self-adjoint and non-positive with a one-dimensional kernel,
//! `F` is a dissipative cubic, and `W` is a cylindrical Wiener process with a
//! diagonal covariance in the eigenbasis of `A`. Near the bifurcation the
//! dynamics reduce to a scalar amplitude SDE on the kernel mode; this crate
//! implements both levels on a shared noise realization so that reduction
//! errors and stability claims can be measured sample by sample.
//!
//! Top-level layout:
//!
//! * [`spectral`]: trigonometric eigenbases, quadrature, projections, norms.
//! * [`model`]: the three concrete model problems (Allen-Cahn,
//!   Swift-Hohenberg, surface growth) as eigenbasis data plus nonlinearity.
//! * [`noise`]: counter-based Gaussian draws, Wiener paths, slow rescaling.
//! * [`amplitude`]: the scalar amplitude SDE, pullback attractor, invariant
//!   density, Birkhoff averages, closed-form FTLEs.
//! * [`engine`]: exponential Euler integrator for the SPDE, first-variation
//!   propagation, monodromy matrices and operator-norm FTLEs.
//! * [`experiment`]: Monte Carlo campaigns for the four stability regimes,
//!   approximation-order studies, and summary statistics.

pub mod amplitude;
pub mod engine;
pub mod experiment;
pub mod model;
pub mod noise;
pub mod spectral;

pub use model::Model;
pub use spectral::{Basis, PhysicalField, SpectralField};
