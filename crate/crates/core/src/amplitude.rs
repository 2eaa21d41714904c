//! The scalar amplitude SDE on the kernel mode.
//!
//! On the slow time scale the kernel amplitude of the SPDE follows
//!
//! ```text
//! db = (alpha b + c b^3) dT + s dbeta(T),    c < 0,
//! ```
//!
//! driven by the rescaled kernel noise. The linear coefficient `alpha` and
//! the noise amplitude `s` encode the parameter regime:
//!
//! * shared-noise supercritical scaling: `alpha = 1`, `s = sigma / nu`;
//! * critical scaling (`nu = 0`): `alpha = 0`, `s = 1`;
//! * near-critical scaling: `alpha = nu / sigma`, `s = 1`;
//! * general ansatz: `alpha = nu / eps^2`, `s = sigma / eps^2`.
//!
//! The toolkit here integrates the SDE on a [`SlowPath`], locates the
//! one-point pullback attractor, evaluates the stationary density in closed
//! form, and computes the finite-time Lyapunov exponent of the linearization
//! along a trajectory, which for a scalar equation is exact:
//! `lambda_T = alpha + (3 c / T) int_0^T a(s)^2 ds`.

use crate::noise::SlowPath;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AmplitudeError {
    #[error("cubic coefficient must be negative, got {0}")]
    CubicNotNegative(f64),
    #[error("noise amplitude must be nonnegative, got {0}")]
    NoiseNegative(f64),
    #[error("path does not cover steps [{from}, {to})")]
    PathTooShort { from: i64, to: i64 },
    #[error("pullback did not contract: residual {residual} at depth {depth_steps} steps")]
    NonContracting { residual: f64, depth_steps: usize },
}

/// Coefficients of the amplitude equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSpec {
    pub linear: f64,
    pub cubic: f64,
    pub noise_amp: f64,
}

impl AmplitudeSpec {
    pub fn new(linear: f64, cubic: f64, noise_amp: f64) -> Result<Self, AmplitudeError> {
        if cubic >= 0.0 {
            return Err(AmplitudeError::CubicNotNegative(cubic));
        }
        if noise_amp < 0.0 {
            return Err(AmplitudeError::NoiseNegative(noise_amp));
        }
        Ok(AmplitudeSpec {
            linear,
            cubic,
            noise_amp,
        })
    }

    /// Supercritical shared-noise scaling (`nu > 0` comparable to `sigma`).
    pub fn supercritical(sigma_over_nu: f64, cubic: f64) -> Result<Self, AmplitudeError> {
        Self::new(1.0, cubic, sigma_over_nu)
    }

    /// Critical scaling at `nu = 0`.
    pub fn critical(cubic: f64) -> Result<Self, AmplitudeError> {
        Self::new(0.0, cubic, 1.0)
    }

    /// Near-critical scaling for `0 < nu << sigma`.
    pub fn near_critical(nu_over_sigma: f64, cubic: f64) -> Result<Self, AmplitudeError> {
        Self::new(nu_over_sigma, cubic, 1.0)
    }

    /// General slow-scale ansatz for arbitrary `(nu, sigma)` at scale `eps`.
    pub fn general(nu: f64, sigma: f64, eps: f64, cubic: f64) -> Result<Self, AmplitudeError> {
        let e2 = eps * eps;
        Self::new(nu / e2, cubic, sigma / e2)
    }

    #[inline]
    fn drift(&self, b: f64) -> f64 {
        self.linear * b + self.cubic * b * b * b
    }

    /// Euler-Maruyama endpoint after `n` steps starting at slow index
    /// `start` (negative indices read the pullback tail).
    pub fn endpoint(
        &self,
        b0: f64,
        path: &SlowPath,
        start: i64,
        n: usize,
    ) -> Result<f64, AmplitudeError> {
        let dt = path.dt_slow;
        let mut b = b0;
        for j in 0..n {
            let idx = start + j as i64;
            let db = path
                .increment(idx)
                .ok_or(AmplitudeError::PathTooShort {
                    from: start,
                    to: start + n as i64,
                })?;
            b += dt * self.drift(b) + self.noise_amp * db;
            assert!(
                b.abs() <= 1e6,
                "amplitude blow-up: |b| reached {b:.3e}; reduce the slow step"
            );
        }
        Ok(b)
    }

    /// Full trajectory `[b(0), ..., b(n)]` (length `n + 1`).
    pub fn trajectory(
        &self,
        b0: f64,
        path: &SlowPath,
        start: i64,
        n: usize,
    ) -> Result<Vec<f64>, AmplitudeError> {
        let dt = path.dt_slow;
        let mut out = Vec::with_capacity(n + 1);
        let mut b = b0;
        out.push(b);
        for j in 0..n {
            let idx = start + j as i64;
            let db = path
                .increment(idx)
                .ok_or(AmplitudeError::PathTooShort {
                    from: start,
                    to: start + n as i64,
                })?;
            b += dt * self.drift(b) + self.noise_amp * db;
            assert!(
                b.abs() <= 1e6,
                "amplitude blow-up: |b| reached {b:.3e}; reduce the slow step"
            );
            out.push(b);
        }
        Ok(out)
    }

    /// One-point pullback attractor at slow index `anchor`: two bracketing
    /// trajectories started at `-R` and `+R` ever deeper in the past must
    /// collapse onto the same value at the anchor. Doubles the depth until
    /// the gap is below `tol`.
    pub fn pullback_attractor(
        &self,
        path: &mut SlowPath,
        anchor: i64,
        opts: PullbackOptions,
    ) -> Result<AttractorSample, AmplitudeError> {
        let mut depth = opts.initial_depth_steps.max(1);
        loop {
            let start = anchor - depth as i64;
            if start < 0 {
                path.ensure_past((-start) as usize);
            }
            let hi = self.endpoint(opts.bracket, path, start, depth)?;
            let lo = self.endpoint(-opts.bracket, path, start, depth)?;
            let residual = (hi - lo).abs();
            if residual <= opts.tol {
                return Ok(AttractorSample {
                    value: 0.5 * (hi + lo),
                    residual,
                    depth_steps: depth,
                });
            }
            if depth >= opts.max_depth_steps {
                return Err(AmplitudeError::NonContracting {
                    residual,
                    depth_steps: depth,
                });
            }
            depth = (depth * 2).min(opts.max_depth_steps);
        }
    }

    /// Stationary density of the SDE, `p(x) = exp(alpha x^2 / s^2
    /// + c x^4 / (2 s^2)) / Z`, normalized by quadrature over
    /// `[-cutoff, cutoff]`.
    pub fn invariant_density(&self, cutoff: f64, grid: usize) -> Density {
        Density::build(*self, cutoff, grid)
    }

    /// Unnormalized stationary density value.
    pub fn density_unnormalized(&self, x: f64) -> f64 {
        let s2 = self.noise_amp * self.noise_amp;
        ((self.linear * x * x + 0.5 * self.cubic * x * x * x * x) / s2).exp()
    }

    /// Time average `(1/T) int a^2` over a stored trajectory (trapezoid).
    pub fn birkhoff_average(traj: &[f64], dt_slow: f64) -> f64 {
        if traj.len() < 2 {
            return traj.first().map(|a| a * a).unwrap_or(0.0);
        }
        let t = dt_slow * (traj.len() - 1) as f64;
        trapezoid_sq(traj, dt_slow) / t
    }

    /// Finite-time Lyapunov exponent of the linearization along `traj`,
    /// exact for the scalar equation:
    /// `lambda_T = alpha + (3 c / T) int_0^T a(s)^2 ds`.
    pub fn sde_ftle(&self, traj: &[f64], dt_slow: f64) -> f64 {
        self.linear + 3.0 * self.cubic * Self::birkhoff_average(traj, dt_slow)
    }

    /// Smallness event for the positive-FTLE mechanism: the attractor value
    /// starts inside the ball of radius `eta = delta / (2 (1 + s))` and the
    /// driving noise stays within `eta / 2` over the first `horizon_steps`
    /// grid points.
    pub fn event_omega0(
        &self,
        a0: f64,
        path: &SlowPath,
        horizon_steps: usize,
        delta: f64,
    ) -> bool {
        let eta = self.event_radius(delta);
        a0.abs() < eta && path.sup_abs_beta(horizon_steps) <= 0.5 * eta
    }

    /// `eta = delta / (2 (1 + s))`.
    pub fn event_radius(&self, delta: f64) -> f64 {
        delta / (2.0 * (1.0 + self.noise_amp))
    }
}

/// Controls for [`AmplitudeSpec::pullback_attractor`].
#[derive(Debug, Clone, Copy)]
pub struct PullbackOptions {
    /// Starting bracket `|b(-S)| = R`.
    pub bracket: f64,
    /// Convergence tolerance on the bracket gap at the anchor.
    pub tol: f64,
    pub initial_depth_steps: usize,
    pub max_depth_steps: usize,
}

impl PullbackOptions {
    /// Defaults: bracket 10, tolerance 1e-8, initial depth 8 slow units,
    /// cap 512 slow units.
    pub fn standard(dt_slow: f64) -> Self {
        let per_unit = (1.0 / dt_slow).round() as usize;
        PullbackOptions {
            bracket: 10.0,
            tol: 1e-8,
            initial_depth_steps: (8 * per_unit).max(1),
            max_depth_steps: (512 * per_unit).max(2),
        }
    }
}

/// A converged pullback sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorSample {
    pub value: f64,
    pub residual: f64,
    pub depth_steps: usize,
}

/// Normalized stationary density with cached normalization and CDF table.
#[derive(Debug, Clone)]
pub struct Density {
    pub spec: AmplitudeSpec,
    pub cutoff: f64,
    norm: f64,
    /// Cumulative values on the uniform grid over `[-cutoff, cutoff]`.
    cdf_grid: Vec<f64>,
}

impl Density {
    fn build(spec: AmplitudeSpec, cutoff: f64, grid: usize) -> Density {
        let n = grid.max(512);
        let h = 2.0 * cutoff / n as f64;
        // trapezoid cumulative of the unnormalized density
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut prev = spec.density_unnormalized(-cutoff);
        cdf.push(0.0);
        for i in 1..=n {
            let x = -cutoff + i as f64 * h;
            let v = spec.density_unnormalized(x);
            acc += 0.5 * h * (prev + v);
            prev = v;
            cdf.push(acc);
        }
        let norm = acc;
        for v in cdf.iter_mut() {
            *v /= norm;
        }
        Density {
            spec,
            cutoff,
            norm,
            cdf_grid: cdf,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.spec.density_unnormalized(x) / self.norm
    }

    /// Normalization constant `Z` (mass of the unnormalized density).
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.cutoff {
            return 0.0;
        }
        if x >= self.cutoff {
            return 1.0;
        }
        let n = self.cdf_grid.len() - 1;
        let h = 2.0 * self.cutoff / n as f64;
        let pos = (x + self.cutoff) / h;
        let i = (pos.floor() as usize).min(n - 1);
        let frac = pos - i as f64;
        self.cdf_grid[i] * (1.0 - frac) + self.cdf_grid[i + 1] * frac
    }

    /// Raw moment `E[x^k]` by Simpson quadrature on a fine grid.
    pub fn moment(&self, k: u32) -> f64 {
        let n = 200_000;
        let h = 2.0 * self.cutoff / n as f64;
        let f = |x: f64| x.powi(k as i32) * self.spec.density_unnormalized(x);
        let mut s = f(-self.cutoff) + f(self.cutoff);
        for i in 1..n {
            let x = -self.cutoff + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0 / self.norm
    }
}

/// Trapezoid rule for `int a(t)^2 dt` over a uniform grid.
fn trapezoid_sq(traj: &[f64], dt: f64) -> f64 {
    let inner: f64 = traj[1..traj.len() - 1].iter().map(|a| a * a).sum();
    let ends = 0.5 * (traj[0] * traj[0] + traj[traj.len() - 1] * traj[traj.len() - 1]);
    dt * (inner + ends)
}
