//! The three concrete model problems.
//!
//! Each model supplies the eigenbasis of its linear part `A`, the eigenvalue
//! sequence, the kernel mode, the noise spectrum, and its cubic
//! nonlinearity. All three have a one-dimensional kernel and a dissipative
//! gradient nonlinearity, so `<DF(u) h, h> <= 0` pointwise in time.
//!
//! * **Allen-Cahn**: `A = Laplacian + 1` on `[0, pi]` with Dirichlet
//!   boundary conditions, eigenfunctions `sqrt(2/pi) sin(kx)`,
//!   `lambda_k = 1 - k^2`, kernel at `k = 1`, gap 3, `F(u) = -u^3`.
//! * **Swift-Hohenberg**: `A = -(1 + Laplacian)^2` on `[0, pi]` with
//!   Neumann boundary conditions, eigenfunctions `cos(mx)` (constant mode
//!   included), `lambda_m = -(1 - m^2)^2`, kernel at `m = 1`, gap 1,
//!   `F(u) = -u^3`.
//! * **Surface growth**: `A = -d^4/dx^4 - mu0 d^2/dx^2` with
//!   `mu0 = (pi/L)^2` on `[0, L]`, Neumann-type conditions in a zero-mean
//!   frame, eigenfunctions `sqrt(2/L) cos(m pi x / L)` for `m >= 1`,
//!   `lambda_m = (pi/L)^4 m^2 (1 - m^2)`, kernel at `m = 1`, and
//!   `F(h) = d/dx ( (h')^3 )`. The noise spectrum drops the constant mode
//!   (absent from the zero-mean frame) and the first Fourier mode, so the
//!   kernel carries no direct forcing. This model sits outside the strict
//!   scope of the amplitude reduction and is exercised qualitatively.

use crate::spectral::{dot, Basis, PhysicalField, SpectralField, SpectralError};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    AllenCahn,
    SwiftHohenberg,
    SurfaceGrowth,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::AllenCahn => "allen-cahn",
            ModelKind::SwiftHohenberg => "swift-hohenberg",
            ModelKind::SurfaceGrowth => "surface-growth",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        Some(match s {
            "allen-cahn" => ModelKind::AllenCahn,
            "swift-hohenberg" => ModelKind::SwiftHohenberg,
            "surface-growth" => ModelKind::SurfaceGrowth,
            _ => return None,
        })
    }
}

/// Which quartic spatial norm the dissipativity estimates use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XNorm {
    /// `L^4` norm of the field itself (Allen-Cahn, Swift-Hohenberg).
    ValueL4,
    /// `L^4` seminorm of the derivative (surface growth). The full
    /// `W^{1,4}` norm combining both is available as a diagnostic.
    DerivativeL4,
}

/// A model problem: eigenbasis data plus the cubic nonlinearity.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub basis: Basis,
    /// Eigenvalues of `A`, aligned with the basis modes; all `<= 0`.
    pub eigenvalues: Vec<f64>,
    /// Index of the kernel mode (`lambda = 0`).
    pub kernel_index: usize,
    /// Spectral gap: smallest `|lambda_k|` over the stable modes.
    pub spectral_gap: f64,
    /// Per-mode noise variances `q_k` for the cylindrical Wiener process.
    pub noise_spectrum: Vec<f64>,
    pub x_norm: XNorm,
    /// Synthesis table used by the nonlinearity (the derivative table for
    /// surface growth, the basis table otherwise); row-major `m x n`.
    nonlin_synth: Vec<f64>,
    /// Transposed copy for analysis sweeps; row-major `n x m`.
    nonlin_analy: Vec<f64>,
    cubic_coefficient: f64,
}

impl Model {
    /// Allen-Cahn with `n` sine modes on the quadrature grid of
    /// `2n + 1` points (exact for quartic products).
    pub fn allen_cahn(n: usize) -> Model {
        Self::allen_cahn_with_grid(n, Basis::exact_grid_size(n))
    }

    pub fn allen_cahn_with_grid(n: usize, m: usize) -> Model {
        let l = PI;
        let basis = Basis::from_mode_fn(l, n, m, |k, x| {
            (2.0 / l).sqrt() * (((k + 1) as f64) * x).sin()
        })
        .expect("nonempty basis");
        let eigenvalues: Vec<f64> = (0..n)
            .map(|k| {
                let mode = (k + 1) as f64;
                1.0 - mode * mode
            })
            .collect();
        Self::finish_value_cubic(ModelKind::AllenCahn, basis, eigenvalues, 0, vec![1.0; n])
    }

    /// Swift-Hohenberg with `n` cosine modes (constant mode included) on
    /// `[0, pi]`.
    pub fn swift_hohenberg(n: usize) -> Model {
        Self::swift_hohenberg_with_grid(n, Basis::exact_grid_size(n))
    }

    pub fn swift_hohenberg_with_grid(n: usize, m: usize) -> Model {
        assert!(n >= 2, "need the constant and the kernel cosine mode");
        let l = PI;
        let basis = Basis::from_mode_fn(l, n, m, |k, x| {
            if k == 0 {
                (1.0 / l).sqrt()
            } else {
                (2.0 / l).sqrt() * ((k as f64) * x).cos()
            }
        })
        .expect("nonempty basis");
        let eigenvalues: Vec<f64> = (0..n)
            .map(|k| {
                let m2 = (k * k) as f64;
                -(1.0 - m2) * (1.0 - m2)
            })
            .collect();
        Self::finish_value_cubic(ModelKind::SwiftHohenberg, basis, eigenvalues, 1, vec![1.0; n])
    }

    /// Surface growth with `n` nonconstant cosine modes on `[0, L]`,
    /// `L = 2 pi` by default.
    pub fn surface_growth(n: usize) -> Model {
        Self::surface_growth_with(n, Basis::exact_grid_size(n), 2.0 * PI)
    }

    pub fn surface_growth_with(n: usize, m: usize, domain_len: f64) -> Model {
        let l = domain_len;
        let basis = Basis::from_mode_fn(l, n, m, |k, x| {
            let q = ((k + 1) as f64) * PI / l;
            (2.0 / l).sqrt() * (q * x).cos()
        })
        .expect("nonempty basis");
        let mu0 = (PI / l) * (PI / l);
        let eigenvalues: Vec<f64> = (0..n)
            .map(|k| {
                let q = ((k + 1) as f64) * PI / l;
                let q2 = q * q;
                mu0 * q2 - q2 * q2
            })
            .collect();
        // derivative tables: e_k'(x_j) = -sqrt(2/L) q_k sin(q_k x_j)
        let mg = basis.n_grid();
        let mut dsynth = vec![0.0; mg * n];
        let mut danaly = vec![0.0; n * mg];
        for (j, &x) in basis.grid.iter().enumerate() {
            for k in 0..n {
                let q = ((k + 1) as f64) * PI / l;
                let v = -(2.0 / l).sqrt() * q * (q * x).sin();
                dsynth[j * n + k] = v;
                danaly[k * mg + j] = v;
            }
        }
        // noise: constant mode is outside the frame, first Fourier mode
        // (the kernel) is removed from the forcing
        let mut noise = vec![1.0; n];
        noise[0] = 0.0;
        let mut model = Model {
            kind: ModelKind::SurfaceGrowth,
            basis,
            eigenvalues,
            kernel_index: 0,
            spectral_gap: 0.0,
            noise_spectrum: noise,
            x_norm: XNorm::DerivativeL4,
            nonlin_synth: dsynth,
            nonlin_analy: danaly,
            cubic_coefficient: 0.0,
        };
        model.spectral_gap = model.compute_gap();
        model.cubic_coefficient = model.compute_cubic_coefficient();
        model
    }

    fn finish_value_cubic(
        kind: ModelKind,
        basis: Basis,
        eigenvalues: Vec<f64>,
        kernel_index: usize,
        noise_spectrum: Vec<f64>,
    ) -> Model {
        let nonlin_synth = basis.synth_table().to_vec();
        let nonlin_analy = basis.analy_table().to_vec();
        let mut model = Model {
            kind,
            basis,
            eigenvalues,
            kernel_index,
            spectral_gap: 0.0,
            noise_spectrum,
            x_norm: XNorm::ValueL4,
            nonlin_synth,
            nonlin_analy,
            cubic_coefficient: 0.0,
        };
        model.spectral_gap = model.compute_gap();
        model.cubic_coefficient = model.compute_cubic_coefficient();
        model
    }

    fn compute_gap(&self) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.kernel_index)
            .map(|(_, lam)| lam.abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn compute_cubic_coefficient(&self) -> f64 {
        let n = self.n_modes();
        let mut e = SpectralField::zeros(n);
        e.0[self.kernel_index] = 1.0;
        let f = self.eval_f(&e).expect("kernel mode fits the basis");
        f.0[self.kernel_index]
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_grid(&self) -> usize {
        self.basis.n_grid()
    }

    /// Projected cubic coefficient `c_F = <F(e), e> < 0` of the kernel mode;
    /// the amplitude equation inherits it as the coefficient of `b^3`.
    pub fn cubic_coefficient(&self) -> f64 {
        self.cubic_coefficient
    }

    /// Normalized kernel eigenfunction as a coefficient vector.
    pub fn kernel_mode(&self) -> SpectralField {
        let mut e = SpectralField::zeros(self.n_modes());
        e.0[self.kernel_index] = 1.0;
        e
    }

    /// Evaluate `F(u)` in coefficients. For the value cubics this is the
    /// projection of `-u^3`; for surface growth `F(h) = (h'^3)'` evaluated
    /// weakly through the derivative tables, which is the same projection
    /// after one integration by parts.
    pub fn eval_f(&self, u: &SpectralField) -> Result<SpectralField, SpectralError> {
        let n = self.n_modes();
        if u.0.len() != n {
            return Err(SpectralError::DimensionMismatch {
                expected: n,
                found: u.0.len(),
            });
        }
        let m = self.n_grid();
        let mut grid = vec![0.0; m];
        self.nonlin_grid_into(&u.0, &mut grid);
        let mut out = vec![0.0; n];
        let w = self.basis.weight;
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.nonlin_analy[k * m..(k + 1) * m];
            let mut s = 0.0;
            for (r, g) in row.iter().zip(&grid) {
                s += r * g * g * g;
            }
            *o = -w * s;
        }
        Ok(SpectralField(out))
    }

    /// Apply the Frechet derivative `DF(u)` to a direction `h`.
    pub fn eval_df(
        &self,
        u: &SpectralField,
        h: &SpectralField,
    ) -> Result<SpectralField, SpectralError> {
        let n = self.n_modes();
        if u.0.len() != n || h.0.len() != n {
            return Err(SpectralError::DimensionMismatch {
                expected: n,
                found: if u.0.len() != n { u.0.len() } else { h.0.len() },
            });
        }
        let m = self.n_grid();
        let mut grid_u = vec![0.0; m];
        self.nonlin_grid_into(&u.0, &mut grid_u);
        let mut factor = vec![0.0; m];
        self.df_factor_into(&grid_u, 1.0, &mut factor);
        let mut grid_h = vec![0.0; m];
        self.nonlin_grid_into(&h.0, &mut grid_h);
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.nonlin_analy[k * m..(k + 1) * m];
            let mut s = 0.0;
            for ((r, f), g) in row.iter().zip(&factor).zip(&grid_h) {
                s += r * f * g;
            }
            *o = s;
        }
        Ok(SpectralField(out))
    }

    /// Grid factor of `DF(u)`: `-3 u(x)^2` (or `-3 (h')^2`) times the
    /// quadrature weight and an extra `scale`, so the engine can fold `dt`
    /// into the same sweep.
    #[inline]
    pub(crate) fn df_factor_into(&self, nonlin_grid_u: &[f64], scale: f64, out: &mut [f64]) {
        let c = -3.0 * self.basis.weight * scale;
        for (o, g) in out.iter_mut().zip(nonlin_grid_u) {
            *o = c * g * g;
        }
    }

    /// Synthesize the grid function entering the nonlinearity (the field
    /// itself, or its derivative for surface growth).
    #[inline]
    pub(crate) fn nonlin_grid_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n_modes();
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(&self.nonlin_synth[j * n..(j + 1) * n], coeffs);
        }
    }

    #[inline]
    pub(crate) fn nonlin_analy_table(&self) -> &[f64] {
        &self.nonlin_analy
    }

    /// Quartic spatial norm entering the dissipativity estimates:
    /// `||u||_{L^4}` for the value cubics, `||u'||_{L^4}` for surface
    /// growth.
    pub fn norm_x(&self, u: &SpectralField) -> Result<f64, SpectralError> {
        let n = self.n_modes();
        if u.0.len() != n {
            return Err(SpectralError::DimensionMismatch {
                expected: n,
                found: u.0.len(),
            });
        }
        let m = self.n_grid();
        let mut grid = vec![0.0; m];
        self.nonlin_grid_into(&u.0, &mut grid);
        let q: f64 = grid.iter().map(|v| v * v * v * v).sum();
        Ok((self.basis.weight * q).powf(0.25))
    }

    /// Full `W^{1,4}`-type norm `(||u||_4^4 + ||u'||_4^4)^{1/4}` for surface
    /// growth diagnostics; equals [`Model::norm_x`] composition for the
    /// value-cubic models where no derivative table exists.
    pub fn norm_x_full(&self, u: &SpectralField) -> Result<f64, SpectralError> {
        match self.x_norm {
            XNorm::ValueL4 => self.norm_x(u),
            XNorm::DerivativeL4 => {
                let g = self.basis.to_physical(u)?;
                let value = self.basis.norm_l4(&g)?;
                let semi = self.norm_x(u)?;
                Ok((value.powi(4) + semi.powi(4)).powf(0.25))
            }
        }
    }

    /// Physical values of the field itself (not the derivative), for error
    /// norms and output.
    pub fn to_physical(&self, u: &SpectralField) -> Result<PhysicalField, SpectralError> {
        self.basis.to_physical(u)
    }

    /// Stationary noise energy on the stable modes, `sum q_k / (2 |lambda_k|)`;
    /// finite for all three catalogs, recorded in validation output.
    pub fn stable_noise_trace(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.noise_spectrum)
            .enumerate()
            .filter(|(k, _)| *k != self.kernel_index)
            .map(|(_, (lam, q))| q / (2.0 * lam.abs()))
            .sum()
    }

    /// Structural health data for `validate` output.
    pub fn health(&self) -> ModelHealth {
        let kernel_eig = self.eigenvalues[self.kernel_index];
        let kernel_dim = self
            .eigenvalues
            .iter()
            .filter(|lam| lam.abs() < 1e-12)
            .count();
        ModelHealth {
            name: self.kind.name(),
            n_modes: self.n_modes(),
            kernel_index: self.kernel_index,
            kernel_eigenvalue: kernel_eig,
            kernel_dimension: kernel_dim,
            spectral_gap: self.spectral_gap,
            stable_noise_trace: self.stable_noise_trace(),
            cubic_coefficient: self.cubic_coefficient,
            stiffest_eigenvalue: self.eigenvalues.iter().cloned().fold(0.0, f64::min),
        }
    }
}

/// Structural facts about a model, checked by `validate` and recorded in
/// reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHealth {
    pub name: &'static str,
    pub n_modes: usize,
    pub kernel_index: usize,
    pub kernel_eigenvalue: f64,
    pub kernel_dimension: usize,
    pub spectral_gap: f64,
    pub stable_noise_trace: f64,
    pub cubic_coefficient: f64,
    pub stiffest_eigenvalue: f64,
}

impl ModelHealth {
    /// All structural invariants at once; violations listed, empty = sound.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kernel_eigenvalue.abs() > 1e-12 {
            out.push(format!(
                "kernel eigenvalue {} not zero",
                self.kernel_eigenvalue
            ));
        }
        if self.kernel_dimension != 1 {
            out.push(format!("kernel dimension {} != 1", self.kernel_dimension));
        }
        if self.spectral_gap <= 0.0 {
            out.push(format!("spectral gap {} not positive", self.spectral_gap));
        }
        if !self.stable_noise_trace.is_finite() {
            out.push("stable noise trace diverges".to_string());
        }
        if self.cubic_coefficient >= 0.0 {
            out.push(format!(
                "projected cubic coefficient {} not negative",
                self.cubic_coefficient
            ));
        }
        out
    }
}
