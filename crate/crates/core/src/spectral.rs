//! Trigonometric spectral bases with exact quadrature.
//!
//! A [`Basis`] holds `n` orthonormal eigenfunctions of a self-adjoint
//! operator sampled on a uniform midpoint grid of `m` points, together with
//! the quadrature weight `w = L / m`. For the sine and cosine families used
//! here the midpoint rule integrates trigonometric polynomials of frequency
//! index `< 2m` exactly, so with `m >= 2n + 1` every product of up to four
//! band-limited fields (cubic nonlinearities tested against a basis
//! function, quartic norms) is integrated without aliasing error. `m = 2n`
//! would already satisfy the usual 3/2 dealiasing rule but leaves the top
//! analysis mode contaminated; the extra point closes that gap.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("field has {found} entries, basis expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("basis needs at least one mode and one grid point")]
    EmptyBasis,
    #[error("mode index {index} out of range for {n_modes} modes")]
    ModeOutOfRange { index: usize, n_modes: usize },
}

/// Coefficients of a field in the eigenbasis, one entry per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField(pub Vec<f64>);

/// Point values of a field on the quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField(pub Vec<f64>);

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField(vec![0.0; n])
    }

    /// L2 norm; by orthonormality this equals the physical-space L2 norm.
    pub fn norm_h(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Orthonormal basis on `[0, L]` with synthesis and analysis tables.
#[derive(Debug, Clone)]
pub struct Basis {
    /// Domain length `L`.
    pub domain_len: f64,
    /// Midpoint grid `x_j = (j + 1/2) L / m`.
    pub grid: Vec<f64>,
    /// Uniform quadrature weight `L / m`.
    pub weight: f64,
    /// Synthesis table, row-major `m x n`: `synth[j*n + k] = e_k(x_j)`.
    synth: Vec<f64>,
    /// Transposed copy, row-major `n x m`, for stride-1 analysis sweeps.
    analy: Vec<f64>,
    n_modes: usize,
}

impl Basis {
    /// Build a basis by sampling `mode_fn(k, x)` for `k = 0..n` on the
    /// midpoint grid of `m` points.
    pub fn from_mode_fn(
        domain_len: f64,
        n: usize,
        m: usize,
        mode_fn: impl Fn(usize, f64) -> f64,
    ) -> Result<Self, SpectralError> {
        if n == 0 || m == 0 {
            return Err(SpectralError::EmptyBasis);
        }
        let h = domain_len / m as f64;
        let grid: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
        let mut synth = vec![0.0; m * n];
        let mut analy = vec![0.0; n * m];
        for (j, &x) in grid.iter().enumerate() {
            for k in 0..n {
                let v = mode_fn(k, x);
                synth[j * n + k] = v;
                analy[k * m + j] = v;
            }
        }
        Ok(Basis {
            domain_len,
            grid,
            weight: h,
            synth,
            analy,
            n_modes: n,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_grid(&self) -> usize {
        self.grid.len()
    }

    /// Default grid size giving exact quadrature for quartic products.
    pub fn exact_grid_size(n_modes: usize) -> usize {
        2 * n_modes + 1
    }

    fn check_spectral(&self, f: &SpectralField) -> Result<(), SpectralError> {
        if f.0.len() != self.n_modes {
            return Err(SpectralError::DimensionMismatch {
                expected: self.n_modes,
                found: f.0.len(),
            });
        }
        Ok(())
    }

    fn check_physical(&self, g: &PhysicalField) -> Result<(), SpectralError> {
        if g.0.len() != self.grid.len() {
            return Err(SpectralError::DimensionMismatch {
                expected: self.grid.len(),
                found: g.0.len(),
            });
        }
        Ok(())
    }

    /// Evaluate the field on the grid: `g_j = sum_k c_k e_k(x_j)`.
    pub fn to_physical(&self, f: &SpectralField) -> Result<PhysicalField, SpectralError> {
        self.check_spectral(f)?;
        let mut out = vec![0.0; self.grid.len()];
        self.synth_into(&f.0, &mut out);
        Ok(PhysicalField(out))
    }

    /// Project grid values onto the basis by quadrature:
    /// `c_k = w * sum_j g_j e_k(x_j)`.
    pub fn to_spectral(&self, g: &PhysicalField) -> Result<SpectralField, SpectralError> {
        self.check_physical(g)?;
        let mut out = vec![0.0; self.n_modes];
        self.analyze_into(&g.0, &mut out);
        Ok(SpectralField(out))
    }

    /// Synthesis without allocation; `out.len() == m`, `coeffs.len() == n`.
    #[inline]
    pub(crate) fn synth_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n_modes;
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(&self.synth[j * n..(j + 1) * n], coeffs);
        }
    }

    /// Analysis without allocation; includes the quadrature weight.
    #[inline]
    pub(crate) fn analyze_into(&self, values: &[f64], out: &mut [f64]) {
        let m = self.grid.len();
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.weight * dot(&self.analy[k * m..(k + 1) * m], values);
        }
    }

    pub(crate) fn synth_table(&self) -> &[f64] {
        &self.synth
    }

    pub(crate) fn analy_table(&self) -> &[f64] {
        &self.analy
    }

    /// Quadrature of a grid function: `w * sum_j g_j`.
    pub fn integrate(&self, g: &PhysicalField) -> Result<f64, SpectralError> {
        self.check_physical(g)?;
        Ok(self.weight * g.0.iter().sum::<f64>())
    }

    /// L2 inner product of two grid functions by quadrature.
    pub fn inner_grid(&self, a: &PhysicalField, b: &PhysicalField) -> Result<f64, SpectralError> {
        self.check_physical(a)?;
        self.check_physical(b)?;
        Ok(self.weight * dot(&a.0, &b.0))
    }

    /// L4 norm of a grid function by quadrature.
    pub fn norm_l4(&self, g: &PhysicalField) -> Result<f64, SpectralError> {
        self.check_physical(g)?;
        let q: f64 = g.0.iter().map(|v| v * v * v * v).sum();
        Ok((self.weight * q).powf(0.25))
    }
}

/// Plain dot product; chunked so LLVM vectorizes it with the host FMA units.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let pa = &a[i * 4..i * 4 + 4];
        let pb = &b[i * 4..i * 4 + 4];
        acc[0] += pa[0] * pb[0];
        acc[1] += pa[1] * pb[1];
        acc[2] += pa[2] * pb[2];
        acc[3] += pa[3] * pb[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Kernel-mode coefficient of a field.
pub fn kernel_component(f: &SpectralField, kernel_index: usize) -> Result<f64, SpectralError> {
    f.0.get(kernel_index)
        .copied()
        .ok_or(SpectralError::ModeOutOfRange {
            index: kernel_index,
            n_modes: f.0.len(),
        })
}

/// Copy of the field with the kernel mode removed (projection onto the
/// stable subspace).
pub fn stable_part(f: &SpectralField, kernel_index: usize) -> Result<SpectralField, SpectralError> {
    if kernel_index >= f.0.len() {
        return Err(SpectralError::ModeOutOfRange {
            index: kernel_index,
            n_modes: f.0.len(),
        });
    }
    let mut out = f.clone();
    out.0[kernel_index] = 0.0;
    Ok(out)
}

/// Norm of the stable-subspace projection without allocating.
pub fn stable_norm(f: &SpectralField, kernel_index: usize) -> Result<f64, SpectralError> {
    if kernel_index >= f.0.len() {
        return Err(SpectralError::ModeOutOfRange {
            index: kernel_index,
            n_modes: f.0.len(),
        });
    }
    let s: f64 = f
        .0
        .iter()
        .enumerate()
        .map(|(k, c)| if k == kernel_index { 0.0 } else { c * c })
        .sum();
    Ok(s.sqrt())
}

/// Apply the shifted semigroup `exp(t (A + nu))` mode by mode.
pub fn apply_semigroup(
    f: &SpectralField,
    eigenvalues: &[f64],
    nu: f64,
    t: f64,
) -> Result<SpectralField, SpectralError> {
    if f.0.len() != eigenvalues.len() {
        return Err(SpectralError::DimensionMismatch {
            expected: eigenvalues.len(),
            found: f.0.len(),
        });
    }
    Ok(SpectralField(
        f.0.iter()
            .zip(eigenvalues)
            .map(|(c, lam)| c * (t * (lam + nu)).exp())
            .collect(),
    ))
}

/// Fractional-power norm `|| (1 - A)^alpha f ||`; `alpha = 0` is the plain
/// H norm, `alpha = 1/2` the interpolation norm used for the stable-part
/// error estimates.
pub fn norm_halpha(
    f: &SpectralField,
    eigenvalues: &[f64],
    alpha: f64,
) -> Result<f64, SpectralError> {
    if f.0.len() != eigenvalues.len() {
        return Err(SpectralError::DimensionMismatch {
            expected: eigenvalues.len(),
            found: f.0.len(),
        });
    }
    let s: f64 = f
        .0
        .iter()
        .zip(eigenvalues)
        .map(|(c, lam)| {
            let w = (1.0 - lam).powf(alpha);
            (w * c) * (w * c)
        })
        .sum();
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine_basis(n: usize, m: usize) -> Basis {
        let l = std::f64::consts::PI;
        Basis::from_mode_fn(l, n, m, |k, x| {
            (2.0 / l).sqrt() * (((k + 1) as f64) * x).sin()
        })
        .unwrap()
    }

    #[test]
    fn orthonormality_is_exact_on_midpoint_grid() {
        let b = sine_basis(16, Basis::exact_grid_size(16));
        for k in 0..16 {
            let mut c = SpectralField::zeros(16);
            c.0[k] = 1.0;
            let g = b.to_physical(&c).unwrap();
            let back = b.to_spectral(&g).unwrap();
            for (i, v) in back.0.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(*v, want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn round_trip_with_generous_grid() {
        // m = 3n also integrates products exactly; round trip must be
        // identity to 1e-12 for arbitrary coefficients.
        let b = sine_basis(16, 48);
        let c = SpectralField((0..16).map(|k| (k as f64 * 0.71).sin()).collect());
        let back = b.to_spectral(&b.to_physical(&c).unwrap()).unwrap();
        for (x, y) in c.0.iter().zip(&back.0) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_identity_for_arbitrary_coefficients(
            coeffs in proptest::collection::vec(-10.0f64..10.0, 1..12)
        ) {
            let n = coeffs.len();
            let b = sine_basis(n, Basis::exact_grid_size(n));
            let c = SpectralField(coeffs);
            let back = b.to_spectral(&b.to_physical(&c).unwrap()).unwrap();
            for (x, y) in c.0.iter().zip(&back.0) {
                proptest::prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn parseval_ties_coefficient_and_grid_norms() {
        let b = sine_basis(12, Basis::exact_grid_size(12));
        let c = SpectralField((0..12).map(|k| 1.0 / (k as f64 + 1.0)).collect());
        let g = b.to_physical(&c).unwrap();
        let grid_norm = b.inner_grid(&g, &g).unwrap().sqrt();
        assert_abs_diff_eq!(grid_norm, c.norm_h(), epsilon = 1e-12);
    }

    #[test]
    fn quartic_quadrature_matches_analytic_sine_integral() {
        // int_0^pi sin^4(x) dx = 3 pi / 8, so || e_1 ||_L4^4 = (2/pi)^2 * 3pi/8
        // = 3 / (2 pi) for the normalized first sine mode.
        let b = sine_basis(8, Basis::exact_grid_size(8));
        let mut c = SpectralField::zeros(8);
        c.0[0] = 1.0;
        let g = b.to_physical(&c).unwrap();
        let l4 = b.norm_l4(&g).unwrap();
        assert_abs_diff_eq!(l4.powi(4), 3.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-12);
    }

    #[test]
    fn semigroup_contracts_stable_modes() {
        let eig = [0.0, -3.0, -8.0];
        let f = SpectralField(vec![0.0, 1.0, 1.0]);
        let out = apply_semigroup(&f, &eig, 0.0, 0.5).unwrap();
        // spectral gap 3 here: stable part must contract at least that fast
        let bound = (-0.5f64 * 3.0).exp() * f.norm_h();
        assert!(out.norm_h() <= bound + 1e-15);
    }

    #[test]
    fn halpha_weights_reduce_to_plain_norm_at_zero() {
        let eig = [0.0, -3.0, -8.0];
        let f = SpectralField(vec![0.3, -0.2, 0.9]);
        assert_abs_diff_eq!(
            norm_halpha(&f, &eig, 0.0).unwrap(),
            f.norm_h(),
            epsilon = 1e-15
        );
        // alpha = 1/2 weights each mode by sqrt(1 - lambda)
        let want = (0.09 + 4.0 * 0.04 + 9.0 * 0.81f64).sqrt();
        assert_abs_diff_eq!(norm_halpha(&f, &eig, 0.5).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported_not_panicked() {
        let b = sine_basis(4, 9);
        let wrong = SpectralField::zeros(5);
        assert_eq!(
            b.to_physical(&wrong).unwrap_err(),
            SpectralError::DimensionMismatch {
                expected: 4,
                found: 5
            }
        );
    }
}
