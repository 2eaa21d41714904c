//! Exponential-Euler SPDE integrator with monodromy propagation.
//!
//! One step of `du = [A u + nu u + F(u)] dt + sigma dW` freezes the
//! nonlinearity over the step and applies the shifted semigroup exactly:
//!
//! ```text
//! u_{n+1} = E (u_n + dt F(u_n)) + sigma xi_n,    E = exp((A + nu) dt),
//! ```
//!
//! where `xi_n` is the exact Ornstein-Uhlenbeck increment of the linear
//! equation: per mode `xi_k = ou_std(q_k, lambda_k + nu, dt) n_k` with
//! independent unit normals `n_k` taken from a [`WienerPath`] row. The same
//! unit normals drive every object derived from the path (the stochastic
//! convolution, the slow kernel noise), so comparisons between the SPDE and
//! its reductions see one Brownian motion, not two.
//!
//! The linearization along a trajectory is propagated with the same scheme,
//! `v_{n+1} = E (v_n + dt DF(u_n) v_n)`, either for a single direction or
//! for a full basis at once (the monodromy matrix). The finite-time
//! Lyapunov exponent is `ln ||U(t)|| / t` with the operator norm taken as
//! the largest singular value.

use crate::model::Model;
use crate::noise::WienerPath;
use crate::spectral::SpectralField;

/// Standard deviation of the exact OU increment for one mode:
/// `sqrt(q (exp(2 r dt) - 1) / (2 r))`, continuously extended to
/// `sqrt(q dt)` at rate zero.
#[inline]
pub fn ou_std(q: f64, rate: f64, dt: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    if rate == 0.0 {
        (q * dt).sqrt()
    } else {
        (q * (2.0 * rate * dt).exp_m1() / (2.0 * rate)).sqrt()
    }
}

/// Result of an FTLE evaluation: `lambda * horizon = log_opnorm` by
/// construction.
#[derive(Debug, Clone)]
pub struct FtleSample {
    pub lambda: f64,
    /// `ln` of the largest singular value of the monodromy matrix.
    pub log_opnorm: f64,
    pub horizon: f64,
    pub final_state: SpectralField,
    /// Operator-norm route taken: `"full-svd"` or `"power-iteration"`.
    pub method: &'static str,
    /// `sigma_max / sigma_min` of the monodromy matrix when the SVD route
    /// ran (infinite for a singular matrix), `None` for power iteration.
    pub condition: Option<f64>,
}

/// Precomputed per-mode tables for a fixed `(model, nu, sigma, dt)`.
pub struct SpdeEngine<'a> {
    pub model: &'a Model,
    pub nu: f64,
    pub sigma: f64,
    pub dt: f64,
    /// `exp((lambda_k + nu) dt)` — the shifted semigroup over one step.
    e_semi: Vec<f64>,
    /// `sigma * ou_std(q_k, lambda_k + nu, dt)` — forcing per unit normal.
    s_force: Vec<f64>,
    /// `exp(lambda_k dt)` — the plain semigroup for the convolution.
    e_conv: Vec<f64>,
    /// `ou_std(q_k, lambda_k, dt)` — unscaled convolution increment.
    s_conv: Vec<f64>,
}

struct Scratch {
    grid: Vec<f64>,
    normals: Vec<f64>,
    factor: Vec<f64>,
    drift: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, m: usize) -> Scratch {
        Scratch {
            grid: vec![0.0; m],
            normals: vec![0.0; n],
            factor: vec![0.0; m],
            drift: vec![0.0; n],
        }
    }
}

impl<'a> SpdeEngine<'a> {
    pub fn new(model: &'a Model, nu: f64, sigma: f64, dt: f64) -> SpdeEngine<'a> {
        assert!(dt > 0.0, "step size must be positive");
        assert!(sigma >= 0.0, "noise level must be nonnegative");
        let e_semi: Vec<f64> = model
            .eigenvalues
            .iter()
            .map(|lam| ((lam + nu) * dt).exp())
            .collect();
        let s_force: Vec<f64> = model
            .eigenvalues
            .iter()
            .zip(&model.noise_spectrum)
            .map(|(lam, q)| sigma * ou_std(*q, lam + nu, dt))
            .collect();
        let e_conv: Vec<f64> = model
            .eigenvalues
            .iter()
            .map(|lam| (lam * dt).exp())
            .collect();
        let s_conv: Vec<f64> = model
            .eigenvalues
            .iter()
            .zip(&model.noise_spectrum)
            .map(|(lam, q)| ou_std(*q, *lam, dt))
            .collect();
        SpdeEngine {
            model,
            nu,
            sigma,
            dt,
            e_semi,
            s_force,
            e_conv,
            s_conv,
        }
    }

    fn check_path(&self, path: &WienerPath, n_steps: usize) {
        assert_eq!(
            path.n_modes,
            self.model.n_modes(),
            "path mode count must match the model"
        );
        assert!(path.dt == self.dt, "path step size must match the engine");
        assert!(n_steps <= path.n_steps, "path too short for the horizon");
    }

    /// Drift sweep: `grid = nonlinearity input on the grid`, `drift[k] =
    /// dt * F(u)[k]`, using one synthesis of `u`.
    #[inline]
    fn drift_into(&self, u: &[f64], sc: &mut Scratch) {
        let m = self.model.n_grid();
        self.model.nonlin_grid_into(u, &mut sc.grid);
        let w = self.model.basis.weight * self.dt;
        let analy = self.model.nonlin_analy_table();
        for (k, o) in sc.drift.iter_mut().enumerate() {
            let row = &analy[k * m..(k + 1) * m];
            let mut s = 0.0;
            for (r, g) in row.iter().zip(&sc.grid) {
                s += r * g * g * g;
            }
            *o = -w * s;
        }
    }

    /// One field step given the unit normals of the row; `sc.grid` must
    /// already hold the nonlinearity input of `u` (it is reused for the
    /// tangent factor by the monodromy loop).
    #[inline]
    fn step_field(&self, u: &mut [f64], sc: &Scratch) {
        let mut energy = 0.0;
        for (k, v) in u.iter_mut().enumerate() {
            *v = self.e_semi[k] * (*v + sc.drift[k]) + self.s_force[k] * sc.normals[k];
            energy += *v * *v;
        }
        assert!(
            energy <= 1e12,
            "field blow-up: ||u||^2 reached {energy:.3e}; reduce dt or check parameters"
        );
    }

    /// Integrate the SPDE for `n_steps`, observing every state (including
    /// the initial one) as `(step, coefficients)`.
    pub fn integrate_observe(
        &self,
        u0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> SpectralField {
        self.check_path(path, n_steps);
        let n = self.model.n_modes();
        assert_eq!(u0.len(), n);
        let mut sc = Scratch::new(n, self.model.n_grid());
        let mut u = u0.0.clone();
        observe(0, &u);
        let mut cursor = path.cursor_at_step(0);
        for step in 0..n_steps {
            cursor.fill_row(&mut sc.normals);
            self.drift_into(&u, &mut sc);
            self.step_field(&mut u, &sc);
            observe(step + 1, &u);
        }
        SpectralField(u)
    }

    pub fn integrate(
        &self,
        u0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
    ) -> SpectralField {
        self.integrate_observe(u0, path, n_steps, |_, _| {})
    }

    /// Integrate the SPDE and the stochastic convolution `Z` of the plain
    /// semigroup side by side on the same unit normals. `Z` starts at zero
    /// and is unscaled (multiply by `sigma` to get the noise response).
    pub fn integrate_coupled_observe(
        &self,
        u0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
        mut observe: impl FnMut(usize, &[f64], &[f64]),
    ) -> (SpectralField, SpectralField) {
        self.check_path(path, n_steps);
        let n = self.model.n_modes();
        assert_eq!(u0.len(), n);
        let mut sc = Scratch::new(n, self.model.n_grid());
        let mut u = u0.0.clone();
        let mut z = vec![0.0; n];
        observe(0, &u, &z);
        let mut cursor = path.cursor_at_step(0);
        for step in 0..n_steps {
            cursor.fill_row(&mut sc.normals);
            self.drift_into(&u, &mut sc);
            self.step_field(&mut u, &sc);
            for (k, zv) in z.iter_mut().enumerate() {
                *zv = self.e_conv[k] * *zv + self.s_conv[k] * sc.normals[k];
            }
            observe(step + 1, &u, &z);
        }
        (SpectralField(u), SpectralField(z))
    }

    /// Integrate the field together with one tangent direction,
    /// `v_{n+1} = E (v_n + dt DF(u_n) v_n)`.
    pub fn integrate_variation_observe(
        &self,
        u0: &SpectralField,
        v0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
        mut observe: impl FnMut(usize, &[f64], &[f64]),
    ) -> (SpectralField, SpectralField) {
        self.check_path(path, n_steps);
        let n = self.model.n_modes();
        let m = self.model.n_grid();
        assert_eq!(u0.len(), n);
        assert_eq!(v0.len(), n);
        let mut sc = Scratch::new(n, m);
        let mut gv = vec![0.0; m];
        let mut u = u0.0.clone();
        let mut v = v0.0.clone();
        observe(0, &u, &v);
        let analy = self.model.nonlin_analy_table();
        let mut cursor = path.cursor_at_step(0);
        for step in 0..n_steps {
            cursor.fill_row(&mut sc.normals);
            self.drift_into(&u, &mut sc);
            // tangent factor from the same synthesis of u
            self.model.df_factor_into(&sc.grid, self.dt, &mut sc.factor);
            self.model.nonlin_grid_into(&v, &mut gv);
            for (g, f) in gv.iter_mut().zip(&sc.factor) {
                *g *= f;
            }
            for (k, vk) in v.iter_mut().enumerate() {
                let row = &analy[k * m..(k + 1) * m];
                *vk = self.e_semi[k] * (*vk + crate::spectral::dot(row, &gv));
            }
            self.step_field(&mut u, &sc);
            observe(step + 1, &u, &v);
        }
        (SpectralField(u), SpectralField(v))
    }

    pub fn integrate_variation(
        &self,
        u0: &SpectralField,
        v0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
    ) -> (SpectralField, SpectralField) {
        self.integrate_variation_observe(u0, v0, path, n_steps, |_, _, _| {})
    }

    /// Propagate the full monodromy matrix `U(t)` of the linearization
    /// along the trajectory from `u0`. Returns the final field and the
    /// matrix in column-major order (`matrix[k + n * c]` is row `k` of
    /// column `c`, the image of the `c`-th basis vector).
    ///
    /// Per step the tangent update is `V <- E (V + S V)` where
    /// `S = B^T diag(-3 w dt u^2) B` is symmetric; building `S` once and
    /// applying it as a plain matrix-matrix product costs about half the
    /// flops of sweeping every column through physical space.
    pub fn monodromy(
        &self,
        u0: &SpectralField,
        path: &WienerPath,
        n_steps: usize,
    ) -> (SpectralField, Vec<f64>) {
        self.check_path(path, n_steps);
        let n = self.model.n_modes();
        let m = self.model.n_grid();
        assert_eq!(u0.len(), n);
        let mut sc = Scratch::new(n, m);
        let mut u = u0.0.clone();
        // V = I, column-major
        let mut vmat = vec![0.0; n * n];
        for k in 0..n {
            vmat[k + n * k] = 1.0;
        }
        let mut h = vec![0.0; n * m]; // factor-weighted analysis rows
        let mut s = vec![0.0; n * n]; // symmetric tangent operator, row-major
        let mut y = vec![0.0; n];
        let analy = self.model.nonlin_analy_table();
        let mut cursor = path.cursor_at_step(0);
        for _ in 0..n_steps {
            cursor.fill_row(&mut sc.normals);
            self.drift_into(&u, &mut sc);
            self.model.df_factor_into(&sc.grid, self.dt, &mut sc.factor);
            for l in 0..n {
                let src = &analy[l * m..(l + 1) * m];
                let dst = &mut h[l * m..(l + 1) * m];
                for j in 0..m {
                    dst[j] = sc.factor[j] * src[j];
                }
            }
            for k in 0..n {
                let row_k = &analy[k * m..(k + 1) * m];
                for l in k..n {
                    let v = crate::spectral::dot(row_k, &h[l * m..(l + 1) * m]);
                    s[k * n + l] = v;
                    s[l * n + k] = v;
                }
            }
            for c in 0..n {
                let col = &mut vmat[c * n..(c + 1) * n];
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk = crate::spectral::dot(&s[k * n..(k + 1) * n], col);
                }
                for k in 0..n {
                    col[k] = self.e_semi[k] * (col[k] + y[k]);
                }
            }
            self.step_field(&mut u, &sc);
        }
        (SpectralField(u), vmat)
    }

    /// Finite-time Lyapunov exponent over `n_steps`:
    /// `lambda = ln(sigma_max(U)) / t`.
    pub fn ftle(&self, u0: &SpectralField, path: &WienerPath, n_steps: usize) -> FtleSample {
        assert!(n_steps > 0, "FTLE needs a positive horizon");
        let (final_state, vmat) = self.monodromy(u0, path, n_steps);
        let n = self.model.n_modes();
        let (opnorm, method, condition) = operator_norm_detail(&vmat, n);
        let log_opnorm = opnorm.ln();
        let horizon = self.dt * n_steps as f64;
        FtleSample {
            lambda: log_opnorm / horizon,
            log_opnorm,
            horizon,
            final_state,
            method,
            condition,
        }
    }
}

/// Largest singular value of a square matrix in column-major order.
/// Dense SVD for moderate sizes, power iteration on `M^T M` above that.
pub fn operator_norm(matrix: &[f64], n: usize) -> f64 {
    operator_norm_detail(matrix, n).0
}

/// Operator norm plus which route computed it and, on the SVD route, the
/// condition number `sigma_max / sigma_min`.
pub fn operator_norm_detail(matrix: &[f64], n: usize) -> (f64, &'static str, Option<f64>) {
    assert_eq!(matrix.len(), n * n);
    if n <= 128 {
        let sv = nalgebra::DMatrix::from_column_slice(n, n, matrix)
            .svd(false, false)
            .singular_values;
        let top = sv[0];
        let bottom = sv[sv.len() - 1];
        (top, "full-svd", Some(top / bottom))
    } else {
        (operator_norm_power(matrix, n), "power-iteration", None)
    }
}

/// Largest singular value by dense SVD, any size. Exposed so the two
/// routes can be cross-checked against each other.
pub fn operator_norm_svd(matrix: &[f64], n: usize) -> f64 {
    let m = nalgebra::DMatrix::from_column_slice(n, n, matrix);
    m.svd(false, false).singular_values[0]
}

/// Power iteration on `M^T M` with a deterministic start vector; converges
/// to `sigma_max^2` geometrically in the singular-gap ratio. Stops at a
/// relative increment of 1e-10 or 500 iterations, whichever comes first.
pub fn operator_norm_power(matrix: &[f64], n: usize) -> f64 {
    let mut x = vec![0.0; n];
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for v in x.iter_mut() {
        // xorshift64* — deterministic, dependency-free initialization
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let r = state.wrapping_mul(0x2545_F491_4F6C_DD1D);
        *v = ((r >> 11) as f64) * (1.0 / 9007199254740992.0) - 0.5;
    }
    let norm0 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x.iter_mut() {
        *v /= norm0;
    }
    let mut mx = vec![0.0; n];
    let mut mtmx = vec![0.0; n];
    let mut prev = 0.0f64;
    for _ in 0..500 {
        // mx = M x (column-major: accumulate columns)
        mx.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..n {
            let col = &matrix[c * n..(c + 1) * n];
            let xc = x[c];
            for k in 0..n {
                mx[k] += col[k] * xc;
            }
        }
        // mtmx = M^T (M x): dot of each column with mx
        for c in 0..n {
            let col = &matrix[c * n..(c + 1) * n];
            mtmx[c] = crate::spectral::dot(col, &mx);
        }
        let norm = mtmx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let sigma = norm.sqrt();
        for (xv, mv) in x.iter_mut().zip(&mtmx) {
            *xv = mv / norm;
        }
        if (sigma - prev).abs() <= 1e-10 * sigma.max(1e-300) {
            return sigma;
        }
        prev = sigma;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::noise::{NoiseKey, Stream, WienerPath};
    use approx::assert_abs_diff_eq;

    fn test_path(model: &Model, dt: f64, n_steps: usize, seed: u64) -> WienerPath {
        WienerPath::new(
            NoiseKey::new(seed, 0, Stream::Forward),
            dt,
            n_steps,
            model.n_modes(),
        )
    }

    #[test]
    fn ou_std_limits() {
        // rate zero reduces to sqrt(q dt); strongly damped modes saturate
        // at the stationary std sqrt(q / (2 |rate|))
        assert_abs_diff_eq!(ou_std(2.0, 0.0, 1e-3), (2e-3f64).sqrt(), epsilon = 1e-15);
        let sat = ou_std(1.0, -400.0, 1.0);
        assert_abs_diff_eq!(sat, (1.0f64 / 800.0).sqrt(), epsilon = 1e-12);
        assert_eq!(ou_std(0.0, -3.0, 1e-3), 0.0);
        // small-rate expansion stays positive and finite
        let tiny = ou_std(1.0, 1e-12, 1e-3);
        assert!(tiny > 0.0 && tiny.is_finite());
    }

    #[test]
    fn zero_noise_zero_state_stays_zero_and_ftle_is_nu() {
        let model = Model::allen_cahn(16);
        let nu = 0.37;
        let engine = SpdeEngine::new(&model, nu, 0.0, 1e-3);
        let path = test_path(&model, 1e-3, 500, 1);
        let u0 = SpectralField::zeros(16);
        let sample = engine.ftle(&u0, &path, 500);
        assert!(sample.final_state.norm_h() == 0.0);
        // monodromy is exactly diag(exp((lambda_k + nu) t)); top singular
        // value is the kernel entry
        assert_abs_diff_eq!(sample.lambda, nu, epsilon = 1e-8);
        assert_abs_diff_eq!(
            sample.lambda * sample.horizon,
            sample.log_opnorm,
            epsilon = 1e-12
        );
    }

    #[test]
    fn linear_monodromy_is_the_diagonal_semigroup() {
        // u == 0 makes DF vanish even with the nonlinearity enabled, so the
        // propagated matrix must equal the diagonal semigroup to roundoff.
        let model = Model::swift_hohenberg(12);
        let nu = 0.05;
        let dt = 2e-3;
        let steps = 250;
        let engine = SpdeEngine::new(&model, nu, 0.0, dt);
        let path = test_path(&model, dt, steps, 2);
        let (_, vmat) = engine.monodromy(&SpectralField::zeros(12), &path, steps);
        let t = dt * steps as f64;
        for c in 0..12 {
            for k in 0..12 {
                let want = if k == c {
                    ((model.eigenvalues[k] + nu) * t).exp()
                } else {
                    0.0
                };
                assert_abs_diff_eq!(vmat[k + 12 * c], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monodromy_columns_match_single_tangent_runs() {
        let model = Model::allen_cahn(10);
        let engine = SpdeEngine::new(&model, 0.02, 0.5, 1e-3);
        let path = test_path(&model, 1e-3, 200, 3);
        let u0 = SpectralField((0..10).map(|k| 0.3 / (k + 1) as f64).collect());
        let (_, vmat) = engine.monodromy(&u0, &path, 200);
        for c in [0usize, 4, 9] {
            let mut e = SpectralField::zeros(10);
            e.0[c] = 1.0;
            let (_, v) = engine.integrate_variation(&u0, &e, &path, 200);
            for k in 0..10 {
                assert_abs_diff_eq!(vmat[k + 10 * c], v.0[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tangent_propagation_is_linear_in_the_initial_direction() {
        let model = Model::allen_cahn(9);
        let engine = SpdeEngine::new(&model, 0.03, 0.2, 1e-3);
        let path = test_path(&model, 1e-3, 300, 17);
        let u0 = SpectralField((0..9).map(|k| 0.4 * ((k as f64) * 1.1).cos()).collect());
        let a = SpectralField((0..9).map(|k| ((k * 7 + 1) as f64 * 0.23).sin()).collect());
        let b = SpectralField((0..9).map(|k| ((k * 3 + 2) as f64 * 0.61).cos()).collect());
        let combo = SpectralField(
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| 2.0 * x + 3.0 * y)
                .collect(),
        );
        let (_, va) = engine.integrate_variation(&u0, &a, &path, 300);
        let (_, vb) = engine.integrate_variation(&u0, &b, &path, 300);
        let (_, vc) = engine.integrate_variation(&u0, &combo, &path, 300);
        for k in 0..9 {
            assert_abs_diff_eq!(vc.0[k], 2.0 * va.0[k] + 3.0 * vb.0[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn tangent_norm_respects_the_dissipative_bound() {
        // DF is a nonpositive multiplication operator, so the tangent can
        // never outgrow the shifted semigroup: ||v(t)|| <= e^{nu t} ||v0||.
        let model = Model::allen_cahn(12);
        let nu = 0.2;
        let dt = 1e-3;
        let engine = SpdeEngine::new(&model, nu, 0.5, dt);
        let path = test_path(&model, dt, 1500, 21);
        let u0 = SpectralField((0..12).map(|k| 0.5 / (k + 1) as f64).collect());
        let v0 = SpectralField((0..12).map(|k| ((k + 1) as f64 * 0.37).sin()).collect());
        let norm0 = v0.norm_h();
        let mut ok = true;
        engine.integrate_variation_observe(&u0, &v0, &path, 1500, |step, _u, v| {
            let t = dt * step as f64;
            let bound = (nu * t).exp() * norm0 * (1.0 + 1e-10);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > bound {
                ok = false;
            }
        });
        assert!(ok, "tangent grew faster than the semigroup bound");
    }

    #[test]
    #[should_panic(expected = "field blow-up")]
    fn diverging_field_panics_instead_of_overflowing() {
        // nu far too large for the horizon: the kernel mode explodes and
        // the guard must fire before inf/NaN propagate
        let model = Model::allen_cahn(4);
        let engine = SpdeEngine::new(&model, 40.0, 0.0, 1.0);
        let path = test_path(&model, 1.0, 2000, 22);
        let u0 = SpectralField(vec![1.0, 0.0, 0.0, 0.0]);
        engine.integrate(&u0, &path, 2000);
    }

    #[test]
    fn ftle_records_the_operator_norm_route() {
        let model = Model::allen_cahn(8);
        let engine = SpdeEngine::new(&model, 0.0, 0.1, 1e-2);
        let path = test_path(&model, 1e-2, 50, 23);
        let s = engine.ftle(&SpectralField::zeros(8), &path, 50);
        assert_eq!(s.method, "full-svd");
        let cond = s.condition.expect("svd route reports conditioning");
        assert!(cond >= 1.0);
    }

    #[test]
    fn svd_and_power_iteration_agree_on_a_monodromy_matrix() {
        // realistic input for the large-n fallback: an actual propagated
        // matrix at n = 64, where the two routes must agree tightly
        let n = 64;
        let model = Model::allen_cahn(n);
        let engine = SpdeEngine::new(&model, 0.1, 0.3, 1e-2);
        let path = test_path(&model, 1e-2, 100, 24);
        let u0 = SpectralField((0..n).map(|k| 0.2 / (1 + k) as f64).collect());
        let (_, vmat) = engine.monodromy(&u0, &path, 100);
        let svd = operator_norm_svd(&vmat, n);
        let power = operator_norm_power(&vmat, n);
        assert!(
            (svd - power).abs() <= 1e-8 * svd,
            "svd {svd} vs power {power}"
        );
    }

    #[test]
    fn deterministic_energy_contracts_within_the_shifted_semigroup() {
        // With sigma = 0 the dissipative nonlinearity can only help:
        // ||u(t)|| <= exp(nu t) ||u0||.
        let model = Model::allen_cahn(16);
        let nu = 0.3;
        let dt = 1e-3;
        let engine = SpdeEngine::new(&model, nu, 0.0, dt);
        let path = test_path(&model, dt, 2000, 4);
        let u0 = SpectralField((0..16).map(|k| ((k * 13) as f64 * 0.7).sin()).collect());
        let norm0 = u0.norm_h();
        let mut ok = true;
        engine.integrate_observe(&u0, &path, 2000, |step, u| {
            let t = dt * step as f64;
            let bound = (nu * t).exp() * norm0 * (1.0 + 1e-12);
            let norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > bound {
                ok = false;
            }
        });
        assert!(ok, "energy grew faster than the linear bound");
    }

    #[test]
    fn deterministic_self_convergence_is_first_order() {
        // sigma = 0: halving dt must shrink the endpoint error linearly
        // (exponential Euler with frozen nonlinearity).
        let model = Model::allen_cahn(12);
        let nu = 0.1;
        let u0 = SpectralField((0..12).map(|k| 0.8 / (1 + k * k) as f64).collect());
        let horizon = 1.0;
        let endpoint = |dt: f64| -> SpectralField {
            let engine = SpdeEngine::new(&model, nu, 0.0, dt);
            let steps = (horizon / dt).round() as usize;
            let path = test_path(&model, dt, steps, 5);
            engine.integrate(&u0, &path, steps)
        };
        let reference = endpoint(1e-3 / 16.0);
        let mut pts = Vec::new();
        for dt in [1e-3, 5e-4, 2.5e-4] {
            let u = endpoint(dt);
            let err = u
                .0
                .iter()
                .zip(&reference.0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            pts.push((dt.ln(), err.ln()));
        }
        let slope = crate::experiment::stats::slope(&pts);
        assert!(slope >= 0.9, "self-convergence order {slope}");
    }

    #[test]
    fn coupled_convolution_isolates_the_nonlinear_response() {
        // At nu = 0 the field and the convolution share semigroup and
        // forcing, so r = u - sigma Z obeys the noise-free recursion
        // r_{n+1} = E (r_n + dt F(u_n)); replaying it from the observed
        // states must reproduce the residual to roundoff.
        let model = Model::swift_hohenberg(8);
        let sigma = 0.4;
        let dt = 1e-2;
        let engine = SpdeEngine::new(&model, 0.0, sigma, dt);
        let path = test_path(&model, dt, 200, 6);
        let mut states: Vec<Vec<f64>> = Vec::new();
        let (u, z) = engine.integrate_coupled_observe(
            &SpectralField::zeros(8),
            &path,
            200,
            |_, uu, _| states.push(uu.to_vec()),
        );
        let mut r = [0.0; 8];
        for un in &states[..200] {
            let f = model.eval_f(&SpectralField(un.clone())).unwrap();
            for (k, rk) in r.iter_mut().enumerate() {
                *rk = (model.eigenvalues[k] * dt).exp() * (*rk + dt * f.0[k]);
            }
        }
        for (k, rk) in r.iter().enumerate() {
            assert_abs_diff_eq!(u.0[k] - sigma * z.0[k], *rk, epsilon = 1e-12);
        }
        assert!(u.norm_h() > 0.0 && z.norm_h() > 0.0);
    }

    #[test]
    fn operator_norm_routes_agree() {
        // random-ish matrix with a planted dominant direction
        let n = 32;
        let mut m = vec![0.0; n * n];
        let mut state = 12345u64;
        for v in m.iter_mut() {
            state ^= state >> 12;
            state ^= state << 25;
            state ^= state >> 27;
            *v = ((state.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64)
                * (1.0 / 9007199254740992.0)
                - 0.5;
        }
        // plant a dominant direction in the first column
        for (k, v) in m[..n].iter_mut().enumerate() {
            *v += 3.0 * ((k as f64 * 0.3).sin());
        }
        let svd = operator_norm_svd(&m, n);
        let power = operator_norm_power(&m, n);
        assert!(
            (svd - power).abs() <= 1e-6 * svd,
            "svd {svd} vs power {power}"
        );
        // diagonal sanity: norm of diag(1, -4, 2) is 4
        let d = vec![1.0, 0.0, 0.0, 0.0, -4.0, 0.0, 0.0, 0.0, 2.0];
        assert_abs_diff_eq!(operator_norm(&d, 3), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ftle_identity_holds_with_noise_on() {
        let model = Model::allen_cahn(8);
        let engine = SpdeEngine::new(&model, 0.01, 0.01, 1e-3);
        let path = test_path(&model, 1e-3, 400, 8);
        let sample = engine.ftle(&SpectralField::zeros(8), &path, 400);
        assert_abs_diff_eq!(
            sample.lambda * sample.horizon,
            sample.log_opnorm,
            epsilon = 1e-12
        );
        assert!(sample.lambda.is_finite());
    }
}
