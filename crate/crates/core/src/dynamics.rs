//! Scaled five-state dynamics: range/range-rate integrator, two-state clock
//! in range units, and a Wiener carrier phase.

use nalgebra::{Cholesky, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{allan_spectral, ScenarioParams};
use crate::scalar::{lit, Mat5, Real, Vec5};

/// Index of each component in [`ScaledState`].
pub mod idx {
    pub const R: usize = 0;
    pub const R_DOT: usize = 1;
    pub const B: usize = 2;
    pub const U: usize = 3;
    pub const THETA: usize = 4;
}

/// Display names of the five state components, in index order.
pub const STATE_NAMES: [&str; 5] = ["R", "Rdot", "b", "u", "theta"];

/// `[R, Ṙ, b, u, θ]` in m, m/s, m, m/s, rad. `b = cδ` and `u = cδ̇` carry the
/// clock in range units; θ is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ScaledState<T: Real>(pub Vec5<T>);

impl<T: Real> ScaledState<T> {
    pub fn new(r: T, r_dot: T, b: T, u: T, theta: T) -> Self {
        Self(Vec5::new(r, r_dot, b, u, theta))
    }

    pub fn zeros() -> Self {
        Self(Vec5::zeros())
    }

    pub fn r(&self) -> T {
        self.0[idx::R]
    }
    pub fn r_dot(&self) -> T {
        self.0[idx::R_DOT]
    }
    pub fn b(&self) -> T {
        self.0[idx::B]
    }
    pub fn u(&self) -> T {
        self.0[idx::U]
    }
    pub fn theta(&self) -> T {
        self.0[idx::THETA]
    }

    pub fn as_vector(&self) -> &Vec5<T> {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> From<Vec5<T>> for ScaledState<T> {
    fn from(v: Vec5<T>) -> Self {
        Self(v)
    }
}

/// Time-invariant linear Gaussian transition `x⁺ = F x + w`, `w ~ N(0, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel<T: Real> {
    pub f: Mat5<T>,
    pub q: Mat5<T>,
    /// `Q⁻¹`, present when `Q` is positive definite.
    pub q_inv: Option<Mat5<T>>,
    /// Symmetric square root `Q^{1/2}` (exists for any PSD `Q`).
    pub q_sqrt: Mat5<T>,
    pub step: T,
}

/// Two constant-velocity integrator blocks plus an identity for the phase.
pub fn transition_matrix<T: Real>(step: T) -> Mat5<T> {
    let mut f = Mat5::identity();
    f[(idx::R, idx::R_DOT)] = step;
    f[(idx::B, idx::U)] = step;
    f
}

/// Random-acceleration range block `σ_a² [[T³/3, T²/2], [T²/2, T]]`.
pub fn range_noise_block<T: Real>(sigma_a: T, step: T) -> Matrix2<T> {
    let t2 = step * step;
    let t3 = t2 * step;
    let half = t2 / lit(2.0);
    Matrix2::new(t3 / lit(3.0), half, half, step) * (sigma_a * sigma_a)
}

/// Two-state clock block `c² [[S_f T + S_g T³/3, S_g T²/2], [S_g T²/2, S_g T]]`.
pub fn clock_noise_block<T: Real>(s_f: T, s_g: T, c: T, step: T) -> Matrix2<T> {
    let t2 = step * step;
    let t3 = t2 * step;
    let off = s_g * t2 / lit(2.0);
    Matrix2::new(s_f * step + s_g * t3 / lit(3.0), off, off, s_g * step) * (c * c)
}

/// Closed-form principal square root of a symmetric PSD 2×2 matrix.
fn sqrt_psd_2x2<T: Real>(m: &Matrix2<T>) -> Matrix2<T> {
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).max(T::zero());
    let s = det.sqrt();
    let t = (m.trace() + lit::<T>(2.0) * s).max(T::zero()).sqrt();
    if t == T::zero() {
        return Matrix2::zeros();
    }
    (m + Matrix2::identity() * s) / t
}

pub fn build_dynamics<T: Real>(params: &ScenarioParams<T>) -> Result<DynamicsModel<T>> {
    params.validate()?;
    let step = params.t_coh;
    let (s_f, s_g) = allan_spectral(params)?;

    let q_r = range_noise_block(params.sigma_a, step);
    let q_b = clock_noise_block(s_f, s_g, params.c, step);
    let q_theta = params.q_theta();

    let mut q = Mat5::zeros();
    q.fixed_view_mut::<2, 2>(0, 0).copy_from(&q_r);
    q.fixed_view_mut::<2, 2>(2, 2).copy_from(&q_b);
    q[(idx::THETA, idx::THETA)] = q_theta;

    let mut q_sqrt = Mat5::zeros();
    q_sqrt.fixed_view_mut::<2, 2>(0, 0).copy_from(&sqrt_psd_2x2(&q_r));
    q_sqrt.fixed_view_mut::<2, 2>(2, 2).copy_from(&sqrt_psd_2x2(&q_b));
    q_sqrt[(idx::THETA, idx::THETA)] = q_theta.sqrt();

    if !q.iter().all(|v| v.is_finite()) {
        return Err(Error::Model("process noise has non-finite entries".into()));
    }
    let q_inv = Cholesky::new(q).map(|c| crate::scalar::symmetrize(&c.inverse()));

    Ok(DynamicsModel {
        f: transition_matrix(step),
        q,
        q_inv,
        q_sqrt,
        step,
    })
}

impl<T: Real> DynamicsModel<T> {
    pub fn q_inv(&self) -> Result<&Mat5<T>> {
        self.q_inv
            .as_ref()
            .ok_or_else(|| Error::Model("process noise covariance is singular".into()))
    }

    /// Ratio of largest to smallest `Q⁻¹` eigenvalue, or `None` if `Q` is singular.
    pub fn q_inv_condition(&self) -> Option<T> {
        let q_inv = self.q_inv.as_ref()?;
        let eig = q_inv.symmetric_eigenvalues();
        let hi = eig.max();
        let lo = eig.min();
        (lo > T::zero()).then(|| hi / lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::kappa_theta;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn defaults() -> DynamicsModel<f64> {
        build_dynamics(&ScenarioParams::default()).unwrap()
    }

    #[test]
    fn q_theta_and_range_block() {
        let m = defaults();
        assert_abs_diff_eq!(m.q[(4, 4)], 62.832, epsilon = 1e-3);
        let expected = [[3.333e-6, 5.0e-5], [5.0e-5, 1.0e-3]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m.q[(i, j)], expected[i][j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn zero_acceleration_gives_zero_range_block() {
        let p = ScenarioParams {
            sigma_a: 0.0,
            ..Default::default()
        };
        let m = build_dynamics(&p).unwrap();
        assert_eq!(m.q.fixed_view::<2, 2>(0, 0).into_owned(), Matrix2::zeros());
        assert!(m.q_inv.is_none());
        assert!(m.q_inv().is_err());
    }

    #[test]
    fn zero_step_transition_is_identity() {
        assert_eq!(transition_matrix(0.0f64), Mat5::identity());
    }

    #[test]
    fn transition_pattern_is_exact() {
        let f = defaults().f;
        for i in 0..5 {
            for j in 0..5 {
                let expected = match (i, j) {
                    _ if i == j => 1.0,
                    (0, 1) | (2, 3) => 0.1,
                    _ => 0.0,
                };
                assert_eq!(f[(i, j)], expected, "F[{i},{j}]");
            }
        }
        assert_relative_eq!(f.determinant(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn q_block_diagonal_and_closed_form_determinants() {
        let p = ScenarioParams::<f64>::default();
        let m = defaults();
        for i in 0..5 {
            for j in 0..5 {
                let same_block = (i / 2 == j / 2 && i < 4 && j < 4) || i == j;
                if !same_block {
                    assert_eq!(m.q[(i, j)], 0.0, "Q[{i},{j}]");
                }
            }
        }
        assert_eq!(m.q, m.q.transpose());
        let t = p.t_coh;
        let det_r = m.q.fixed_view::<2, 2>(0, 0).determinant();
        assert_relative_eq!(det_r, p.sigma_a.powi(4) * t.powi(4) / 12.0, max_relative = 1e-10);
        let (s_f, s_g) = allan_spectral(&p).unwrap();
        let det_b = m.q.fixed_view::<2, 2>(2, 2).determinant();
        let closed = p.c.powi(4) * (s_f * s_g * t * t + s_g * s_g * t.powi(4) / 12.0);
        assert_relative_eq!(det_b, closed, max_relative = 1e-10);
    }

    #[test]
    fn clock_block_scales_with_c_squared() {
        let p = ScenarioParams::<f64>::default();
        let doubled = ScenarioParams { c: 2.0 * p.c, ..p };
        let a = build_dynamics(&p).unwrap();
        let b = build_dynamics(&doubled).unwrap();
        for i in 2..4 {
            for j in 2..4 {
                assert_relative_eq!(b.q[(i, j)], 4.0 * a.q[(i, j)], max_relative = 1e-14);
            }
        }
        assert_eq!(a.q.fixed_view::<2, 2>(0, 0), b.q.fixed_view::<2, 2>(0, 0));
    }

    #[test]
    fn kappa_times_denominator_is_c() {
        let p = ScenarioParams::<f64>::default();
        let k = kappa_theta(&p).unwrap();
        assert_relative_eq!(
            k * 2.0 * std::f64::consts::PI * p.f_c * p.t_coh,
            p.c,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sqrt_factor_reproduces_q() {
        let m = defaults();
        let back = m.q_sqrt * m.q_sqrt;
        for i in 0..5 {
            for j in 0..5 {
                let scale = (m.q[(i, i)] * m.q[(j, j)]).sqrt();
                assert_abs_diff_eq!(back[(i, j)], m.q[(i, j)], epsilon = 1e-10 * scale);
            }
        }
        assert_eq!(m.q_sqrt, m.q_sqrt.transpose());
    }

    #[test]
    fn q_inverse_is_cached_and_accurate() {
        let m = defaults();
        let prod = m.q * m.q_inv.unwrap();
        assert_abs_diff_eq!(prod, Mat5::identity(), epsilon = 1e-6);
        let cond = m.q_inv_condition().unwrap();
        // clock-block eigenvalues sit near 1e-9, the phase at 62.8
        assert!(cond > 1e9 && cond < 1e12, "condition {cond:e}");
    }

    #[test]
    fn single_precision_build() {
        let m = build_dynamics(&ScenarioParams::<f32>::default()).unwrap();
        assert!((m.q[(4, 4)] - 62.832).abs() < 1e-3);
        assert!(m.q_inv.is_some());
    }
}
