//! Kalman filtering with the cross-epoch Doppler innovation.
//!
//! Each epoch runs predict → pseudorange update → Doppler update. The Doppler
//! innovation uses the previous posterior phase `θ̂_{k−1}`, and its variance
//! adds `κ² [P_{k−1|k−1}]_{θθ}` for the previous-epoch phase uncertainty. Only
//! the current state is corrected; `θ_{k−1}` is never revisited.
//!
//! The four estimators differ only in what they do with the normalized
//! residual `r̃ = |r| / √S`: accept it ([`FilterVariant::Standard`]), reject it
//! above `τ` ([`FilterVariant::Gate`]), down-weight it above `δ`
//! ([`FilterVariant::Huber`]), or both ([`FilterVariant::Hybrid`]).

use serde::{Deserialize, Serialize};

use crate::dynamics::{idx, DynamicsModel, ScaledState};
use crate::error::{Error, Result};
use crate::measurement::{jacobians, JacobianSet, MeasurementEpoch};
use crate::params::{kappa_theta, ScenarioParams};
use crate::scalar::{lit, symmetrize, Mat5, Real, Row5, Vec5};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterVariant {
    Standard,
    Gate { tau: f64 },
    Huber { delta: f64 },
    Hybrid { tau: f64, delta: f64 },
}

impl FilterVariant {
    pub const STANDARD: Self = Self::Standard;
    pub const GATE: Self = Self::Gate { tau: 3.0 };
    pub const HUBER: Self = Self::Huber { delta: 1.5 };
    pub const HYBRID: Self = Self::Hybrid { tau: 4.0, delta: 1.5 };

    /// Standard, 3σ gate, Huber δ = 1.5, hybrid 4σ gate + Huber 1.5.
    pub fn baseline_set() -> Vec<Self> {
        vec![Self::STANDARD, Self::GATE, Self::HUBER, Self::HYBRID]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Gate { .. } => "gate",
            Self::Huber { .. } => "huber",
            Self::Hybrid { .. } => "hybrid",
        }
    }

    /// Short name for default thresholds, otherwise name plus thresholds.
    pub fn label(&self) -> String {
        match *self {
            v if [Self::STANDARD, Self::GATE, Self::HUBER, Self::HYBRID].contains(&v) => v.name().to_string(),
            Self::Gate { tau } => format!("gate_tau{tau}"),
            Self::Huber { delta } => format!("huber_delta{delta}"),
            Self::Hybrid { tau, delta } => format!("hybrid_tau{tau}_delta{delta}"),
            Self::Standard => unreachable!(),
        }
    }

    fn gate(&self) -> Option<f64> {
        match *self {
            Self::Gate { tau } | Self::Hybrid { tau, .. } => Some(tau),
            _ => None,
        }
    }

    fn huber(&self) -> Option<f64> {
        match *self {
            Self::Huber { delta } | Self::Hybrid { delta, .. } => Some(delta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Drop the previous-epoch phase term from the Doppler innovation variance.
    pub single_epoch_s: bool,
}

/// Mean and covariance of a five-state Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<T: Real> {
    pub x: Vec5<T>,
    pub p: Mat5<T>,
}

/// Posterior at epoch `k` plus the epoch `k−1` posterior phase and covariance
/// needed by the next Doppler innovation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState<T: Real> {
    pub x_hat: ScaledState<T>,
    pub p: Mat5<T>,
    pub prev_theta_hat: T,
    pub prev_p: Mat5<T>,
    pub k: usize,
}

impl<T: Real> FilterState<T> {
    pub fn initial(x0: ScaledState<T>, p0: Mat5<T>) -> Self {
        Self {
            x_hat: x0,
            p: p0,
            prev_theta_hat: x0.theta(),
            prev_p: p0,
            k: 0,
        }
    }

    /// Zero mean with covariance `diag(p0)`.
    pub fn from_prior(params: &ScenarioParams<T>) -> Self {
        let p0 = Mat5::from_diagonal(&Vec5::from_fn(|i, _| params.p0_diag[i]));
        Self::initial(ScaledState::zeros(), p0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision<T> {
    Accepted { weight: T },
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome<T: Real> {
    pub decision: Decision<T>,
    /// Doppler innovation `r` [m/s].
    pub innovation: T,
    /// `|r| / √S` with `S` evaluated at `σ_eff² = σ_D²`.
    pub normalized_residual: T,
    /// That normalizing `S` [m²/s²].
    pub innovation_variance: T,
    /// Omitted cross-epoch covariance terms `ΔS` (diagnostic only).
    pub cross_term: T,
}

impl<T: Real> UpdateOutcome<T> {
    pub fn weight(&self) -> Option<T> {
        match self.decision {
            Decision::Accepted { weight } => Some(weight),
            Decision::Rejected => None,
        }
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self.decision, Decision::Rejected)
    }
}

/// `x⁻ = F x̂`, `P⁻ = F P Fᵀ + Q`.
pub fn predict<T: Real>(state: &FilterState<T>, model: &DynamicsModel<T>) -> Gaussian<T> {
    Gaussian {
        x: model.f * state.x_hat.0,
        p: symmetrize(&(model.f * state.p * model.f.transpose() + model.q)),
    }
}

/// Scalar update in Joseph form; `r_var` is the part of `s` not explained by
/// `H P Hᵀ`.
fn scalar_update<T: Real>(prior: &Gaussian<T>, h: &Row5<T>, residual: T, s: T, r_var: T) -> Gaussian<T> {
    let gain = prior.p * h.transpose() / s;
    let ikh = Mat5::identity() - gain * h;
    Gaussian {
        x: prior.x + gain * residual,
        p: symmetrize(&(ikh * prior.p * ikh.transpose() + gain * gain.transpose() * r_var)),
    }
}

pub fn toa_update<T: Real>(prior: &Gaussian<T>, y_r: T, sigma_r: T) -> Result<Gaussian<T>> {
    let h = jacobians(T::zero()).h_r;
    let r_var = sigma_r * sigma_r;
    let s = (h * prior.p * h.transpose())[(0, 0)] + r_var;
    if s <= T::zero() || !s.is_finite() {
        return Err(Error::numerical(0, format!("pseudorange innovation variance {s}")));
    }
    let residual = y_r - (h * prior.x)[(0, 0)];
    Ok(scalar_update(prior, &h, residual, s, r_var))
}

/// `y_D − (Ṙ⁻ + u⁻ + κ (θ⁻ − θ̂_{k−1}))`.
pub fn tasd_innovation<T: Real>(prior_x: &Vec5<T>, prev_theta_hat: T, y_d: T, kappa: T) -> T {
    y_d - (prior_x[idx::R_DOT] + prior_x[idx::U] + kappa * (prior_x[idx::THETA] - prev_theta_hat))
}

/// `σ_eff² + H_D P⁻ H_Dᵀ + H_D⁻ P_{k−1|k−1} H_D⁻ᵀ`.
pub fn tasd_innovation_variance<T: Real>(
    p_prior: &Mat5<T>,
    p_prev: &Mat5<T>,
    sigma_eff_sq: T,
    jac: &JacobianSet<T>,
) -> Result<T> {
    let current = (jac.h_d * p_prior * jac.h_d.transpose())[(0, 0)];
    let previous = (jac.h_d_prev * p_prev * jac.h_d_prev.transpose())[(0, 0)];
    checked_variance(sigma_eff_sq + current + previous)
}

/// Two-term variance `σ_eff² + H_D P⁻ H_Dᵀ` that ignores the previous epoch.
pub fn single_epoch_innovation_variance<T: Real>(
    p_prior: &Mat5<T>,
    sigma_eff_sq: T,
    jac: &JacobianSet<T>,
) -> Result<T> {
    checked_variance(sigma_eff_sq + (jac.h_d * p_prior * jac.h_d.transpose())[(0, 0)])
}

fn checked_variance<T: Real>(s: T) -> Result<T> {
    if s > T::zero() && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::numerical(0, format!("Doppler innovation variance {s}")))
    }
}

/// `ΔS = −2κ² [P]_{θθ} − 2κ ([P]_{Ṙθ} + [P]_{uθ})` on the previous posterior.
pub fn exact_cross_terms<T: Real>(p_prev: &Mat5<T>, kappa: T) -> T {
    let two = lit::<T>(2.0);
    let th = idx::THETA;
    -two * kappa * kappa * p_prev[(th, th)] - two * kappa * (p_prev[(idx::R_DOT, th)] + p_prev[(idx::U, th)])
}

/// `1` inside `δ`, `δ / r̃` beyond it.
pub fn huber_weight<T: Real>(r_tilde: T, delta: T) -> T {
    let r = r_tilde.abs();
    if r <= delta {
        T::one()
    } else {
        delta / r
    }
}

/// Robust Doppler update. `prev_theta_hat`/`prev_p` are the epoch `k−1`
/// posterior.
#[allow(clippy::too_many_arguments)]
pub fn doppler_update<T: Real>(
    variant: &FilterVariant,
    prior: &Gaussian<T>,
    prev_theta_hat: T,
    prev_p: &Mat5<T>,
    y_d: T,
    sigma_d: T,
    jac: &JacobianSet<T>,
    opts: &FilterOptions,
) -> Result<(Gaussian<T>, UpdateOutcome<T>)> {
    if !y_d.is_finite() {
        return Err(Error::NonFiniteMeasurement { epoch: 0 });
    }
    let sigma_sq = sigma_d * sigma_d;
    let variance = |sigma_eff_sq: T| {
        if opts.single_epoch_s {
            single_epoch_innovation_variance(&prior.p, sigma_eff_sq, jac)
        } else {
            tasd_innovation_variance(&prior.p, prev_p, sigma_eff_sq, jac)
        }
    };

    let r = tasd_innovation(&prior.x, prev_theta_hat, y_d, jac.kappa);
    let s = variance(sigma_sq)?;
    let r_tilde = r.abs() / s.sqrt();
    let mut outcome = UpdateOutcome {
        decision: Decision::Rejected,
        innovation: r,
        normalized_residual: r_tilde,
        innovation_variance: s,
        cross_term: exact_cross_terms(prev_p, jac.kappa),
    };

    if let Some(tau) = variant.gate() {
        if r_tilde > lit(tau) {
            return Ok((*prior, outcome));
        }
    }
    let weight = match variant.huber() {
        Some(delta) => huber_weight(r_tilde, lit(delta)),
        None => T::one(),
    };
    let s_eff = if weight == T::one() {
        s
    } else {
        variance(sigma_sq / weight)?
    };
    let hph = (jac.h_d * prior.p * jac.h_d.transpose())[(0, 0)];
    let posterior = scalar_update(prior, &jac.h_d, r, s_eff, s_eff - hph);
    outcome.decision = Decision::Accepted { weight };
    Ok((posterior, outcome))
}

/// Stateful single-trial filter.
#[derive(Debug, Clone)]
pub struct Filter<T: Real> {
    pub variant: FilterVariant,
    pub opts: FilterOptions,
    model: DynamicsModel<T>,
    jac: JacobianSet<T>,
    sigma_d: T,
    sigma_r: T,
    state: FilterState<T>,
}

impl<T: Real> Filter<T> {
    pub fn new(
        variant: FilterVariant,
        params: &ScenarioParams<T>,
        model: DynamicsModel<T>,
        initial: FilterState<T>,
        opts: FilterOptions,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            variant,
            opts,
            model,
            jac: jacobians(kappa_theta(params)?),
            sigma_d: params.sigma_d,
            sigma_r: params.sigma_r,
            state: initial,
        })
    }

    /// Starts from the truth prior: zero mean, `diag(p0)`.
    pub fn from_prior(variant: FilterVariant, params: &ScenarioParams<T>, opts: FilterOptions) -> Result<Self> {
        let model = crate::dynamics::build_dynamics(params)?;
        Self::new(variant, params, model, FilterState::from_prior(params), opts)
    }

    pub fn state(&self) -> &FilterState<T> {
        &self.state
    }

    pub fn jacobians(&self) -> &JacobianSet<T> {
        &self.jac
    }

    pub fn step(&mut self, m: &MeasurementEpoch<T>) -> Result<UpdateOutcome<T>> {
        let epoch = m.k;
        if epoch != self.state.k + 1 {
            return Err(Error::invalid(
                "measurement epoch",
                format!("expected {}, got {epoch}", self.state.k + 1),
            ));
        }
        if !(m.y_r.is_finite() && m.y_d.is_finite()) {
            return Err(Error::NonFiniteMeasurement { epoch });
        }
        let at_epoch = |e: Error| match e {
            Error::Numerical { what, .. } => Error::Numerical { epoch, what },
            Error::NonFiniteMeasurement { .. } => Error::NonFiniteMeasurement { epoch },
            other => other,
        };

        let prior = predict(&self.state, &self.model);
        let after_toa = toa_update(&prior, m.y_r, self.sigma_r).map_err(at_epoch)?;
        let (posterior, outcome) = doppler_update(
            &self.variant,
            &after_toa,
            self.state.x_hat.theta(),
            &self.state.p,
            m.y_d,
            self.sigma_d,
            &self.jac,
            &self.opts,
        )
        .map_err(at_epoch)?;

        self.state = FilterState {
            x_hat: ScaledState(posterior.x),
            p: posterior.p,
            prev_theta_hat: self.state.x_hat.theta(),
            prev_p: self.state.p,
            k: epoch,
        };
        Ok(outcome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord<T: Real> {
    pub k: usize,
    pub x_hat: ScaledState<T>,
    pub p_diag: Vec5<T>,
    /// `x̂ − x_truth`.
    pub error: Vec5<T>,
    /// `None` at `k = 0`, which has no measurement.
    pub outcome: Option<UpdateOutcome<T>>,
}

/// Runs `filter` over the stream and scores it against `truth`
/// (indexed by epoch).
pub fn run_filter<T: Real>(
    filter: &mut Filter<T>,
    measurements: &[MeasurementEpoch<T>],
    truth: &[ScaledState<T>],
) -> Result<Vec<EpochRecord<T>>> {
    if truth.len() < measurements.len() + 1 {
        return Err(Error::invalid("truth", "shorter than the measurement stream"));
    }
    let record = |f: &Filter<T>, outcome| {
        let s = f.state();
        EpochRecord {
            k: s.k,
            x_hat: s.x_hat,
            p_diag: s.p.diagonal(),
            error: s.x_hat.0 - truth[s.k].0,
            outcome,
        }
    };
    let mut out = Vec::with_capacity(measurements.len() + 1);
    out.push(record(filter, None));
    for m in measurements {
        let outcome = filter.step(m)?;
        out.push(record(filter, Some(outcome)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_dynamics, transition_matrix};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const KAPPA: f64 = 0.0184;

    fn params() -> ScenarioParams<f64> {
        ScenarioParams::default()
    }

    fn p0() -> Mat5<f64> {
        Mat5::from_diagonal(&Vec5::from_row_slice(&[100.0, 1.0, 100.0, 1.0, 1.0]))
    }

    /// Gaussian whose Doppler innovation against `prev_theta = 0`, `y_d` is `r`.
    fn prior_with(p: Mat5<f64>) -> Gaussian<f64> {
        Gaussian { x: Vec5::zeros(), p }
    }

    #[test]
    fn predict_examples() {
        let state = FilterState::initial(ScaledState::new(1.0, 2.0, 3.0, 4.0, 5.0), p0());
        let still = DynamicsModel {
            f: transition_matrix(0.0),
            q: Mat5::zeros(),
            q_inv: None,
            q_sqrt: Mat5::zeros(),
            step: 0.0,
        };
        let g = predict(&state, &still);
        assert_eq!(g.x, state.x_hat.0);
        assert_eq!(g.p, state.p);

        let model = build_dynamics(&params()).unwrap();
        let zero_cov = FilterState::initial(ScaledState::zeros(), Mat5::zeros());
        assert_eq!(predict(&zero_cov, &model).p, model.q);

        let g = predict(&FilterState::from_prior(&params()), &model);
        assert_abs_diff_eq!(g.p[(4, 4)], 1.0 + 62.832, epsilon = 1e-3);
    }

    #[test]
    fn toa_examples() {
        let prior = Gaussian {
            x: Vec5::from_row_slice(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            p: Mat5::zeros(),
        };
        let post = toa_update(&prior, 10.0, 0.03).unwrap();
        assert_eq!(post, prior);

        let prior = prior_with(p0());
        let post = toa_update(&prior, 3.0, 1e12).unwrap();
        assert_abs_diff_eq!(post.x, prior.x, epsilon = 1e-9);
        assert_abs_diff_eq!(post.p, prior.p, epsilon = 1e-9);

        // unit residual shared by two equal-variance states
        let post = toa_update(&prior_with(p0()), 1.0, 0.03).unwrap();
        assert_abs_diff_eq!(post.x[idx::R], 0.5, epsilon = 0.01);
        assert_abs_diff_eq!(post.x[idx::B], 0.5, epsilon = 0.01);
    }

    #[test]
    fn toa_rejects_degenerate_variance() {
        assert!(toa_update(&prior_with(Mat5::zeros()), 1.0, 0.0).is_err());
    }

    #[test]
    fn innovation_examples() {
        let x = Vec5::from_row_slice(&[0.0, 0.3, 0.0, -0.1, 2.0]);
        let perfect = 0.3 - 0.1 + KAPPA * (2.0 - 1.5);
        assert_abs_diff_eq!(tasd_innovation(&x, 1.5, perfect, KAPPA), 0.0, epsilon = 1e-15);
        let base = tasd_innovation(&x, 1.5, 0.7, KAPPA);
        assert_abs_diff_eq!(tasd_innovation(&x, 1.5, 1.7, KAPPA) - base, 1.0, epsilon = 1e-12);

        let slip = Vec5::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 2.0 * std::f64::consts::PI]);
        assert_abs_diff_eq!(tasd_innovation(&slip, 0.0, 0.0, KAPPA), -0.1156, epsilon = 1e-4);
    }

    #[test]
    fn innovation_variance_examples() {
        let jac = jacobians(KAPPA);
        let z = Mat5::zeros();
        assert_eq!(tasd_innovation_variance(&z, &z, 9e-4, &jac).unwrap(), 9e-4);

        let mut e55 = Mat5::zeros();
        e55[(4, 4)] = 1.0;
        let s = tasd_innovation_variance(&z, &e55, 0.03 * 0.03, &jac).unwrap();
        assert_abs_diff_eq!(s, 9e-4 + 3.39e-4, epsilon = 1e-6);

        let jac0 = jacobians(0.0);
        let s0 = tasd_innovation_variance(&p0(), &p0(), 9e-4, &jac0).unwrap();
        assert_eq!(s0, single_epoch_innovation_variance(&p0(), 9e-4, &jac0).unwrap());

        assert!(tasd_innovation_variance(&z, &z, 0.0, &jac).is_err());
    }

    #[test]
    fn third_term_is_kappa_squared_phase_variance() {
        let jac = jacobians(KAPPA);
        let mut prev = p0();
        prev[(1, 4)] = 0.3;
        prev[(4, 1)] = 0.3;
        prev[(4, 4)] = 7.0;
        let with = tasd_innovation_variance(&p0(), &prev, 9e-4, &jac).unwrap();
        let without = single_epoch_innovation_variance(&p0(), 9e-4, &jac).unwrap();
        assert_relative_eq!(with - without, KAPPA * KAPPA * 7.0, max_relative = 1e-12);
    }

    #[test]
    fn cross_term_examples() {
        let mut p = Mat5::zeros();
        assert_eq!(exact_cross_terms(&p, KAPPA), 0.0);
        p[(4, 4)] = 1.0;
        assert_abs_diff_eq!(exact_cross_terms(&p, KAPPA), -6.77e-4, epsilon = 1e-6);
    }

    #[test]
    fn cross_term_matches_general_form() {
        // H_D P_{k,k−1} H_D⁻ᵀ + H_D⁻ P_{k−1,k} H_Dᵀ with P_{k,k−1} = F P_{k−1|k−1}
        let jac = jacobians(KAPPA);
        let f = transition_matrix(0.1);
        let a = Mat5::from_fn(|i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.4);
        let p_prev = a * a.transpose() + Mat5::identity();
        let p_cross = f * p_prev;
        let general = (jac.h_d * p_cross * jac.h_d_prev.transpose())[(0, 0)]
            + (jac.h_d_prev * p_cross.transpose() * jac.h_d.transpose())[(0, 0)];
        assert_relative_eq!(exact_cross_terms(&p_prev, KAPPA), general, max_relative = 1e-12);
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber_weight(1.0, 1.5), 1.0);
        assert_eq!(huber_weight(3.0, 1.5), 0.5);
        assert_abs_diff_eq!(huber_weight(300.0, 1.5), 0.005, epsilon = 1e-15);
        assert_eq!(huber_weight(1.5, 1.5), 1.0);
    }

    /// Prior/prev chosen so that `S = 1` exactly and `r̃ = |y_d|`.
    fn unit_setup() -> (Gaussian<f64>, Mat5<f64>, JacobianSet<f64>, f64) {
        let jac = jacobians(KAPPA);
        let sigma_d = 0.6;
        let mut p = Mat5::zeros();
        p[(1, 1)] = 0.64;
        (prior_with(p), Mat5::zeros(), jac, sigma_d)
    }

    #[test]
    fn hybrid_rejects_large_residual() {
        let (prior, prev, jac, sd) = unit_setup();
        let (post, out) = doppler_update(
            &FilterVariant::HYBRID,
            &prior,
            0.0,
            &prev,
            5.0,
            sd,
            &jac,
            &Default::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.innovation_variance, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.normalized_residual, 5.0, epsilon = 1e-12);
        assert!(out.is_rejected());
        assert_eq!(post, prior);
    }

    #[test]
    fn hybrid_small_residual_is_plain_kalman_step() {
        let (prior, prev, jac, sd) = unit_setup();
        let opts = FilterOptions::default();
        let (post, out) = doppler_update(&FilterVariant::HYBRID, &prior, 0.0, &prev, 1.0, sd, &jac, &opts).unwrap();
        assert_eq!(out.weight(), Some(1.0));
        let (std_post, _) = doppler_update(&FilterVariant::STANDARD, &prior, 0.0, &prev, 1.0, sd, &jac, &opts).unwrap();
        assert_eq!(post, std_post);
        assert_abs_diff_eq!(post.x[idx::R_DOT], 0.64, epsilon = 1e-12);
    }

    #[test]
    fn hybrid_moderate_residual_is_down_weighted() {
        let (prior, prev, jac, sd) = unit_setup();
        let (post, out) = doppler_update(
            &FilterVariant::HYBRID,
            &prior,
            0.0,
            &prev,
            2.0,
            sd,
            &jac,
            &Default::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.weight().unwrap(), 0.75, epsilon = 1e-12);
        // σ_eff² = 0.36 / 0.75 = 0.48, S = 0.64 + 0.48
        let gain = 0.64 / (0.64 + 0.48);
        assert_abs_diff_eq!(post.x[idx::R_DOT], gain * 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.p[(1, 1)], (1.0 - gain) * 0.64, epsilon = 1e-12);
    }

    #[test]
    fn gate_and_standard_policies() {
        let (prior, prev, jac, sd) = unit_setup();
        let opts = FilterOptions::default();
        let (_, g) = doppler_update(&FilterVariant::GATE, &prior, 0.0, &prev, 3.5, sd, &jac, &opts).unwrap();
        assert!(g.is_rejected());
        let (_, g) = doppler_update(&FilterVariant::GATE, &prior, 0.0, &prev, 2.5, sd, &jac, &opts).unwrap();
        assert_eq!(g.weight(), Some(1.0));
        let (_, s) = doppler_update(&FilterVariant::STANDARD, &prior, 0.0, &prev, 1e3, sd, &jac, &opts).unwrap();
        assert_eq!(s.weight(), Some(1.0));
        let (_, h) = doppler_update(&FilterVariant::HUBER, &prior, 0.0, &prev, 300.0, sd, &jac, &opts).unwrap();
        assert_abs_diff_eq!(h.weight().unwrap(), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn joseph_form_matches_textbook_update() {
        let jac = jacobians(KAPPA);
        let model = build_dynamics(&params()).unwrap();
        let state = FilterState::from_prior(&params());
        let prior = predict(&state, &model);
        let mut prev = p0();
        prev[(4, 4)] = 20.0;
        let opts = FilterOptions::default();
        let (post, out) = doppler_update(&FilterVariant::HUBER, &prior, 0.0, &prev, 10.0, 0.03, &jac, &opts).unwrap();
        let w = out.weight().unwrap();
        assert!(w < 1.0);
        let s = tasd_innovation_variance(&prior.p, &prev, 0.03 * 0.03 / w, &jac).unwrap();
        let k = prior.p * jac.h_d.transpose() / s;
        let textbook = (Mat5::identity() - k * jac.h_d) * prior.p;
        for i in 0..5 {
            for j in 0..5 {
                let scale = (prior.p[(i, i)] * prior.p[(j, j)]).sqrt();
                assert_abs_diff_eq!(post.p[(i, j)], textbook[(i, j)], epsilon = 1e-10 * scale);
            }
        }
    }

    #[test]
    fn non_finite_doppler_is_rejected_with_epoch() {
        let mut f = Filter::from_prior(FilterVariant::STANDARD, &params(), FilterOptions::default()).unwrap();
        let bad = MeasurementEpoch {
            k: 1,
            y_r: 0.0,
            y_d: f64::NAN,
            doppler_outlier: false,
        };
        assert!(matches!(f.step(&bad), Err(Error::NonFiniteMeasurement { epoch: 1 })));
    }

    #[test]
    fn out_of_order_epoch_is_rejected() {
        let mut f = Filter::from_prior(FilterVariant::STANDARD, &params(), FilterOptions::default()).unwrap();
        let m = MeasurementEpoch {
            k: 2,
            y_r: 0.0,
            y_d: 0.0,
            doppler_outlier: false,
        };
        assert!(f.step(&m).is_err());
    }

    #[test]
    fn previous_epoch_bookkeeping_rolls_forward() {
        let mut f = Filter::from_prior(FilterVariant::HYBRID, &params(), FilterOptions::default()).unwrap();
        let m1 = MeasurementEpoch {
            k: 1,
            y_r: 1.0,
            y_d: 0.2,
            doppler_outlier: false,
        };
        f.step(&m1).unwrap();
        let after1 = *f.state();
        // large Doppler value forces a rejection at epoch 2
        let m2 = MeasurementEpoch {
            k: 2,
            y_r: 1.0,
            y_d: 1e4,
            doppler_outlier: true,
        };
        let out = f.step(&m2).unwrap();
        assert!(out.is_rejected());
        let after2 = *f.state();
        assert_eq!(after2.prev_theta_hat, after1.x_hat.theta());
        assert_eq!(after2.prev_p, after1.p);
        assert_eq!(after2.k, 2);
    }

    #[test]
    fn variant_labels() {
        assert_eq!(FilterVariant::HYBRID.label(), "hybrid");
        assert_eq!(
            FilterVariant::Hybrid { tau: 4.8, delta: 1.8 }.label(),
            "hybrid_tau4.8_delta1.8"
        );
        assert_eq!(FilterVariant::baseline_set().len(), 4);
    }
}
