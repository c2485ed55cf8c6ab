//! Posterior Cramér–Rao bound for the cross-epoch Doppler model.
//!
//! The Doppler observable depends on both `x_{k-1}` and `x_k`, so its Fisher
//! information is a 10×10 matrix over the stacked pair. The recursion below
//! never forms that matrix: it consumes the three 5×5 blocks
//! `J⁻⁻`, `J⁻⁺`, `J⁺⁺` and folds them, with the dynamics, into the D-blocks of
//!
//! ```text
//! J_{k+1} = D22 − D21 (J_k + D11)⁻¹ D12
//! ```
//!
//! With `κ = 0` the phase row/column is fully decoupled and its information
//! obeys the scalar recursion in [`phase_scalar_recursion`], which tends to 0.

use nalgebra::Cholesky;

use crate::dynamics::{build_dynamics, idx, DynamicsModel};
use crate::error::{Error, Result};
use crate::measurement::jacobians;
use crate::params::{kappa_theta, ScenarioParams};
use crate::scalar::{lit, relative_asymmetry, symmetrize, Mat5, Real, Vec5};

/// Cross-epoch measurement information blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimBlocks<T: Real> {
    /// Previous/previous: `(κ²/σ_D²) E₅₅`.
    pub j_mm: Mat5<T>,
    /// Previous/current: `(−κ/σ_D²) e₅ H_D`.
    pub j_mp: Mat5<T>,
    /// Current/current: `H_Dᵀ H_D / σ_D² + H_Rᵀ H_R / σ_R²`.
    pub j_pp: Mat5<T>,
}

impl<T: Real> FimBlocks<T> {
    pub fn new(kappa: T, sigma_d: T, sigma_r: T) -> Self {
        let jac = jacobians(kappa);
        let inv_d = (sigma_d * sigma_d).recip();
        let inv_r = (sigma_r * sigma_r).recip();
        Self {
            j_mm: jac.h_d_prev.transpose() * jac.h_d_prev * inv_d,
            j_mp: jac.h_d_prev.transpose() * jac.h_d * inv_d,
            j_pp: jac.h_d.transpose() * jac.h_d * inv_d + jac.h_r.transpose() * jac.h_r * inv_r,
        }
    }

    /// `J⁺⁻ = (J⁻⁺)ᵀ`.
    pub fn j_pm(&self) -> Mat5<T> {
        self.j_mp.transpose()
    }
}

pub fn fim_blocks<T: Real>(params: &ScenarioParams<T>) -> Result<FimBlocks<T>> {
    params.validate()?;
    Ok(FimBlocks::new(kappa_theta(params)?, params.sigma_d, params.sigma_r))
}

/// Time-invariant D-blocks of the information recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DBlocks<T: Real> {
    pub d11: Mat5<T>,
    pub d12: Mat5<T>,
    pub d22: Mat5<T>,
}

impl<T: Real> DBlocks<T> {
    pub fn d21(&self) -> Mat5<T> {
        self.d12.transpose()
    }
}

pub fn d_blocks<T: Real>(model: &DynamicsModel<T>, blocks: &FimBlocks<T>) -> Result<DBlocks<T>> {
    let q_inv = model.q_inv()?;
    let ft_qinv = model.f.transpose() * q_inv;
    Ok(DBlocks {
        d11: symmetrize(&(ft_qinv * model.f + blocks.j_mm)),
        d12: -ft_qinv + blocks.j_mp,
        d22: symmetrize(&(q_inv + blocks.j_pp)),
    })
}

/// Information matrices `J_k` and bound covariances `P_k = J_k⁻¹`, `k = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcrbTrajectory<T: Real> {
    pub info: Vec<Mat5<T>>,
    pub cov: Vec<Mat5<T>>,
    pub pcrb_diag: Vec<Vec5<T>>,
}

impl<T: Real> PcrbTrajectory<T> {
    pub fn len(&self) -> usize {
        self.info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.info.is_empty()
    }

    /// `aᵀ P_k a`.
    pub fn marginal_variance(&self, k: usize, a: &Vec5<T>) -> T {
        (a.transpose() * self.cov[k] * a)[(0, 0)]
    }

    /// Mean of `pcrb_diag` over epochs `from..N`.
    pub fn pooled_diag(&self, from: usize) -> Option<Vec5<T>> {
        let tail = self.pcrb_diag.get(from..)?;
        if tail.is_empty() {
            return None;
        }
        let sum = tail.iter().fold(Vec5::zeros(), |acc, d| acc + d);
        Some(sum / lit::<T>(tail.len() as f64))
    }
}

/// Default prior information `diag(p0)⁻¹`.
pub fn default_j0<T: Real>(params: &ScenarioParams<T>) -> Mat5<T> {
    Mat5::from_diagonal(&Vec5::from_fn(|i, _| params.p0_diag[i].recip()))
}

/// Cholesky of a symmetric matrix, retrying once with `1e-12 · trace / 5`
/// added to the diagonal.
fn cholesky_with_jitter<T: Real>(m: &Mat5<T>, epoch: usize, what: &str) -> Result<Cholesky<T, nalgebra::U5>> {
    if let Some(c) = Cholesky::new(*m) {
        return Ok(c);
    }
    let jitter = lit::<T>(1e-12) * m.trace() / lit(5.0);
    if jitter > T::zero() {
        let mut jittered = *m;
        for i in 0..5 {
            jittered[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(jittered) {
            return Ok(c);
        }
    }
    Err(Error::numerical(epoch, format!("{what} is not positive definite")))
}

fn covariance_from_info<T: Real>(j: &Mat5<T>, epoch: usize) -> Result<Mat5<T>> {
    let chol = cholesky_with_jitter(j, epoch, "information matrix")?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn pcrb_recursion<T: Real>(
    model: &DynamicsModel<T>,
    blocks: &FimBlocks<T>,
    j0: &Mat5<T>,
    n_epochs: usize,
) -> Result<PcrbTrajectory<T>> {
    if n_epochs == 0 {
        return Err(Error::invalid("n_epochs", "must be >= 1"));
    }
    if relative_asymmetry(j0) > lit(1e-10) {
        return Err(Error::invalid("J0", "not symmetric"));
    }
    let d = d_blocks(model, blocks)?;
    let d21 = d.d21();

    let mut info = Vec::with_capacity(n_epochs);
    let mut cov = Vec::with_capacity(n_epochs);
    let j0 = symmetrize(j0);
    cov.push(covariance_from_info(&j0, 0)?);
    info.push(j0);

    for k in 1..n_epochs {
        let prev = &info[k - 1];
        let chol = cholesky_with_jitter(&(prev + d.d11), k, "J_k + D11")?;
        let next = symmetrize(&(d.d22 - d21 * chol.solve(&d.d12)));
        cov.push(covariance_from_info(&next, k)?);
        info.push(next);
    }
    let pcrb_diag = cov.iter().map(|p| p.diagonal()).collect();
    Ok(PcrbTrajectory { info, cov, pcrb_diag })
}

/// Bound trajectory for the scenario's own `κ` (or `κ = 0`) from the default prior.
pub fn scenario_pcrb<T: Real>(
    params: &ScenarioParams<T>,
    n_epochs: usize,
    kappa_zero: bool,
) -> Result<PcrbTrajectory<T>> {
    let model = build_dynamics(params)?;
    let kappa = if kappa_zero { T::zero() } else { kappa_theta(params)? };
    let blocks = FimBlocks::new(kappa, params.sigma_d, params.sigma_r);
    pcrb_recursion(&model, &blocks, &default_j0(params), n_epochs)
}

/// Phase information without Doppler coupling:
/// `j_{k+1} = j_k q⁻¹ / (j_k + q⁻¹)`, starting at `j0`.
pub fn phase_scalar_recursion<T: Real>(j0: T, q_theta: T, n: usize) -> Vec<T> {
    let q_inv = q_theta.recip();
    let mut out = Vec::with_capacity(n);
    let mut j = j0;
    for _ in 0..n {
        out.push(j);
        j = if j == T::zero() { j } else { j * q_inv / (j + q_inv) };
    }
    out
}

pub fn min_eigenvalue_series<T: Real>(traj: &PcrbTrajectory<T>) -> Vec<T> {
    traj.info.iter().map(|j| j.symmetric_eigenvalues().min()).collect()
}

/// One epoch of the coupled vs uncoupled phase comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Row {
    pub k: usize,
    pub pcrb_theta_tasd: f64,
    pub pcrb_theta_no_tasd: f64,
    /// `p0_θ + k q_θ`.
    pub pcrb_theta_closed_form: f64,
    /// Scalar-recursion phase information for `κ = 0`.
    pub phase_info_scalar: f64,
    pub lambda_min_tasd: f64,
    pub lambda_min_no_tasd: f64,
}

pub fn prop1_comparison(params: &ScenarioParams<f64>, n_epochs: usize) -> Result<Vec<Prop1Row>> {
    let with = scenario_pcrb(params, n_epochs, false)?;
    let without = scenario_pcrb(params, n_epochs, true)?;
    let scalar = phase_scalar_recursion(params.p0_diag[idx::THETA].recip(), params.q_theta(), n_epochs);
    let lam_with = min_eigenvalue_series(&with);
    let lam_without = min_eigenvalue_series(&without);
    Ok((0..n_epochs)
        .map(|k| Prop1Row {
            k,
            pcrb_theta_tasd: with.pcrb_diag[k][idx::THETA],
            pcrb_theta_no_tasd: without.pcrb_diag[k][idx::THETA],
            pcrb_theta_closed_form: params.p0_diag[idx::THETA] + k as f64 * params.q_theta(),
            phase_info_scalar: scalar[k],
            lambda_min_tasd: lam_with[k],
            lambda_min_no_tasd: lam_without[k],
        })
        .collect())
}

/// `(max − min) / mean` over the last `window` entries.
pub fn tail_relative_spread(series: &[f64], window: usize) -> Option<f64> {
    if window == 0 || series.len() < window {
        return None;
    }
    let tail = &series[series.len() - window..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = tail.iter().sum::<f64>() / window as f64;
    Some((max - min) / mean.abs())
}
