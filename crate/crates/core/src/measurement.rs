//! Time-of-arrival and cross-epoch Doppler observables, their Jacobian rows,
//! and the Doppler outlier generators.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::ScaledState;
use crate::error::{Error, Result};
use crate::scalar::{Real, Row5};

/// Constant measurement rows in scaled-state coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSet<T: Real> {
    /// Doppler w.r.t. the current state: `[0, 1, 0, 1, κ]`.
    pub h_d: Row5<T>,
    /// Doppler w.r.t. the previous state: `[0, 0, 0, 0, -κ]`.
    pub h_d_prev: Row5<T>,
    /// Pseudorange: `[1, 0, 1, 0, 0]`.
    pub h_r: Row5<T>,
    pub kappa: T,
}

pub fn jacobians<T: Real>(kappa: T) -> JacobianSet<T> {
    let (o, z) = (T::one(), T::zero());
    JacobianSet {
        h_d: Row5::new(z, o, z, o, kappa),
        h_d_prev: Row5::new(z, z, z, z, -kappa),
        h_r: Row5::new(o, z, o, z, z),
        kappa,
    }
}

/// Noiseless Doppler in range-rate units: `Ṙ + u + κ (θ_k − θ_{k−1})`.
pub fn h_doppler<T: Real>(x_prev: &ScaledState<T>, x_curr: &ScaledState<T>, kappa: T) -> T {
    x_curr.r_dot() + x_curr.u() + kappa * (x_curr.theta() - x_prev.theta())
}

/// Noiseless pseudorange `R + b`.
pub fn h_toa<T: Real>(x_curr: &ScaledState<T>) -> T {
    x_curr.r() + x_curr.b()
}

/// Doppler noise law. Pseudorange noise is always plain Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierModel {
    Nominal,
    /// Gaussian noise plus, with probability `p`, an additive
    /// `N(0, (scale σ_D)²)` jump.
    Impulsive {
        p: f64,
        scale: f64,
    },
    /// With probability `p` the whole draw comes from `N(0, (scale σ_D)²)`
    /// instead of `N(0, σ_D²)`.
    HeavyTail {
        p: f64,
        scale: f64,
    },
}

impl OutlierModel {
    pub const IMPULSIVE: Self = Self::Impulsive { p: 0.05, scale: 300.0 };
    pub const HEAVY_TAIL: Self = Self::HeavyTail { p: 0.15, scale: 20.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Nominal => Ok(()),
            Self::Impulsive { p, scale } | Self::HeavyTail { p, scale } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("outlier probability", format!("{p} not in [0, 1]")));
                }
                if !(scale >= 1.0 && scale.is_finite()) {
                    return Err(Error::invalid("outlier scale", format!("{scale} < 1")));
                }
                Ok(())
            }
        }
    }

    /// Theoretical Doppler noise variance in units of σ_D².
    pub fn variance_factor(&self) -> f64 {
        match *self {
            Self::Nominal => 1.0,
            Self::Impulsive { p, scale } => 1.0 + p * scale * scale,
            Self::HeavyTail { p, scale } => (1.0 - p) + p * scale * scale,
        }
    }
}

/// One epoch of observations. `doppler_outlier` is simulation truth and is
/// never read by the filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEpoch<T> {
    pub k: usize,
    pub y_r: T,
    pub y_d: T,
    pub doppler_outlier: bool,
}

/// Draws one Doppler noise sample and whether an outlier component fired.
pub fn sample_doppler_noise<R: Rng + ?Sized>(model: &OutlierModel, sigma_d: f64, rng: &mut R) -> (f64, bool) {
    fn gauss<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
        sd * rng.sample::<f64, _>(StandardNormal)
    }
    match *model {
        OutlierModel::Nominal => (gauss(rng, sigma_d), false),
        OutlierModel::Impulsive { p, scale } => {
            let base = gauss(rng, sigma_d);
            if rng.random_bool(p) {
                (base + gauss(rng, scale * sigma_d), true)
            } else {
                (base, false)
            }
        }
        OutlierModel::HeavyTail { p, scale } => {
            if rng.random_bool(p) {
                (gauss(rng, scale * sigma_d), true)
            } else {
                (gauss(rng, sigma_d), false)
            }
        }
    }
}
