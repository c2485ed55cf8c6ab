//! Ground-truth trajectories and measurement streams with deterministic,
//! per-trial random sub-streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_dynamics, DynamicsModel, ScaledState};
use crate::error::{Error, Result};
use crate::measurement::{h_doppler, h_toa, sample_doppler_noise, MeasurementEpoch, OutlierModel};
use crate::params::{kappa_theta, ScenarioParams};
use crate::scalar::Vec5;

/// `(master_seed, trial_index)` fixes every random draw of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

/// Independent sub-streams carved out of one [`SeedSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    ProcessNoise = 0,
    MeasurementNoise = 1,
}

const STREAMS_PER_TRIAL: u64 = 4;

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self {
            master_seed,
            trial_index,
        }
    }

    /// ChaCha stream `trial_index * 4 + label` under `master_seed`.
    pub fn rng(&self, label: StreamLabel) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial_index * STREAMS_PER_TRIAL + label as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ScaledState<f64>>,
    pub params: ScenarioParams<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec5<f64> {
    Vec5::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Propagates `x_0` through `F` with process noise drawn from `rng`.
pub fn propagate<R: Rng + ?Sized>(
    model: &DynamicsModel<f64>,
    x0: ScaledState<f64>,
    n_epochs: usize,
    rng: &mut R,
) -> Vec<ScaledState<f64>> {
    let mut states = Vec::with_capacity(n_epochs);
    states.push(x0);
    for _ in 1..n_epochs {
        let prev = states.last().unwrap().0;
        let w = model.q_sqrt * standard_normal_vec(rng);
        states.push(ScaledState(model.f * prev + w));
    }
    states
}

/// Draws `x_0 ~ N(0, diag(p0))` and propagates it for `n_epochs` epochs.
pub fn simulate_truth(params: &ScenarioParams<f64>, n_epochs: usize, seed: SeedSpec) -> Result<Trajectory> {
    if n_epochs < 2 {
        return Err(Error::invalid("n_epochs", "need at least 2 epochs"));
    }
    let model = build_dynamics(params)?;
    let mut rng = seed.rng(StreamLabel::ProcessNoise);
    let z = standard_normal_vec(&mut rng);
    let x0 = ScaledState(Vec5::from_fn(|i, _| params.p0_diag[i].sqrt() * z[i]));
    let states = propagate(&model, x0, n_epochs, &mut rng);
    if !states.iter().all(ScaledState::is_finite) {
        return Err(Error::Model("non-finite truth state".into()));
    }
    Ok(Trajectory {
        states,
        params: *params,
    })
}

/// Measurement epochs `k = 1..N-1`, drawn from the measurement sub-stream.
pub fn generate_measurements(
    traj: &Trajectory,
    outliers: &OutlierModel,
    seed: SeedSpec,
) -> Result<Vec<MeasurementEpoch<f64>>> {
    generate_measurements_with(traj, outliers, &mut seed.rng(StreamLabel::MeasurementNoise))
}

pub fn generate_measurements_with<R: Rng + ?Sized>(
    traj: &Trajectory,
    outliers: &OutlierModel,
    rng: &mut R,
) -> Result<Vec<MeasurementEpoch<f64>>> {
    if traj.len() < 2 {
        return Err(Error::invalid("trajectory", "need at least 2 epochs"));
    }
    outliers.validate()?;
    let p = &traj.params;
    let kappa = kappa_theta(p)?;
    Ok(traj
        .states
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let (prev, cur) = (&pair[0], &pair[1]);
            let v_r = p.sigma_r * rng.sample::<f64, _>(StandardNormal);
            let (v_d, flag) = sample_doppler_noise(outliers, p.sigma_d, rng);
            MeasurementEpoch {
                k: i + 1,
                y_r: h_toa(cur) + v_r,
                y_d: h_doppler(prev, cur, kappa) + v_d,
                doppler_outlier: flag,
            }
        })
        .collect())
}
