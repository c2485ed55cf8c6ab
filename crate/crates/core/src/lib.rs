//! Inter-satellite range, clock and carrier-phase synchronization: the
//! five-state scaled model, cross-epoch (TASD) Doppler observable, posterior
//! Cramér–Rao bound recursion, and robust Kalman filter variants.
//!
//! The model, bound and filter code is generic over [`Real`] (`f32` or `f64`).
//! Simulation and Monte Carlo experiments run in `f64`; the aliases below fix
//! the scalar for that common case.
//!
//! ```
//! use islsync::{build_dynamics, scenario_pcrb, Params};
//!
//! let params = Params::default();
//! let model = build_dynamics(&params).unwrap();
//! assert_eq!(model.f[(0, 1)], params.t_coh);
//! let bound = scenario_pcrb(&params, 100, false).unwrap();
//! assert!(bound.pcrb_diag[99][4].sqrt() < 25.0);
//! ```

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod io;
pub mod measurement;
pub mod params;
pub mod pcrb;
pub mod scalar;
pub mod sim;

pub use dynamics::{build_dynamics, idx, DynamicsModel, ScaledState, STATE_NAMES};
pub use error::{Error, Result};
pub use experiments::{run_monte_carlo, MetricsReport, MonteCarloConfig, Scenario};
pub use filter::{run_filter, Filter, FilterOptions, FilterState, FilterVariant};
pub use measurement::{h_doppler, h_toa, jacobians, MeasurementEpoch, OutlierModel};
pub use params::{kappa_theta, ScenarioParams};
pub use pcrb::{pcrb_recursion, scenario_pcrb, PcrbTrajectory};
pub use scalar::Real;
pub use sim::{generate_measurements, simulate_truth, SeedSpec, Trajectory};

pub type Params = ScenarioParams<f64>;
pub type State = ScaledState<f64>;
pub type Dynamics = DynamicsModel<f64>;
pub type Pcrb = PcrbTrajectory<f64>;
pub type Filter64 = Filter<f64>;
pub type Params32 = ScenarioParams<f32>;
pub type Filter32 = Filter<f32>;
