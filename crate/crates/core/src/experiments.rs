//! Monte Carlo orchestration and performance metrics.
//!
//! Every trial simulates one truth trajectory, then one measurement stream per
//! outlier scenario, and runs every filter variant on that identical stream.
//! Per-trial results are collected in trial order, so reports do not depend on
//! the worker count.
//!
//! RMSE, efficiency and p95 pool errors over trials × epochs `k ≥ steady_start`;
//! samples at outlier epochs are kept.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_dynamics, idx, DynamicsModel, STATE_NAMES};
use crate::error::{Error, Result};
use crate::filter::{run_filter, Filter, FilterOptions, FilterState, FilterVariant};
use crate::measurement::OutlierModel;
use crate::params::ScenarioParams;
use crate::pcrb::{scenario_pcrb, PcrbTrajectory};
use crate::sim::{generate_measurements, simulate_truth, SeedSpec};

pub const POOLING_PROTOCOL: &str = "pooled over trials x epochs k >= steady_start; outlier epochs included";
pub const PCRB_REFERENCE: &str =
    "sqrt_pcrb: terminal epoch k = n_epochs - 1; eta = rmse / sqrt(mean pcrb over k >= steady_start)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Nominal,
    Impulsive,
    HeavyTail,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Nominal, Scenario::Impulsive, Scenario::HeavyTail];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Nominal => "nominal",
            Scenario::Impulsive => "impulsive",
            Scenario::HeavyTail => "heavy_tail",
        }
    }

    pub fn outlier_model(&self) -> OutlierModel {
        match self {
            Scenario::Nominal => OutlierModel::Nominal,
            Scenario::Impulsive => OutlierModel::IMPULSIVE,
            Scenario::HeavyTail => OutlierModel::HEAVY_TAIL,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Scenario::Nominal),
            "impulsive" => Ok(Scenario::Impulsive),
            "heavy_tail" | "heavy-tail" => Ok(Scenario::HeavyTail),
            other => Err(Error::invalid("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub n_trials: usize,
    pub n_epochs: usize,
    pub steady_start: usize,
    pub master_seed: u64,
    pub scenarios: Vec<Scenario>,
    pub variants: Vec<FilterVariant>,
    pub params: ScenarioParams<f64>,
    pub options: FilterOptions,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_trials: 500,
            n_epochs: 100,
            steady_start: 20,
            master_seed: 2024,
            scenarios: Scenario::ALL.to_vec(),
            variants: FilterVariant::baseline_set(),
            params: ScenarioParams::default(),
            options: FilterOptions::default(),
            workers: 0,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials", "must be >= 1"));
        }
        if self.n_epochs < 2 {
            return Err(Error::invalid("n_epochs", "must be >= 2"));
        }
        if self.steady_start >= self.n_epochs {
            return Err(Error::invalid("steady_start", "must be below n_epochs"));
        }
        if self.scenarios.is_empty() || self.variants.is_empty() {
            return Err(Error::invalid("config", "need at least one scenario and one variant"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAbort {
    pub trial: u64,
    pub scenario: Scenario,
    pub variant: String,
    pub epoch: Option<usize>,
    pub cause: String,
}

impl fmt::Display for TrialAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trial {} ({}, {})", self.trial, self.scenario, self.variant)?;
        if let Some(e) = self.epoch {
            write!(f, " at epoch {e}")?;
        }
        write!(f, ": {}", self.cause)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_rad: f64,
    pub cum_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: FilterVariant,
    pub label: String,
    pub rmse: [f64; 5],
    pub eta: [f64; 5],
    pub p95_phase_error: f64,
    /// `100 (1 − p95 / p95_standard)`; absent without a standard run.
    pub reduction_pct: Option<f64>,
    /// Nominal scenario only.
    pub pcrb_violation_rate: Option<f64>,
    /// Rejected Doppler updates over all Doppler epochs.
    pub doppler_rejection_rate: f64,
    /// Mean weight over accepted Doppler updates.
    pub mean_weight: f64,
    /// Mean `|ΔS| / S` over steady-state epochs.
    pub cross_term_ratio: f64,
    pub cdf: Vec<CdfPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub trials_used: usize,
    pub outlier_rate: f64,
    pub aborted: Vec<TrialAbort>,
    pub variants: Vec<VariantReport>,
}

impl ScenarioReport {
    pub fn variant(&self, label: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcrbSummary {
    pub sqrt_pcrb_terminal: [f64; 5],
    pub sqrt_pcrb_pooled: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub n_trials: usize,
    pub n_epochs: usize,
    pub steady_start: usize,
    pub scenarios: Vec<Scenario>,
    pub single_epoch_s: bool,
    pub pooling: String,
    pub pcrb_reference: String,
    pub params: ScenarioParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: ReportMetadata,
    pub states: Vec<String>,
    pub pcrb: PcrbSummary,
    pub scenarios: Vec<ScenarioReport>,
}

impl MetricsReport {
    pub fn scenario(&self, s: Scenario) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|r| r.scenario == s)
    }
}

/// Per-(trial, scenario, variant) trace kept for aggregation.
#[derive(Debug, Clone)]
struct VariantTrace {
    errors: Vec<[f64; 5]>,
    doppler_updates: usize,
    rejections: usize,
    weight_sum: f64,
    cross_ratio_sum: f64,
    cross_ratio_count: usize,
}

#[derive(Debug)]
struct ScenarioTrace {
    outliers: usize,
    doppler_epochs: usize,
    variants: Vec<VariantTrace>,
}

type TrialResult = Vec<std::result::Result<ScenarioTrace, TrialAbort>>;

fn run_trial(config: &MonteCarloConfig, model: &DynamicsModel<f64>, trial: u64) -> TrialResult {
    let seed = SeedSpec::new(config.master_seed, trial);
    let truth = simulate_truth(&config.params, config.n_epochs, seed);
    config
        .scenarios
        .iter()
        .map(|&scenario| {
            let abort = |variant: &str, e: Error| {
                let epoch = match e {
                    Error::Numerical { epoch, .. } | Error::NonFiniteMeasurement { epoch } => Some(epoch),
                    _ => None,
                };
                TrialAbort {
                    trial,
                    scenario,
                    variant: variant.to_string(),
                    epoch,
                    cause: e.to_string(),
                }
            };
            let truth = truth
                .as_ref()
                .map_err(|e| abort("truth", Error::Model(e.to_string())))?;
            let meas =
                generate_measurements(truth, &scenario.outlier_model(), seed).map_err(|e| abort("measurements", e))?;
            let outliers = meas.iter().filter(|m| m.doppler_outlier).count();
            let variants = config
                .variants
                .iter()
                .map(|variant| {
                    let label = variant.label();
                    let mut filter = Filter::new(
                        *variant,
                        &config.params,
                        model.clone(),
                        FilterState::from_prior(&config.params),
                        config.options,
                    )
                    .map_err(|e| abort(&label, e))?;
                    let records = run_filter(&mut filter, &meas, &truth.states).map_err(|e| abort(&label, e))?;
                    let mut trace = VariantTrace {
                        errors: records.iter().map(|r| r.error.into()).collect(),
                        doppler_updates: 0,
                        rejections: 0,
                        weight_sum: 0.0,
                        cross_ratio_sum: 0.0,
                        cross_ratio_count: 0,
                    };
                    for r in &records {
                        let Some(o) = r.outcome else { continue };
                        trace.doppler_updates += 1;
                        match o.weight() {
                            Some(w) => trace.weight_sum += w,
                            None => trace.rejections += 1,
                        }
                        if r.k >= config.steady_start {
                            trace.cross_ratio_sum += (o.cross_term / o.innovation_variance).abs();
                            trace.cross_ratio_count += 1;
                        }
                    }
                    Ok(trace)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(ScenarioTrace {
                outliers,
                doppler_epochs: meas.len(),
                variants,
            })
        })
        .collect()
}

fn run_trials(config: &MonteCarloConfig, model: &DynamicsModel<f64>) -> Result<Vec<TrialResult>> {
    let work = || {
        (0..config.n_trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config, model, t))
            .collect::<Vec<_>>()
    };
    if config.workers == 0 {
        Ok(work())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        Ok(pool.install(work))
    }
}

pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MetricsReport> {
    config.validate()?;
    let model = build_dynamics(&config.params)?;
    let pcrb = scenario_pcrb(&config.params, config.n_epochs, false)?;
    let trials = run_trials(config, &model)?;

    let mut aborted_trials: Vec<u64> = trials
        .iter()
        .enumerate()
        .filter(|(_, r)| r.iter().any(|s| s.is_err()))
        .map(|(t, _)| t as u64)
        .collect();
    aborted_trials.dedup();
    if aborted_trials.len() * 100 > config.n_trials {
        let first = trials
            .iter()
            .flatten()
            .find_map(|r| r.as_ref().err())
            .map(|a| a.to_string())
            .unwrap_or_default();
        return Err(Error::ExcessiveAborts {
            aborted: aborted_trials.len(),
            trials: config.n_trials,
            first,
        });
    }

    let scenarios = config
        .scenarios
        .iter()
        .enumerate()
        .map(|(si, &scenario)| aggregate_scenario(config, &pcrb, scenario, &trials, si))
        .collect::<Result<Vec<_>>>()?;

    let terminal = pcrb.pcrb_diag[config.n_epochs - 1];
    let pooled = pcrb
        .pooled_diag(config.steady_start)
        .ok_or_else(|| Error::Metric("empty steady-state window".into()))?;

    Ok(MetricsReport {
        metadata: ReportMetadata {
            tool: "islsync".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: config.master_seed,
            n_trials: config.n_trials,
            n_epochs: config.n_epochs,
            steady_start: config.steady_start,
            scenarios: config.scenarios.clone(),
            single_epoch_s: config.options.single_epoch_s,
            pooling: POOLING_PROTOCOL.into(),
            pcrb_reference: PCRB_REFERENCE.into(),
            params: config.params,
        },
        states: STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        pcrb: PcrbSummary {
            sqrt_pcrb_terminal: terminal.map(f64::sqrt).into(),
            sqrt_pcrb_pooled: pooled.map(f64::sqrt).into(),
        },
        scenarios,
    })
}

fn aggregate_scenario(
    config: &MonteCarloConfig,
    pcrb: &PcrbTrajectory<f64>,
    scenario: Scenario,
    trials: &[TrialResult],
    si: usize,
) -> Result<ScenarioReport> {
    let steady = config.steady_start;
    let mut aborted = Vec::new();
    let mut used: Vec<&ScenarioTrace> = Vec::new();
    for trial in trials {
        // paired design: a trial that failed anywhere is dropped everywhere
        if trial.iter().any(|r| r.is_err()) {
            if let Err(a) = &trial[si] {
                aborted.push(a.clone());
            }
            continue;
        }
        if let Ok(t) = &trial[si] {
            used.push(t);
        }
    }
    if used.is_empty() {
        return Err(Error::Metric(format!("no completed trials for {scenario}")));
    }
    let outliers: usize = used.iter().map(|t| t.outliers).sum();
    let doppler_epochs: usize = used.iter().map(|t| t.doppler_epochs).sum();
    let pcrb_theta: Vec<f64> = pcrb.pcrb_diag.iter().map(|d| d[idx::THETA]).collect();

    let mut variants = Vec::with_capacity(config.variants.len());
    for (vi, variant) in config.variants.iter().enumerate() {
        let traces: Vec<&VariantTrace> = used.iter().map(|t| &t.variants[vi]).collect();
        let pool: Vec<[f64; 5]> = traces.iter().flat_map(|t| t.errors[steady..].iter().copied()).collect();
        let rmse = compute_rmse(&pool)?;
        let eta = compute_efficiency(&rmse, pcrb, steady)?;
        let abs_phase: Vec<f64> = pool.iter().map(|e| e[idx::THETA].abs()).collect();
        let p95 = compute_p95(&abs_phase)?;

        let pcrb_violation_rate = if scenario == Scenario::Nominal {
            let mse = per_epoch_mse(&traces, idx::THETA, config.n_epochs);
            Some(pcrb_violation_rate(&mse, &pcrb_theta, steady))
        } else {
            None
        };

        let updates: usize = traces.iter().map(|t| t.doppler_updates).sum();
        let rejections: usize = traces.iter().map(|t| t.rejections).sum();
        let accepted = updates - rejections;
        let weight_sum: f64 = traces.iter().map(|t| t.weight_sum).sum();
        let ratio_sum: f64 = traces.iter().map(|t| t.cross_ratio_sum).sum();
        let ratio_count: usize = traces.iter().map(|t| t.cross_ratio_count).sum();

        variants.push(VariantReport {
            variant: *variant,
            label: variant.label(),
            rmse,
            eta,
            p95_phase_error: p95,
            reduction_pct: None,
            pcrb_violation_rate,
            doppler_rejection_rate: ratio(rejections, updates),
            mean_weight: if accepted == 0 {
                0.0
            } else {
                weight_sum / accepted as f64
            },
            cross_term_ratio: if ratio_count == 0 {
                0.0
            } else {
                ratio_sum / ratio_count as f64
            },
            cdf: phase_error_cdf(&abs_phase, 200),
        });
    }

    let mut report = ScenarioReport {
        scenario,
        trials_used: used.len(),
        outlier_rate: ratio(outliers, doppler_epochs),
        aborted,
        variants,
    };
    if let Ok(reductions) = scenario_reductions(&report) {
        for (v, r) in report.variants.iter_mut().zip(reductions) {
            v.reduction_pct = Some(r);
        }
    }
    Ok(report)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn per_epoch_mse(traces: &[&VariantTrace], state: usize, n_epochs: usize) -> Vec<f64> {
    let n = traces.len() as f64;
    (0..n_epochs)
        .map(|k| traces.iter().map(|t| t.errors[k][state].powi(2)).sum::<f64>() / n)
        .collect()
}

/// Root mean square per state over a pooled error sample.
pub fn compute_rmse(errors: &[[f64; 5]]) -> Result<[f64; 5]> {
    if errors.is_empty() {
        return Err(Error::Metric("RMSE of an empty pool".into()));
    }
    let mut sum = [0.0; 5];
    for e in errors {
        for (s, v) in sum.iter_mut().zip(e) {
            *s += v * v;
        }
    }
    Ok(sum.map(|s| (s / errors.len() as f64).sqrt()))
}

/// `η = RMSE / √(mean_{k ≥ steady} PCRB_k)` per state.
pub fn compute_efficiency(rmse: &[f64; 5], pcrb: &PcrbTrajectory<f64>, steady_start: usize) -> Result<[f64; 5]> {
    let pooled = pcrb
        .pooled_diag(steady_start)
        .ok_or_else(|| Error::Metric("no bound epochs in the steady-state window".into()))?;
    let mut eta = [0.0; 5];
    for i in 0..5 {
        if pooled[i] <= 0.0 || pooled[i].is_nan() {
            return Err(Error::Metric(format!("zero bound for {}", STATE_NAMES[i])));
        }
        eta[i] = rmse[i] / pooled[i].sqrt();
    }
    Ok(eta)
}

/// Percentile `q ∈ [0, 1]` of sorted data, interpolating linearly between
/// order statistics at rank `(n − 1) q`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_abs(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// 95th percentile of `|error|`; needs at least 20 samples.
pub fn compute_p95(errors: &[f64]) -> Result<f64> {
    if errors.len() < 20 {
        return Err(Error::Metric(format!("p95 needs >= 20 samples, got {}", errors.len())));
    }
    Ok(percentile_sorted(&sorted_abs(errors), 0.95))
}

/// Fraction of epochs `k ≥ steady_start` where the empirical MSE falls below
/// the bound.
pub fn pcrb_violation_rate(mse: &[f64], pcrb: &[f64], steady_start: usize) -> f64 {
    let end = mse.len().min(pcrb.len());
    if steady_start >= end {
        return 0.0;
    }
    let violations = (steady_start..end).filter(|&k| mse[k] < pcrb[k]).count();
    violations as f64 / (end - steady_start) as f64
}

/// Empirical CDF of `|error|` sampled at `n_points` equally spaced
/// probabilities, starting at `(0, 0)` and ending at `(max, 1)`.
pub fn phase_error_cdf(errors: &[f64], n_points: usize) -> Vec<CdfPoint> {
    if errors.is_empty() || n_points == 0 {
        return Vec::new();
    }
    let sorted = sorted_abs(errors);
    std::iter::once(CdfPoint {
        error_rad: 0.0,
        cum_prob: 0.0,
    })
    .chain((1..=n_points).map(|i| {
        let q = i as f64 / n_points as f64;
        CdfPoint {
            error_rad: percentile_sorted(&sorted, q),
            cum_prob: q,
        }
    }))
    .collect()
}

fn scenario_reductions(report: &ScenarioReport) -> Result<Vec<f64>> {
    let base = report
        .variants
        .iter()
        .find(|v| v.variant == FilterVariant::Standard)
        .ok_or_else(|| Error::Metric("standard variant missing".into()))?
        .p95_phase_error;
    Ok(report
        .variants
        .iter()
        .map(|v| 100.0 * (1.0 - v.p95_phase_error / base))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub scenario: Scenario,
    pub variant: String,
    pub p95: f64,
    pub reduction_pct: f64,
}

/// p95 reduction of every variant relative to the standard filter, per scenario.
pub fn reduction_vs_baseline(report: &MetricsReport) -> Result<Vec<Reduction>> {
    let mut out = Vec::new();
    for s in &report.scenarios {
        for (v, r) in s.variants.iter().zip(scenario_reductions(s)?) {
            out.push(Reduction {
                scenario: s.scenario,
                variant: v.label.clone(),
                p95: v.p95_phase_error,
                reduction_pct: r,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub tau: f64,
    pub delta: f64,
    pub p95: f64,
    /// `p95 / p95_base − 1`.
    pub relative_change: f64,
}

/// Hybrid p95 at `(τ, δ)` and at the four corners `(τ(1±f), δ(1±f))`, all on
/// the same trials. The first point is the base.
pub fn hybrid_threshold_sensitivity(
    base: &MonteCarloConfig,
    scenario: Scenario,
    tau: f64,
    delta: f64,
    fraction: f64,
) -> Result<Vec<SensitivityPoint>> {
    let mut grid = vec![(tau, delta)];
    for st in [-1.0, 1.0] {
        for sd in [-1.0, 1.0] {
            grid.push((tau * (1.0 + st * fraction), delta * (1.0 + sd * fraction)));
        }
    }
    let config = MonteCarloConfig {
        scenarios: vec![scenario],
        variants: grid
            .iter()
            .map(|&(tau, delta)| FilterVariant::Hybrid { tau, delta })
            .collect(),
        ..base.clone()
    };
    let report = run_monte_carlo(&config)?;
    let variants = &report.scenarios[0].variants;
    let p95_base = variants[0].p95_phase_error;
    Ok(grid
        .iter()
        .zip(variants)
        .map(|(&(tau, delta), v)| SensitivityPoint {
            tau,
            delta,
            p95: v.p95_phase_error,
            relative_change: v.p95_phase_error / p95_base - 1.0,
        })
        .collect())
}
