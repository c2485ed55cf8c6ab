//! CSV and JSON artifacts. Every CSV starts with one `#` metadata line naming
//! the tool version and the settings that produced it.

use std::io::{Read, Write};

use crate::dynamics::ScaledState;
use crate::error::{Error, Result};
use crate::experiments::{MetricsReport, Scenario};
use crate::filter::{Decision, EpochRecord, FilterVariant};
use crate::measurement::MeasurementEpoch;
use crate::pcrb::{PcrbTrajectory, Prop1Row};

/// `# islsync <version> key=value ...`
pub fn metadata_line(fields: &[(&str, String)]) -> String {
    let mut line = format!("# islsync {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

fn csv_writer<W: Write>(mut w: W, meta: &[(&str, String)]) -> Result<csv::Writer<W>> {
    writeln!(w, "{}", metadata_line(meta))?;
    Ok(csv::Writer::from_writer(w))
}

fn row(values: impl IntoIterator<Item = f64>) -> impl Iterator<Item = String> {
    values.into_iter().map(|v| v.to_string())
}

pub fn write_trajectory<W: Write>(w: W, states: &[ScaledState<f64>], meta: &[(&str, String)]) -> Result<()> {
    let mut out = csv_writer(w, meta)?;
    out.write_record(["k", "r", "r_dot", "b", "u", "theta"])?;
    for (k, s) in states.iter().enumerate() {
        out.write_record(std::iter::once(k.to_string()).chain(row(s.0.iter().copied())))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_measurements<W: Write>(
    w: W,
    measurements: &[MeasurementEpoch<f64>],
    meta: &[(&str, String)],
) -> Result<()> {
    let mut out = csv_writer(w, meta)?;
    out.write_record(["k", "y_r", "y_d", "doppler_outlier"])?;
    for m in measurements {
        out.write_record([
            m.k.to_string(),
            m.y_r.to_string(),
            m.y_d.to_string(),
            u8::from(m.doppler_outlier).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a stream written by [`write_measurements`]; `#` lines are skipped.
pub fn read_measurements<R: Read>(r: R) -> Result<Vec<MeasurementEpoch<f64>>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["k", "y_r", "y_d", "doppler_outlier"] {
        return Err(Error::Format(format!("unexpected measurement header {headers:?}")));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let bad = |what: &str| Error::Format(format!("bad {what} in {rec:?}"));
            Ok(MeasurementEpoch {
                k: field(0).parse().map_err(|_| bad("k"))?,
                y_r: field(1).parse().map_err(|_| bad("y_r"))?,
                y_d: field(2).parse().map_err(|_| bad("y_d"))?,
                doppler_outlier: match field(3) {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("doppler_outlier")),
                },
            })
        })
        .collect()
}

pub fn write_pcrb<W: Write>(
    w: W,
    traj: &PcrbTrajectory<f64>,
    lambda_min: &[f64],
    meta: &[(&str, String)],
) -> Result<()> {
    let mut out = csv_writer(w, meta)?;
    out.write_record([
        "k",
        "pcrb_R",
        "pcrb_Rdot",
        "pcrb_b",
        "pcrb_u",
        "pcrb_theta",
        "lambda_min",
    ])?;
    for (k, (d, lam)) in traj.pcrb_diag.iter().zip(lambda_min).enumerate() {
        out.write_record(
            std::iter::once(k.to_string())
                .chain(row(d.iter().copied()))
                .chain(std::iter::once(lam.to_string())),
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_prop1<W: Write>(w: W, rows: &[Prop1Row], meta: &[(&str, String)]) -> Result<()> {
    let mut out = csv_writer(w, meta)?;
    out.write_record([
        "k",
        "pcrb_theta_tasd",
        "pcrb_theta_no_tasd",
        "pcrb_theta_closed_form",
        "phase_info_scalar",
        "lambda_min_tasd",
        "lambda_min_no_tasd",
    ])?;
    for r in rows {
        out.write_record(std::iter::once(r.k.to_string()).chain(row([
            r.pcrb_theta_tasd,
            r.pcrb_theta_no_tasd,
            r.pcrb_theta_closed_form,
            r.phase_info_scalar,
            r.lambda_min_tasd,
            r.lambda_min_no_tasd,
        ])))?;
    }
    out.flush()?;
    Ok(())
}

/// Per-epoch filter diagnostics, one block of rows per variant.
pub fn write_diagnostics<W: Write>(
    w: W,
    runs: &[(FilterVariant, Vec<EpochRecord<f64>>)],
    meta: &[(&str, String)],
) -> Result<()> {
    let mut out = csv_writer(w, meta)?;
    out.write_record([
        "k",
        "variant",
        "err_R",
        "err_Rdot",
        "err_b",
        "err_u",
        "err_theta",
        "r_tilde",
        "outcome",
        "weight",
    ])?;
    for (variant, records) in runs {
        let label = variant.label();
        for r in records {
            let (r_tilde, outcome, weight) = match &r.outcome {
                None => (String::new(), "none", String::new()),
                Some(o) => match o.decision {
                    Decision::Accepted { weight } => {
                        (o.normalized_residual.to_string(), "accepted", weight.to_string())
                    }
                    Decision::Rejected => (o.normalized_residual.to_string(), "rejected", "0".to_string()),
                },
            };
            out.write_record(
                [r.k.to_string(), label.clone()]
                    .into_iter()
                    .chain(row(r.error.iter().copied()))
                    .chain([r_tilde, outcome.to_string(), weight]),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON with the metadata block first.
pub fn write_report_json<W: Write>(mut w: W, report: &MetricsReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_report_json<R: Read>(r: R) -> Result<MetricsReport> {
    Ok(serde_json::from_reader(r)?)
}

fn report_meta(report: &MetricsReport) -> Vec<(&'static str, String)> {
    let m = &report.metadata;
    vec![
        ("seed", m.master_seed.to_string()),
        ("trials", m.n_trials.to_string()),
        ("epochs", m.n_epochs.to_string()),
        ("steady_start", m.steady_start.to_string()),
        ("single_epoch_s", m.single_epoch_s.to_string()),
    ]
}

/// Bound vs nominal standard-filter accuracy, one row per state. Writes
/// nothing and returns `false` if the report has no nominal standard run.
pub fn write_table2<W: Write>(w: W, report: &MetricsReport) -> Result<bool> {
    let Some(std_run) = report
        .scenario(Scenario::Nominal)
        .and_then(|s| s.variants.iter().find(|v| v.variant == FilterVariant::Standard))
    else {
        return Ok(false);
    };
    let mut meta = report_meta(report);
    meta.push(("scenario", "nominal".into()));
    meta.push(("variant", "standard".into()));
    meta.push(("sqrt_pcrb", "terminal".into()));
    let mut out = csv_writer(w, &meta)?;
    out.write_record(["state", "sqrt_pcrb", "rmse", "eta", "sqrt_pcrb_pooled"])?;
    for (i, name) in report.states.iter().enumerate() {
        out.write_record(std::iter::once(name.clone()).chain(row([
            report.pcrb.sqrt_pcrb_terminal[i],
            std_run.rmse[i],
            std_run.eta[i],
            report.pcrb.sqrt_pcrb_pooled[i],
        ])))?;
    }
    out.flush()?;
    Ok(true)
}

pub fn write_p95_summary<W: Write>(w: W, report: &MetricsReport) -> Result<()> {
    let mut out = csv_writer(w, &report_meta(report))?;
    out.write_record(["scenario", "variant", "p95", "reduction_pct"])?;
    for s in &report.scenarios {
        for v in &s.variants {
            out.write_record([
                s.scenario.name().to_string(),
                v.label.clone(),
                v.p95_phase_error.to_string(),
                v.reduction_pct.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn cdf_file_name(scenario: Scenario, label: &str) -> String {
    format!("cdf_{}_{}.csv", scenario.name(), label)
}

pub fn write_cdf<W: Write>(w: W, report: &MetricsReport, scenario: Scenario, label: &str) -> Result<()> {
    let run = report
        .scenario(scenario)
        .and_then(|s| s.variant(label))
        .ok_or_else(|| Error::Format(format!("no {label} run for {scenario}")))?;
    let mut meta = report_meta(report);
    meta.push(("scenario", scenario.name().into()));
    meta.push(("variant", label.into()));
    let mut out = csv_writer(w, &meta)?;
    out.write_record(["error_rad", "cum_prob"])?;
    for p in &run.cdf {
        out.write_record(row([p.error_rad, p.cum_prob]))?;
    }
    out.flush()?;
    Ok(())
}
