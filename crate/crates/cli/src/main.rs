use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use islsync::experiments::{run_monte_carlo, MonteCarloConfig, Scenario};
use islsync::filter::{run_filter, Filter, FilterOptions, FilterVariant};
use islsync::io;
use islsync::pcrb::{min_eigenvalue_series, prop1_comparison, scenario_pcrb};
use islsync::sim::{generate_measurements, simulate_truth, SeedSpec};
use islsync::{Error, Params, Result};

const DEFAULT_SEED: u64 = 2024;

#[derive(Parser)]
#[command(
    name = "islsync",
    version,
    about = "Inter-satellite synchronization bounds and robust filtering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario parameters as JSON; missing keys take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior CRB trajectory.
    Pcrb {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        /// Drop the phase coupling of the Doppler observable.
        #[arg(long)]
        kappa_zero: bool,
    },
    /// Phase bound with and without the cross-epoch coupling.
    Prop1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
    },
    /// One trial: truth, measurements and per-variant filter diagnostics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "nominal")]
        scenario: Scenario,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long = "single-epoch-S")]
        single_epoch_s: bool,
    },
    /// Monte Carlo evaluation of all filter variants.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Repeatable; all scenarios when omitted.
        #[arg(long)]
        scenario: Vec<Scenario>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Worker threads (0 = all cores). Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long = "single-epoch-S")]
        single_epoch_s: bool,
    },
    /// Rebuild the CSV tables from a saved report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_params(path: Option<&Path>) -> Result<Params> {
    match path {
        Some(p) => Params::from_json_file(p),
        None => Ok(Params::default()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_tables(report: &islsync::MetricsReport, out: &Path) -> Result<()> {
    let mut table2 = Vec::new();
    if io::write_table2(&mut table2, report)? {
        create(out, "table2.csv")?.write_all(&table2)?;
    }
    io::write_p95_summary(create(out, "p95_summary.csv")?, report)?;
    for s in &report.scenarios {
        for v in &s.variants {
            io::write_cdf(
                create(out, &io::cdf_file_name(s.scenario, &v.label))?,
                report,
                s.scenario,
                &v.label,
            )?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pcrb {
            common,
            epochs,
            kappa_zero,
        } => {
            let params = load_params(common.config.as_deref())?;
            let traj = scenario_pcrb(&params, epochs, kappa_zero)?;
            let lam = min_eigenvalue_series(&traj);
            let meta = [("epochs", epochs.to_string()), ("kappa_zero", kappa_zero.to_string())];
            io::write_pcrb(create(&common.out, "pcrb.csv")?, &traj, &lam, &meta)
        }
        Command::Prop1 { common, epochs } => {
            let params = load_params(common.config.as_deref())?;
            let rows = prop1_comparison(&params, epochs)?;
            io::write_prop1(
                create(&common.out, "prop1.csv")?,
                &rows,
                &[("epochs", epochs.to_string())],
            )
        }
        Command::Simulate {
            common,
            seed,
            scenario,
            epochs,
            single_epoch_s,
        } => {
            let params = load_params(common.config.as_deref())?;
            let spec = SeedSpec::new(seed, 0);
            let truth = simulate_truth(&params, epochs, spec)?;
            let meas = generate_measurements(&truth, &scenario.outlier_model(), spec)?;
            let opts = FilterOptions { single_epoch_s };
            let runs = FilterVariant::baseline_set()
                .into_iter()
                .map(|v| {
                    let mut f = Filter::from_prior(v, &params, opts)?;
                    Ok((v, run_filter(&mut f, &meas, &truth.states)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let meta = [
                ("seed", seed.to_string()),
                ("trial", "0".to_string()),
                ("scenario", scenario.to_string()),
                ("single_epoch_s", single_epoch_s.to_string()),
            ];
            io::write_trajectory(create(&common.out, "trajectory.csv")?, &truth.states, &meta)?;
            io::write_measurements(create(&common.out, "measurements.csv")?, &meas, &meta)?;
            io::write_diagnostics(create(&common.out, "diagnostics.csv")?, &runs, &meta)
        }
        Command::Mc {
            common,
            seed,
            scenario,
            trials,
            epochs,
            workers,
            single_epoch_s,
        } => {
            let config = MonteCarloConfig {
                n_trials: trials,
                n_epochs: epochs,
                master_seed: seed,
                scenarios: if scenario.is_empty() {
                    Scenario::ALL.to_vec()
                } else {
                    scenario
                },
                params: load_params(common.config.as_deref())?,
                options: FilterOptions { single_epoch_s },
                workers,
                ..Default::default()
            };
            let report = run_monte_carlo(&config)?;
            io::write_report_json(create(&common.out, "report.json")?, &report)?;
            write_tables(&report, &common.out)
        }
        Command::Report { input, out } => {
            let report = io::read_report_json(File::open(&input)?)
                .map_err(|e| Error::Format(format!("{}: {e}", input.display())))?;
            write_tables(&report, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
