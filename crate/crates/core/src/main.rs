use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ris_isac::harness::{emit_csv, emit_json, selftest, with_threads, Scenario, Scheme};
use ris_isac::{Error, Result, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ris-isac", version, about = "RIS-assisted ISAC target detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (flat JSON object); missing keys take default values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Null-hypothesis trials per threshold calibration.
    #[arg(long = "trials-cal")]
    trials_cal: Option<usize>,
    /// Target-present trials per detection estimate.
    #[arg(long = "trials-det")]
    trials_det: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(n) = self.trials_cal {
            cfg.trials_calibration = n;
        }
        if let Some(n) = self.trials_det {
            cfg.trials_detection = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in numerical consistency checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Calibrate every scheme's threshold at one SNR point.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "snr-db", allow_hyphen_values = true)]
        snr_db: f64,
    },
    /// Sweep the SNR grid and write the detection curves.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-scheme details as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the optimized RIS phases and precoder at one SNR point.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Defaults to the last point of the SNR grid.
        #[arg(long = "snr-db", allow_hyphen_values = true)]
        snr_db: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Selftest { seed } => {
            let checks = selftest::run(seed);
            for c in &checks {
                println!(
                    "{} {} worst={:.3e} tol={:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance
                );
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Config(format!("selftest failed: {}", failed.join(", "))))
            }
        }
        Command::Calibrate { common, snr_db } => {
            let cfg = common.load()?;
            let point = cfg.snr_grid_db.iter().position(|&s| s == snr_db).unwrap_or(usize::MAX);
            with_threads(common.threads, || -> Result<()> {
                let scenario = Scenario::build(&cfg)?;
                let mut rows = Vec::new();
                for scheme in Scheme::ALL {
                    let setup = scenario.configure(scheme, snr_db)?;
                    let cal = scenario.calibrate(&setup, point)?;
                    rows.push(json!({
                        "scheme": scheme.name(),
                        "threshold": cal.threshold,
                        "tie_probability": cal.tie_probability,
                        "realized_pfa": cal.realized_pfa,
                        "ci": [cal.ci.0, cal.ci.1],
                        "trials": cal.trials,
                    }));
                }
                let out = json!({ "snr_db": snr_db, "alpha": cfg.alpha, "schemes": rows });
                println!("{}", serde_json::to_string_pretty(&out).expect("json"));
                Ok(())
            })?
        }
        Command::Curve { common, out, json } => {
            let cfg = common.load()?;
            let table = with_threads(common.threads, || ris_isac::run_curve(&cfg))??;
            emit_csv(&table, &out)?;
            if let Some(path) = json {
                emit_json(&table, path)?;
            }
            print!("{}", table.to_csv_string());
            Ok(())
        }
        Command::Optimize { common, snr_db } => {
            let cfg = common.load()?;
            let snr_db = match snr_db.or_else(|| cfg.snr_grid_db.last().copied()) {
                Some(s) => s,
                None => return Err(Error::Config("no SNR point given and the grid is empty".into())),
            };
            let scenario = Scenario::build(&cfg)?;
            let setup = scenario.configure(Scheme::Optimized, snr_db)?;
            let sol = &setup.precoder;
            let out = json!({
                "snr_db": snr_db,
                "phases": setup.phases.as_slice(),
                "precoder": sol.p.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "objective": sol.objective,
                "comm_snr": sol.comm_snr,
                "gamma_th": cfg.gamma_th,
                "case_fired": sol.case_fired,
                "kkt_residual": sol.kkt_residual,
                "basis_rank_deficient": sol.basis_rank_deficient,
                "clutter_rank": scenario.subspace.rank(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
