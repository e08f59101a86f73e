use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use visolve::check::check_dir;
use visolve::experiment::{build_problem, ensure_reference, run_experiment, REFERENCE_FILE};
use visolve::ingest::fetch::fetch_dataset;
use visolve::plotdata::emit_plot_data;
use visolve::ExperimentConfig;

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "visolve",
    version,
    about = "Shuffled extragradient experiments"
)]
struct Cli {
    /// Worker threads for experiment cells (all cores by default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (schedule, seed) cell of a config and write traces plus a manifest.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set solver.gamma=0.01`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compute and store the reference solution of a config's problem.
    Reference {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Verify hashes and check a run against its convergence bound.
    Check {
        trace_dir: PathBuf,
        /// Multiplicative tolerance on the bound (2.0 for eg, 1.05 for vr-eg by default).
        #[arg(long)]
        slack: Option<f64>,
        /// Write the per-point comparison as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Download a LIBSVM dataset into the data directory.
    FetchData {
        name: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Emit long-format and seed-aggregated plot data for a run.
    Plotdata { trace_dir: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let m = run_experiment(&cfg)?;
            let failed = m.cells.iter().filter(|c| !c.is_ok()).count();
            println!(
                "wrote {} traces to {} ({failed} failed cells)",
                m.cells.len() - failed,
                cfg.output.display()
            );
            for c in &m.cells {
                match (&c.error, c.final_sq_dist, c.psnr) {
                    (Some(e), _, _) => println!("  {} seed {}: error: {e}", c.schedule, c.seed),
                    (None, d, p) => {
                        let mut line = format!(
                            "  {} seed {}: {} oracle calls",
                            c.schedule,
                            c.seed,
                            c.oracle_calls.unwrap_or(0)
                        );
                        if let Some(d) = d {
                            line.push_str(&format!(", final sq_dist {d:.3e}"));
                        }
                        if let Some(p) = p {
                            line.push_str(&format!(", PSNR {p:.2} dB"));
                        }
                        println!("{line}");
                    }
                }
            }
            Ok(0)
        }
        Command::Reference { config, overrides } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let problem = ensure_reference(&cfg, build_problem(&cfg)?.problem, true)?;
            let r = problem.reference().expect("reference attached");
            let residual = problem.natural_residual(&r.point, r.gamma)?;
            println!(
                "reference written to {} (residual {residual:.3e} at step {:.3e}, tolerance {:.1e})",
                cfg.output.join(REFERENCE_FILE).display(),
                r.gamma,
                r.tolerance
            );
            Ok(0)
        }
        Command::Check {
            trace_dir,
            slack,
            report,
        } => {
            let outcome = check_dir(&trace_dir, slack)?;
            print!("{}", outcome.summary());
            if let Some(path) = report {
                std::fs::write(&path, outcome.report_csv())
                    .map_err(|err| anyhow::anyhow!("{}: {err}", path.display()))?;
            }
            Ok(if outcome.pass() { 0 } else { EXIT_FAIL })
        }
        Command::FetchData { name, data_dir } => {
            let out = fetch_dataset(&name, &data_dir)?;
            println!(
                "{} {} ({})",
                out.sha256,
                out.path.display(),
                if out.downloaded {
                    "downloaded"
                } else {
                    "present"
                }
            );
            Ok(0)
        }
        Command::Plotdata { trace_dir } => {
            let (long, summary) = emit_plot_data(&trace_dir)?;
            println!("{}\n{}", long.display(), summary.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
