use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use trical_cli::{RunConfig, CONFIG_REFERENCE};

/// Targetless camera-lidar-radar extrinsic calibration on synthetic drives.
#[derive(Parser)]
#[command(name = "trical", version, after_long_help = CONFIG_REFERENCE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker thread cap for parallel evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (TOML; see --help for the full reference).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic drive to a dataset directory.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dataset output directory.
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
    /// Run the continuous calibration pipeline over a dataset.
    Calibrate {
        /// Dataset directory written by `simulate`.
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for state.json and events.jsonl.
        #[arg(long, default_value = "calibration")]
        out: PathBuf,
        /// Restrict optimization to these pairs (comma separated:
        /// camera-lidar,camera-radar,lidar-radar). Restricting the list runs
        /// the decoupled pairwise configuration (no joint refinement).
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
        /// Objective combination mode.
        #[arg(long, value_parser = ["product", "sum"])]
        mode: Option<String>,
        /// Also write a losses.json breakdown for the final state.
        #[arg(long)]
        dump_losses: bool,
    },
    /// Measure corner-target alignment errors of calibration states.
    Evaluate {
        /// Dataset directory containing corner targets.
        dataset: PathBuf,
        /// Calibration state file(s) written by `calibrate`; each becomes
        /// one report configuration, rows in argument order.
        #[arg(long = "state", required = true)]
        states: Vec<PathBuf>,
        /// Output directory for report.csv / report.txt / report.svg.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Merge evaluation CSVs into combined report artifacts.
    Report {
        /// Input report.csv files.
        inputs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_INSUFFICIENT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are successful exits; everything else is usage.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: setting thread pool size: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Configuration and input-shape problems are usage errors (exit 1);
/// everything else is an internal failure (exit 3).
fn classify(e: &anyhow::Error) -> u8 {
    let text = format!("{e:#}");
    let usage = [
        "config",
        "parsing",
        "reading",
        "must be",
        "unknown pair",
        "no corner targets",
        "state file",
        "needs at least one",
    ];
    if usage.iter().any(|k| text.contains(k)) {
        EXIT_USAGE
    } else {
        EXIT_INTERNAL
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = config.load()?;
            let summary = trical_cli::run_simulate(&cfg, &out)?;
            println!(
                "wrote {} frames to {}",
                summary.frames,
                summary.dataset_dir.display()
            );
            println!(
                "valid frames: camera-lidar {}, camera-radar {}, lidar-radar {}",
                summary.valid_counts[0], summary.valid_counts[1], summary.valid_counts[2]
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate { dataset, config, out, pairs, mode, dump_losses } => {
            let mut cfg = config.load()?;
            if let Some(pairs) = pairs {
                // An explicit pair list requests the decoupled pairwise
                // configuration.
                cfg.objective.pairs = pairs;
                cfg.objective.joint = false;
            }
            if let Some(mode) = mode {
                cfg.objective.mode = mode;
            }
            let outcome = trical_cli::run_calibrate(&cfg, &dataset, &out, dump_losses)?;
            println!(
                "{} calibration event(s); state written to {}",
                outcome.events,
                outcome.state_path.display()
            );
            if outcome.insufficient_samples {
                println!("insufficient samples: a trigger never gathered enough valid frames");
                return Ok(ExitCode::from(EXIT_INSUFFICIENT));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { dataset, states, out } => {
            let report = trical_cli::run_evaluate(&dataset, &states, &out)?;
            print!("{}", report.to_text_table());
            println!("report written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { inputs, out } => {
            let report = trical_cli::run_report(&inputs, &out)?;
            print!("{}", report.to_text_table());
            Ok(ExitCode::SUCCESS)
        }
    }
}
