use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ssmp::cli::{run, Mode, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    SimulateLevy,
    SimulateLamperti,
    SimulateKiu,
    SimulateSde,
    SimulateApprox,
    SimulateAbs,
    Validate,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::SimulateLevy => Mode::SimulateLevy,
            ModeArg::SimulateLamperti => Mode::SimulateLamperti,
            ModeArg::SimulateKiu => Mode::SimulateKiu,
            ModeArg::SimulateSde => Mode::SimulateSde,
            ModeArg::SimulateApprox => Mode::SimulateApprox,
            ModeArg::SimulateAbs => Mode::SimulateAbs,
            ModeArg::Validate => Mode::Validate,
        }
    }
}

/// Simulate and validate real-valued self-similar Markov processes.
#[derive(Debug, Parser)]
#[command(name = "ssmp", version)]
struct Args {
    mode: ModeArg,
    /// JSON configuration document
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sde.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `sde.n_paths`
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = RunConfig::from_file(&args.config, Some(args.mode.into())).and_then(|mut cfg| {
        if let Some(s) = args.seed {
            cfg.sde.seed = s;
        }
        if let Some(n) = args.paths {
            cfg.sde.n_paths = n;
        }
        if let Some(d) = args.out {
            cfg.output_dir = d;
        }
        run(&cfg)
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(report) = &outcome.report {
                print!("{}", report.table());
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
