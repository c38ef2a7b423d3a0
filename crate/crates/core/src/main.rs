use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use riskmpc::controller::ControllerMode;
use riskmpc::harness::output::{results_table, write_matrix, write_run, TraceFormat};
use riskmpc::harness::{run_matrix, run_scenario, ScenarioConfig, UncertaintyLevel};
use riskmpc::Result;

#[derive(Parser)]
#[command(name = "riskmpc", version, about = "Risk-constrained MPC path-following simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single closed-loop scenario.
    Run(Opts),
    /// Run the 2 × 3 × 6 controller / uncertainty / tolerance matrix.
    Matrix(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Rmpc,
    Smpc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    None,
    Low,
    Medium,
    High,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Opts {
    /// TOML scenario file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    controller: Option<ControllerArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    uncertainty: Option<LevelArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    duration_steps: Option<usize>,
    /// Output directory for traces and summaries.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trace file format.
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

impl Opts {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(c) = self.controller {
            cfg.controller = match c {
                ControllerArg::Rmpc => ControllerMode::Robust,
                ControllerArg::Smpc => ControllerMode::Stochastic,
            };
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(l) = self.uncertainty {
            cfg.uncertainty = match l {
                LevelArg::None => UncertaintyLevel::None,
                LevelArg::Low => UncertaintyLevel::Low,
                LevelArg::Medium => UncertaintyLevel::Medium,
                LevelArg::High => UncertaintyLevel::High,
            };
            cfg.growth = None;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.duration_steps {
            cfg.duration_steps = k;
        }
        Ok(cfg)
    }

    fn format(&self) -> TraceFormat {
        match self.format {
            FormatArg::Csv => TraceFormat::Csv,
            FormatArg::Json => TraceFormat::Json,
        }
    }
}

fn run(opts: &Opts) -> Result<()> {
    let cfg = opts.scenario()?;
    let r = run_scenario(&cfg)?;
    let stem = format!(
        "{}_{}_eps{}",
        cfg.controller.short_name(),
        cfg.uncertainty.name(),
        cfg.epsilon
    );
    let trace = write_run(&opts.out, &stem, &cfg, &r, opts.format())?;
    println!(
        "e_acc={:.3} d_min={:.3} collided={} infeasible_steps={} wall={:.2?}",
        r.e_acc, r.d_min, r.collided, r.infeasible_steps, r.wall_time
    );
    println!("trace: {}", trace.display());
    Ok(())
}

fn matrix(opts: &Opts) -> Result<bool> {
    let base = opts.scenario()?;
    let started = Instant::now();
    let cells = run_matrix(&base);
    write_matrix(&opts.out, &cells, opts.format())?;
    print!("{}", results_table(&cells));
    let mut ok = true;
    for c in &cells {
        if let Err(e) = &c.result {
            eprintln!("{}: {e}", c.name());
            ok = false;
        }
    }
    println!("matrix: {} cells in {:.1?}, written to {}", cells.len(), started.elapsed(), opts.out.display());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(o) => run(o).map(|_| true),
        Command::Matrix(o) => matrix(o),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
