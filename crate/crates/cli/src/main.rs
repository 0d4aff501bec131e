use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use enginebc::pipeline::{self, DemoSpec, Layout, PipelineConfig, PipelineError};
use enginebc::synthetic::LapSpec;

/// Statistical engine boundary conditions and transient component temperatures.
#[derive(Debug, Parser)]
#[command(name = "enginebc", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run directory holding all stage outputs.
    #[arg(long)]
    out: PathBuf,
    /// Override the simulation time step [s].
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze the stationary traces and bin the telemetry.
    BuildPdf(Common),
    /// Write one boundary-condition series per surface zone.
    GenBc(Common),
    /// Transient solve over the boundary-condition series.
    Simulate(Common),
    /// Steady solve under the time-mean boundary conditions.
    Steady(Common),
    /// Write the lag-corrected coolant measurement.
    SensorCorrect(Common),
    /// Summarize a finished simulation.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Earlier run to difference node means against.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Generate a complete synthetic input set (traces, lap, coolant, network).
    SynthLap {
        /// Directory for the generated inputs and `config.toml`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        dt: Option<f64>,
        /// Lap duration [s].
        #[arg(long, default_value_t = 180.0)]
        duration: f64,
        #[arg(long, default_value_t = 2.0 / 3.0)]
        full_load_fraction: f64,
        #[arg(long, default_value_t = 0.25)]
        coasting_fraction: f64,
        #[arg(long, default_value_t = 2)]
        cylinders: usize,
        /// Fired cycles per stationary trace.
        #[arg(long, default_value_t = 30)]
        cycles: usize,
    },
}

fn load(c: &Common) -> Result<(PipelineConfig, Layout), PipelineError> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(dt) = c.dt {
        cfg.solver.dt = dt;
        cfg.validate()?;
    }
    Ok((cfg, Layout::new(&c.out)))
}

fn synth(out: &Path, spec: DemoSpec) -> Result<(), PipelineError> {
    let (cfg, phases) = pipeline::write_demo_inputs(out, &spec)?;
    let full = phases.iter().filter(|p| **p == enginebc::synthetic::Phase::FullLoad).count();
    log::info!(
        "{} telemetry samples, {full} at full load; config at {}",
        phases.len(),
        out.join("config.toml").display()
    );
    drop(cfg);
    Ok(())
}

fn run(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::BuildPdf(c) => {
            let (cfg, layout) = load(&c)?;
            pipeline::build_pdf(&cfg, &layout).map(drop)
        }
        Command::GenBc(c) => {
            let (cfg, layout) = load(&c)?;
            pipeline::gen_bc(&cfg, &layout).map(drop)
        }
        Command::Simulate(c) => {
            let (cfg, layout) = load(&c)?;
            let out = pipeline::simulate(&cfg, &layout)?;
            println!(
                "{} steps, energy residual {:.3e} of throughput",
                out.history.steps(),
                out.balance.relative()
            );
            Ok(())
        }
        Command::Steady(c) => {
            let (cfg, layout) = load(&c)?;
            pipeline::steady(&cfg, &layout).map(drop)
        }
        Command::SensorCorrect(c) => {
            let (cfg, layout) = load(&c)?;
            pipeline::sensor_correct(&cfg, &layout).map(drop)
        }
        Command::Report { out, baseline } => {
            let layout = Layout::new(&out);
            pipeline::report(&layout, baseline.as_deref())?;
            println!("{}", layout.file("report.md").display());
            Ok(())
        }
        Command::SynthLap { out, seed, dt, duration, full_load_fraction, coasting_fraction, cylinders, cycles } => {
            let mut spec = DemoSpec {
                seed,
                cylinders,
                lap: LapSpec { duration, full_load_fraction, coasting_fraction, ..LapSpec::default() },
                ..DemoSpec::default()
            };
            spec.traces.n_cycles = cycles;
            if let Some(dt) = dt {
                spec.dt = dt;
            }
            if !(full_load_fraction >= 0.0 && coasting_fraction >= 0.0 && full_load_fraction + coasting_fraction <= 1.0) {
                return Err(PipelineError::validation(
                    pipeline::Stage::Synth,
                    "duty fractions must be non-negative and sum to at most 1",
                ));
            }
            synth(&out, spec)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
