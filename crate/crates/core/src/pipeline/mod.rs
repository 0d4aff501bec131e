//! File-based stages from stationary traces to node temperature histories.

mod build_pdf;
mod config;
mod demo;
mod gen_bc;
mod report;
mod simulate;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use build_pdf::{build_pdf, load_stationary_points, pdf_path, read_stationary_points, write_stationary_points, PdfArtifacts};
pub use config::{
    ClosureConfig, CylinderConfig, EngineConfig, GasExchangeConfig, InitialState, LiftSpec, NetworkConfig, NrefPolicy, PipelineConfig, SolverConfig,
    StationaryConfig, TelemetryConfig, WaterConfig,
};
pub use demo::{demo_config, demo_geometry, demo_reference_field, write_demo_inputs, DemoSpec};
pub use gen_bc::{bin_boundary, boundary_series, fired_bin_pdf, gen_bc, BcContext, BinBoundary, ZoneKind};
pub use report::{report, NodeSummary, ReportSummary};
pub use simulate::{load_series_dir, sensor_correct, simulate, steady, SimulationOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    BuildPdf,
    GenBc,
    Simulate,
    Steady,
    SensorCorrect,
    Report,
    Synth,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::BuildPdf => "build-pdf",
            Stage::GenBc => "gen-bc",
            Stage::Simulate => "simulate",
            Stage::Steady => "steady",
            Stage::SensorCorrect => "sensor-correct",
            Stage::Report => "report",
            Stage::Synth => "synth-lap",
        })
    }
}

/// Validation problems (bad input) versus numerical failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub failure: Failure,
    pub message: String,
}

impl PipelineError {
    pub fn validation(stage: Stage, message: impl fmt::Display) -> Self {
        Self { stage, failure: Failure::Validation, message: message.to_string() }
    }

    pub fn numerical(stage: Stage, message: impl fmt::Display) -> Self {
        Self { stage, failure: Failure::Numerical, message: message.to_string() }
    }

    pub fn io(stage: Stage, path: &Path, e: impl fmt::Display) -> Self {
        Self::validation(stage, format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self.failure {
            Failure::Validation => 2,
            Failure::Numerical => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Output layout below the run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn pdf_dir(&self) -> PathBuf {
        self.root.join("pdf")
    }

    pub fn bc_dir(&self) -> PathBuf {
        self.root.join("bc")
    }

    pub fn sim_dir(&self) -> PathBuf {
        self.root.join("sim")
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

pub(crate) fn create_dir(stage: Stage, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(stage, dir, e))
}

pub(crate) fn create_file(stage: Stage, path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        create_dir(stage, parent)?;
    }
    std::fs::File::create(path).map(std::io::BufWriter::new).map_err(|e| PipelineError::io(stage, path, e))
}

pub(crate) fn open_file(stage: Stage, path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path).map(std::io::BufReader::new).map_err(|e| PipelineError::io(stage, path, e))
}
