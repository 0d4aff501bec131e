//! Lumped capacitive conduction network with Newton-type surface patches.

mod io;
mod network;
mod series;
mod solver;
mod template;

use thiserror::Error;

pub use io::{load_network, parse_network, write_node_history, write_network};
pub use network::{
    assemble, assemble_for_channels, ConductiveLink, NetworkDescription, PatchIndex, Probe, SurfacePatch, ThermalNetwork,
    ThermalNode,
};
pub use series::{read_series_binary, read_series_csv, write_series_binary, write_series_csv, BoundaryConditionSeries};
pub use solver::{
    energy_balance, steady_solve, EnergyBalance, LinearSolver, PatchBc, RunHistory, SolverKind, StepRecord, TransientSolver,
    DIRECT_NODE_LIMIT, DEFAULT_DT,
};
pub use template::measuring_point_template;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("node {0} is not connected to the rest of the network")]
    DisconnectedNode(String),
    #[error("patch {patch}: {reason}")]
    DanglingPatch { patch: String, reason: String },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("conduction matrix is not an M-matrix: {0}")]
    NotMMatrix(String),
    #[error("system is singular: {0}")]
    SingularSystem(String),
    #[error("solver diverged at step {step}: {reason}")]
    SolverDivergence { step: usize, reason: String },
    #[error("boundary-condition series mismatch: {0}")]
    SeriesMismatch(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
