//! Crank-angle resolved in-cylinder analysis under fired conditions.
//!
//! The chain runs from a measured pressure trace to a cycle-aggregated
//! Newton boundary condition:
//!
//! 1. slider-crank kinematics give `V(α_cr)` and the piston speed,
//! 2. the ideal gas law gives the mean gas temperature `T̄_g = pV/(NR)`,
//! 3. a pressure-ratio combustion analysis against the motored trace gives
//!    the mass fraction burned `x`, a polytropic unburnt zone gives `T_ub` and
//!    the two-zone volume balance gives the burnt volume fraction `y`,
//! 4. the lumped `k` equation `dk/dt = −(2/3)(k/V)dV/dt − ε_c k^{3/2}/l` is
//!    integrated over the closed part of the cycle,
//! 5. the characteristic velocity `v = √((8/3)k + v_p² + v_c²)` feeds the
//!    power-law closure `α = C p^m v^m T̄_g^{0.75−1.62m}`,
//! 6. the trace is reduced to `(⟨α⟩, ⟨αT̄_g⟩/⟨α⟩)` and ensembles of cycles are
//!    binned into normed `(α, T_eff)` histograms per engine speed.
//!
//! Crank angles are in degrees with firing TDC at 0°; one cycle spans 720°.

mod analysis;
mod combustion;
mod htc;
mod kinematics;
mod pdf;
mod trace_io;
mod turbulence;

pub use analysis::{CycleAnalysis, CycleModel, CycleTiming};
pub use combustion::{
    burn_fraction, burn_fraction_trace, burnt_temperature, burnt_volume_fraction,
    unburnt_temperature, BurnFraction,
};
pub use htc::{
    characteristic_velocity, cycle_aggregate, htc_trace, CycleResult, HtcClosure, VelocityInputs,
};
pub use kinematics::{cylinder_volume, mean_gas_temperature, CylinderGeometry};
pub use pdf::{build_htc_pdf, HtcPdf, PdfBinning};
pub use trace_io::{read_pressure_trace, read_trace, write_pressure_trace, PressureTrace};
pub use turbulence::{solve_tke, LengthScale, TkeSolution};

use thiserror::Error;

/// Universal gas constant \[J/(mol K)\].
pub const GAS_CONSTANT: f64 = 8.314462;

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("invalid cylinder geometry: {0}")]
    InvalidGeometry(String),
    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
    #[error("non-positive pressure {value} Pa at sample {index}")]
    NonPositivePressure { index: usize, value: f64 },
    #[error("traces are not on a common grid: {0}")]
    GridMismatch(String),
    #[error("trace spans {span}° of crank angle, a full cycle needs 720°")]
    IncompleteCycle { span: f64 },
    #[error("need at least 2 cycles per speed point, got {0}")]
    TooFewCycles(usize),
    #[error("invalid heat-transfer closure: {0}")]
    InvalidClosure(String),
    #[error("malformed pressure trace: {0}")]
    Malformed(String),
    #[error(transparent)]
    Histogram(#[from] crate::histogram::HistogramError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<(), CycleError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CycleError::NonPositiveInput { name, value })
    }
}
