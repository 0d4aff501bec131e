//! Motored cycles (`T_i = 0`, no fuel) from an isentropic pressure model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle_model::{cycle_aggregate, CycleError, CycleModel, CycleResult};
use crate::state_space::EngineState;

#[derive(Debug, Error)]
pub enum CoastingError {
    #[error("volume {volume} m³ at sample {index} exceeds the maximum volume {v_max} m³")]
    VolumeExceedsMax { index: usize, volume: f64, v_max: f64 },
    #[error("state is not coasting: indicated torque {0} Nm")]
    NotCoasting(f64),
    #[error("invalid coasting parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Cycle(#[from] CycleError),
}

/// Isentrope `p V^κ = p_ini V_max^κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoastingParams {
    pub kappa: f64,
    pub p_ini: f64,
    pub v_max: f64,
}

impl CoastingParams {
    pub fn validate(&self) -> Result<(), CoastingError> {
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(CoastingError::InvalidParams(format!("kappa must be ≥ 1, got {}", self.kappa)));
        }
        if !(self.p_ini > 0.0 && self.v_max > 0.0) {
            return Err(CoastingError::InvalidParams("p_ini and V_max must be positive".into()));
        }
        Ok(())
    }
}

pub fn motored_pressure(params: &CoastingParams, volume: &[f64]) -> Result<Vec<f64>, CoastingError> {
    params.validate()?;
    volume
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > params.v_max * (1.0 + 1e-12) || !(v > 0.0) {
                Err(CoastingError::VolumeExceedsMax { index: i, volume: v, v_max: params.v_max })
            } else {
                Ok(params.p_ini * (params.v_max / v).powf(params.kappa))
            }
        })
        .collect()
}

/// Engine-level constants of the coasting model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoastingConfig {
    pub kappa: f64,
    /// Used for `p_ini` when the air mass is zero \[Pa\].
    pub ambient_pressure: f64,
    /// Specific gas constant of air \[J/(kg K)\].
    pub r_specific: f64,
}

impl Default for CoastingConfig {
    fn default() -> Self {
        Self { kappa: 1.35, ambient_pressure: 101_325.0, r_specific: 287.05 }
    }
}

impl CoastingConfig {
    /// Ideal gas at BDC, `p_ini = m_air R_spec t_int / V_max`.
    pub fn p_ini(&self, state: &EngineState, v_max: f64) -> f64 {
        if state.m_air > 0.0 {
            state.m_air * 1e-6 * self.r_specific * state.t_int / v_max
        } else {
            self.ambient_pressure
        }
    }
}

/// Motored cycle at `state` on the crank grid `angles` (one 720° cycle).
/// Compression and expansion run between the two BDCs around firing TDC;
/// the gas-exchange strokes sit at `p_ini` and `t_int`.
pub fn coasting_cycle(
    state: &EngineState,
    model: &CycleModel,
    cfg: &CoastingConfig,
    angles: &[f64],
) -> Result<CycleResult, CoastingError> {
    if state.torque != 0.0 {
        return Err(CoastingError::NotCoasting(state.torque));
    }
    let geom = &model.geometry;
    let v_max = geom.max_volume();
    let params = CoastingParams { kappa: cfg.kappa, p_ini: cfg.p_ini(state, v_max), v_max };
    params.validate()?;
    if !(state.t_int > 0.0) {
        return Err(CoastingError::InvalidParams(format!("inlet temperature {} K", state.t_int)));
    }
    let n = angles.len();
    let lo = angles.partition_point(|&a| a < -180.0).min(n - 1);
    let hi = angles.partition_point(|&a| a <= 180.0).saturating_sub(1).max(lo);
    let volume = model.volumes(angles);
    let mut pressure = vec![params.p_ini; n];
    let mut t_gas = vec![state.t_int; n];
    let closed = motored_pressure(&params, &volume[lo..=hi])?;
    for (j, p) in closed.into_iter().enumerate() {
        let i = lo + j;
        t_gas[i] = state.t_int * (p / params.p_ini) * volume[i] / v_max;
        pressure[i] = p;
    }
    let chain = model.htc_chain(angles, &pressure, &t_gas, None, (lo, hi), state.n_engine)?;
    Ok(cycle_aggregate(angles, &chain.alpha, &t_gas, state.n_engine)?)
}
