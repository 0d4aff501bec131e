use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result, Stage};
use crate::coasting::CoastingConfig;
use crate::cycle_model::{CycleModel, CycleTiming, CylinderGeometry, HtcClosure, LengthScale, PdfBinning};
use crate::gas_exchange::{GasExchangeModel, GasTable, PortGeometry, ValveLift};
use crate::part_load::PartLoadConfig;
use crate::state_space::{ColumnMap, EdgesGrid, FullLoadThreshold};
use crate::thermal_net::{SolverKind, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub geometry: CylinderGeometry,
    #[serde(default)]
    pub timing: CycleTiming,
    #[serde(default = "default_eps_c")]
    pub eps_c: f64,
    #[serde(default = "default_c_ivc")]
    pub c_ivc: f64,
    #[serde(default = "default_kappa_ub")]
    pub kappa_ub: f64,
    /// \[kg/mol\]
    #[serde(default = "default_molar_mass")]
    pub molar_mass: f64,
    #[serde(default = "default_length")]
    pub length: LengthScale,
}

fn default_eps_c() -> f64 {
    1.0
}
fn default_c_ivc() -> f64 {
    0.5
}
fn default_kappa_ub() -> f64 {
    1.33
}
fn default_molar_mass() -> f64 {
    0.0289
}
fn default_length() -> LengthScale {
    LengthScale::SphereEquivalent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    #[serde(default = "default_m")]
    pub m: f64,
    /// Scale `C`; derived from the bore when absent.
    pub scale: Option<f64>,
    /// Rescale `C` so that the ensemble-mean HTC at `calibration_speed`
    /// equals this value \[W/m²K\].
    pub calibrate_to: Option<f64>,
    pub calibration_speed: Option<f64>,
}

fn default_m() -> f64 {
    0.78
}

impl Default for ClosureConfig {
    fn default() -> Self {
        Self { m: default_m(), scale: None, calibrate_to: None, calibration_speed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    /// CSV `n_engine,m_air,t_int,T_i,m_fuel` of the full-load points.
    pub points: PathBuf,
    /// Path patterns with `{rpm}` replaced by the integer speed.
    pub fired: String,
    pub motored: String,
    /// Required number of speed points.
    pub expected_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub coasting_torque: f64,
    pub full_load: FullLoadThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftSpec {
    pub open_deg: f64,
    pub close_deg: f64,
    /// \[m\]
    pub max_lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasExchangeConfig {
    pub intake: PortGeometry,
    pub exhaust: PortGeometry,
    pub intake_valve: LiftSpec,
    pub exhaust_valve: LiftSpec,
    #[serde(default = "default_port_coeff")]
    pub intake_port_coeff: f64,
    #[serde(default = "default_pressure")]
    pub intake_pressure: f64,
    #[serde(default = "default_pressure")]
    pub exhaust_pressure: f64,
    /// Full-load exhaust gas temperature, scaled by `r_T` in part load \[K\].
    pub exhaust_temperature: f64,
    /// CSV `T_K,nu_m2s,lambda_WmK,Pr`; built-in air table when absent.
    pub gas_table: Option<PathBuf>,
}

fn default_port_coeff() -> f64 {
    0.1
}
fn default_pressure() -> f64 {
    101_325.0
}

impl GasExchangeConfig {
    pub fn model(&self, base: &Path) -> Result<GasExchangeModel> {
        let gas = match &self.gas_table {
            Some(p) => GasTable::load(&base.join(p)).map_err(|e| PipelineError::validation(Stage::Config, e))?,
            None => GasTable::air(),
        };
        let lift = |s: &LiftSpec, d: f64| ValveLift::sinusoidal(s.open_deg, s.close_deg, s.max_lift, d, 181);
        Ok(GasExchangeModel {
            intake: self.intake,
            exhaust: self.exhaust,
            intake_lift: lift(&self.intake_valve, self.intake.valve_diameter),
            exhaust_lift: lift(&self.exhaust_valve, self.exhaust.valve_diameter),
            gas,
            intake_port_coeff: self.intake_port_coeff,
            r_specific: 287.05,
            intake_pressure: self.intake_pressure,
            exhaust_pressure: self.exhaust_pressure,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NrefPolicy {
    /// Use the speed stored with the reference field.
    Field,
    /// Power mean of the lap speeds.
    PowerMean,
    Fixed { rpm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterConfig {
    /// Reference HTC field CSV.
    pub reference: PathBuf,
    /// Coolant measurement CSV.
    pub measurement: PathBuf,
    #[serde(default = "default_water_m")]
    pub m: f64,
    #[serde(default = "default_nref")]
    pub n_ref: NrefPolicy,
    /// Sensor time constant \[s\].
    #[serde(default)]
    pub tau_c: f64,
    /// Added to the coolant temperature \[K\].
    #[serde(default)]
    pub inlet_offset: f64,
}

fn default_water_m() -> f64 {
    0.7
}
fn default_nref() -> NrefPolicy {
    NrefPolicy::Field
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub path: Option<PathBuf>,
    /// Use the built-in measuring point network for this many cylinders.
    pub template_cylinders: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Steady solution of the time-mean boundary conditions.
    #[default]
    Steady,
    /// Node temperatures from the network file.
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub kind: SolverKind,
    #[serde(default)]
    pub initial: InitialState,
    /// Simulated time \[s\]; the full telemetry span when absent.
    pub horizon: Option<f64>,
    /// Also write the binary series format.
    #[serde(default)]
    pub binary_series: bool,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, kind: SolverKind::Auto, initial: InitialState::Steady, horizon: None, binary_series: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderConfig {
    /// Relative fuel mass deviation of this cylinder.
    #[serde(default)]
    pub fuel_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub engine: EngineConfig,
    #[serde(default)]
    pub closure: ClosureConfig,
    #[serde(default)]
    pub coasting: CoastingConfig,
    #[serde(default)]
    pub part_load: PartLoadConfig,
    #[serde(default)]
    pub pdf: PdfBinning,
    pub state_grid: EdgesGrid,
    pub stationary: StationaryConfig,
    pub telemetry: TelemetryConfig,
    pub gas_exchange: GasExchangeConfig,
    pub water: WaterConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, rename = "cylinder")]
    pub cylinders: Vec<CylinderConfig>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::validation(Stage::Config, e.message().trim().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Config, path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| PipelineError { message: format!("{}: {}", path.display(), e.message), ..e })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(PipelineError::validation(Stage::Config, m));
        self.engine.geometry.validate().map_err(|e| PipelineError::validation(Stage::Config, e))?;
        self.engine.timing.validate().map_err(|e| PipelineError::validation(Stage::Config, e))?;
        if !(self.closure.m > 0.0 && self.closure.m < 1.0) {
            return err(format!("closure exponent m = {} outside (0, 1)", self.closure.m));
        }
        if self.closure.calibrate_to.is_some() != self.closure.calibration_speed.is_some() {
            return err("closure.calibrate_to and closure.calibration_speed go together".into());
        }
        if !(self.solver.dt > 0.0) {
            return err(format!("solver.dt = {} must be positive", self.solver.dt));
        }
        let n_cyl = self.engine.geometry.n_cylinders as usize;
        if !self.cylinders.is_empty() && self.cylinders.len() != n_cyl {
            return err(format!("{} [[cylinder]] entries for {n_cyl} cylinders", self.cylinders.len()));
        }
        if self.cylinders.iter().any(|c| !(c.fuel_offset > -1.0)) {
            return err("cylinder fuel offsets must exceed -1".into());
        }
        if self.network.path.is_none() == self.network.template_cylinders.is_none() {
            return err("network needs exactly one of `path` and `template_cylinders`".into());
        }
        if !(self.water.m > 0.0) {
            return err(format!("water.m = {} must be positive", self.water.m));
        }
        Ok(())
    }

    /// Every input file needed by the stages from build-pdf on.
    pub fn check_inputs(&self, speeds: &[f64]) -> Result<()> {
        let mut missing = Vec::new();
        let mut push = |p: PathBuf| {
            if !p.is_file() {
                missing.push(p.display().to_string())
            }
        };
        push(self.resolve(&self.telemetry.path));
        push(self.resolve(&self.water.reference));
        push(self.resolve(&self.water.measurement));
        if let Some(p) = &self.network.path {
            push(self.resolve(p));
        }
        for &n in speeds {
            push(self.fired_trace(n));
            push(self.motored_trace(n));
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::validation(Stage::Config, format!("missing input files: {}", missing.join(", "))))
        }
    }

    pub fn fired_trace(&self, rpm: f64) -> PathBuf {
        self.resolve(Path::new(&self.stationary.fired.replace("{rpm}", &format!("{rpm:.0}"))))
    }

    pub fn motored_trace(&self, rpm: f64) -> PathBuf {
        self.resolve(Path::new(&self.stationary.motored.replace("{rpm}", &format!("{rpm:.0}"))))
    }

    pub fn fuel_offset(&self, cylinder: usize) -> f64 {
        self.cylinders.get(cylinder).map(|c| c.fuel_offset).unwrap_or(0.0)
    }

    pub fn closure(&self) -> Result<HtcClosure> {
        match self.closure.scale {
            Some(c) => HtcClosure::new(c, self.closure.m).map_err(|e| PipelineError::validation(Stage::Config, e)),
            None => Ok(HtcClosure::woschni_default(self.engine.geometry.bore, self.closure.m)),
        }
    }

    pub fn cycle_model(&self, closure: HtcClosure) -> CycleModel {
        CycleModel {
            geometry: self.engine.geometry,
            closure,
            timing: self.engine.timing,
            eps_c: self.engine.eps_c,
            c_ivc: self.engine.c_ivc,
            kappa_ub: self.engine.kappa_ub,
            molar_mass: self.engine.molar_mass,
            length: self.engine.length,
        }
    }
}
