use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{CylinderConfig, InitialState};
use super::{
    create_dir, create_file, write_stationary_points, ClosureConfig, EngineConfig, GasExchangeConfig, LiftSpec,
    NetworkConfig, NrefPolicy, PipelineConfig, PipelineError, Result, SolverConfig, Stage, StationaryConfig,
    TelemetryConfig, WaterConfig,
};
use crate::cycle_model::{write_pressure_trace, CycleTiming, CylinderGeometry, LengthScale, PdfBinning};
use crate::gas_exchange::PortGeometry;
use crate::histogram::BinEdges;
use crate::state_space::{write_telemetry, ColumnMap, EdgesGrid, FullLoadThreshold};
use crate::synthetic::{default_speeds, full_load_line, stationary_traces, synthetic_lap, water_records, LapSpec, Phase, TraceGenSpec};
use crate::thermal_net::{measuring_point_template, write_network, SolverKind, DEFAULT_DT};
use crate::water_jacket::{ReferenceHtcField, ReferencePatch, WaterMeasurement};

const S: Stage = Stage::Synth;

/// Inputs of a self-contained synthetic run.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSpec {
    pub seed: u64,
    pub cylinders: usize,
    pub speeds: Vec<f64>,
    pub traces: TraceGenSpec,
    pub lap: LapSpec,
    pub dt: f64,
    /// Volume flow of the coolant pump at the lowest and highest speed \[m³/s\].
    pub water_flow: (f64, f64),
    pub fuel_offsets: Vec<f64>,
}

impl Default for DemoSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            cylinders: 2,
            speeds: default_speeds(),
            traces: TraceGenSpec::default(),
            lap: LapSpec::default(),
            dt: DEFAULT_DT,
            water_flow: (1.61e-3, 2.32e-3),
            fuel_offsets: Vec::new(),
        }
    }
}

pub fn demo_geometry(cylinders: usize) -> CylinderGeometry {
    CylinderGeometry { bore: 0.086, stroke: 0.066, conrod_length: 0.12, compression_ratio: 12.0, n_cylinders: cylinders as u32 }
}

fn edges(v: Vec<f64>) -> BinEdges {
    BinEdges::new(v).expect("demo edges increase")
}

fn uniform(lo: f64, hi: f64, w: f64) -> Vec<f64> {
    let n = ((hi - lo) / w).round() as usize;
    (0..=n).map(|i| lo + w * i as f64).collect()
}

/// Configuration used by the demo inputs; paths are relative to the demo
/// directory.
pub fn demo_config(spec: &DemoSpec) -> PipelineConfig {
    let line = full_load_line(&spec.speeds);
    let lo = spec.speeds.first().copied().unwrap_or(2000.0) - 250.0;
    let hi = spec.speeds.last().copied().unwrap_or(8500.0) + 250.0;
    PipelineConfig {
        engine: EngineConfig {
            geometry: demo_geometry(spec.cylinders),
            timing: CycleTiming::default(),
            eps_c: 1.0,
            c_ivc: 0.5,
            kappa_ub: 1.33,
            molar_mass: 0.0289,
            length: LengthScale::SphereEquivalent,
        },
        closure: ClosureConfig::default(),
        coasting: Default::default(),
        part_load: Default::default(),
        pdf: PdfBinning::default(),
        state_grid: EdgesGrid::new([
            edges(uniform(lo, hi, 500.0)),
            edges(uniform(0.0, 450.0, 50.0)),
            edges(vec![300.0, 320.0]),
            edges(vec![-0.5, 0.5, 20.0, 40.0, 60.0, 80.0]),
            edges(vec![-0.5, 0.5, 10.0, 20.0, 30.0, 40.0]),
        ]),
        stationary: StationaryConfig {
            points: "full_load.csv".into(),
            fired: "stationary/fired_{rpm}.csv".into(),
            motored: "stationary/motored_{rpm}.csv".into(),
            expected_points: Some(spec.speeds.len()),
        },
        telemetry: TelemetryConfig {
            path: "telemetry.csv".into(),
            columns: ColumnMap::default(),
            coasting_torque: 0.0,
            full_load: FullLoadThreshold::LineFraction {
                line: line.iter().map(|p| [p.n_engine, p.torque]).collect(),
                fraction: 0.9,
            },
        },
        gas_exchange: GasExchangeConfig {
            intake: PortGeometry { valve_diameter: 0.034, duct_diameter: 0.03, port_length: 0.1 },
            exhaust: PortGeometry { valve_diameter: 0.029, duct_diameter: 0.027, port_length: 0.09 },
            intake_valve: LiftSpec { open_deg: -370.0, close_deg: -140.0, max_lift: 0.012 },
            exhaust_valve: LiftSpec { open_deg: 130.0, close_deg: 370.0, max_lift: 0.011 },
            intake_port_coeff: 0.1,
            intake_pressure: 101_325.0,
            exhaust_pressure: 101_325.0,
            exhaust_temperature: 1100.0,
            gas_table: None,
        },
        water: WaterConfig {
            reference: "water_reference.csv".into(),
            measurement: "water.csv".into(),
            m: 0.7,
            n_ref: NrefPolicy::Field,
            tau_c: 0.0,
            inlet_offset: 0.0,
        },
        network: NetworkConfig { path: Some("network.toml".into()), template_cylinders: None },
        solver: SolverConfig { dt: spec.dt, kind: SolverKind::Auto, initial: InitialState::Steady, horizon: None, binary_series: false },
        cylinders: spec.fuel_offsets.iter().map(|&fuel_offset| CylinderConfig { fuel_offset }).collect(),
        base_dir: PathBuf::new(),
    }
}

/// Reference field over the water channels of the template network.
pub fn demo_reference_field(cylinders: usize) -> ReferenceHtcField {
    let mut patches = Vec::new();
    for c in 1..=cylinders {
        for (stem, area, alpha) in [("water_head_in", 0.008, 6500.0), ("water_head_ex", 0.008, 9000.0), ("water_liner", 0.012, 3500.0)] {
            patches.push(ReferencePatch { id: format!("{stem}_c{c}"), area, alpha_ref: alpha });
        }
    }
    patches.push(ReferencePatch { id: "water_rail".into(), area: 0.01, alpha_ref: 2500.0 });
    ReferenceHtcField::new(patches, 6000.0, 0.7).expect("demo field is valid")
}

fn write_to(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::result::Result<(), String>) -> Result<()> {
    let mut w = create_file(S, path)?;
    f(&mut w).map_err(|e| PipelineError::io(S, path, e))?;
    w.flush().map_err(|e| PipelineError::io(S, path, e))
}

/// Writes every input of a synthetic run below `dir` and returns the loaded
/// configuration together with the lap phase of each telemetry sample.
pub fn write_demo_inputs(dir: &Path, spec: &DemoSpec) -> Result<(PipelineConfig, Vec<Phase>)> {
    create_dir(S, &dir.join("stationary"))?;
    let geom = demo_geometry(spec.cylinders);
    let line = full_load_line(&spec.speeds);
    let cfg = demo_config(spec);
    let text = cfg.to_toml();
    write_to(&dir.join("config.toml"), |w| w.write_all(text.as_bytes()).map_err(|e| e.to_string()))?;
    write_to(&dir.join("full_load.csv"), |w| write_stationary_points(&line, w).map_err(|e| e.to_string()))?;
    for (i, p) in line.iter().enumerate() {
        let (fired, motored) = stationary_traces(&geom, p, &spec.traces, cfg.engine.timing.ignition_deg, spec.seed.wrapping_add(100 + i as u64))
            .map_err(|e| PipelineError::numerical(S, format!("{:.0} rpm: {e}", p.n_engine)))?;
        write_to(&dir.join(cfg.fired_trace(p.n_engine)), |w| write_pressure_trace(&fired, w).map_err(|e| e.to_string()))?;
        write_to(&dir.join(cfg.motored_trace(p.n_engine)), |w| write_pressure_trace(&motored, w).map_err(|e| e.to_string()))?;
    }
    let (series, phases) = synthetic_lap(&spec.lap, &line, spec.seed).map_err(|e| PipelineError::validation(S, e))?;
    write_to(&dir.join("telemetry.csv"), |w| write_telemetry(&series, w).map_err(|e| e.to_string()))?;
    let water = WaterMeasurement::new(water_records(&series, spec.water_flow, 1000.0, 4180.0)).map_err(|e| PipelineError::validation(S, e))?;
    write_to(&dir.join("water.csv"), |w| water.write_csv(w).map_err(|e| e.to_string()))?;
    write_to(&dir.join("water_reference.csv"), |w| demo_reference_field(spec.cylinders).write_csv(w).map_err(|e| e.to_string()))?;
    let net = write_network(&measuring_point_template(spec.cylinders)).map_err(|e| PipelineError::validation(S, e))?;
    write_to(&dir.join("network.toml"), |w| w.write_all(net.as_bytes()).map_err(|e| e.to_string()))?;
    Ok((PipelineConfig::load(&dir.join("config.toml"))?, phases))
}
