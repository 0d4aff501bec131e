use std::io::Write;
use std::path::Path;

use super::config::InitialState;
use super::{create_dir, create_file, open_file, Layout, PipelineConfig, PipelineError, Result, Stage};
use crate::thermal_net::{
    assemble_for_channels, energy_balance, load_network, measuring_point_template, read_series_binary, read_series_csv,
    steady_solve, write_node_history, BoundaryConditionSeries, EnergyBalance, NetworkDescription, PatchBc, RunHistory,
    ThermalError, ThermalNetwork, TransientSolver,
};
use crate::water_jacket::{water_heat_flow, WaterFlow, WaterMeasurement};

const WATER_DENSITY: f64 = 1000.0;
const WATER_CP: f64 = 4180.0;

fn thermal(stage: Stage, e: ThermalError) -> PipelineError {
    match e {
        ThermalError::SingularSystem(_) | ThermalError::SolverDivergence { .. } | ThermalError::NotMMatrix(_) => {
            PipelineError::numerical(stage, e)
        }
        _ => PipelineError::validation(stage, e),
    }
}

/// Every `*.csv` series in `dir` (or `*.bcs` when no CSV exists), sorted by
/// zone name.
pub fn load_series_dir(dir: &Path, stage: Stage) -> Result<Vec<BoundaryConditionSeries>> {
    let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::io(stage, dir, e))?;
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    let with_ext = |ext: &str| paths.iter().filter(|p| p.extension().is_some_and(|x| x == ext)).cloned().collect::<Vec<_>>();
    let csvs = with_ext("csv");
    let mut out = Vec::new();
    if csvs.is_empty() {
        for p in with_ext("bcs") {
            out.push(read_series_binary(open_file(stage, &p)?).map_err(|e| PipelineError::io(stage, &p, e))?);
        }
    } else {
        for p in csvs {
            let zone = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.push(read_series_csv(&zone, open_file(stage, &p)?).map_err(|e| PipelineError::io(stage, &p, e))?);
        }
    }
    out.sort_by(|a, b| a.zone().cmp(b.zone()));
    Ok(out)
}

fn network_description(cfg: &PipelineConfig, stage: Stage) -> Result<NetworkDescription> {
    match (&cfg.network.path, cfg.network.template_cylinders) {
        (Some(p), _) => {
            let path = cfg.resolve(p);
            load_network(&path).map_err(|e| PipelineError::io(stage, &path, e))
        }
        (None, Some(n)) => Ok(measuring_point_template(n)),
        (None, None) => Err(PipelineError::validation(stage, "no network configured")),
    }
}

/// Time-mean patch values: mean `α` and the flux-weighted temperature.
fn mean_bc(net: &ThermalNetwork, series: &[BoundaryConditionSeries]) -> Vec<PatchBc> {
    net.patches()
        .iter()
        .map(|p| {
            let s = series.iter().find(|s| s.zone() == net.channels()[p.channel]).expect("channel checked at assembly");
            let a: f64 = s.alpha().iter().sum();
            let at: f64 = s.alpha().iter().zip(s.t_eff()).map(|(a, t)| a * t).sum();
            let t_eff = if a > 0.0 { at / a } else { s.t_eff().iter().sum::<f64>() / s.len() as f64 };
            PatchBc { alpha: a / s.len() as f64, t_eff }
        })
        .collect()
}

fn prepare(cfg: &PipelineConfig, layout: &Layout, stage: Stage) -> Result<(ThermalNetwork, Vec<BoundaryConditionSeries>)> {
    let desc = network_description(cfg, stage)?;
    let series = load_series_dir(&layout.bc_dir(), stage)?;
    let channels: Vec<String> = series.iter().map(|s| s.zone().to_string()).collect();
    let net = assemble_for_channels(&desc, &channels).map_err(|e| thermal(stage, e))?;
    Ok((net, series))
}

fn write_temperatures(path: &Path, stage: Stage, net: &ThermalNetwork, temps: &[f64]) -> Result<()> {
    let mut w = create_file(stage, path)?;
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "node,T_K")?;
        for (id, t) in net.node_ids().iter().zip(temps) {
            writeln!(w, "{id},{t}")?;
        }
        w.flush()
    })();
    res.map_err(|e| PipelineError::io(stage, path, e))
}

/// Steady field of the time-mean boundary conditions.
pub fn steady(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<f64>> {
    let (net, series) = prepare(cfg, layout, Stage::Steady)?;
    let t = steady_solve(&net, &mean_bc(&net, &series), cfg.solver.kind).map_err(|e| thermal(Stage::Steady, e))?;
    write_temperatures(&layout.root.join("steady").join("temperatures.csv"), Stage::Steady, &net, &t)?;
    Ok(t)
}

pub struct SimulationOutcome {
    pub network: ThermalNetwork,
    pub history: RunHistory,
    pub balance: EnergyBalance,
    /// Per step `(gas inflow, water outflow, storage rate)` \[W\].
    pub channel_balance: Vec<(f64, f64, f64)>,
}

fn is_water(channel: &str) -> bool {
    channel.starts_with("water")
}

pub fn simulate(cfg: &PipelineConfig, layout: &Layout) -> Result<SimulationOutcome> {
    const ST: Stage = Stage::Simulate;
    let (net, series) = prepare(cfg, layout, ST)?;
    let initial = match cfg.solver.initial {
        InitialState::Steady => Some(steady_solve(&net, &mean_bc(&net, &series), cfg.solver.kind).map_err(|e| thermal(ST, e))?),
        InitialState::Network => None,
    };
    let history = TransientSolver::run(&net, &series, initial, cfg.solver.kind).map_err(|e| thermal(ST, e))?;
    let balance = energy_balance(&history);
    let gas = history.channel_heat(|c| !is_water(c));
    let water = history.channel_heat(is_water);
    let channel_balance: Vec<(f64, f64, f64)> =
        (0..history.steps()).map(|k| (gas[k], -water[k], history.storage_rate[k])).collect();

    let dir = layout.sim_dir();
    create_dir(ST, &dir.join("nodes"))?;
    for (i, id) in net.node_ids().iter().enumerate() {
        let path = dir.join("nodes").join(format!("{id}.csv"));
        let mut w = create_file(ST, &path)?;
        write_node_history(&history, i, &mut w).map_err(|e| PipelineError::io(ST, &path, e))?;
    }
    write_temperatures(&dir.join("final.csv"), ST, &net, history.final_temperatures())?;

    let io = |path: &Path, e: std::io::Error| PipelineError::io(ST, path, e);
    let path = dir.join("summary.csv");
    let mut w = create_file(ST, &path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "node,mean_K,min_K,max_K,amplitude_K")?;
        for (i, id) in net.node_ids().iter().enumerate() {
            let s = history.node_series(i);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            writeln!(w, "{id},{mean},{lo},{hi},{}", 0.5 * (hi - lo))?;
        }
        w.flush()
    })()
    .map_err(|e| io(&path, e))?;

    let path = dir.join("probes.csv");
    let mut w = create_file(ST, &path)?;
    (|| -> std::io::Result<()> {
        let names: Vec<&str> = net.probes().iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "t_s,{}", names.join(","))?;
        for (t, row) in history.t.iter().zip(&history.temperatures) {
            let vals: Vec<String> = net.probes().iter().map(|(_, i)| row[*i].to_string()).collect();
            writeln!(w, "{t},{}", vals.join(","))?;
        }
        w.flush()
    })()
    .map_err(|e| io(&path, e))?;

    let path = dir.join("energy_balance.csv");
    let mut w = create_file(ST, &path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "t_s,gas_in_W,water_out_W,storage_W,residual_W")?;
        for (k, (g, wo, s)) in channel_balance.iter().enumerate() {
            writeln!(w, "{},{g},{wo},{s},{}", history.t[k + 1], balance.per_step[k])?;
        }
        w.flush()
    })()
    .map_err(|e| io(&path, e))?;

    let measured = measured_water_heat(cfg, &history)?;
    let model_water: f64 = channel_balance.iter().map(|c| c.1).sum::<f64>() * history.dt;
    let path = dir.join("energy_summary.csv");
    let mut w = create_file(ST, &path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "quantity,value")?;
        writeln!(w, "steps,{}", history.steps())?;
        writeln!(w, "cumulative_residual_J,{}", balance.cumulative)?;
        writeln!(w, "throughput_J,{}", balance.throughput)?;
        writeln!(w, "relative_residual,{}", balance.relative())?;
        writeln!(w, "max_step_residual_W,{}", balance.max_step_residual())?;
        writeln!(w, "model_water_heat_J,{model_water}")?;
        if let Some(m) = measured {
            writeln!(w, "measured_water_heat_J,{m}")?;
        }
        w.flush()
    })()
    .map_err(|e| io(&path, e))?;
    log::info!(
        "{} steps, cumulative energy residual {:.3e} J of {:.3e} J throughput",
        history.steps(),
        balance.cumulative,
        balance.throughput
    );
    Ok(SimulationOutcome { network: net, history, balance, channel_balance })
}

/// Coolant heat `ṁ c_p (T_out − T_in)` integrated over the run, if the
/// measurement covers it.
fn measured_water_heat(cfg: &PipelineConfig, hist: &RunHistory) -> Result<Option<f64>> {
    let path = cfg.resolve(&cfg.water.measurement);
    let Ok(m) = WaterMeasurement::load(&path) else {
        return Ok(None);
    };
    let mut total = 0.0;
    for &t in &hist.t[1..] {
        let r = m.at(t);
        let q = water_heat_flow(WaterFlow::Volume { m3_s: r.vol_flow, density: WATER_DENSITY }, WATER_CP, r.t_in, r.t_out)
            .map_err(|e| PipelineError::io(Stage::Simulate, &path, e))?;
        total += q * hist.dt;
    }
    Ok(Some(total))
}

/// Lag-corrected coolant measurement.
pub fn sensor_correct(cfg: &PipelineConfig, layout: &Layout) -> Result<WaterMeasurement> {
    const ST: Stage = Stage::SensorCorrect;
    let path = cfg.resolve(&cfg.water.measurement);
    let m = WaterMeasurement::load(&path)
        .and_then(|m| m.lag_corrected(cfg.water.tau_c))
        .map_err(|e| PipelineError::io(ST, &path, e))?;
    let out = layout.file("water_corrected.csv");
    let w = create_file(ST, &out)?;
    m.write_csv(w).map_err(|e| PipelineError::io(ST, &out, e))?;
    Ok(m)
}
