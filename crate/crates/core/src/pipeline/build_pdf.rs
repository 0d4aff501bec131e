use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{create_dir, create_file, open_file, Layout, PipelineConfig, PipelineError, Result, Stage};
use crate::cycle_model::{build_htc_pdf, read_pressure_trace, HtcClosure, HtcPdf};
use crate::state_space::{
    build_pointer_matrix, build_state_histogram, lap_statistics, load_telemetry, EngineState, LapStatistics, PointerMatrix,
    StateHistogram,
};

const S: Stage = Stage::BuildPdf;

#[derive(Debug)]
pub struct PdfArtifacts {
    pub speeds: Vec<f64>,
    pub pdfs: Vec<HtcPdf>,
    pub closure: HtcClosure,
    pub states: StateHistogram,
    pub pointer: PointerMatrix,
    pub lap: LapStatistics,
}

pub fn pdf_path(layout: &Layout, rpm: f64) -> PathBuf {
    layout.pdf_dir().join(format!("htc_{rpm:.0}.csv"))
}

pub fn write_stationary_points<W: Write>(points: &[EngineState], w: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["n_engine", "m_air", "t_int", "T_i", "m_fuel"])?;
    for p in points {
        w.write_record(p.to_array().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Full-load points sorted by speed.
pub fn read_stationary_points<R: Read>(r: R) -> std::result::Result<Vec<EngineState>, String> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let cols = ["n_engine", "m_air", "t_int", "T_i", "m_fuel"];
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| header.iter().position(|h| h == *c).ok_or_else(|| format!("missing column `{c}`")))
        .collect::<std::result::Result<_, _>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let mut v = [0.0; 5];
        for (d, &i) in idx.iter().enumerate() {
            v[d] = rec
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("row {}: bad `{}`", row + 1, cols[d]))?;
        }
        let s = EngineState::from_array(v);
        s.check().map_err(|e| format!("row {}: {e}", row + 1))?;
        if !(s.n_engine > 0.0 && s.m_air > 0.0) {
            return Err(format!("row {}: full-load point needs positive speed and air mass", row + 1));
        }
        out.push(s);
    }
    out.sort_by(|a, b| a.n_engine.total_cmp(&b.n_engine));
    if let Some(w) = out.windows(2).find(|w| w[0].n_engine == w[1].n_engine) {
        return Err(format!("duplicate speed point {} rpm", w[0].n_engine));
    }
    Ok(out)
}

pub fn load_stationary_points(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<EngineState>> {
    let path = cfg.resolve(&cfg.stationary.points);
    let pts = read_stationary_points(open_file(stage, &path)?).map_err(|e| PipelineError::io(stage, &path, e))?;
    if pts.is_empty() {
        return Err(PipelineError::io(stage, &path, "no full-load points"));
    }
    Ok(pts)
}

fn check_speed_coverage(cfg: &PipelineConfig, speeds: &[f64]) -> Result<()> {
    if let Some(n) = cfg.stationary.expected_points {
        if speeds.len() != n {
            let gap = speeds
                .windows(2)
                .max_by(|a, b| (a[1] - a[0]).total_cmp(&(b[1] - b[0])))
                .map(|w| format!("; widest gap between {:.0} and {:.0} rpm", w[0], w[1]))
                .unwrap_or_default();
            return Err(PipelineError::validation(S, format!("expected {n} speed points, found {}{gap}", speeds.len())));
        }
    }
    for &n in speeds {
        for (kind, p) in [("fired", cfg.fired_trace(n)), ("motored", cfg.motored_trace(n))] {
            if !p.is_file() {
                return Err(PipelineError::validation(S, format!("no {kind} trace for the {n:.0} rpm speed point ({})", p.display())));
            }
        }
    }
    Ok(())
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::result::Result<(), String>,
{
    let mut w = create_file(S, path)?;
    f(&mut w).map_err(|e| PipelineError::io(S, path, e))?;
    w.flush().map_err(|e| PipelineError::io(S, path, e))
}

pub fn build_pdf(cfg: &PipelineConfig, layout: &Layout) -> Result<PdfArtifacts> {
    let points = load_stationary_points(cfg, S)?;
    let speeds: Vec<f64> = points.iter().map(|p| p.n_engine).collect();
    check_speed_coverage(cfg, &speeds)?;
    cfg.check_inputs(&speeds)?;
    create_dir(S, &layout.pdf_dir())?;

    let load_pair = |n: f64| -> Result<_> {
        let (fp, mp) = (cfg.fired_trace(n), cfg.motored_trace(n));
        let fired = read_pressure_trace(&fp).map_err(|e| PipelineError::io(S, &fp, e))?;
        let motored = read_pressure_trace(&mp).map_err(|e| PipelineError::io(S, &mp, e))?;
        if (fired.engine_speed() - n).abs() > 0.5 {
            return Err(PipelineError::io(S, &fp, format!("trace speed {} rpm, expected {n} rpm", fired.engine_speed())));
        }
        Ok((fired, motored))
    };

    let mut model = cfg.cycle_model(cfg.closure()?);
    if let (Some(target), Some(n)) = (cfg.closure.calibrate_to, cfg.closure.calibration_speed) {
        let p = points
            .iter()
            .find(|p| (p.n_engine - n).abs() < 0.5)
            .ok_or_else(|| PipelineError::validation(S, format!("calibration speed {n} rpm is not a speed point")))?;
        let (fired, motored) = load_pair(p.n_engine)?;
        model = model
            .calibrated(&fired, &motored, p.m_air, p.m_fuel, target)
            .map_err(|e| PipelineError::numerical(S, format!("calibration at {n} rpm: {e}")))?;
        log::info!("closure scale calibrated to {:.6e}", model.closure.scale);
    }

    let mut pdfs = Vec::with_capacity(points.len());
    for p in &points {
        let (fired, motored) = load_pair(p.n_engine)?;
        let results = model
            .analyze_trace(&fired, &motored, p.m_air, p.m_fuel)
            .map_err(|e| PipelineError::numerical(S, format!("{:.0} rpm: {e}", p.n_engine)))?;
        let pdf = build_htc_pdf(&results, &cfg.pdf).map_err(|e| PipelineError::numerical(S, format!("{:.0} rpm: {e}", p.n_engine)))?;
        write_with(&pdf_path(layout, p.n_engine), |w| pdf.write_csv(w).map_err(|e| e.to_string()))?;
        log::info!("{:.0} rpm: {} cycles, <alpha> = {:.1} W/m2K", p.n_engine, pdf.n_cycles(), pdf.mean_alpha());
        pdfs.push(pdf);
    }
    write_with(&layout.file("closure.toml"), |w| {
        let text = toml::to_string(&model.closure).map_err(|e| e.to_string())?;
        w.write_all(text.as_bytes()).map_err(|e| e.to_string())
    })?;

    let tpath = cfg.resolve(&cfg.telemetry.path);
    let series = load_telemetry(&tpath, &cfg.telemetry.columns).map_err(|e| PipelineError::io(S, &tpath, e))?;
    if !series.satisfies_low_pass() {
        log::warn!("telemetry sample period {} s exceeds the low-pass bound {} s", series.sample_period(), series.low_pass_bound());
    }
    let consistency = series.consistency_report(cfg.telemetry.coasting_torque);
    write_with(&layout.file("consistency.csv"), |w| consistency.write_csv(w).map_err(|e| e.to_string()))?;
    let states = build_state_histogram(&series, &cfg.state_grid).map_err(|e| PipelineError::validation(S, e))?;
    write_with(&layout.file("state_histogram.csv"), |w| states.write_csv(w).map_err(|e| e.to_string()))?;
    write_with(&layout.file("clamp_report.csv"), |w| states.clamp_report().write_csv(w).map_err(|e| e.to_string()))?;
    let pointer = build_pointer_matrix(&series, &cfg.state_grid, cfg.solver.dt, cfg.solver.horizon)
        .map_err(|e| PipelineError::validation(S, e))?;
    write_with(&layout.file("pointer_matrix.csv"), |w| pointer.write_csv(w).map_err(|e| e.to_string()))?;
    let lap = lap_statistics(&series, &cfg.telemetry.full_load, cfg.telemetry.coasting_torque, cfg.state_grid.dim(0))
        .map_err(|e| PipelineError::validation(S, e))?;
    write_with(&layout.file("lap_statistics.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        let res = (|| {
            c.write_record(["quantity", "value"])?;
            c.write_record(["full_load_fraction", &lap.full_load_fraction.to_string()])?;
            c.write_record(["coasting_fraction", &lap.coasting_fraction.to_string()])?;
            c.write_record(["part_load_fraction", &lap.part_load_fraction.to_string()])?;
            c.write_record(["samples", &series.len().to_string()])?;
            c.flush()
        })();
        res.map_err(|e| e.to_string())
    })?;
    log::info!(
        "lap: {:.3} full load, {:.3} coasting, {} occupied state bins",
        lap.full_load_fraction,
        lap.coasting_fraction,
        states.representatives().len()
    );
    Ok(PdfArtifacts { speeds, pdfs, closure: model.closure, states, pointer, lap })
}
