use std::collections::BTreeMap;
use std::io::Write;

use super::build_pdf::{load_stationary_points, pdf_path};
use super::{create_dir, create_file, open_file, Layout, NrefPolicy, PipelineConfig, PipelineError, Result, Stage};
use crate::coasting::coasting_cycle;
use crate::cycle_model::{read_pressure_trace, CycleModel, HtcClosure, HtcPdf};
use crate::expectation::{BinPdf, ExpectationError, SpeedBracket};
use crate::gas_exchange::GasExchangeModel;
use crate::part_load::{beta, interpolate_stationary, state_ratios, transform_htc_pdf, StateRatios};
use crate::state_space::{load_telemetry, BinIndex, EngineState, PointerMatrix, StateHistogram};
use crate::thermal_net::{write_series_binary, write_series_csv, BoundaryConditionSeries};
use crate::water_jacket::{reference_speed, scale_htc, ReferenceHtcField, WaterMeasurement};

const S: Stage = Stage::GenBc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneKind {
    Chamber,
    IntakePort,
    ExhaustPort,
    IntakeValve,
    ExhaustValve,
    /// Index into the reference HTC field.
    Water(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Zone {
    name: String,
    cylinder: usize,
    kind: ZoneKind,
}

/// Gas-side Newton pairs `(α, T_eff)` of one state bin, per cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct BinBoundary {
    pub coasting: bool,
    pub chamber: Vec<(f64, f64)>,
    pub intake_port: Vec<(f64, f64)>,
    pub exhaust_port: Vec<(f64, f64)>,
    pub intake_valve: Vec<(f64, f64)>,
    pub exhaust_valve: Vec<(f64, f64)>,
}

/// Loaded artifacts and models shared by all bins.
pub struct BcContext {
    pub cfg: PipelineConfig,
    pub model: CycleModel,
    pub gas: GasExchangeModel,
    pub points: Vec<EngineState>,
    pub pdfs: Vec<HtcPdf>,
    pub angles: Vec<f64>,
    pub field: ReferenceHtcField,
    pub water: WaterMeasurement,
}

impl BcContext {
    pub fn load(cfg: &PipelineConfig, layout: &Layout) -> Result<Self> {
        let points = load_stationary_points(cfg, S)?;
        let mut pdfs = Vec::with_capacity(points.len());
        for p in &points {
            let path = pdf_path(layout, p.n_engine);
            let pdf = HtcPdf::read_csv(open_file(S, &path)?).map_err(|e| PipelineError::io(S, &path, e))?;
            pdfs.push(pdf);
        }
        let cpath = layout.file("closure.toml");
        let text = std::fs::read_to_string(&cpath).map_err(|e| PipelineError::io(S, &cpath, e))?;
        let closure: HtcClosure = toml::from_str(&text).map_err(|e| PipelineError::io(S, &cpath, e))?;
        closure.validate().map_err(|e| PipelineError::io(S, &cpath, e))?;
        let mp = cfg.motored_trace(points[0].n_engine);
        let angles = read_pressure_trace(&mp).map_err(|e| PipelineError::io(S, &mp, e))?.crank_angle().to_vec();

        let rpath = cfg.resolve(&cfg.water.reference);
        let mut field = ReferenceHtcField::load(&rpath).map_err(|e| PipelineError::io(S, &rpath, e))?;
        if (field.m - cfg.water.m).abs() > 1e-12 {
            log::warn!("reference field exponent {} replaced by configured {}", field.m, cfg.water.m);
            field.m = cfg.water.m;
        }
        match cfg.water.n_ref {
            NrefPolicy::Field => {}
            NrefPolicy::Fixed { rpm } => field.n_ref = rpm,
            NrefPolicy::PowerMean => {
                let tpath = cfg.resolve(&cfg.telemetry.path);
                let series = load_telemetry(&tpath, &cfg.telemetry.columns).map_err(|e| PipelineError::io(S, &tpath, e))?;
                let speeds: Vec<f64> = series.states().iter().map(|s| s.n_engine).collect();
                field.n_ref = reference_speed(&speeds, &vec![1.0; speeds.len()], field.m).map_err(|e| PipelineError::validation(S, e))?;
                log::info!("water reference speed {:.1} rpm", field.n_ref);
            }
        }
        field.validate().map_err(|e| PipelineError::validation(S, e))?;
        let wpath = cfg.resolve(&cfg.water.measurement);
        let water = WaterMeasurement::load(&wpath)
            .and_then(|w| w.lag_corrected(cfg.water.tau_c))
            .map_err(|e| PipelineError::io(S, &wpath, e))?;
        Ok(Self {
            model: cfg.cycle_model(closure),
            gas: cfg.gas_exchange.model(&cfg.base_dir)?,
            cfg: cfg.clone(),
            points,
            pdfs,
            angles,
            field,
            water,
        })
    }

    fn zones(&self) -> Vec<Zone> {
        let mut z = Vec::new();
        for c in 0..self.cfg.engine.geometry.n_cylinders as usize {
            for (kind, stem) in [
                (ZoneKind::Chamber, "chamber"),
                (ZoneKind::IntakePort, "intake_port"),
                (ZoneKind::ExhaustPort, "exhaust_port"),
                (ZoneKind::IntakeValve, "intake_valve"),
                (ZoneKind::ExhaustValve, "exhaust_valve"),
            ] {
                z.push(Zone { name: format!("{stem}_c{}", c + 1), cylinder: c, kind });
            }
        }
        for (i, p) in self.field.patches.iter().enumerate() {
            z.push(Zone { name: p.id.clone(), cylinder: 0, kind: ZoneKind::Water(i) });
        }
        z
    }
}

/// Fired-state density: the bracketing stationary densities, each moved to
/// `state` by the `(β, r_T)` transform, mixed with the speed weights.
pub fn fired_bin_pdf(
    state: &EngineState,
    points: &[EngineState],
    pdfs: &[HtcPdf],
    cfg: &crate::part_load::PartLoadConfig,
    m: f64,
) -> Result<(BinPdf, StateRatios, SpeedBracket)> {
    let (stat, b) = interpolate_stationary(points, state.n_engine).map_err(|e| PipelineError::validation(S, e))?;
    let ratios = state_ratios(state, &stat, cfg).map_err(|e| PipelineError::validation(S, e))?;
    let left = transform_htc_pdf(&pdfs[b.left].hist, &ratios, m).map_err(|e| PipelineError::numerical(S, e))?;
    let pdf = if b.a == 0.0 {
        BinPdf::Mixture(vec![(1.0, left)])
    } else {
        let right = transform_htc_pdf(&pdfs[b.right].hist, &ratios, m).map_err(|e| PipelineError::numerical(S, e))?;
        BinPdf::Mixture(vec![(1.0 - b.a, left), (b.a, right)])
    };
    Ok((pdf, ratios, b))
}

fn open_duty(lift: &crate::gas_exchange::ValveLift) -> f64 {
    let w = lift.open_window();
    match (w.first(), w.last()) {
        (Some(a), Some(b)) => ((b.0 - a.0) / 720.0).clamp(0.0, 1.0),
        _ => 0.0,
    }
}

/// Newton pairs of every gas-side zone at the representative state of a bin.
pub fn bin_boundary(ctx: &BcContext, rep: &EngineState) -> Result<BinBoundary> {
    let cfg = &ctx.cfg;
    let n_cyl = cfg.engine.geometry.n_cylinders as usize;
    let coasting = rep.is_coasting(cfg.telemetry.coasting_torque);
    let mut out = BinBoundary {
        coasting,
        chamber: Vec::with_capacity(n_cyl),
        intake_port: Vec::new(),
        exhaust_port: Vec::new(),
        intake_valve: Vec::new(),
        exhaust_valve: Vec::new(),
    };
    let gx = &ctx.gas;
    let (duty_i, duty_e) = (open_duty(&gx.intake_lift), open_duty(&gx.exhaust_lift));
    let coast_pair = if coasting {
        let s = EngineState { torque: 0.0, m_fuel: 0.0, ..*rep };
        let r = coasting_cycle(&s, &ctx.model, &cfg.coasting, &ctx.angles).map_err(|e| PipelineError::numerical(S, e))?;
        Some((r.alpha_mean, r.t_eff))
    } else {
        None
    };
    for c in 0..n_cyl {
        let (chamber, t_exh, m_fuel) = match coast_pair {
            Some(pair) => (pair, rep.t_int, 0.0),
            None => {
                let cur = EngineState { m_fuel: rep.m_fuel * (1.0 + cfg.fuel_offset(c)), ..*rep };
                let (pdf, ratios, _) = fired_bin_pdf(&cur, &ctx.points, &ctx.pdfs, &cfg.part_load, ctx.model.closure.exponent)?;
                let pair = pdf.newton_pair().map_err(|e| PipelineError::numerical(S, e))?;
                debug_assert!(beta(&ratios, ctx.model.closure.exponent) > 0.0);
                (pair, cfg.gas_exchange.exhaust_temperature * ratios.r_t, cur.m_fuel)
            }
        };
        out.chamber.push(chamber);
        let g = if rep.m_air > 0.0 && rep.n_engine > 0.0 {
            gx.evaluate(rep.n_engine, rep.m_air, rep.m_air + m_fuel, rep.t_int, t_exh)
                .map_err(|e| PipelineError::numerical(S, e))?
        } else {
            crate::gas_exchange::GasExchangeHtc { intake_valve: 0.0, exhaust_valve: 0.0, intake_port: 0.0, exhaust_port: 0.0 }
        };
        out.intake_port.push((g.intake_port * duty_i, rep.t_int));
        out.intake_valve.push((g.intake_valve * duty_i, rep.t_int));
        out.exhaust_port.push((g.exhaust_port * duty_e, t_exh));
        out.exhaust_valve.push((g.exhaust_valve * duty_e, t_exh));
    }
    Ok(out)
}

/// Series of every zone on the pointer-matrix time grid.
pub fn boundary_series(ctx: &BcContext, states: &StateHistogram, pointer: &PointerMatrix) -> Result<Vec<BoundaryConditionSeries>> {
    let zones = ctx.zones();
    let steps = pointer.len();
    let mut alpha = vec![Vec::with_capacity(steps); zones.len()];
    let mut temp = vec![Vec::with_capacity(steps); zones.len()];
    let mut cache: BTreeMap<BinIndex, BinBoundary> = BTreeMap::new();
    let times: Vec<f64> = (0..steps).map(|k| pointer.time(k)).collect();
    for (k, bin) in pointer.rows().iter().enumerate() {
        let t = times[k];
        let rep = states.representative(bin).ok_or_else(|| {
            let e = ExpectationError::UnreachableState { bin: bin.to_string() };
            PipelineError::validation(S, format!("t = {t} s: {e}"))
        })?;
        if !cache.contains_key(bin) {
            let b = bin_boundary(ctx, rep).map_err(|e| PipelineError { message: format!("t = {t} s, bin {bin}: {}", e.message), ..e })?;
            cache.insert(*bin, b);
        }
        let b = &cache[bin];
        let w = ctx.water.at(t);
        let t_water = 0.5 * (w.t_in + w.t_out) + ctx.cfg.water.inlet_offset;
        let water_alpha = scale_htc(&ctx.field, rep.n_engine);
        for (z, zone) in zones.iter().enumerate() {
            let c = zone.cylinder;
            let (a, te) = match zone.kind {
                ZoneKind::Chamber => b.chamber[c],
                ZoneKind::IntakePort => b.intake_port[c],
                ZoneKind::ExhaustPort => b.exhaust_port[c],
                ZoneKind::IntakeValve => b.intake_valve[c],
                ZoneKind::ExhaustValve => b.exhaust_valve[c],
                ZoneKind::Water(i) => (water_alpha[i], t_water),
            };
            alpha[z].push(a);
            temp[z].push(te);
        }
    }
    log::info!("{} distinct state bins evaluated over {steps} steps", cache.len());
    zones
        .into_iter()
        .zip(alpha.into_iter().zip(temp))
        .map(|(z, (a, te))| {
            BoundaryConditionSeries::new(z.name.clone(), times.clone(), a, te)
                .map_err(|e| PipelineError::numerical(S, format!("zone {}: {e}", z.name)))
        })
        .collect()
}

pub fn gen_bc(cfg: &PipelineConfig, layout: &Layout) -> Result<Vec<BoundaryConditionSeries>> {
    let ctx = BcContext::load(cfg, layout)?;
    let hpath = layout.file("state_histogram.csv");
    let states = StateHistogram::read_csv(&cfg.state_grid, open_file(S, &hpath)?).map_err(|e| PipelineError::io(S, &hpath, e))?;
    let ppath = layout.file("pointer_matrix.csv");
    let pointer = PointerMatrix::read_csv(&cfg.state_grid, open_file(S, &ppath)?).map_err(|e| PipelineError::io(S, &ppath, e))?;
    if (pointer.dt() - cfg.solver.dt).abs() > 1e-12 * cfg.solver.dt {
        return Err(PipelineError::validation(S, format!("pointer matrix step {} s differs from solver.dt {} s", pointer.dt(), cfg.solver.dt)));
    }
    let series = boundary_series(&ctx, &states, &pointer)?;
    let dir = layout.bc_dir();
    create_dir(S, &dir)?;
    for s in &series {
        let path = dir.join(format!("{}.csv", s.zone()));
        let mut w = create_file(S, &path)?;
        write_series_csv(s, &mut w).map_err(|e| PipelineError::io(S, &path, e))?;
        w.flush().map_err(|e| PipelineError::io(S, &path, e))?;
        if cfg.solver.binary_series {
            let path = dir.join(format!("{}.bcs", s.zone()));
            let w = create_file(S, &path)?;
            write_series_binary(s, w).map_err(|e| PipelineError::io(S, &path, e))?;
        }
    }
    Ok(series)
}
