//! Engine state telemetry: ingestion, discretization onto the five-dimensional
//! binning grid, normed state histograms and the pointer matrix that maps
//! simulation time steps to state bins.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::histogram::{BinEdges, Histogram, HistogramError};

pub const DIMS: usize = 5;
pub const DIM_NAMES: [&str; DIMS] = ["n_engine", "m_air", "t_int", "T_i", "m_fuel"];

#[derive(Debug, Error)]
pub enum StateSpaceError {
    #[error("telemetry column `{column}` missing from header")]
    MissingColumn { column: String },
    #[error("timestamps not strictly increasing at row {row} (t = {t})")]
    NonMonotoneTime { row: usize, t: f64 },
    #[error("non-finite value in row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("cannot parse row {row}, column `{column}`: `{raw}`")]
    Parse { row: usize, column: String, raw: String },
    #[error("invalid engine state in row {row}: {reason}")]
    InvalidState { row: usize, reason: String },
    #[error("telemetry series is empty")]
    EmptySeries,
    #[error("timestamps and states differ in length ({times} vs {states})")]
    LengthMismatch { times: usize, states: usize },
    #[error("simulation horizon {requested} s exceeds telemetry span {available} s")]
    HorizonExceeded { requested: f64, available: f64 },
    #[error("simulation time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("pointer matrix row {row} has index {index} outside dimension {dim} ({bins} bins)")]
    PointerOutOfRange { row: usize, dim: usize, index: usize, bins: usize },
    #[error("malformed artifact: {0}")]
    Malformed(String),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outer boundary condition of the engine at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    /// Engine speed \[rpm\].
    pub n_engine: f64,
    /// Air mass per stroke \[mg/stroke\].
    pub m_air: f64,
    /// Inlet air temperature \[K\].
    pub t_int: f64,
    /// Indicated torque \[Nm\].
    pub torque: f64,
    /// Fuel mass per stroke \[mg/stroke\].
    pub m_fuel: f64,
}

impl EngineState {
    pub fn new(n_engine: f64, m_air: f64, t_int: f64, torque: f64, m_fuel: f64) -> Self {
        Self { n_engine, m_air, t_int, torque, m_fuel }
    }

    pub fn to_array(&self) -> [f64; DIMS] {
        [self.n_engine, self.m_air, self.t_int, self.torque, self.m_fuel]
    }

    pub fn from_array(v: [f64; DIMS]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    /// Hard validity: finite entries and non-negative speed and masses.
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in DIM_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if self.n_engine < 0.0 {
            return Err(format!("negative engine speed {}", self.n_engine));
        }
        if self.m_air < 0.0 {
            return Err(format!("negative air mass {}", self.m_air));
        }
        if self.m_fuel < 0.0 {
            return Err(format!("negative fuel mass {}", self.m_fuel));
        }
        Ok(())
    }

    /// A state with torque but no fuel is physically impossible.
    pub fn torque_without_fuel(&self, coasting_torque: f64) -> bool {
        self.m_fuel == 0.0 && self.torque > coasting_torque
    }

    pub fn is_coasting(&self, coasting_torque: f64) -> bool {
        self.torque <= coasting_torque
    }
}

/// Five bin indices, one per state dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BinIndex(pub [usize; DIMS]);

impl fmt::Display for BinIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.0;
        write!(f, "[{},{},{},{},{}]", i[0], i[1], i[2], i[3], i[4])
    }
}

/// Per-dimension bin edges of the engine state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgesGrid {
    pub n_engine: BinEdges,
    pub m_air: BinEdges,
    pub t_int: BinEdges,
    #[serde(rename = "T_i")]
    pub torque: BinEdges,
    pub m_fuel: BinEdges,
}

impl EdgesGrid {
    pub fn new(dims: [BinEdges; DIMS]) -> Self {
        let [n_engine, m_air, t_int, torque, m_fuel] = dims;
        Self { n_engine, m_air, t_int, torque, m_fuel }
    }

    pub fn dim(&self, d: usize) -> &BinEdges {
        match d {
            0 => &self.n_engine,
            1 => &self.m_air,
            2 => &self.t_int,
            3 => &self.torque,
            4 => &self.m_fuel,
            _ => panic!("state dimension {d} out of range"),
        }
    }

    pub fn axes(&self) -> Vec<BinEdges> {
        (0..DIMS).map(|d| self.dim(d).clone()).collect()
    }

    pub fn shape(&self) -> [usize; DIMS] {
        std::array::from_fn(|d| self.dim(d).bins())
    }

    pub fn bin_volume(&self, idx: &BinIndex) -> f64 {
        (0..DIMS).map(|d| self.dim(d).width(idx.0[d])).product()
    }

    pub fn bin_center(&self, idx: &BinIndex) -> EngineState {
        EngineState::from_array(std::array::from_fn(|d| self.dim(d).center(idx.0[d])))
    }

    pub fn contains_index(&self, idx: &BinIndex) -> Option<usize> {
        (0..DIMS).find(|&d| idx.0[d] >= self.dim(d).bins())
    }

    pub fn flat(&self, idx: &BinIndex) -> usize {
        (0..DIMS).fold(0, |acc, d| acc * self.dim(d).bins() + idx.0[d])
    }

    pub fn unflat(&self, mut flat: usize) -> BinIndex {
        let mut out = [0; DIMS];
        for d in (0..DIMS).rev() {
            let b = self.dim(d).bins();
            out[d] = flat % b;
            flat /= b;
        }
        BinIndex(out)
    }
}

/// Bin indices of a state with per-dimension clamp flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discretized {
    pub index: BinIndex,
    pub clamped: [bool; DIMS],
}

impl Discretized {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

pub fn discretize_state(state: &EngineState, grid: &EdgesGrid) -> Discretized {
    let v = state.to_array();
    let mut index = [0; DIMS];
    let mut clamped = [false; DIMS];
    for d in 0..DIMS {
        let loc = grid.dim(d).locate(v[d]);
        index[d] = loc.index;
        clamped[d] = loc.clamped;
    }
    Discretized { index: BinIndex(index), clamped }
}

/// Projects a state into the grid's bounding box.
pub fn clamp_state(state: &EngineState, grid: &EdgesGrid) -> EngineState {
    let v = state.to_array();
    EngineState::from_array(std::array::from_fn(|d| {
        v[d].clamp(grid.dim(d).lower(), grid.dim(d).upper())
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySeries {
    timestamps: Vec<f64>,
    states: Vec<EngineState>,
    sample_period: f64,
}

impl TelemetrySeries {
    pub fn new(timestamps: Vec<f64>, states: Vec<EngineState>) -> Result<Self, StateSpaceError> {
        if timestamps.len() != states.len() {
            return Err(StateSpaceError::LengthMismatch {
                times: timestamps.len(),
                states: states.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(StateSpaceError::EmptySeries);
        }
        for (i, t) in timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(StateSpaceError::NonFiniteValue { row: i + 1, column: "t".into() });
            }
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(StateSpaceError::NonMonotoneTime { row: i + 2, t: w[1] });
            }
        }
        for (i, s) in states.iter().enumerate() {
            s.check()
                .map_err(|reason| StateSpaceError::InvalidState { row: i + 1, reason })?;
        }
        let n = timestamps.len();
        let sample_period = if n > 1 {
            (timestamps[n - 1] - timestamps[0]) / (n - 1) as f64
        } else {
            0.0
        };
        Ok(Self { timestamps, states, sample_period })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn states(&self) -> &[EngineState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Mean sample spacing \[s\].
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn span(&self) -> f64 {
        self.timestamps[self.len() - 1] - self.timestamps[0]
    }

    /// Largest sample spacing that still resolves one four-stroke cycle at the
    /// highest recorded speed: 2·60/n_max.
    pub fn low_pass_bound(&self) -> f64 {
        let n_max = self.states.iter().map(|s| s.n_engine).fold(0.0, f64::max);
        if n_max > 0.0 {
            120.0 / n_max
        } else {
            f64::INFINITY
        }
    }

    pub fn satisfies_low_pass(&self) -> bool {
        self.sample_period <= self.low_pass_bound() * (1.0 + 1e-9)
    }

    /// Rows that pass the hard checks but are physically inconsistent.
    pub fn consistency_report(&self, coasting_torque: f64) -> ConsistencyReport {
        let mut issues = Vec::new();
        for (i, (t, s)) in self.timestamps.iter().zip(&self.states).enumerate() {
            if s.torque_without_fuel(coasting_torque) {
                issues.push(ConsistencyIssue {
                    row: i + 1,
                    t: *t,
                    kind: IssueKind::TorqueWithoutFuel,
                    detail: format!("T_i={} with m_fuel=0", s.torque),
                });
            }
        }
        if !self.satisfies_low_pass() {
            issues.push(ConsistencyIssue {
                row: 0,
                t: self.timestamps[0],
                kind: IssueKind::SampleRateBelowCycleRate,
                detail: format!(
                    "sample period {} s exceeds 2*60/n_max = {} s",
                    self.sample_period,
                    self.low_pass_bound()
                ),
            });
        }
        ConsistencyReport { issues }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    TorqueWithoutFuel,
    SampleRateBelowCycleRate,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IssueKind::TorqueWithoutFuel => "torque_without_fuel",
            IssueKind::SampleRateBelowCycleRate => "sample_rate_below_cycle_rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyIssue {
    /// 1-based data row; 0 for series-level issues.
    pub row: usize,
    pub t: f64,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsistencyReport {
    pub issues: Vec<ConsistencyIssue>,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StateSpaceError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "t_s", "issue", "detail"])?;
        for i in &self.issues {
            wtr.write_record([
                i.row.to_string(),
                i.t.to_string(),
                i.kind.to_string(),
                i.detail.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Header name and multiplicative unit conversion of one telemetry column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ColumnSpec {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), scale: 1.0 }
    }
}

/// Maps logical telemetry channels onto file columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub t: ColumnSpec,
    pub n_engine: ColumnSpec,
    pub m_air: ColumnSpec,
    pub t_int: ColumnSpec,
    #[serde(rename = "T_i")]
    pub torque: ColumnSpec,
    pub m_fuel: ColumnSpec,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            t: ColumnSpec::named("t"),
            n_engine: ColumnSpec::named("n_engine"),
            m_air: ColumnSpec::named("m_air"),
            t_int: ColumnSpec::named("t_int"),
            torque: ColumnSpec::named("T_i"),
            m_fuel: ColumnSpec::named("m_fuel"),
        }
    }
}

impl ColumnMap {
    fn specs(&self) -> [&ColumnSpec; 6] {
        [&self.t, &self.n_engine, &self.m_air, &self.t_int, &self.torque, &self.m_fuel]
    }
}

pub fn load_telemetry(path: &Path, schema: &ColumnMap) -> Result<TelemetrySeries, StateSpaceError> {
    read_telemetry(std::fs::File::open(path)?, schema)
}

pub fn read_telemetry<R: Read>(rdr: R, schema: &ColumnMap) -> Result<TelemetrySeries, StateSpaceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(rdr);
    let headers = rdr.headers()?.clone();
    let specs = schema.specs();
    let mut cols = [0usize; 6];
    for (slot, spec) in cols.iter_mut().zip(specs) {
        *slot = headers
            .iter()
            .position(|h| h == spec.name)
            .ok_or_else(|| StateSpaceError::MissingColumn { column: spec.name.clone() })?;
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let mut v = [0.0; 6];
        for (k, spec) in specs.iter().enumerate() {
            let raw = rec.get(cols[k]).unwrap_or("");
            let x: f64 = raw.parse().map_err(|_| StateSpaceError::Parse {
                row,
                column: spec.name.clone(),
                raw: raw.to_string(),
            })?;
            if !x.is_finite() {
                return Err(StateSpaceError::NonFiniteValue { row, column: spec.name.clone() });
            }
            v[k] = x * spec.scale;
        }
        if let Some(&last) = times.last() {
            if v[0] <= last {
                return Err(StateSpaceError::NonMonotoneTime { row, t: v[0] });
            }
        }
        times.push(v[0]);
        states.push(EngineState::new(v[1], v[2], v[3], v[4], v[5]));
    }
    TelemetrySeries::new(times, states)
}

pub fn write_telemetry<W: Write>(series: &TelemetrySeries, w: W) -> Result<(), StateSpaceError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "n_engine", "m_air", "t_int", "T_i", "m_fuel"])?;
    for (t, s) in series.timestamps.iter().zip(&series.states) {
        wtr.write_record([
            t.to_string(),
            s.n_engine.to_string(),
            s.m_air.to_string(),
            s.t_int.to_string(),
            s.torque.to_string(),
            s.m_fuel.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One clamped coordinate of one telemetry sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampEvent {
    pub row: usize,
    pub t: f64,
    pub dim: usize,
    pub value: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClampReport {
    pub events: Vec<ClampEvent>,
}

impl ClampReport {
    pub fn per_dimension(&self) -> [usize; DIMS] {
        let mut out = [0; DIMS];
        for e in &self.events {
            out[e.dim] += 1;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StateSpaceError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "t_s", "dimension", "value", "bin"])?;
        for e in &self.events {
            wtr.write_record([
                e.row.to_string(),
                e.t.to_string(),
                DIM_NAMES[e.dim].to_string(),
                e.value.to_string(),
                e.bin.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Normed histogram of the engine state over a lap, plus one representative
/// state per occupied bin (the mean of the samples that fell into it).
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistogram {
    grid: EdgesGrid,
    inner: Histogram,
    representatives: BTreeMap<BinIndex, EngineState>,
    clamps: ClampReport,
}

impl StateHistogram {
    pub fn grid(&self) -> &EdgesGrid {
        &self.grid
    }

    pub fn histogram(&self) -> &Histogram {
        &self.inner
    }

    pub fn count(&self, idx: &BinIndex) -> u64 {
        self.inner.counts()[self.grid.flat(idx)]
    }

    pub fn density(&self, idx: &BinIndex) -> f64 {
        self.inner.density()[self.grid.flat(idx)]
    }

    pub fn total(&self) -> u64 {
        self.inner.total()
    }

    pub fn occupied(&self) -> impl Iterator<Item = BinIndex> + '_ {
        self.inner.occupied().map(|f| self.grid.unflat(f))
    }

    pub fn representative(&self, idx: &BinIndex) -> Option<&EngineState> {
        self.representatives.get(idx)
    }

    pub fn representatives(&self) -> &BTreeMap<BinIndex, EngineState> {
        &self.representatives
    }

    pub fn clamp_report(&self) -> &ClampReport {
        &self.clamps
    }

    /// Σ density · bin volume over occupied bins.
    pub fn integral(&self) -> f64 {
        self.inner.integral()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StateSpaceError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "i_n_engine", "i_m_air", "i_t_int", "i_T_i", "i_m_fuel", "count", "density",
            "rep_n_engine", "rep_m_air", "rep_t_int", "rep_T_i", "rep_m_fuel",
        ])?;
        for idx in self.occupied() {
            let rep = self.representatives[&idx];
            let mut rec: Vec<String> = idx.0.iter().map(|i| i.to_string()).collect();
            rec.push(self.count(&idx).to_string());
            rec.push(self.density(&idx).to_string());
            rec.extend(rep.to_array().iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reloads a histogram written by [`StateHistogram::write_csv`] and
    /// re-checks normalization against the grid.
    pub fn read_csv<R: Read>(grid: &EdgesGrid, rdr: R) -> Result<Self, StateSpaceError> {
        let mut rdr = csv::Reader::from_reader(rdr);
        let size: usize = grid.shape().iter().product();
        let mut counts = vec![0u64; size];
        let mut representatives = BTreeMap::new();
        let mut stored_density = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| -> Result<&str, StateSpaceError> {
                rec.get(k).ok_or_else(|| StateSpaceError::Malformed("short histogram row".into()))
            };
            let mut idx = [0usize; DIMS];
            for (d, slot) in idx.iter_mut().enumerate() {
                *slot = field(d)?
                    .parse()
                    .map_err(|_| StateSpaceError::Malformed("bad bin index".into()))?;
            }
            let idx = BinIndex(idx);
            if let Some(dim) = grid.contains_index(&idx) {
                return Err(StateSpaceError::Malformed(format!(
                    "bin {idx} outside grid in dimension {}",
                    DIM_NAMES[dim]
                )));
            }
            let count: u64 = field(5)?
                .parse()
                .map_err(|_| StateSpaceError::Malformed("bad count".into()))?;
            let density: f64 = field(6)?
                .parse()
                .map_err(|_| StateSpaceError::Malformed("bad density".into()))?;
            let mut rep = [0.0; DIMS];
            for (d, slot) in rep.iter_mut().enumerate() {
                *slot = field(7 + d)?
                    .parse()
                    .map_err(|_| StateSpaceError::Malformed("bad representative".into()))?;
            }
            counts[grid.flat(&idx)] = count;
            stored_density.push((idx, density));
            representatives.insert(idx, EngineState::from_array(rep));
        }
        let inner = Histogram::from_counts(grid.axes(), counts)?;
        let hist = Self { grid: grid.clone(), inner, representatives, clamps: ClampReport::default() };
        for (idx, d) in stored_density {
            let fresh = hist.density(&idx);
            if (fresh - d).abs() > 1e-12 * fresh.abs().max(f64::MIN_POSITIVE) {
                return Err(StateSpaceError::Malformed(format!(
                    "density at {idx} is {d}, counts imply {fresh}"
                )));
            }
        }
        if (hist.integral() - 1.0).abs() > 1e-12 {
            return Err(StateSpaceError::Malformed("histogram does not integrate to one".into()));
        }
        Ok(hist)
    }
}

/// Mean computed as `x0 + Σ(xi − x0)/n`, which returns `x0` bit-exactly when
/// all samples are identical.
fn shifted_mean(values: &[f64]) -> f64 {
    let x0 = values[0];
    let sum: f64 = values.iter().map(|v| v - x0).sum();
    x0 + sum / values.len() as f64
}

pub fn build_state_histogram(
    series: &TelemetrySeries,
    grid: &EdgesGrid,
) -> Result<StateHistogram, StateSpaceError> {
    if series.is_empty() {
        return Err(StateSpaceError::EmptySeries);
    }
    let size: usize = grid.shape().iter().product();
    let mut counts = vec![0u64; size];
    let mut members: BTreeMap<BinIndex, Vec<[f64; DIMS]>> = BTreeMap::new();
    let mut clamps = ClampReport::default();
    for (row, (t, s)) in series.timestamps().iter().zip(series.states()).enumerate() {
        let d = discretize_state(s, grid);
        let v = s.to_array();
        for dim in 0..DIMS {
            if d.clamped[dim] {
                clamps.events.push(ClampEvent {
                    row: row + 1,
                    t: *t,
                    dim,
                    value: v[dim],
                    bin: d.index.0[dim],
                });
            }
        }
        counts[grid.flat(&d.index)] += 1;
        members.entry(d.index).or_default().push(v);
    }
    if !clamps.events.is_empty() {
        log::warn!("{} telemetry coordinates clamped into boundary bins", clamps.events.len());
    }
    let inner = Histogram::from_counts(grid.axes(), counts)?;
    let representatives = members
        .into_iter()
        .map(|(idx, vals)| {
            let rep = std::array::from_fn(|d| {
                let col: Vec<f64> = vals.iter().map(|v| v[d]).collect();
                shifted_mean(&col)
            });
            (idx, EngineState::from_array(rep))
        })
        .collect();
    Ok(StateHistogram { grid: grid.clone(), inner, representatives, clamps })
}

/// Per-time-step bin indices for the transient simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerMatrix {
    dt: f64,
    t0: f64,
    rows: Vec<BinIndex>,
}

impl PointerMatrix {
    pub fn new(t0: f64, dt: f64, rows: Vec<BinIndex>, grid: &EdgesGrid) -> Result<Self, StateSpaceError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StateSpaceError::InvalidStep(dt));
        }
        for (r, idx) in rows.iter().enumerate() {
            if let Some(dim) = grid.contains_index(idx) {
                return Err(StateSpaceError::PointerOutOfRange {
                    row: r,
                    dim,
                    index: idx.0[dim],
                    bins: grid.dim(dim).bins(),
                });
            }
        }
        Ok(Self { dt, t0, rows })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn rows(&self) -> &[BinIndex] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn time(&self, row: usize) -> f64 {
        self.t0 + row as f64 * self.dt
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), StateSpaceError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "row", "t_s", "i_n_engine", "i_m_air", "i_t_int", "i_T_i", "i_m_fuel",
        ])?;
        for (r, idx) in self.rows.iter().enumerate() {
            let mut rec = vec![r.to_string(), self.time(r).to_string()];
            rec.extend(idx.0.iter().map(|i| i.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(grid: &EdgesGrid, rdr: R) -> Result<Self, StateSpaceError> {
        let mut rdr = csv::Reader::from_reader(rdr);
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || StateSpaceError::Malformed("bad pointer matrix row".into());
            let t: f64 = rec.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let mut idx = [0usize; DIMS];
            for (d, slot) in idx.iter_mut().enumerate() {
                *slot = rec.get(2 + d).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            }
            times.push(t);
            rows.push(BinIndex(idx));
        }
        if times.len() < 2 {
            return Err(StateSpaceError::Malformed("pointer matrix needs two rows".into()));
        }
        let dt = times[1] - times[0];
        Self::new(times[0], dt, rows, grid)
    }
}

/// Zero-order-hold sampling of the telemetry at `t0 + i·dt_sim`, covering
/// `horizon` seconds (the full telemetry span when `None`).
pub fn build_pointer_matrix(
    series: &TelemetrySeries,
    grid: &EdgesGrid,
    dt_sim: f64,
    horizon: Option<f64>,
) -> Result<PointerMatrix, StateSpaceError> {
    if !(dt_sim > 0.0 && dt_sim.is_finite()) {
        return Err(StateSpaceError::InvalidStep(dt_sim));
    }
    let span = series.span();
    let horizon = horizon.unwrap_or(span);
    // tolerate round-off when the horizon is a multiple of the step
    let tol = 1e-9 * dt_sim;
    if horizon > span + tol {
        return Err(StateSpaceError::HorizonExceeded { requested: horizon, available: span });
    }
    let steps = ((horizon + tol) / dt_sim).floor() as usize;
    let t0 = series.timestamps()[0];
    let ts = series.timestamps();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut j = 0usize;
    for i in 0..=steps {
        let t = t0 + i as f64 * dt_sim;
        while j + 1 < ts.len() && ts[j + 1] <= t + tol {
            j += 1;
        }
        rows.push(discretize_state(&series.states()[j], grid).index);
    }
    PointerMatrix::new(t0, dt_sim, rows, grid)
}

/// Criterion separating full-load samples from part load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FullLoadThreshold {
    /// Full load when `T_i ≥ min_torque`.
    Torque { min_torque: f64 },
    /// Full load when `T_i ≥ fraction · T_line(n_engine)` with the line
    /// linearly interpolated over `(rpm, Nm)` points.
    LineFraction { line: Vec<[f64; 2]>, fraction: f64 },
}

impl FullLoadThreshold {
    pub fn torque_limit(&self, n_engine: f64) -> f64 {
        match self {
            FullLoadThreshold::Torque { min_torque } => *min_torque,
            FullLoadThreshold::LineFraction { line, fraction } => {
                fraction * crate::numerics::linear_clamped(line, n_engine)
            }
        }
    }

    pub fn is_full_load(&self, s: &EngineState) -> bool {
        s.torque >= self.torque_limit(s.n_engine)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapStatistics {
    pub full_load_fraction: f64,
    pub coasting_fraction: f64,
    pub part_load_fraction: f64,
    /// Sample counts per speed bin.
    pub speed_histogram: Vec<u64>,
    pub speed_edges: BinEdges,
}

pub fn lap_statistics(
    series: &TelemetrySeries,
    threshold: &FullLoadThreshold,
    coasting_torque: f64,
    speed_edges: &BinEdges,
) -> Result<LapStatistics, StateSpaceError> {
    if series.is_empty() {
        return Err(StateSpaceError::EmptySeries);
    }
    let mut full = 0usize;
    let mut coast = 0usize;
    let mut speed = vec![0u64; speed_edges.bins()];
    for s in series.states() {
        if s.is_coasting(coasting_torque) {
            coast += 1;
        } else if threshold.is_full_load(s) {
            full += 1;
        }
        speed[speed_edges.locate(s.n_engine).index] += 1;
    }
    let n = series.len() as f64;
    Ok(LapStatistics {
        full_load_fraction: full as f64 / n,
        coasting_fraction: coast as f64 / n,
        part_load_fraction: (series.len() - full - coast) as f64 / n,
        speed_histogram: speed,
        speed_edges: speed_edges.clone(),
    })
}
