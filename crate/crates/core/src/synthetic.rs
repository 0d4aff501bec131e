//! Seeded generators for stationary pressure traces, full-load lines and
//! race-lap telemetry.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coasting::CoastingConfig;
use crate::cycle_model::{CycleError, CylinderGeometry, PressureTrace};
use crate::part_load::interpolate_stationary;
use crate::state_space::{EngineState, StateSpaceError, TelemetrySeries};
use crate::water_jacket::WaterRecord;

/// Vibe burn law, renormalized to reach exactly one at the end of
/// combustion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WiebeParams {
    pub start_deg: f64,
    pub duration_deg: f64,
    pub a: f64,
    pub m: f64,
}

impl Default for WiebeParams {
    fn default() -> Self {
        Self { start_deg: -20.0, duration_deg: 55.0, a: 6.908, m: 2.0 }
    }
}

impl WiebeParams {
    pub fn fraction(&self, deg: f64) -> f64 {
        let s = (deg - self.start_deg) / self.duration_deg;
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            (1.0 - (-self.a * s.powf(self.m + 1.0)).exp()) / (1.0 - (-self.a).exp())
        }
    }

    /// `dx/dθ` \[1/deg\].
    pub fn rate(&self, deg: f64) -> f64 {
        let s = (deg - self.start_deg) / self.duration_deg;
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let e = (-self.a * s.powf(self.m + 1.0)).exp();
        self.a * (self.m + 1.0) * s.powf(self.m) * e / (self.duration_deg * (1.0 - (-self.a).exp()))
    }
}

/// One closed cycle integrated from `dp/dθ = −κ p V'/V + (κ−1) Q'/V` by RK4
/// between the two BDCs around firing TDC; the open strokes sit at `p_ini`.
/// Returns the pressure and the imposed burn fraction on `angles`.
pub fn wiebe_cycle(
    geom: &CylinderGeometry,
    angles: &[f64],
    p_ini: f64,
    kappa: f64,
    heat_release: f64,
    wiebe: &WiebeParams,
) -> (Vec<f64>, Vec<f64>) {
    const SUB: usize = 8;
    let n = angles.len();
    let lo = angles.partition_point(|&a| a < -180.0).min(n - 1);
    let hi = angles.partition_point(|&a| a <= 180.0).saturating_sub(1).max(lo);
    let mut p = vec![p_ini; n];
    let x: Vec<f64> = angles.iter().map(|&a| wiebe.fraction(a)).collect();
    let dv = |deg: f64| {
        let h = 1e-4;
        (geom.volume(deg + h) - geom.volume(deg - h)) / (2.0 * h)
    };
    let f = |deg: f64, pr: f64| {
        let v = geom.volume(deg);
        -kappa * pr * dv(deg) / v + (kappa - 1.0) * heat_release * wiebe.rate(deg) / v
    };
    p[lo] = p_ini * (geom.max_volume() / geom.volume(angles[lo])).powf(kappa);
    for i in lo..hi {
        let h = (angles[i + 1] - angles[i]) / SUB as f64;
        let mut y = p[i];
        for s in 0..SUB {
            let t = angles[i] + s as f64 * h;
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = f(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        p[i + 1] = y;
    }
    (p, x)
}

/// Per-speed stationary measurement generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceGenSpec {
    pub n_cycles: usize,
    pub resolution_deg: f64,
    pub kappa: f64,
    /// Lower heating value \[J/kg\].
    pub lhv: f64,
    /// Share of the fuel energy released as gas heat.
    pub release_efficiency: f64,
    pub wiebe: WiebeParams,
    /// Standard deviation of the combustion start \[deg\].
    pub start_jitter: f64,
    /// Relative standard deviation of the released heat.
    pub release_jitter: f64,
}

impl Default for TraceGenSpec {
    fn default() -> Self {
        Self {
            n_cycles: 30,
            resolution_deg: 1.0,
            kappa: 1.33,
            lhv: 43.0e6,
            release_efficiency: 0.8,
            wiebe: WiebeParams::default(),
            start_jitter: 1.5,
            release_jitter: 0.04,
        }
    }
}

impl TraceGenSpec {
    pub fn angles(&self) -> Vec<f64> {
        let n = (720.0 / self.resolution_deg).round() as usize;
        (0..n).map(|i| -360.0 + i as f64 * self.resolution_deg).collect()
    }
}

/// Fired ensemble and single motored cycle at one stationary state.
pub fn stationary_traces(
    geom: &CylinderGeometry,
    state: &EngineState,
    spec: &TraceGenSpec,
    earliest_start_deg: f64,
    seed: u64,
) -> Result<(PressureTrace, PressureTrace), CycleError> {
    let angles = spec.angles();
    let p_ini = CoastingConfig::default().p_ini(state, geom.max_volume());
    let q = state.m_fuel * 1e-6 * spec.lhv * spec.release_efficiency;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let cycles = (0..spec.n_cycles)
        .map(|_| {
            let mut w = spec.wiebe;
            w.start_deg = (w.start_deg + spec.start_jitter * normal.sample(&mut rng)).max(earliest_start_deg);
            let qi = q * (1.0 + spec.release_jitter * normal.sample(&mut rng)).max(0.5);
            wiebe_cycle(geom, &angles, p_ini, spec.kappa, qi, &w).0
        })
        .collect();
    let motored = wiebe_cycle(geom, &angles, p_ini, spec.kappa, 0.0, &spec.wiebe).0;
    Ok((
        PressureTrace::new(angles.clone(), cycles, state.n_engine)?,
        PressureTrace::new(angles, vec![motored], state.n_engine)?,
    ))
}

/// Smooth full-load line over the given speeds (per cylinder, mg/stroke).
pub fn full_load_line(speeds: &[f64]) -> Vec<EngineState> {
    speeds
        .iter()
        .map(|&n| {
            let s = (n - 2000.0) / 6500.0;
            let m_air = 300.0 + 90.0 * s - 50.0 * s * s;
            EngineState::new(n, m_air, 305.0 + 10.0 * s, 0.2 * m_air, m_air / 12.5)
        })
        .collect()
}

pub fn default_speeds() -> Vec<f64> {
    (0..14).map(|i| 2000.0 + 500.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LapSpec {
    /// \[s\]
    pub duration: f64,
    /// Telemetry sample period \[s\].
    pub sample_period: f64,
    pub full_load_fraction: f64,
    pub coasting_fraction: f64,
    /// Segment length range \[samples\].
    pub segment_samples: (usize, usize),
    pub n_min: f64,
    pub n_max: f64,
    pub n_start: f64,
    /// Speed gradients \[rpm/s\].
    pub accel: f64,
    pub decel: f64,
    /// Load factor range of part-load segments.
    pub part_load_factor: (f64, f64),
    /// Air mass share of the full-load value while coasting.
    pub coasting_air_factor: f64,
}

impl Default for LapSpec {
    fn default() -> Self {
        Self {
            duration: 180.0,
            sample_period: 0.05,
            full_load_fraction: 2.0 / 3.0,
            coasting_fraction: 0.25,
            segment_samples: (20, 120),
            n_min: 2000.0,
            n_max: 8500.0,
            n_start: 5000.0,
            accel: 450.0,
            decel: 1200.0,
            part_load_factor: (0.45, 0.8),
            coasting_air_factor: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    FullLoad,
    Coasting,
    PartLoad,
}

impl LapSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration / self.sample_period).round() as usize + 1
    }

    /// Exact sample counts `(full, coasting, part)`.
    pub fn phase_counts(&self) -> (usize, usize, usize) {
        let n = self.n_samples();
        let full = (self.full_load_fraction * n as f64).round() as usize;
        let coast = ((self.coasting_fraction * n as f64).round() as usize).min(n - full);
        (full, coast, n - full - coast)
    }
}

fn split(total: usize, range: (usize, usize), rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (lo, hi) = (range.0.max(1), range.1.max(range.0.max(1)));
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let len = rng.random_range(lo..=hi).min(left);
        out.push(len);
        left -= len;
    }
    out
}

/// Phase sequence, one entry per sample, with exact per-phase counts.
pub fn phase_schedule(spec: &LapSpec, seed: u64) -> Vec<Phase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (full, coast, part) = spec.phase_counts();
    let mut segs: Vec<(Phase, usize)> = Vec::new();
    for (ph, count) in [(Phase::FullLoad, full), (Phase::Coasting, coast), (Phase::PartLoad, part)] {
        segs.extend(split(count, spec.segment_samples, &mut rng).into_iter().map(|l| (ph, l)));
    }
    segs.shuffle(&mut rng);
    segs.into_iter().flat_map(|(ph, l)| std::iter::repeat_n(ph, l)).collect()
}

/// Telemetry of one lap. Full-load samples sit exactly on the interpolated
/// full-load line, coasting samples have zero torque and fuel.
pub fn synthetic_lap(spec: &LapSpec, line: &[EngineState], seed: u64) -> Result<(TelemetrySeries, Vec<Phase>), StateSpaceError> {
    if line.is_empty() {
        return Err(StateSpaceError::EmptySeries);
    }
    let phases = phase_schedule(spec, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut n = spec.n_start.clamp(spec.n_min, spec.n_max);
    let mut factor = 1.0;
    let mut times = Vec::with_capacity(phases.len());
    let mut states = Vec::with_capacity(phases.len());
    for (i, ph) in phases.iter().enumerate() {
        if i == 0 || phases[i - 1] != *ph {
            factor = rng.random_range(spec.part_load_factor.0..=spec.part_load_factor.1);
        }
        let (stat, _) = interpolate_stationary(line, n).map_err(|e| StateSpaceError::Malformed(e.to_string()))?;
        let s = match ph {
            Phase::FullLoad => stat,
            Phase::PartLoad => EngineState::new(n, factor * stat.m_air, stat.t_int, factor * stat.torque, factor * stat.m_fuel),
            Phase::Coasting => EngineState::new(n, spec.coasting_air_factor * stat.m_air, stat.t_int, 0.0, 0.0),
        };
        times.push(i as f64 * spec.sample_period);
        states.push(s);
        let rate = match ph {
            Phase::FullLoad => spec.accel,
            Phase::Coasting => -spec.decel,
            Phase::PartLoad => 0.0,
        };
        n = (n + rate * spec.sample_period).clamp(spec.n_min, spec.n_max);
    }
    Ok((TelemetrySeries::new(times, states)?, phases))
}

/// Coolant records at the telemetry samples: slow inlet drift, pump flow
/// rising with speed between the given volume flows.
pub fn water_records(series: &TelemetrySeries, flow_range_m3s: (f64, f64), density: f64, c_p: f64) -> Vec<WaterRecord> {
    let (lo, hi) = flow_range_m3s;
    series
        .timestamps()
        .iter()
        .zip(series.states())
        .map(|(&t, s)| {
            let vol = lo + (hi - lo) * ((s.n_engine - 2000.0) / 6500.0).clamp(0.0, 1.0);
            let t_in = 353.0 + 2.0 * (2.0 * std::f64::consts::PI * t / 60.0).sin();
            let q = 25_000.0 * (s.m_fuel / 30.0).max(0.15);
            WaterRecord { t, t_in, t_out: t_in + q / (vol * density * c_p), vol_flow: vol }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> CylinderGeometry {
        CylinderGeometry { bore: 0.086, stroke: 0.066, conrod_length: 0.12, compression_ratio: 12.0, n_cylinders: 2 }
    }

    #[test]
    fn wiebe_shape() {
        let w = WiebeParams::default();
        assert_eq!(w.fraction(-30.0), 0.0);
        assert_eq!(w.fraction(35.0), 1.0);
        let mid = w.fraction(10.0);
        assert!(mid > 0.3 && mid < 0.9);
        let h = 1e-5;
        let num = (w.fraction(10.0 + h) - w.fraction(10.0 - h)) / (2.0 * h);
        assert!((num - w.rate(10.0)).abs() < 1e-7);
    }

    #[test]
    fn motored_cycle_is_polytropic() {
        let g = geom();
        let a: Vec<f64> = (0..720).map(|i| -360.0 + i as f64).collect();
        let (p, _) = wiebe_cycle(&g, &a, 1e5, 1.33, 0.0, &WiebeParams::default());
        let i0 = a.iter().position(|&x| x == -180.0).unwrap();
        let c0 = p[i0] * g.volume(-180.0).powf(1.33);
        for (i, &deg) in a.iter().enumerate().filter(|(_, d)| d.abs() <= 180.0) {
            assert!((p[i] * g.volume(deg).powf(1.33) / c0 - 1.0).abs() < 1e-7, "{deg}");
        }
    }

    #[test]
    fn lap_counts_and_determinism() {
        let spec = LapSpec::default();
        let line = full_load_line(&default_speeds());
        let (s1, ph) = synthetic_lap(&spec, &line, 7).unwrap();
        let (s2, _) = synthetic_lap(&spec, &line, 7).unwrap();
        assert_eq!(s1.states(), s2.states());
        assert_eq!(s1.len(), 3601);
        let (f, c, _) = spec.phase_counts();
        assert_eq!(ph.iter().filter(|p| **p == Phase::FullLoad).count(), f);
        assert_eq!(s1.states().iter().filter(|s| s.torque == 0.0).count(), c);
        assert!((s1.span() - 180.0).abs() < 1e-9);
    }
}
