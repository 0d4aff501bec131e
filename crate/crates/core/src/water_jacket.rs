//! Water-side boundary conditions from a single mapped reference solution.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::derivative;

#[derive(Debug, Error)]
pub enum WaterJacketError {
    #[error("patch `{patch}`: reference and wall temperature coincide ({t_ref} K vs {t_s} K)")]
    DegenerateTemperatureDifference { patch: String, t_ref: f64, t_s: f64 },
    #[error("speed histogram is empty")]
    EmptyHistogram,
    #[error("sensor channel needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePatch {
    pub id: String,
    /// \[m²\]
    pub area: f64,
    /// \[W/(m² K)\]
    pub alpha_ref: f64,
}

/// Spatial HTC pattern at the reference speed, scaled in time by `(n/n_ref)^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceHtcField {
    pub patches: Vec<ReferencePatch>,
    pub n_ref: f64,
    pub m: f64,
}

impl ReferenceHtcField {
    pub fn new(patches: Vec<ReferencePatch>, n_ref: f64, m: f64) -> Result<Self, WaterJacketError> {
        let f = Self { patches, n_ref, m };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), WaterJacketError> {
        if !(self.n_ref > 0.0 && self.n_ref.is_finite()) {
            return Err(WaterJacketError::Invalid(format!("reference speed {}", self.n_ref)));
        }
        if !(self.m > 0.0 && self.m < 1.0) {
            return Err(WaterJacketError::Invalid(format!("Reynolds exponent {} outside (0, 1)", self.m)));
        }
        for p in &self.patches {
            if !(p.area > 0.0) || !(p.alpha_ref >= 0.0) {
                return Err(WaterJacketError::Invalid(format!("patch `{}` has area {} and α {}", p.id, p.area, p.alpha_ref)));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ReferencePatch> {
        self.patches.iter().find(|p| p.id == id)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), WaterJacketError> {
        writeln!(w, "# n_ref_rpm={}", self.n_ref)?;
        writeln!(w, "# m={}", self.m)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["patch_id", "area_m2", "alpha_ref_Wm2K"])?;
        for p in &self.patches {
            wtr.write_record([p.id.clone(), p.area.to_string(), p.alpha_ref.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, WaterJacketError> {
        let mut n_ref = None;
        let mut m = None;
        let mut body = String::new();
        for line in BufReader::new(rdr).lines() {
            let line = line?;
            if let Some(meta) = line.trim().strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let num = || v.trim().parse::<f64>().map_err(|_| WaterJacketError::Malformed(format!("bad `{}`", line.trim())));
                    match k.trim() {
                        "n_ref_rpm" => n_ref = Some(num()?),
                        "m" => m = Some(num()?),
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let mut patches = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            let bad = || WaterJacketError::Malformed(format!("bad reference row {:?}", rec));
            if rec.len() != 3 {
                return Err(bad());
            }
            patches.push(ReferencePatch {
                id: rec[0].to_string(),
                area: rec[1].parse().map_err(|_| bad())?,
                alpha_ref: rec[2].parse().map_err(|_| bad())?,
            });
        }
        Self::new(
            patches,
            n_ref.ok_or_else(|| WaterJacketError::Malformed("missing `# n_ref_rpm=`".into()))?,
            m.ok_or_else(|| WaterJacketError::Malformed("missing `# m=`".into()))?,
        )
    }

    pub fn load(path: &Path) -> Result<Self, WaterJacketError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Solid-side state of one wetted patch in the reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSample {
    pub id: String,
    pub area: f64,
    /// Conduction flux projected on the outward boundary normal \[W/m²\].
    pub q_normal: f64,
    /// Wall temperature \[K\].
    pub t_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchFlag {
    Active,
    /// Zero flux, mapped to `α = 0`.
    Inactive,
    /// `|T_ref − T_s|` below tolerance, not divided, `α = 0`.
    DegenerateTemperatureDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedField {
    pub patches: Vec<ReferencePatch>,
    pub flags: Vec<PatchFlag>,
}

/// `α_ref = (q·n)/(T_ref − T_s)` per patch.
pub fn map_reference_htc(samples: &[FluxSample], t_ref: f64, tol: f64) -> MappedField {
    let mut patches = Vec::with_capacity(samples.len());
    let mut flags = Vec::with_capacity(samples.len());
    for s in samples {
        let dt = t_ref - s.t_s;
        let (alpha, flag) = if dt.abs() <= tol {
            (0.0, PatchFlag::DegenerateTemperatureDifference)
        } else if s.q_normal == 0.0 {
            (0.0, PatchFlag::Inactive)
        } else {
            (s.q_normal / dt, PatchFlag::Active)
        };
        patches.push(ReferencePatch { id: s.id.clone(), area: s.area, alpha_ref: alpha });
        flags.push(flag);
    }
    MappedField { patches, flags }
}

/// As [`map_reference_htc`] but fails on the first degenerate patch.
pub fn map_reference_htc_strict(samples: &[FluxSample], t_ref: f64, tol: f64) -> Result<MappedField, WaterJacketError> {
    let mapped = map_reference_htc(samples, t_ref, tol);
    if let Some(i) = mapped.flags.iter().position(|f| *f == PatchFlag::DegenerateTemperatureDifference) {
        return Err(WaterJacketError::DegenerateTemperatureDifference {
            patch: samples[i].id.clone(),
            t_ref,
            t_s: samples[i].t_s,
        });
    }
    Ok(mapped)
}

/// Power mean `(Σ w n^m / Σ w)^{1/m}` of a speed histogram.
pub fn reference_speed(speeds: &[f64], weights: &[f64], m: f64) -> Result<f64, WaterJacketError> {
    if speeds.len() != weights.len() {
        return Err(WaterJacketError::Invalid("speeds and weights differ in length".into()));
    }
    if !(m > 0.0) {
        return Err(WaterJacketError::Invalid(format!("exponent {m}")));
    }
    let (mut sw, mut s) = (0.0, 0.0);
    for (&n, &w) in speeds.iter().zip(weights) {
        if w < 0.0 || (w > 0.0 && !(n > 0.0)) {
            return Err(WaterJacketError::Invalid(format!("weight {w} at speed {n}")));
        }
        if w > 0.0 {
            sw += w;
            s += w * n.powf(m);
        }
    }
    if sw <= 0.0 {
        return Err(WaterJacketError::EmptyHistogram);
    }
    Ok((s / sw).powf(1.0 / m))
}

pub fn speed_factor(n_engine: f64, n_ref: f64, m: f64) -> f64 {
    (n_engine.max(0.0) / n_ref).powf(m)
}

/// `α(patch) = α_ref(patch)·(n/n_ref)^m` in patch order.
pub fn scale_htc(field: &ReferenceHtcField, n_engine: f64) -> Vec<f64> {
    let f = speed_factor(n_engine, field.n_ref, field.m);
    field.patches.iter().map(|p| p.alpha_ref * f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaterFlow {
    /// \[kg/s\]
    Mass { kg_s: f64 },
    /// \[m³/s\] at `density` \[kg/m³\].
    Volume { m3_s: f64, density: f64 },
}

impl WaterFlow {
    pub fn mass_rate(&self) -> f64 {
        match *self {
            WaterFlow::Mass { kg_s } => kg_s,
            WaterFlow::Volume { m3_s, density } => m3_s * density,
        }
    }
}

/// `Q = ṁ c_p (T_out − T_in)`.
pub fn water_heat_flow(flow: WaterFlow, c_p: f64, t_in: f64, t_out: f64) -> Result<f64, WaterJacketError> {
    let mdot = flow.mass_rate();
    if !(mdot >= 0.0) {
        return Err(WaterJacketError::Invalid(format!("negative water flow {mdot}")));
    }
    Ok(mdot * c_p * (t_out - t_in))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterSensorChannel {
    pub t: Vec<f64>,
    pub temperature: Vec<f64>,
    /// Sensor time constant \[s\].
    pub tau_c: f64,
}

/// `T_cor = T + τ_c dT/dt`.
pub fn sensor_lag_correct(channel: &WaterSensorChannel) -> Result<Vec<f64>, WaterJacketError> {
    let n = channel.t.len();
    if n != channel.temperature.len() {
        return Err(WaterJacketError::Invalid("time and temperature differ in length".into()));
    }
    if n < 3 {
        return Err(WaterJacketError::TooFewSamples(n));
    }
    if !(channel.tau_c >= 0.0) {
        return Err(WaterJacketError::Invalid(format!("time constant {}", channel.tau_c)));
    }
    if channel.t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WaterJacketError::Invalid("sensor time stamps must increase".into()));
    }
    if channel.tau_c == 0.0 {
        return Ok(channel.temperature.clone());
    }
    let d = derivative(&channel.t, &channel.temperature);
    Ok(channel.temperature.iter().zip(d).map(|(t, dt)| t + channel.tau_c * dt).collect())
}

/// One row of the water-channel measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterRecord {
    pub t: f64,
    pub t_in: f64,
    pub t_out: f64,
    pub vol_flow: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterMeasurement {
    pub records: Vec<WaterRecord>,
}

impl WaterMeasurement {
    pub fn new(records: Vec<WaterRecord>) -> Result<Self, WaterJacketError> {
        if records.is_empty() {
            return Err(WaterJacketError::Invalid("water measurement is empty".into()));
        }
        if records.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(WaterJacketError::Invalid("water time stamps must increase".into()));
        }
        Ok(Self { records })
    }

    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, WaterJacketError> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rdr);
        let headers = csv.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| WaterJacketError::Malformed(format!("missing column `{name}`")))
        };
        let idx = [col("t_s")?, col("T_in_K")?, col("T_out_K")?, col("vol_flow_m3s")?];
        let mut records = Vec::new();
        for (row, rec) in csv.records().enumerate() {
            let rec = rec?;
            let v: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    rec.get(i)
                        .and_then(|s| s.parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| WaterJacketError::Malformed(format!("row {}: bad value", row + 1)))
                })
                .collect::<Result<_, _>>()?;
            records.push(WaterRecord { t: v[0], t_in: v[1], t_out: v[2], vol_flow: v[3] });
        }
        Self::new(records)
    }

    pub fn load(path: &Path) -> Result<Self, WaterJacketError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), WaterJacketError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_s", "T_in_K", "T_out_K", "vol_flow_m3s"])?;
        for r in &self.records {
            wtr.write_record([r.t.to_string(), r.t_in.to_string(), r.t_out.to_string(), r.vol_flow.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Both temperatures corrected for sensor lag `tau_c`.
    pub fn lag_corrected(&self, tau_c: f64) -> Result<Self, WaterJacketError> {
        let t = self.times();
        let fix = |f: fn(&WaterRecord) -> f64| {
            sensor_lag_correct(&WaterSensorChannel { t: t.clone(), temperature: self.records.iter().map(f).collect(), tau_c })
        };
        let t_in = fix(|r| r.t_in)?;
        let t_out = fix(|r| r.t_out)?;
        let records = self
            .records
            .iter()
            .zip(t_in.into_iter().zip(t_out))
            .map(|(r, (a, b))| WaterRecord { t_in: a, t_out: b, ..*r })
            .collect();
        Ok(Self { records })
    }

    /// Zero-order hold of the record valid at `t`.
    pub fn at(&self, t: f64) -> &WaterRecord {
        let j = self.records.partition_point(|r| r.t <= t + 1e-12);
        &self.records[j.saturating_sub(1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_sign_convention() {
        let s = vec![
            FluxSample { id: "a".into(), area: 1e-3, q_normal: -5e5, t_s: 423.0 },
            FluxSample { id: "b".into(), area: 1e-3, q_normal: 0.0, t_s: 400.0 },
            FluxSample { id: "c".into(), area: 1e-3, q_normal: -1e5, t_s: 373.0 },
        ];
        let m = map_reference_htc(&s, 373.0, 1e-9);
        assert!((m.patches[0].alpha_ref - 1e4).abs() < 1e-9);
        assert_eq!(m.flags, vec![PatchFlag::Active, PatchFlag::Inactive, PatchFlag::DegenerateTemperatureDifference]);
        assert_eq!(m.patches[1].alpha_ref, 0.0);
        assert!(matches!(
            map_reference_htc_strict(&s, 373.0, 1e-9),
            Err(WaterJacketError::DegenerateTemperatureDifference { .. })
        ));
    }

    #[test]
    fn newton_round_trip() {
        let alphas = [3000.0, 12_345.678, 800.5];
        let t_ref = 360.0;
        let s: Vec<FluxSample> = alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let t_s = 380.0 + 10.0 * i as f64;
                FluxSample { id: format!("p{i}"), area: 1.0, q_normal: a * (t_ref - t_s), t_s }
            })
            .collect();
        let m = map_reference_htc(&s, t_ref, 1e-9);
        for (p, a) in m.patches.iter().zip(alphas) {
            assert!((p.alpha_ref / a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_mean() {
        assert!((reference_speed(&[7000.0], &[3.0], 0.7).unwrap() - 7000.0).abs() < 1e-9);
        let n = reference_speed(&[6000.0, 8000.0], &[1.0, 1.0], 0.7).unwrap();
        assert!((n - 6978.47).abs() < 0.01);
        let fixed: f64 = [6000.0f64, 8000.0].iter().map(|s| (s / n).powf(0.7)).sum::<f64>() / 2.0;
        assert!((fixed - 1.0).abs() < 1e-10);
        assert!((reference_speed(&[6000.0, 8000.0], &[1.0, 1.0], 1.0).unwrap() - 7000.0).abs() < 1e-9);
        assert!(matches!(reference_speed(&[6000.0], &[0.0], 0.7), Err(WaterJacketError::EmptyHistogram)));
        let shifted = reference_speed(&[6000.0, 8000.0], &[0.9, 1.1], 0.7).unwrap();
        assert!(shifted > n);
    }

    #[test]
    fn separation_scaling() {
        let f = ReferenceHtcField::new(
            vec![
                ReferencePatch { id: "a".into(), area: 1.0, alpha_ref: 5000.0 },
                ReferencePatch { id: "b".into(), area: 2.0, alpha_ref: 12000.0 },
            ],
            7000.0,
            0.7,
        )
        .unwrap();
        assert_eq!(scale_htc(&f, 7000.0), vec![5000.0, 12000.0]);
        let s = scale_htc(&f, 7000.0 * 1.61 / 2.32);
        assert!((s[0] / 5000.0 - (1.61f64 / 2.32).powf(0.7)).abs() < 1e-12);
        assert!((s[0] / 5000.0 - 0.7743).abs() < 1e-4);
        assert!((s[1] / s[0] - 2.4).abs() < 1e-12);
        assert!(((1.61f64 / 2.32).powf(0.87) - 0.728).abs() < 1e-3);
    }

    #[test]
    fn heat_flow() {
        assert_eq!(water_heat_flow(WaterFlow::Mass { kg_s: 2.32 }, 4186.0, 360.0, 360.0).unwrap(), 0.0);
        let q = water_heat_flow(WaterFlow::Mass { kg_s: 2.32 }, 4186.0, 360.0, 365.0).unwrap();
        assert!((q - 48_557.6).abs() < 0.1);
        assert!(water_heat_flow(WaterFlow::Mass { kg_s: 1.0 }, 4186.0, 365.0, 360.0).unwrap() < 0.0);
        let v = WaterFlow::Volume { m3_s: 2.4e-3, density: 966.7 };
        assert!((v.mass_rate() - 2.32).abs() < 1e-3);
    }

    #[test]
    fn lag_correction() {
        let t: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        let temp: Vec<f64> = t.iter().map(|t| 100.0 * (1.0 - (-t / 2.0).exp())).collect();
        let cor = sensor_lag_correct(&WaterSensorChannel { t: t.clone(), temperature: temp.clone(), tau_c: 2.0 }).unwrap();
        assert!(cor.iter().all(|c| (c - 100.0).abs() < 0.5));
        let id = sensor_lag_correct(&WaterSensorChannel { t: t.clone(), temperature: temp.clone(), tau_c: 0.0 }).unwrap();
        assert_eq!(id, temp);
        let flat = sensor_lag_correct(&WaterSensorChannel { t, temperature: vec![350.0; 200], tau_c: 5.0 }).unwrap();
        assert!(flat.iter().all(|&c| (c - 350.0).abs() < 1e-9));
        assert!(matches!(
            sensor_lag_correct(&WaterSensorChannel { t: vec![0.0, 1.0], temperature: vec![1.0, 1.0], tau_c: 1.0 }),
            Err(WaterJacketError::TooFewSamples(2))
        ));
    }

    #[test]
    fn field_csv_round_trip() {
        let f = ReferenceHtcField::new(vec![ReferencePatch { id: "w1".into(), area: 0.01, alpha_ref: 9000.0 }], 6978.5, 0.7)
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(ReferenceHtcField::read_csv(buf.as_slice()).unwrap(), f);
    }
}
