use std::io::{Read, Write};

use super::ThermalError;

const MAGIC: &[u8; 4] = b"BCS1";

/// Time series of `(α, T_eff)` for one surface zone on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditionSeries {
    zone: String,
    t: Vec<f64>,
    alpha: Vec<f64>,
    t_eff: Vec<f64>,
}

impl BoundaryConditionSeries {
    pub fn new(zone: impl Into<String>, t: Vec<f64>, alpha: Vec<f64>, t_eff: Vec<f64>) -> Result<Self, ThermalError> {
        let zone = zone.into();
        if t.len() != alpha.len() || t.len() != t_eff.len() {
            return Err(ThermalError::SeriesMismatch(format!("{zone}: column lengths differ")));
        }
        if t.is_empty() {
            return Err(ThermalError::SeriesMismatch(format!("{zone}: empty series")));
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(ThermalError::SeriesMismatch(format!("{zone}: time grid not increasing at row {}", i + 1)));
        }
        if let Some(i) = alpha.iter().position(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(ThermalError::SeriesMismatch(format!("{zone}: alpha[{i}] = {}", alpha[i])));
        }
        if let Some(i) = t_eff.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(ThermalError::SeriesMismatch(format!("{zone}: T_eff[{i}] = {}", t_eff[i])));
        }
        Ok(Self { zone, t, alpha, t_eff })
    }

    /// Uniform grid `t0 + i dt` of the given values.
    pub fn uniform(zone: impl Into<String>, t0: f64, dt: f64, alpha: Vec<f64>, t_eff: Vec<f64>) -> Result<Self, ThermalError> {
        let t = (0..alpha.len()).map(|i| t0 + i as f64 * dt).collect();
        Self::new(zone, t, alpha, t_eff)
    }

    pub fn constant(zone: impl Into<String>, t: Vec<f64>, alpha: f64, t_eff: f64) -> Result<Self, ThermalError> {
        let n = t.len();
        Self::new(zone, t, vec![alpha; n], vec![t_eff; n])
    }

    pub fn zone(&self) -> &str {
        &self.zone
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn t_eff(&self) -> &[f64] {
        &self.t_eff
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
        }
    }

    pub fn mean_alpha(&self) -> f64 {
        self.alpha.iter().sum::<f64>() / self.len() as f64
    }
}

pub fn write_series_csv<W: Write>(s: &BoundaryConditionSeries, w: W) -> Result<(), ThermalError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t_s", "alpha_Wm2K", "T_eff_K"])?;
    for i in 0..s.len() {
        w.write_record([s.t[i].to_string(), s.alpha[i].to_string(), s.t_eff[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(zone: &str, r: R) -> Result<BoundaryConditionSeries, ThermalError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t_s", "alpha_Wm2K", "T_eff_K"] {
        return Err(ThermalError::Malformed(format!("{zone}: unexpected header {header:?}")));
    }
    let (mut t, mut a, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |k: usize| {
            rec.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| ThermalError::Malformed(format!("{zone}: row {}, column {k}", row + 1)))
        };
        t.push(f(0)?);
        a.push(f(1)?);
        te.push(f(2)?);
    }
    BoundaryConditionSeries::new(zone, t, a, te)
}

/// Columnar little-endian layout: magic, zone id, row count, mean step,
/// then the `t`, `α` and `T_eff` columns.
pub fn write_series_binary<W: Write>(s: &BoundaryConditionSeries, mut w: W) -> Result<(), ThermalError> {
    w.write_all(MAGIC)?;
    let id = s.zone.as_bytes();
    w.write_all(&(id.len() as u32).to_le_bytes())?;
    w.write_all(id)?;
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(&s.dt().to_le_bytes())?;
    for col in [&s.t, &s.alpha, &s.t_eff] {
        for v in col.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_binary<R: Read>(mut r: R) -> Result<BoundaryConditionSeries, ThermalError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ThermalError::Malformed("not a boundary-condition series file".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let mut id = vec![0u8; u32::from_le_bytes(b4) as usize];
    r.read_exact(&mut id)?;
    let zone = String::from_utf8(id).map_err(|_| ThermalError::Malformed("zone id is not UTF-8".into()))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let mut col = || -> Result<Vec<f64>, ThermalError> {
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let (t, a, te) = (col()?, col()?, col()?);
    BoundaryConditionSeries::new(zone, t, a, te)
}
