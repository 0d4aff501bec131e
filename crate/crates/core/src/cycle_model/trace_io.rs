use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::CycleError;

/// Crank-resolved cylinder pressure for an ensemble of cycles on a shared
/// angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureTrace {
    crank_angle: Vec<f64>,
    cycles: Vec<Vec<f64>>,
    engine_speed: f64,
}

impl PressureTrace {
    pub fn new(crank_angle: Vec<f64>, cycles: Vec<Vec<f64>>, engine_speed: f64) -> Result<Self, CycleError> {
        if crank_angle.len() < 2 {
            return Err(CycleError::Malformed("need at least two crank angles".into()));
        }
        if let Some(i) = crank_angle.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(CycleError::Malformed(format!(
                "crank angle not strictly increasing at sample {}",
                i + 1
            )));
        }
        if cycles.is_empty() {
            return Err(CycleError::Malformed("trace holds no cycles".into()));
        }
        for (c, p) in cycles.iter().enumerate() {
            if p.len() != crank_angle.len() {
                return Err(CycleError::GridMismatch(format!(
                    "cycle {} has {} samples, grid has {}",
                    c + 1,
                    p.len(),
                    crank_angle.len()
                )));
            }
            if let Some(i) = p.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(CycleError::NonPositivePressure { index: i, value: p[i] });
            }
        }
        super::require_positive("engine speed", engine_speed)?;
        Ok(Self { crank_angle, cycles, engine_speed })
    }

    pub fn crank_angle(&self) -> &[f64] {
        &self.crank_angle
    }

    pub fn cycle(&self, i: usize) -> Option<&[f64]> {
        self.cycles.get(i).map(Vec::as_slice)
    }

    pub fn cycles(&self) -> &[Vec<f64>] {
        &self.cycles
    }

    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn engine_speed(&self) -> f64 {
        self.engine_speed
    }

    /// Largest angular step \[°\].
    pub fn resolution(&self) -> f64 {
        self.crank_angle.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn index_of(&self, crank_deg: f64) -> usize {
        self.crank_angle.partition_point(|&a| a < crank_deg).min(self.crank_angle.len() - 1)
    }
}

fn unit_factor(unit: &str) -> Result<f64, CycleError> {
    match unit.trim() {
        "Pa" => Ok(1.0),
        "kPa" => Ok(1e3),
        "MPa" => Ok(1e6),
        "bar" => Ok(1e5),
        other => Err(CycleError::Malformed(format!("unknown pressure unit `{other}`"))),
    }
}

pub fn read_pressure_trace(path: &Path) -> Result<PressureTrace, CycleError> {
    let f = std::fs::File::open(path)?;
    read_trace(f)
}

/// Parses the trace CSV. Metadata lines `# engine_speed_rpm=` and
/// `# p_unit=` may appear anywhere before the header.
pub fn read_trace<R: Read>(rdr: R) -> Result<PressureTrace, CycleError> {
    let mut speed = None;
    let mut factor = 1.0;
    let mut body = String::new();
    for line in BufReader::new(rdr).lines() {
        let line = line?;
        let trimmed = line.trim();
        if let Some(meta) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "engine_speed_rpm" => {
                        speed = Some(v.trim().parse::<f64>().map_err(|_| {
                            CycleError::Malformed(format!("bad engine speed `{}`", v.trim()))
                        })?)
                    }
                    "p_unit" => factor = unit_factor(v)?,
                    _ => {}
                }
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let speed = speed.ok_or_else(|| CycleError::Malformed("missing `# engine_speed_rpm=`".into()))?;
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = csv.headers()?.clone();
    if headers.get(0) != Some("alpha_cr_deg") {
        return Err(CycleError::Malformed("first column must be `alpha_cr_deg`".into()));
    }
    let n_cycles = headers.len() - 1;
    let mut angles = Vec::new();
    let mut cycles = vec![Vec::new(); n_cycles];
    for (row, rec) in csv.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(CycleError::Malformed(format!("row {} has {} fields", row + 1, rec.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| CycleError::Malformed(format!("row {}: cannot parse `{s}`", row + 1)))
        };
        angles.push(parse(&rec[0])?);
        for (c, col) in cycles.iter_mut().enumerate() {
            col.push(parse(&rec[c + 1])? * factor);
        }
    }
    PressureTrace::new(angles, cycles, speed)
}

pub fn write_pressure_trace<W: Write>(trace: &PressureTrace, mut w: W) -> Result<(), CycleError> {
    writeln!(w, "# engine_speed_rpm={}", trace.engine_speed)?;
    writeln!(w, "# p_unit=Pa")?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["alpha_cr_deg".to_string()];
    header.extend((1..=trace.n_cycles()).map(|c| format!("cycle_{c:03}")));
    wtr.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (i, a) in trace.crank_angle.iter().enumerate() {
        rec.clear();
        rec.push(a.to_string());
        rec.extend(trace.cycles.iter().map(|c| c[i].to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
