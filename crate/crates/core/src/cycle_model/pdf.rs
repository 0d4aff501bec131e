use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::histogram::{BinEdges, Histogram};

use super::{CycleError, CycleResult};

/// Automatic binning for the per-speed `(α, T_eff)` histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdfBinning {
    pub alpha_bins: usize,
    pub t_bins: usize,
    /// Smallest bin width on the HTC axis \[W/(m² K)\].
    pub min_alpha_width: f64,
    /// Smallest bin width on the temperature axis \[K\].
    pub min_t_width: f64,
}

impl Default for PdfBinning {
    fn default() -> Self {
        Self { alpha_bins: 12, t_bins: 12, min_alpha_width: 1.0, min_t_width: 1.0 }
    }
}

/// Normed histogram of cycle-mean HTC and flux-weighted temperature at one
/// stationary engine speed. Axis 0 is `α`, axis 1 is `T_eff`.
#[derive(Debug, Clone, PartialEq)]
pub struct HtcPdf {
    pub engine_speed: f64,
    pub hist: Histogram,
}

impl HtcPdf {
    pub fn n_cycles(&self) -> u64 {
        self.hist.total()
    }

    pub fn mean_alpha(&self) -> f64 {
        self.hist.mean(0)
    }

    pub fn t_star(&self) -> Option<f64> {
        crate::expectation::modified_reference_temperature(&self.hist).ok()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CycleError> {
        let join = |e: &BinEdges| {
            e.as_slice().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
        };
        writeln!(w, "# engine_speed_rpm={}", self.engine_speed)?;
        writeln!(w, "# n_cycles={}", self.n_cycles())?;
        writeln!(w, "# alpha_edges={}", join(&self.hist.axes()[0]))?;
        writeln!(w, "# t_eff_edges={}", join(&self.hist.axes()[1]))?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i_alpha", "i_T", "alpha_Wm2K", "T_eff_K", "count", "density"])?;
        for flat in 0..self.hist.len() {
            let idx = self.hist.unflatten(flat);
            let c = self.hist.center_flat(flat);
            wtr.write_record([
                idx[0].to_string(),
                idx[1].to_string(),
                c[0].to_string(),
                c[1].to_string(),
                self.hist.counts()[flat].to_string(),
                self.hist.density()[flat].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reloads a table written by [`HtcPdf::write_csv`], rebuilding the
    /// densities from the counts and checking them against the file.
    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, CycleError> {
        let bad = |m: &str| CycleError::Malformed(format!("pdf table: {m}"));
        let mut speed = None;
        let mut edges: [Option<Vec<f64>>; 2] = [None, None];
        let mut body = String::new();
        for line in BufReader::new(rdr).lines() {
            let line = line?;
            if let Some(meta) = line.trim().strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let parse_list = |v: &str| -> Result<Vec<f64>, CycleError> {
                        v.split(';')
                            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad edge value")))
                            .collect()
                    };
                    match k.trim() {
                        "engine_speed_rpm" => speed = Some(v.trim().parse::<f64>().map_err(|_| bad("bad speed"))?),
                        "alpha_edges" => edges[0] = Some(parse_list(v)?),
                        "t_eff_edges" => edges[1] = Some(parse_list(v)?),
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let speed = speed.ok_or_else(|| bad("missing engine speed"))?;
        let [ea, et] = edges;
        let axes = vec![
            BinEdges::new(ea.ok_or_else(|| bad("missing alpha edges"))?)?,
            BinEdges::new(et.ok_or_else(|| bad("missing T_eff edges"))?)?,
        ];
        let size = axes[0].bins() * axes[1].bins();
        let mut counts = vec![0u64; size];
        let mut stored = vec![0.0; size];
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        for rec in csv.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| bad("short row"));
            let ia: usize = field(0)?.parse().map_err(|_| bad("bad index"))?;
            let it: usize = field(1)?.parse().map_err(|_| bad("bad index"))?;
            if ia >= axes[0].bins() || it >= axes[1].bins() {
                return Err(bad("index out of range"));
            }
            let flat = ia * axes[1].bins() + it;
            counts[flat] = field(4)?.parse().map_err(|_| bad("bad count"))?;
            stored[flat] = field(5)?.parse().map_err(|_| bad("bad density"))?;
        }
        let hist = Histogram::from_counts(axes, counts)?;
        for (a, b) in hist.density().iter().zip(&stored) {
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                return Err(bad("stored density disagrees with counts"));
            }
        }
        if (hist.integral() - 1.0).abs() > 1e-12 {
            return Err(bad("density does not integrate to one"));
        }
        Ok(Self { engine_speed: speed, hist })
    }
}

pub fn build_htc_pdf(ensemble: &[CycleResult], binning: &PdfBinning) -> Result<HtcPdf, CycleError> {
    if ensemble.len() < 2 {
        return Err(CycleError::TooFewCycles(ensemble.len()));
    }
    let speed = ensemble[0].engine_speed;
    if ensemble.iter().any(|r| r.engine_speed != speed) {
        return Err(CycleError::GridMismatch("ensemble mixes engine speeds".into()));
    }
    let alpha: Vec<f64> = ensemble.iter().map(|r| r.alpha_mean).collect();
    let t: Vec<f64> = ensemble.iter().map(|r| r.t_eff).collect();
    let axes = vec![
        BinEdges::spanning(&alpha, binning.alpha_bins, binning.min_alpha_width)?,
        BinEdges::spanning(&t, binning.t_bins, binning.min_t_width)?,
    ];
    let points: Vec<[f64; 2]> = alpha.iter().zip(&t).map(|(&a, &t)| [a, t]).collect();
    let (hist, _) = Histogram::from_points(axes, points.iter().map(|p| p.as_slice()))?;
    Ok(HtcPdf { engine_speed: speed, hist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn result(alpha: f64, t: f64) -> CycleResult {
        CycleResult { alpha: vec![], alpha_mean: alpha, t_eff: t, engine_speed: 6000.0 }
    }

    #[test]
    fn identical_cycles_single_bin() {
        let e = vec![result(900.0, 1100.0); 5];
        let pdf = build_htc_pdf(&e, &PdfBinning::default()).unwrap();
        let occ: Vec<usize> = pdf.hist.occupied().collect();
        assert_eq!(occ.len(), 1);
        let vol = pdf.hist.volume_flat(occ[0]);
        assert!((pdf.hist.density()[occ[0]] - 1.0 / vol).abs() < 1e-15);
    }

    #[test]
    fn two_cycles_split_mass() {
        let e = vec![result(800.0, 1000.0), result(1200.0, 1300.0)];
        let b = PdfBinning { alpha_bins: 2, t_bins: 2, ..Default::default() };
        let pdf = build_htc_pdf(&e, &b).unwrap();
        let occ: Vec<usize> = pdf.hist.occupied().collect();
        assert_eq!(occ.len(), 2);
        for f in occ {
            assert!((pdf.hist.density()[f] * pdf.hist.volume_flat(f) - 0.5).abs() < 1e-15);
        }
        assert!(matches!(build_htc_pdf(&e[..1], &b), Err(CycleError::TooFewCycles(1))));
    }

    #[test]
    fn gaussian_ensemble_mean() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (mu, sigma) = (1000.0, 60.0);
        let normal = Normal::new(mu, sigma).unwrap();
        let e: Vec<CycleResult> = (0..60).map(|_| result(normal.sample(&mut rng), 1100.0)).collect();
        let pdf = build_htc_pdf(&e, &PdfBinning::default()).unwrap();
        assert!((pdf.mean_alpha() - mu).abs() < 2.0 * sigma / 60f64.sqrt());
        assert!((pdf.hist.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let e = vec![result(800.0, 1000.0), result(1200.0, 1300.0), result(1000.0, 1250.0)];
        let pdf = build_htc_pdf(&e, &PdfBinning::default()).unwrap();
        let mut buf = Vec::new();
        pdf.write_csv(&mut buf).unwrap();
        let back = HtcPdf::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, pdf);
    }
}
