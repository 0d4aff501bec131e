use std::io::Write;
use std::path::Path;

use super::{create_file, open_file, Layout, PipelineError, Result, Stage};

const S: Stage = Stage::Report;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub node: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub nodes: Vec<NodeSummary>,
    /// `(quantity, value)` rows of the energy summary.
    pub energy: Vec<(String, f64)>,
    /// Per-node mean shift against the baseline run \[K\].
    pub mean_shift: Option<Vec<(String, f64)>>,
}

fn read_summary(sim_dir: &Path) -> Result<Vec<NodeSummary>> {
    let path = sim_dir.join("summary.csv");
    let mut rdr = csv::Reader::from_reader(open_file(S, &path)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PipelineError::io(S, &path, e))?;
        let num = |i: usize| {
            rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| PipelineError::io(S, &path, "malformed row"))
        };
        out.push(NodeSummary { node: rec[0].to_string(), mean: num(1)?, min: num(2)?, max: num(3)?, amplitude: num(4)? });
    }
    Ok(out)
}

fn read_energy(sim_dir: &Path) -> Result<Vec<(String, f64)>> {
    let path = sim_dir.join("energy_summary.csv");
    let mut rdr = csv::Reader::from_reader(open_file(S, &path)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PipelineError::io(S, &path, e))?;
        let v = rec.get(1).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| PipelineError::io(S, &path, "malformed row"))?;
        out.push((rec[0].to_string(), v));
    }
    Ok(out)
}

/// Markdown report of a finished simulation. With a baseline run directory
/// the per-node mean shift is written as well.
pub fn report(layout: &Layout, baseline: Option<&Path>) -> Result<ReportSummary> {
    let nodes = read_summary(&layout.sim_dir())?;
    let energy = read_energy(&layout.sim_dir())?;
    let mean_shift = match baseline {
        Some(b) => {
            let base = read_summary(&Layout::new(b).sim_dir())?;
            let mut shift = Vec::with_capacity(nodes.len());
            for n in &nodes {
                let m = base
                    .iter()
                    .find(|b| b.node == n.node)
                    .ok_or_else(|| PipelineError::validation(S, format!("node `{}` missing from the baseline run", n.node)))?;
                shift.push((n.node.clone(), n.mean - m.mean));
            }
            let path = layout.file("mean_shift.csv");
            let mut w = create_file(S, &path)?;
            (|| -> std::io::Result<()> {
                writeln!(w, "node,mean_shift_K")?;
                for (id, d) in &shift {
                    writeln!(w, "{id},{d}")?;
                }
                w.flush()
            })()
            .map_err(|e| PipelineError::io(S, &path, e))?;
            Some(shift)
        }
        None => None,
    };

    let path = layout.file("report.md");
    let mut w = create_file(S, &path)?;
    (|| -> std::io::Result<()> {
        writeln!(w, "# Simulation report\n")?;
        writeln!(w, "## Energy balance\n")?;
        writeln!(w, "| quantity | value |\n|---|---|")?;
        for (q, v) in &energy {
            writeln!(w, "| {q} | {v:.6e} |")?;
        }
        writeln!(w, "\n## Node temperatures\n")?;
        let shifted = mean_shift.is_some();
        if shifted {
            writeln!(w, "| node | mean K | min K | max K | amplitude K | mean shift K |\n|---|---|---|---|---|---|")?;
        } else {
            writeln!(w, "| node | mean K | min K | max K | amplitude K |\n|---|---|---|---|---|")?;
        }
        for (i, n) in nodes.iter().enumerate() {
            write!(w, "| {} | {:.2} | {:.2} | {:.2} | {:.3} |", n.node, n.mean, n.min, n.max, n.amplitude)?;
            if let Some(s) = &mean_shift {
                write!(w, " {:.3} |", s[i].1)?;
            }
            writeln!(w)?;
        }
        w.flush()
    })()
    .map_err(|e| PipelineError::io(S, &path, e))?;
    Ok(ReportSummary { nodes, energy, mean_shift })
}
