use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use super::{BoundaryConditionSeries, ThermalError, ThermalNetwork};

/// Networks at or above this size use the iterative solver.
pub const DIRECT_NODE_LIMIT: usize = 10_000;
/// Default step \[s\], two crank revolutions at the highest speed.
pub const DEFAULT_DT: f64 = 0.015;
const PCG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Boundary values of one patch at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchBc {
    pub alpha: f64,
    pub t_eff: f64,
}

/// SPD solver on the fixed conduction pattern: sparse Cholesky with
/// numeric refactorization, or Jacobi-preconditioned CG.
pub struct LinearSolver {
    matrix: CscMatrix<f64>,
    factor: Option<CscCholesky<f64>>,
    iterative: bool,
}

impl LinearSolver {
    pub fn new(net: &ThermalNetwork, kind: SolverKind) -> Self {
        let iterative = match kind {
            SolverKind::Auto => net.len() >= DIRECT_NODE_LIMIT,
            SolverKind::Direct => false,
            SolverKind::Iterative => true,
        };
        Self { matrix: net.conduction().clone(), factor: None, iterative }
    }

    pub fn is_iterative(&self) -> bool {
        self.iterative
    }

    /// Replaces the matrix values; refactors only when they changed.
    pub fn set_values(&mut self, values: &[f64]) -> Result<(), String> {
        let changed = self.matrix.values() != values;
        if changed {
            self.matrix.values_mut().copy_from_slice(values);
        }
        if self.iterative {
            return Ok(());
        }
        match &mut self.factor {
            Some(f) if changed => f.refactor(values).map_err(|e| format!("{e:?}")),
            Some(_) => Ok(()),
            None => {
                self.factor = Some(CscCholesky::factor(&self.matrix).map_err(|e| format!("{e:?}"))?);
                Ok(())
            }
        }
    }

    pub fn solve(&self, b: &[f64], guess: &[f64]) -> Result<Vec<f64>, String> {
        if self.matrix.nnz() == b.len() {
            // Uncoupled nodes: plain division keeps equilibria exact.
            return Ok(b.iter().zip(self.matrix.values()).map(|(b, d)| b / d).collect());
        }
        match &self.factor {
            Some(f) if !self.iterative => {
                let x = f.solve(&DVector::from_column_slice(b));
                Ok(x.column(0).iter().copied().collect())
            }
            _ => pcg(&self.matrix, b, guess),
        }
    }
}

fn matvec(a: &CscMatrix<f64>, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(a: &CscMatrix<f64>, b: &[f64], guess: &[f64]) -> Result<Vec<f64>, String> {
    let n = b.len();
    let mut inv_diag = vec![0.0; n];
    for (i, j, &v) in a.triplet_iter() {
        if i == j {
            inv_diag[i] = 1.0 / v;
        }
    }
    if inv_diag.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err("non-positive diagonal".into());
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = guess.to_vec();
    let mut ax = vec![0.0; n];
    matvec(a, &x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..(10 * n).max(100) {
        if dot(&r, &r).sqrt() <= PCG_TOL * bnorm {
            return Ok(x);
        }
        matvec(a, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err("matrix is not positive definite".into());
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err("conjugate gradients did not converge".into())
}

fn check_bc(net: &ThermalNetwork, bc: &[PatchBc]) -> Result<(), ThermalError> {
    if bc.len() != net.patches().len() {
        return Err(ThermalError::SeriesMismatch(format!("{} boundary values for {} patches", bc.len(), net.patches().len())));
    }
    for (p, v) in net.patches().iter().zip(bc) {
        if !(v.alpha >= 0.0 && v.alpha.is_finite() && v.t_eff.is_finite()) {
            return Err(ThermalError::SeriesMismatch(format!("patch {}: alpha {} T_eff {}", p.id, v.alpha, v.t_eff)));
        }
    }
    Ok(())
}

fn bc_rhs(net: &ThermalNetwork, bc: &[PatchBc]) -> Vec<f64> {
    let mut b = vec![0.0; net.len()];
    for (p, v) in net.patches().iter().zip(bc) {
        b[p.node] += v.alpha * p.area * v.t_eff;
    }
    b
}

fn patch_flux(net: &ThermalNetwork, bc: &[PatchBc], temps: &[f64]) -> Vec<f64> {
    net.patches().iter().zip(bc).map(|(p, v)| v.alpha * p.area * (v.t_eff - temps[p.node])).collect()
}

/// Steady temperatures under constant patch values.
pub fn steady_solve(net: &ThermalNetwork, bc: &[PatchBc], kind: SolverKind) -> Result<Vec<f64>, ThermalError> {
    check_bc(net, bc)?;
    if !bc.iter().any(|v| v.alpha > 0.0) {
        return Err(ThermalError::SingularSystem("no patch with positive heat transfer coefficient".into()));
    }
    let diag = net.bc_diagonal(&bc.iter().map(|v| v.alpha).collect::<Vec<_>>());
    net.check_m_matrix(&diag)?;
    let mut solver = LinearSolver::new(net, kind);
    solver.set_values(&net.values_with_diagonal(&diag)).map_err(ThermalError::SingularSystem)?;
    let b = bc_rhs(net, bc);
    let t0 = bc.iter().map(|v| v.t_eff).sum::<f64>() / bc.len() as f64;
    let temps = solver.solve(&b, &vec![t0; net.len()]).map_err(ThermalError::SingularSystem)?;
    if temps.iter().any(|t| !t.is_finite()) {
        return Err(ThermalError::SingularSystem("non-finite temperature".into()));
    }
    let mut at = vec![0.0; net.len()];
    matvec(&solver.matrix, &temps, &mut at);
    let scale = b.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let worst = at.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if worst > 1e-9 * scale {
        return Err(ThermalError::SingularSystem(format!("nodal residual {worst:e} W exceeds tolerance")));
    }
    Ok(temps)
}

/// One completed implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Heat flow into the solid per patch \[W\].
    pub patch_flux: Vec<f64>,
    /// `Σ C ΔT / Δt` \[W\].
    pub storage_rate: f64,
}

/// Backward-Euler integrator `(C/Δt + K + D) Tⁿ⁺¹ = C/Δt Tⁿ + b`.
pub struct TransientSolver<'a> {
    net: &'a ThermalNetwork,
    dt: f64,
    t: f64,
    temps: Vec<f64>,
    solver: LinearSolver,
    steps: usize,
}

impl<'a> TransientSolver<'a> {
    pub fn new(net: &'a ThermalNetwork, dt: f64, t0: f64, initial: Option<Vec<f64>>, kind: SolverKind) -> Result<Self, ThermalError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ThermalError::Invalid(format!("time step must be positive, got {dt}")));
        }
        let temps = initial.unwrap_or_else(|| net.initial().to_vec());
        if temps.len() != net.len() {
            return Err(ThermalError::Invalid(format!("{} initial temperatures for {} nodes", temps.len(), net.len())));
        }
        Ok(Self { net, dt, t: t0, temps, solver: LinearSolver::new(net, kind), steps: 0 })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temps
    }

    /// Advances by `Δt` with the patch values at the new time level.
    pub fn step(&mut self, bc: &[PatchBc]) -> Result<StepRecord, ThermalError> {
        check_bc(self.net, bc)?;
        let step = self.steps;
        let diverged = |reason: String| ThermalError::SolverDivergence { step, reason };
        let cap = self.net.capacity();
        let mut diag = self.net.bc_diagonal(&bc.iter().map(|v| v.alpha).collect::<Vec<_>>());
        for (d, c) in diag.iter_mut().zip(cap) {
            *d += c / self.dt;
        }
        self.solver.set_values(&self.net.values_with_diagonal(&diag)).map_err(diverged)?;
        let mut b = bc_rhs(self.net, bc);
        for ((bi, c), t) in b.iter_mut().zip(cap).zip(&self.temps) {
            *bi += c / self.dt * t;
        }
        let next = self.solver.solve(&b, &self.temps).map_err(diverged)?;
        if let Some(i) = next.iter().position(|t| !t.is_finite()) {
            return Err(diverged(format!("non-finite temperature at node {}", self.net.node_ids()[i])));
        }

        let active = bc.iter().filter(|v| v.alpha > 0.0).map(|v| v.t_eff);
        let (lo, hi) = self
            .temps
            .iter()
            .copied()
            .chain(active)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        let slack = 1e-9 * hi.abs().max(1.0);
        if let Some(i) = next.iter().position(|&t| t < lo - slack || t > hi + slack) {
            return Err(diverged(format!(
                "maximum principle violated at node {}: {} outside [{lo}, {hi}]",
                self.net.node_ids()[i],
                next[i]
            )));
        }

        let storage_rate = cap.iter().zip(next.iter().zip(&self.temps)).map(|(c, (n, o))| c * (n - o)).sum::<f64>() / self.dt;
        let patch_flux = patch_flux(self.net, bc, &next);
        self.temps = next;
        self.t += self.dt;
        self.steps += 1;
        Ok(StepRecord { t: self.t, patch_flux, storage_rate })
    }

    /// Steps through `series` (one per channel of the network, sharing a
    /// uniform grid); the first sample is the initial time level.
    pub fn run(
        net: &'a ThermalNetwork,
        series: &[BoundaryConditionSeries],
        initial: Option<Vec<f64>>,
        kind: SolverKind,
    ) -> Result<RunHistory, ThermalError> {
        let by_channel = channel_series(net, series)?;
        let grid = by_channel.first().map(|s| s.times().to_vec()).unwrap_or_default();
        if grid.len() < 2 {
            return Err(ThermalError::SeriesMismatch("need at least two time levels".into()));
        }
        let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        if grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(ThermalError::SeriesMismatch("time grid is not uniform".into()));
        }
        let mut solver = TransientSolver::new(net, dt, grid[0], initial, kind)?;
        let mut hist = RunHistory::new(net, dt, grid[0], solver.temperatures().to_vec());
        let mut bc = vec![PatchBc { alpha: 0.0, t_eff: 0.0 }; net.patches().len()];
        for k in 1..grid.len() {
            for (v, p) in bc.iter_mut().zip(net.patches()) {
                let s = by_channel[p.channel];
                *v = PatchBc { alpha: s.alpha()[k], t_eff: s.t_eff()[k] };
            }
            let rec = solver.step(&bc)?;
            hist.push(rec, solver.temperatures());
        }
        Ok(hist)
    }
}

fn channel_series<'s>(net: &ThermalNetwork, series: &'s [BoundaryConditionSeries]) -> Result<Vec<&'s BoundaryConditionSeries>, ThermalError> {
    let mut out: Vec<&BoundaryConditionSeries> = Vec::with_capacity(net.channels().len());
    for ch in net.channels() {
        let s = series.iter().find(|s| s.zone() == ch).ok_or_else(|| ThermalError::DanglingPatch {
            patch: net.patches().iter().find(|p| &net.channels()[p.channel] == ch).map(|p| p.id.clone()).unwrap_or_default(),
            reason: format!("no boundary-condition series for channel {ch}"),
        })?;
        if let Some(first) = out.first() {
            let same = first.len() == s.len()
                && first.times().iter().zip(s.times()).all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
            if !same {
                return Err(ThermalError::SeriesMismatch(format!("{} and {} use different time grids", first.zone(), s.zone())));
            }
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(ThermalError::SeriesMismatch("network has no patches to drive".into()));
    }
    Ok(out)
}

/// Node temperatures at every time level plus per-step patch fluxes.
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub node_ids: Vec<String>,
    pub patch_ids: Vec<String>,
    /// Channel of each patch.
    pub patch_channels: Vec<String>,
    pub dt: f64,
    pub t: Vec<f64>,
    /// `temperatures[level][node]`, level 0 is the initial state.
    pub temperatures: Vec<Vec<f64>>,
    /// `patch_flux[step][patch]` \[W\].
    pub patch_flux: Vec<Vec<f64>>,
    pub storage_rate: Vec<f64>,
}

impl RunHistory {
    pub fn new(net: &ThermalNetwork, dt: f64, t0: f64, initial: Vec<f64>) -> Self {
        Self {
            node_ids: net.node_ids().to_vec(),
            patch_ids: net.patches().iter().map(|p| p.id.clone()).collect(),
            patch_channels: net.patches().iter().map(|p| net.channels()[p.channel].clone()).collect(),
            dt,
            t: vec![t0],
            temperatures: vec![initial],
            patch_flux: Vec::new(),
            storage_rate: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: StepRecord, temps: &[f64]) {
        self.t.push(rec.t);
        self.temperatures.push(temps.to_vec());
        self.patch_flux.push(rec.patch_flux);
        self.storage_rate.push(rec.storage_rate);
    }

    pub fn steps(&self) -> usize {
        self.patch_flux.len()
    }

    pub fn node_series(&self, node: usize) -> Vec<f64> {
        self.temperatures.iter().map(|row| row[node]).collect()
    }

    pub fn final_temperatures(&self) -> &[f64] {
        self.temperatures.last().expect("history holds the initial level")
    }

    /// Per-step heat flow into the solid summed over patches whose channel
    /// satisfies `pred` \[W\].
    pub fn channel_heat(&self, pred: impl Fn(&str) -> bool) -> Vec<f64> {
        let mask: Vec<bool> = self.patch_channels.iter().map(|c| pred(c)).collect();
        self.patch_flux.iter().map(|row| row.iter().zip(&mask).filter(|(_, m)| **m).map(|(q, _)| q).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBalance {
    /// Net boundary inflow minus storage rate per step \[W\].
    pub per_step: Vec<f64>,
    /// `Σ residual·Δt` \[J\].
    pub cumulative: f64,
    /// `Σ Σ|q|·Δt` over all patches \[J\].
    pub throughput: f64,
}

impl EnergyBalance {
    pub fn relative(&self) -> f64 {
        if self.throughput > 0.0 {
            self.cumulative.abs() / self.throughput
        } else {
            0.0
        }
    }

    pub fn max_step_residual(&self) -> f64 {
        self.per_step.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn energy_balance(hist: &RunHistory) -> EnergyBalance {
    let per_step: Vec<f64> =
        hist.patch_flux.iter().zip(&hist.storage_rate).map(|(q, s)| q.iter().sum::<f64>() - s).collect();
    let cumulative = per_step.iter().sum::<f64>() * hist.dt;
    let throughput = hist.patch_flux.iter().map(|q| q.iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>() * hist.dt;
    EnergyBalance { per_step, cumulative, throughput }
}

#[cfg(test)]
mod tests {
    use super::super::network::tests::{link, node, patch};
    use super::super::{assemble, NetworkDescription};
    use super::*;

    fn single(c: f64, area: f64) -> ThermalNetwork {
        assemble(&NetworkDescription {
            nodes: vec![node("s", c)],
            patches: vec![patch("p", "s", area, "gas")],
            ..Default::default()
        })
        .unwrap()
    }

    fn slab(scale: f64) -> (ThermalNetwork, Vec<PatchBc>) {
        let g = 2.0 * 150.0 / 0.01 * scale;
        let net = assemble(&NetworkDescription {
            nodes: vec![node("hot", 1.0), node("mid", 1.0), node("cold", 1.0)],
            links: vec![link("hot", "mid", g), link("mid", "cold", g)],
            patches: vec![patch("gas", "hot", 1.0, "gas"), patch("water", "cold", 1.0, "water")],
            probes: vec![],
        })
        .unwrap();
        let bc = vec![PatchBc { alpha: 1000.0 * scale, t_eff: 2000.0 }, PatchBc { alpha: 5000.0 * scale, t_eff: 373.0 }];
        (net, bc)
    }

    #[test]
    fn single_node_equilibrium() {
        let net = single(10.0, 0.3);
        let t = steady_solve(&net, &[PatchBc { alpha: 700.0, t_eff: 456.5 }], SolverKind::Auto).unwrap();
        assert_eq!(t, vec![456.5]);
        let e = steady_solve(&net, &[PatchBc { alpha: 0.0, t_eff: 456.5 }], SolverKind::Auto);
        assert!(matches!(e, Err(ThermalError::SingularSystem(_))));
    }

    #[test]
    fn slab_series_resistance() {
        let (net, bc) = slab(1.0);
        for kind in [SolverKind::Direct, SolverKind::Iterative] {
            let t = steady_solve(&net, &bc, kind).unwrap();
            let q = 1000.0 * (2000.0 - t[0]);
            let closed = 1627.0 / (1.0 / 1000.0 + 0.01 / 150.0 + 1.0 / 5000.0);
            assert!((q / closed - 1.0).abs() < 1e-9, "{kind:?}: {q}");
            assert!((q / 1.2845e6 - 1.0).abs() < 1e-3);
            assert!((5000.0 * (t[2] - 373.0) / q - 1.0).abs() < 1e-9);
        }
        let (net2, bc2) = slab(2.0);
        let t1 = steady_solve(&net, &bc, SolverKind::Auto).unwrap();
        let t2 = steady_solve(&net2, &bc2, SolverKind::Auto).unwrap();
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - b).abs() < 1e-9 * a);
        }
    }

    fn step_error(dt: f64) -> (f64, f64) {
        let net = single(500.0, 1.0);
        let mut s = TransientSolver::new(&net, dt, 0.0, None, SolverKind::Auto).unwrap();
        let n = (10.0 / dt).round() as usize;
        for _ in 0..n {
            s.step(&[PatchBc { alpha: 50.0, t_eff: 400.0 }]).unwrap();
        }
        let t = s.temperatures()[0];
        (t, t - (400.0 - 100.0 * (-1.0f64).exp()))
    }

    #[test]
    fn first_order_step_response() {
        let (t, _) = step_error(DEFAULT_DT);
        assert!((t - 363.21).abs() < 0.5, "{t}");
        let e: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dt| step_error(dt).1).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn unchanged_boundary_keeps_state() {
        let (net, bc) = slab(1.0);
        let steady = steady_solve(&net, &bc, SolverKind::Auto).unwrap();
        let mut s = TransientSolver::new(&net, 0.015, 0.0, Some(steady.clone()), SolverKind::Auto).unwrap();
        for _ in 0..20 {
            let rec = s.step(&bc).unwrap();
            assert!(rec.storage_rate.abs() < 1e-6);
        }
        for (a, b) in s.temperatures().iter().zip(&steady) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn transient_conserves_energy_and_reaches_steady() {
        let (net, bc) = slab(1.0);
        let t: Vec<f64> = (0..2001).map(|i| i as f64 * 0.05).collect();
        let gas = BoundaryConditionSeries::constant("gas", t.clone(), 1000.0, 2000.0).unwrap();
        let alpha: Vec<f64> = t.iter().map(|x| 5000.0 + 1000.0 * (x * 0.7).sin()).collect();
        let water = BoundaryConditionSeries::new("water", t.clone(), alpha, vec![373.0; t.len()]).unwrap();
        let hist = TransientSolver::run(&net, &[gas.clone(), water], None, SolverKind::Auto).unwrap();
        let eb = energy_balance(&hist);
        assert!(eb.relative() < 1e-9, "{}", eb.relative());
        let water_const = BoundaryConditionSeries::constant("water", t, 5000.0, 373.0).unwrap();
        let hist = TransientSolver::run(&net, &[gas, water_const], None, SolverKind::Auto).unwrap();
        let steady = steady_solve(&net, &bc, SolverKind::Auto).unwrap();
        for (a, b) in hist.final_temperatures().iter().zip(&steady) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn missing_channel_is_dangling() {
        let (net, _) = slab(1.0);
        let gas = BoundaryConditionSeries::constant("gas", vec![0.0, 1.0], 1.0, 300.0).unwrap();
        assert!(matches!(TransientSolver::run(&net, &[gas], None, SolverKind::Auto), Err(ThermalError::DanglingPatch { .. })));
    }

    #[test]
    fn direct_and_iterative_agree() {
        let n = 40;
        let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let net = assemble(&NetworkDescription {
            nodes: ids.iter().map(|i| node(i, 5.0 + 1.0)).collect(),
            links: (0..n - 1).map(|i| link(&ids[i], &ids[i + 1], 3.0 + i as f64)).collect(),
            patches: vec![patch("a", &ids[0], 0.01, "g"), patch("b", &ids[n - 1], 0.02, "w")],
            probes: vec![],
        })
        .unwrap();
        let bc = [PatchBc { alpha: 900.0, t_eff: 1100.0 }, PatchBc { alpha: 8000.0, t_eff: 360.0 }];
        let d = steady_solve(&net, &bc, SolverKind::Direct).unwrap();
        let it = steady_solve(&net, &bc, SolverKind::Iterative).unwrap();
        for (a, b) in d.iter().zip(&it) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}
