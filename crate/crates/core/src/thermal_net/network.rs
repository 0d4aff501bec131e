use std::collections::HashMap;

use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use super::ThermalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalNode {
    pub id: String,
    /// Heat capacity \[J/K\].
    pub capacity: f64,
    /// Initial temperature \[K\].
    pub t_init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductiveLink {
    pub a: String,
    pub b: String,
    /// Conductance \[W/K\].
    pub conductance: f64,
}

/// Wetted surface attached to one node; `channel` names the boundary
/// condition series that drives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePatch {
    pub id: String,
    pub node: String,
    /// \[m²\]
    pub area: f64,
    pub channel: String,
}

/// Named measuring point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub node: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkDescription {
    #[serde(rename = "node", default)]
    pub nodes: Vec<ThermalNode>,
    #[serde(rename = "link", default)]
    pub links: Vec<ConductiveLink>,
    #[serde(rename = "patch", default)]
    pub patches: Vec<SurfacePatch>,
    #[serde(rename = "probe", default)]
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchIndex {
    pub id: String,
    pub node: usize,
    pub area: f64,
    /// Position in [`ThermalNetwork::channels`].
    pub channel: usize,
}

/// Assembled network. The conduction matrix stores every diagonal entry
/// explicitly so that boundary terms can be added without touching the
/// sparsity pattern.
#[derive(Debug, Clone)]
pub struct ThermalNetwork {
    ids: Vec<String>,
    capacity: Vec<f64>,
    initial: Vec<f64>,
    conduction: CscMatrix<f64>,
    diag_pos: Vec<usize>,
    patches: Vec<PatchIndex>,
    channels: Vec<String>,
    probes: Vec<(String, usize)>,
}

impl ThermalNetwork {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|n| n == id)
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Conduction matrix `K` (row sums zero).
    pub fn conduction(&self) -> &CscMatrix<f64> {
        &self.conduction
    }

    pub fn patches(&self) -> &[PatchIndex] {
        &self.patches
    }

    /// Distinct channel ids in first-use order.
    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn probes(&self) -> &[(String, usize)] {
        &self.probes
    }

    /// Per-node boundary coupling `Σ αA` for per-patch `α`.
    pub fn bc_diagonal(&self, alpha: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for (p, a) in self.patches.iter().zip(alpha) {
            d[p.node] += a * p.area;
        }
        d
    }

    /// `K + diag(extra)` sharing the conduction pattern.
    pub(crate) fn values_with_diagonal(&self, extra: &[f64]) -> Vec<f64> {
        let mut v = self.conduction.values().to_vec();
        for (&pos, e) in self.diag_pos.iter().zip(extra) {
            v[pos] += e;
        }
        v
    }

    /// Symmetry, non-positive off-diagonals and weak diagonal dominance of
    /// `K + diag(bc)`.
    pub fn check_m_matrix(&self, bc: &[f64]) -> Result<(), ThermalError> {
        let k = &self.conduction;
        let n = self.len();
        let mut offsum = vec![0.0; n];
        let mut diag = bc.to_vec();
        diag.resize(n, 0.0);
        let mut scale = 0.0f64;
        for (i, j, &v) in k.triplet_iter() {
            if i == j {
                diag[i] += v;
                continue;
            }
            if v > 0.0 {
                return Err(ThermalError::NotMMatrix(format!("positive off-diagonal at ({i}, {j})")));
            }
            let vt = k.get_entry(j, i).map(|e| e.into_value()).unwrap_or(0.0);
            if (v - vt).abs() > 1e-12 * v.abs() {
                return Err(ThermalError::NotMMatrix(format!("asymmetric entry at ({i}, {j})")));
            }
            offsum[i] += v.abs();
            scale = scale.max(v.abs());
        }
        for i in 0..n {
            if bc.get(i).is_some_and(|&b| b < 0.0) {
                return Err(ThermalError::NotMMatrix(format!("negative boundary coupling at {}", self.ids[i])));
            }
            if diag[i] < offsum[i] - 1e-12 * scale.max(1.0) {
                return Err(ThermalError::NotMMatrix(format!("row {} is not diagonally dominant", self.ids[i])));
            }
        }
        Ok(())
    }
}

pub fn assemble(desc: &NetworkDescription) -> Result<ThermalNetwork, ThermalError> {
    build(desc, None)
}

/// Like [`assemble`], and additionally requires every patch channel to be
/// among `channels` and at least one node to attach them to.
pub fn assemble_for_channels(desc: &NetworkDescription, channels: &[String]) -> Result<ThermalNetwork, ThermalError> {
    build(desc, Some(channels))
}

fn build(desc: &NetworkDescription, available: Option<&[String]>) -> Result<ThermalNetwork, ThermalError> {
    if desc.nodes.is_empty() {
        let first = desc
            .patches
            .first()
            .map(|p| p.id.clone())
            .or_else(|| available.and_then(|c| c.first().cloned()));
        return match first {
            Some(patch) => Err(ThermalError::DanglingPatch { patch, reason: "network has no nodes to attach to".into() }),
            None => Err(ThermalError::EmptyNetwork),
        };
    }
    let mut index = HashMap::new();
    for (i, n) in desc.nodes.iter().enumerate() {
        if !(n.capacity > 0.0 && n.capacity.is_finite()) {
            return Err(ThermalError::Invalid(format!("node {}: capacity must be positive, got {}", n.id, n.capacity)));
        }
        if !(n.t_init > 0.0 && n.t_init.is_finite()) {
            return Err(ThermalError::Invalid(format!("node {}: initial temperature {}", n.id, n.t_init)));
        }
        if index.insert(n.id.as_str(), i).is_some() {
            return Err(ThermalError::Invalid(format!("duplicate node id {}", n.id)));
        }
    }
    let n = desc.nodes.len();
    let lookup = |id: &str, what: &str| {
        index.get(id).copied().ok_or_else(|| ThermalError::Invalid(format!("{what} references unknown node {id}")))
    };

    let mut coo = CooMatrix::new(n, n);
    for i in 0..n {
        coo.push(i, i, 0.0);
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for l in &desc.links {
        let (a, b) = (lookup(&l.a, "link")?, lookup(&l.b, "link")?);
        if a == b {
            return Err(ThermalError::Invalid(format!("self-link on node {}", l.a)));
        }
        if !(l.conductance > 0.0 && l.conductance.is_finite()) {
            return Err(ThermalError::Invalid(format!("link {}-{}: conductance {}", l.a, l.b, l.conductance)));
        }
        let g = l.conductance;
        coo.push(a, a, g);
        coo.push(b, b, g);
        coo.push(a, b, -g);
        coo.push(b, a, -g);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let root = find(&mut parent, 0);
    if let Some(i) = (0..n).find(|&i| find(&mut parent, i) != root) {
        return Err(ThermalError::DisconnectedNode(desc.nodes[i].id.clone()));
    }

    let mut channels: Vec<String> = Vec::new();
    let mut patches = Vec::with_capacity(desc.patches.len());
    for p in &desc.patches {
        let node = index.get(p.node.as_str()).copied().ok_or_else(|| ThermalError::DanglingPatch {
            patch: p.id.clone(),
            reason: format!("unknown node {}", p.node),
        })?;
        if !(p.area > 0.0 && p.area.is_finite()) {
            return Err(ThermalError::Invalid(format!("patch {}: area must be positive, got {}", p.id, p.area)));
        }
        if let Some(av) = available {
            if !av.contains(&p.channel) {
                return Err(ThermalError::DanglingPatch {
                    patch: p.id.clone(),
                    reason: format!("no boundary-condition series for channel {}", p.channel),
                });
            }
        }
        let channel = match channels.iter().position(|c| c == &p.channel) {
            Some(c) => c,
            None => {
                channels.push(p.channel.clone());
                channels.len() - 1
            }
        };
        patches.push(PatchIndex { id: p.id.clone(), node, area: p.area, channel });
    }
    let probes = desc
        .probes
        .iter()
        .map(|p| Ok((p.name.clone(), lookup(&p.node, "probe")?)))
        .collect::<Result<Vec<_>, ThermalError>>()?;

    let conduction = CscMatrix::from(&coo);
    let (offsets, rows, _) = conduction.csc_data();
    let diag_pos = (0..n)
        .map(|j| {
            let col = &rows[offsets[j]..offsets[j + 1]];
            offsets[j] + col.binary_search(&j).expect("diagonal entry is always present")
        })
        .collect();
    let net = ThermalNetwork {
        ids: desc.nodes.iter().map(|n| n.id.clone()).collect(),
        capacity: desc.nodes.iter().map(|n| n.capacity).collect(),
        initial: desc.nodes.iter().map(|n| n.t_init).collect(),
        conduction,
        diag_pos,
        patches,
        channels,
        probes,
    };
    net.check_m_matrix(&vec![0.0; n])?;
    Ok(net)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn node(id: &str, c: f64) -> ThermalNode {
        ThermalNode { id: id.into(), capacity: c, t_init: 300.0 }
    }

    pub(crate) fn link(a: &str, b: &str, g: f64) -> ConductiveLink {
        ConductiveLink { a: a.into(), b: b.into(), conductance: g }
    }

    pub(crate) fn patch(id: &str, node: &str, area: f64, channel: &str) -> SurfacePatch {
        SurfacePatch { id: id.into(), node: node.into(), area, channel: channel.into() }
    }

    fn dense(net: &ThermalNetwork, extra: &[f64]) -> Vec<Vec<f64>> {
        let n = net.len();
        let mut m = vec![vec![0.0; n]; n];
        let mut k = net.conduction().clone();
        k.values_mut().copy_from_slice(&net.values_with_diagonal(extra));
        for (i, j, v) in k.triplet_iter() {
            m[i][j] += v;
        }
        m
    }

    #[test]
    fn two_node_stencil() {
        let d = NetworkDescription {
            nodes: vec![node("a", 1.0), node("b", 1.0)],
            links: vec![link("a", "b", 7.0)],
            patches: vec![patch("p", "b", 2.0, "gas")],
            probes: vec![],
        };
        let net = assemble(&d).unwrap();
        assert_eq!(dense(&net, &[0.0, 0.0]), vec![vec![7.0, -7.0], vec![-7.0, 7.0]]);
        let bc = net.bc_diagonal(&[50.0]);
        assert_eq!(bc, vec![0.0, 100.0]);
        assert_eq!(dense(&net, &bc), vec![vec![7.0, -7.0], vec![-7.0, 107.0]]);
    }

    #[test]
    fn five_node_chain_is_tridiagonal() {
        let ids = ["n0", "n1", "n2", "n3", "n4"];
        let g = [1.0, 2.0, 3.0, 4.0];
        let d = NetworkDescription {
            nodes: ids.iter().map(|i| node(i, 1.0)).collect(),
            links: (0..4).map(|i| link(ids[i], ids[i + 1], g[i])).collect(),
            ..Default::default()
        };
        let net = assemble(&d).unwrap();
        let expected = vec![
            vec![1.0, -1.0, 0.0, 0.0, 0.0],
            vec![-1.0, 3.0, -2.0, 0.0, 0.0],
            vec![0.0, -2.0, 5.0, -3.0, 0.0],
            vec![0.0, 0.0, -3.0, 7.0, -4.0],
            vec![0.0, 0.0, 0.0, -4.0, 4.0],
        ];
        assert_eq!(dense(&net, &[0.0; 5]), expected);
        assert_eq!(net.conduction().nnz(), 13);
    }

    #[test]
    fn parallel_links_accumulate() {
        let d = NetworkDescription {
            nodes: vec![node("a", 1.0), node("b", 1.0)],
            links: vec![link("a", "b", 1.0), link("b", "a", 2.0)],
            ..Default::default()
        };
        assert_eq!(dense(&assemble(&d).unwrap(), &[0.0, 0.0])[0], vec![3.0, -3.0]);
    }

    #[test]
    fn topology_errors() {
        let d = NetworkDescription { nodes: vec![node("a", 1.0), node("b", 1.0)], ..Default::default() };
        assert!(matches!(assemble(&d), Err(ThermalError::DisconnectedNode(id)) if id == "b"));
        let d = NetworkDescription {
            nodes: vec![node("a", 1.0)],
            patches: vec![patch("p", "zz", 1.0, "gas")],
            ..Default::default()
        };
        assert!(matches!(assemble(&d), Err(ThermalError::DanglingPatch { .. })));
        let d = NetworkDescription { nodes: vec![node("a", 1.0)], patches: vec![patch("p", "a", 1.0, "gas")], ..Default::default() };
        assert!(assemble(&d).is_ok());
        assert!(matches!(assemble_for_channels(&d, &["water".into()]), Err(ThermalError::DanglingPatch { .. })));
        assert!(matches!(assemble(&NetworkDescription::default()), Err(ThermalError::EmptyNetwork)));
        assert!(matches!(
            assemble_for_channels(&NetworkDescription::default(), &["gas".into()]),
            Err(ThermalError::DanglingPatch { .. })
        ));
        let d = NetworkDescription { nodes: vec![node("a", 1.0)], links: vec![link("a", "a", 1.0)], ..Default::default() };
        assert!(matches!(assemble(&d), Err(ThermalError::Invalid(_))));
        let d = NetworkDescription { nodes: vec![node("a", 0.0)], ..Default::default() };
        assert!(matches!(assemble(&d), Err(ThermalError::Invalid(_))));
    }

    #[test]
    fn m_matrix_rejects_negative_coupling() {
        let d = NetworkDescription { nodes: vec![node("a", 1.0)], ..Default::default() };
        let net = assemble(&d).unwrap();
        assert!(net.check_m_matrix(&[1.0]).is_ok());
        assert!(net.check_m_matrix(&[-1.0]).is_err());
    }
}
