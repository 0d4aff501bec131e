use super::{ConductiveLink, NetworkDescription, Probe, SurfacePatch, ThermalNode};

const T_INIT: f64 = 350.0;

/// Cylinder-head and liner network around the usual thermocouple
/// positions: chamber wall, liner shoulder, inlet and outlet channels and
/// the valve seat rings. 22 nodes per cylinder plus 6 shared block nodes.
///
/// Gas channels are `chamber_c{i}`, `intake_port_c{i}`, `exhaust_port_c{i}`,
/// `intake_valve_c{i}`, `exhaust_valve_c{i}`; water channels are
/// `water_head_in_c{i}`, `water_head_ex_c{i}`, `water_liner_c{i}` and
/// `water_rail`.
pub fn measuring_point_template(n_cylinders: usize) -> NetworkDescription {
    let mut d = NetworkDescription::default();
    let node = |d: &mut NetworkDescription, id: String, c: f64| {
        d.nodes.push(ThermalNode { id, capacity: c, t_init: T_INIT });
    };
    let link = |d: &mut NetworkDescription, a: &str, b: &str, g: f64| {
        d.links.push(ConductiveLink { a: a.into(), b: b.into(), conductance: g });
    };
    let patch = |d: &mut NetworkDescription, node: &str, area: f64, channel: String| {
        d.patches.push(SurfacePatch { id: format!("{node}@{channel}"), node: node.into(), area, channel });
    };

    for shared in [("head_deck", 400.0), ("head_gasket", 100.0), ("cam_carrier", 300.0), ("block", 800.0), ("block_skirt", 600.0), ("water_rail", 200.0)] {
        node(&mut d, shared.0.into(), shared.1);
    }
    link(&mut d, "head_deck", "cam_carrier", 15.0);
    link(&mut d, "head_deck", "head_gasket", 25.0);
    link(&mut d, "head_gasket", "block", 25.0);
    link(&mut d, "block", "block_skirt", 30.0);
    link(&mut d, "water_rail", "block", 20.0);
    patch(&mut d, "water_rail", 0.01, "water_rail".into());

    let parts = [
        ("chamber_surf", 30.0),
        ("chamber_mid", 60.0),
        ("chamber_back", 80.0),
        ("liner_top", 40.0),
        ("liner_shoulder", 60.0),
        ("liner_back", 80.0),
        ("intake_port_surf", 30.0),
        ("intake_port_mid", 50.0),
        ("intake_channel", 40.0),
        ("exhaust_port_surf", 30.0),
        ("exhaust_port_mid", 50.0),
        ("exhaust_channel", 40.0),
        ("intake_ring_a", 15.0),
        ("intake_ring_b", 25.0),
        ("exhaust_ring_a", 15.0),
        ("exhaust_ring_b", 25.0),
        ("intake_stem", 10.0),
        ("exhaust_stem", 10.0),
        ("bridge", 40.0),
        ("jacket_head_in", 120.0),
        ("jacket_head_ex", 120.0),
        ("jacket_liner", 150.0),
    ];
    let links = [
        ("chamber_surf", "chamber_mid", 60.0),
        ("chamber_mid", "chamber_back", 50.0),
        ("chamber_back", "jacket_head_in", 30.0),
        ("chamber_back", "jacket_head_ex", 30.0),
        ("chamber_surf", "liner_top", 20.0),
        ("liner_top", "liner_shoulder", 30.0),
        ("liner_shoulder", "liner_back", 30.0),
        ("liner_back", "jacket_liner", 40.0),
        ("intake_port_surf", "intake_port_mid", 40.0),
        ("intake_port_mid", "intake_channel", 30.0),
        ("intake_channel", "jacket_head_in", 30.0),
        ("exhaust_port_surf", "exhaust_port_mid", 40.0),
        ("exhaust_port_mid", "exhaust_channel", 30.0),
        ("exhaust_channel", "jacket_head_ex", 30.0),
        ("intake_ring_a", "intake_ring_b", 25.0),
        ("intake_ring_b", "chamber_mid", 20.0),
        ("intake_ring_b", "intake_stem", 5.0),
        ("intake_stem", "intake_port_mid", 5.0),
        ("exhaust_ring_a", "exhaust_ring_b", 25.0),
        ("exhaust_ring_b", "chamber_mid", 20.0),
        ("exhaust_ring_b", "exhaust_stem", 5.0),
        ("exhaust_stem", "exhaust_port_mid", 5.0),
        ("bridge", "chamber_mid", 20.0),
        ("bridge", "jacket_head_in", 15.0),
        ("bridge", "jacket_head_ex", 15.0),
    ];
    for c in 1..=n_cylinders {
        let id = |p: &str| format!("c{c}_{p}");
        for (p, cap) in parts {
            node(&mut d, id(p), cap);
        }
        for (a, b, g) in links {
            link(&mut d, &id(a), &id(b), g);
        }
        link(&mut d, &id("jacket_head_in"), "head_deck", 20.0);
        link(&mut d, &id("jacket_head_ex"), "head_deck", 20.0);
        link(&mut d, &id("jacket_liner"), "block", 30.0);
        for (p, area, ch) in [
            ("chamber_surf", 0.0075, "chamber"),
            ("liner_top", 0.003, "chamber"),
            ("intake_port_surf", 0.004, "intake_port"),
            ("exhaust_port_surf", 0.004, "exhaust_port"),
            ("intake_ring_a", 0.0008, "intake_valve"),
            ("exhaust_ring_a", 0.0008, "exhaust_valve"),
            ("jacket_head_in", 0.008, "water_head_in"),
            ("jacket_head_ex", 0.008, "water_head_ex"),
            ("jacket_liner", 0.012, "water_liner"),
        ] {
            patch(&mut d, &id(p), area, format!("{ch}_c{c}"));
        }
        for (name, p) in [
            ("liner_shoulder", "liner_shoulder"),
            ("inlet_channel", "intake_channel"),
            ("outlet_channel", "exhaust_channel"),
            ("intake_valve_ring", "intake_ring_b"),
            ("exhaust_valve_ring", "exhaust_ring_b"),
            ("chamber_wall", "chamber_mid"),
        ] {
            d.probes.push(Probe { name: format!("{name}_c{c}"), node: id(p) });
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal_net::{assemble, steady_solve, PatchBc, SolverKind};

    #[test]
    fn two_cylinder_template_solves() {
        let d = measuring_point_template(2);
        assert_eq!(d.nodes.len(), 50);
        let net = assemble(&d).unwrap();
        assert_eq!(net.channels().len(), 8 * 2 + 1);
        let bc: Vec<PatchBc> = d
            .patches
            .iter()
            .map(|p| if p.channel.starts_with("water") { PatchBc { alpha: 8000.0, t_eff: 360.0 } } else { PatchBc { alpha: 1200.0, t_eff: 950.0 } })
            .collect();
        let t = steady_solve(&net, &bc, SolverKind::Auto).unwrap();
        assert!(t.iter().all(|&v| v > 360.0 && v < 950.0));
        let surf = net.node_index("c1_chamber_surf").unwrap();
        let back = net.node_index("c1_chamber_back").unwrap();
        assert!(t[surf] > t[back]);
    }
}
