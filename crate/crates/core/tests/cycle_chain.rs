use enginebc::cycle_model::{burn_fraction, CycleModel, CycleTiming, CylinderGeometry, HtcClosure, LengthScale};
use enginebc::state_space::EngineState;
use enginebc::synthetic::{stationary_traces, wiebe_cycle, TraceGenSpec, WiebeParams};

fn geom() -> CylinderGeometry {
    CylinderGeometry { bore: 0.086, stroke: 0.066, conrod_length: 0.12, compression_ratio: 12.0, n_cylinders: 2 }
}

fn model() -> CycleModel {
    CycleModel {
        geometry: geom(),
        closure: HtcClosure::woschni_default(0.086, 0.78),
        timing: CycleTiming::default(),
        eps_c: 1.0,
        c_ivc: 0.5,
        kappa_ub: 1.33,
        molar_mass: 0.0289,
        length: LengthScale::SphereEquivalent,
    }
}

#[test]
fn wiebe_burn_fraction_recovered() {
    let g = geom();
    for res in [0.5, 1.0] {
        let a: Vec<f64> = (0..(720.0 / res) as usize).map(|i| -360.0 + i as f64 * res).collect();
        for w in [WiebeParams::default(), WiebeParams { start_deg: -10.0, duration_deg: 70.0, a: 5.0, m: 1.5 }] {
            let (fired, x) = wiebe_cycle(&g, &a, 0.95e5, 1.33, 1100.0, &w);
            let (motored, _) = wiebe_cycle(&g, &a, 0.95e5, 1.33, 0.0, &w);
            let vol: Vec<f64> = a.iter().map(|&d| g.volume(d)).collect();
            let ign = a.partition_point(|&d| d < -29.0);
            let evo = a.partition_point(|&d| d < 130.0);
            let rec = burn_fraction(&fired, &motored, &vol, Some((ign, evo + 1))).unwrap();
            let err = rec.x.iter().zip(&x).map(|(r, e)| (r - e).abs()).fold(0.0, f64::max);
            assert!(err < 0.02, "resolution {res}: L-inf error {err}");
        }
    }
}

#[test]
fn fired_ensemble_chain() {
    let m = model();
    let s = EngineState::new(6000.0, 340.0, 310.0, 68.0, 27.0);
    let spec = TraceGenSpec { n_cycles: 8, ..Default::default() };
    let (fired, motored) = stationary_traces(&m.geometry, &s, &spec, -28.0, 3).unwrap();
    let res = m.analyze_trace(&fired, &motored, s.m_air, s.m_fuel).unwrap();
    assert_eq!(res.len(), 8);
    for r in &res {
        assert!(r.alpha_mean > 100.0 && r.alpha_mean < 1e4, "{}", r.alpha_mean);
        assert!(r.t_eff > 400.0 && r.t_eff < 3000.0, "{}", r.t_eff);
    }
    let a = m.analyze_cycle(fired.crank_angle(), &fired.cycles()[0], &motored.cycles()[0], 6000.0, s.m_air, s.m_fuel).unwrap();
    assert!(a.x.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(a.k.iter().all(|k| *k >= 0.0));
    println!("alpha_mean {} t_eff {}", res[0].alpha_mean, res[0].t_eff);
}
