//! Lumped turbulent kinetic energy model.

use serde::{Deserialize, Serialize};

use crate::numerics::rk4_step;

use super::CycleError;

/// Eddy length scale closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthScale {
    /// Diameter of the sphere with the cylinder volume, `(6V/π)^{1/3}`.
    SphereEquivalent,
    /// Fixed length \[m\].
    Fixed(f64),
}

impl LengthScale {
    pub fn eval(&self, volume: f64) -> f64 {
        match *self {
            LengthScale::SphereEquivalent => (6.0 * volume / std::f64::consts::PI).cbrt(),
            LengthScale::Fixed(l) => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TkeSolution {
    /// Turbulent kinetic energy \[m²/s²\] at each requested time.
    pub k: Vec<f64>,
    /// Eddy length scale \[m\] at each requested time.
    pub length: Vec<f64>,
    /// Steps where the integrator would have produced a negative `k`.
    pub clamped_steps: usize,
}

/// Integrates `dk/dt = −(2/3)(k/V)dV/dt − ε_c k^{3/2}/l` with fixed-step RK4
/// between consecutive entries of `times`. `volume(t)` returns `(V, dV/dt)`.
pub fn solve_tke<F>(
    times: &[f64],
    volume: F,
    length: LengthScale,
    k_ivc: f64,
    eps_c: f64,
) -> Result<TkeSolution, CycleError>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(k_ivc >= 0.0 && k_ivc.is_finite()) {
        return Err(CycleError::NonPositiveInput { name: "k_ivc", value: k_ivc });
    }
    if !(eps_c >= 0.0 && eps_c.is_finite()) {
        return Err(CycleError::NonPositiveInput { name: "eps_c", value: eps_c });
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CycleError::GridMismatch("time grid must be strictly increasing".into()));
    }
    let rhs = |t: f64, k: f64| {
        let (v, dv) = volume(t);
        let k = k.max(0.0);
        -2.0 / 3.0 * k / v * dv - eps_c * k * k.sqrt() / length.eval(v)
    };
    let mut k = Vec::with_capacity(times.len());
    let mut lens = Vec::with_capacity(times.len());
    let mut clamped_steps = 0;
    let mut cur = k_ivc;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let h = t - times[i - 1];
            let next = rk4_step(&rhs, times[i - 1], cur, h);
            cur = if next < 0.0 {
                clamped_steps += 1;
                0.0
            } else {
                next
            };
        }
        k.push(cur);
        lens.push(length.eval(volume(t).0));
    }
    if clamped_steps > 0 {
        log::warn!("turbulent kinetic energy clamped to zero on {clamped_steps} steps");
    }
    Ok(TkeSolution { k, length: lens, clamped_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_state_stays_null() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 1e-4).collect();
        let s = solve_tke(&t, |_| (1e-4, 0.0), LengthScale::SphereEquivalent, 0.0, 3.0).unwrap();
        assert!(s.k.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn compression_production_closed_form() {
        // V(t) = V0 (1 − t/2) halves the volume at t = 1
        let v0 = 4e-4;
        let n = 2000;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let s = solve_tke(&t, |t| (v0 * (1.0 - 0.5 * t), -0.5 * v0), LengthScale::SphereEquivalent, 10.0, 0.0)
            .unwrap();
        let k_end = *s.k.last().unwrap();
        assert!((k_end - 10.0 * 2f64.powf(2.0 / 3.0)).abs() < 1e-8);
        assert!((k_end - 15.874).abs() < 1e-3);
    }

    #[test]
    fn pure_dissipation_closed_form() {
        let n = 200;
        let t: Vec<f64> = (0..=n).map(|i| 0.02 * i as f64 / n as f64).collect();
        let s = solve_tke(&t, |_| (1e-4, 0.0), LengthScale::Fixed(0.1), 100.0, 1.0).unwrap();
        for (ti, ki) in t.iter().zip(&s.k) {
            let exact = 100.0 / (1.0 + 10.0 * ti / 0.2).powi(2);
            assert!((ki - exact).abs() < 1e-6 * exact);
        }
        assert!((s.k[n] - 25.0).abs() < 1e-6 * 25.0);
    }

    #[test]
    fn rejects_negative_initial_condition() {
        assert!(solve_tke(&[0.0, 1.0], |_| (1.0, 0.0), LengthScale::Fixed(1.0), -1.0, 0.0).is_err());
    }
}
