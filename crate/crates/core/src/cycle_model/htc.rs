use serde::{Deserialize, Serialize};

use crate::numerics::trapezoid;

use super::CycleError;

/// Point values entering the characteristic velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityInputs {
    /// Turbulent kinetic energy \[m²/s²\].
    pub k: f64,
    /// Piston speed \[m/s\].
    pub piston_speed: f64,
    /// Burnt volume fraction.
    pub y: f64,
    pub dy_dt: f64,
    pub dx_dt: f64,
    pub t_unburnt: f64,
    pub t_gas: f64,
    /// Bore \[m\].
    pub bore: f64,
}

impl VelocityInputs {
    /// Combustion convection `y^{1/6}·(B/4)·(dy/dt − (T_ub/T̄_g)·dx/dt)`.
    pub fn combustion_velocity(&self) -> f64 {
        if self.y <= 0.0 {
            return 0.0;
        }
        self.y.powf(1.0 / 6.0)
            * 0.25
            * self.bore
            * (self.dy_dt - self.t_unburnt / self.t_gas * self.dx_dt)
    }
}

/// `v = √((8/3)k + v_p² + v_c²)`.
pub fn characteristic_velocity(inp: &VelocityInputs) -> f64 {
    let vc = inp.combustion_velocity();
    (8.0 / 3.0 * inp.k.max(0.0) + inp.piston_speed * inp.piston_speed + vc * vc).sqrt()
}

/// Power-law heat-transfer closure `α = C·p^m·v^m·T̄_g^{0.75−1.62m}` with `p`
/// in Pa, `v` in m/s and `T̄_g` in K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtcClosure {
    pub scale: f64,
    pub exponent: f64,
}

impl HtcClosure {
    pub fn new(scale: f64, exponent: f64) -> Result<Self, CycleError> {
        let c = Self { scale, exponent };
        c.validate()?;
        Ok(c)
    }

    /// Classic Woschni magnitude `130·B^{−0.2}` converted from bar to Pa at
    /// exponent `m`.
    pub fn woschni_default(bore: f64, exponent: f64) -> Self {
        Self { scale: 130.0 * bore.powf(-0.2) * 1e-5f64.powf(exponent), exponent }
    }

    pub fn validate(&self) -> Result<(), CycleError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CycleError::InvalidClosure(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(CycleError::InvalidClosure(format!(
                "exponent must lie in (0, 1), got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    pub fn temperature_exponent(&self) -> f64 {
        0.75 - 1.62 * self.exponent
    }

    pub fn eval(&self, p: f64, v: f64, t_gas: f64) -> f64 {
        let m = self.exponent;
        self.scale * p.powf(m) * v.powf(m) * t_gas.powf(self.temperature_exponent())
    }

    /// Returns a copy whose scale is chosen so that `achieved` becomes `target`.
    pub fn rescaled(&self, achieved: f64, target: f64) -> Result<Self, CycleError> {
        super::require_positive("achieved HTC", achieved)?;
        super::require_positive("target HTC", target)?;
        Ok(Self { scale: self.scale * target / achieved, exponent: self.exponent })
    }
}

pub fn htc_trace(
    pressure: &[f64],
    velocity: &[f64],
    t_gas: &[f64],
    closure: &HtcClosure,
) -> Result<Vec<f64>, CycleError> {
    if pressure.len() != velocity.len() || pressure.len() != t_gas.len() {
        return Err(CycleError::GridMismatch(format!(
            "pressure {}, velocity {}, temperature {} samples",
            pressure.len(),
            velocity.len(),
            t_gas.len()
        )));
    }
    Ok(pressure
        .iter()
        .zip(velocity)
        .zip(t_gas)
        .map(|((&p, &v), &t)| closure.eval(p, v, t))
        .collect())
}

/// Cycle-level Newton boundary condition.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    /// Crank-resolved HTC \[W/(m² K)\].
    pub alpha: Vec<f64>,
    /// Time-averaged HTC over the cycle.
    pub alpha_mean: f64,
    /// Flux-weighted gas temperature `∫αT̄_g dt / ∫α dt` \[K\].
    pub t_eff: f64,
    pub engine_speed: f64,
}

const CYCLE_DEG: f64 = 720.0;

/// Integral of a periodic trace over one cycle. Grids that stop one step
/// short of 720° are closed periodically.
fn cycle_integral(angles: &[f64], y: &[f64]) -> Result<f64, CycleError> {
    let n = angles.len();
    if n < 2 {
        return Err(CycleError::IncompleteCycle { span: 0.0 });
    }
    let span = angles[n - 1] - angles[0];
    let tol = 1e-9 * CYCLE_DEG;
    let max_step = angles.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if span > CYCLE_DEG + tol {
        return Err(CycleError::GridMismatch(format!("trace spans {span}°, more than one cycle")));
    }
    let mut total = trapezoid(angles, y);
    if span < CYCLE_DEG - tol {
        let gap = CYCLE_DEG - span;
        if gap > 1.5 * max_step {
            return Err(CycleError::IncompleteCycle { span });
        }
        total += 0.5 * gap * (y[n - 1] + y[0]);
    }
    Ok(total)
}

pub fn cycle_aggregate(
    angles: &[f64],
    alpha: &[f64],
    t_gas: &[f64],
    engine_speed: f64,
) -> Result<CycleResult, CycleError> {
    if alpha.len() != angles.len() || t_gas.len() != angles.len() {
        return Err(CycleError::GridMismatch("aggregate inputs differ in length".into()));
    }
    let a_int = cycle_integral(angles, alpha)?;
    let at: Vec<f64> = alpha.iter().zip(t_gas).map(|(a, t)| a * t).collect();
    let at_int = cycle_integral(angles, &at)?;
    super::require_positive("cycle-integrated HTC", a_int)?;
    let t_eff = at_int / a_int;
    // convex combination, clip round-off
    let (tmin, tmax) = t_gas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    Ok(CycleResult {
        alpha: alpha.to_vec(),
        alpha_mean: a_int / CYCLE_DEG,
        t_eff: t_eff.clamp(tmin, tmax),
        engine_speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -360.0 + 720.0 * i as f64 / n as f64).collect()
    }

    #[test]
    fn velocity_without_combustion() {
        let inp = VelocityInputs {
            k: 6.0,
            piston_speed: 10.0,
            y: 0.0,
            dy_dt: 50.0,
            dx_dt: 40.0,
            t_unburnt: 700.0,
            t_gas: 1500.0,
            bore: 0.086,
        };
        assert_eq!(characteristic_velocity(&inp), (16.0f64 + 100.0).sqrt());
        let tdc = VelocityInputs { k: 0.0, piston_speed: 0.0, ..inp };
        assert_eq!(characteristic_velocity(&tdc), 0.0);
        let burnt = VelocityInputs { y: 1.0, dy_dt: 0.0, dx_dt: 0.0, ..inp };
        assert!((characteristic_velocity(&burnt) - 10.77).abs() < 5e-3);
    }

    #[test]
    fn combustion_velocity_sign_and_magnitude() {
        let inp = VelocityInputs {
            k: 0.0,
            piston_speed: 0.0,
            y: 0.64,
            dy_dt: 100.0,
            dx_dt: 60.0,
            t_unburnt: 800.0,
            t_gas: 1600.0,
            bore: 0.08,
        };
        let expected = 0.64f64.powf(1.0 / 6.0) * 0.02 * (100.0 - 0.5 * 60.0);
        assert!((inp.combustion_velocity() - expected).abs() < 1e-14);
        assert!((characteristic_velocity(&inp) - expected).abs() < 1e-14);
    }

    #[test]
    fn pressure_homogeneity() {
        let c = HtcClosure::new(0.03, 0.78).unwrap();
        let ratio = c.eval(2e6, 10.0, 1000.0) / c.eval(1e6, 10.0, 1000.0);
        assert!((ratio - 2f64.powf(0.78)).abs() < 1e-12);
        assert!((ratio - 1.717).abs() < 1e-3);
        assert_eq!(c.eval(1e6, 0.0, 1000.0), 0.0);
    }

    #[test]
    fn rescaling_hits_target() {
        let c = HtcClosure::new(0.03, 0.78).unwrap();
        let peak = c.eval(5e6, 15.0, 2200.0);
        let unit = c.rescaled(peak, 1.0).unwrap();
        assert!((unit.eval(5e6, 15.0, 2200.0) - 1.0).abs() < 1e-12);
        assert!(HtcClosure::new(1.0, 1.2).is_err());
    }

    #[test]
    fn aggregate_constants() {
        let a = grid(720);
        let r = cycle_aggregate(&a, &vec![800.0; 720], &vec![900.0; 720], 6000.0).unwrap();
        assert!((r.alpha_mean - 800.0).abs() < 1e-9);
        assert!((r.t_eff - 900.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_two_level_flux_weighting() {
        let a = grid(720);
        let alpha: Vec<f64> = (0..720).map(|i| if i < 360 { 500.0 } else { 1500.0 }).collect();
        let t: Vec<f64> = (0..720).map(|i| if i < 360 { 800.0 } else { 1200.0 }).collect();
        let r = cycle_aggregate(&a, &alpha, &t, 6000.0).unwrap();
        // the two level changes cost one trapezoid panel each
        assert!((r.alpha_mean - 1000.0).abs() < 1e-9);
        assert!((r.t_eff - 1100.0).abs() < 0.5);
    }

    #[test]
    fn incomplete_cycle_rejected() {
        let a: Vec<f64> = (0..360).map(|i| i as f64).collect();
        assert!(matches!(
            cycle_aggregate(&a, &vec![1.0; 360], &vec![1.0; 360], 1.0),
            Err(CycleError::IncompleteCycle { .. })
        ));
    }

    #[test]
    fn refinement_invariance() {
        let f = |x: f64| 1000.0 + 800.0 * (-(x / 40.0).powi(2)).exp();
        let coarse: Vec<f64> = grid(720);
        let fine: Vec<f64> = grid(7200);
        let t = |x: f64| 900.0 + 0.5 * x.abs();
        let rc = cycle_aggregate(
            &coarse,
            &coarse.iter().map(|&x| f(x)).collect::<Vec<_>>(),
            &coarse.iter().map(|&x| t(x)).collect::<Vec<_>>(),
            6000.0,
        )
        .unwrap();
        let rf = cycle_aggregate(
            &fine,
            &fine.iter().map(|&x| f(x)).collect::<Vec<_>>(),
            &fine.iter().map(|&x| t(x)).collect::<Vec<_>>(),
            6000.0,
        )
        .unwrap();
        assert!((rc.alpha_mean / rf.alpha_mean - 1.0).abs() < 1e-3);
    }
}
