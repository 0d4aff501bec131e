use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::derivative;

use super::{
    burn_fraction, burnt_volume_fraction, characteristic_velocity, cycle_aggregate, htc_trace,
    require_positive, solve_tke, CycleError, CycleResult, CylinderGeometry, HtcClosure,
    LengthScale, PressureTrace, VelocityInputs, GAS_CONSTANT,
};

/// Valve and ignition events \[° crank angle, firing TDC = 0\].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTiming {
    pub ignition_deg: f64,
    pub ivc_deg: f64,
    pub evo_deg: f64,
}

impl Default for CycleTiming {
    fn default() -> Self {
        Self { ignition_deg: -29.0, ivc_deg: -140.0, evo_deg: 130.0 }
    }
}

impl CycleTiming {
    pub fn validate(&self) -> Result<(), CycleError> {
        let ok = -360.0 <= self.ivc_deg
            && self.ivc_deg < self.ignition_deg
            && self.ignition_deg < self.evo_deg
            && self.evo_deg <= 360.0;
        if ok {
            Ok(())
        } else {
            Err(CycleError::InvalidGeometry(format!(
                "timing must satisfy IVC < ignition < EVO within ±360°, got {self:?}"
            )))
        }
    }
}

/// Fully parameterized in-cylinder model for one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleModel {
    pub geometry: CylinderGeometry,
    pub closure: HtcClosure,
    pub timing: CycleTiming,
    pub eps_c: f64,
    /// `k_ivc = c_ivc · v̄_p²`.
    pub c_ivc: f64,
    pub kappa_ub: f64,
    /// Mean molar mass of the charge \[kg/mol\].
    pub molar_mass: f64,
    pub length: LengthScale,
}

/// Crank-resolved intermediate traces of one analyzed cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAnalysis {
    pub volume: Vec<f64>,
    pub t_gas: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t_unburnt: Vec<f64>,
    pub k: Vec<f64>,
    pub velocity: Vec<f64>,
    pub moles: f64,
    pub tke_clamped_steps: usize,
    pub result: CycleResult,
}

/// Two-zone quantities entering the velocity model.
pub(crate) struct Combustion<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub t_unburnt: &'a [f64],
}

pub(crate) struct ChainOutput {
    pub k: Vec<f64>,
    pub velocity: Vec<f64>,
    pub alpha: Vec<f64>,
    pub clamped: usize,
}

impl CycleModel {
    pub fn validate(&self) -> Result<(), CycleError> {
        self.geometry.validate()?;
        self.closure.validate()?;
        self.timing.validate()?;
        if !(self.eps_c >= 0.0 && self.eps_c.is_finite()) {
            return Err(CycleError::NonPositiveInput { name: "eps_c", value: self.eps_c });
        }
        if !(self.c_ivc >= 0.0 && self.c_ivc.is_finite()) {
            return Err(CycleError::NonPositiveInput { name: "c_ivc", value: self.c_ivc });
        }
        if !(self.kappa_ub >= 1.0) {
            return Err(CycleError::NonPositiveInput { name: "kappa_ub", value: self.kappa_ub });
        }
        require_positive("molar mass", self.molar_mass)?;
        Ok(())
    }

    /// Amount of substance trapped per cycle from the per-stroke masses \[mg\].
    pub fn moles(&self, m_air: f64, m_fuel: f64) -> f64 {
        (m_air + m_fuel) * 1e-6 / self.molar_mass
    }

    pub fn k_ivc(&self, rpm: f64) -> f64 {
        let vp = self.geometry.mean_piston_speed(rpm);
        self.c_ivc * vp * vp
    }

    pub fn times(angles: &[f64], rpm: f64) -> Vec<f64> {
        angles.iter().map(|a| a / (6.0 * rpm)).collect()
    }

    pub fn volumes(&self, angles: &[f64]) -> Vec<f64> {
        angles.iter().map(|&a| self.geometry.volume(a)).collect()
    }

    /// Turbulence, velocity and HTC for given pressure, temperature and
    /// combustion traces. `closed` is the inclusive index range over which
    /// `k` is integrated; outside it `k` is held at its initial value.
    pub(crate) fn htc_chain(
        &self,
        angles: &[f64],
        pressure: &[f64],
        t_gas: &[f64],
        comb: Option<Combustion<'_>>,
        closed: (usize, usize),
        rpm: f64,
    ) -> Result<ChainOutput, CycleError> {
        let n = angles.len();
        let times = Self::times(angles, rpm);
        let k0 = self.k_ivc(rpm);
        let geom = self.geometry;
        let omega_deg = 6.0 * rpm;
        let (c0, c1) = closed;
        let tke = solve_tke(
            &times[c0..=c1],
            |t| {
                let a = t * omega_deg;
                (geom.volume(a), geom.volume_rate(a, rpm))
            },
            self.length,
            k0,
            self.eps_c,
        )?;
        let mut k = vec![k0; n];
        k[c0..=c1].copy_from_slice(&tke.k);

        let (dx, dy) = match &comb {
            Some(c) => (derivative(&times, c.x), derivative(&times, c.y)),
            None => (vec![0.0; n], vec![0.0; n]),
        };
        let velocity: Vec<f64> = (0..n)
            .map(|i| {
                let (y, tu) = match &comb {
                    Some(c) => (c.y[i], c.t_unburnt[i]),
                    None => (0.0, t_gas[i]),
                };
                characteristic_velocity(&VelocityInputs {
                    k: k[i],
                    piston_speed: geom.piston_speed(angles[i], rpm),
                    y,
                    dy_dt: dy[i],
                    dx_dt: dx[i],
                    t_unburnt: tu,
                    t_gas: t_gas[i],
                    bore: geom.bore,
                })
            })
            .collect();
        let alpha = htc_trace(pressure, &velocity, t_gas, &self.closure)?;
        Ok(ChainOutput { k, velocity, alpha, clamped: tke.clamped_steps })
    }

    /// Full fired-cycle chain for one pressure cycle against a motored cycle.
    pub fn analyze_cycle(
        &self,
        angles: &[f64],
        fired: &[f64],
        motored: &[f64],
        rpm: f64,
        m_air: f64,
        m_fuel: f64,
    ) -> Result<CycleAnalysis, CycleError> {
        require_positive("engine speed", rpm)?;
        let n = angles.len();
        if fired.len() != n || motored.len() != n {
            return Err(CycleError::GridMismatch("pressure and angle grids differ".into()));
        }
        let idx = |deg: f64| angles.partition_point(|&a| a < deg).min(n - 1);
        let (i_ivc, i_ign, i_evo) = (
            idx(self.timing.ivc_deg),
            idx(self.timing.ignition_deg),
            idx(self.timing.evo_deg),
        );
        let moles = self.moles(m_air, m_fuel);
        require_positive("trapped charge", moles)?;
        let volume = self.volumes(angles);
        let t_gas: Vec<f64> = fired
            .iter()
            .zip(&volume)
            .map(|(&p, &v)| p * v / (moles * GAS_CONSTANT))
            .collect();

        let burn = burn_fraction(fired, motored, &volume, Some((i_ign, i_evo + 1)))?;
        let mut x = burn.x;
        for xi in x.iter_mut().take(i_ign + 1) {
            *xi = 0.0;
        }
        let (p_ign, t_ign) = (fired[i_ign], t_gas[i_ign]);
        let expo = (self.kappa_ub - 1.0) / self.kappa_ub;
        let t_unburnt: Vec<f64> = (0..n)
            .map(|i| if i < i_ign { t_gas[i] } else { t_ign * (fired[i] / p_ign).powf(expo) })
            .collect();
        let y = burnt_volume_fraction(&x, &t_unburnt, &t_gas);

        let chain = self.htc_chain(
            angles,
            fired,
            &t_gas,
            Some(Combustion { x: &x, y: &y, t_unburnt: &t_unburnt }),
            (i_ivc, i_evo),
            rpm,
        )?;
        let result = cycle_aggregate(angles, &chain.alpha, &t_gas, rpm)?;
        Ok(CycleAnalysis {
            volume,
            t_gas,
            x,
            y,
            t_unburnt,
            k: chain.k,
            velocity: chain.velocity,
            moles,
            tke_clamped_steps: chain.clamped,
            result,
        })
    }

    /// Cycle results for every cycle of a stationary measurement, in cycle order.
    pub fn analyze_trace(
        &self,
        fired: &PressureTrace,
        motored: &PressureTrace,
        m_air: f64,
        m_fuel: f64,
    ) -> Result<Vec<CycleResult>, CycleError> {
        if fired.crank_angle() != motored.crank_angle() {
            return Err(CycleError::GridMismatch("fired and motored crank-angle grids differ".into()));
        }
        let reference = motored
            .cycle(0)
            .ok_or_else(|| CycleError::Malformed("motored trace has no cycle".into()))?;
        let angles = fired.crank_angle();
        fired
            .cycles()
            .par_iter()
            .map(|p| {
                self.analyze_cycle(angles, p, reference, fired.engine_speed(), m_air, m_fuel)
                    .map(|a| a.result)
            })
            .collect()
    }

    /// Copy of the model whose closure scale makes the ensemble-mean cycle
    /// HTC of the given measurement equal `target`.
    pub fn calibrated(
        &self,
        fired: &PressureTrace,
        motored: &PressureTrace,
        m_air: f64,
        m_fuel: f64,
        target: f64,
    ) -> Result<Self, CycleError> {
        let results = self.analyze_trace(fired, motored, m_air, m_fuel)?;
        let achieved = results.iter().map(|r| r.alpha_mean).sum::<f64>() / results.len() as f64;
        let mut out = self.clone();
        out.closure = self.closure.rescaled(achieved, target)?;
        Ok(out)
    }
}
