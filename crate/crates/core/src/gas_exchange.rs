//! Convective heat transfer at the valves and ports.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{interp_sorted, trapezoid};

#[derive(Debug, Error)]
pub enum GasExchangeError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
    #[error("flow area is zero over the valve-open window")]
    ZeroArea,
    #[error("malformed table: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn positive(name: &'static str, v: f64) -> Result<(), GasExchangeError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GasExchangeError::NonPositiveInput { name, value: v })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), GasExchangeError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GasExchangeError::NonPositiveInput { name, value: v })
    }
}

pub const EXHAUST_VALVE_COEFF: f64 = 1.84;
/// Exhaust-valve coefficient reduced by 40 %.
pub const INTAKE_VALVE_COEFF: f64 = 1.84 * 0.6;

fn valve_nu(coeff: f64, re_v: f64, d_over_l: f64) -> Result<f64, GasExchangeError> {
    non_negative("Re_v", re_v)?;
    positive("D_v/l_v", d_over_l)?;
    Ok(coeff * re_v.powf(0.58) * d_over_l.powf(0.2))
}

/// `Nu_v = 1.84 Re_v^0.58 (D_v/l_v)^0.2`, both based on the valve lift.
pub fn nu_exhaust_valve(re_v: f64, d_over_l: f64) -> Result<f64, GasExchangeError> {
    valve_nu(EXHAUST_VALVE_COEFF, re_v, d_over_l)
}

pub fn nu_intake_valve(re_v: f64, d_over_l: f64) -> Result<f64, GasExchangeError> {
    valve_nu(INTAKE_VALVE_COEFF, re_v, d_over_l)
}

/// Fully developed intake port, `Nu = c·Re`.
pub fn nu_intake_port(re: f64, c: f64) -> Result<f64, GasExchangeError> {
    non_negative("Re", re)?;
    positive("c", c)?;
    Ok(c * re)
}

/// Coefficient `c` placing the intake port on a target Nusselt number.
pub fn calibrate_intake_port(re: f64, target_nu: f64) -> Result<f64, GasExchangeError> {
    positive("Re", re)?;
    positive("target Nu", target_nu)?;
    Ok(target_nu / re)
}

/// `Nu = √(8 Re_j Pr / π)` based on the duct diameter and jet velocity.
pub fn nu_exhaust_port(re_j: f64, pr: f64) -> Result<f64, GasExchangeError> {
    positive("Re_j", re_j)?;
    positive("Pr", pr)?;
    Ok((8.0 * re_j * pr / std::f64::consts::PI).sqrt())
}

/// Continuity `v = ṁ / (ρ A)`.
pub fn jet_velocity_from_rate(mass_flow: f64, density: f64, area: f64) -> Result<f64, GasExchangeError> {
    non_negative("mass flow", mass_flow)?;
    positive("density", density)?;
    if !(area > 0.0) {
        return Err(GasExchangeError::ZeroArea);
    }
    Ok(mass_flow / (density * area))
}

/// Mean jet velocity over the open window when `m_per_stroke` \[mg\] passes
/// the valve once per cycle at `rpm`. `open_area` holds `(crank °, area m²)`
/// samples of the window.
pub fn jet_velocity(
    m_per_stroke: f64,
    rpm: f64,
    open_area: &[(f64, f64)],
    density: f64,
) -> Result<f64, GasExchangeError> {
    non_negative("mass per stroke", m_per_stroke)?;
    positive("engine speed", rpm)?;
    if open_area.len() < 2 {
        return Err(GasExchangeError::ZeroArea);
    }
    let deg: Vec<f64> = open_area.iter().map(|p| p.0).collect();
    let area: Vec<f64> = open_area.iter().map(|p| p.1).collect();
    let span = deg[deg.len() - 1] - deg[0];
    let mean_area = trapezoid(&deg, &area) / span;
    if !(mean_area > 0.0) {
        return Err(GasExchangeError::ZeroArea);
    }
    let t_open = span / (6.0 * rpm);
    jet_velocity_from_rate(m_per_stroke * 1e-6 / t_open, density, mean_area)
}

/// `α = Nu·λ_g/L`.
pub fn htc_from_nu(nu: f64, length_scale: f64, lambda_g: f64) -> Result<f64, GasExchangeError> {
    positive("length scale", length_scale)?;
    positive("gas conductivity", lambda_g)?;
    non_negative("Nu", nu)?;
    Ok(nu * lambda_g / length_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasProps {
    /// Kinematic viscosity \[m²/s\].
    pub nu: f64,
    /// Thermal conductivity \[W/(m K)\].
    pub lambda: f64,
    pub pr: f64,
}

impl GasProps {
    /// Temperature conductivity `a = ν/Pr` \[m²/s\].
    pub fn diffusivity(&self) -> f64 {
        self.nu / self.pr
    }
}

/// Gas properties tabulated over temperature, interpolated linearly and
/// held constant beyond the table ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasTable {
    pub t: Vec<f64>,
    pub props: Vec<GasProps>,
}

impl GasTable {
    pub fn new(t: Vec<f64>, props: Vec<GasProps>) -> Result<Self, GasExchangeError> {
        if t.is_empty() || t.len() != props.len() {
            return Err(GasExchangeError::Malformed("gas table needs matching, non-empty columns".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GasExchangeError::Malformed("gas table temperatures must increase".into()));
        }
        for p in &props {
            positive("nu", p.nu)?;
            positive("lambda", p.lambda)?;
            positive("Pr", p.pr)?;
        }
        Ok(Self { t, props })
    }

    /// Air at 1 bar between 300 K and 1500 K.
    pub fn air() -> Self {
        let rows = [
            (300.0, 1.57e-5, 0.0263, 0.707),
            (500.0, 3.79e-5, 0.0407, 0.684),
            (700.0, 6.82e-5, 0.0524, 0.695),
            (900.0, 1.04e-4, 0.0620, 0.720),
            (1100.0, 1.44e-4, 0.0715, 0.728),
            (1500.0, 2.40e-4, 0.0870, 0.719),
        ];
        Self {
            t: rows.iter().map(|r| r.0).collect(),
            props: rows.iter().map(|r| GasProps { nu: r.1, lambda: r.2, pr: r.3 }).collect(),
        }
    }

    pub fn at(&self, t: f64) -> GasProps {
        let col = |f: fn(&GasProps) -> f64| {
            let ys: Vec<f64> = self.props.iter().map(f).collect();
            interp_sorted(&self.t, &ys, t)
        };
        GasProps { nu: col(|p| p.nu), lambda: col(|p| p.lambda), pr: col(|p| p.pr) }
    }

    /// Reads `T_K,nu_m2s,lambda_WmK,Pr`.
    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, GasExchangeError> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rdr);
        let mut t = Vec::new();
        let mut props = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| GasExchangeError::Malformed(format!("bad value `{s}`"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 4 {
                return Err(GasExchangeError::Malformed("gas table rows need 4 fields".into()));
            }
            t.push(v[0]);
            props.push(GasProps { nu: v[1], lambda: v[2], pr: v[3] });
        }
        Self::new(t, props)
    }

    pub fn load(path: &Path) -> Result<Self, GasExchangeError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Valve lift and flow area over crank angle for one valve group.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveLift {
    pub crank_deg: Vec<f64>,
    pub lift: Vec<f64>,
    pub area: Vec<f64>,
}

impl ValveLift {
    pub fn new(crank_deg: Vec<f64>, lift: Vec<f64>, area: Vec<f64>) -> Result<Self, GasExchangeError> {
        if crank_deg.len() < 2 || lift.len() != crank_deg.len() || area.len() != crank_deg.len() {
            return Err(GasExchangeError::Malformed("valve lift needs ≥ 2 matching rows".into()));
        }
        if crank_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GasExchangeError::Malformed("valve lift angles must increase".into()));
        }
        if lift.iter().chain(&area).any(|&v| !(v >= 0.0)) {
            return Err(GasExchangeError::Malformed("negative lift or area".into()));
        }
        Ok(Self { crank_deg, lift, area })
    }

    /// Sine-shaped lift between opening and closing angle; area is the
    /// curtain area `π D_v l_v`.
    pub fn sinusoidal(open_deg: f64, close_deg: f64, max_lift: f64, valve_diameter: f64, samples: usize) -> Self {
        let n = samples.max(3);
        let crank_deg: Vec<f64> = (0..n).map(|i| open_deg + (close_deg - open_deg) * i as f64 / (n - 1) as f64).collect();
        let lift: Vec<f64> = crank_deg
            .iter()
            .map(|a| max_lift * (std::f64::consts::PI * (a - open_deg) / (close_deg - open_deg)).sin().max(0.0))
            .collect();
        let area = lift.iter().map(|l| std::f64::consts::PI * valve_diameter * l).collect();
        Self { crank_deg, lift, area }
    }

    /// Reads `alpha_cr_deg,lift_m,area_m2`.
    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, GasExchangeError> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rdr);
        let (mut a, mut l, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for rec in csv.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| GasExchangeError::Malformed(format!("bad value `{x}`"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err(GasExchangeError::Malformed("valve lift rows need 3 fields".into()));
            }
            a.push(v[0]);
            l.push(v[1]);
            s.push(v[2]);
        }
        Self::new(a, l, s)
    }

    fn open_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.lift.len()).filter(|&i| self.lift[i] > 0.0)
    }

    /// Mean lift over the open samples.
    pub fn mean_open_lift(&self) -> f64 {
        let (s, n) = self.open_indices().fold((0.0, 0usize), |(s, n), i| (s + self.lift[i], n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// `(crank °, area)` pairs spanning the open window.
    pub fn open_window(&self) -> Vec<(f64, f64)> {
        let first = self.lift.iter().position(|&l| l > 0.0);
        let last = self.lift.iter().rposition(|&l| l > 0.0);
        match (first, last) {
            (Some(f), Some(l)) => {
                let lo = f.saturating_sub(1);
                let hi = (l + 1).min(self.lift.len() - 1);
                (lo..=hi).map(|i| (self.crank_deg[i], self.area[i])).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Geometry of one valve/port pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortGeometry {
    /// Valve head diameter \[m\].
    pub valve_diameter: f64,
    pub duct_diameter: f64,
    pub port_length: f64,
}

impl PortGeometry {
    pub fn validate(&self) -> Result<(), GasExchangeError> {
        positive("valve diameter", self.valve_diameter)?;
        positive("duct diameter", self.duct_diameter)?;
        positive("port length", self.port_length)
    }

    pub fn duct_area(&self) -> f64 {
        std::f64::consts::PI * 0.25 * self.duct_diameter * self.duct_diameter
    }
}

/// Cycle-mean HTC at the four gas-exchange surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasExchangeHtc {
    pub intake_valve: f64,
    pub exhaust_valve: f64,
    pub intake_port: f64,
    pub exhaust_port: f64,
}

/// Inputs and constants of the gas-exchange surfaces of one cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct GasExchangeModel {
    pub intake: PortGeometry,
    pub exhaust: PortGeometry,
    pub intake_lift: ValveLift,
    pub exhaust_lift: ValveLift,
    pub gas: GasTable,
    /// Calibration coefficient of the intake port correlation.
    pub intake_port_coeff: f64,
    /// Specific gas constant of the working gas \[J/(kg K)\].
    pub r_specific: f64,
    /// Manifold pressures \[Pa\].
    pub intake_pressure: f64,
    pub exhaust_pressure: f64,
}

impl GasExchangeModel {
    /// Evaluates the correlations at cycle-mean conditions. Intake
    /// quantities use `t_int`; exhaust quantities use `t_exhaust`. Masses
    /// are per stroke \[mg\].
    pub fn evaluate(
        &self,
        rpm: f64,
        m_intake: f64,
        m_exhaust: f64,
        t_int: f64,
        t_exhaust: f64,
    ) -> Result<GasExchangeHtc, GasExchangeError> {
        positive("intake temperature", t_int)?;
        positive("exhaust temperature", t_exhaust)?;
        let gi = self.gas.at(t_int);
        let ge = self.gas.at(t_exhaust);
        let rho_i = self.intake_pressure / (self.r_specific * t_int);
        let rho_e = self.exhaust_pressure / (self.r_specific * t_exhaust);

        let valve = |lift: &ValveLift, m: f64, rho: f64, g: &GasProps, d_v: f64, nu_f: fn(f64, f64) -> Result<f64, GasExchangeError>| {
            let window = lift.open_window();
            let v = jet_velocity(m, rpm, &window, rho)?;
            let l_v = lift.mean_open_lift();
            positive("mean valve lift", l_v)?;
            let nu = nu_f(v * l_v / g.nu, d_v / l_v)?;
            htc_from_nu(nu, l_v, g.lambda)
        };
        let intake_valve = valve(&self.intake_lift, m_intake, rho_i, &gi, self.intake.valve_diameter, nu_intake_valve)?;
        let exhaust_valve =
            valve(&self.exhaust_lift, m_exhaust, rho_e, &ge, self.exhaust.valve_diameter, nu_exhaust_valve)?;

        let duct_re = |lift: &ValveLift, m: f64, rho: f64, g: &GasProps, p: &PortGeometry| -> Result<f64, GasExchangeError> {
            let window = lift.open_window();
            let span = window.last().map(|w| w.0).unwrap_or(0.0) - window.first().map(|w| w.0).unwrap_or(0.0);
            if !(span > 0.0) {
                return Err(GasExchangeError::ZeroArea);
            }
            let mdot = m * 1e-6 * 6.0 * rpm / span;
            let v = jet_velocity_from_rate(mdot, rho, p.duct_area())?;
            Ok(v * p.duct_diameter / g.nu)
        };
        let re_i = duct_re(&self.intake_lift, m_intake, rho_i, &gi, &self.intake)?;
        let intake_port = htc_from_nu(nu_intake_port(re_i, self.intake_port_coeff)?, self.intake.duct_diameter, gi.lambda)?;
        let re_e = duct_re(&self.exhaust_lift, m_exhaust, rho_e, &ge, &self.exhaust)?;
        let exhaust_port = if re_e > 0.0 {
            htc_from_nu(nu_exhaust_port(re_e, ge.pr)?, self.exhaust.duct_diameter, ge.lambda)?
        } else {
            0.0
        };
        Ok(GasExchangeHtc { intake_valve, exhaust_valve, intake_port, exhaust_port })
    }
}
