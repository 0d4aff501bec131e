//! Transformation of stationary full-load densities to transient states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expectation::{bracket_speed, SpeedBracket};
use crate::histogram::{Histogram, HistogramError};
use crate::state_space::EngineState;

#[derive(Debug, Error)]
pub enum PartLoadError {
    #[error("no stationary reference near {0} rpm")]
    MissingReference(f64),
    #[error("state ratio {name} must be positive, got {value}")]
    NonPositiveRatio { name: &'static str, value: f64 },
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// Ratio closures of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartLoadConfig {
    /// Temperature rise of a stoichiometric charge \[K\].
    pub delta_theta: f64,
    /// Stoichiometric air/fuel mass ratio.
    pub stoich_air_fuel: f64,
}

impl Default for PartLoadConfig {
    fn default() -> Self {
        Self { delta_theta: 2000.0, stoich_air_fuel: 14.7 }
    }
}

impl PartLoadConfig {
    /// Fuel/air equivalence ratio `φ`.
    pub fn equivalence(&self, s: &EngineState) -> f64 {
        if s.m_air > 0.0 {
            s.m_fuel / s.m_air * self.stoich_air_fuel
        } else {
            0.0
        }
    }

    fn charge_temperature(&self, s: &EngineState) -> f64 {
        s.t_int + self.delta_theta * self.equivalence(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRatios {
    pub r_p: f64,
    pub r_v: f64,
    pub r_t: f64,
}

impl StateRatios {
    pub const IDENTITY: StateRatios = StateRatios { r_p: 1.0, r_v: 1.0, r_t: 1.0 };

    pub fn componentwise(&self, other: &StateRatios) -> StateRatios {
        StateRatios { r_p: self.r_p * other.r_p, r_v: self.r_v * other.r_v, r_t: self.r_t * other.r_t }
    }
}

pub fn state_ratios(current: &EngineState, stationary: &EngineState, cfg: &PartLoadConfig) -> Result<StateRatios, PartLoadError> {
    if !(stationary.n_engine > 0.0 && stationary.m_air > 0.0) {
        return Err(PartLoadError::MissingReference(current.n_engine));
    }
    let r_t = cfg.charge_temperature(current) / cfg.charge_temperature(stationary);
    let r_v = current.n_engine / stationary.n_engine;
    let r_p = current.m_air / stationary.m_air * r_t;
    for (name, value) in [("r_p", r_p), ("r_v", r_v), ("r_T", r_t)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(PartLoadError::NonPositiveRatio { name, value });
        }
    }
    Ok(StateRatios { r_p, r_v, r_t })
}

/// `β = r_p^m r_v^m r_T^{0.75−1.62m}`.
pub fn beta(ratios: &StateRatios, m: f64) -> f64 {
    ratios.r_p.powf(m) * ratios.r_v.powf(m) * ratios.r_t.powf(0.75 - 1.62 * m)
}

/// Realization-space scaling `α → β α` of a density whose first axis is `α`.
pub fn transform_pdf(pdf: &Histogram, beta: f64) -> Result<Histogram, PartLoadError> {
    let mut f = vec![1.0; pdf.axes().len()];
    f[0] = beta;
    Ok(pdf.scaled(&f)?)
}

/// Scales the `(α, T_eff)` density by `β` on the HTC axis and `r_T` on the
/// temperature axis.
pub fn transform_htc_pdf(pdf: &Histogram, ratios: &StateRatios, m: f64) -> Result<Histogram, PartLoadError> {
    Ok(pdf.scaled(&[beta(ratios, m), ratios.r_t])?)
}

/// Full-load reference state at `n_engine`, linearly interpolated between
/// the bracketing stationary points (sorted by speed).
pub fn interpolate_stationary(points: &[EngineState], n_engine: f64) -> Result<(EngineState, SpeedBracket), PartLoadError> {
    let speeds: Vec<f64> = points.iter().map(|p| p.n_engine).collect();
    let b = bracket_speed(&speeds, n_engine).map_err(|_| PartLoadError::MissingReference(n_engine))?;
    if b.clamped {
        log::warn!("engine speed {n_engine} rpm outside the stationary range, clamped");
    }
    if b.a == 0.0 {
        return Ok((points[b.left], b));
    }
    let (l, r) = (points[b.left].to_array(), points[b.right].to_array());
    let s = std::array::from_fn(|d| (1.0 - b.a) * l[d] + b.a * r[d]);
    Ok((EngineState::from_array(s), b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::BinEdges;

    fn stat() -> EngineState {
        EngineState::new(7000.0, 500.0, 310.0, 90.0, 38.0)
    }

    #[test]
    fn identity_at_reference() {
        let r = state_ratios(&stat(), &stat(), &PartLoadConfig::default()).unwrap();
        assert_eq!(r, StateRatios::IDENTITY);
        assert_eq!(beta(&r, 0.78), 1.0);
    }

    #[test]
    fn half_air_same_mixture() {
        let mut s = stat();
        s.m_air *= 0.5;
        s.m_fuel *= 0.5;
        let r = state_ratios(&s, &stat(), &PartLoadConfig::default()).unwrap();
        assert!((r.r_p - 0.5).abs() < 1e-15);
        assert_eq!(r.r_v, 1.0);
        assert!((r.r_t - 1.0).abs() < 1e-15);
        let mut f = stat();
        f.n_engine *= 1.1;
        let r = state_ratios(&f, &stat(), &PartLoadConfig::default()).unwrap();
        assert!((r.r_v - 1.1).abs() < 1e-15 && r.r_p == 1.0 && r.r_t == 1.0);
    }

    #[test]
    fn beta_spot_values() {
        assert!((beta(&StateRatios { r_p: 0.5, r_v: 1.0, r_t: 1.0 }, 0.78) - 0.582).abs() < 1e-3);
        let b = beta(&StateRatios { r_p: 1.0, r_v: 1.0, r_t: 2.0 }, 0.78);
        assert!((b - 2f64.powf(-0.5136)).abs() < 1e-12);
        assert!((b - 0.700).abs() < 1e-3);
    }

    #[test]
    fn single_bin_transform() {
        let h = Histogram::from_counts(vec![BinEdges::new(vec![950.0, 1050.0]).unwrap()], vec![3]).unwrap();
        let t = transform_pdf(&h, 2.0).unwrap();
        assert_eq!(t.axes()[0].as_slice(), &[1900.0, 2100.0]);
        assert_eq!(t.density()[0], h.density()[0] / 2.0);
        assert_eq!(transform_pdf(&h, 1.0).unwrap(), h);
        assert!(transform_pdf(&h, 0.0).is_err());
    }

    #[test]
    fn stationary_interpolation() {
        let pts = vec![
            EngineState::new(6000.0, 400.0, 300.0, 80.0, 30.0),
            EngineState::new(7000.0, 500.0, 320.0, 90.0, 40.0),
        ];
        let (s, b) = interpolate_stationary(&pts, 6500.0).unwrap();
        assert_eq!(b.a, 0.5);
        assert_eq!(s, EngineState::new(6500.0, 450.0, 310.0, 85.0, 35.0));
        let (s, _) = interpolate_stationary(&pts, 6000.0).unwrap();
        assert_eq!(s, pts[0]);
        assert!(interpolate_stationary(&[], 6000.0).is_err());
    }
}
