use serde::{Deserialize, Serialize};

use super::{require_positive, CycleError, GAS_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderGeometry {
    /// Bore \[m\].
    pub bore: f64,
    /// Stroke \[m\].
    pub stroke: f64,
    /// Connecting-rod length \[m\].
    pub conrod_length: f64,
    pub compression_ratio: f64,
    pub n_cylinders: u32,
}

impl CylinderGeometry {
    pub fn validate(&self) -> Result<(), CycleError> {
        let bad = |m: String| Err(CycleError::InvalidGeometry(m));
        for (name, v) in [
            ("bore", self.bore),
            ("stroke", self.stroke),
            ("conrod_length", self.conrod_length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.compression_ratio > 1.0 && self.compression_ratio.is_finite()) {
            return bad(format!("compression ratio must exceed 1, got {}", self.compression_ratio));
        }
        if self.conrod_length <= 0.5 * self.stroke {
            return bad("connecting rod must be longer than the crank radius".into());
        }
        if self.n_cylinders == 0 {
            return bad("engine needs at least one cylinder".into());
        }
        Ok(())
    }

    pub fn piston_area(&self) -> f64 {
        std::f64::consts::PI * 0.25 * self.bore * self.bore
    }

    pub fn swept_volume(&self) -> f64 {
        self.piston_area() * self.stroke
    }

    pub fn clearance_volume(&self) -> f64 {
        self.swept_volume() / (self.compression_ratio - 1.0)
    }

    pub fn max_volume(&self) -> f64 {
        self.compression_ratio * self.clearance_volume()
    }

    pub fn crank_radius(&self) -> f64 {
        0.5 * self.stroke
    }

    /// Piston travel from TDC \[m\].
    fn travel(&self, crank_deg: f64) -> f64 {
        let a = self.crank_radius();
        let l = self.conrod_length;
        let th = crank_deg.to_radians();
        let s = th.sin();
        a + l - (a * th.cos() + (l * l - a * a * s * s).sqrt())
    }

    /// d(travel)/dθ per radian.
    fn travel_rate(&self, crank_deg: f64) -> f64 {
        let a = self.crank_radius();
        let l = self.conrod_length;
        let th = crank_deg.to_radians();
        let (s, c) = th.sin_cos();
        a * s + a * a * s * c / (l * l - a * a * s * s).sqrt()
    }

    pub fn volume(&self, crank_deg: f64) -> f64 {
        self.clearance_volume() + self.piston_area() * self.travel(crank_deg)
    }

    /// dV/dt \[m³/s\] at engine speed `rpm`.
    pub fn volume_rate(&self, crank_deg: f64, rpm: f64) -> f64 {
        self.piston_area() * self.travel_rate(crank_deg) * omega(rpm)
    }

    /// Instantaneous piston speed \[m/s\], positive while moving away from TDC.
    pub fn piston_speed(&self, crank_deg: f64, rpm: f64) -> f64 {
        self.travel_rate(crank_deg) * omega(rpm)
    }

    pub fn mean_piston_speed(&self, rpm: f64) -> f64 {
        2.0 * self.stroke * rpm / 60.0
    }
}

fn omega(rpm: f64) -> f64 {
    rpm * std::f64::consts::PI / 30.0
}

pub fn cylinder_volume(geom: &CylinderGeometry, crank_deg: f64) -> f64 {
    geom.volume(crank_deg)
}

/// `T̄_g = pV/(NR)`.
pub fn mean_gas_temperature(p: f64, volume: f64, moles: f64) -> Result<f64, CycleError> {
    require_positive("pressure", p)?;
    require_positive("volume", volume)?;
    require_positive("amount of substance", moles)?;
    Ok(p * volume / (moles * GAS_CONSTANT))
}
