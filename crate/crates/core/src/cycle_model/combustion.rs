//! Burn-function analysis and the two-zone temperature split.

use super::{CycleError, PressureTrace};

/// Mass fraction burned over the crank-angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BurnFraction {
    pub x: Vec<f64>,
    /// Steps whose apparent combustion pressure rise was negative and clipped.
    pub clipped_steps: usize,
    /// Clipped share of the total positive increments.
    pub clipped_share: f64,
}

/// Pressure-ratio combustion analysis against a motored trace.
///
/// Per step the combustion pressure rise is what the fired pressure gains
/// beyond the motored compression ratio, `Δp_c = p_{i+1} − p_i·pm_{i+1}/pm_i`,
/// referenced to the mean step volume. The cumulative sum over `window`
/// (index range, inclusive start, exclusive end) is normalized to one.
pub fn burn_fraction(
    fired: &[f64],
    motored: &[f64],
    volume: &[f64],
    window: Option<(usize, usize)>,
) -> Result<BurnFraction, CycleError> {
    let n = fired.len();
    if motored.len() != n || volume.len() != n {
        return Err(CycleError::GridMismatch(format!(
            "fired {n}, motored {}, volume {} samples",
            motored.len(),
            volume.len()
        )));
    }
    for (i, (&pf, &pm)) in fired.iter().zip(motored).enumerate() {
        if !(pf > 0.0) {
            return Err(CycleError::NonPositivePressure { index: i, value: pf });
        }
        if !(pm > 0.0) {
            return Err(CycleError::NonPositivePressure { index: i, value: pm });
        }
    }
    let (start, end) = window.unwrap_or((0, n));
    let end = end.min(n);
    let mut x = vec![0.0; n];
    if fired == motored || end <= start + 1 {
        return Ok(BurnFraction { x, clipped_steps: 0, clipped_share: 0.0 });
    }

    let mut increments = vec![0.0; n];
    let mut positive = 0.0;
    let mut negative = 0.0;
    let mut clipped_steps = 0;
    for i in start..end - 1 {
        let dp = fired[i + 1] - fired[i] * (motored[i + 1] / motored[i]);
        let q = dp * 0.5 * (volume[i] + volume[i + 1]);
        if q < 0.0 {
            negative -= q;
            clipped_steps += 1;
        } else {
            positive += q;
            increments[i + 1] = q;
        }
    }
    let p_scale = fired.iter().cloned().fold(0.0, f64::max);
    let v_scale = volume.iter().cloned().fold(0.0, f64::max);
    if positive <= 1e-9 * p_scale * v_scale {
        return Ok(BurnFraction { x, clipped_steps: 0, clipped_share: 0.0 });
    }
    let clipped_share = negative / positive;
    if clipped_share > 0.05 {
        log::warn!(
            "negative apparent heat release over {clipped_steps} steps ({:.1}% of total) clipped",
            100.0 * clipped_share
        );
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += increments[i];
        x[i] = (acc / positive).min(1.0);
    }
    Ok(BurnFraction { x, clipped_steps, clipped_share })
}

/// Applies [`burn_fraction`] to every cycle of a fired trace against a
/// single-cycle motored trace on the same crank-angle grid.
pub fn burn_fraction_trace(
    fired: &PressureTrace,
    motored: &PressureTrace,
    volume: &[f64],
    window: Option<(usize, usize)>,
) -> Result<Vec<BurnFraction>, CycleError> {
    if fired.crank_angle() != motored.crank_angle() {
        return Err(CycleError::GridMismatch("fired and motored crank-angle grids differ".into()));
    }
    let reference = motored
        .cycle(0)
        .ok_or_else(|| CycleError::Malformed("motored trace has no cycle".into()))?;
    (0..fired.n_cycles())
        .map(|c| burn_fraction(fired.cycle(c).unwrap(), reference, volume, window))
        .collect()
}

/// Polytropic unburnt-zone temperature from the ignition state.
pub fn unburnt_temperature(
    pressure: &[f64],
    p_ign: f64,
    t_ign: f64,
    kappa_ub: f64,
) -> Result<Vec<f64>, CycleError> {
    if !(p_ign > 0.0) {
        return Err(CycleError::NonPositivePressure { index: 0, value: p_ign });
    }
    let expo = (kappa_ub - 1.0) / kappa_ub;
    pressure
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p > 0.0 {
                Ok(t_ign * (p / p_ign).powf(expo))
            } else {
                Err(CycleError::NonPositivePressure { index: i, value: p })
            }
        })
        .collect()
}

/// Burnt volume fraction from the two-zone ideal-gas volume balance
/// `y = 1 − (1 − x)·T_ub/T̄_g`, clipped to `[0, 1]` and made non-decreasing.
pub fn burnt_volume_fraction(x: &[f64], t_unburnt: &[f64], t_gas: &[f64]) -> Vec<f64> {
    let mut peak: f64 = 0.0;
    x.iter()
        .zip(t_unburnt)
        .zip(t_gas)
        .map(|((&xi, &tu), &tg)| {
            let y = if xi <= 0.0 {
                0.0
            } else if xi >= 1.0 {
                1.0
            } else {
                (1.0 - (1.0 - xi) * tu / tg).clamp(0.0, 1.0)
            };
            peak = peak.max(y);
            peak
        })
        .collect()
}

/// Burnt-zone temperature closing the two-zone balance; `None` before ignition.
pub fn burnt_temperature(x: f64, t_unburnt: f64, t_gas: f64) -> Option<f64> {
    (x > 0.0).then(|| (t_gas - (1.0 - x) * t_unburnt) / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_traces_burn_nothing() {
        let v: Vec<f64> = (0..50).map(|i| 1e-4 + 1e-6 * i as f64).collect();
        let p: Vec<f64> = v.iter().map(|vi| 1e5 * (5e-4 / vi).powf(1.35)).collect();
        let b = burn_fraction(&p, &p, &v, None).unwrap();
        assert!(b.x.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn step_release_normalizes_to_one() {
        let v = vec![1e-4; 6];
        let pm = vec![1e6; 6];
        let pf = vec![1e6, 1e6, 2e6, 3e6, 3e6, 3e6];
        let b = burn_fraction(&pf, &pm, &v, None).unwrap();
        assert_eq!(b.x, vec![0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn negative_release_is_clipped() {
        let v = vec![1e-4; 5];
        let pm = vec![1e6; 5];
        let pf = vec![1e6, 2e6, 1.9e6, 3e6, 3e6];
        let b = burn_fraction(&pf, &pm, &v, None).unwrap();
        assert_eq!(b.clipped_steps, 1);
        assert!(b.x.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*b.x.last().unwrap(), 1.0);
    }

    #[test]
    fn grid_mismatch() {
        assert!(matches!(
            burn_fraction(&[1.0, 2.0], &[1.0], &[1.0, 1.0], None),
            Err(CycleError::GridMismatch(_))
        ));
    }

    #[test]
    fn unburnt_polytrope() {
        let t = unburnt_temperature(&[1e6, 2e6], 1e6, 700.0, 1.4).unwrap();
        assert_eq!(t[0], 700.0);
        assert!((t[1] / 700.0 - 2f64.powf(0.4 / 1.4)).abs() < 1e-14);
        assert!((t[1] / 700.0 - 1.219).abs() < 1e-3);
        let iso = unburnt_temperature(&[1e6, 3e6], 1e6, 700.0, 1.0).unwrap();
        assert_eq!(iso, vec![700.0, 700.0]);
        assert!(unburnt_temperature(&[0.0], 1e6, 700.0, 1.3).is_err());
    }

    #[test]
    fn volume_fraction_limits() {
        let y = burnt_volume_fraction(&[0.0, 0.5, 1.0], &[800.0, 900.0, 900.0], &[800.0, 1800.0, 2500.0]);
        assert_eq!(y[0], 0.0);
        assert!((y[1] - 0.75).abs() < 1e-15);
        assert_eq!(y[2], 1.0);
        let tb = burnt_temperature(0.5, 900.0, 1800.0).unwrap();
        assert!((0.5 * tb + 0.5 * 900.0 - 1800.0).abs() < 1e-12);
    }
}
