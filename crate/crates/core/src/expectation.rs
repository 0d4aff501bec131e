//! Conditional densities and the expectations built from them.
//!
//! A joint density `p_{αn}(A, N)` over realizations `A` and engine states `N`
//! factors into the state density `p_n(N)` and the conditional density
//! `p_{α|n}(A|N) = p_{αn}/p_n`. Quasistationary expectations are evaluated
//! as the nested sum `Σ_N (Σ_A f p_{α|n} ΔA) p_n ΔN`; the inner sum is stored
//! per state bin in a [`SlaveTable`].

use thiserror::Error;

use crate::histogram::{BinEdges, Histogram, HistogramError};
use crate::state_space::StateHistogram;

#[derive(Debug, Error)]
pub enum ExpectationError {
    #[error("tables are not on the same grid: {0}")]
    GridMismatch(String),
    #[error("engine speed {n} rpm outside bracket [{left}, {right}]")]
    OutOfBracket { n: f64, left: f64, right: f64 },
    #[error("mean heat-transfer coefficient is zero")]
    ZeroMeanHtc,
    #[error("state bin {bin} is empty and has no reference to generate it from")]
    UnreachableState { bin: String },
    #[error("slave table undefined at occupied state bin {bin}")]
    UndefinedSlave { bin: String },
    #[error("no stationary reference points")]
    NoReference,
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

fn same_axes(a: &[BinEdges], b: &[BinEdges]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.as_slice() == y.as_slice())
}

fn bins(axes: &[BinEdges]) -> usize {
    axes.iter().map(BinEdges::bins).product()
}

fn centers(axes: &[BinEdges], mut flat: usize) -> Vec<f64> {
    let mut c = vec![0.0; axes.len()];
    for (d, e) in axes.iter().enumerate().rev() {
        c[d] = e.center(flat % e.bins());
        flat /= e.bins();
    }
    c
}

fn volume(axes: &[BinEdges], mut flat: usize) -> f64 {
    let mut v = 1.0;
    for e in axes.iter().rev() {
        v *= e.width(flat % e.bins());
        flat /= e.bins();
    }
    v
}

fn flatten(axes: &[BinEdges], idx: &[usize]) -> usize {
    idx.iter().zip(axes).fold(0, |acc, (&i, e)| acc * e.bins() + i)
}

/// Joint counts over realization axes `A` and state axes `N`, stored
/// state-major: `counts[n_flat · |A| + a_flat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCounts {
    alpha_axes: Vec<BinEdges>,
    state_axes: Vec<BinEdges>,
    counts: Vec<u64>,
}

impl JointCounts {
    pub fn new(alpha_axes: Vec<BinEdges>, state_axes: Vec<BinEdges>, counts: Vec<u64>) -> Result<Self, ExpectationError> {
        let expected = bins(&alpha_axes) * bins(&state_axes);
        if counts.len() != expected {
            return Err(HistogramError::CountLength { expected, got: counts.len() }.into());
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(HistogramError::Empty.into());
        }
        Ok(Self { alpha_axes, state_axes, counts })
    }

    /// Counts `(realization, state)` pairs; out-of-range values are clamped.
    pub fn from_points<'a, I>(alpha_axes: Vec<BinEdges>, state_axes: Vec<BinEdges>, points: I) -> Result<Self, ExpectationError>
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let na = bins(&alpha_axes);
        let mut counts = vec![0u64; na * bins(&state_axes)];
        for (a, n) in points {
            if a.len() != alpha_axes.len() || n.len() != state_axes.len() {
                return Err(HistogramError::Dimension {
                    expected: alpha_axes.len() + state_axes.len(),
                    got: a.len() + n.len(),
                }
                .into());
            }
            let ia: Vec<usize> = alpha_axes.iter().zip(a).map(|(e, &v)| e.locate(v).index).collect();
            let is: Vec<usize> = state_axes.iter().zip(n).map(|(e, &v)| e.locate(v).index).collect();
            counts[flatten(&state_axes, &is) * na + flatten(&alpha_axes, &ia)] += 1;
        }
        Self::new(alpha_axes, state_axes, counts)
    }

    pub fn alpha_axes(&self) -> &[BinEdges] {
        &self.alpha_axes
    }

    pub fn state_axes(&self) -> &[BinEdges] {
        &self.state_axes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normed joint histogram over `(N…, A…)` in that axis order.
    pub fn joint_histogram(&self) -> Result<Histogram, ExpectationError> {
        let axes = self.state_axes.iter().chain(&self.alpha_axes).cloned().collect();
        Ok(Histogram::from_counts(axes, self.counts.clone())?)
    }

    /// State marginal `p_n`.
    pub fn state_histogram(&self) -> Result<Histogram, ExpectationError> {
        let na = bins(&self.alpha_axes);
        let counts = self.counts.chunks(na).map(|c| c.iter().sum()).collect();
        Ok(Histogram::from_counts(self.state_axes.clone(), counts)?)
    }
}

/// Per-state-bin normed histograms over the realization axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPdf {
    alpha_axes: Vec<BinEdges>,
    marginal: Histogram,
    conditionals: Vec<Option<Histogram>>,
}

impl ConditionalPdf {
    pub fn alpha_axes(&self) -> &[BinEdges] {
        &self.alpha_axes
    }

    pub fn marginal(&self) -> &Histogram {
        &self.marginal
    }

    pub fn get(&self, state_idx: &[usize]) -> Option<&Histogram> {
        if state_idx.len() != self.marginal.axes().len()
            || state_idx.iter().zip(self.marginal.axes()).any(|(&i, e)| i >= e.bins())
        {
            return None;
        }
        self.conditionals[self.marginal.flatten(state_idx)].as_ref()
    }

    pub fn get_flat(&self, state_flat: usize) -> Option<&Histogram> {
        self.conditionals.get(state_flat).and_then(Option::as_ref)
    }
}

/// Divides the joint density by the state marginal wherever `p_n > 0`.
pub fn conditional_pdf(joint: &JointCounts) -> Result<ConditionalPdf, ExpectationError> {
    let marginal = joint.state_histogram()?;
    let na = bins(&joint.alpha_axes);
    let conditionals = joint
        .counts
        .chunks(na)
        .map(|slice| {
            if slice.iter().all(|&c| c == 0) {
                Ok(None)
            } else {
                Histogram::from_counts(joint.alpha_axes.clone(), slice.to_vec()).map(Some)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConditionalPdf { alpha_axes: joint.alpha_axes.clone(), marginal, conditionals })
}

/// Conditional means `f_slave(N) = Σ_A f(A, N) p_{α|n}(A|N) ΔA` on the state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaveTable {
    state_axes: Vec<BinEdges>,
    values: Vec<Option<f64>>,
}

impl SlaveTable {
    pub fn new(state_axes: Vec<BinEdges>, values: Vec<Option<f64>>) -> Result<Self, ExpectationError> {
        let expected = bins(&state_axes);
        if values.len() != expected {
            return Err(HistogramError::CountLength { expected, got: values.len() }.into());
        }
        Ok(Self { state_axes, values })
    }

    /// `f` receives the realization bin center and the state bin center.
    pub fn from_conditional<F>(cond: &ConditionalPdf, mut f: F) -> Self
    where
        F: FnMut(&[f64], &[f64]) -> f64,
    {
        let state_axes = cond.marginal.axes().to_vec();
        let values = cond
            .conditionals
            .iter()
            .enumerate()
            .map(|(flat, h)| {
                h.as_ref().map(|h| {
                    let n = centers(&state_axes, flat);
                    h.expect(|a| f(a, &n))
                })
            })
            .collect();
        Self { state_axes, values }
    }

    pub fn state_axes(&self) -> &[BinEdges] {
        &self.state_axes
    }

    pub fn get(&self, state_flat: usize) -> Option<f64> {
        self.values.get(state_flat).copied().flatten()
    }

    /// Bins without a defined value.
    pub fn undefined(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i)
    }
}

/// Outer sum `Σ_N f_slave(N) p_n(N) ΔN` over the occupied state bins.
pub fn expect_nested(slave: &SlaveTable, state_hist: &Histogram) -> Result<f64, ExpectationError> {
    if !same_axes(&slave.state_axes, state_hist.axes()) {
        return Err(ExpectationError::GridMismatch("slave table and state histogram edges differ".into()));
    }
    let mut sum = 0.0;
    for flat in state_hist.occupied() {
        let f = slave.get(flat).ok_or_else(|| ExpectationError::UndefinedSlave {
            bin: format!("{:?}", state_hist.unflatten(flat)),
        })?;
        sum += f * state_hist.density()[flat] * state_hist.volume_flat(flat);
    }
    Ok(sum)
}

pub fn expect_nested_states(slave: &SlaveTable, states: &StateHistogram) -> Result<f64, ExpectationError> {
    expect_nested(slave, states.histogram())
}

/// Single flat sum `Σ_{A,N} f(A, N) p_{αn}(A, N) ΔA ΔN` over the joint table.
pub fn expect_joint<F>(joint: &JointCounts, mut f: F) -> f64
where
    F: FnMut(&[f64], &[f64]) -> f64,
{
    let na = bins(&joint.alpha_axes);
    let total = joint.total() as f64;
    let mut sum = 0.0;
    for (k, &c) in joint.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (ns, a) = (k / na, k % na);
        let dv = volume(&joint.alpha_axes, a) * volume(&joint.state_axes, ns);
        let density = c as f64 / (total * dv);
        sum += f(&centers(&joint.alpha_axes, a), &centers(&joint.state_axes, ns)) * density * dv;
    }
    sum
}

/// Conditional mean of `f` at the state addressed by one pointer-matrix row.
pub fn expect_transient<F>(cond: &ConditionalPdf, row: &[usize], f: F) -> Result<f64, ExpectationError>
where
    F: FnMut(&[f64]) -> f64,
{
    cond.get(row)
        .map(|h| h.expect(f))
        .ok_or_else(|| ExpectationError::UnreachableState { bin: format!("{row:?}") })
}

/// `T* = ⟨α T_ref⟩ / ⟨α⟩` for a density over `(α, T_ref)`.
pub fn modified_reference_temperature(pdf: &Histogram) -> Result<f64, ExpectationError> {
    if pdf.axes().len() != 2 {
        return Err(HistogramError::Dimension { expected: 2, got: pdf.axes().len() }.into());
    }
    let mut alpha_levels = pdf.occupied().map(|f| pdf.center_flat(f)[0]);
    let first = alpha_levels.next();
    if first.is_some_and(|a0| alpha_levels.all(|a| a == a0)) {
        // α factors out of both moments
        if first == Some(0.0) {
            return Err(ExpectationError::ZeroMeanHtc);
        }
        return Ok(pdf.mean(1));
    }
    let mean_alpha = pdf.mean(0);
    if mean_alpha.abs() <= f64::MIN_POSITIVE {
        return Err(ExpectationError::ZeroMeanHtc);
    }
    Ok(pdf.expect(|c| c[0] * c[1]) / mean_alpha)
}

/// Linear weight `a = (n − n_left)/(n_right − n_left)`.
pub fn speed_weight(n_left: f64, n_right: f64, n: f64) -> Result<f64, ExpectationError> {
    if !(n_left < n_right) || n < n_left || n > n_right {
        return Err(ExpectationError::OutOfBracket { n, left: n_left, right: n_right });
    }
    Ok((n - n_left) / (n_right - n_left))
}

pub fn interpolate_speed(f_left: f64, f_right: f64, n_left: f64, n_right: f64, n: f64) -> Result<f64, ExpectationError> {
    let a = speed_weight(n_left, n_right, n)?;
    if a == 0.0 {
        return Ok(f_left);
    }
    if a == 1.0 {
        return Ok(f_right);
    }
    Ok((1.0 - a) * f_left + a * f_right)
}

/// Position of a speed within a sorted list of stationary speed points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedBracket {
    pub left: usize,
    pub right: usize,
    /// Weight of the right point.
    pub a: f64,
    /// Speed fell outside the measured range and was clamped.
    pub clamped: bool,
}

/// Brackets `n` between sorted `speeds`, clamping to the nearest end point.
pub fn bracket_speed(speeds: &[f64], n: f64) -> Result<SpeedBracket, ExpectationError> {
    match speeds {
        [] => Err(ExpectationError::NoReference),
        [_] => Ok(SpeedBracket { left: 0, right: 0, a: 0.0, clamped: n != speeds[0] }),
        _ => {
            let last = speeds.len() - 1;
            if n <= speeds[0] {
                return Ok(SpeedBracket { left: 0, right: 0, a: 0.0, clamped: n < speeds[0] });
            }
            if n >= speeds[last] {
                return Ok(SpeedBracket { left: last, right: last, a: 0.0, clamped: n > speeds[last] });
            }
            let r = speeds.partition_point(|&s| s <= n);
            let l = r - 1;
            if speeds[l] == n {
                return Ok(SpeedBracket { left: l, right: l, a: 0.0, clamped: false });
            }
            Ok(SpeedBracket { left: l, right: r, a: speed_weight(speeds[l], speeds[r], n)?, clamped: false })
        }
    }
}

/// Density of `(α, T_eff)` at one engine state as used for boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum BinPdf {
    /// Normed 2D histogram over `(α, T_eff)`.
    Histogram(Histogram),
    /// Weighted mixture of 2D histograms, weights summing to one.
    Mixture(Vec<(f64, Histogram)>),
    /// Single deterministic realization.
    Dirac { alpha: f64, t_ref: f64 },
}

impl BinPdf {
    pub fn mean_alpha(&self) -> f64 {
        match self {
            BinPdf::Histogram(h) => h.mean(0),
            BinPdf::Mixture(parts) => parts.iter().map(|(w, h)| w * h.mean(0)).sum(),
            BinPdf::Dirac { alpha, .. } => *alpha,
        }
    }

    /// `(⟨α⟩, ⟨αT⟩/⟨α⟩)`, the pair that reproduces the mean heat flux.
    pub fn newton_pair(&self) -> Result<(f64, f64), ExpectationError> {
        match self {
            BinPdf::Histogram(h) => Ok((h.mean(0), modified_reference_temperature(h)?)),
            BinPdf::Mixture(parts) => {
                if let [(_, h)] = parts.as_slice() {
                    return Ok((h.mean(0), modified_reference_temperature(h)?));
                }
                let a: f64 = parts.iter().map(|(w, h)| w * h.mean(0)).sum();
                if a.abs() <= f64::MIN_POSITIVE {
                    return Err(ExpectationError::ZeroMeanHtc);
                }
                let at: f64 = parts.iter().map(|(w, h)| w * h.expect(|c| c[0] * c[1])).sum();
                Ok((a, at / a))
            }
            BinPdf::Dirac { alpha, t_ref } => {
                if *alpha <= 0.0 {
                    return Err(ExpectationError::ZeroMeanHtc);
                }
                Ok((*alpha, *t_ref))
            }
        }
    }
}
