//! Bin edges and normed multi-dimensional histograms.
//!
//! Bins are left-closed and right-open, except the last bin of every axis
//! which is closed on both sides. Values outside the edge range are clamped
//! into the boundary bins and reported as clamped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistogramError {
    #[error("bin edges need at least two entries, got {0}")]
    TooFewEdges(usize),
    #[error("bin edges must be finite and strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("histogram has no samples")]
    Empty,
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("count array has {got} entries, axes imply {expected}")]
    CountLength { expected: usize, got: usize },
    #[error("scale factor must be finite and positive, got {0}")]
    InvalidScale(f64),
}

/// Strictly increasing edge vector of one histogram axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BinEdges(Vec<f64>);

impl TryFrom<Vec<f64>> for BinEdges {
    type Error = HistogramError;

    fn try_from(edges: Vec<f64>) -> Result<Self, Self::Error> {
        BinEdges::new(edges)
    }
}

impl From<BinEdges> for Vec<f64> {
    fn from(e: BinEdges) -> Self {
        e.0
    }
}

/// Result of locating a value on an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Located {
    pub index: usize,
    pub clamped: bool,
}

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self, HistogramError> {
        if edges.len() < 2 {
            return Err(HistogramError::TooFewEdges(edges.len()));
        }
        for (i, w) in edges.windows(2).enumerate() {
            if !(w[0].is_finite() && w[1].is_finite() && w[1] > w[0]) {
                return Err(HistogramError::NotIncreasing(i + 1));
            }
        }
        Ok(Self(edges))
    }

    /// `n` equal-width bins spanning `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, HistogramError> {
        let n = n.max(1);
        let w = (hi - lo) / n as f64;
        let mut e: Vec<f64> = (0..n).map(|i| lo + w * i as f64).collect();
        e.push(hi);
        Self::new(e)
    }

    /// Edges spanning a sample range, widened around degenerate ranges so that
    /// identical samples land in one bin of width `min_width`.
    pub fn spanning(values: &[f64], n: usize, min_width: f64) -> Result<Self, HistogramError> {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() || !hi.is_finite() {
            return Err(HistogramError::Empty);
        }
        if hi - lo < min_width {
            let mid = 0.5 * (lo + hi);
            return Self::new(vec![mid - 0.5 * min_width, mid + 0.5 * min_width]);
        }
        Self::uniform(lo, hi, n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn bins(&self) -> usize {
        self.0.len() - 1
    }

    pub fn lower(&self) -> f64 {
        self.0[0]
    }

    pub fn upper(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.0[i + 1] - self.0[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.0[i] + self.0[i + 1])
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.0[i], self.0[i + 1])
    }

    /// Bin index of `value` under the left-closed/right-open convention with a
    /// closed last bin. Out-of-range values map to the nearest boundary bin.
    pub fn locate(&self, value: f64) -> Located {
        let last = self.bins() - 1;
        if value < self.lower() {
            return Located { index: 0, clamped: true };
        }
        if value > self.upper() {
            return Located { index: last, clamped: true };
        }
        if value == self.upper() {
            return Located { index: last, clamped: false };
        }
        // first edge strictly greater than value, minus one
        let idx = self.0.partition_point(|&e| e <= value) - 1;
        Located { index: idx.min(last), clamped: false }
    }

    /// Edges multiplied by a positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|e| e * factor).collect())
    }
}

/// Normed histogram over an arbitrary number of axes, stored densely in
/// row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    axes: Vec<BinEdges>,
    counts: Vec<u64>,
    density: Vec<f64>,
    total: u64,
}

impl Histogram {
    pub fn from_counts(axes: Vec<BinEdges>, counts: Vec<u64>) -> Result<Self, HistogramError> {
        let expected: usize = axes.iter().map(BinEdges::bins).product();
        if counts.len() != expected {
            return Err(HistogramError::CountLength { expected, got: counts.len() });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(HistogramError::Empty);
        }
        let mut h = Self { axes, counts, density: Vec::new(), total };
        h.renormalize();
        Ok(h)
    }

    /// Counts the given points (each a slice with one coordinate per axis).
    pub fn from_points<'a, I>(axes: Vec<BinEdges>, points: I) -> Result<(Self, usize), HistogramError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let size: usize = axes.iter().map(BinEdges::bins).product();
        let mut counts = vec![0u64; size];
        let mut clamped = 0usize;
        for p in points {
            if p.len() != axes.len() {
                return Err(HistogramError::Dimension { expected: axes.len(), got: p.len() });
            }
            let mut flat = 0usize;
            let mut any = false;
            for (edges, &v) in axes.iter().zip(p) {
                let loc = edges.locate(v);
                any |= loc.clamped;
                flat = flat * edges.bins() + loc.index;
            }
            if any {
                clamped += 1;
            }
            counts[flat] += 1;
        }
        Ok((Self::from_counts(axes, counts)?, clamped))
    }

    fn renormalize(&mut self) {
        let total = self.total as f64;
        let mut density = vec![0.0; self.counts.len()];
        for (flat, (&c, d)) in self.counts.iter().zip(density.iter_mut()).enumerate() {
            if c > 0 {
                *d = c as f64 / (total * self.volume_flat(flat));
            }
        }
        self.density = density;
    }

    pub fn axes(&self) -> &[BinEdges] {
        &self.axes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, edges) in self.axes.iter().enumerate().rev() {
            idx[d] = flat % edges.bins();
            flat /= edges.bins();
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, e)| acc * e.bins() + i)
    }

    pub fn volume_flat(&self, flat: usize) -> f64 {
        self.unflatten(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, e)| e.width(i))
            .product()
    }

    pub fn center_flat(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, e)| e.center(i))
            .collect()
    }

    /// Flat indices of bins with non-zero count.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| i)
    }

    /// Σ density · bin volume.
    pub fn integral(&self) -> f64 {
        self.occupied()
            .map(|f| self.density[f] * self.volume_flat(f))
            .sum()
    }

    /// Σ f(bin center) · density · bin volume.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.occupied()
            .map(|flat| f(&self.center_flat(flat)) * self.density[flat] * self.volume_flat(flat))
            .sum()
    }

    pub fn mean(&self, axis: usize) -> f64 {
        self.expect(|c| c[axis])
    }

    /// Change of variables `x_d -> factor_d · x_d`: edges are scaled and the
    /// density divided by the product of the factors. Probability mass per
    /// bin is unchanged.
    pub fn scaled(&self, factors: &[f64]) -> Result<Self, HistogramError> {
        if factors.len() != self.axes.len() {
            return Err(HistogramError::Dimension { expected: self.axes.len(), got: factors.len() });
        }
        if let Some(&bad) = factors.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(HistogramError::InvalidScale(bad));
        }
        if factors.iter().all(|&f| f == 1.0) {
            return Ok(self.clone());
        }
        let jac: f64 = factors.iter().product();
        let axes = self.axes.iter().zip(factors).map(|(e, &f)| e.scaled(f)).collect();
        let density = self.density.iter().map(|d| d / jac).collect();
        Ok(Self { axes, counts: self.counts.clone(), density, total: self.total })
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_follows_half_open_convention() {
        let e = BinEdges::new(vec![0.0, 10.0, 20.0]).unwrap();
        assert_eq!(e.locate(0.0), Located { index: 0, clamped: false });
        assert_eq!(e.locate(10.0), Located { index: 1, clamped: false });
        assert_eq!(e.locate(20.0), Located { index: 1, clamped: false });
        assert_eq!(e.locate(25.0), Located { index: 1, clamped: true });
        assert_eq!(e.locate(-1.0), Located { index: 0, clamped: true });
        assert_eq!(e.locate(9.999), Located { index: 0, clamped: false });
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(BinEdges::new(vec![1.0]), Err(HistogramError::TooFewEdges(1)));
        assert_eq!(BinEdges::new(vec![0.0, 1.0, 1.0]), Err(HistogramError::NotIncreasing(2)));
        assert!(BinEdges::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn variable_width_normalization() {
        let e = BinEdges::new(vec![0.0, 1.0, 3.0, 4.0]).unwrap();
        let pts = [0.5, 0.2, 1.5, 2.0, 2.9, 3.5];
        let (h, clamped) =
            Histogram::from_points(vec![e], pts.iter().map(std::slice::from_ref)).unwrap();
        assert_eq!(clamped, 0);
        assert_eq!(h.counts(), &[2, 3, 1]);
        assert!((h.density()[0] - 2.0 / 6.0).abs() < 1e-15);
        assert!((h.density()[1] - 3.0 / 12.0).abs() < 1e-15);
        assert!((h.density()[2] - 1.0 / 6.0).abs() < 1e-15);
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_preserves_mass_and_scales_mean() {
        let a = BinEdges::new(vec![950.0, 1050.0]).unwrap();
        let h = Histogram::from_counts(vec![a], vec![5]).unwrap();
        let s = h.scaled(&[2.0]).unwrap();
        assert_eq!(s.axes()[0].as_slice(), &[1900.0, 2100.0]);
        assert_eq!(s.density()[0], h.density()[0] / 2.0);
        assert!((s.integral() - 1.0).abs() < 1e-12);
        assert!((s.mean(0) - 2.0 * h.mean(0)).abs() < 1e-9);
    }

    #[test]
    fn unit_scaling_is_bit_identical() {
        let a = BinEdges::new(vec![0.0, 0.3, 0.7]).unwrap();
        let h = Histogram::from_counts(vec![a], vec![1, 2]).unwrap();
        assert_eq!(h.scaled(&[1.0]).unwrap(), h);
    }

    #[test]
    fn flatten_round_trip() {
        let axes = vec![
            BinEdges::uniform(0.0, 1.0, 3).unwrap(),
            BinEdges::uniform(0.0, 1.0, 4).unwrap(),
        ];
        let h = Histogram::from_counts(axes, vec![1; 12]).unwrap();
        for f in 0..12 {
            assert_eq!(h.flatten(&h.unflatten(f)), f);
        }
    }
}
