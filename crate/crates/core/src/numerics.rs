//! Small numerical kernels shared by the cycle and sensor models.

/// Piecewise-linear interpolation over `(x, y)` points sorted by `x`,
/// clamped to the end values outside the range.
pub fn linear_clamped(points: &[[f64; 2]], x: f64) -> f64 {
    match points {
        [] => 0.0,
        [p] => p[1],
        _ => {
            if x <= points[0][0] {
                return points[0][1];
            }
            let last = points[points.len() - 1];
            if x >= last[0] {
                return last[1];
            }
            let j = points.partition_point(|p| p[0] <= x);
            let (a, b) = (points[j - 1], points[j]);
            let s = (x - a[0]) / (b[0] - a[0]);
            a[1] + s * (b[1] - a[1])
        }
    }
}

/// Linear interpolation of `ys` sampled at increasing `xs`, clamped at the ends.
pub fn interp_sorted(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x);
    let s = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    ys[j - 1] + s * (ys[j] - ys[j - 1])
}

/// Second-order derivative on a non-uniform grid: three-point central
/// stencil in the interior, three-point one-sided stencils at the ends.
/// Two-point grids fall back to a single forward difference.
pub fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, y.len(), "derivative: grid and values differ in length");
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let d = (y[1] - y[0]) / (t[1] - t[0]);
            return vec![d, d];
        }
        _ => {}
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        out[i] = -h1 / (h0 * (h0 + h1)) * y[i - 1]
            + (h1 - h0) / (h0 * h1) * y[i]
            + h0 / (h1 * (h0 + h1)) * y[i + 1];
    }
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    out[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0] + (h0 + h1) / (h0 * h1) * y[1]
        - h0 / (h1 * (h0 + h1)) * y[2];
    let (h0, h1) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    out[n - 1] = h1 / (h0 * (h0 + h1)) * y[n - 3] - (h0 + h1) / (h0 * h1) * y[n - 2]
        + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * y[n - 1];
    out
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// One classical fourth-order Runge–Kutta step for a scalar ODE.
pub fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_analytic_on_nonuniform_grid() {
        let t: Vec<f64> = (0..400).map(|i| {
            let s = i as f64 / 399.0;
            s + 0.1 * s * s
        }).collect();
        let y: Vec<f64> = t.iter().map(|x| (3.0 * x).sin()).collect();
        let d = derivative(&t, &y);
        for (x, di) in t.iter().zip(&d) {
            assert!((di - 3.0 * (3.0 * x).cos()).abs() < 1e-3, "at {x}: {di}");
        }
    }

    #[test]
    fn derivative_exact_for_quadratics() {
        let t = [0.0, 0.3, 0.5, 1.1, 1.2];
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x * x - x + 4.0).collect();
        for (x, d) in t.iter().zip(derivative(&t, &y)) {
            assert!((d - (4.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_exponential() {
        let f = |_t: f64, y: f64| -y;
        let mut y = 1.0;
        let h = 0.01;
        for i in 0..100 {
            y = rk4_step(&f, i as f64 * h, y, h);
        }
        assert!((y - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn interpolation_clamps() {
        let pts = [[0.0, 1.0], [10.0, 3.0]];
        assert_eq!(linear_clamped(&pts, -5.0), 1.0);
        assert_eq!(linear_clamped(&pts, 5.0), 2.0);
        assert_eq!(linear_clamped(&pts, 50.0), 3.0);
        assert_eq!(interp_sorted(&[0.0, 1.0, 2.0], &[0.0, 10.0, 0.0], 1.5), 5.0);
    }
}
