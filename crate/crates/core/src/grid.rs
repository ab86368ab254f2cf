//! Uniform grids, quadrature rules and interpolation shared by every module.

use crate::error::{Error, Result};

/// Uniform grid on `[-half_width, half_width]` with `intervals` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    intervals: usize,
}

impl Grid {
    pub fn new(half_width: f64, intervals: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
        }
        if intervals < 8 || !intervals.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "interval count must be even and at least 8, got {intervals}"
            )));
        }
        Ok(Self { half_width, intervals })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of grid points (`intervals + 1`).
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.intervals as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    /// Index of `y = 0`.
    pub fn center(&self) -> usize {
        self.intervals / 2
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// The same interval with every cell halved; point `i` of `self` is point `2i` of the result.
    pub fn refined(&self) -> Grid {
        Grid { half_width: self.half_width, intervals: 2 * self.intervals }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }
}

/// Quadrature weights (in units of `h/24`) of the four-point rule for the cell `[i, i+1]`.
///
/// Interior cells use the centred cubic stencil; the two boundary cells use
/// one-sided cubics so the rule stays fourth order up to the ends.
pub fn cell_stencil(i: usize, n_points: usize) -> ([usize; 4], [f64; 4]) {
    debug_assert!(n_points >= 4 && i + 1 < n_points);
    if i == 0 {
        ([0, 1, 2, 3], [9.0, 19.0, -5.0, 1.0])
    } else if i + 2 == n_points {
        ([i - 2, i - 1, i, i + 1], [1.0, -5.0, 19.0, 9.0])
    } else {
        ([i - 1, i, i + 1, i + 2], [-1.0, 13.0, 13.0, -1.0])
    }
}

/// Integral of the sampled function over cell `[i, i+1]`.
pub fn cell_integral(f: &[f64], i: usize, h: f64) -> f64 {
    let (idx, w) = cell_stencil(i, f.len());
    h / 24.0 * (0..4).map(|j| w[j] * f[idx[j]]).sum::<f64>()
}

/// Running integral `∫_{y_0}^{y_i} f`, fourth order.
pub fn cumulative_from_left(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 0..f.len() - 1 {
        out[i + 1] = out[i] + cell_integral(f, i, h);
    }
    out
}

/// Running integral `∫_{y_i}^{y_end} f`, fourth order.
pub fn cumulative_from_right(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + cell_integral(f, i, h);
    }
    out
}

/// Composite trapezoidal rule.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f[1..n - 1].iter().sum::<f64>() + 0.5 * (f[0] + f[n - 1]))
}

/// Composite Simpson rule; requires an odd number of samples.
pub fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd sample count");
    let mut s = f[0] + f[n - 1];
    for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Weights of [`integrate`] for `m` samples: four-point cell rules when
/// `m >= 4`, trapezoid otherwise.
pub fn integration_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m];
    if m < 4 {
        for i in 0..m.saturating_sub(1) {
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        return w;
    }
    for i in 0..m - 1 {
        let (idx, c) = cell_stencil(i, m);
        for j in 0..4 {
            w[idx[j]] += c[j] * h / 24.0;
        }
    }
    w
}

/// Fourth-order integral of the full sample (sum of cell rules).
pub fn integrate(f: &[f64], h: f64) -> f64 {
    (0..f.len() - 1).map(|i| cell_integral(f, i, h)).sum()
}

/// `(‖f‖_{L¹}, ‖f‖_{L∞})` on a uniform grid.
pub fn l1_linf(f: &[f64], h: f64) -> (f64, f64) {
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    (trapezoid(&abs, h), abs.iter().cloned().fold(0.0, f64::max))
}

/// Centred sixth-order first derivative, falling back to one-sided fourth order at the ends.
pub fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if i >= 3 && i + 3 < n {
            (45.0 * (f[i + 1] - f[i - 1]) - 9.0 * (f[i + 2] - f[i - 2]) + (f[i + 3] - f[i - 3]))
                / (60.0 * h)
        } else if i + 4 < n {
            (-25.0 * f[i] + 48.0 * f[i + 1] - 36.0 * f[i + 2] + 16.0 * f[i + 3] - 3.0 * f[i + 4])
                / (12.0 * h)
        } else {
            (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] + 3.0 * f[i - 4])
                / (12.0 * h)
        };
    }
    d
}

/// Four-point Lagrange interpolation of uniformly sampled data.
///
/// Returns `outside` when `y` lies beyond the sampled interval.
pub fn interp_uniform(values: &[f64], x0: f64, h: f64, y: f64, outside: f64) -> f64 {
    let n = values.len();
    let s = (y - x0) / h;
    if s < -1e-12 || s > (n - 1) as f64 + 1e-12 {
        return outside;
    }
    let mut j = s.floor() as isize - 1;
    j = j.clamp(0, n as isize - 4);
    let j = j as usize;
    let t = s - j as f64;
    // nodes at t = 0,1,2,3
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    l0 * values[j] + l1 * values[j + 1] + l2 * values[j + 2] + l3 * values[j + 3]
}

/// Samples on `grid` interpolated onto the refined grid (midpoints inserted).
pub fn refine_samples(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let fine = grid.refined();
    let h = grid.step();
    let x0 = grid.point(0);
    (0..fine.len())
        .map(|j| {
            if j % 2 == 0 {
                values[j / 2]
            } else {
                interp_uniform(values, x0, h, fine.point(j), 0.0)
            }
        })
        .collect()
}

/// Piecewise cubic Hermite interpolant. `new` picks Fritsch–Carlson monotone slopes.
#[derive(Debug, Clone)]
pub struct CubicHermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl CubicHermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidGrid("monotone interpolant needs matching samples".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonInvertibleMap);
        }
        let secant: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secant[0];
        slopes[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            slopes[i] = if secant[i - 1] * secant[i] <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * (xs[i + 1] - xs[i]) + (xs[i] - xs[i - 1]);
                let w2 = (xs[i + 1] - xs[i]) + 2.0 * (xs[i] - xs[i - 1]);
                (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i])
            };
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Hermite interpolant with caller-supplied slopes.
    pub fn hermite(xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ys.len() != xs.len() || slopes.len() != xs.len() {
            return Err(Error::InvalidGrid("hermite interpolant needs matching samples".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonInvertibleMap);
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn locate(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i - 1,
        }
    }

    /// Derivative of the interpolant; zero outside the data.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.locate(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * (self.ys[i] - self.ys[i + 1])) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[i]
            + (3.0 * t2 - 2.0 * t) * self.slopes[i + 1]
    }

    /// Evaluates the interpolant; constant extension outside the data.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }
}

/// Solves a tridiagonal system with partial pivoting.
///
/// `lower[i]` couples row `i+1` to column `i`, `upper[i]` couples row `i` to column `i+1`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // band storage with one extra super-diagonal for fill-in
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut dl = lower.to_vec();
    let mut x = rhs.to_vec();
    for i in 0..n - 1 {
        if dl[i].abs() > d[i].abs() {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            dl[i] = f;
            x.swap(i, i + 1);
            x[i + 1] -= f * x[i];
        } else {
            if d[i] == 0.0 {
                return Err(Error::SingularSystem);
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            dl[i] = f;
            x[i + 1] -= f * x[i];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(Error::SingularSystem);
    }
    x[n - 1] /= d[n - 1];
    if n > 1 {
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(-1.0, 64).is_err());
        assert!(Grid::new(1.0, 7).is_err());
        let g = Grid::new(2.0, 8).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(g.center()), 0.0);
        assert_eq!(g.refined().point(2), g.point(1));
    }

    #[test]
    fn cumulative_rule_is_fourth_order() {
        let err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let f = g.sample(|y| (3.0 * y).sin() + y * y);
            let c = cumulative_from_left(&f, g.step());
            g.points()
                .iter()
                .zip(&c)
                .map(|(&y, &v)| {
                    let exact = ((-3.0f64).cos() - (3.0 * y).cos()) / 3.0 + (y.powi(3) + 1.0) / 3.0;
                    (v - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!(ratio > 12.0, "ratio {ratio}");
        let g = Grid::new(1.0, 64).unwrap();
        let f = g.sample(|y| y.exp());
        let r = cumulative_from_right(&f, g.step());
        assert!((r[0] - (1f64.exp() - (-1f64).exp())).abs() < 1e-7);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let g = Grid::new(3.0, 30).unwrap();
        let f = g.sample(|y| y.powi(3) - 2.0 * y);
        for &y in &[-2.95, -0.33, 0.0, 1.234, 2.99] {
            let v = interp_uniform(&f, g.point(0), g.step(), y, f64::NAN);
            assert!((v - (y.powi(3) - 2.0 * y)).abs() < 1e-12);
        }
        assert_eq!(interp_uniform(&f, g.point(0), g.step(), 3.5, -7.0), -7.0);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.tanh() + if *x > 4.0 { 1.0 } else { 0.0 }).collect();
        let m = CubicHermite::new(xs, ys).unwrap();
        let mut prev = m.eval(0.0);
        for i in 1..1000 {
            let v = m.eval(i as f64 * 0.0095);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(CubicHermite::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let n = 7;
        let lower: Vec<f64> = (0..n - 1).map(|i| 3.0 + i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.2).collect();
        let upper: Vec<f64> = (0..n - 1).map(|i| 1.0 - 0.3 * i as f64).collect();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * xs[i];
            if i > 0 {
                rhs[i] += lower[i - 1] * xs[i - 1];
            }
            if i + 1 < n {
                rhs[i] += upper[i] * xs[i + 1];
            }
        }
        let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            assert!((sol[i] - xs[i]).abs() < 1e-12, "{i}: {} vs {}", sol[i], xs[i]);
        }
    }

    #[test]
    fn derivative_stencils() {
        let g = Grid::new(2.0, 200).unwrap();
        let f = g.sample(|y| (2.0 * y).sin());
        let d = derivative(&f, g.step());
        for (i, y) in g.points().iter().enumerate() {
            assert!((d[i] - 2.0 * (2.0 * y).cos()).abs() < 1e-6);
        }
        assert!((simpson(&f.iter().map(|v| v * v).collect::<Vec<_>>(), g.step()) - integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>(), g.step())).abs() < 5e-6);
    }
}
