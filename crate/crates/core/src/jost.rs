//! Jost solutions of `Y'' = (k² + V) Y − b Y'`, `k = √(m² − λ)`, and the
//! vector Volterra solver behind their integral representation.
//!
//! Solutions are stored in the scaled form `e^{±ky}(Y, Y')`, which stays
//! bounded on the whole grid for `k > 0` and is free of overflow.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{cell_stencil, cumulative_from_left, integration_weights, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Decaying as `y → +∞`.
    PlusInfinity,
    /// Decaying as `y → −∞`.
    MinusInfinity,
}

impl Direction {
    fn sigma(self) -> f64 {
        match self {
            Direction::PlusInfinity => 1.0,
            Direction::MinusInfinity => -1.0,
        }
    }
}

/// The operator `−∂² − b∂ + m² + V` sampled on the refined grid so that
/// RK4 midpoints fall on samples.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    grid: Grid,
    m_sq: f64,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl LinearOperator {
    pub fn new(grid: Grid, m_sq: f64, v: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> Self {
        let fine = grid.refined();
        Self { grid, m_sq, v: fine.sample(v), b: fine.sample(b) }
    }

    /// `v` and `b` sampled on `grid.refined()`.
    pub fn from_samples(grid: Grid, m_sq: f64, v: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = grid.refined().len();
        if v.len() != n || b.len() != n {
            return Err(Error::InvalidArgument(format!("operator samples must have length {n}")));
        }
        Ok(Self { grid, m_sq, v, b })
    }

    pub fn free(grid: Grid, m_sq: f64) -> Self {
        Self::new(grid, m_sq, |_| 0.0, |_| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m_sq(&self) -> f64 {
        self.m_sq
    }

    /// `V` at grid point `i`.
    pub fn v(&self, i: usize) -> f64 {
        self.v[2 * i]
    }

    /// `b` at grid point `i`.
    pub fn b(&self, i: usize) -> f64 {
        self.b[2 * i]
    }

    pub fn v_fine(&self) -> &[f64] {
        &self.v
    }

    pub fn b_fine(&self) -> &[f64] {
        &self.b
    }

    /// `y ↦ −y`: maps solutions decaying at `−∞` to solutions decaying at `+∞`.
    fn reflected(&self) -> Self {
        let v = self.v.iter().rev().cloned().collect();
        let b = self.b.iter().rev().map(|x| -x).collect();
        Self { grid: self.grid, m_sq: self.m_sq, v, b }
    }

    /// `ρ(y_i) = exp(−∫_{y_0}^{y_i} b)`; `ω = 1/ρ` up to a constant.
    pub fn abel_weight(&self) -> Vec<f64> {
        let b: Vec<f64> = (0..self.grid.len()).map(|i| self.b(i)).collect();
        cumulative_from_left(&b, self.grid.step()).iter().map(|s| (-s).exp()).collect()
    }

    /// `∫ (1 + y²)^{1/2} (|V| + |b|)` over the grid.
    pub fn weighted_mass(&self) -> f64 {
        let g = &self.grid;
        let f: Vec<f64> =
            (0..g.len()).map(|i| (1.0 + g.point(i).powi(2)).sqrt() * (self.v(i).abs() + self.b(i).abs())).collect();
        crate::grid::trapezoid(&f, g.step())
    }

    /// `μ = ∫ sup ‖K(y, w)‖` for the Jost kernel at decay rate `k`.
    pub fn mu_bound(&self, k: f64) -> f64 {
        let g = &self.grid;
        let l = g.half_width();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let w = g.point(i);
                // sup over y ≤ w of the kernel entries
                let k1 = if k > 0.0 { (1.0f64 / (2.0 * k)).min(w + l) } else { w + l };
                (k1.max(1.0)) * (self.v(i).abs() + self.b(i).abs())
            })
            .collect();
        crate::grid::trapezoid(&f, g.step())
    }
}

/// A Jost solution on the index range `lo..=hi` of its grid.
#[derive(Debug, Clone)]
pub struct JostSolution {
    pub lambda: f64,
    pub k: f64,
    pub direction: Direction,
    /// `e^{σky}(Y, Y')` with `σ = +1` for `PlusInfinity`, `−1` for `MinusInfinity`.
    scaled: Vec<[f64; 2]>,
    lo: usize,
    grid: Grid,
    /// Boundary condition at the decaying end verified.
    pub normalized: bool,
}

impl JostSolution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// First and last grid index covered.
    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.lo + self.scaled.len() - 1)
    }

    pub fn covers(&self, i: usize) -> bool {
        let (lo, hi) = self.range();
        i >= lo && i <= hi
    }

    /// `e^{σky}(Y, Y')` at grid index `i`.
    pub fn scaled(&self, i: usize) -> [f64; 2] {
        self.scaled[i - self.lo]
    }

    fn factor(&self, i: usize) -> f64 {
        (-self.direction.sigma() * self.k * self.grid.point(i)).exp()
    }

    /// `(Y, Y')` at grid index `i`.
    pub fn value(&self, i: usize) -> [f64; 2] {
        let s = self.scaled(i);
        let f = self.factor(i);
        [f * s[0], f * s[1]]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.value(i)[0]
    }

    pub fn dy(&self, i: usize) -> f64 {
        self.value(i)[1]
    }

    /// `(y, Y, Y')` triples over the covered range.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        let (lo, hi) = self.range();
        (lo..=hi)
            .map(|i| {
                let v = self.value(i);
                (self.grid.point(i), v[0], v[1])
            })
            .collect()
    }

    /// `sup e^{σky}|Y|` over the half-line on the decaying side of `y = 0`.
    pub fn decay_constant(&self) -> f64 {
        let c = self.grid.center();
        let (lo, hi) = self.range();
        let (a, b) = match self.direction {
            Direction::PlusInfinity => (c.max(lo), hi),
            Direction::MinusInfinity => (lo, c.min(hi)),
        };
        (a..=b).map(|i| self.scaled(i)[0].abs()).fold(0.0, f64::max)
    }

    /// Largest component-wise difference of the scaled forms, relative to the
    /// larger scaled amplitude, over the common range.
    pub fn scaled_distance(&self, other: &JostSolution) -> f64 {
        let (lo, hi) = (self.lo.max(other.lo), self.range().1.min(other.range().1));
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in lo..=hi {
            let a = self.scaled(i);
            let b = other.scaled(i);
            diff = diff.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            size = size.max(a[0].abs()).max(a[1].abs());
        }
        diff / size.max(f64::MIN_POSITIVE)
    }

    /// The same solution seen through `y ↦ −y`.
    fn reflect(self) -> JostSolution {
        let n = self.grid.len();
        let hi = self.lo + self.scaled.len() - 1;
        let scaled = self.scaled.iter().rev().map(|s| [s[0], -s[1]]).collect();
        JostSolution {
            direction: match self.direction {
                Direction::PlusInfinity => Direction::MinusInfinity,
                Direction::MinusInfinity => Direction::PlusInfinity,
            },
            scaled,
            lo: n - 1 - hi,
            ..self
        }
    }
}

/// `det(U(y_i), V(y_i))` for two solutions covering index `i`.
pub fn wronskian(u: &JostSolution, v: &JostSolution, i: usize) -> f64 {
    let a = u.value(i);
    let b = v.value(i);
    if u.direction != v.direction && u.k == v.k {
        // the exponential factors cancel exactly
        let sa = u.scaled(i);
        let sb = v.scaled(i);
        return sa[0] * sb[1] - sa[1] * sb[0];
    }
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostOptions {
    /// Relative sup-norm stopping tolerance of the Picard iteration.
    pub picard_tol: f64,
    pub max_iterations: usize,
    /// Run the Picard computation and compare it with the ODE solution.
    pub cross_check: bool,
    pub cross_check_tol: f64,
    /// Bound on `∫ (1 + y²)^{1/2}(|V| + |b|)` accepted by the threshold solver.
    pub decay_bound: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        Self { picard_tol: 1e-14, max_iterations: 200, cross_check: true, cross_check_tol: 1e-8, decay_bound: 1e3 }
    }
}

impl JostOptions {
    pub fn without_cross_check() -> Self {
        Self { cross_check: false, ..Self::default() }
    }
}

/// Backward RK4 for the `+∞` solution over indices `lo..=n-1`, in the variables
/// `Z = e^{ky}Y`, `P = Z'`: `Z'' = (2k − b) Z' + (V + bk) Z`.
fn ode_plus(op: &LinearOperator, k: f64, lo: usize) -> Vec<[f64; 2]> {
    let n = op.grid.len();
    let h = op.grid.step();
    let rhs = |j: usize, z: f64, p: f64| -> (f64, f64) {
        let b = op.b[j];
        (p, (2.0 * k - b) * p + (op.v[j] + b * k) * z)
    };
    let mut out = vec![[0.0; 2]; n - lo];
    let (mut z, mut p) = (1.0, 0.0);
    out[n - 1 - lo] = [z, p - k * z];
    for i in (lo..n - 1).rev() {
        let (j1, jm, j0) = (2 * i + 2, 2 * i + 1, 2 * i);
        let dt = -h;
        let (a1, b1) = rhs(j1, z, p);
        let (a2, b2) = rhs(jm, z + 0.5 * dt * a1, p + 0.5 * dt * b1);
        let (a3, b3) = rhs(jm, z + 0.5 * dt * a2, p + 0.5 * dt * b2);
        let (a4, b4) = rhs(j0, z + dt * a3, p + dt * b3);
        z += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        p += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        out[i - lo] = [z, p - k * z];
    }
    out
}

/// Picard iteration of
/// `Z(y) = (1, −k) − ½ ∫_y^L (V Z₁ − b Z₂)(w) ((e^{2k(y−w)} − 1)/k, e^{2k(y−w)} + 1) dw`
/// with an `O(N)` recursion per sweep. At `k = 0` the kernel is `(2(y − w), 2)`.
fn picard_plus(op: &LinearOperator, k: f64, lo: usize, opts: &JostOptions) -> Result<Vec<[f64; 2]>> {
    let g = &op.grid;
    let n = g.len();
    let m = n - lo;
    let h = g.step();
    let decay = (-2.0 * k * h).exp();
    let em = if k > 0.0 { (-2.0 * k * h).exp_m1() / k } else { -2.0 * h };
    let kern1 = |d: f64| if k > 0.0 { (2.0 * k * d).exp_m1() / k } else { 2.0 * d };
    let kern2 = |d: f64| (2.0 * k * d).exp();
    let mut z = vec![[1.0, -k]; m];
    let mut phi = vec![0.0; m];
    let mut last = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        for (j, p) in phi.iter_mut().enumerate() {
            let i = lo + j;
            *p = op.v(i) * z[j][0] - op.b(i) * z[j][1];
        }
        let (mut pp, mut dd, mut qq) = (0.0, 0.0, 0.0);
        let mut next = vec![[1.0, -k]; m];
        for j in (0..m - 1).rev() {
            let (idx, w) = cell_stencil(j, m);
            let (mut lp, mut ld, mut lq) = (0.0, 0.0, 0.0);
            for s in 0..4 {
                let d = (j as f64 - idx[s] as f64) * h;
                let f = w[s] * h / 24.0 * phi[idx[s]];
                lp += kern2(d) * f;
                ld += kern1(d) * f;
                lq += f;
            }
            dd = ld + decay * dd + em * qq;
            pp = lp + decay * pp;
            qq += lq;
            next[j] = [1.0 - 0.5 * dd, -k - 0.5 * (pp + qq)];
        }
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (a, b) in z.iter().zip(&next) {
            diff = diff.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            size = size.max(b[0].abs()).max(b[1].abs());
        }
        z = next;
        last = diff / size;
        if last <= opts.picard_tol {
            return Ok(z);
        }
        if iter == opts.max_iterations {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, last_update: last })
}

fn check_lambda(op: &LinearOperator, lambda: f64) -> Result<f64> {
    if !(lambda < op.m_sq) {
        return Err(Error::ThresholdParameter { lambda, m_sq: op.m_sq });
    }
    Ok((op.m_sq - lambda).sqrt())
}

fn solve_plus(op: &LinearOperator, lambda: f64, k: f64, lo: usize, opts: &JostOptions) -> Result<JostSolution> {
    let scaled = ode_plus(op, k, lo);
    if opts.cross_check {
        let picard = picard_plus(op, k, lo, opts)?;
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (a, b) in scaled.iter().zip(&picard) {
            diff = diff.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            size = size.max(a[0].abs()).max(a[1].abs());
        }
        let discrepancy = diff / size;
        if discrepancy > opts.cross_check_tol {
            return Err(Error::CrossCheckFailure { discrepancy, tolerance: opts.cross_check_tol });
        }
    }
    Ok(JostSolution {
        lambda,
        k,
        direction: Direction::PlusInfinity,
        scaled,
        lo,
        grid: op.grid,
        normalized: true,
    })
}

fn solve(op: &LinearOperator, lambda: f64, k: f64, dir: Direction, half: bool, opts: &JostOptions) -> Result<JostSolution> {
    let lo = if half { op.grid.center() } else { 0 };
    match dir {
        Direction::PlusInfinity => solve_plus(op, lambda, k, lo, opts),
        Direction::MinusInfinity => Ok(solve_plus(&op.reflected(), lambda, k, lo, opts)?.reflect()),
    }
}

/// The Jost solution on the whole grid, from backward RK4 with boundary data
/// `e^{∓kL}(1, ∓k)`; with `opts.cross_check` also from the Picard series.
pub fn jost(op: &LinearOperator, lambda: f64, dir: Direction, opts: &JostOptions) -> Result<JostSolution> {
    let k = check_lambda(op, lambda)?;
    solve(op, lambda, k, dir, false, opts)
}

/// The Jost solution on its own half-line only (`y ≥ 0` for `PlusInfinity`).
pub fn jost_half(op: &LinearOperator, lambda: f64, dir: Direction, opts: &JostOptions) -> Result<JostSolution> {
    let k = check_lambda(op, lambda)?;
    solve(op, lambda, k, dir, true, opts)
}

/// Picard-only Jost solution (no ODE), for comparisons.
pub fn jost_picard(op: &LinearOperator, lambda: f64, dir: Direction, opts: &JostOptions) -> Result<JostSolution> {
    let k = if lambda == op.m_sq { 0.0 } else { check_lambda(op, lambda)? };
    let run = |o: &LinearOperator| -> Result<JostSolution> {
        Ok(JostSolution {
            lambda,
            k,
            direction: Direction::PlusInfinity,
            scaled: picard_plus(o, k, 0, opts)?,
            lo: 0,
            grid: o.grid,
            normalized: true,
        })
    };
    match dir {
        Direction::PlusInfinity => run(op),
        Direction::MinusInfinity => Ok(run(&op.reflected())?.reflect()),
    }
}

/// The `k = 0` solution with boundary value `(1, 0)`.
pub fn jost_threshold(op: &LinearOperator, dir: Direction, opts: &JostOptions) -> Result<JostSolution> {
    let estimate = op.weighted_mass();
    if estimate > opts.decay_bound {
        return Err(Error::SlowDecay { estimate, bound: opts.decay_bound });
    }
    solve(op, op.m_sq, 0.0, dir, false, opts)
}

/// Extends a half-line Jost solution across `y = 0` by reduction of order
/// against `companion`, a solution decaying at the opposite end:
/// `Y = c₀ Y_c (∫_0^y ρ/Y_c² + c₁)` with `ρ = exp(−∫_0^y b)`.
pub fn extend_full_line(j: &JostSolution, companion: &JostSolution, op: &LinearOperator) -> Result<JostSolution> {
    let g = op.grid;
    let n = g.len();
    let c = g.center();
    let h = g.step();
    let (lo, hi) = match j.direction {
        Direction::PlusInfinity => (0, c),
        Direction::MinusInfinity => (c, n - 1),
    };
    if !j.covers(c) || !(lo..=hi).all(|i| companion.covers(i)) {
        return Err(Error::InvalidArgument("companion must cover the opposite half-line".into()));
    }
    let rho_full = op.abel_weight();
    let rho: Vec<f64> = (0..n).map(|i| rho_full[i] / rho_full[c]).collect();
    let yc: Vec<[f64; 2]> = (0..n).map(|i| if companion.covers(i) { companion.value(i) } else { [0.0; 2] }).collect();
    let scale = yc[c][0].abs().max(yc[c][1].abs());
    for (i, v) in yc.iter().enumerate().take(hi + 1).skip(lo) {
        if v[0].abs() <= 1e-12 * scale || v[0].signum() != yc[c][0].signum() {
            return Err(Error::CompanionZero { at: g.point(i) });
        }
    }
    let y0 = j.value(c);
    let c0 = yc[c][0] * y0[1] - yc[c][1] * y0[0];
    let size = (y0[0].abs() + y0[1].abs()) * scale;
    if c0.abs() <= 1e-10 * size {
        return Err(Error::ParallelSolutions { wronskian: c0 });
    }
    let c1 = y0[0] / (c0 * yc[c][0]);
    // I(y) = ∫_0^y ρ / Y_c², accumulated outward from the centre
    let f: Vec<f64> = (lo..=hi).map(|i| rho[i] / (yc[i][0] * yc[i][0])).collect();
    // accumulate outward from the centre: the integrand grows towards the far end
    let int: Vec<f64> = if lo == 0 {
        crate::grid::cumulative_from_right(&f, h).iter().map(|v| -v).collect()
    } else {
        cumulative_from_left(&f, h)
    };
    let sigma = j.direction.sigma();
    let mut scaled = vec![[0.0; 2]; n];
    for (i, s) in scaled.iter_mut().enumerate() {
        if (lo..=hi).contains(&i) && i != c {
            let int = int[i - lo];
            let yv = c0 * yc[i][0] * (int + c1);
            let dv = c0 * (yc[i][1] * (int + c1) + rho[i] / yc[i][0]);
            let e = (sigma * j.k * g.point(i)).exp();
            *s = [e * yv, e * dv];
        } else {
            *s = j.scaled(i);
        }
    }
    Ok(JostSolution { scaled, lo: 0, ..j.clone() })
}

/// Half-line a vector Volterra equation is posed on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLine {
    /// `Z(y) = U(y) + ∫_y^{L} K(y, w) Z(w) dw` for `y ≥ a`.
    RightFrom(f64),
    /// `Z(y) = U(y) + ∫_{−L}^{y} K(y, w) Z(w) dw` for `y ≤ a`.
    LeftFrom(f64),
}

pub type Kernel<'a> = dyn Fn(f64, f64) -> [[f64; 2]; 2] + Sync + 'a;
pub type Inhomogeneity<'a> = dyn Fn(f64) -> [f64; 2] + Sync + 'a;

pub struct VolterraProblem<'a> {
    pub kernel: Box<Kernel<'a>>,
    pub inhomogeneity: Box<Inhomogeneity<'a>>,
    pub halfline: HalfLine,
    /// `μ = ∫ sup_y ‖K(y, w)‖ dw` (max-row-sum norm).
    pub mu_bound: f64,
}

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub points: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub iterations: usize,
}

impl VolterraSolution {
    /// `sup_y max(|Z₁|, |Z₂|)`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max)
    }
}

/// Picard iteration for a general kernel on the grid points of the half-line,
/// `O(N²)` per sweep with the four-point rule on each tail.
pub fn solve_volterra(p: &VolterraProblem, grid: &Grid, tol: f64, max_iterations: usize) -> Result<VolterraSolution> {
    if !p.mu_bound.is_finite() {
        return Err(Error::InvalidArgument("kernel bound μ must be finite".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let all = grid.points();
    let h = grid.step();
    let (points, right) = match p.halfline {
        HalfLine::RightFrom(a) => (all.into_iter().filter(|&y| y >= a - 1e-12).collect::<Vec<_>>(), true),
        HalfLine::LeftFrom(a) => (all.into_iter().filter(|&y| y <= a + 1e-12).collect::<Vec<_>>(), false),
    };
    let m = points.len();
    if m == 0 {
        return Err(Error::InvalidArgument("half-line does not meet the grid".into()));
    }
    let u: Vec<[f64; 2]> = points.iter().map(|&y| (p.inhomogeneity)(y)).collect();
    // tail(i) = indices of the integration range and their weights
    let tail = |i: usize| -> (usize, Vec<f64>) {
        if right {
            (i, integration_weights(m - i, h))
        } else {
            (0, integration_weights(i + 1, h))
        }
    };
    let weights: Vec<(usize, Vec<f64>)> = (0..m).map(tail).collect();
    let mut z = u.clone();
    let mut last = f64::INFINITY;
    for iter in 1..=max_iterations {
        let next: Vec<[f64; 2]> = (0..m)
            .into_par_iter()
            .map(|i| {
                let (start, w) = &weights[i];
                let mut acc = u[i];
                for (j, wt) in w.iter().enumerate() {
                    let k = (p.kernel)(points[i], points[start + j]);
                    let zz = z[start + j];
                    acc[0] += wt * (k[0][0] * zz[0] + k[0][1] * zz[1]);
                    acc[1] += wt * (k[1][0] * zz[0] + k[1][1] * zz[1]);
                }
                acc
            })
            .collect();
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (a, b) in z.iter().zip(&next) {
            diff = diff.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            size = size.max(b[0].abs()).max(b[1].abs());
        }
        z = next;
        last = diff / size.max(f64::MIN_POSITIVE);
        if last <= tol {
            return Ok(VolterraSolution { points, values: z, iterations: iter });
        }
    }
    Err(Error::NoConvergence { iterations: max_iterations, last_update: last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_phi4, builtin_sine_gordon, Potential};
    use std::f64::consts::SQRT_2;

    fn ls_operator(pot: &Potential, kink: &crate::model::KinkS, grid: Grid) -> LinearOperator {
        let m_sq = pot.m_sq;
        LinearOperator::new(grid, m_sq, |y| pot.d2f(kink.profile(y)) - m_sq, |_| 0.0)
    }

    /// Sup of `|a/a(c) - b/b(c)|` on `-1 ≤ y ≤ r`, the side where the `+∞`
    /// solution is well conditioned.
    fn shape_error(j: &JostSolution, f: impl Fn(f64) -> f64, r: f64) -> f64 {
        let g = j.grid();
        let c = g.center();
        let (s, t) = (j.y(c), f(0.0));
        (0..g.len())
            .filter(|&i| g.point(i) >= -1.0 && g.point(i) <= r)
            .map(|i| (j.y(i) / s - f(g.point(i)) / t).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_solution_is_exponential() {
        let g = Grid::new(10.0, 1024).unwrap();
        let op = LinearOperator::free(g, 2.0);
        let j = jost(&op, 1.0, Direction::PlusInfinity, &JostOptions::default()).unwrap();
        for i in (0..g.len()).step_by(37) {
            let y = g.point(i);
            assert!((j.y(i) - (-y).exp()).abs() <= 1e-13 * (-y).exp());
            assert!((j.dy(i) + (-y).exp()).abs() <= 1e-13 * (-y).exp());
        }
        let t = jost_threshold(&op, Direction::MinusInfinity, &JostOptions::default()).unwrap();
        assert!((0..g.len()).all(|i| t.value(i) == [1.0, 0.0]));
    }

    #[test]
    fn phi4_zero_mode_and_internal_mode() {
        let (pot, kink) = builtin_phi4();
        let g = Grid::new(20.0, 8192).unwrap();
        let op = ls_operator(&pot, &kink, g);
        let opts = JostOptions::default();
        let j0 = jost(&op, 0.0, Direction::PlusInfinity, &opts).unwrap();
        let sech2 = |y: f64| (1.0 / (y / SQRT_2).cosh()).powi(2);
        let e0 = shape_error(&j0, sech2, 8.0);
        assert!(e0 < 1e-8, "{e0}");
        let j1 = jost(&op, 1.5, Direction::MinusInfinity, &opts).unwrap();
        let odd = |y: f64| (y / SQRT_2).tanh() / (y / SQRT_2).cosh();
        // normalize by the derivative at 0 since the mode vanishes there
        let c = g.center();
        let s = j1.dy(c) / (1.0 / SQRT_2);
        let err = (0..g.len())
            .filter(|&i| g.point(i).abs() <= 8.0)
            .map(|i| (j1.y(i) / s - odd(g.point(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn threshold_resonances() {
        let opts = JostOptions::default();
        let (pot, kink) = builtin_sine_gordon();
        let g = Grid::new(20.0, 8192).unwrap();
        let op = ls_operator(&pot, &kink, g);
        let r = jost_threshold(&op, Direction::PlusInfinity, &opts).unwrap();
        // tanh vanishes at 0: compare against the boundary value instead
        let n = g.len() - 1;
        let err = (0..g.len()).map(|i| (r.y(i) - g.point(i).tanh() / g.point(n).tanh()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let (pot, kink) = builtin_phi4();
        let op = ls_operator(&pot, &kink, g);
        let r = jost_threshold(&op, Direction::PlusInfinity, &opts).unwrap();
        let f = |y: f64| {
            let z = y / SQRT_2;
            2.0 * z.tanh().powi(2) - 1.0 / z.cosh().powi(2)
        };
        let err = (0..g.len()).map(|i| (r.y(i) - f(g.point(i)) / f(g.point(n))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn picard_agrees_with_ode() {
        let g = Grid::new(20.0, 8192).unwrap();
        let opts = JostOptions::default();
        for (pot, kink) in [builtin_phi4(), builtin_sine_gordon()] {
            let op = ls_operator(&pot, &kink, g);
            for &lambda in &[-0.5, 0.0, 0.5 * pot.m_sq, 0.99 * pot.m_sq] {
                for dir in [Direction::PlusInfinity, Direction::MinusInfinity] {
                    jost(&op, lambda, dir, &opts).unwrap();
                }
            }
            jost_threshold(&op, Direction::PlusInfinity, &opts).unwrap();
        }
    }

    #[test]
    fn drifted_reflection_matches_direct_integration() {
        let g = Grid::new(15.0, 4096).unwrap();
        let op = LinearOperator::new(g, 1.0, |y| -2.0 / y.cosh().powi(2), |y| 0.05 * y * (-y * y).exp());
        let opts = JostOptions::default();
        let m = jost(&op, 0.3, Direction::MinusInfinity, &opts).unwrap();
        let k = m.k;
        // minus solution: e^{-ky}(Y, Y') → (1, k) at the left end
        assert!((m.scaled(0)[0] - 1.0).abs() < 1e-15 && (m.scaled(0)[1] - k).abs() < 1e-15);
        // Abel: ρ⁻¹ W constant
        let p = jost(&op, 0.3, Direction::PlusInfinity, &opts).unwrap();
        let rho = op.abel_weight();
        let w: Vec<f64> = (0..g.len()).map(|i| wronskian(&p, &m, i) / rho[i]).collect();
        let spread = w.iter().map(|v| (v - w[0]).abs()).fold(0.0, f64::max);
        assert!(spread < 1e-9 * w[0].abs(), "{spread}");
    }

    #[test]
    fn extension_continues_the_solution() {
        let (pot, kink) = builtin_phi4();
        let g = Grid::new(20.0, 8192).unwrap();
        let op = ls_operator(&pot, &kink, g);
        let opts = JostOptions::without_cross_check();
        let half = jost_half(&op, 0.75, Direction::PlusInfinity, &opts).unwrap();
        let comp = jost_half(&op, 0.75, Direction::MinusInfinity, &opts).unwrap();
        let ext = extend_full_line(&half, &comp, &op).unwrap();
        let full = jost(&op, 0.75, Direction::PlusInfinity, &opts).unwrap();
        let c = g.center();
        let jump = (ext.y(c - 1) - full.y(c - 1)).abs().max((ext.dy(c - 1) - full.dy(c - 1)).abs());
        assert!(jump < 1e-10, "{jump}");
        assert!(ext.scaled_distance(&full) < 1e-8);
        // growth e^{k|y|} on the left
        let (i1, i2) = (g.len() / 10, g.len() / 5);
        let slope = (ext.y(i1).abs().ln() - ext.y(i2).abs().ln()) / (g.point(i2) - g.point(i1));
        assert!((slope - ext.k).abs() < 1e-4, "{slope} vs {}", ext.k);
        let free = LinearOperator::free(g, 2.0);
        let half = jost_half(&free, 1.0, Direction::PlusInfinity, &opts).unwrap();
        let comp = jost_half(&free, 1.0, Direction::MinusInfinity, &opts).unwrap();
        let ext = extend_full_line(&half, &comp, &free).unwrap();
        for i in (0..g.len()).step_by(101) {
            let y = g.point(i);
            assert!((ext.y(i) / (-y).exp() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn parallel_companion_is_rejected() {
        let (pot, kink) = builtin_phi4();
        let g = Grid::new(20.0, 8192).unwrap();
        let op = ls_operator(&pot, &kink, g);
        let opts = JostOptions::without_cross_check();
        let half = jost_half(&op, 0.0, Direction::PlusInfinity, &opts).unwrap();
        let comp = jost_half(&op, 0.0, Direction::MinusInfinity, &opts).unwrap();
        assert!(matches!(extend_full_line(&half, &comp, &op), Err(Error::ParallelSolutions { .. })));
    }

    #[test]
    fn threshold_parameter_and_slow_decay() {
        let g = Grid::new(10.0, 512).unwrap();
        let op = LinearOperator::free(g, 1.0);
        assert!(matches!(
            jost(&op, 1.0, Direction::PlusInfinity, &JostOptions::default()),
            Err(Error::ThresholdParameter { .. })
        ));
        let slow = LinearOperator::new(g, 1.0, |y| 1.0 / (1.0 + y * y), |_| 0.0);
        let opts = JostOptions { decay_bound: 1.0, ..JostOptions::default() };
        assert!(matches!(jost_threshold(&slow, Direction::PlusInfinity, &opts), Err(Error::SlowDecay { .. })));
    }

    #[test]
    fn volterra_trivial_and_scalar_kernel() {
        let g = Grid::new(20.0, 4000).unwrap();
        let zero = VolterraProblem {
            kernel: Box::new(|_, _| [[0.0; 2]; 2]),
            inhomogeneity: Box::new(|y| [y.sin(), 1.0]),
            halfline: HalfLine::RightFrom(0.0),
            mu_bound: 0.0,
        };
        let s = solve_volterra(&zero, &g, 1e-14, 10).unwrap();
        assert!(s.points.iter().zip(&s.values).all(|(y, v)| v[0] == y.sin() && v[1] == 1.0));
        // Z(y) = 1 + ∫_y^∞ e^{-w} Z(w) dw has Z = exp(e^{-y}) when the tail is negligible
        let p = VolterraProblem {
            kernel: Box::new(|_, w| [[(-w).exp(), 0.0], [0.0, 0.0]]),
            inhomogeneity: Box::new(|_| [1.0, 0.0]),
            halfline: HalfLine::RightFrom(0.0),
            mu_bound: 1.0,
        };
        let s = solve_volterra(&p, &g, 1e-15, 100).unwrap();
        let l = g.half_width();
        let err = s
            .points
            .iter()
            .zip(&s.values)
            .map(|(&y, v)| (v[0] - ((-y).exp() - (-l).exp()).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
        assert!(s.sup_norm() <= p.mu_bound.exp());
        // the same discrete equation solved by back substitution
        let m = s.points.len();
        let h = g.step();
        let mut direct = vec![0.0; m];
        for i in (0..m).rev() {
            let w = integration_weights(m - i, h);
            let y = s.points[i];
            let rest: f64 = (1..m - i).map(|j| w[j] * (-s.points[i + j]).exp() * direct[i + j]).sum();
            direct[i] = (1.0 + rest) / (1.0 - w[0] * (-y).exp());
        }
        let gap = direct.iter().zip(&s.values).map(|(d, v)| (d - v[0]).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "{gap}");
    }
}
