//! Finite-difference eigensolver for `L_T` with Dirichlet conditions on `[−L, L]`.
//!
//! The three-point stencil of `−u'' − bu' + qu` is symmetrised exactly by a
//! diagonal similarity `v = D u`, the discrete analogue of `v = ω^{1/2} u`.
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration. Nothing here depends on the Jost or spectral modules.

use rayon::prelude::*;

use crate::coeffs::TransformedCoefficients;
use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal, Grid};
use crate::kink::KinkT;
use crate::model::{KinkS, Potential};

#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    grid: Grid,
    pub m_sq: f64,
    /// Diagonal of the symmetric matrix, one entry per interior point.
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// `F''(T) − c + b²/4 + b'/2` at the interior points.
    pub v_eff: Vec<f64>,
    /// Coefficients of the original stencil: `lower[i]` multiplies `u_{i−1}`, `upper[i]` multiplies `u_{i+1}`.
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Similarity weights `D_i` (normalised to 1 at the left end).
    similarity: Vec<f64>,
}

impl DiscretizedOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Interior points (the unknowns).
    pub fn points(&self) -> Vec<f64> {
        (1..self.grid.intervals()).map(|i| self.grid.point(i)).collect()
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `u = D^{−1} v`, an eigenvector of the nonsymmetric stencil.
    pub fn back_transform(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.similarity).map(|(x, d)| x / d).collect()
    }

    /// `max |(A u − λ u)_i| / max |u|` for the nonsymmetric stencil `A`.
    pub fn stencil_residual(&self, lambda: f64, u: &[f64]) -> f64 {
        let n = u.len();
        let mut res: f64 = 0.0;
        for i in 0..n {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            let r = self.lower[i] * left + (self.diag[i] - lambda) * u[i] + self.upper[i] * right;
            res = res.max(r.abs());
        }
        res / u.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let off2 = if i > 0 { self.offdiag[i - 1].powi(2) } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { off2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `j`-th eigenvalue (from 0) by bisection on the Sturm count.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    fn inverse_iteration(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        let shift = lambda - 1e-10 * (1.0 + lambda.abs());
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect();
        for _ in 0..4 {
            v = solve_tridiagonal(&self.offdiag, &diag, &self.offdiag, &v)?;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// One eigenpair of the discretised operator. `vector` is the symmetric-form
/// eigenvector (unit Euclidean norm), `u` its back-transform.
#[derive(Debug, Clone)]
pub struct OracleEigenpair {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub u: Vec<f64>,
}

/// Builds the operator `−∂² − b∂ + q` from sampled coefficients.
pub fn discretize_fn(
    m_sq: f64,
    half_width: f64,
    intervals: usize,
    q: impl Fn(f64) -> f64 + Sync,
    b: impl Fn(f64) -> f64 + Sync,
    db: impl Fn(f64) -> f64 + Sync,
) -> Result<DiscretizedOperator> {
    let grid = Grid::new(half_width, intervals)?;
    if intervals < 3 {
        return Err(Error::InvalidGrid("at least three intervals are needed".into()));
    }
    let h = grid.step();
    let pts: Vec<f64> = (1..intervals).map(|i| grid.point(i)).collect();
    let bs: Vec<f64> = pts.par_iter().map(|&y| b(y)).collect();
    let qs: Vec<f64> = pts.par_iter().map(|&y| q(y)).collect();
    let mut v_eff = Vec::with_capacity(pts.len());
    for (i, &y) in pts.iter().enumerate() {
        let d = db(y);
        if !d.is_finite() {
            return Err(Error::NonDifferentiableDrift(format!("b' is not finite at y = {y}")));
        }
        v_eff.push(qs[i] + 0.25 * bs[i] * bs[i] + 0.5 * d);
    }
    let inv_h2 = 1.0 / (h * h);
    let lower: Vec<f64> = bs.iter().map(|b| -inv_h2 + b / (2.0 * h)).collect();
    let upper: Vec<f64> = bs.iter().map(|b| -inv_h2 - b / (2.0 * h)).collect();
    if let Some(i) = bs.iter().position(|b| b.abs() * h >= 2.0) {
        return Err(Error::InvalidArgument(format!("grid too coarse for the drift at y = {}: |b| h ≥ 2", pts[i])));
    }
    let diag: Vec<f64> = qs.iter().map(|q| q + 2.0 * inv_h2).collect();
    let n = pts.len();
    let mut offdiag = Vec::with_capacity(n - 1);
    let mut similarity = Vec::with_capacity(n);
    let mut log_d: f64 = 0.0;
    similarity.push(1.0);
    for i in 0..n - 1 {
        // (D_{i+1}/D_i)² = upper_i / lower_{i+1}
        offdiag.push(-(upper[i] * lower[i + 1]).sqrt());
        log_d += 0.5 * (upper[i] / lower[i + 1]).ln();
        similarity.push(log_d.exp());
    }
    Ok(DiscretizedOperator { grid, m_sq, diag, offdiag, v_eff, lower, upper, similarity })
}

/// Discretises `L_T` for a converged kink.
pub fn discretize(
    pot: &Potential,
    tc: &TransformedCoefficients,
    kink: &KinkT,
    half_width: f64,
    intervals: usize,
) -> Result<DiscretizedOperator> {
    discretize_fn(
        pot.m_sq,
        half_width,
        intervals,
        |y| pot.d2f(kink.t(y)) - tc.c(y),
        |y| tc.b(y),
        |y| tc.db(y),
    )
}

/// Discretises `L_S − b∂ + d` for a perturbation given directly.
pub fn discretize_parts(
    pot: &Potential,
    s: &KinkS,
    b: impl Fn(f64) -> f64 + Sync,
    db: impl Fn(f64) -> f64 + Sync,
    d: impl Fn(f64) -> f64 + Sync,
    half_width: f64,
    intervals: usize,
) -> Result<DiscretizedOperator> {
    discretize_fn(pot.m_sq, half_width, intervals, |y| pot.d2f(s.profile(y)) + d(y), b, db)
}

/// The lowest `count` eigenpairs, sorted ascending.
pub fn eigen_bottom(dop: &DiscretizedOperator, count: usize) -> Result<Vec<OracleEigenpair>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let lambdas: Vec<f64> = (0..count).into_par_iter().map(|j| dop.eigenvalue(j)).collect();
    for w in lambdas.windows(2) {
        if w[1] - w[0] <= 64.0 * f64::EPSILON * (1.0 + w[0].abs()) {
            return Err(Error::ClusterTooTight { near: w[0] });
        }
    }
    lambdas
        .into_par_iter()
        .map(|lambda| {
            let vector = dop.inverse_iteration(lambda)?;
            let u = dop.back_transform(&vector);
            Ok(OracleEigenpair { lambda, vector, u })
        })
        .collect()
}

/// Eigenvalues strictly below `level`.
pub fn eigenvalues_below(dop: &DiscretizedOperator, level: f64) -> Vec<f64> {
    let n = dop.count_below(level);
    (0..n).into_par_iter().map(|j| dop.eigenvalue(j)).collect()
}

/// Eigenvalues below `level` extrapolated from `n` and `2n` intervals,
/// `(4λ_{2n} − λ_n)/3`, removing the `O(h²)` stencil error.
pub fn extrapolated_eigenvalues(
    build: impl Fn(usize) -> Result<DiscretizedOperator>,
    n: usize,
    level: f64,
) -> Result<Vec<f64>> {
    let coarse = build(n)?;
    let fine = build(2 * n)?;
    let a = eigenvalues_below(&coarse, level);
    let b = eigenvalues_below(&fine, level);
    Ok(a.iter().zip(&b).map(|(x, y)| (4.0 * y - x) / 3.0).collect())
}

/// Smallest `L ≥ base` with `e^{−2kL} < 0.1 (m² − λ)`, and whether it exceeds `max`
/// (in which case `max` is returned and truncation error dominates).
pub fn half_width_for(m_sq: f64, lambda: f64, base: f64, max: f64) -> (f64, bool) {
    let gap = m_sq - lambda;
    if gap <= 0.0 {
        return (max, true);
    }
    let k = gap.sqrt();
    let need = (10.0 / gap).ln() / (2.0 * k);
    if need > max {
        (max, true)
    } else {
        (need.max(base), false)
    }
}

/// Least-squares slope of `ln|v|` against `|y|` on `L/2 ≤ |y| ≤ 3L/4`, averaged over both sides.
pub fn decay_rate(dop: &DiscretizedOperator, v: &[f64]) -> f64 {
    let pts = dop.points();
    let l = dop.grid.half_width();
    let mut slopes = Vec::new();
    for side in [-1.0, 1.0] {
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (y, x) in pts.iter().zip(v) {
            let r = side * y;
            if r >= 0.5 * l && r <= 0.75 * l && *x != 0.0 {
                let ly = x.abs().ln();
                sx += r;
                sy += ly;
                sxx += r * r;
                sxy += r * ly;
                n += 1.0;
            }
        }
        if n >= 2.0 {
            slopes.push((n * sxy - sx * sy) / (n * sxx - sx * sx));
        }
    }
    slopes.iter().sum::<f64>() / slopes.len().max(1) as f64
}
