//! The stationary kink `T = S + S_b` of the variable-coefficient equation.
//!
//! `S_b` solves `L_b S_b = bS' + cS − N(S, S_b)` with
//! `L_b = −∂² − b∂ − c + F''(S)` and `N(S, η) = F'(S+η) − F'(S) − F''(S)η`.
//! It is found as the fixed point of the Green's-function map.

use crate::coeffs::TransformedCoefficients;
use crate::error::{Error, Result};
use crate::grid::{cell_stencil, derivative, interp_uniform, l1_linf, Grid};
use crate::jost::{jost, Direction, JostOptions, JostSolution, LinearOperator};
use crate::model::{KinkS, Potential};

/// `N(S, η) = F'(S+η) − F'(S) − F''(S)η`.
pub fn nonlinearity(pot: &Potential, s: f64, eta: f64) -> f64 {
    pot.df(s + eta) - pot.df(s) - pot.d2f(s) * eta
}

/// The operator `L_b` at `λ = 0` in Jost form.
pub fn lb_operator(pot: &Potential, kink: &KinkS, tc: &TransformedCoefficients, grid: Grid) -> LinearOperator {
    let m_sq = pot.m_sq;
    LinearOperator::new(grid, m_sq, |y| pot.d2f(kink.profile(y)) - tc.c(y) - m_sq, |y| tc.b(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensOptions {
    /// Smallest accepted `|W_Y(0)|`, relative to the Jost normalisation.
    pub wronskian_floor: f64,
}

impl Default for GreensOptions {
    fn default() -> Self {
        Self { wronskian_floor: 1e-9 }
    }
}

/// Inverse of `L_b`:
/// `(Gη)(y) = Y_∞(y) ∫_{−∞}^y Y_{−∞}η/W + Y_{−∞}(y) ∫_y^∞ Y_∞η/W`
/// with `W = det(Y_∞, Y_{−∞}) = W(0) exp(−∫_0^y b)`.
#[derive(Debug, Clone)]
pub struct GreensFunction {
    pub y_plus: JostSolution,
    pub y_minus: JostSolution,
    /// `W_Y(0)`.
    pub wronskian0: f64,
    /// `W_Y` at the grid points, from Abel's formula.
    pub wronskian: Vec<f64>,
    /// `exp(∫_0^y b)` at the grid points.
    pub abel_weight: Vec<f64>,
    /// Largest relative deviation of the pointwise Wronskian from Abel's formula.
    pub abel_residual: f64,
    /// `F''(S) − c` at the grid points.
    q: Vec<f64>,
    b: Vec<f64>,
    grid: Grid,
}

/// Builds the Green's function of `L_b` from the `λ = 0` Jost solutions.
pub fn build_greens(
    pot: &Potential,
    kink: &KinkS,
    tc: &TransformedCoefficients,
    grid: &Grid,
    opts: &GreensOptions,
) -> Result<GreensFunction> {
    let op = lb_operator(pot, kink, tc, *grid);
    let jopts = JostOptions::without_cross_check();
    let y_plus = jost(&op, 0.0, Direction::PlusInfinity, &jopts)?;
    let y_minus = jost(&op, 0.0, Direction::MinusInfinity, &jopts)?;
    let c = grid.center();
    let wronskian0 = crate::jost::wronskian(&y_plus, &y_minus, c);
    if !(wronskian0.abs() > opts.wronskian_floor) {
        return Err(Error::ZeroEigenvalueDetected { wronskian: wronskian0 });
    }
    let rho = op.abel_weight();
    let abel_weight: Vec<f64> = rho.iter().map(|r| rho[c] / r).collect();
    let wronskian: Vec<f64> = abel_weight.iter().map(|a| wronskian0 / a).collect();
    let abel_residual = (0..grid.len())
        .map(|i| (crate::jost::wronskian(&y_plus, &y_minus, i) * abel_weight[i] - wronskian0).abs())
        .fold(0.0, f64::max)
        / wronskian0.abs();
    let q = grid.sample(|y| pot.d2f(kink.profile(y)) - tc.c(y));
    let b = grid.sample(|y| tc.b(y));
    Ok(GreensFunction { y_plus, y_minus, wronskian0, wronskian, abel_weight, abel_residual, q, b, grid: *grid })
}

/// `u = Gη` with `u'` and `u'' = (F''(S) − c)u − bu' − η` from the representation.
#[derive(Debug, Clone)]
pub struct GreensImage {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
}

impl GreensFunction {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `G(y_i, y_j)`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        // Y_{−∞}(min) Y_∞(max) / W(y_j)
        self.y_minus.y(lo) * self.y_plus.y(hi) / self.wronskian[j]
    }

    /// Applies `G` to `η` sampled on the grid with fourth-order cell rules and
    /// exponentially scaled recursions (no overflow for large `|y|`).
    pub fn apply(&self, eta: &[f64]) -> GreensImage {
        let g = &self.grid;
        let n = g.len();
        let h = g.step();
        let k = self.y_plus.k;
        let decay = (-k * h).exp();
        let fm: Vec<f64> = (0..n).map(|j| self.y_minus.scaled(j)[0] * eta[j] / self.wronskian[j]).collect();
        let fp: Vec<f64> = (0..n).map(|j| self.y_plus.scaled(j)[0] * eta[j] / self.wronskian[j]).collect();
        // a[i] = ∫_{−L}^{y_i} e^{−k(y_i − w)} fm, b[i] = ∫_{y_i}^{L} e^{−k(w − y_i)} fp
        let mut a = vec![0.0; n];
        for i in 0..n - 1 {
            let (idx, w) = cell_stencil(i, n);
            let local: f64 = (0..4)
                .map(|s| w[s] * h / 24.0 * (-k * (i as f64 + 1.0 - idx[s] as f64) * h).exp() * fm[idx[s]])
                .sum();
            a[i + 1] = decay * a[i] + local;
        }
        let mut bb = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let (idx, w) = cell_stencil(i, n);
            let local: f64 = (0..4)
                .map(|s| w[s] * h / 24.0 * (-k * (idx[s] as f64 - i as f64) * h).exp() * fp[idx[s]])
                .sum();
            bb[i] = decay * bb[i + 1] + local;
        }
        let mut u = vec![0.0; n];
        let mut du = vec![0.0; n];
        let mut d2u = vec![0.0; n];
        for i in 0..n {
            let sp = self.y_plus.scaled(i);
            let sm = self.y_minus.scaled(i);
            u[i] = sp[0] * a[i] + sm[0] * bb[i];
            du[i] = sp[1] * a[i] + sm[1] * bb[i];
            d2u[i] = self.q[i] * u[i] - self.b[i] * du[i] - eta[i];
        }
        GreensImage { u, du, d2u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SbNorms {
    pub l1: f64,
    pub linf: f64,
    pub d_l1: f64,
    pub d_linf: f64,
}

impl SbNorms {
    pub fn total(&self) -> f64 {
        self.l1 + self.linf + self.d_l1 + self.d_linf
    }
}

/// The perturbed kink on a grid.
#[derive(Debug, Clone)]
pub struct KinkT {
    pub pot: Potential,
    pub s: KinkS,
    grid: Grid,
    s_b: Vec<f64>,
    d_s_b: Vec<f64>,
    /// `‖−T'' − bT' − cT + F'(T)‖_∞` with `S_b''` from the integral equation.
    pub residual_inf: f64,
    /// The same residual with `T''` from sixth-order finite differences.
    pub residual_fd_inf: f64,
    pub norms: SbNorms,
    pub iterations: usize,
    /// Largest ratio of successive updates, an estimate of the Lipschitz constant of the map.
    pub contraction_factor: f64,
    /// `W_Y(0)` of the Green's function used (`None` when `b = c = 0`).
    pub wronskian0: Option<f64>,
}

impl KinkT {
    /// `T = S` (no coefficients).
    pub fn unperturbed(pot: &Potential, kink: &KinkS, grid: &Grid) -> Self {
        let n = grid.len();
        let zero = SbNorms { l1: 0.0, linf: 0.0, d_l1: 0.0, d_linf: 0.0 };
        Self {
            pot: pot.clone(),
            s: kink.clone(),
            grid: *grid,
            s_b: vec![0.0; n],
            d_s_b: vec![0.0; n],
            residual_inf: 0.0,
            residual_fd_inf: 0.0,
            norms: zero,
            iterations: 0,
            contraction_factor: 0.0,
            wronskian0: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s_b_samples(&self) -> &[f64] {
        &self.s_b
    }

    pub fn d_s_b_samples(&self) -> &[f64] {
        &self.d_s_b
    }

    /// `S_b(y)`; cubic interpolation between grid points, zero outside the grid.
    pub fn s_b(&self, y: f64) -> f64 {
        interp_uniform(&self.s_b, self.grid.point(0), self.grid.step(), y, 0.0)
    }

    pub fn d_s_b(&self, y: f64) -> f64 {
        interp_uniform(&self.d_s_b, self.grid.point(0), self.grid.step(), y, 0.0)
    }

    pub fn t(&self, y: f64) -> f64 {
        self.s.profile(y) + self.s_b(y)
    }

    pub fn t_prime(&self, y: f64) -> f64 {
        self.s.derivative(y) + self.d_s_b(y)
    }

    /// `T` at grid point `i` (no interpolation).
    pub fn t_at(&self, i: usize) -> f64 {
        self.s.profile(self.grid.point(i)) + self.s_b[i]
    }

    pub fn t_prime_at(&self, i: usize) -> f64 {
        self.s.derivative(self.grid.point(i)) + self.d_s_b[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when the `L¹ + L∞` norm of the update is below this.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_iterations: 200 }
    }
}

fn forcing(kink: &KinkS, tc: &TransformedCoefficients, grid: &Grid) -> Vec<f64> {
    grid.sample(|y| tc.b(y) * kink.derivative(y) + tc.c(y) * kink.profile(y))
}

fn x_norm(f: &[f64], h: f64) -> f64 {
    let (a, b) = l1_linf(f, h);
    a + b
}

/// `∫ G(·, w)[bS' + cS](w) dw`, the first-order approximation of `S_b`.
pub fn first_order_sb(kink: &KinkS, tc: &TransformedCoefficients, gf: &GreensFunction) -> Vec<f64> {
    gf.apply(&forcing(kink, tc, gf.grid())).u
}

/// Iterates `S_b ← G(bS' + cS − N(S, S_b))` from `S_b = 0` until the update
/// is below `opts.tol` in the `L¹ + L∞` norm, or stops shrinking below `1e−9`.
pub fn fixed_point_sb(
    pot: &Potential,
    kink: &KinkS,
    tc: &TransformedCoefficients,
    gf: &GreensFunction,
    opts: &FixedPointOptions,
) -> Result<KinkT> {
    let grid = *gf.grid();
    let h = grid.step();
    let n = grid.len();
    let f0 = forcing(kink, tc, &grid);
    let s: Vec<f64> = grid.sample(|y| kink.profile(y));
    let mut sb = vec![0.0; n];
    let mut image = GreensImage { u: vec![0.0; n], du: vec![0.0; n], d2u: vec![0.0; n] };
    let mut prev_update = f64::NAN;
    let mut factor: f64 = 0.0;
    let mut iterations = 0;
    let mut eta = f0.clone();
    let mut converged = f0.iter().all(|v| *v == 0.0);
    while !converged {
        iterations += 1;
        for i in 0..n {
            eta[i] = f0[i] - nonlinearity(pot, s[i], sb[i]);
        }
        image = gf.apply(&eta);
        let diff: Vec<f64> = image.u.iter().zip(&sb).map(|(a, b)| a - b).collect();
        let update = x_norm(&diff, h);
        sb.clone_from(&image.u);
        if iterations >= 2 && prev_update > 1e3 * opts.tol {
            let ratio = update / prev_update;
            factor = factor.max(ratio);
            if ratio >= 1.0 && iterations >= 3 {
                return Err(Error::ContractionFailure { factor: ratio });
            }
        }
        if !update.is_finite() {
            return Err(Error::ContractionFailure { factor: f64::INFINITY });
        }
        // stagnation far below any meaningful size is the rounding floor of G
        let stalled = iterations >= 3 && update <= 1e-9 && update >= 0.5 * prev_update;
        prev_update = update;
        if update <= opts.tol || stalled {
            converged = true;
        } else if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence { iterations, last_update: update });
        }
    }
    // residual of the stationary equation with S'' = F'(S)
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let y = grid.point(i);
        let t = s[i] + sb[i];
        let tp = kink.derivative(y) + image.du[i];
        let s2 = pot.df(s[i]);
        let eta_final = f0[i] - nonlinearity(pot, s[i], sb[i]);
        let sb2 = image.d2u[i] + eta[i] - eta_final;
        let r = -(s2 + sb2) - tc.b(y) * tp - tc.c(y) * t + pot.df(t);
        residual = residual.max(r.abs());
    }
    let t_samples: Vec<f64> = s.iter().zip(&sb).map(|(a, b)| a + b).collect();
    let tpp = derivative(&derivative(&t_samples, h), h);
    let residual_fd = (4..n - 4)
        .map(|i| {
            let y = grid.point(i);
            let tp = kink.derivative(y) + image.du[i];
            (-tpp[i] - tc.b(y) * tp - tc.c(y) * t_samples[i] + pot.df(t_samples[i])).abs()
        })
        .fold(0.0, f64::max);
    let (l1, linf) = l1_linf(&sb, h);
    let (d_l1, d_linf) = l1_linf(&image.du, h);
    Ok(KinkT {
        pot: pot.clone(),
        s: kink.clone(),
        grid,
        s_b: sb,
        d_s_b: image.du,
        residual_inf: residual,
        residual_fd_inf: residual_fd,
        norms: SbNorms { l1, linf, d_l1, d_linf },
        iterations,
        contraction_factor: factor,
        wronskian0: Some(gf.wronskian0),
    })
}

/// Builds `T`, skipping the Green's function when `b = c = 0`.
pub fn solve_kink(
    pot: &Potential,
    kink: &KinkS,
    tc: &TransformedCoefficients,
    grid: &Grid,
    greens: &GreensOptions,
    opts: &FixedPointOptions,
) -> Result<KinkT> {
    if tc.is_zero() {
        return Ok(KinkT::unperturbed(pot, kink, grid));
    }
    let gf = build_greens(pot, kink, tc, grid, greens)?;
    fixed_point_sb(pot, kink, tc, &gf, opts)
}
