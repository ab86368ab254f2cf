//! Evans-function analysis of `L_T = −∂² − b∂ − c + F''(T) = L_S − b∂ + d`.
//!
//! Eigenvalues below `m²` are zeros of `W_U(λ, 0) = det(U_∞(0), U_{−∞}(0))`.
//! Each scan point also records the number of sign changes of `U_∞`, which
//! equals the number of eigenvalues below `λ` and certifies the bracketing.

use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::TransformedCoefficients;
use crate::error::{Error, Result};
use crate::grid::{integrate, l1_linf, Grid};
use crate::jost::{jost, jost_threshold, wronskian, Direction, JostOptions, JostSolution, LinearOperator};
use crate::kink::{GreensFunction, KinkT};
use crate::model::{KinkS, Potential};

/// Drift `b` and potential perturbation `d = −c + F''(T) − F''(S)` of `L_T`.
#[derive(Debug, Clone)]
pub struct PerturbationData {
    pub pot: Potential,
    pub s: KinkS,
    grid: Grid,
    /// `L_T` in Jost form.
    op: LinearOperator,
    /// `L_S` in Jost form.
    op_s: LinearOperator,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    /// `−c + F'''(S) ∫G(bS' + cS)`; `None` when no Green's function was supplied.
    pub d_first_order: Option<Vec<f64>>,
    /// `(‖b‖_{L¹}, ‖d‖_{L¹})`.
    pub norms: (f64, f64),
    pub d_linf: f64,
}

fn ls_operator(pot: &Potential, s: &KinkS, grid: Grid) -> LinearOperator {
    let m_sq = pot.m_sq;
    LinearOperator::new(grid, m_sq, |y| pot.d2f(s.profile(y)) - m_sq, |_| 0.0)
}

impl PerturbationData {
    /// Perturbation given directly by `b(y)` and `d(y)`.
    pub fn from_parts(
        pot: &Potential,
        s: &KinkS,
        grid: &Grid,
        b: impl Fn(f64) -> f64 + Sync,
        d: impl Fn(f64) -> f64 + Sync,
    ) -> Self {
        let m_sq = pot.m_sq;
        let op = LinearOperator::new(*grid, m_sq, |y| pot.d2f(s.profile(y)) - m_sq + d(y), &b);
        Self::assemble(pot, s, grid, op, None)
    }

    fn assemble(pot: &Potential, s: &KinkS, grid: &Grid, op: LinearOperator, d_first_order: Option<Vec<f64>>) -> Self {
        let op_s = ls_operator(pot, s, *grid);
        let n = grid.len();
        let b: Vec<f64> = (0..n).map(|i| op.b(i)).collect();
        let d: Vec<f64> = (0..n).map(|i| op.v(i) - op_s.v(i)).collect();
        let h = grid.step();
        let (d_l1, d_linf) = l1_linf(&d, h);
        let norms = (l1_linf(&b, h).0, d_l1);
        Self { pot: pot.clone(), s: s.clone(), grid: *grid, op, op_s, b, d, d_first_order, norms, d_linf }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn unperturbed_operator(&self) -> &LinearOperator {
        &self.op_s
    }

    /// The same kink with `b = d = 0`.
    pub fn unperturbed(&self) -> PerturbationData {
        Self::assemble(&self.pot, &self.s, &self.grid, self.op_s.clone(), None)
    }
}

/// `d = −c + F''(T) − F''(S)` from a converged kink; the first-order form
/// uses `gf` when given.
pub fn compute_d(tc: &TransformedCoefficients, kink: &KinkT, gf: Option<&GreensFunction>) -> PerturbationData {
    let pot = &kink.pot;
    let s = &kink.s;
    let grid = *kink.grid();
    let m_sq = pot.m_sq;
    let op = LinearOperator::new(grid, m_sq, |y| pot.d2f(kink.t(y)) - tc.c(y) - m_sq, |y| tc.b(y));
    let first = gf.map(|gf| {
        let sb1 = crate::kink::first_order_sb(s, tc, gf);
        (0..grid.len())
            .map(|i| {
                let y = grid.point(i);
                -tc.c(y) + pot.d3f(s.profile(y)) * sb1[i]
            })
            .collect()
    });
    PerturbationData::assemble(pot, s, &grid, op, first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvansSample {
    pub lambda: f64,
    pub k: f64,
    /// `W_U(λ, 0)`.
    pub value: f64,
    /// `max |ω W_U(λ, y) − ω W_U(λ, 0)| / max ω|U_∞||U_{−∞}|` over the grid.
    pub abel_residual: f64,
    /// Sign changes of `U_∞` on the grid.
    pub nodes: usize,
}

fn node_count(j: &JostSolution) -> usize {
    let (lo, hi) = j.range();
    let mut count = 0;
    let mut last = 0.0;
    for i in lo..=hi {
        let v = j.scaled(i)[0];
        if v != 0.0 {
            if last != 0.0 && v.signum() != f64::signum(last) {
                count += 1;
            }
            last = v;
        }
    }
    count
}

fn evans_from(op: &LinearOperator, plus: &JostSolution, minus: &JostSolution) -> EvansSample {
    let g = op.grid();
    let c = g.center();
    let rho = op.abel_weight();
    let value = wronskian(plus, minus, c);
    // ω ∝ 1/ρ; compare ω W with its value at 0
    let mut dev: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..g.len() {
        let w = rho[c] / rho[i];
        let (a, b) = (plus.scaled(i), minus.scaled(i));
        dev = dev.max((w * wronskian(plus, minus, i) - value).abs());
        scale = scale.max(w * a[0].hypot(a[1]) * b[0].hypot(b[1]));
    }
    EvansSample { lambda: plus.lambda, k: plus.k, value, abel_residual: dev / scale, nodes: node_count(plus) }
}

fn jost_pair(op: &LinearOperator, lambda: f64) -> Result<(JostSolution, JostSolution)> {
    let opts = JostOptions::without_cross_check();
    if lambda == op.m_sq() {
        Ok((jost_threshold(op, Direction::PlusInfinity, &opts)?, jost_threshold(op, Direction::MinusInfinity, &opts)?))
    } else {
        Ok((jost(op, lambda, Direction::PlusInfinity, &opts)?, jost(op, lambda, Direction::MinusInfinity, &opts)?))
    }
}

/// `W_U(λ, 0)` with its Abel residual. At `λ = m²` the threshold solutions are used.
pub fn evans(pd: &PerturbationData, lambda: f64) -> Result<EvansSample> {
    let (p, m) = jost_pair(&pd.op, lambda)?;
    Ok(evans_from(&pd.op, &p, &m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Resonant,
    Nonresonant,
    EigenvalueAtThreshold,
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub lambda: f64,
    pub k: f64,
    /// `Y` on the grid, unit value at `y = 0` (unit derivative when `Y(0) ≈ 0`).
    pub eigenfunction: Vec<f64>,
    pub derivative: Vec<f64>,
    /// `sup (|Y| + |Y'|) e^{k|y|}`, finite for a genuine eigenfunction.
    pub decay_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftPrediction {
    pub lambda_star: f64,
    /// `∫ Y_* (d Y_* − b Y_*')`.
    pub a: f64,
    pub norm_sq: f64,
    pub predicted_lambda: f64,
    /// The same integral with `d` replaced by its first-order expansion.
    pub first_order_variant: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EigenvalueEmerges,
    NoNearbyEigenvalue,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceCriterion {
    /// `∫ R (dR − bR')`.
    pub value: f64,
    pub verdict: Verdict,
    /// The same integral with the first-order `d`.
    pub first_order_variant: Option<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub essential_edge: f64,
    pub eigenvalues: Vec<Eigenpair>,
    pub threshold_status: ThresholdStatus,
    /// `W_U(m², 0)` of the `(1, 0)`-normalised threshold solutions.
    pub threshold_wronskian: f64,
    /// `U_∞^{m²}` on the grid when the threshold is resonant.
    pub resonance_profile: Option<Vec<f64>>,
    pub drift_predictions: Vec<DriftPrediction>,
    /// Eigenvalues below the search interval (node count at its left end).
    pub below_search: usize,
    pub max_abel_residual: f64,
    pub scan: Vec<EvansSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub n_scan: usize,
    /// Bisection stops at this bracket width.
    pub root_tol: f64,
    /// `|W(m²)|` below this counts as a threshold zero.
    pub threshold_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { n_scan: 400, root_tol: 1e-10, threshold_tol: 1e-6 }
    }
}

/// `U_∞` on `y ≥ 0` joined to the matching multiple of `U_{−∞}` on `y < 0`,
/// so neither half carries the growing component.
fn normalized_eigenpair(plus: &JostSolution, minus: &JostSolution) -> Eigenpair {
    let g = plus.grid();
    let c = g.center();
    let n = g.len();
    let (p, m) = (plus.value(c), minus.value(c));
    let r = (p[0] * m[0] + p[1] * m[1]) / (m[0] * m[0] + m[1] * m[1]);
    let pick = |i: usize| if i >= c { plus.value(i) } else { let v = minus.value(i); [r * v[0], r * v[1]] };
    let vals: Vec<[f64; 2]> = (0..n).map(pick).collect();
    let amp = vals.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
    let scale = if p[0].abs() > 1e-6 * amp { p[0] } else { p[1] };
    let eigenfunction: Vec<f64> = vals.iter().map(|v| v[0] / scale).collect();
    let derivative: Vec<f64> = vals.iter().map(|v| v[1] / scale).collect();
    let decay_constant = (0..n)
        .map(|i| (eigenfunction[i].abs() + derivative[i].abs()) * (plus.k * g.point(i).abs()).exp())
        .fold(0.0, f64::max);
    Eigenpair { lambda: plus.lambda, k: plus.k, eigenfunction, derivative, decay_constant }
}

fn threshold(pd: &PerturbationData, tol: f64) -> Result<(ThresholdStatus, f64, Option<Vec<f64>>, EvansSample)> {
    let (p, m) = jost_pair(&pd.op, pd.pot.m_sq)?;
    let sample = evans_from(&pd.op, &p, &m);
    let g = pd.grid;
    let n = g.len();
    let r: Vec<f64> = (0..n).map(|i| p.y(i)).collect();
    let amp = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let status = if sample.value.abs() > tol {
        ThresholdStatus::Nonresonant
    } else if r[0].abs() < 1e-3 * amp {
        ThresholdStatus::EigenvalueAtThreshold
    } else {
        ThresholdStatus::Resonant
    };
    let profile = (status == ThresholdStatus::Resonant).then_some(r);
    Ok((status, sample.value, profile, sample))
}

/// Threshold classification of `L_T`.
pub fn threshold_status(pd: &PerturbationData, opts: &SpectralOptions) -> Result<ThresholdStatus> {
    Ok(threshold(pd, opts.threshold_tol)?.0)
}

/// Scans `W_U` on `n_scan` points of `[lo, hi]` (`hi ≤ m²`), bisects every
/// sign change to `root_tol` and extracts the eigenfunctions.
pub fn find_eigenvalues(pd: &PerturbationData, search: (f64, f64), opts: &SpectralOptions) -> Result<SpectrumReport> {
    let m_sq = pd.pot.m_sq;
    let (lo, hi) = search;
    if !(lo < hi) || hi > m_sq {
        return Err(Error::InvalidArgument(format!("search interval ({lo}, {hi}) must lie below m² = {m_sq}")));
    }
    let n = opts.n_scan.max(2);
    let lambdas: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let scan: Vec<EvansSample> = lambdas.par_iter().map(|&l| evans(pd, l)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for w in scan.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let jump = b.nodes.abs_diff(a.nodes);
        if jump >= 2 {
            return Err(Error::BracketCollision { lo: a.lambda, hi: b.lambda });
        }
        if a.value == 0.0 {
            roots.push(a.lambda);
            continue;
        }
        if a.value.signum() != b.value.signum() && b.value != 0.0 {
            roots.push(bisect(pd, a.lambda, b.lambda, a.value, opts.root_tol)?);
        } else if jump == 1 && b.lambda < m_sq {
            // a root without a sign change means two roots in one cell
            return Err(Error::BracketCollision { lo: a.lambda, hi: b.lambda });
        }
    }
    let eigenvalues = roots
        .iter()
        .filter(|&&l| l < m_sq)
        .map(|&l| {
            let (p, m) = jost_pair(&pd.op, l)?;
            Ok(normalized_eigenpair(&p, &m))
        })
        .collect::<Result<Vec<_>>>()?;
    let (status, tw, profile, tsample) = threshold(pd, opts.threshold_tol)?;
    let max_abel_residual = scan.iter().chain(std::iter::once(&tsample)).map(|s| s.abel_residual).fold(0.0, f64::max);
    Ok(SpectrumReport {
        essential_edge: m_sq,
        eigenvalues,
        threshold_status: status,
        threshold_wronskian: tw,
        resonance_profile: profile,
        drift_predictions: Vec::new(),
        below_search: scan[0].nodes,
        max_abel_residual,
        scan,
    })
}

fn bisect(pd: &PerturbationData, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Result<f64> {
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = evans(pd, mid)?.value;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `λ ≈ λ_* + ∫Y_*(dY_* − bY_*')/∫Y_*²` for an eigenpair of `L_S`.
pub fn drift_predict(y_star: &Eigenpair, pd: &PerturbationData) -> DriftPrediction {
    let h = pd.grid.step();
    let y = &y_star.eigenfunction;
    let dy = &y_star.derivative;
    let integrand = |d: &[f64]| -> f64 {
        let f: Vec<f64> = (0..y.len()).map(|i| y[i] * (d[i] * y[i] - pd.b[i] * dy[i])).collect();
        integrate(&f, h)
    };
    let a = integrand(&pd.d);
    let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
    let norm_sq = integrate(&sq, h);
    DriftPrediction {
        lambda_star: y_star.lambda,
        a,
        norm_sq,
        predicted_lambda: y_star.lambda + a / norm_sq,
        first_order_variant: pd.d_first_order.as_deref().map(integrand),
    }
}

/// Unperturbed eigenpairs of `L_S` on `search`.
pub fn unperturbed_spectrum(pd: &PerturbationData, search: (f64, f64), opts: &SpectralOptions) -> Result<SpectrumReport> {
    find_eigenvalues(&pd.unperturbed(), search, opts)
}

/// Drift predictions for every eigenvalue of `L_S` in `search`.
pub fn drift_predictions(pd: &PerturbationData, search: (f64, f64), opts: &SpectralOptions) -> Result<Vec<DriftPrediction>> {
    let base = unperturbed_spectrum(pd, search, opts)?;
    Ok(base.eigenvalues.iter().map(|e| drift_predict(e, pd)).collect())
}

/// Sign test `∫R(dR − bR')` for a threshold resonance `R` of `L_S` sampled on the grid.
/// Values within `margin` of zero are inconclusive.
pub fn resonance_criterion(r: &[f64], pd: &PerturbationData, margin: f64) -> Result<ResonanceCriterion> {
    let h = pd.grid.step();
    let n = r.len();
    let amp = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(r[0].abs() > 1e-8 * amp && r[n - 1].abs() > 1e-8 * amp) {
        return Err(Error::DegenerateResonance);
    }
    let dr = crate::grid::derivative(r, h);
    let integrand = |d: &[f64]| -> f64 {
        let f: Vec<f64> = (0..n).map(|i| r[i] * (d[i] * r[i] - pd.b[i] * dr[i])).collect();
        integrate(&f, h)
    };
    let value = integrand(&pd.d);
    let verdict = if value.abs() < margin {
        Verdict::Inconclusive
    } else if value < 0.0 {
        Verdict::EigenvalueEmerges
    } else {
        Verdict::NoNearbyEigenvalue
    };
    Ok(ResonanceCriterion {
        value,
        verdict,
        first_order_variant: pd.d_first_order.as_deref().map(integrand),
        margin,
    })
}

/// The threshold resonance of `L_S` (normalised to `1` at `+L`), if there is one.
pub fn unperturbed_resonance(pd: &PerturbationData, opts: &SpectralOptions) -> Result<Option<Vec<f64>>> {
    Ok(threshold(&pd.unperturbed(), opts.threshold_tol)?.2)
}

/// `W_U(m² − k², 0)/k` for each `k`, with both Jost solutions normalised to
/// `e^{∓ky}(1, ∓k)` at their ends. For a resonant threshold this tends to a
/// nonzero constant as `k ↓ 0`.
pub fn threshold_slopes(pd: &PerturbationData, ks: &[f64]) -> Result<Vec<(f64, f64)>> {
    ks.par_iter()
        .map(|&k| {
            if !(k > 0.0) {
                return Err(Error::InvalidArgument(format!("k = {k} must be positive")));
            }
            let e = evans(pd, pd.pot.m_sq - k * k)?;
            Ok((k, e.value / k))
        })
        .collect()
}

/// The full analysis: eigenvalues, threshold status and drift predictions.
pub fn analyze(pd: &PerturbationData, search: (f64, f64), opts: &SpectralOptions) -> Result<SpectrumReport> {
    let mut report = find_eigenvalues(pd, search, opts)?;
    report.drift_predictions = drift_predictions(pd, search, opts)?;
    Ok(report)
}
