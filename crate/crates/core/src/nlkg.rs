//! Time stepping for `u_tt = u_yy + b u_y + c u − F'(u)` with `u` pinned at `±L`.
//!
//! The spatial operator is discretised in flux form `ω^{−1}(ω u_y)_y`, which is
//! symmetric in the `ω`-weighted inner product, and advanced with velocity
//! Verlet. The discrete energy below is the one this scheme conserves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeffs::TransformedCoefficients;
use crate::error::{Error, Result};
use crate::grid::{derivative, interp_uniform, solve_tridiagonal, Grid};
use crate::kink::KinkT;
use crate::model::Potential;

type Force = dyn Fn(f64) -> f64 + Send + Sync;

pub struct Simulator {
    grid: Grid,
    pot: Potential,
    force: Box<Force>,
    force_prime: Box<Force>,
    potential: Box<Force>,
    c: Vec<f64>,
    omega: Vec<f64>,
    /// `ω` at the cell midpoints `y_{i+1/2}`.
    omega_half: Vec<f64>,
    dt: f64,
    stationary: Vec<f64>,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("grid", &self.grid).field("dt", &self.dt).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    acc: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e: f64,
    pub e_p: f64,
    pub drift_rel: f64,
}

fn weights_from_drift(b: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = b.len();
    let mut log_w = vec![0.0; n];
    for i in 1..n {
        log_w[i] = log_w[i - 1] + 0.5 * h * (b[i - 1] + b[i]);
    }
    let mid = log_w[n / 2];
    let omega: Vec<f64> = log_w.iter().map(|l| (l - mid).exp()).collect();
    let half: Vec<f64> = (0..n - 1).map(|i| (0.5 * (log_w[i] + log_w[i + 1]) - mid).exp()).collect();
    (omega, half)
}

impl Simulator {
    /// Simulator around a converged kink on `grid`, with time step `dt ≤ 0.9 h`.
    /// The pinned state is the discrete stationary solution nearest `T`.
    pub fn new(pot: &Potential, tc: &TransformedCoefficients, kink: &KinkT, grid: Grid, dt: f64) -> Result<Self> {
        let p1 = pot.clone();
        let p2 = pot.clone();
        let p3 = pot.clone();
        let b: Vec<f64> = grid.sample(|y| tc.b(y));
        let c: Vec<f64> = grid.sample(|y| tc.c(y));
        let initial = grid.sample(|y| kink.t(y));
        Self::build(
            grid,
            pot.clone(),
            Box::new(move |u| p1.df(u)),
            Box::new(move |u| p2.d2f(u)),
            Box::new(move |u| p3.f(u)),
            &b,
            c,
            dt,
            initial,
            true,
        )
    }

    /// Linear Klein–Gordon `u_tt = u_yy − m² u` with `b = c = 0`, pinned to zero.
    pub fn linear(m_sq: f64, grid: Grid, dt: f64) -> Result<Self> {
        let n = grid.len();
        Self::build(
            grid,
            Potential::phi4(),
            Box::new(move |u| m_sq * u),
            Box::new(move |_| m_sq),
            Box::new(move |u| 0.5 * m_sq * u * u),
            &vec![0.0; n],
            vec![0.0; n],
            dt,
            vec![0.0; n],
            false,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        grid: Grid,
        pot: Potential,
        force: Box<Force>,
        force_prime: Box<Force>,
        potential: Box<Force>,
        b: &[f64],
        c: Vec<f64>,
        dt: f64,
        initial: Vec<f64>,
        polish: bool,
    ) -> Result<Self> {
        let h = grid.step();
        if !(dt > 0.0 && dt <= 0.9 * h) {
            return Err(Error::CflViolation { dt, bound: 0.9 * h });
        }
        let (omega, omega_half) = weights_from_drift(b, h);
        let mut sim = Self { grid, pot, force, force_prime, potential, c, omega, omega_half, dt, stationary: initial };
        if polish {
            sim.stationary = sim.polish(sim.stationary.clone())?;
        }
        Ok(sim)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    /// The discrete stationary state `T_h`.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    fn acceleration(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let h2 = self.grid.step().powi(2);
        out[0] = 0.0;
        out[n - 1] = 0.0;
        out[1..n - 1].par_iter_mut().enumerate().with_min_len(1024).for_each(|(j, a)| {
            let i = j + 1;
            let flux = self.omega_half[i] * (u[i + 1] - u[i]) - self.omega_half[i - 1] * (u[i] - u[i - 1]);
            *a = flux / (self.omega[i] * h2) + self.c[i] * u[i] - (self.force)(u[i]);
        });
    }

    /// Newton iteration for the discrete stationary equation with the ends held fixed.
    /// A small shift keeps the step bounded along the near-translation direction.
    fn polish(&self, mut u: Vec<f64>) -> Result<Vec<f64>> {
        let n = u.len();
        let h2 = self.grid.step().powi(2);
        let shift = 1e-6;
        let mut r = vec![0.0; n];
        for _ in 0..50 {
            self.acceleration(&u, &mut r);
            let res = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if res < 1e-12 {
                return Ok(u);
            }
            let m = n - 2;
            let mut lower = vec![0.0; m - 1];
            let mut upper = vec![0.0; m - 1];
            let mut diag = vec![0.0; m];
            for j in 0..m {
                let i = j + 1;
                let w = self.omega[i] * h2;
                diag[j] = -(self.omega_half[i] + self.omega_half[i - 1]) / w + self.c[i] - (self.force_prime)(u[i]) - shift;
                if j + 1 < m {
                    upper[j] = self.omega_half[i] / w;
                    lower[j] = self.omega_half[i] / (self.omega[i + 1] * h2);
                }
            }
            let rhs: Vec<f64> = r[1..n - 1].iter().map(|x| -x).collect();
            let step = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
            for j in 0..m {
                u[j + 1] += step[j];
            }
        }
        self.acceleration(&u, &mut r);
        let res = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if res < 1e-9 {
            Ok(u)
        } else {
            Err(Error::NoConvergence { iterations: 50, last_update: res })
        }
    }

    /// State `(T_h + v1, v2)` at `t = 0`; the perturbation must vanish at the ends.
    pub fn state(&self, v1: &[f64], v2: &[f64]) -> Result<FieldState> {
        let n = self.grid.len();
        if v1.len() != n || v2.len() != n {
            return Err(Error::InvalidArgument(format!("perturbation length must be {n}")));
        }
        let mut u: Vec<f64> = self.stationary.iter().zip(v1).map(|(a, b)| a + b).collect();
        let mut u_t = v2.to_vec();
        u[0] = self.stationary[0];
        u[n - 1] = self.stationary[n - 1];
        u_t[0] = 0.0;
        u_t[n - 1] = 0.0;
        let mut acc = vec![0.0; n];
        self.acceleration(&u, &mut acc);
        Ok(FieldState { t: 0.0, u, u_t, acc })
    }

    /// Initial data given directly (for the linear simulator).
    pub fn state_from(&self, u: Vec<f64>, u_t: Vec<f64>) -> FieldState {
        let mut acc = vec![0.0; u.len()];
        self.acceleration(&u, &mut acc);
        FieldState { t: 0.0, u, u_t, acc }
    }

    /// One velocity-Verlet step.
    pub fn step(&self, s: &mut FieldState) -> Result<()> {
        let dt = self.dt;
        let n = s.u.len();
        for i in 1..n - 1 {
            s.u_t[i] += 0.5 * dt * s.acc[i];
            s.u[i] += dt * s.u_t[i];
        }
        let mut acc = std::mem::take(&mut s.acc);
        self.acceleration(&s.u, &mut acc);
        s.acc = acc;
        for i in 1..n - 1 {
            s.u_t[i] += 0.5 * dt * s.acc[i];
        }
        s.t += dt;
        if !s.u[n / 2].is_finite() || !s.u_t[n / 2].is_finite() {
            return Err(Error::NonFiniteField { t: s.t });
        }
        Ok(())
    }

    /// Advances until `t ≥ t_end`, checking every value for overflow at the end.
    pub fn run_until(&self, s: &mut FieldState, t_end: f64) -> Result<()> {
        while s.t < t_end - 0.5 * self.dt {
            self.step(s)?;
        }
        if s.u.iter().chain(&s.u_t).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteField { t: s.t });
        }
        Ok(())
    }

    /// `E = Σ ω[½u_t² − ½cu² + F(u)] h + Σ ω_{i+1/2} ½((u_{i+1} − u_i)/h)² h`.
    pub fn energy(&self, s: &FieldState, e0: Option<f64>) -> EnergyReport {
        let h = self.grid.step();
        let n = s.u.len();
        let mut kin = 0.0;
        let mut pot = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * h * self.omega[i];
            kin += w * 0.5 * s.u_t[i] * s.u_t[i];
            pot += w * (-0.5 * self.c[i] * s.u[i] * s.u[i] + (self.potential)(s.u[i]));
        }
        for i in 0..n - 1 {
            let g = (s.u[i + 1] - s.u[i]) / h;
            pot += h * self.omega_half[i] * 0.5 * g * g;
        }
        let e = kin + pot;
        let drift_rel = e0.map_or(0.0, |e0| (e - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        EnergyReport { e, e_p: pot, drift_rel }
    }
}

/// A translate-able reference profile `T_h(y + ξ)` (exact kink plus the interpolated
/// discrete correction).
pub struct Reference<'a> {
    kink: &'a KinkT,
    grid: Grid,
    correction: Vec<f64>,
    dcorrection: Vec<f64>,
}

impl<'a> Reference<'a> {
    pub fn new(kink: &'a KinkT, sim: &Simulator) -> Self {
        let grid = *sim.grid();
        let correction: Vec<f64> = (0..grid.len()).map(|i| sim.stationary[i] - kink.t(grid.point(i))).collect();
        let dcorrection = derivative(&correction, grid.step());
        Self { kink, grid, correction, dcorrection }
    }

    /// The continuum kink only.
    pub fn exact(kink: &'a KinkT, grid: Grid) -> Self {
        let n = grid.len();
        Self { kink, grid, correction: vec![0.0; n], dcorrection: vec![0.0; n] }
    }

    pub fn value(&self, y: f64) -> f64 {
        let g = &self.grid;
        self.kink.t(y) + interp_uniform(&self.correction, g.point(0), g.step(), y, 0.0)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let g = &self.grid;
        self.kink.t_prime(y) + interp_uniform(&self.dcorrection, g.point(0), g.step(), y, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DqResult {
    /// `d_q(ψ, T)²`.
    pub value: f64,
    pub xi_star: f64,
}

impl DqResult {
    pub fn distance(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }
}

/// `inf_ξ ∫ (ψ' − T'(y+ξ))² + q(ψ − T(y+ξ))²` by a coarse scan around `seed`
/// followed by golden-section search.
pub fn dq_distance(psi: &[f64], reference: &Reference, q: f64, seed: f64) -> DqResult {
    let g = reference.grid;
    let h = g.step();
    let dpsi = derivative(psi, h);
    let n = psi.len();
    let cost = |xi: f64| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            let y = g.point(i) + xi;
            let a = dpsi[i] - reference.derivative(y);
            let b = psi[i] - reference.value(y);
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            sum += w * (a * a + q * b * b);
        }
        sum * h
    };
    let span = 2.0;
    let m = 40;
    let samples: Vec<(f64, f64)> = (0..=m)
        .into_par_iter()
        .map(|j| {
            let xi = seed - span + 2.0 * span * j as f64 / m as f64;
            (xi, cost(xi))
        })
        .collect();
    let best = samples.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(j, _)| j).unwrap_or(m / 2);
    let step = 2.0 * span / m as f64;
    let (mut a, mut b) = (samples[best].0 - step, samples[best].0 + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while b - a > 1e-9 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = cost(x2);
        }
    }
    let xi = 0.5 * (a + b);
    DqResult { value: cost(xi), xi_star: xi }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationShape {
    /// Random superposition of modes with wavenumber below `bandwidth`, windowed to `|y − center| < radius`.
    Random { seed: u64, bandwidth: f64, radius: f64, center: f64 },
    /// `sech((y − center)/width)`, cut smoothly to zero at the grid ends.
    Sech { center: f64, width: f64 },
    /// Arbitrary samples on the simulation grid (e.g. an internal mode).
    Samples { values: Vec<f64> },
}

/// Perturbation `(v1, v2)` with `‖v1‖_{H¹}² + ‖v2‖_{L²}² = eps²` on the grid.
/// `velocity_share` is the fraction of `eps²` carried by `v2`, which has the same shape as `v1`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Perturbation {
    pub shape: PerturbationShape,
    pub eps: f64,
    #[serde(default)]
    pub velocity_share: f64,
}

fn window(y: f64, center: f64, radius: f64) -> f64 {
    let z = (y - center) / radius;
    if z.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * std::f64::consts::PI * z).cos().powi(4)
    }
}

/// `(‖v‖_{H¹}², ‖v‖_{L²}²)` on the grid with forward differences.
pub fn h1_l2_sq(v: &[f64], h: f64) -> (f64, f64) {
    let l2: f64 = v.iter().map(|x| x * x).sum::<f64>() * h;
    let grad: f64 = v.windows(2).map(|w| ((w[1] - w[0]) / h).powi(2)).sum::<f64>() * h;
    (l2 + grad, l2)
}

impl Perturbation {
    pub fn shape_samples(&self, grid: &Grid) -> Result<Vec<f64>> {
        let n = grid.len();
        let mut v = match &self.shape {
            PerturbationShape::Random { seed, bandwidth, radius, center } => {
                if !(*bandwidth > 0.0 && *radius > 0.0) {
                    return Err(Error::InvalidArgument("bandwidth and radius must be positive".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let modes: Vec<(f64, f64, f64)> = (0..16)
                    .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..*bandwidth), rng.gen_range(0.0..std::f64::consts::TAU)))
                    .collect();
                grid.sample(|y| {
                    let s: f64 = modes.iter().map(|(a, k, p)| a * (k * y + p).cos()).sum();
                    s * window(y, *center, *radius)
                })
            }
            PerturbationShape::Sech { center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidArgument("width must be positive".into()));
                }
                let l = grid.half_width();
                grid.sample(|y| 1.0 / ((y - center) / width).cosh() * window(y, 0.0, l))
            }
            PerturbationShape::Samples { values } => {
                if values.len() != n {
                    return Err(Error::InvalidArgument(format!("sampled perturbation must have {n} values")));
                }
                values.clone()
            }
        };
        v[0] = 0.0;
        v[n - 1] = 0.0;
        Ok(v)
    }

    pub fn build(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(0.0..=1.0).contains(&self.velocity_share) {
            return Err(Error::InvalidArgument("velocity_share must lie in [0, 1]".into()));
        }
        let shape = self.shape_samples(grid)?;
        let (h1, l2) = h1_l2_sq(&shape, grid.step());
        if h1 == 0.0 {
            return Ok((vec![0.0; shape.len()], vec![0.0; shape.len()]));
        }
        let a1 = self.eps * ((1.0 - self.velocity_share) / h1).sqrt();
        let a2 = self.eps * (self.velocity_share / l2).sqrt();
        Ok((shape.iter().map(|x| a1 * x).collect(), shape.iter().map(|x| a2 * x).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitalSample {
    pub t: f64,
    pub dq: f64,
    pub xi: f64,
    pub e: f64,
    pub drift_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitalReport {
    pub series: Vec<OrbitalSample>,
    pub eps: f64,
    pub initial_dq: f64,
    pub sup_dq: f64,
    /// `sup_t d_q / eps`.
    pub ratio_to_eps: f64,
    pub max_drift_rel: f64,
}

/// Evolves `(T_h + v1, v2)` to `t_end`, recording `d_q` and the energy every `sample_dt`.
pub fn orbital_experiment(
    sim: &Simulator,
    kink: &KinkT,
    perturbation: &Perturbation,
    t_end: f64,
    q: f64,
    sample_dt: f64,
) -> Result<OrbitalReport> {
    orbital_experiment_observed(sim, kink, perturbation, t_end, q, sample_dt, |_| {})
}

/// [`orbital_experiment`] calling `observe` with the field at every sample time.
pub fn orbital_experiment_observed(
    sim: &Simulator,
    kink: &KinkT,
    perturbation: &Perturbation,
    t_end: f64,
    q: f64,
    sample_dt: f64,
    mut observe: impl FnMut(&FieldState),
) -> Result<OrbitalReport> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument("q must be positive".into()));
    }
    let (v1, v2) = perturbation.build(sim.grid())?;
    let mut state = sim.state(&v1, &v2)?;
    let reference = Reference::new(kink, sim);
    let e0 = sim.energy(&state, None).e;
    let mut series = Vec::new();
    let mut xi = 0.0;
    let mut next = 0.0;
    loop {
        if state.t >= next - 0.5 * sim.dt() {
            let d = dq_distance(&state.u, &reference, q, xi);
            xi = d.xi_star;
            let en = sim.energy(&state, Some(e0));
            series.push(OrbitalSample { t: state.t, dq: d.distance(), xi, e: en.e, drift_rel: en.drift_rel });
            observe(&state);
            next += sample_dt;
        }
        if state.t >= t_end - 0.5 * sim.dt() {
            break;
        }
        sim.step(&mut state)?;
    }
    let initial_dq = series[0].dq;
    let sup_dq = series.iter().map(|s| s.dq).fold(0.0, f64::max);
    let max_drift_rel = series.iter().map(|s| s.drift_rel).fold(0.0, f64::max);
    Ok(OrbitalReport {
        series,
        eps: perturbation.eps,
        initial_dq,
        sup_dq,
        ratio_to_eps: if perturbation.eps > 0.0 { sup_dq / perturbation.eps } else { 0.0 },
        max_drift_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{y_form, zero, Family, Field};
    use crate::kink::{solve_kink, FixedPointOptions, GreensOptions};
    use crate::model::builtin_phi4;

    fn phi4_setup(half: f64, n: usize) -> (Potential, KinkT, TransformedCoefficients, Grid) {
        let (pot, s) = builtin_phi4();
        let kg = Grid::new(20.0, 4096).unwrap();
        let tc = y_form(Field::bump(Family::OddGaussian, 1e-2, 1.0, 0.0), Field::bump(Family::Gaussian, 1e-2, 1.0, 0.0), &kg).unwrap();
        let t = solve_kink(&pot, &s, &tc, &kg, &GreensOptions::default(), &FixedPointOptions::default()).unwrap();
        (pot, t, tc, Grid::new(half, n).unwrap())
    }

    #[test]
    fn stationary_kink_holds() {
        let (pot, t, tc, g) = phi4_setup(20.0, 2048);
        let sim = Simulator::new(&pot, &tc, &t, g, 0.5 * g.step()).unwrap();
        let n = g.len();
        let mut st = sim.state(&vec![0.0; n], &vec![0.0; n]).unwrap();
        sim.run_until(&mut st, 50.0).unwrap();
        let dev = st.u.iter().zip(sim.stationary()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
        let close = sim.stationary().iter().enumerate().map(|(i, v)| (v - t.t(g.point(i))).abs()).fold(0.0, f64::max);
        assert!(close < 1e-3, "{close}");
    }

    #[test]
    fn energy_of_resting_kink_and_vacuum() {
        let (pot, s) = builtin_phi4();
        let g = Grid::new(20.0, 4096).unwrap();
        let t = KinkT::unperturbed(&pot, &s, &g);
        let sim = Simulator::new(&pot, &zero(&g), &t, g, 0.5 * g.step()).unwrap();
        let n = g.len();
        let st = sim.state(&vec![0.0; n], &vec![0.0; n]).unwrap();
        let e = sim.energy(&st, None).e;
        let exact = 2.0 * std::f64::consts::SQRT_2 / 3.0;
        let classical = crate::grid::integrate(&g.sample(|y| 0.5 * s.derivative(y).powi(2) + pot.f(s.profile(y))), g.step());
        assert!((classical - exact).abs() < 1e-10);
        assert!((e - exact).abs() < 1e-4 * exact, "{e} vs {exact}");
        let vac = sim.state_from(vec![1.0; n], vec![0.0; n]);
        assert!(sim.energy(&vac, None).e.abs() < 1e-14);
    }

    #[test]
    fn dq_exact_shift_and_bound() {
        let (pot, s) = builtin_phi4();
        let g = Grid::new(20.0, 4096).unwrap();
        let t = KinkT::unperturbed(&pot, &s, &g);
        let r = Reference::exact(&t, g);
        let same = dq_distance(&g.sample(|y| t.t(y)), &r, 1.0, 0.0);
        assert!(same.value < 1e-16 && same.xi_star.abs() < 1e-4);
        let shifted = dq_distance(&g.sample(|y| t.t(y + 0.3)), &r, 1.0, 0.0);
        assert!(shifted.value < 1e-8 && (shifted.xi_star - 0.3).abs() < 1e-4, "{shifted:?}");
        let eps = 1e-2;
        let psi = g.sample(|y| t.t(y) + eps / y.cosh());
        let bound = eps * eps * g.sample(|y| (y.tanh() / y.cosh()).powi(2) + 1.0 / y.cosh().powi(2)).iter().sum::<f64>() * g.step();
        assert!(dq_distance(&psi, &r, 1.0, 0.0).value <= bound * (1.0 + 1e-6));
    }

    #[test]
    fn linear_packet_group_velocity() {
        let g = Grid::new(200.0, 16384).unwrap();
        let m_sq = 1.0;
        let sim = Simulator::linear(m_sq, g, 0.5 * g.step()).unwrap();
        let (k0, w) = (2.0, 8.0);
        let om = (k0 * k0 + m_sq).sqrt();
        let x0 = -80.0;
        let u = g.sample(|y| (-(y - x0).powi(2) / (w * w)).exp() * (k0 * (y - x0)).cos());
        // right-moving: u_t = −ω_0 u_y direction approximated by the carrier phase
        let ut = g.sample(|y| (-(y - x0).powi(2) / (w * w)).exp() * om * (k0 * (y - x0)).sin());
        let mut st = sim.state_from(u, ut);
        let t_end = 60.0;
        sim.run_until(&mut st, t_end).unwrap();
        let e: Vec<f64> = (0..g.len()).map(|i| st.u[i].powi(2) + (st.u_t[i] / om).powi(2)).collect();
        let mass: f64 = e.iter().sum();
        let centre: f64 = e.iter().enumerate().map(|(i, v)| v * g.point(i)).sum::<f64>() / mass;
        let vg = (centre - x0) / t_end;
        let exact = k0 / om;
        assert!((vg - exact).abs() < 0.02 * exact, "{vg} vs {exact}");
    }

    #[test]
    fn energy_drift_converges_second_order() {
        let (pot, t, tc, _) = phi4_setup(20.0, 1024);
        let drift = |n: usize| {
            let g = Grid::new(20.0, n).unwrap();
            let sim = Simulator::new(&pot, &tc, &t, g, 0.5 * g.step()).unwrap();
            let p = Perturbation { shape: PerturbationShape::Sech { center: 0.0, width: 1.0 }, eps: 0.1, velocity_share: 0.5 };
            let (v1, v2) = p.build(&g).unwrap();
            let mut st = sim.state(&v1, &v2).unwrap();
            let e0 = sim.energy(&st, None).e;
            let mut worst: f64 = 0.0;
            while st.t < 5.0 {
                sim.step(&mut st).unwrap();
                worst = worst.max(sim.energy(&st, Some(e0)).drift_rel);
            }
            worst
        };
        let ratio = drift(512) / drift(1024);
        assert!((ratio - 4.0).abs() < 1.2, "{ratio}");
    }

    #[test]
    fn finite_propagation() {
        let (pot, t, tc, g) = phi4_setup(30.0, 4096);
        let sim = Simulator::new(&pot, &tc, &t, g, 0.5 * g.step()).unwrap();
        let y0 = 3.0;
        let p = Perturbation {
            shape: PerturbationShape::Random { seed: 7, bandwidth: 3.0, radius: y0, center: 0.0 },
            eps: 1e-2,
            velocity_share: 0.3,
        };
        let (v1, v2) = p.build(&g).unwrap();
        let mut st = sim.state(&v1, &v2).unwrap();
        sim.run_until(&mut st, 10.0).unwrap();
        let leak = (0..g.len())
            .filter(|&i| g.point(i).abs() > y0 + st.t + 1.0)
            .map(|i| (st.u[i] - sim.stationary()[i]).abs())
            .fold(0.0, f64::max);
        assert!(leak <= 1e-10, "{leak}");
    }

    #[test]
    fn cfl_and_perturbation_norm() {
        let (pot, t, tc, g) = phi4_setup(20.0, 1024);
        assert!(matches!(Simulator::new(&pot, &tc, &t, g, g.step()), Err(Error::CflViolation { .. })));
        let p = Perturbation { shape: PerturbationShape::Random { seed: 1, bandwidth: 2.0, radius: 5.0, center: 0.0 }, eps: 1e-2, velocity_share: 0.25 };
        let (v1, v2) = p.build(&g).unwrap();
        let total = h1_l2_sq(&v1, g.step()).0 + h1_l2_sq(&v2, g.step()).1;
        assert!((total.sqrt() - 1e-2).abs() < 1e-14);
        assert_eq!(p.build(&g).unwrap(), (v1, v2));
    }
}
