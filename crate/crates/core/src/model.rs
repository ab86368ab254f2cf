//! Field-theory potentials and the constant-coefficient kink `S`.
//!
//! A [`Potential`] carries `F` and its first three derivatives together with
//! the vacua `a_-`, `a_+` and the mass `m² = F''(a_±)`. Built-in models come
//! with closed-form kinks; custom polynomial potentials get a kink from
//! [`solve_constant_kink`].

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CubicHermite, Grid};

/// Tolerance used when checking the vacuum conditions.
const VACUUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    Phi4,
    SineGordon,
    /// `F(u) = Σ_j coeffs[j] u^j`.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub a_minus: f64,
    pub a_plus: f64,
    pub m_sq: f64,
}

fn poly_eval(coeffs: &[f64], order: usize, u: f64) -> f64 {
    // order-th derivative by Horner on the differentiated coefficients
    let mut acc = 0.0;
    for j in (order..coeffs.len()).rev() {
        let falling: f64 = (0..order).map(|r| (j - r) as f64).product();
        acc = acc * u + coeffs[j] * falling;
    }
    acc
}

impl Potential {
    pub fn phi4() -> Self {
        Self { kind: PotentialKind::Phi4, a_minus: -1.0, a_plus: 1.0, m_sq: 2.0 }
    }

    pub fn sine_gordon() -> Self {
        Self { kind: PotentialKind::SineGordon, a_minus: 0.0, a_plus: 2.0 * PI, m_sq: 1.0 }
    }

    /// Polynomial potential with explicitly supplied vacua; `m²` is read off `F''(a_+)`.
    pub fn polynomial(coeffs: Vec<f64>, a_minus: f64, a_plus: f64) -> Result<Self> {
        if coeffs.len() < 3 || !(coeffs.len() - 1).is_multiple_of(2) {
            return Err(Error::InvalidPotential("polynomial potential must have even degree >= 2".into()));
        }
        let m_sq = poly_eval(&coeffs, 2, a_plus);
        let pot = Self { kind: PotentialKind::Polynomial { coeffs }, a_minus, a_plus, m_sq };
        pot.validate()?;
        Ok(pot)
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Phi4 => 0.25 * (1.0 - u * u).powi(2),
            PotentialKind::SineGordon => 2.0 * (0.5 * u).sin().powi(2),
            PotentialKind::Polynomial { coeffs } => poly_eval(coeffs, 0, u),
        }
    }

    pub fn df(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Phi4 => u * u * u - u,
            PotentialKind::SineGordon => u.sin(),
            PotentialKind::Polynomial { coeffs } => poly_eval(coeffs, 1, u),
        }
    }

    pub fn d2f(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Phi4 => 3.0 * u * u - 1.0,
            PotentialKind::SineGordon => u.cos(),
            PotentialKind::Polynomial { coeffs } => poly_eval(coeffs, 2, u),
        }
    }

    pub fn d3f(&self, u: f64) -> f64 {
        match &self.kind {
            PotentialKind::Phi4 => 6.0 * u,
            PotentialKind::SineGordon => -u.sin(),
            PotentialKind::Polynomial { coeffs } => poly_eval(coeffs, 3, u),
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a_minus + self.a_plus)
    }

    /// `sup |F'''|` on `[a_-, a_+]`, sampled.
    pub fn third_derivative_bound(&self) -> f64 {
        (0..=2000)
            .map(|i| {
                let u = self.a_minus + (self.a_plus - self.a_minus) * i as f64 / 2000.0;
                self.d3f(u).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Checks the vacuum conditions and interior positivity of `F`.
    pub fn validate(&self) -> Result<()> {
        if !(self.a_minus < self.a_plus) {
            return Err(Error::InvalidPotential("vacua must satisfy a_- < a_+".into()));
        }
        for a in [self.a_minus, self.a_plus] {
            if self.f(a).abs() > VACUUM_TOL || self.df(a).abs() > VACUUM_TOL {
                return Err(Error::InvalidPotential(format!("{a} is not a zero of F and F'")));
            }
            if (self.d2f(a) - self.m_sq).abs() > VACUUM_TOL * self.m_sq.max(1.0) {
                return Err(Error::InvalidPotential(format!(
                    "F''({a}) = {} differs from m² = {}",
                    self.d2f(a),
                    self.m_sq
                )));
            }
        }
        if !(self.m_sq > 0.0) {
            return Err(Error::InvalidPotential("degenerate vacuum, F''(a) must be positive".into()));
        }
        for i in 1..1000 {
            let u = self.a_minus + (self.a_plus - self.a_minus) * i as f64 / 1000.0;
            let v = self.f(u);
            if !(v > 0.0) {
                return Err(Error::NonPositivePotentialInterior { at: u, value: v });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Phi4 => "phi4",
            PotentialKind::SineGordon => "sine-gordon",
            PotentialKind::Polynomial { .. } => "polynomial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KinkSource {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone)]
enum KinkRepr {
    Phi4,
    SineGordon,
    Table(Arc<KinkTable>),
}

/// Tabulated kink with exponential tails beyond the table.
#[derive(Debug)]
struct KinkTable {
    interp: CubicHermite,
    pot: Potential,
    m: f64,
    y_lo: f64,
    y_hi: f64,
    gap_lo: f64,
    gap_hi: f64,
}

/// The constant-coefficient kink, anchored so that `S(0)` is the midpoint of the vacua.
#[derive(Debug, Clone)]
pub struct KinkS {
    repr: KinkRepr,
    pub source: KinkSource,
}

impl KinkS {
    pub fn profile(&self, y: f64) -> f64 {
        match &self.repr {
            KinkRepr::Phi4 => (y / SQRT_2).tanh(),
            KinkRepr::SineGordon => 4.0 * y.exp().atan(),
            KinkRepr::Table(t) => {
                if y >= t.y_hi {
                    t.pot.a_plus - t.gap_hi * (-t.m * (y - t.y_hi)).exp()
                } else if y <= t.y_lo {
                    t.pot.a_minus + t.gap_lo * (t.m * (y - t.y_lo)).exp()
                } else {
                    t.interp.eval(y)
                }
            }
        }
    }

    pub fn derivative(&self, y: f64) -> f64 {
        match &self.repr {
            KinkRepr::Phi4 => {
                let c = (y / SQRT_2).cosh();
                1.0 / (SQRT_2 * c * c)
            }
            KinkRepr::SineGordon => 2.0 / y.cosh(),
            KinkRepr::Table(t) => {
                if y >= t.y_hi {
                    t.m * t.gap_hi * (-t.m * (y - t.y_hi)).exp()
                } else if y <= t.y_lo {
                    t.m * t.gap_lo * (t.m * (y - t.y_lo)).exp()
                } else {
                    (2.0 * t.pot.f(t.interp.eval(y)).max(0.0)).sqrt()
                }
            }
        }
    }
}

/// φ⁴ model `F(u) = (1-u²)²/4` with kink `tanh(y/√2)`.
pub fn builtin_phi4() -> (Potential, KinkS) {
    (Potential::phi4(), KinkS { repr: KinkRepr::Phi4, source: KinkSource::ClosedForm })
}

/// Sine-Gordon model `F(u) = 1 - cos u` with kink `4 arctan(e^y)`.
pub fn builtin_sine_gordon() -> (Potential, KinkS) {
    (Potential::sine_gordon(), KinkS { repr: KinkRepr::SineGordon, source: KinkSource::ClosedForm })
}

/// Threshold resonance of the linearisation around the built-in kinks, when known in closed form.
pub fn known_resonance(pot: &Potential) -> Option<fn(f64) -> f64> {
    match pot.kind {
        PotentialKind::Phi4 => Some(|y| {
            let t = (y / SQRT_2).tanh();
            let s = 1.0 / (y / SQRT_2).cosh();
            2.0 * t * t - s * s
        }),
        PotentialKind::SineGordon => Some(|y: f64| y.tanh()),
        PotentialKind::Polynomial { .. } => None,
    }
}

/// Known discrete spectrum below `m²` of the linearisation around the built-in kinks.
pub fn known_eigenvalues(pot: &Potential) -> Option<Vec<f64>> {
    match pot.kind {
        PotentialKind::Phi4 => Some(vec![0.0, 1.5]),
        PotentialKind::SineGordon => Some(vec![0.0]),
        PotentialKind::Polynomial { .. } => None,
    }
}

/// Distance from a vacuum below which the profile is continued by its linear tail.
const TAIL_GAP: f64 = 1e-7;

fn rk4_step(pot: &Potential, s: f64, h: f64, sign: f64) -> f64 {
    let rhs = |u: f64| sign * (2.0 * pot.f(u).max(0.0)).sqrt();
    let k1 = rhs(s);
    let k2 = rhs(s + 0.5 * h * k1);
    let k3 = rhs(s + 0.5 * h * k2);
    let k4 = rhs(s + h * k3);
    s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates one half of the profile from the midpoint towards a vacuum with
/// step-doubling error control. Returns `(|y|, S)` pairs.
fn integrate_half(pot: &Potential, sign: f64, reach: f64, tol: f64) -> Result<Vec<(f64, f64)>> {
    let target = if sign > 0.0 { pot.a_plus } else { pot.a_minus };
    let mut y = 0.0;
    let mut s = pot.midpoint();
    let mut h = 1e-2;
    let mut out = vec![(0.0, s)];
    while (target - s) * sign >= TAIL_GAP {
        if y > reach {
            return Err(Error::QuadratureDivergence { reach });
        }
        let full = rk4_step(pot, s, h, sign);
        let half = rk4_step(pot, rk4_step(pot, s, 0.5 * h, sign), 0.5 * h, sign);
        let err = (full - half).abs() / 15.0;
        if err > tol && h > 1e-6 {
            h *= 0.5;
            continue;
        }
        // Richardson-corrected update
        s = half + (half - full) / 15.0;
        y += h;
        out.push((y, s));
        if err < tol / 64.0 && h < 0.05 {
            h *= 2.0;
        }
    }
    Ok(out)
}

/// Builds the kink of `pot` from the first-order reduction `S' = √(2F(S))`.
///
/// The grid is only used to size the tabulated range; the table extends at
/// least to the grid ends and further until the profile reaches the vacua.
pub fn solve_constant_kink(pot: &Potential, grid: &Grid) -> Result<KinkS> {
    pot.validate()?;
    let reach = grid.half_width().max(50.0) * 20.0;
    let right = integrate_half(pot, 1.0, reach, 1e-13)?;
    let left = integrate_half(pot, -1.0, reach, 1e-13)?;
    let mut xs = Vec::with_capacity(left.len() + right.len());
    let mut ys = Vec::with_capacity(xs.capacity());
    for &(y, s) in left.iter().rev() {
        xs.push(-y);
        ys.push(s);
    }
    for &(y, s) in right.iter().skip(1) {
        xs.push(y);
        ys.push(s);
    }
    let y_lo = xs[0];
    let y_hi = *xs.last().unwrap();
    let gap_lo = ys[0] - pot.a_minus;
    let gap_hi = pot.a_plus - ys[ys.len() - 1];
    let slopes = ys.iter().map(|&s| (2.0 * pot.f(s).max(0.0)).sqrt()).collect();
    let interp = CubicHermite::hermite(xs, ys, slopes)?;
    Ok(KinkS {
        repr: KinkRepr::Table(Arc::new(KinkTable {
            interp,
            pot: pot.clone(),
            m: pot.m_sq.sqrt(),
            y_lo,
            y_hi,
            gap_lo,
            gap_hi,
        })),
        source: KinkSource::Quadrature,
    })
}

/// `∫ [S'² + F(S)]` over the grid.
pub fn kink_energy(pot: &Potential, kink: &KinkS, grid: &Grid) -> f64 {
    let f = grid.sample(|y| kink.derivative(y).powi(2) + pot.f(kink.profile(y)));
    crate::grid::integrate(&f, grid.step())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn phi4_data() {
        let (pot, kink) = builtin_phi4();
        assert_eq!(pot.m_sq, 2.0);
        assert_eq!(pot.d2f(1.0), 2.0);
        assert_eq!(pot.d2f(-1.0), 2.0);
        assert_eq!(kink.profile(0.0), 0.0);
        assert!((kink.derivative(0.0) - 1.0 / SQRT_2).abs() < 1e-15);
        pot.validate().unwrap();
        let grid = Grid::new(10.0, 200).unwrap();
        // -S'' + F'(S) with S'' = S'·d/dS √(2F) = F'(S) analytically; check via exact second derivative
        let max_res = grid
            .points()
            .iter()
            .map(|&y| {
                let t = (y / SQRT_2).tanh();
                let c = (y / SQRT_2).cosh();
                let s2 = -t / (c * c);
                (-s2 + pot.df(kink.profile(y))).abs()
            })
            .fold(0.0, f64::max);
        assert!(max_res <= 1e-12, "{max_res}");
    }

    #[test]
    fn sine_gordon_data() {
        let (pot, kink) = builtin_sine_gordon();
        assert_eq!(pot.m_sq, 1.0);
        assert!((kink.profile(0.0) - PI).abs() < 1e-15);
        pot.validate().unwrap();
        let r = known_resonance(&pot).unwrap();
        assert!((r(0.7) - 0.7f64.tanh()).abs() < 1e-15);
        assert_eq!(known_eigenvalues(&pot).unwrap(), vec![0.0]);
    }

    #[test]
    fn derivative_chain_is_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let quartic = Potential::polynomial(vec![0.25, 0.0, -0.5, 0.0, 0.25], -1.0, 1.0).unwrap();
        for pot in [Potential::phi4(), Potential::sine_gordon(), quartic] {
            let h = 1e-4;
            for _ in 0..50 {
                let u = rng.gen_range(pot.a_minus - 0.5..pot.a_plus + 0.5);
                let fd = |g: &dyn Fn(f64) -> f64| (g(u + h) - g(u - h)) / (2.0 * h);
                assert!((fd(&|v| pot.f(v)) - pot.df(u)).abs() < 1e-6);
                assert!((fd(&|v| pot.df(v)) - pot.d2f(u)).abs() < 1e-6);
                assert!((fd(&|v| pot.d2f(v)) - pot.d3f(u)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn quadrature_kink_matches_closed_forms() {
        let grid = Grid::new(10.0, 400).unwrap();
        for (pot, exact) in [builtin_phi4(), builtin_sine_gordon()] {
            let num = solve_constant_kink(&pot, &grid).unwrap();
            assert_eq!(num.source, KinkSource::Quadrature);
            let err = (0..=4000)
                .map(|i| -10.0 + i as f64 * 0.005)
                .map(|y| (num.profile(y) - exact.profile(y)).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-8, "{}: {err}", pot.name());
            let derr = (0..=400)
                .map(|i| -10.0 + i as f64 * 0.05)
                .map(|y| (num.derivative(y) - exact.derivative(y)).abs())
                .fold(0.0, f64::max);
            assert!(derr <= 1e-7, "{}: {derr}", pot.name());
        }
    }

    #[test]
    fn even_potential_gives_odd_kink() {
        let pot = Potential::polynomial(vec![1.0, 0.0, -2.0, 0.0, 1.0], -1.0, 1.0).unwrap();
        let kink = solve_constant_kink(&pot, &Grid::new(10.0, 100).unwrap()).unwrap();
        for i in 0..200 {
            let y = i as f64 * 0.05;
            assert!((kink.profile(y) + kink.profile(-y)).abs() <= 1e-10);
        }
    }

    #[test]
    fn invalid_potentials_are_rejected() {
        // F has an interior zero at u = 0
        let bad = Potential::polynomial(vec![0.0, 0.0, 1.0, 0.0, -2.0, 0.0, 1.0], -1.0, 1.0);
        assert!(matches!(bad, Err(Error::NonPositivePotentialInterior { .. }) | Err(Error::InvalidPotential(_))));
        assert!(Potential::polynomial(vec![1.0, 0.0, -2.0, 0.0, 1.0], -1.0, 2.0).is_err());
        assert!(Potential::polynomial(vec![1.0, 0.0, -2.0, 0.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn kink_energy_converges() {
        let (pot, kink) = builtin_phi4();
        let e: Vec<f64> = [5.0, 10.0, 20.0, 40.0]
            .iter()
            .map(|&l| kink_energy(&pot, &kink, &Grid::new(l, (l * 100.0) as usize).unwrap()))
            .collect();
        assert!((e[3] - e[2]).abs() < 1e-10);
        assert!((e[2] - e[1]).abs() < (e[1] - e[0]).abs());
        // S'² = 2F(S), so the integrand is (3/2)S'² and ∫S'² = 2√2/3
        assert!((e[3] - SQRT_2).abs() < 1e-9);
    }
}
