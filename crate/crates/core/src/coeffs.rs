//! Variable coefficients `a, b, c`, the change of variables to the `y` form and
//! the smallness norms of the transformed drift and potential.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cumulative_from_left, derivative, CubicHermite, Grid};

/// Shape of a single coefficient bump in the scaled variable `z = (x - center) / width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `e^{-z²}`
    Gaussian,
    /// `sech² z`
    Sech2,
    /// `e^{-|z|}`
    Exponential,
    /// `√(2e) z e^{-z²}`, peak value 1.
    OddGaussian,
    /// `(3√3/2) tanh z sech² z`, peak value 1.
    OddSech2,
    /// `e z e^{-|z|}`, peak value 1.
    OddExponential,
}

impl Family {
    pub const EVEN: [Family; 3] = [Family::Gaussian, Family::Sech2, Family::Exponential];
    pub const ODD: [Family; 3] = [Family::OddGaussian, Family::OddSech2, Family::OddExponential];

    pub fn is_odd(self) -> bool {
        matches!(self, Family::OddGaussian | Family::OddSech2 | Family::OddExponential)
    }

    /// The odd counterpart of an even shape and vice versa.
    pub fn partner(self) -> Family {
        match self {
            Family::Gaussian => Family::OddGaussian,
            Family::Sech2 => Family::OddSech2,
            Family::Exponential => Family::OddExponential,
            Family::OddGaussian => Family::Gaussian,
            Family::OddSech2 => Family::Sech2,
            Family::OddExponential => Family::Exponential,
        }
    }

    /// Shape value and derivative with respect to `z`.
    fn shape(self, z: f64) -> (f64, f64) {
        match self {
            Family::Gaussian => {
                let e = (-z * z).exp();
                (e, -2.0 * z * e)
            }
            Family::Sech2 => {
                let s = 1.0 / z.cosh();
                let s2 = s * s;
                (s2, -2.0 * s2 * z.tanh())
            }
            Family::Exponential => {
                let e = (-z.abs()).exp();
                (e, -z.signum() * e * f64::from(z != 0.0))
            }
            Family::OddGaussian => {
                let k = (2.0 * std::f64::consts::E).sqrt();
                let e = (-z * z).exp();
                (k * z * e, k * (1.0 - 2.0 * z * z) * e)
            }
            Family::OddSech2 => {
                let k = 1.5 * 3f64.sqrt();
                let s = 1.0 / z.cosh();
                let s2 = s * s;
                let t = z.tanh();
                (k * t * s2, k * s2 * (s2 - 2.0 * t * t))
            }
            Family::OddExponential => {
                let k = std::f64::consts::E;
                let e = (-z.abs()).exp();
                (k * z * e, k * (1.0 - z.abs()) * e)
            }
        }
    }

    /// Exact `∫ |shape(z)| dz`.
    pub fn abs_integral(self) -> f64 {
        let e = std::f64::consts::E;
        match self {
            Family::Gaussian => std::f64::consts::PI.sqrt(),
            Family::Sech2 => 2.0,
            Family::Exponential => 2.0,
            Family::OddGaussian => (2.0 * e).sqrt(),
            Family::OddSech2 => 1.5 * 3f64.sqrt(),
            Family::OddExponential => 2.0 * e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub family: Family,
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub center: f64,
}

impl Bump {
    pub fn new(family: Family, amplitude: f64, width: f64, center: f64) -> Self {
        Self { family, amplitude, width, center }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * self.family.shape((x - self.center) / self.width).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.amplitude * self.family.shape((x - self.center) / self.width).1 / self.width
    }

    fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidCoefficient(format!("bump width must be positive, got {}", self.width)));
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::InvalidCoefficient("bump amplitude and center must be finite".into()));
        }
        Ok(())
    }
}

/// Coefficient given as a table of `(position, value)` pairs; zero outside the table.
#[derive(Debug)]
pub struct Table {
    interp: CubicHermite,
}

impl Table {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::InvalidCoefficient("a coefficient table needs at least three rows".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCoefficient("table positions must be strictly increasing".into()));
        }
        // three-point slopes, one-sided at the ends
        let mut slopes = vec![0.0; n];
        for i in 0..n {
            let (a, b, c) = if i == 0 {
                (0, 1, 2)
            } else if i == n - 1 {
                (n - 3, n - 2, n - 1)
            } else {
                (i - 1, i, i + 1)
            };
            let (x0, x1, x2) = (xs[a], xs[b], xs[c]);
            let x = xs[i];
            let l0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
            slopes[i] = l0 * ys[a] + l1 * ys[b] + l2 * ys[c];
        }
        Ok(Self { interp: CubicHermite::hermite(xs, ys, slopes)? })
    }

    /// Parses two comma- or whitespace-separated numeric columns. Lines starting
    /// with `#` and a non-numeric header line are skipped.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|s| s.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 => {
                    xs.push(v[0]);
                    ys.push(v[1]);
                }
                None if xs.is_empty() => continue,
                _ => {
                    return Err(Error::InvalidCoefficient(format!(
                        "table line {}: expected two numeric columns",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(xs, ys)
    }

    fn in_range(&self, x: f64) -> bool {
        let (lo, hi) = self.interp.domain();
        x >= lo && x <= hi
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.in_range(x) {
            self.interp.eval(x)
        } else {
            0.0
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if self.in_range(x) {
            self.interp.eval_derivative(x)
        } else {
            0.0
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.interp.domain()
    }
}

/// A coefficient function: a sum of bumps plus an optional table.
#[derive(Debug, Clone, Default)]
pub struct Field {
    pub bumps: Vec<Bump>,
    pub table: Option<Arc<Table>>,
    scale: Option<f64>,
}

impl Field {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn bump(family: Family, amplitude: f64, width: f64, center: f64) -> Self {
        Self { bumps: vec![Bump::new(family, amplitude, width, center)], ..Self::default() }
    }

    pub fn from_bumps(bumps: Vec<Bump>) -> Self {
        Self { bumps, ..Self::default() }
    }

    pub fn from_table(table: Table) -> Self {
        Self { table: Some(Arc::new(table)), ..Self::default() }
    }

    pub fn is_zero(&self) -> bool {
        if self.scale == Some(0.0) {
            return self.bumps.iter().all(|b| b.amplitude == 0.0);
        }
        self.bumps.iter().all(|b| b.amplitude == 0.0) && self.table.is_none()
    }

    /// The same field multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.amplitude *= s;
        }
        if out.table.is_some() {
            out.scale = Some(out.scale.unwrap_or(1.0) * s);
        }
        out
    }

    pub fn with(mut self, other: &Field) -> Result<Self> {
        self.bumps.extend_from_slice(&other.bumps);
        if other.table.is_some() {
            if self.table.is_some() {
                return Err(Error::InvalidCoefficient("at most one table per coefficient".into()));
            }
            self.table = other.table.clone();
            self.scale = other.scale;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.bumps.iter().try_for_each(Bump::validate)
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut v: f64 = self.bumps.iter().map(|b| b.value(x)).sum();
        if let Some(t) = &self.table {
            v += self.scale.unwrap_or(1.0) * t.value(x);
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v: f64 = self.bumps.iter().map(|b| b.derivative(x)).sum();
        if let Some(t) = &self.table {
            v += self.scale.unwrap_or(1.0) * t.derivative(x);
        }
        v
    }

    /// Interval outside which the field is negligible (below `1e-17` relative).
    pub fn support(&self) -> (f64, f64) {
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for b in &self.bumps {
            let reach = match b.family {
                Family::Gaussian | Family::OddGaussian => 6.5,
                _ => 42.0,
            } * b.width;
            lo = lo.min(b.center - reach);
            hi = hi.max(b.center + reach);
        }
        if let Some(t) = &self.table {
            let (a, b) = t.domain();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }
}

/// The independent variable in which a coefficient profile is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    X,
    #[default]
    Y,
}

/// Coefficients of `a ∂_x² + b ∂_x + c`; `a = 1 + a_dev`.
#[derive(Debug, Clone, Default)]
pub struct CoefficientProfile {
    pub a_dev: Field,
    pub b: Field,
    pub c: Field,
    pub variable: Variable,
}

impl CoefficientProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Coefficients already in the `y` form (`a ≡ 1`).
    pub fn y_form(b: Field, c: Field) -> Self {
        Self { a_dev: Field::zero(), b, c, variable: Variable::Y }
    }

    pub fn a(&self, x: f64) -> f64 {
        1.0 + self.a_dev.value(x)
    }

    pub fn da(&self, x: f64) -> f64 {
        self.a_dev.derivative(x)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a_dev: self.a_dev.scaled(s), b: self.b.scaled(s), c: self.c.scaled(s), variable: self.variable }
    }
}

/// Uniformly sampled curve with exact slopes, extended by constants.
#[derive(Debug)]
struct Sampled {
    interp: CubicHermite,
    left: f64,
    right: f64,
}

impl Sampled {
    fn new(xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let left = ys[0];
        let right = ys[ys.len() - 1];
        Ok(Self { interp: CubicHermite::hermite(xs, ys, slopes)?, left, right })
    }

    fn value(&self, x: f64) -> f64 {
        let (lo, hi) = self.interp.domain();
        if x <= lo {
            self.left
        } else if x >= hi {
            self.right
        } else {
            self.interp.eval(x)
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        self.interp.eval_derivative(x)
    }
}

#[derive(Debug, Clone)]
enum Curve {
    Field(Field),
    Sampled(Arc<Sampled>),
}

impl Curve {
    fn value(&self, y: f64) -> f64 {
        match self {
            Curve::Field(f) => f.value(y),
            Curve::Sampled(s) => s.value(y),
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        match self {
            Curve::Field(f) => f.derivative(y),
            Curve::Sampled(s) => s.derivative(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaReport {
    pub l1: f64,
    pub linf: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Drift `b` and potential `c` of the `y`-form equation together with the
/// energy weight `ω = exp ∫_{-∞}^y b` and the coordinate maps.
#[derive(Debug, Clone)]
pub struct TransformedCoefficients {
    b: Curve,
    c: Curve,
    omega: Arc<Sampled>,
    map: Option<(Arc<Sampled>, Arc<Sampled>)>,
    zero: bool,
    /// `(‖|b|+|c|‖_{L¹}, ‖|b|+|c|‖_{L∞})` on the construction grid.
    pub delta_report: (f64, f64),
}

impl TransformedCoefficients {
    pub fn b(&self, y: f64) -> f64 {
        self.b.value(y)
    }

    pub fn db(&self, y: f64) -> f64 {
        self.b.derivative(y)
    }

    pub fn c(&self, y: f64) -> f64 {
        self.c.value(y)
    }

    pub fn omega(&self, y: f64) -> f64 {
        self.omega.value(y)
    }

    /// `x(y)`; the identity when no transform was needed.
    pub fn x_of_y(&self, y: f64) -> f64 {
        self.map.as_ref().map_or(y, |(xy, _)| xy.value_linear(y))
    }

    pub fn y_of_x(&self, x: f64) -> f64 {
        self.map.as_ref().map_or(x, |(_, yx)| yx.value_linear(x))
    }

    /// True when `b` and `c` vanish identically.
    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

impl Sampled {
    /// Like `value`, but continues linearly with unit slope outside the table
    /// (the coordinate maps are asymptotically the identity up to a shift).
    fn value_linear(&self, x: f64) -> f64 {
        let (lo, hi) = self.interp.domain();
        if x < lo {
            self.left + (x - lo)
        } else if x > hi {
            self.right + (x - hi)
        } else {
            self.interp.eval(x)
        }
    }
}

fn omega_table(b: &Curve, lo: f64, hi: f64, h: f64) -> Result<Sampled> {
    let n = (((hi - lo) / h).ceil() as usize).max(8).next_multiple_of(2);
    let step = (hi - lo) / n as f64;
    let ys: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let bs: Vec<f64> = ys.iter().map(|&y| b.value(y)).collect();
    let cum = cumulative_from_left(&bs, step);
    let om: Vec<f64> = cum.iter().map(|v| v.exp()).collect();
    let slopes: Vec<f64> = om.iter().zip(&bs).map(|(o, b)| o * b).collect();
    Sampled::new(ys, om, slopes)
}

fn norms(b: &Curve, c: &Curve, grid: &Grid) -> (f64, f64) {
    let f = grid.sample(|y| b.value(y).abs() + c.value(y).abs());
    crate::grid::l1_linf(&f, grid.step())
}

/// Transforms a coefficient profile to the `y` variable `y = ∫_0^x a^{-1/2}`.
///
/// The drift becomes `b_y = a^{-1/2}(b - ½ a_x)` evaluated at `x(y)`.
pub fn transform_to_y(profile: &CoefficientProfile, grid: &Grid) -> Result<TransformedCoefficients> {
    profile.a_dev.validate()?;
    profile.b.validate()?;
    profile.c.validate()?;
    let h = grid.step() / 2.0;
    let identity = profile.variable == Variable::Y || profile.a_dev.is_zero();
    let (b, c, map) = if identity {
        (Curve::Field(profile.b.clone()), Curve::Field(profile.c.clone()), None)
    } else {
        let (s_lo, s_hi) = profile.a_dev.support();
        let (b_lo, b_hi) = profile.b.support();
        let (c_lo, c_hi) = profile.c.support();
        let a_max = (0..=2000)
            .map(|i| profile.a(s_lo + (s_hi - s_lo) * i as f64 / 2000.0))
            .fold(1.0, f64::max);
        let reach = (grid.half_width() + 1.0) * a_max.sqrt();
        let x_lo = s_lo.min(b_lo).min(c_lo).min(-reach) - 1.0;
        let x_hi = s_hi.max(b_hi).max(c_hi).max(reach) + 1.0;
        let n = (((x_hi - x_lo) / h).ceil() as usize).max(8).next_multiple_of(2);
        let hx = (x_hi - x_lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| x_lo + i as f64 * hx).collect();
        let mut inv_sqrt = Vec::with_capacity(xs.len());
        for &x in &xs {
            let a = profile.a(x);
            if !(a > 0.0) {
                return Err(Error::EllipticityViolation { at: x, value: a });
            }
            inv_sqrt.push(a.powf(-0.5));
        }
        // y measured from x = 0
        let cum = cumulative_from_left(&inv_sqrt, hx);
        let at_zero = crate::grid::interp_uniform(&cum, x_lo, hx, 0.0, 0.0);
        let ys: Vec<f64> = cum.iter().map(|v| v - at_zero).collect();
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonInvertibleMap);
        }
        let sqrt_a: Vec<f64> = inv_sqrt.iter().map(|v| 1.0 / v).collect();
        let x_of_y = Sampled::new(ys.clone(), xs.clone(), sqrt_a)?;
        let y_of_x = Sampled::new(xs.clone(), ys.clone(), inv_sqrt.clone())?;
        let by: Vec<f64> = xs
            .iter()
            .zip(&inv_sqrt)
            .map(|(&x, &s)| s * (profile.b.value(x) - 0.5 * profile.da(x)))
            .collect();
        let cy: Vec<f64> = xs.iter().map(|&x| profile.c.value(x)).collect();
        // slopes in y: d/dy = a^{1/2} d/dx
        let dby_dx = derivative(&by, hx);
        let by_slopes: Vec<f64> = dby_dx.iter().zip(&inv_sqrt).map(|(d, s)| d / s).collect();
        let cy_slopes: Vec<f64> =
            xs.iter().zip(&inv_sqrt).map(|(&x, s)| profile.c.derivative(x) / s).collect();
        let b = Curve::Sampled(Arc::new(Sampled::new(ys.clone(), by, by_slopes)?));
        let c = Curve::Sampled(Arc::new(Sampled::new(ys.clone(), cy, cy_slopes)?));
        (b, c, Some((Arc::new(x_of_y), Arc::new(y_of_x))))
    };
    let (lo, hi) = match &map {
        Some((xy, _)) => xy.interp.domain(),
        None => {
            let (l, r) = profile.b.support();
            (l.min(-grid.half_width()) - 1.0, r.max(grid.half_width()) + 1.0)
        }
    };
    let omega = Arc::new(omega_table(&b, lo, hi, h)?);
    let zero = identity && profile.b.is_zero() && profile.c.is_zero();
    let delta_report = norms(&b, &c, grid);
    Ok(TransformedCoefficients { b, c, omega, map, zero, delta_report })
}

/// Shorthand for coefficients given directly in the `y` form.
pub fn y_form(b: Field, c: Field, grid: &Grid) -> Result<TransformedCoefficients> {
    transform_to_y(&CoefficientProfile::y_form(b, c), grid)
}

/// Zero coefficients.
pub fn zero(grid: &Grid) -> TransformedCoefficients {
    y_form(Field::zero(), Field::zero(), grid).expect("zero coefficients are valid")
}

/// `L¹` and `L∞` norms of `|b| + |c|` on `grid` against the bound `c0·δ`.
pub fn check_smallness(tc: &TransformedCoefficients, grid: &Grid, delta: f64, c0: f64) -> DeltaReport {
    let (l1, linf) = norms(&tc.b, &tc.c, grid);
    let bound = c0 * delta;
    DeltaReport { l1, linf, bound, pass: l1 + linf <= bound }
}
