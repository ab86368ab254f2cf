//! Experiment configuration: one TOML file per experiment.

use std::path::{Path, PathBuf};

use kink_core::coeffs::{Bump, CoefficientProfile, Family, Field, Table, Variable};
use kink_core::model::{builtin_phi4, builtin_sine_gordon, solve_constant_kink, KinkS, Potential};
use kink_core::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Stage};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub kink: KinkConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub resonance: ResonanceConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Phi4,
    SineGordon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    /// `F(u) = Σ coeffs[j] u^j`.
    pub coeffs: Vec<f64>,
    pub a_minus: f64,
    pub a_plus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<PolynomialSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub family: Family,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    #[serde(default)]
    pub variable: Variable,
    /// Multiplies every bump amplitude and table value.
    #[serde(default = "one")]
    pub scale: f64,
    /// Bumps of `a − 1`.
    #[serde(default)]
    pub a: Vec<BumpConfig>,
    #[serde(default)]
    pub b: Vec<BumpConfig>,
    #[serde(default)]
    pub c: Vec<BumpConfig>,
    /// Two-column tables, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_table: Option<PathBuf>,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        Self { variable: Variable::Y, scale: 1.0, a: vec![], b: vec![], c: vec![], a_table: None, b_table: None, c_table: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 20.0, intervals: 4096 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Stopping tolerance of the kink fixed point.
    pub fixed_point: f64,
    /// Accepted sup-norm residual of the kink equation.
    pub residual: f64,
    /// Smallest accepted `|W_Y(0)|` for the Green's function.
    pub greens_wronskian: f64,
    /// Bisection bracket width for Evans zeros.
    pub root: f64,
    /// `|W(m²)|` below this is a threshold zero.
    pub threshold: f64,
    /// Relative Abel residual accepted for each Evans evaluation.
    pub abel: f64,
    /// Largest accepted spectral-vs-oracle eigenvalue gap.
    pub oracle_match: f64,
    /// Largest accepted relative energy drift in `simulate`.
    pub energy_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fixed_point: 1e-13,
            residual: 1e-8,
            greens_wronskian: 1e-9,
            root: 1e-10,
            threshold: 1e-6,
            abel: 1e-7,
            oracle_match: 1e-5,
            energy_drift: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Search interval; the upper end defaults to `m²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<[f64; 2]>,
    pub n_scan: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { search: None, n_scan: 400 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KinkConfig {
    pub max_iterations: usize,
}

impl Default for KinkConfig {
    fn default() -> Self {
        Self { max_iterations: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceConfig {
    /// Inconclusive band is `margin_factor · δ²`.
    pub margin_factor: f64,
    /// Size of the coefficients; defaults to `‖|b|+|c|‖_{L¹} + ‖|b|+|c|‖_{L∞}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Window below `m²`, in units of `δ`, searched for an emerging eigenvalue.
    pub window: f64,
    /// Values of `k` for the `W(m² − k²)/k` table.
    pub slope_ks: Vec<f64>,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        Self { margin_factor: 10.0, delta: None, window: 1.0, slope_ks: vec![0.08, 0.04, 0.02, 0.01, 0.005] }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Target mesh width of the finite-difference operator.
    pub h: f64,
    pub max_half_width: f64,
    /// Eigenvalues above `m² − margin` are not compared.
    pub margin: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { h: 0.01, max_half_width: 5000.0, margin: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Random,
    Sech,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    pub eps: f64,
    pub velocity_share: f64,
    pub center: f64,
    /// Random: largest wavenumber.
    pub bandwidth: f64,
    /// Random: half-width of the window.
    pub radius: f64,
    /// Sech: scale.
    pub width: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { kind: PerturbationKind::Random, eps: 1e-2, velocity_share: 0.3, center: 0.0, bandwidth: 3.0, radius: 5.0, width: 1.0 }
    }
}

impl PerturbationConfig {
    /// Distance from the origin beyond which the initial perturbation is negligible.
    pub fn reach(&self) -> f64 {
        match self.kind {
            PerturbationKind::Random => self.center.abs() + self.radius,
            // sech z < 5e-9 for |z| > 20
            PerturbationKind::Sech => self.center.abs() + 20.0 * self.width,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    /// `dt = dt_factor · h`.
    pub dt_factor: f64,
    pub t_end: f64,
    pub q: f64,
    pub sample_dt: f64,
    /// Times at which the field is written to `snapshots.csv`.
    pub snapshots: Vec<f64>,
    /// Accepted `sup_t d_q / d_q(0)`.
    pub orbital_factor: f64,
    pub perturbation: PerturbationConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            half_width: 128.0,
            intervals: 8192,
            dt_factor: 0.5,
            t_end: 100.0,
            q: 1.0,
            sample_dt: 1.0,
            snapshots: vec![],
            orbital_factor: 8.0,
            perturbation: PerturbationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Checks on the configured model and coefficients.
    Config,
    /// A fixed matrix of built-in models and coefficient families.
    Acceptance,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub suite: Suite,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { suite: Suite::Config }
    }
}

fn one() -> f64 {
    1.0
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn power_of_two(path: &str, n: usize) -> Result<(), CliError> {
    if n >= 1024 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be a power of two >= 1024, got {n}")))
    }
}

/// Parses TOML text, reporting the path of the offending field.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        CliError::config(if path == "." { "<root>".to_string() } else { path }, message)
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { context: format!("reading {}", path.display()), source })?;
        let cfg = parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, dir))
    }

    /// Checks the invariants that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.model.builtin, &self.model.polynomial) {
            (Some(_), None) => {}
            (None, Some(p)) => {
                Potential::polynomial(p.coeffs.clone(), p.a_minus, p.a_plus)
                    .map_err(|e| CliError::config("model.polynomial", e.to_string()))?;
            }
            _ => return Err(CliError::config("model", "exactly one of `builtin` and `polynomial` is required")),
        }
        positive("grid.L", self.grid.half_width)?;
        power_of_two("grid.N", self.grid.intervals)?;
        let c = &self.coefficients;
        if !c.scale.is_finite() {
            return Err(CliError::config("coefficients.scale", "must be finite"));
        }
        for (name, bumps) in [("a", &c.a), ("b", &c.b), ("c", &c.c)] {
            for (i, b) in bumps.iter().enumerate() {
                positive(&format!("coefficients.{name}[{i}].width"), b.width)?;
                if !(b.amplitude.is_finite() && b.center.is_finite()) {
                    return Err(CliError::config(format!("coefficients.{name}[{i}]"), "amplitude and center must be finite"));
                }
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("fixed_point", t.fixed_point),
            ("residual", t.residual),
            ("greens_wronskian", t.greens_wronskian),
            ("root", t.root),
            ("threshold", t.threshold),
            ("abel", t.abel),
            ("oracle_match", t.oracle_match),
            ("energy_drift", t.energy_drift),
        ] {
            positive(&format!("tolerances.{name}"), v)?;
        }
        if self.spectrum.n_scan < 2 {
            return Err(CliError::config("spectrum.n_scan", "must be at least 2"));
        }
        if self.kink.max_iterations == 0 {
            return Err(CliError::config("kink.max_iterations", "must be at least 1"));
        }
        if let Some([lo, hi]) = self.spectrum.search {
            if !(lo < hi) || !lo.is_finite() {
                return Err(CliError::config("spectrum.search", "must be an increasing pair"));
            }
            if hi > self.m_sq() {
                return Err(CliError::config("spectrum.search", format!("upper end must not exceed m² = {}", self.m_sq())));
            }
        }
        positive("resonance.margin_factor", self.resonance.margin_factor)?;
        positive("resonance.window", self.resonance.window)?;
        if let Some(d) = self.resonance.delta {
            positive("resonance.delta", d)?;
        }
        for (i, k) in self.resonance.slope_ks.iter().enumerate() {
            positive(&format!("resonance.slope_ks[{i}]"), *k)?;
        }
        positive("oracle.h", self.oracle.h)?;
        positive("oracle.max_half_width", self.oracle.max_half_width)?;
        positive("oracle.margin", self.oracle.margin)?;
        Ok(())
    }

    /// Checks the `[simulate]` block, including the finite-speed budget `t_end < L − y₀`.
    pub fn validate_simulate(&self) -> Result<(), CliError> {
        let s = &self.simulate;
        positive("simulate.L", s.half_width)?;
        power_of_two("simulate.N", s.intervals)?;
        positive("simulate.dt_factor", s.dt_factor)?;
        positive("simulate.t_end", s.t_end)?;
        positive("simulate.q", s.q)?;
        positive("simulate.sample_dt", s.sample_dt)?;
        positive("simulate.orbital_factor", s.orbital_factor)?;
        let p = &s.perturbation;
        positive("simulate.perturbation.eps", p.eps)?;
        if !(0.0..=1.0).contains(&p.velocity_share) {
            return Err(CliError::config("simulate.perturbation.velocity_share", "must lie in [0, 1]"));
        }
        match p.kind {
            PerturbationKind::Random => {
                positive("simulate.perturbation.bandwidth", p.bandwidth)?;
                positive("simulate.perturbation.radius", p.radius)?;
            }
            PerturbationKind::Sech => positive("simulate.perturbation.width", p.width)?,
        }
        let budget = s.half_width - p.reach();
        if !(s.t_end < budget) {
            return Err(CliError::config(
                "simulate.t_end",
                format!("must be below L − y₀ = {budget} so the perturbation does not reach the boundary"),
            ));
        }
        Ok(())
    }

    pub fn m_sq(&self) -> f64 {
        match (&self.model.builtin, &self.model.polynomial) {
            (Some(Builtin::Phi4), _) => Potential::phi4().m_sq,
            (Some(Builtin::SineGordon), _) => Potential::sine_gordon().m_sq,
            (None, Some(p)) => Potential::polynomial(p.coeffs.clone(), p.a_minus, p.a_plus).map(|p| p.m_sq).unwrap_or(f64::NAN),
            (None, None) => f64::NAN,
        }
    }

    /// Fills every default that depends on the model.
    pub fn resolve(&mut self) {
        if self.spectrum.search.is_none() {
            self.spectrum.search = Some([-0.5, self.m_sq()]);
        }
    }

    pub fn search(&self) -> (f64, f64) {
        let [lo, hi] = self.spectrum.search.unwrap_or([-0.5, self.m_sq()]);
        (lo, hi)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.grid.half_width, self.grid.intervals).map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn model(&self) -> Result<(Potential, KinkS), CliError> {
        match (&self.model.builtin, &self.model.polynomial) {
            (Some(Builtin::Phi4), _) => Ok(builtin_phi4()),
            (Some(Builtin::SineGordon), _) => Ok(builtin_sine_gordon()),
            (None, Some(p)) => {
                let pot = Potential::polynomial(p.coeffs.clone(), p.a_minus, p.a_plus)
                    .map_err(|e| CliError::config("model.polynomial", e.to_string()))?;
                let s = solve_constant_kink(&pot, &self.grid()?).stage("model")?;
                Ok((pot, s))
            }
            (None, None) => Err(CliError::config("model", "no model given")),
        }
    }

    pub fn profile(&self, base: &Path) -> Result<CoefficientProfile, CliError> {
        let c = &self.coefficients;
        let field = |name: &str, bumps: &[BumpConfig], table: &Option<PathBuf>| -> Result<Field, CliError> {
            let mut f = Field::from_bumps(bumps.iter().map(|b| Bump::new(b.family, b.amplitude, b.width, b.center)).collect());
            if let Some(path) = table {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::config(format!("coefficients.{name}_table"), format!("{}: {e}", full.display())))?;
                let t = Table::parse_csv(&text).map_err(|e| CliError::config(format!("coefficients.{name}_table"), e.to_string()))?;
                f = f.with(&Field::from_table(t)).map_err(|e| CliError::config(format!("coefficients.{name}_table"), e.to_string()))?;
            }
            Ok(f.scaled(c.scale))
        };
        Ok(CoefficientProfile {
            a_dev: field("a", &c.a, &c.a_table)?,
            b: field("b", &c.b, &c.b_table)?,
            c: field("c", &c.c, &c.c_table)?,
            variable: c.variable,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let mut cfg = parse("[model]\nbuiltin = \"phi4\"\n").unwrap();
        cfg.validate().unwrap();
        cfg.resolve();
        assert_eq!(cfg.grid.intervals, 4096);
        assert_eq!(cfg.spectrum.search, Some([-0.5, 2.0]));
    }

    #[test]
    fn errors_name_the_field() {
        let cfg = parse("[model]\nbuiltin = \"phi4\"\n[grid]\nL = -1.0\nN = 4096\n").unwrap();
        match cfg.validate() {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "grid.L"),
            other => panic!("{other:?}"),
        }
        let cfg = parse("[model]\nbuiltin = \"phi4\"\n[grid]\nL = 20.0\nN = 1000\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { path, .. }) if path == "grid.N"));
        match parse("[model]\nbuiltin = \"phi4\"\n[[coefficients.b]]\nfamily = \"cubic\"\namplitude = 0.1\n") {
            Err(CliError::Config { path, .. }) => assert!(path.starts_with("coefficients.b"), "{path}"),
            other => panic!("{other:?}"),
        }
        match parse("[model]\nbuiltin = \"phi4\"\n[grid]\nsize = 3\n") {
            Err(CliError::Config { path, .. }) => assert!(path.starts_with("grid"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simulation_budget_is_enforced() {
        let mut cfg = parse("[model]\nbuiltin = \"phi4\"\n").unwrap();
        cfg.simulate.half_width = 50.0;
        cfg.simulate.t_end = 60.0;
        assert!(matches!(cfg.validate_simulate(), Err(CliError::Config { path, .. }) if path == "simulate.t_end"));
        cfg.simulate.t_end = 40.0;
        cfg.validate_simulate().unwrap();
    }
}
