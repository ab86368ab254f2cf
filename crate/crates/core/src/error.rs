use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("potential is not positive inside the vacuum interval (F({at}) = {value})")]
    NonPositivePotentialInterior { at: f64, value: f64 },
    #[error("kink profile did not reach the vacua within |y| <= {reach}")]
    QuadratureDivergence { reach: f64 },
    #[error("coefficient a is not positive (a({at}) = {value})")]
    EllipticityViolation { at: f64, value: f64 },
    #[error("coordinate change is not strictly monotone")]
    NonInvertibleMap,
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("Picard iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("spectral parameter {lambda} is at or above the threshold {m_sq}; use the threshold solver")]
    ThresholdParameter { lambda: f64, m_sq: f64 },
    #[error("Picard and ODE Jost solutions disagree by {discrepancy:e} (tolerance {tolerance:e})")]
    CrossCheckFailure { discrepancy: f64, tolerance: f64 },
    #[error("weighted integrability estimate {estimate:e} exceeds bound {bound:e}; threshold theory may not apply")]
    SlowDecay { estimate: f64, bound: f64 },
    #[error("companion solution is parallel at the matching point (Wronskian {wronskian:e})")]
    ParallelSolutions { wronskian: f64 },
    #[error("companion solution vanishes at y = {at}; reduction of order is not available")]
    CompanionZero { at: f64 },
    #[error("zero is (numerically) an eigenvalue of the linearised kink operator (Wronskian {wronskian:e})")]
    ZeroEigenvalueDetected { wronskian: f64 },
    #[error("fixed-point map is not contracting (measured factor {factor})")]
    ContractionFailure { factor: f64 },
    #[error("two roots fall into the scan cell [{lo}, {hi}]; increase the scan resolution")]
    BracketCollision { lo: f64, hi: f64 },
    #[error("threshold profile has vanishing limits; criterion undefined")]
    DegenerateResonance,
    #[error("drift derivative cannot be formed: {0}")]
    NonDifferentiableDrift(String),
    #[error("eigenvalues near {near} cannot be separated at working precision")]
    ClusterTooTight { near: f64 },
    #[error("singular linear system")]
    SingularSystem,
    #[error("time step {dt} violates the CFL bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("field became non-finite at t = {t}")]
    NonFiniteField { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
