use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("interconnection is ill-posed (algebraic loop matrix numerically singular)")]
    IllPosed,
    #[error("resolvent (jwI - A) is singular at w = {0}")]
    ResolventSingular(f64),
    #[error("eigenvalue solver failed to converge")]
    Eigensolver,
    #[error("system is unstable (spectral abscissa {0})")]
    Unstable(f64),
    #[error("nonzero feedthrough: continuous-time H2 norm is infinite")]
    NonzeroFeedthrough,
    #[error("Hamiltonian weight gamma^2 I - D'D is singular")]
    SingularR,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parameter {index} violates its bounds")]
    BoundViolation { index: usize },
    #[error("scheduled structure requires a schedule value")]
    MissingScheduleValue,
    #[error("tangent quadratic program failed: {0}")]
    QpFailure(String),
    #[error("no stabilizing parameter found within the budget")]
    Unstabilizable,
    #[error("hard constraints could not be satisfied (g = {0})")]
    InfeasibleHard(f64),
    #[error("q = 1 is a singular value of the damping parameter")]
    QEqualsOne,
    #[error("delay-free algebraic loop in network")]
    AlgebraicLoop,
    #[error("step {dt} too large for minimum delay {min_delay}")]
    StepTooLarge { dt: f64, min_delay: f64 },
    #[error("time step must equal the grid spacing (CFL = 1), got ratio {0}")]
    CflViolation(f64),
    #[error("linear system is singular: {0}")]
    Singular(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
}
