use thiserror::Error;

/// Errors raised by the model, the integrator and the control solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("control value {0} outside [0, 1]")]
    ControlOutOfRange(f64),

    #[error("negative compartment {compartment} = {value} (strain {strain:?})")]
    NegativeCompartment {
        compartment: &'static str,
        strain: Option<usize>,
        value: f64,
    },

    #[error("inconsistent state: susceptible pool of strain {strain} is {value}")]
    InconsistentState { strain: usize, value: f64 },

    #[error("expected {expected} strains, got {actual}")]
    StrainCountMismatch { expected: usize, actual: usize },

    #[error("strain list is empty")]
    NoStrains,

    #[error("strain index {0} out of range")]
    StrainIndex(usize),

    #[error("closed-form equilibrium needs exactly two strains, got {0}")]
    EquilibriumStrainCount(usize),

    #[error("degenerate control u = 1: transmission vanishes and the equilibrium is undefined")]
    DegenerateControl,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration failed at step {step} (t = {t}): {reason}")]
    Integration { step: usize, t: f64, reason: String },

    #[error("solver failure at iteration {iteration}: {reason}")]
    Solver { iteration: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
