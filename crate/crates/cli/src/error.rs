//! Exit-code contract: 0 success, 2 validation error, 3 runtime error
//! (diverged integration, inconclusive classification, I/O).

use parapath::dde::DdeError;
use parapath::strategy::CostError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    /// Integrator errors: bad steps and horizons are misconfiguration, a
    /// diverging state is a runtime failure.
    pub fn from_dde(e: DdeError) -> CliError {
        match e {
            DdeError::NonFinite { .. } => CliError::Runtime(e.to_string()),
            DdeError::StepTooLarge { .. }
            | DdeError::HorizonTooShort { .. }
            | DdeError::BadHistory(_) => CliError::Validation(e.to_string()),
        }
    }

    /// Cost-calculus errors: inconclusive classifications surface at run
    /// time, everything else is misconfiguration.
    pub fn from_cost(e: CostError) -> CliError {
        match e {
            CostError::Inconclusive(_) => CliError::Runtime(e.to_string()),
            CostError::Dde(inner) => CliError::from_dde(inner),
            CostError::OutOfRange(_) | CostError::BadParameter(_) | CostError::ClosedForm(_) => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}
