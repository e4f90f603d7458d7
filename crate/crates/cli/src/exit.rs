//! Exit-code contract: 2 for configuration errors, 3 for numerical failures,
//! 1 for failed verification.

use std::fmt;

pub const CONFIG: u8 = 2;
pub const NUMERIC: u8 = 3;
pub const VERIFY_FAILED: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: CONFIG,
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Tags core errors with the operation that raised them.
pub trait Numeric<T> {
    fn during(self, op: &str) -> CliResult<T>;
}

impl<T> Numeric<T> for contract_lab::Result<T> {
    fn during(self, op: &str) -> CliResult<T> {
        self.map_err(|e| Failure {
            code: NUMERIC,
            error: anyhow::Error::new(e).context(format!("{op} failed")),
        })
    }
}

/// Output and configuration problems share the configuration exit code.
pub trait Config<T> {
    fn or_config(self) -> CliResult<T>;
}

impl<T> Config<T> for anyhow::Result<T> {
    fn or_config(self) -> CliResult<T> {
        self.map_err(Failure::config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_errors_name_the_operation() {
        let r: contract_lab::Result<()> = Err(contract_lab::Error::ZeroPrice);
        let f = r.during("revealed equilibrium").unwrap_err();
        assert_eq!(f.code, NUMERIC);
        assert_eq!(f.to_string(), "revealed equilibrium failed: price is zero");
    }
}
