use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("endpoint failure: {0}")]
    Endpoint(String),
    #[error("model fit did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Endpoint(_) => 4,
            CliError::NonConvergence(_) => 5,
            CliError::InvalidData(_) => 6,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::InvalidData(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::InvalidData(e.to_string())
    }
}

impl From<vat_core::eval::TranscriptError> for CliError {
    fn from(e: vat_core::eval::TranscriptError) -> Self {
        CliError::InvalidData(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let errors = [
            CliError::Io(std::io::Error::other("x")),
            CliError::Config(String::new()),
            CliError::Generation(String::new()),
            CliError::Endpoint(String::new()),
            CliError::NonConvergence(String::new()),
            CliError::InvalidData(String::new()),
        ];
        let codes: Vec<i32> = errors.iter().map(CliError::exit_code).collect();
        assert_eq!(codes, vec![1, 2, 3, 4, 5, 6]);
    }
}
