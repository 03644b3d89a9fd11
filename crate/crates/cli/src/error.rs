use std::path::Path;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ptscrc::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    /// The control problem has no admissible solution; artifacts describing
    /// the failure are still written.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(ptscrc::Error::InvalidArgument(_) | ptscrc::Error::LengthMismatch { .. }) => "invalid_argument",
            CliError::Core(ptscrc::Error::Parse(_)) | CliError::Csv(_) => "parse",
            CliError::Core(ptscrc::Error::Infeasible { .. } | ptscrc::Error::InfeasibleControl(_))
            | CliError::Infeasible(_) => "infeasible",
            CliError::Core(_) => "model",
            CliError::Io { .. } => "io",
        }
    }

    /// 2 for infeasibility, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.kind() == "infeasible" {
            2
        } else {
            1
        }
    }

    /// One-line JSON report for stderr.
    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Report { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasibility_exits_with_two() {
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(ptscrc::Error::InfeasibleControl("y".into())).exit_code(), 2);
        assert_eq!(CliError::Config("z".into()).exit_code(), 1);
    }

    #[test]
    fn report_is_json() {
        let v: serde_json::Value = serde_json::from_str(&CliError::Config("seed: bad".into()).report()).unwrap();
        assert_eq!(v["error"], "config");
        assert_eq!(v["exit_code"], 1);
    }
}
