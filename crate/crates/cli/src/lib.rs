//! Reports and parameter sweeps behind the `qfim3d` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{ConfigArgs, Format, Method, RunConfig};
pub use output::{Report, Table};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "QFIM3D_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] qfim3d::Error),
}

impl CliError {
    /// 1 for anything the user can fix by changing the invocation, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        use qfim3d::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Json(_) => 1,
            CliError::Core(
                E::InvalidGrid(_)
                | E::InvalidBeam(_)
                | E::InvalidParams(_)
                | E::WindowTooSmall { .. }
                | E::GridTooCoarse { .. }
                | E::NotGaussian,
            ) => 1,
            CliError::Core(_) => 2,
        }
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
        // a second initialization (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(rayon::current_num_threads())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_usage_from_numerics() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(qfim3d::Error::NotGaussian).exit_code(), 1);
        assert_eq!(
            CliError::Core(qfim3d::Error::RankDeficient { rank: 1 }).exit_code(),
            2
        );
        assert_eq!(
            CliError::Core(qfim3d::Error::Numerical("nan".into())).exit_code(),
            2
        );
    }
}
