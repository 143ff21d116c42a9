use thiserror::Error;

/// Errors surfaced by the library. The CLI maps `Config` to exit code 1 and
/// everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Param(String),

    #[error("no admissible action for task `{task}` in state {state}")]
    Admissibility { task: String, state: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("reward hook produced a non-finite value for task `{task}`")]
    Hook { task: String },

    #[error("episode structure error: {0}")]
    EpisodeStructure(String),

    #[error("value iteration did not converge within {max_iters} sweeps (residual {residual:.3e})")]
    NonConvergence { max_iters: u32, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("runtime error: {0}")]
    Runtime(String),
}

impl Error {
    /// CLI exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Param(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
