use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// One or more invalid configuration values; every problem is listed.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("trace gap: user {user} has no position at timestep {timestep}")]
    TraceGap { user: u32, timestep: u32 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("incomplete pairing: {0}")]
    Pairing(String),

    /// Outputs from an earlier invocation would be replaced.
    #[error("refusing to replace existing outputs (pass --overwrite): {}", display_paths(.0))]
    OutputExists(Vec<PathBuf>),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

fn display_paths(paths: &[PathBuf]) -> String {
    let mut shown: Vec<String> = paths.iter().take(5).map(|p| p.display().to_string()).collect();
    if paths.len() > 5 {
        shown.push(format!("and {} more", paths.len() - 5));
    }
    shown.join(", ")
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the user's input rather than by the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
