use std::path::{Path, PathBuf};

/// Failures of the file-backed pipeline, each with a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// An upstream artifact exists but cannot be decoded.
    #[error("{}:{line}:{column}: {message}{}", path.display(), context.as_deref().map(|c| format!("\n    | {c}")).unwrap_or_default())]
    Parse { path: PathBuf, line: usize, column: usize, message: String, context: Option<String> },
    /// Well-formed JSON that does not describe the expected artifact.
    #[error("{}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("missing {what} at {} (run `{step}` first)", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf, step: &'static str },
    #[error("{0}")]
    Core(#[from] scbg_core::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// 0 success, 1 I/O, 2 missing or unreadable upstream artifact, 3 training
    /// divergence, 4 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Parse { .. } | Error::Corrupt { .. } | Error::MissingArtifact { .. } => 2,
            Error::Core(scbg_core::Error::Training(_)) => 3,
            Error::Core(_) | Error::Invalid(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    /// Parse error with the offending line of `text` attached.
    pub fn json(path: &Path, text: &str, err: &serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        let context = text.lines().nth(line.saturating_sub(1)).map(|l| {
            let start = column.saturating_sub(40);
            let snippet: String = l.chars().skip(start).take(80).collect();
            if start > 0 {
                format!("...{snippet}")
            } else {
                snippet
            }
        });
        let full = err.to_string();
        let suffix = format!(" at line {line} column {column}");
        let message = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
        Error::Parse { path: path.to_path_buf(), line, column, message, context }
    }
}
