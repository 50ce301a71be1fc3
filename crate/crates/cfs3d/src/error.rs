//! Crate-wide error type and process exit-code mapping.

use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shape or size mismatch between tensors, label vectors, point arrays.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Rejected configuration (unknown key, out-of-range value, bad variant
    /// combination).
    #[error("invalid config: {0}")]
    Config(String),

    /// Structurally valid input whose content is unusable (labels out of
    /// range, empty scene, missing required column).
    #[error("invalid data: {0}")]
    Data(String),

    /// Text parse failure with file/line context.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Unrecognized or corrupt on-disk format (bad magic, version, truncation).
    #[error("bad format in {path}: {msg}")]
    Format { path: String, msg: String },

    /// Non-finite values or a failed gradient verification at runtime.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn format(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: validation problems exit 2, numeric
    /// failures exit 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_validation_from_numeric() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Data("x".into()).exit_code(), 2);
        assert_eq!(Error::parse("f.txt", 3, "bad").exit_code(), 2);
        assert_eq!(Error::format("f.bin", "bad magic").exit_code(), 2);
        assert_eq!(Error::Numeric("nan loss".into()).exit_code(), 3);
    }

    #[test]
    fn parse_error_mentions_location() {
        let msg = Error::parse("pts.txt", 17, "expected 8 fields").to_string();
        assert!(msg.contains("pts.txt:17"), "{msg}");
    }
}
