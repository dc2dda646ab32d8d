//! Command implementations behind the `pushgp` binary.
//!
//! Every command is a plain function over an options struct so the
//! integration suites drive them directly; `main` only parses flags and maps
//! errors to exit codes (0 success, 1 usage, 2 data, 3 numerical).

pub mod artifact;
pub mod commands;
pub mod output;

pub use artifact::{LoadedArtifact, ModelKind};

use pushgp::Error;

/// Process exit code for an error, per the documented convention.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Format(_) | Error::Io(_) => 2,
        Error::Conditioning(_) | Error::Numerical(_) => 3,
    }
}
