//! Library side of the `distillab` command line: configuration, the training
//! drivers, metrics output, verification suites, and grid sweeps. The binary
//! in `main.rs` is a thin argument-parsing shell over these functions, which
//! keeps every behavior reachable from integration tests.

pub mod config;
pub mod metrics;
pub mod runner;
pub mod sweep;
pub mod verify;

use distillab_core::Error;

/// Process exit code for an error: 2 for I/O and parse problems, 1 for
/// validation and state failures.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Io(_) | Error::Json(_) | Error::ParseLine { .. } | Error::ParseField { .. } => 2,
        Error::InvalidArgument(_) | Error::InvalidState(_) | Error::DegenerateTransform(_) => 1,
    }
}
