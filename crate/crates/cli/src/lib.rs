//! Experiment drivers behind the `gwb` binary: pairwise distances, KNN
//! classification, graph isomorphism testing, timing and barycenters.

pub mod args;
pub mod bench;
mod commands;
pub mod isotest;
pub mod knn;
pub mod manifest;

pub use commands::run;

/// Exit status for a failed run: 2 for invalid input, 3 for a solver that
/// did not converge, 4 for I/O failures.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gw_bounds::Error>() {
            return match e {
                gw_bounds::Error::NonConvergence { .. } => 3,
                gw_bounds::Error::Io { .. } => 4,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}
