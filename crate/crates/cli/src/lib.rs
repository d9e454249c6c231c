//! Driver layer for `cebu-core`: result files, parameter sweeps and the
//! acceptance suite behind the `cebu` binary.

pub mod output;
pub mod sweep;
pub mod verify;
