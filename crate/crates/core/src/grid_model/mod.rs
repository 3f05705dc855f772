//! Physical dispatch problem: network, devices, horizon and renewable uncertainty.

mod case;
mod dispatch;
mod scenario;

pub use case::*;
pub use dispatch::*;
pub use scenario::*;

/// Path of a case shipped in the repository's `cases/` directory.
pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases").join(name)
}
