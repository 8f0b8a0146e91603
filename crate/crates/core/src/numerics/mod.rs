//! Dense kernels shared by every other module: small vectors, an SPD
//! inverse kept current under rank-one updates, quantiles, stable
//! softmax/sigmoid, and the seeded random-stream contract.

mod linalg;
mod rng;
mod scalar;

pub use linalg::{sherman_morrison_update, SpdMatrix, Vector};
pub use rng::RngStream;
pub use scalar::{log_sigmoid, log_softmax, mean, quantile, sigmoid, softmax, zscore};

/// Numerical tolerances used by invariant checks across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative symmetry tolerance for maintained SPD inverses.
    pub symmetry: f64,
    /// Allowed deviation of a probability vector's sum from one.
    pub normalization: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        symmetry: 1e-9,
        normalization: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
