//! Surgical skill assessment with graph attention networks.
//!
//! The pipeline turns per-frame instrument trajectories into one graph per
//! clip (a node per instrument and phase), trains a two-layer graph attention
//! encoder either against a spectral reconstruction objective or a supervised
//! skill classifier, and reports rank correlations, classification metrics and
//! 2D projections of the learned embeddings.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`dataio`] | manifests, clip records and trajectory CSVs |
//! | [`features`] | kinematics and per-unit feature vectors |
//! | [`graph`] | graph construction, normalized Laplacian, Jacobi eigensolver |
//! | [`gnn`] | attention encoder, decoder, losses and exact gradients |
//! | [`train`] | Adam, learning-rate schedule, masking, ADASYN, training loops |
//! | [`eval`] | correlation and classification metrics, Gaussian baseline |
//! | [`explain`] | embedding export, PCA projection, nearest exemplars |
//! | [`synth`] | deterministic synthetic datasets |

pub mod dataio;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod synth;
pub mod train;

pub mod canonical;

pub use error::{Error, Result};

/// Deterministic random number generator used everywhere a seed is accepted.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
