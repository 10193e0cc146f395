//! Linear ordering problem (LOP) primitives.
//!
//! An instance is an `n x n` weight matrix `b`; a solution is a permutation
//! that reorders rows and columns simultaneously. The objective sums the
//! weights `b[order[k]][order[l]]` over all rank pairs `k < l`, to be
//! maximized.
//!
//! Indices and ranks are 0-based throughout the library. File formats and
//! the CLI state their own convention explicitly.

pub mod error;
pub mod features;
pub mod instance;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod rng;
pub mod solvers;
pub mod tournament;

pub use error::{LopError, Result};
pub use features::{edge_features, EdgeFeatures};
pub use instance::{LopInstance, Permutation};
pub use metrics::gap_percent;
pub use objective::{evaluate, evaluate_insert_delta};
pub use rng::{derive_path, derive_seed, Rng};
pub use tournament::{validate_tournament, TournamentReport};
