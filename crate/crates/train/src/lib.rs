//! REINFORCE training with a greedy self-critical baseline, and active
//! search on fixed target instances.

mod active;
mod config;
mod error;
mod loss;
mod trainer;

pub use active::{active_search, active_search_from_checkpoint, ActiveSearchConfig, ActiveSearchResult};
pub use config::TrainConfig;
pub use error::{Result, TrainError};
pub use loss::{reinforce_loss, scst_baseline};
pub use trainer::{read_log, train, LogRow, TrainOptions, TrainOutcome, BEST_CHECKPOINT, LAST_CHECKPOINT, LOG_FILE};
