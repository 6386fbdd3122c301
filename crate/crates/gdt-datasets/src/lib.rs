mod error;
mod io;
mod ops;
mod record;
mod types;

pub use error::DatasetError;
pub use io::{load, save};
pub use ops::{mix, normalization_stats, subset};
pub use record::{record, ExpertPolicy, RandomPolicy, RolloutPolicy};
pub use types::{Dataset, DatasetManifest, Episode, Normalization, PolicyTag, Transition};
