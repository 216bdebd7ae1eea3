//! Raw weather ingestion, condition labeling and seeded train/test splitting.

mod conditions;
mod labeling;
mod observation;
mod split;

pub use conditions::{condition_flag, normalize_text, ConditionEntry, ConditionTable};
pub use labeling::{
    derive_state, derive_state_with, read_labeled_csv, to_samples, to_samples_with_gate,
    write_labeled_csv, LabelReport, LabeledSample, TemperatureGate,
};
pub(crate) use observation::parse_with_extra;
pub use observation::{filter_city, parse_dataset, ParseReport, WeatherObservation};
pub use split::{split, split_indices, SplitSpec};
