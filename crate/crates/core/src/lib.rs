//! Weather-driven dome actuation.
//!
//! The crate turns hourly weather records into binary dome-state labels,
//! trains two classifiers on them (a best-first CART tree and a brute-force
//! k-nearest-neighbours model), evaluates them, and drives a dome controller
//! that turns predictions plus live sensor input into actuator signals.

pub mod controller;
pub mod dtree;
pub mod error;
pub mod eval;
pub mod knn;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod weather_data;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Number of model input features.
pub const FEATURE_COUNT: usize = 6;

/// Feature names in their fixed column order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "temp",
    "wind",
    "humidity",
    "hour",
    "visibility",
    "barometer",
];

pub type Features = [f64; FEATURE_COUNT];

/// Binary dome state. `Open` is the positive class everywhere in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum DomeState {
    Close = 0,
    Open = 1,
}

impl DomeState {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_bool(open: bool) -> Self {
        if open {
            DomeState::Open
        } else {
            DomeState::Close
        }
    }

    pub fn is_open(self) -> bool {
        self == DomeState::Open
    }

    pub fn flipped(self) -> Self {
        match self {
            DomeState::Close => DomeState::Open,
            DomeState::Open => DomeState::Close,
        }
    }
}

impl From<DomeState> for u8 {
    fn from(s: DomeState) -> u8 {
        s.as_u8()
    }
}

impl TryFrom<u8> for DomeState {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(DomeState::Close),
            1 => Ok(DomeState::Open),
            other => Err(format!("dome state must be 0 or 1, got {other}")),
        }
    }
}

/// Checks a borrowed feature slice and copies it into a fixed array.
pub fn features_from_slice(values: &[f64]) -> Result<Features> {
    values.try_into().map_err(|_| Error::Arity {
        expected: FEATURE_COUNT,
        got: values.len(),
    })
}
