use serde::{Deserialize, Serialize};

use crate::rng::{shuffle, SplitMix64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            test_fraction,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.test_fraction > 0.0 && self.test_fraction < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidFraction(self.test_fraction))
        }
    }

    /// `round(n * test_fraction)`, halves rounded away from zero.
    pub fn test_len(&self, n: usize) -> usize {
        (n as f64 * self.test_fraction).round() as usize
    }
}

/// Seeded Fisher-Yates permutation of `0..n`, cut into (train, test) index lists.
/// The first `test_len` shuffled positions form the test set.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    spec.validate()?;
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut SplitMix64::new(spec.seed));
    let train = order.split_off(spec.test_len(n));
    Ok((train, order))
}

pub fn split<T: Clone>(samples: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(samples.len(), spec)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&train), pick(&test)))
}
