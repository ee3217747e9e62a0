use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Train/validation/test ratios and the seed of the row permutation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    /// 80 / 15 / 5.
    fn default() -> Self {
        SplitSpec {
            train: 0.80,
            validation: 0.15,
            test: 0.05,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<()> {
        let ratios = [self.train, self.validation, self.test];
        if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Split(format!(
                "ratios must be non-negative, got {ratios:?}"
            )));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// `(train, validation, test)` sizes for `n` rows: validation and test get `floor(n·r)`,
    /// training gets the rest.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.check()?;
        // guard against 0.15 * 24540 landing at 3680.9999…
        let take = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let validation = take(self.validation);
        let test = take(self.test).min(n - validation);
        Ok((n - validation - test, validation, test))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random partition of `0..n`.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let (train, validation, _) = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(train + validation);
    let validation = order.split_off(train);
    Ok(SplitIndices {
        train: order,
        validation,
        test,
    })
}
