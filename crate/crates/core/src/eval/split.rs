use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Share of domains placed in the training side.
pub const TRAIN_FRACTION_NUM: usize = 7;
pub const TRAIN_FRACTION_DEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_domains: BTreeSet<String>,
    pub test_domains: BTreeSet<String>,
}

/// Seeded 70/30 split by domain; the training side gets `floor(0.7 n)`.
pub fn split_by_domain(domains: &[String], seed: u64) -> Result<SplitSpec> {
    if domains.len() < 2 {
        return Err(EvalError::TooFewDomains(domains.len()));
    }
    let mut sorted: Vec<&String> = domains.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(EvalError::DuplicateDomain(w[0].clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let n_train = domains.len() * TRAIN_FRACTION_NUM / TRAIN_FRACTION_DEN;
    Ok(SplitSpec {
        seed,
        train_domains: sorted[..n_train].iter().map(|d| d.to_string()).collect(),
        test_domains: sorted[n_train..].iter().map(|d| d.to_string()).collect(),
    })
}
