use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, SentencePair};

pub const MIN_SPLIT_SIZE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

/// Disjoint train/validation/test partition of pair ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train: BTreeSet<u64>,
    pub validation: BTreeSet<u64>,
    pub test: BTreeSet<u64>,
}

impl SplitAssignment {
    pub fn which(&self, id: u64) -> Option<SplitName> {
        if self.train.contains(&id) {
            Some(SplitName::Train)
        } else if self.validation.contains(&id) {
            Some(SplitName::Validation)
        } else if self.test.contains(&id) {
            Some(SplitName::Test)
        } else {
            None
        }
    }

    pub fn get(&self, name: SplitName) -> &BTreeSet<u64> {
        match name {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// 90/5/5 split: validation and test get `floor(n * 0.05)` ids each, train
/// takes the remainder. Ids are shuffled with a ChaCha8 stream seeded by
/// `seed`.
pub fn split_dataset(pairs: &[SentencePair], seed: u64) -> Result<SplitAssignment, CorpusError> {
    let mut ids: Vec<u64> = pairs.iter().map(|p| p.id).collect();
    if ids.len() < MIN_SPLIT_SIZE {
        return Err(CorpusError::Split(format!(
            "need at least {MIN_SPLIT_SIZE} pairs to populate every split, got {}",
            ids.len()
        )));
    }
    let unique: BTreeSet<u64> = ids.iter().copied().collect();
    if unique.len() != ids.len() {
        return Err(CorpusError::Split("pair ids are not unique".to_string()));
    }
    let n = ids.len();
    let held_out = n / 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    Ok(SplitAssignment {
        seed,
        validation: ids[..held_out].iter().copied().collect(),
        test: ids[held_out..2 * held_out].iter().copied().collect(),
        train: ids[2 * held_out..].iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LanguageRegistry;

    pub(crate) fn pairs(n: usize) -> Vec<SentencePair> {
        let reg = LanguageRegistry::default();
        (0..n)
            .map(|i| {
                SentencePair::new(
                    i as u64,
                    format!("s{i}"),
                    reg.get("ban").unwrap().clone(),
                    format!("t{i}"),
                    reg.get("en").unwrap().clone(),
                    "fixture",
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn thousand_pairs_split_exactly() {
        let s = split_dataset(&pairs(1000), 42).unwrap();
        assert_eq!(s.sizes(), (900, 50, 50));
    }

    #[test]
    fn remainder_goes_to_train() {
        // floor(1001 / 20) = 50 held out per split, 1001 - 100 = 901 train.
        let s = split_dataset(&pairs(1001), 42).unwrap();
        assert_eq!(s.sizes(), (901, 50, 50));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = pairs(300);
        assert_eq!(split_dataset(&p, 7).unwrap(), split_dataset(&p, 7).unwrap());
        assert_ne!(split_dataset(&p, 7).unwrap(), split_dataset(&p, 8).unwrap());
    }

    #[test]
    fn too_small_corpus_is_refused() {
        assert!(split_dataset(&pairs(19), 1).is_err());
        assert_eq!(split_dataset(&pairs(20), 1).unwrap().sizes(), (18, 1, 1));
    }
}
