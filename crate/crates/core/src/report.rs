use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;

/// Outcome of a single per-pair filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject(&'static str),
}

impl Decision {
    pub fn is_accept(self) -> bool {
        matches!(self, Decision::Accept)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub input: usize,
    pub rejected: usize,
    /// Pairs introduced by the stage (mined or synthetic pairs).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub added: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl StageCount {
    pub fn output(&self) -> usize {
        self.input - self.rejected + self.added
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub pair_id: u64,
    pub stage: String,
    pub reason: String,
}

/// Per-stage accept/reject bookkeeping plus the per-pair rejection list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub stages: Vec<StageCount>,
    pub rejections: Vec<Rejection>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counters: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl FilterReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_stage(&mut self, stage: &str, input: usize, rejections: Vec<Rejection>) {
        self.stages.push(StageCount {
            stage: stage.to_string(),
            input,
            rejected: rejections.len(),
            added: 0,
        });
        self.rejections.extend(rejections);
    }

    pub fn bump(&mut self, counter: &str, by: u64) {
        *self.counters.entry(counter.to_string()).or_insert(0) += by;
    }

    /// Appends another report's stages after this one's.
    pub fn extend(&mut self, other: FilterReport) {
        self.stages.extend(other.stages);
        self.rejections.extend(other.rejections);
        for (k, v) in other.counters {
            *self.counters.entry(k).or_insert(0) += v;
        }
        self.errors.extend(other.errors);
    }

    pub fn stage(&self, name: &str) -> Option<&StageCount> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn rejected_total(&self) -> usize {
        self.stages.iter().map(|s| s.rejected).sum()
    }

    /// Checks that stage k's output is stage k+1's input and that the
    /// rejection list matches the per-stage counts.
    pub fn is_consistent(&self) -> bool {
        let telescopes = self.stages.windows(2).all(|w| w[0].output() == w[1].input);
        let per_stage = self
            .stages
            .iter()
            .all(|s| self.rejections.iter().filter(|r| r.stage == s.stage).count() == s.rejected);
        telescopes && per_stage && self.rejections.len() == self.rejected_total()
    }
}

/// Runs a pure per-pair filter in parallel, preserving input order.
/// Survivors are marked passed; rejects are dropped and logged.
pub fn apply_filter<F>(pairs: Vec<SentencePair>, stage: &str, report: &mut FilterReport, filter: F) -> Vec<SentencePair>
where
    F: Fn(&SentencePair) -> Decision + Sync,
{
    let input = pairs.len();
    let decisions: Vec<Decision> = pairs.par_iter().map(&filter).collect();
    let mut kept = Vec::with_capacity(input);
    let mut rejections = Vec::new();
    for (mut pair, decision) in pairs.into_iter().zip(decisions) {
        match decision {
            Decision::Accept => {
                pair.mark_passed();
                kept.push(pair);
            }
            Decision::Reject(reason) => rejections.push(Rejection {
                pair_id: pair.id,
                stage: stage.to_string(),
                reason: reason.to_string(),
            }),
        }
    }
    report.push_stage(stage, input, rejections);
    kept
}
