//! Language-identification gate over a pluggable scorer.
//!
//! The gate checks the probability the backend assigns to each side's
//! *declared* language, which is weaker than requiring the top-1 prediction
//! to match: a sentence whose declared language is second at 0.92 still
//! passes a 0.9 gate if the backend is that uncertain.

mod ngram;
mod sidecar;

use rayon::prelude::*;

use crate::corpus::{Sentence, SentencePair};
use crate::report::{Decision, FilterReport, Rejection};

pub use ngram::NgramBackend;
pub use sidecar::SidecarBackend;

pub const STAGE_LID: &str = "lid";
pub const DEFAULT_LID_THRESHOLD: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct LanguageScore {
    pub lang: String,
    pub prob: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LidError {
    #[error("no LID score for sentence {0}")]
    MissingScore(u64),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("{0}")]
    Training(String),
    #[error("LID backend failed for pair {pair_id}: {source}")]
    Pair {
        pair_id: u64,
        #[source]
        source: Box<LidError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Backend(String),
}

/// Scores a sentence; results are sorted by descending probability.
pub trait LidBackend: Send + Sync {
    fn score(&self, sentence: &Sentence) -> Result<Vec<LanguageScore>, LidError>;
}

impl<T: LidBackend + ?Sized> LidBackend for &T {
    fn score(&self, sentence: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        (**self).score(sentence)
    }
}

impl<T: LidBackend + ?Sized> LidBackend for Box<T> {
    fn score(&self, sentence: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        (**self).score(sentence)
    }
}

/// Probability of the sentence's declared language, 0 when absent.
pub fn declared_prob(backend: &dyn LidBackend, sentence: &Sentence) -> Result<f64, LidError> {
    let scores = backend.score(sentence)?;
    Ok(scores
        .iter()
        .find(|s| s.lang == sentence.lang.code())
        .map_or(0.0, |s| s.prob))
}

fn gate(src_prob: f64, tgt_prob: f64, threshold: f64) -> Decision {
    if src_prob < threshold {
        Decision::Reject("lid_src")
    } else if tgt_prob < threshold {
        Decision::Reject("lid_tgt")
    } else {
        Decision::Accept
    }
}

/// Scores both sides, records `lid_src`/`lid_tgt` and gates at `threshold`
/// (inclusive).
pub fn lid_filter(pair: &mut SentencePair, backend: &dyn LidBackend, threshold: f64) -> Result<Decision, LidError> {
    let wrap = |e| LidError::Pair {
        pair_id: pair.id,
        source: Box::new(e),
    };
    let src = declared_prob(backend, &pair.src).map_err(wrap)?;
    let tgt = declared_prob(backend, &pair.tgt).map_err(wrap)?;
    pair.scores.insert("lid_src".to_string(), src);
    pair.scores.insert("lid_tgt".to_string(), tgt);
    Ok(gate(src, tgt, threshold))
}

/// Corpus-level gate. Scoring runs in parallel; output keeps input order.
pub fn lid_gate(
    mut pairs: Vec<SentencePair>,
    backend: &dyn LidBackend,
    threshold: f64,
) -> Result<(Vec<SentencePair>, FilterReport), LidError> {
    let decisions: Vec<Decision> = pairs
        .par_iter_mut()
        .map(|p| lid_filter(p, backend, threshold))
        .collect::<Result<_, _>>()?;
    let input = pairs.len();
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
                stage: STAGE_LID.to_string(),
                reason: reason.to_string(),
            }),
        }
    }
    let mut report = FilterReport::new();
    report.push_stage(STAGE_LID, input, rejections);
    Ok((kept, report))
}

/// Gate for monolingual sentences; rejections carry the sentence id.
pub fn lid_gate_sentences(
    sentences: Vec<Sentence>,
    backend: &dyn LidBackend,
    threshold: f64,
) -> Result<(Vec<Sentence>, Vec<Rejection>), LidError> {
    let probs: Vec<f64> = sentences
        .par_iter()
        .map(|s| declared_prob(backend, s))
        .collect::<Result<_, _>>()?;
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (s, p) in sentences.into_iter().zip(probs) {
        if p >= threshold {
            kept.push(s);
        } else {
            rejected.push(Rejection {
                pair_id: s.id,
                stage: STAGE_LID.to_string(),
                reason: "lid".to_string(),
            });
        }
    }
    Ok((kept, rejected))
}
