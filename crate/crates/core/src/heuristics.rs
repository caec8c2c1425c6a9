//! Rule-based bitext filters: length bounds, word-count ratio, overlong
//! words, punctuation/digit density and exact deduplication.
//!
//! Bounds are inclusive on the accept side: 15 and 500 characters pass, a
//! ratio of exactly 2.0 passes and a 20-character word passes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::SentencePair;
use crate::report::{apply_filter, Decision, FilterReport, Rejection};

pub const STAGE_DEDUP: &str = "dedup";
pub const STAGE_LENGTH: &str = "length";
pub const STAGE_RATIO: &str = "length_ratio";
pub const STAGE_WORD_LENGTH: &str = "word_length";
pub const STAGE_PUNCT_DIGIT: &str = "punct_digit";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub min_chars: usize,
    pub max_chars: usize,
    pub max_length_ratio: f64,
    pub max_word_len: usize,
    pub punct_digit_threshold: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            min_chars: 15,
            max_chars: 500,
            max_length_ratio: 2.0,
            max_word_len: 20,
            punct_digit_threshold: 0.20,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_chars >= self.max_chars {
            return Err(format!(
                "min_chars ({}) must be below max_chars ({})",
                self.min_chars, self.max_chars
            ));
        }
        if self.max_length_ratio.is_nan() || self.max_length_ratio < 1.0 {
            return Err(format!("max_length_ratio must be >= 1, got {}", self.max_length_ratio));
        }
        if !(self.punct_digit_threshold > 0.0 && self.punct_digit_threshold <= 1.0) {
            return Err(format!(
                "punct_digit_threshold must lie in (0, 1], got {}",
                self.punct_digit_threshold
            ));
        }
        if self.max_word_len == 0 {
            return Err("max_word_len must be positive".to_string());
        }
        Ok(())
    }
}

pub fn check_length(text: &str, cfg: &HeuristicConfig) -> Decision {
    let n = text.chars().count();
    if n < cfg.min_chars {
        Decision::Reject("too_short")
    } else if n > cfg.max_chars {
        Decision::Reject("too_long")
    } else {
        Decision::Accept
    }
}

pub fn check_word_length(text: &str, cfg: &HeuristicConfig) -> Decision {
    if text.split_whitespace().any(|w| w.chars().count() > cfg.max_word_len) {
        Decision::Reject("long_word")
    } else {
        Decision::Accept
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Punctuation (P*) and decimal-digit (Nd) shares of the non-whitespace
/// characters of `text`.
pub fn punct_digit_ratios(text: &str) -> (f64, f64) {
    let mut total = 0usize;
    let mut punct = 0usize;
    let mut digits = 0usize;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_punctuation(c) {
            punct += 1;
        } else if get_general_category(c) == GeneralCategory::DecimalNumber {
            digits += 1;
        }
    }
    if total == 0 {
        return (0.0, 0.0);
    }
    (punct as f64 / total as f64, digits as f64 / total as f64)
}

pub fn check_punct_digit(text: &str, cfg: &HeuristicConfig) -> Decision {
    let (p, d) = punct_digit_ratios(text);
    if p > cfg.punct_digit_threshold {
        Decision::Reject("punct")
    } else if d > cfg.punct_digit_threshold {
        Decision::Reject("digits")
    } else {
        Decision::Accept
    }
}

fn both_sides(pair: &SentencePair, cfg: &HeuristicConfig, check: fn(&str, &HeuristicConfig) -> Decision) -> Decision {
    match check(&pair.src.text, cfg) {
        Decision::Accept => check(&pair.tgt.text, cfg),
        reject => reject,
    }
}

pub fn length_filter(pair: &SentencePair, cfg: &HeuristicConfig) -> Decision {
    both_sides(pair, cfg, check_length)
}

pub fn length_ratio_filter(pair: &SentencePair, cfg: &HeuristicConfig) -> Decision {
    let ws = pair.src.text.split_whitespace().count();
    let wt = pair.tgt.text.split_whitespace().count();
    if ws == 0 || wt == 0 {
        return Decision::Reject("empty_side");
    }
    let ratio = ws.max(wt) as f64 / ws.min(wt) as f64;
    if ratio > cfg.max_length_ratio {
        Decision::Reject("length_ratio")
    } else {
        Decision::Accept
    }
}

pub fn word_length_filter(pair: &SentencePair, cfg: &HeuristicConfig) -> Decision {
    both_sides(pair, cfg, check_word_length)
}

pub fn punct_digit_filter(pair: &SentencePair, cfg: &HeuristicConfig) -> Decision {
    both_sides(pair, cfg, check_punct_digit)
}

/// NFC-normalized text with whitespace runs collapsed and ends trimmed.
pub fn normalize_key(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn dedup(pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    let mut report = FilterReport::new();
    dedup_with_report(pairs, &mut report)
}

/// Keeps the first occurrence of each normalized (src, tgt) key.
pub fn dedup_with_report(pairs: Vec<SentencePair>, report: &mut FilterReport) -> Vec<SentencePair> {
    let input = pairs.len();
    let mut seen = HashSet::with_capacity(input);
    let mut kept = Vec::with_capacity(input);
    let mut rejections = Vec::new();
    for pair in pairs {
        let key = (normalize_key(&pair.src.text), normalize_key(&pair.tgt.text));
        if seen.insert(key) {
            kept.push(pair);
        } else {
            rejections.push(Rejection {
                pair_id: pair.id,
                stage: STAGE_DEDUP.to_string(),
                reason: "duplicate".to_string(),
            });
        }
    }
    report.push_stage(STAGE_DEDUP, input, rejections);
    kept
}

/// Dedup, then length, ratio, word-length and punctuation/digit filters in
/// that order.
pub fn run_heuristics(pairs: Vec<SentencePair>, cfg: &HeuristicConfig) -> (Vec<SentencePair>, FilterReport) {
    let mut report = FilterReport::new();
    let pairs = dedup_with_report(pairs, &mut report);
    let pairs = apply_filter(pairs, STAGE_LENGTH, &mut report, |p| length_filter(p, cfg));
    let pairs = apply_filter(pairs, STAGE_RATIO, &mut report, |p| length_ratio_filter(p, cfg));
    let pairs = apply_filter(pairs, STAGE_WORD_LENGTH, &mut report, |p| word_length_filter(p, cfg));
    let pairs = apply_filter(pairs, STAGE_PUNCT_DIGIT, &mut report, |p| punct_digit_filter(p, cfg));
    (pairs, report)
}
