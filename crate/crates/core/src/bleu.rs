//! Corpus-level BLEU over pluggable token streams. Subword BLEU is obtained
//! by loading externally tokenized files with [`load_token_sidecar`].

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub const MAX_ORDER: usize = 4;
pub const WHITESPACE: &str = "whitespace";

#[derive(Debug, thiserror::Error)]
pub enum BleuError {
    #[error("segment count mismatch: {left} vs {right}")]
    SegmentMismatch { left: usize, right: usize },
    #[error("corpus has no segments")]
    Empty,
    #[error("max n-gram order must be positive")]
    ZeroOrder,
    #[error("unknown smoothing {0:?} (expected none or add1)")]
    UnknownSmoothing(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    pub tokenizer_id: String,
    pub segments: Vec<Vec<String>>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

pub fn tokenize_whitespace<S: AsRef<str>>(texts: &[S]) -> TokenStream {
    TokenStream {
        tokenizer_id: WHITESPACE.to_string(),
        segments: texts
            .iter()
            .map(|t| t.as_ref().split_whitespace().map(str::to_string).collect())
            .collect(),
    }
}

/// Reads one pre-tokenized segment per line. Tokens are opaque; only
/// whitespace separates them. When `expected` is given the line count must
/// match it.
pub fn load_token_sidecar(path: &Path, expected: Option<usize>) -> Result<TokenStream, BleuError> {
    let text = fs::read_to_string(path).map_err(|source| BleuError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let lines: Vec<&str> = text.lines().collect();
    if let Some(n) = expected {
        if n != lines.len() {
            return Err(BleuError::SegmentMismatch {
                left: lines.len(),
                right: n,
            });
        }
    }
    let name = path
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok(TokenStream {
        tokenizer_id: format!("external:{name}"),
        ..tokenize_whitespace(&lines)
    })
}

/// Reads a plain text file, one segment per line, and splits on whitespace.
pub fn load_text(path: &Path) -> Result<TokenStream, BleuError> {
    let text = fs::read_to_string(path).map_err(|source| BleuError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(tokenize_whitespace(&text.lines().collect::<Vec<_>>()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// For orders n >= 2 whose matched count is zero, use 1/(total+1).
    #[default]
    Add1ForNGe2,
}

impl FromStr for Smoothing {
    type Err = BleuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "add1" | "add1_for_n_ge_2" => Ok(Self::Add1ForNGe2),
            other => Err(BleuError::UnknownSmoothing(other.to_string())),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Add1ForNGe2 => "add1_for_n_ge_2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: Vec<f64>,
    #[serde(rename = "bp")]
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

#[derive(Clone, Debug)]
struct Stats {
    matches: Vec<u64>,
    totals: Vec<u64>,
    hyp_len: usize,
    ref_len: usize,
}

impl Stats {
    fn zero(max_n: usize) -> Self {
        Self {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for n in 0..self.matches.len() {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

fn segment_stats(hyp: &[String], reference: &[String], max_n: usize) -> Stats {
    let mut s = Stats::zero(max_n);
    s.hyp_len = hyp.len();
    s.ref_len = reference.len();
    for n in 1..=max_n {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        s.totals[n - 1] = h.values().sum();
        s.matches[n - 1] = h
            .iter()
            .map(|(gram, &c)| c.min(r.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    s
}

/// Corpus-level BLEU with clipped n-gram counts and a single reference per
/// segment. Orders for which the hypothesis has no n-grams at all are left
/// out of the geometric mean (their precision is reported as 0).
pub fn bleu(
    hyp: &TokenStream,
    reference: &TokenStream,
    max_n: usize,
    smoothing: Smoothing,
) -> Result<BleuScore, BleuError> {
    if max_n == 0 {
        return Err(BleuError::ZeroOrder);
    }
    if hyp.len() != reference.len() {
        return Err(BleuError::SegmentMismatch {
            left: hyp.len(),
            right: reference.len(),
        });
    }
    if hyp.is_empty() {
        return Err(BleuError::Empty);
    }
    if hyp.tokenizer_id != reference.tokenizer_id {
        log::warn!(
            "hypothesis tokenized with {} but reference with {}",
            hyp.tokenizer_id,
            reference.tokenizer_id
        );
    }
    let stats = hyp
        .segments
        .par_iter()
        .zip(&reference.segments)
        .map(|(h, r)| segment_stats(h, r, max_n))
        .reduce(|| Stats::zero(max_n), Stats::merge);

    let mut precisions = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    let mut zero = false;
    for n in 0..max_n {
        let (m, t) = (stats.matches[n], stats.totals[n]);
        if t == 0 {
            precisions.push(0.0);
            continue;
        }
        let p = if m == 0 && n >= 1 && smoothing == Smoothing::Add1ForNGe2 {
            1.0 / (t + 1) as f64
        } else {
            m as f64 / t as f64
        };
        precisions.push(p);
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        orders += 1;
    }

    let (c, r) = (stats.hyp_len, stats.ref_len);
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let score = if zero || orders == 0 {
        0.0
    } else {
        (brevity_penalty * (log_sum / orders as f64).exp() * 100.0).clamp(0.0, 100.0)
    };
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len: c,
        ref_len: r,
    })
}
