//! Backtranslation: authentic target-language sentences are translated
//! into the source language, re-filtered and re-cleaned, and kept only in
//! the generated-to-authentic direction.

mod translator;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cleaner::{clean_corpus, ChatBackend, CleanerConfig, FewShot, ResponseCache};
use crate::corpus::{LanguageTag, Sentence, SentencePair, Status};
use crate::heuristics::{
    check_length, check_punct_digit, check_word_length, normalize_key, run_heuristics, HeuristicConfig, STAGE_DEDUP,
    STAGE_LENGTH, STAGE_PUNCT_DIGIT, STAGE_WORD_LENGTH,
};
use crate::lid::{lid_gate, lid_gate_sentences, LidBackend, LidError, STAGE_LID};
use crate::margin::{filter_by_margin, EmbeddingTable, MarginError};
use crate::report::{Decision, FilterReport, Rejection};

pub use translator::{HttpTranslator, ReplayTranslator, TranslatorBackend, TRANSLATOR_API_URL};

#[derive(Debug, thiserror::Error)]
pub enum BacktranslationError {
    #[error("monolingual sentences mix languages {0:?} and {1:?}")]
    MixedLanguages(String, String),
    #[error("monolingual language {0:?} equals the requested source language")]
    SameLanguage(String),
    #[error(transparent)]
    Lid(#[from] LidError),
    #[error(transparent)]
    Margin(#[from] MarginError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktranslateConfig {
    pub chunk_size: usize,
    pub concurrency: usize,
}

impl Default for BacktranslateConfig {
    fn default() -> Self {
        Self {
            chunk_size: 32,
            concurrency: 2,
        }
    }
}

fn single_side_filter(
    sentences: Vec<Sentence>,
    stage: &str,
    report: &mut FilterReport,
    mut check: impl FnMut(&str) -> Decision,
) -> Vec<Sentence> {
    let input = sentences.len();
    let mut kept = Vec::with_capacity(input);
    let mut rejections = Vec::new();
    for s in sentences {
        match check(&s.text) {
            Decision::Accept => kept.push(s),
            Decision::Reject(reason) => rejections.push(Rejection {
                pair_id: s.id,
                stage: stage.to_string(),
                reason: reason.to_string(),
            }),
        }
    }
    report.push_stage(stage, input, rejections);
    kept
}

/// Single-side versions of the bitext filters followed by the LID gate
/// when a backend is given. Report entries carry sentence ids.
pub fn select_monolingual(
    sentences: Vec<Sentence>,
    cfg: &HeuristicConfig,
    lid: Option<(&dyn LidBackend, f64)>,
) -> Result<(Vec<Sentence>, FilterReport), LidError> {
    let mut report = FilterReport::new();
    let mut seen = HashSet::new();
    let sentences = single_side_filter(sentences, STAGE_DEDUP, &mut report, |t| {
        if seen.insert(normalize_key(t)) {
            Decision::Accept
        } else {
            Decision::Reject("duplicate")
        }
    });
    let sentences = single_side_filter(sentences, STAGE_LENGTH, &mut report, |t| check_length(t, cfg));
    let sentences = single_side_filter(sentences, STAGE_WORD_LENGTH, &mut report, |t| check_word_length(t, cfg));
    let sentences = single_side_filter(sentences, STAGE_PUNCT_DIGIT, &mut report, |t| check_punct_digit(t, cfg));
    let Some((lid, threshold)) = lid else {
        return Ok((sentences, report));
    };
    let input = sentences.len();
    let (sentences, rejected) = lid_gate_sentences(sentences, lid, threshold)?;
    report.push_stage(STAGE_LID, input, rejected);
    Ok((sentences, report))
}

/// Uniform random subset of `n` sentences in original order.
pub fn sample_monolingual(sentences: Vec<Sentence>, n: usize, seed: u64) -> Vec<Sentence> {
    if n >= sentences.len() {
        return sentences;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, sentences.len(), n).into_vec();
    picked.sort_unstable();
    let mut picked = picked.into_iter().peekable();
    sentences
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            if picked.peek() == Some(&i) {
                picked.next();
                Some(s)
            } else {
                None
            }
        })
        .collect()
}

/// Builds synthetic pairs: the source side is the translation of each
/// monolingual sentence into `src_lang`, the target side the sentence
/// itself, verbatim. Pair ids are the monolingual sentence ids. Chunks the
/// translator fails on are skipped and counted.
pub fn backtranslate(
    mono: &[Sentence],
    translator: &dyn TranslatorBackend,
    src_lang: &LanguageTag,
    cfg: &BacktranslateConfig,
) -> Result<(Vec<SentencePair>, FilterReport), BacktranslationError> {
    let mut report = FilterReport::new();
    let Some(first) = mono.first() else {
        return Ok((Vec::new(), report));
    };
    let tgt_lang = first.lang.clone();
    if let Some(other) = mono.iter().find(|s| s.lang != tgt_lang) {
        return Err(BacktranslationError::MixedLanguages(
            tgt_lang.code().to_string(),
            other.lang.code().to_string(),
        ));
    }
    if tgt_lang.code() == src_lang.code() {
        return Err(BacktranslationError::SameLanguage(tgt_lang.code().to_string()));
    }

    let chunks: Vec<&[Sentence]> = mono.chunks(cfg.chunk_size.max(1)).collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(chunks.len()));
    std::thread::scope(|scope| {
        for _ in 0..cfg.concurrency.max(1).min(chunks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(chunk) = chunks.get(i) else { break };
                let texts: Vec<String> = chunk.iter().map(|s| s.text.clone()).collect();
                let out = translator.translate(&texts, &tgt_lang, src_lang).and_then(|t| {
                    if t.len() == texts.len() {
                        Ok(t)
                    } else {
                        Err(crate::transport::BackendError::Protocol(format!(
                            "sent {} texts, received {} translations",
                            texts.len(),
                            t.len()
                        )))
                    }
                });
                results.lock().unwrap().push((i, out));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);

    let status = Status::Synthetic {
        from: tgt_lang.code().to_string(),
        to: src_lang.code().to_string(),
    };
    let mut pairs = Vec::with_capacity(mono.len());
    let (mut skipped, mut empty) = (0u64, 0u64);
    for (i, outcome) in results {
        let chunk = chunks[i];
        match outcome {
            Ok(translations) => {
                for (sentence, generated) in chunk.iter().zip(translations) {
                    if generated.trim().is_empty() {
                        empty += 1;
                        continue;
                    }
                    let mut pair = SentencePair::new(
                        sentence.id,
                        generated,
                        src_lang.clone(),
                        sentence.text.clone(),
                        tgt_lang.clone(),
                        sentence.origin.clone(),
                    )
                    .expect("languages checked above");
                    pair.status = status.clone();
                    pairs.push(pair);
                }
            }
            Err(e) => {
                skipped += chunk.len() as u64;
                report.errors.push(format!(
                    "chunk {i} (sentences {}..={}): {e}",
                    chunk[0].id,
                    chunk[chunk.len() - 1].id
                ));
            }
        }
    }
    report.bump("translated", pairs.len() as u64);
    report.bump("skipped", skipped);
    report.bump("empty_translation", empty);
    Ok((pairs, report))
}

pub struct MarginStage<'a> {
    pub src_table: &'a EmbeddingTable,
    pub tgt_table: &'a EmbeddingTable,
    pub threshold: f64,
    pub k: usize,
}

pub struct CleanerStage<'a> {
    pub backend: &'a dyn ChatBackend,
    pub cache: &'a ResponseCache,
    pub few_shots: &'a [FewShot],
    pub cfg: &'a CleanerConfig,
}

/// The filtering stages re-applied to synthetic pairs. Margin filtering
/// only runs when embeddings for the generated side are supplied.
pub struct SyntheticPipeline<'a> {
    pub heuristics: Option<&'a HeuristicConfig>,
    pub lid: Option<(&'a dyn LidBackend, f64)>,
    pub margin: Option<MarginStage<'a>>,
    pub cleaner: Option<CleanerStage<'a>>,
}

pub fn build_synthetic_corpus(
    pairs: Vec<SentencePair>,
    pipeline: &SyntheticPipeline<'_>,
) -> Result<(Vec<SentencePair>, FilterReport), BacktranslationError> {
    let mut report = FilterReport::new();
    let mut pairs = pairs;
    if let Some(cfg) = pipeline.heuristics {
        let (kept, r) = run_heuristics(pairs, cfg);
        report.extend(r);
        pairs = kept;
    }
    if let Some((backend, threshold)) = pipeline.lid {
        let (kept, r) = lid_gate(pairs, backend, threshold)?;
        report.extend(r);
        pairs = kept;
    }
    if let Some(m) = &pipeline.margin {
        let (kept, r) = filter_by_margin(pairs, m.src_table, m.tgt_table, m.threshold, m.k)?;
        report.extend(r);
        pairs = kept;
    }
    if let Some(c) = &pipeline.cleaner {
        let (kept, r) = clean_corpus(pairs, c.backend, c.cache, c.few_shots, c.cfg);
        report.extend(r);
        pairs = kept;
    }
    Ok((pairs, report))
}
