//! LLM-based alignment check and cleanup of parallel sentences.
//!
//! Pairs are packed into batches, rendered into the few-shot instruction
//! prompt, sent to a [`ChatBackend`] and the per-pair verdicts parsed back.
//! Misaligned pairs are rejected; aligned pairs take the cleaned texts.
//! Batches whose responses cannot be obtained or parsed after the retry
//! budget are kept and flagged unverified, or rejected in strict mode.

mod backend;
mod cache;
mod parse;
mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::SentencePair;
use crate::report::{FilterReport, Rejection};
use crate::transport::BackendError;

pub use backend::{
    prompt_digest, ChatBackend, HttpChatBackend, ReplayChatBackend, CLEANER_API_KEY, CLEANER_API_URL, DEFAULT_MODEL,
};
pub use cache::{cache_key, ResponseCache};
pub use parse::parse_cleaner_response;
pub use prompt::{
    answer_block, default_few_shots, render_batch, render_cleaner_prompt, render_few_shots, FewShot, CLEANER_TEMPLATE,
    TEMPLATE_VERSION,
};

pub const STAGE_CLEANER: &str = "cleaner";

#[derive(Debug, thiserror::Error)]
pub enum CleanerError {
    #[error("cleaner batch is empty")]
    EmptyBatch,
    #[error("cleaner response: {0}")]
    Parse(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Alignment decision for one pair. Cleaned texts are present exactly when
/// the pair is aligned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanerVerdict {
    pub aligned: bool,
    pub cleaned_src: Option<String>,
    pub cleaned_tgt: Option<String>,
}

impl CleanerVerdict {
    pub fn misaligned() -> Self {
        Self {
            aligned: false,
            cleaned_src: None,
            cleaned_tgt: None,
        }
    }

    pub fn aligned(src: impl Into<String>, tgt: impl Into<String>) -> Self {
        Self {
            aligned: true,
            cleaned_src: Some(src.into()),
            cleaned_tgt: Some(tgt.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanerConfig {
    pub batch_size: usize,
    pub retries: usize,
    pub strict: bool,
    pub concurrency: usize,
    /// Delay before each retry; the last entry repeats.
    pub backoff_ms: Vec<u64>,
}

impl Default for CleanerConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            retries: 2,
            strict: false,
            concurrency: 4,
            backoff_ms: vec![1000, 4000],
        }
    }
}

impl CleanerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("cleaner batch_size must be positive".to_string());
        }
        if self.concurrency == 0 {
            return Err("cleaner concurrency must be positive".to_string());
        }
        Ok(())
    }

    fn backoff(&self, retry: usize) -> Duration {
        let ms = self
            .backoff_ms
            .get(retry)
            .or(self.backoff_ms.last())
            .copied()
            .unwrap_or(0);
        Duration::from_millis(ms)
    }
}

enum BatchOutcome {
    Verdicts(Vec<CleanerVerdict>),
    Failed(String),
}

#[derive(Default)]
struct Tally {
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    parse_failures: AtomicUsize,
    transport_failures: AtomicUsize,
    prompt_chars: AtomicUsize,
}

struct BatchRunner<'a> {
    backend: &'a dyn ChatBackend,
    cache: &'a ResponseCache,
    few_shots: &'a [FewShot],
    cfg: &'a CleanerConfig,
    tally: Tally,
}

impl BatchRunner<'_> {
    fn run(&self, batch: &[SentencePair]) -> BatchOutcome {
        let prompt = match render_cleaner_prompt(batch, self.few_shots) {
            Ok(p) => p,
            Err(e) => return BatchOutcome::Failed(e.to_string()),
        };
        let key = cache_key(&prompt);
        if let Some(cached) = self.cache.get(&key) {
            if let Ok(v) = parse_cleaner_response(&cached, batch) {
                self.tally.cache_hits.fetch_add(1, Ordering::Relaxed);
                return BatchOutcome::Verdicts(v);
            }
        }
        let mut last_error = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                std::thread::sleep(self.cfg.backoff(attempt - 1));
            }
            self.tally.backend_calls.fetch_add(1, Ordering::Relaxed);
            self.tally
                .prompt_chars
                .fetch_add(prompt.chars().count(), Ordering::Relaxed);
            match self.backend.complete(&prompt) {
                Ok(response) => match parse_cleaner_response(&response, batch) {
                    Ok(v) => {
                        if let Err(e) = self.cache.put(&key, &response) {
                            log::warn!("could not persist cleaner response: {e}");
                        }
                        return BatchOutcome::Verdicts(v);
                    }
                    Err(e) => {
                        self.tally.parse_failures.fetch_add(1, Ordering::Relaxed);
                        last_error = e.to_string();
                    }
                },
                Err(e) => {
                    self.tally.transport_failures.fetch_add(1, Ordering::Relaxed);
                    last_error = e.to_string();
                }
            }
        }
        BatchOutcome::Failed(last_error)
    }
}

/// Runs the cleaner over `pairs` with at most `cfg.concurrency` requests in
/// flight. Output order equals input order; rejected pairs are dropped and
/// listed in the report.
pub fn clean_corpus(
    pairs: Vec<SentencePair>,
    backend: &dyn ChatBackend,
    cache: &ResponseCache,
    few_shots: &[FewShot],
    cfg: &CleanerConfig,
) -> (Vec<SentencePair>, FilterReport) {
    let batch_size = cfg.batch_size.max(1);
    let batches: Vec<&[SentencePair]> = pairs.chunks(batch_size).collect();
    let runner = BatchRunner {
        backend,
        cache,
        few_shots,
        cfg,
        tally: Tally::default(),
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, BatchOutcome)>> = Mutex::new(Vec::with_capacity(batches.len()));
    std::thread::scope(|scope| {
        for _ in 0..cfg.concurrency.max(1).min(batches.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(i) else { break };
                let outcome = runner.run(batch);
                results.lock().unwrap().push((i, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();

    let mut report = FilterReport::new();
    let input = pairs.len();
    let mut kept = Vec::with_capacity(input);
    let mut rejections = Vec::new();
    let (mut cleaned, mut unverified) = (0u64, 0u64);
    let mut pairs = pairs.into_iter();
    for (i, outcome) in results {
        let batch: Vec<SentencePair> = pairs.by_ref().take(sizes[i]).collect();
        match outcome {
            BatchOutcome::Verdicts(verdicts) => {
                for (mut pair, verdict) in batch.into_iter().zip(verdicts) {
                    match (verdict.aligned, verdict.cleaned_src, verdict.cleaned_tgt) {
                        (true, Some(src), Some(tgt)) => {
                            pair.mark_cleaned(src, tgt);
                            cleaned += 1;
                            kept.push(pair);
                        }
                        _ => rejections.push(Rejection {
                            pair_id: pair.id,
                            stage: STAGE_CLEANER.to_string(),
                            reason: "cleaner_misaligned".to_string(),
                        }),
                    }
                }
            }
            BatchOutcome::Failed(err) => {
                let first = batch.first().map_or(0, |p| p.id);
                report.errors.push(format!("batch {i} (first pair {first}): {err}"));
                for mut pair in batch {
                    if cfg.strict {
                        rejections.push(Rejection {
                            pair_id: pair.id,
                            stage: STAGE_CLEANER.to_string(),
                            reason: "unverified".to_string(),
                        });
                    } else {
                        pair.mark_unverified();
                        unverified += 1;
                        kept.push(pair);
                    }
                }
            }
        }
    }
    report.push_stage(STAGE_CLEANER, input, rejections);
    let t = &runner.tally;
    report.bump("cleaned", cleaned);
    report.bump("unverified", unverified);
    report.bump("batches", sizes.len() as u64);
    report.bump("backend_calls", t.backend_calls.load(Ordering::Relaxed) as u64);
    report.bump("cache_hits", t.cache_hits.load(Ordering::Relaxed) as u64);
    report.bump("parse_failures", t.parse_failures.load(Ordering::Relaxed) as u64);
    report.bump(
        "transport_failures",
        t.transport_failures.load(Ordering::Relaxed) as u64,
    );
    report.bump("prompt_chars", t.prompt_chars.load(Ordering::Relaxed) as u64);
    (kept, report)
}
