use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{LanguageScore, LidBackend, LidError};
use crate::corpus::Sentence;

pub const MIN_EXAMPLES_PER_LANGUAGE: usize = 50;
const MAX_ORDER: usize = 3;

/// Multinomial naive Bayes over character 1- to 3-grams with add-one
/// smoothing. Immutable once trained.
#[derive(Clone, Debug)]
pub struct NgramBackend {
    langs: Vec<String>,
    log_priors: Vec<f64>,
    counts: Vec<HashMap<String, u64>>,
    totals: Vec<u64>,
    vocab: HashSet<String>,
}

fn features(text: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once(' ')
        .chain(text.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut out = Vec::new();
    for n in 1..=MAX_ORDER {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

impl NgramBackend {
    /// `examples` are `(text, lang)` pairs.
    pub fn train<S: AsRef<str>, L: AsRef<str>>(examples: &[(S, L)]) -> Result<Self, LidError> {
        let mut per_lang: BTreeMap<String, (usize, HashMap<String, u64>)> = BTreeMap::new();
        for (text, lang) in examples {
            let entry = per_lang.entry(lang.as_ref().to_string()).or_default();
            entry.0 += 1;
            for f in features(text.as_ref()) {
                *entry.1.entry(f).or_insert(0) += 1;
            }
        }
        if per_lang.len() < 2 {
            return Err(LidError::Training(format!(
                "need at least 2 languages, got {}",
                per_lang.len()
            )));
        }
        if let Some((lang, (n, _))) = per_lang.iter().find(|(_, (n, _))| *n < MIN_EXAMPLES_PER_LANGUAGE) {
            return Err(LidError::Training(format!(
                "language {lang:?} has {n} examples, need at least {MIN_EXAMPLES_PER_LANGUAGE}"
            )));
        }
        let total_docs: usize = per_lang.values().map(|(n, _)| n).sum();
        let mut model = NgramBackend {
            langs: Vec::new(),
            log_priors: Vec::new(),
            counts: Vec::new(),
            totals: Vec::new(),
            vocab: HashSet::new(),
        };
        for (lang, (n, counts)) in per_lang {
            model.vocab.extend(counts.keys().cloned());
            model.langs.push(lang);
            model.log_priors.push((n as f64 / total_docs as f64).ln());
            model.totals.push(counts.values().sum());
            model.counts.push(counts);
        }
        Ok(model)
    }

    /// Trains from a `lang<TAB>text` file.
    pub fn from_tsv(path: &Path) -> Result<Self, LidError> {
        let file = File::open(path).map_err(|source| LidError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut examples = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LidError::Malformed {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let (lang, text) = line.split_once('\t').ok_or_else(|| LidError::Malformed {
                line: idx + 1,
                msg: "expected lang<TAB>text".to_string(),
            })?;
            examples.push((text.to_string(), lang.to_string()));
        }
        Self::train(&examples)
    }

    pub fn languages(&self) -> &[String] {
        &self.langs
    }

    /// Posterior over the trained languages, descending by probability.
    pub fn distribution(&self, text: &str) -> Vec<LanguageScore> {
        let feats = features(text);
        let v = self.vocab.len() as f64;
        let log_post: Vec<f64> = (0..self.langs.len())
            .map(|i| {
                let denom = (self.totals[i] as f64 + v).ln();
                self.log_priors[i]
                    + feats
                        .iter()
                        .filter(|f| self.vocab.contains(*f))
                        .map(|f| {
                            let c = self.counts[i].get(f).copied().unwrap_or(0) as f64;
                            (c + 1.0).ln() - denom
                        })
                        .sum::<f64>()
            })
            .collect();
        let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut out: Vec<LanguageScore> = self
            .langs
            .iter()
            .zip(weights)
            .map(|(lang, w)| LanguageScore {
                lang: lang.clone(),
                prob: w / z,
            })
            .collect();
        out.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.lang.cmp(&b.lang)));
        out
    }
}

impl LidBackend for NgramBackend {
    fn score(&self, sentence: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        Ok(self.distribution(&sentence.text))
    }
}
