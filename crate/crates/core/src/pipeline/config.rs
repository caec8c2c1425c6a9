use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backtranslation::BacktranslateConfig;
use crate::cleaner::{CleanerConfig, DEFAULT_MODEL};
use crate::corpus::{CorpusFormat, LanguageRegistry};
use crate::heuristics::HeuristicConfig;
use crate::lid::DEFAULT_LID_THRESHOLD;
use crate::margin::{MineConfig, DEFAULT_K, DEFAULT_MARGIN_THRESHOLD};

/// Filtering and emission stages, in their fixed execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Heuristics,
    Lid,
    Margin,
    Cleaner,
    Backtranslation,
    EmitSft,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Heuristics,
        Stage::Lid,
        Stage::Margin,
        Stage::Cleaner,
        Stage::Backtranslation,
        Stage::EmitSft,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Heuristics => "heuristics",
            Stage::Lid => "lid",
            Stage::Margin => "margin",
            Stage::Cleaner => "cleaner",
            Stage::Backtranslation => "backtranslation",
            Stage::EmitSft => "emit_sft",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Where LID probabilities come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LidSpec {
    /// `sentence_id<TAB>lang<TAB>prob` lines.
    Sidecar(PathBuf),
    /// Training data (`lang<TAB>text`) for the built-in n-gram classifier.
    Ngram(PathBuf),
}

/// Where chat completions or translations come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RemoteSpec {
    Http,
    Replay(PathBuf),
}

impl FromStr for LidSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("sidecar", p)) if !p.is_empty() => Ok(Self::Sidecar(p.into())),
            Some(("ngram", p)) if !p.is_empty() => Ok(Self::Ngram(p.into())),
            _ => Err(format!("LID backend {s:?} is not sidecar:<path> or ngram:<path>")),
        }
    }
}

impl FromStr for RemoteSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "http" => Ok(Self::Http),
            Some(("replay", p)) if !p.is_empty() => Ok(Self::Replay(p.into())),
            _ => Err(format!("backend {s:?} is not http or replay:<path>")),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

/// Rewrites the path part of `kind:path` specs relative to `base`.
fn resolve_spec(base: &Path, spec: &mut String) {
    if let Some((kind, p)) = spec.split_once(':') {
        let mut path = PathBuf::from(p);
        if !p.is_empty() && path.is_relative() {
            resolve(base, &mut path);
            *spec = format!("{kind}:{}", path.display());
        }
    }
}

/// Splits a section into the keys named in `head` and the rest, then
/// deserializes each part; the parameter struct rejects unknown keys.
fn split_section<H, P>(table: toml::Table, head: &[&str]) -> Result<(H, P), String>
where
    H: serde::de::DeserializeOwned,
    P: serde::de::DeserializeOwned,
{
    let (h, p): (toml::Table, toml::Table) = table.into_iter().partition(|(k, _)| head.contains(&k.as_str()));
    let h = toml::Value::Table(h)
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string())?;
    let p = toml::Value::Table(p)
        .try_into()
        .map_err(|e: toml::de::Error| e.to_string())?;
    Ok((h, p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub corpus: PathBuf,
    /// `jsonl` or `tsv`; guessed from the extension when absent.
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// Comparable-document mining; mined pairs join the input corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct MiningConfig {
    pub src_sentences: PathBuf,
    pub src_embeddings: PathBuf,
    pub tgt_sentences: PathBuf,
    pub tgt_embeddings: PathBuf,
    /// Language of plain-text sentence files.
    #[serde(default)]
    pub src_lang: Option<String>,
    #[serde(default)]
    pub tgt_lang: Option<String>,
    #[serde(flatten)]
    pub params: MineConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MiningHead {
    src_sentences: PathBuf,
    src_embeddings: PathBuf,
    tgt_sentences: PathBuf,
    tgt_embeddings: PathBuf,
    #[serde(default)]
    src_lang: Option<String>,
    #[serde(default)]
    tgt_lang: Option<String>,
}

impl TryFrom<toml::Table> for MiningConfig {
    type Error = String;

    fn try_from(t: toml::Table) -> Result<Self, String> {
        let head = [
            "src_sentences",
            "src_embeddings",
            "tgt_sentences",
            "tgt_embeddings",
            "src_lang",
            "tgt_lang",
        ];
        let (h, params): (MiningHead, MineConfig) = split_section(t, &head)?;
        Ok(Self {
            src_sentences: h.src_sentences,
            src_embeddings: h.src_embeddings,
            tgt_sentences: h.tgt_sentences,
            tgt_embeddings: h.tgt_embeddings,
            src_lang: h.src_lang,
            tgt_lang: h.tgt_lang,
            params,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidConfig {
    pub backend: String,
    #[serde(default = "default_lid_threshold")]
    pub threshold: f64,
}

fn default_lid_threshold() -> f64 {
    DEFAULT_LID_THRESHOLD
}

/// Embedding tables whose row `i` embeds side of pair `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginConfig {
    pub src_embeddings: PathBuf,
    pub tgt_embeddings: PathBuf,
    #[serde(default = "default_margin_threshold")]
    pub threshold: f64,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_margin_threshold() -> f64 {
    DEFAULT_MARGIN_THRESHOLD
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct CleanerSection {
    pub backend: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// Response cache; defaults to `cleaner_cache.jsonl` in the output dir.
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(flatten)]
    pub params: CleanerConfig,
}

fn default_model() -> String {
    DEFAULT_MODEL.to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CleanerHead {
    backend: String,
    #[serde(default = "default_model")]
    model: String,
    #[serde(default)]
    cache: Option<PathBuf>,
}

impl TryFrom<toml::Table> for CleanerSection {
    type Error = String;

    fn try_from(t: toml::Table) -> Result<Self, String> {
        let (h, params): (CleanerHead, CleanerConfig) = split_section(t, &["backend", "model", "cache"])?;
        Ok(Self {
            backend: h.backend,
            model: h.model,
            cache: h.cache,
            params,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct BacktranslationSection {
    /// Monolingual sentences (JSONL or plain text) in `lang`.
    pub monolingual: PathBuf,
    pub lang: String,
    /// Language the synthetic source side is translated into.
    pub src_lang: String,
    pub translator: String,
    /// Number of selected sentences to translate; all when absent.
    #[serde(default)]
    pub sample: Option<usize>,
    /// LID backend for the monolingual and synthetic text. Falls back to
    /// the `[lid]` backend when the lid stage is enabled.
    #[serde(default)]
    pub lid: Option<String>,
    #[serde(flatten)]
    pub params: BacktranslateConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BacktranslationHead {
    monolingual: PathBuf,
    lang: String,
    src_lang: String,
    translator: String,
    #[serde(default)]
    sample: Option<usize>,
    #[serde(default)]
    lid: Option<String>,
}

impl TryFrom<toml::Table> for BacktranslationSection {
    type Error = String;

    fn try_from(t: toml::Table) -> Result<Self, String> {
        let head = ["monolingual", "lang", "src_lang", "translator", "sample", "lid"];
        let (h, params): (BacktranslationHead, BacktranslateConfig) = split_section(t, &head)?;
        Ok(Self {
            monolingual: h.monolingual,
            lang: h.lang,
            src_lang: h.src_lang,
            translator: h.translator,
            sample: h.sample,
            lid: h.lid,
            params,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    pub input: InputConfig,
    pub output: OutputConfig,
    /// Code to display name; the built-in en/id/ban/min map when empty.
    #[serde(default)]
    pub languages: BTreeMap<String, String>,
    #[serde(default)]
    pub mining: Option<MiningConfig>,
    #[serde(default)]
    pub heuristics: HeuristicConfig,
    #[serde(default)]
    pub lid: Option<LidConfig>,
    #[serde(default)]
    pub margin: Option<MarginConfig>,
    #[serde(default)]
    pub cleaner: Option<CleanerSection>,
    #[serde(default)]
    pub backtranslation: Option<BacktranslationSection>,
}

fn default_seed() -> u64 {
    42
}

fn default_stages() -> Vec<Stage> {
    vec![
        Stage::Heuristics,
        Stage::Lid,
        Stage::Margin,
        Stage::Cleaner,
        Stage::EmitSft,
    ]
}

impl PipelineConfig {
    /// Parses a TOML config; relative paths are taken from the config
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.input.corpus);
        resolve(base, &mut self.output.dir);
        if let Some(m) = &mut self.mining {
            for p in [
                &mut m.src_sentences,
                &mut m.src_embeddings,
                &mut m.tgt_sentences,
                &mut m.tgt_embeddings,
            ] {
                resolve(base, p);
            }
        }
        if let Some(l) = &mut self.lid {
            resolve_spec(base, &mut l.backend);
        }
        if let Some(m) = &mut self.margin {
            resolve(base, &mut m.src_embeddings);
            resolve(base, &mut m.tgt_embeddings);
        }
        if let Some(c) = &mut self.cleaner {
            resolve_spec(base, &mut c.backend);
            if let Some(p) = &mut c.cache {
                resolve(base, p);
            }
        }
        if let Some(b) = &mut self.backtranslation {
            resolve(base, &mut b.monolingual);
            resolve_spec(base, &mut b.translator);
            if let Some(l) = &mut b.lid {
                resolve_spec(base, l);
            }
        }
    }

    pub fn enabled(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn registry(&self) -> Result<LanguageRegistry, PipelineError> {
        if self.languages.is_empty() {
            return Ok(LanguageRegistry::default());
        }
        LanguageRegistry::from_pairs(self.languages.clone()).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn input_format(&self) -> Result<CorpusFormat, PipelineError> {
        match &self.input.format {
            Some(f) => f
                .parse::<CorpusFormat>()
                .map_err(|e| PipelineError::Config(e.to_string())),
            None => Ok(CorpusFormat::from_path(&self.input.corpus)),
        }
    }

    pub fn cache_path(&self) -> Option<PathBuf> {
        let c = self.cleaner.as_ref()?;
        Some(
            c.cache
                .clone()
                .unwrap_or_else(|| self.output.dir.join("cleaner_cache.jsonl")),
        )
    }

    /// Checks stage order, parameter ranges, backend specs and that every
    /// referenced file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return err(format!(
                "stages must be listed once each in the order {}",
                Stage::ALL.map(Stage::as_str).join(", ")
            ));
        }
        let registry = self.registry()?;
        self.input_format()?;
        let mut files: Vec<&Path> = vec![&self.input.corpus];
        self.heuristics.validate().map_err(PipelineError::Config)?;

        if let Some(m) = &self.mining {
            if !(-1.0..=1.0).contains(&m.params.sim_threshold) {
                return err(format!(
                    "mining sim_threshold {} is outside [-1, 1]",
                    m.params.sim_threshold
                ));
            }
            for lang in [&m.src_lang, &m.tgt_lang].into_iter().flatten() {
                registry.get(lang).map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            files.extend([
                m.src_sentences.as_path(),
                &m.src_embeddings,
                &m.tgt_sentences,
                &m.tgt_embeddings,
            ]);
        }
        let mut specs: Vec<String> = Vec::new();
        if self.enabled(Stage::Lid) {
            let Some(l) = &self.lid else {
                return err("the lid stage needs a [lid] section".to_string());
            };
            if !(0.0..=1.0).contains(&l.threshold) {
                return err(format!("lid threshold {} is outside [0, 1]", l.threshold));
            }
            specs.push(l.backend.clone());
        }
        if self.enabled(Stage::Margin) {
            let Some(m) = &self.margin else {
                return err("the margin stage needs a [margin] section".to_string());
            };
            if !(m.threshold.is_finite() && m.threshold > 0.0) {
                return err(format!("margin threshold {} must be positive", m.threshold));
            }
            if m.k == 0 {
                return err("margin k must be positive".to_string());
            }
            files.extend([m.src_embeddings.as_path(), &m.tgt_embeddings]);
        }
        let mut remotes: Vec<String> = Vec::new();
        if self.enabled(Stage::Cleaner) {
            let Some(c) = &self.cleaner else {
                return err("the cleaner stage needs a [cleaner] section".to_string());
            };
            c.params.validate().map_err(PipelineError::Config)?;
            remotes.push(c.backend.clone());
        }
        if self.enabled(Stage::Backtranslation) {
            let Some(b) = &self.backtranslation else {
                return err("the backtranslation stage needs a [backtranslation] section".to_string());
            };
            for lang in [&b.lang, &b.src_lang] {
                registry.get(lang).map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            if b.lang == b.src_lang {
                return err("backtranslation lang and src_lang must differ".to_string());
            }
            if b.params.chunk_size == 0 || b.params.concurrency == 0 {
                return err("backtranslation chunk_size and concurrency must be positive".to_string());
            }
            files.push(&b.monolingual);
            remotes.push(b.translator.clone());
            specs.extend(b.lid.clone());
        }
        let mut owned: Vec<PathBuf> = Vec::new();
        for s in &specs {
            match s.parse::<LidSpec>().map_err(PipelineError::Config)? {
                LidSpec::Sidecar(p) | LidSpec::Ngram(p) => owned.push(p),
            }
        }
        for s in &remotes {
            if let RemoteSpec::Replay(p) = s.parse::<RemoteSpec>().map_err(PipelineError::Config)? {
                owned.push(p);
            }
        }
        for path in files.into_iter().chain(owned.iter().map(PathBuf::as_path)) {
            if !path.is_file() {
                return err(format!("{} does not exist", path.display()));
            }
        }
        Ok(())
    }
}
