//! Config-driven orchestration of every stage with checkpoints, a
//! provenance log and grouped before/after statistics.
//!
//! Output directory layout:
//!
//! ```text
//! stages/NN_<step>.jsonl        pairs after each completed step
//! stages/NN_<step>.report.json  that step's filter report
//! checkpoint.json               config fingerprint + completed steps
//! corpus.jsonl                  final survivors
//! provenance.jsonl              one outcome line per pair id
//! report.json, stats.json, stats.txt
//! split.json, sft/{train,validation,test}.jsonl
//! ```

mod config;
mod stats;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtranslation::{
    backtranslate, build_synthetic_corpus, sample_monolingual, select_monolingual, CleanerStage, HttpTranslator,
    ReplayTranslator, SyntheticPipeline, TranslatorBackend,
};
use crate::cleaner::{clean_corpus, default_few_shots, ChatBackend, HttpChatBackend, ReplayChatBackend, ResponseCache};
use crate::corpus::{
    read_corpus, read_sentences, split_dataset, write_corpus, CorpusFormat, LanguageRegistry, SentencePair,
    SplitAssignment,
};
use crate::heuristics::run_heuristics;
use crate::lid::{lid_gate, LidBackend, NgramBackend, SidecarBackend, DEFAULT_LID_THRESHOLD};
use crate::margin::{filter_by_margin, mine_document_rows, pairs_from_rows, EmbeddingTable, MinedRow};
use crate::report::{FilterReport, Rejection, StageCount};
use crate::sft::{emit_sft, expand_directions, EmitSummary};

pub use config::{
    BacktranslationSection, CleanerSection, InputConfig, LidConfig, LidSpec, MarginConfig, MiningConfig, OutputConfig,
    PipelineConfig, RemoteSpec, Stage,
};
pub use stats::{group_counts, stats_report, Boundary, GroupCounts, PipelineStats, StatsError, StatsRow, StatsTable};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 1 for problems found before any stage ran, 2 once a stage failed
    /// (completed steps are checkpointed by then).
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input(_) => 1,
            PipelineError::Stage { .. } | PipelineError::Io { .. } => 2,
        }
    }

    fn stage(stage: &str, e: impl ToString) -> Self {
        PipelineError::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Model-backed components. Tests and embedders inject their own; the CLI
/// builds them from the config with [`Backends::from_config`].
#[derive(Default)]
pub struct Backends {
    pub lid: Option<Box<dyn LidBackend>>,
    /// LID for monolingual and synthetic text; `lid` is used when absent.
    pub backtranslation_lid: Option<Box<dyn LidBackend>>,
    pub chat: Option<Box<dyn ChatBackend>>,
    pub translator: Option<Box<dyn TranslatorBackend>>,
}

pub fn build_lid(spec: &str) -> Result<Box<dyn LidBackend>, PipelineError> {
    let spec: LidSpec = spec.parse().map_err(PipelineError::Config)?;
    let backend: Box<dyn LidBackend> = match spec {
        LidSpec::Sidecar(p) => Box::new(SidecarBackend::load(&p).map_err(|e| PipelineError::Input(e.to_string()))?),
        LidSpec::Ngram(p) => Box::new(NgramBackend::from_tsv(&p).map_err(|e| PipelineError::Input(e.to_string()))?),
    };
    Ok(backend)
}

pub fn build_chat(spec: &str, model: &str) -> Result<Box<dyn ChatBackend>, PipelineError> {
    let backend: Box<dyn ChatBackend> = match spec.parse::<RemoteSpec>().map_err(PipelineError::Config)? {
        RemoteSpec::Http => {
            Box::new(HttpChatBackend::from_env(model).map_err(|e| PipelineError::Config(e.to_string()))?)
        }
        RemoteSpec::Replay(p) => {
            Box::new(ReplayChatBackend::load(&p).map_err(|e| PipelineError::Input(e.to_string()))?)
        }
    };
    Ok(backend)
}

pub fn build_translator(spec: &str) -> Result<Box<dyn TranslatorBackend>, PipelineError> {
    let backend: Box<dyn TranslatorBackend> = match spec.parse::<RemoteSpec>().map_err(PipelineError::Config)? {
        RemoteSpec::Http => Box::new(HttpTranslator::from_env().map_err(|e| PipelineError::Config(e.to_string()))?),
        RemoteSpec::Replay(p) => Box::new(ReplayTranslator::load(&p).map_err(|e| PipelineError::Input(e.to_string()))?),
    };
    Ok(backend)
}

impl Backends {
    /// Builds the backends needed by the enabled stages only.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let mut b = Backends::default();
        if let (true, Some(l)) = (cfg.enabled(Stage::Lid), &cfg.lid) {
            b.lid = Some(build_lid(&l.backend)?);
        }
        if let (true, Some(c)) = (cfg.enabled(Stage::Cleaner), &cfg.cleaner) {
            b.chat = Some(build_chat(&c.backend, &c.model)?);
        }
        if let (true, Some(bt)) = (cfg.enabled(Stage::Backtranslation), &cfg.backtranslation) {
            b.translator = Some(build_translator(&bt.translator)?);
            if let Some(spec) = &bt.lid {
                b.backtranslation_lid = Some(build_lid(spec)?);
            }
        }
        Ok(b)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop (successfully) once this stage is checkpointed.
    pub stop_after: Option<Stage>,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub corpus: Vec<SentencePair>,
    pub report: FilterReport,
    pub stats: PipelineStats,
    /// Steps whose results were taken from an earlier run's checkpoint.
    pub resumed: Vec<String>,
    pub split: Option<SplitAssignment>,
    pub emitted: Option<EmitSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    completed: Vec<String>,
}

#[derive(Serialize)]
struct ProvenanceRecord<'a> {
    pair_id: u64,
    outcome: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<&'a str>,
}

const INPUT_STEP: &str = "input";

fn step_index(step: &str) -> usize {
    if step == INPUT_STEP {
        0
    } else {
        Stage::ALL.iter().position(|s| s.as_str() == step).map_or(99, |i| i + 1)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(PipelineError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(PipelineError::io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("pipeline records serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let file = fs::File::open(path).map_err(PipelineError::io(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the config and the input corpus bytes; a checkpoint is reused
/// only when both are unchanged.
fn fingerprint(cfg: &PipelineConfig) -> Result<String, PipelineError> {
    let input = fs::read(&cfg.input.corpus)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", cfg.input.corpus.display())))?;
    let config = serde_json::to_string(cfg).expect("config serializes");
    Ok(sha256_hex(format!("{config}\n{}", sha256_hex(&input)).as_bytes()))
}

struct Workspace {
    dir: PathBuf,
    stages: PathBuf,
    checkpoint: Checkpoint,
}

impl Workspace {
    fn open(dir: &Path, fingerprint: String) -> Result<Self, PipelineError> {
        let stages = dir.join("stages");
        fs::create_dir_all(&stages).map_err(PipelineError::io(&stages))?;
        let path = dir.join("checkpoint.json");
        let checkpoint = match path.is_file().then(|| read_json::<Checkpoint>(&path)) {
            Some(Ok(c)) if c.fingerprint == fingerprint => c,
            found => {
                if found.is_some() {
                    log::warn!(
                        "{} belongs to a different config or input; starting over",
                        path.display()
                    );
                }
                for entry in fs::read_dir(&stages).map_err(PipelineError::io(&stages))? {
                    let p = entry.map_err(PipelineError::io(&stages))?.path();
                    fs::remove_file(&p).map_err(PipelineError::io(&p))?;
                }
                Checkpoint {
                    fingerprint,
                    completed: Vec::new(),
                }
            }
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            stages,
            checkpoint,
        })
    }

    fn paths(&self, step: &str) -> (PathBuf, PathBuf) {
        let stem = format!("{:02}_{step}", step_index(step));
        (
            self.stages.join(format!("{stem}.jsonl")),
            self.stages.join(format!("{stem}.report.json")),
        )
    }

    fn done(&self, step: &str) -> bool {
        self.checkpoint.completed.iter().any(|s| s == step)
    }

    fn load(
        &self,
        step: &str,
        registry: &LanguageRegistry,
    ) -> Result<(Vec<SentencePair>, FilterReport), PipelineError> {
        let (pairs_path, report_path) = self.paths(step);
        let pairs =
            read_corpus(&pairs_path, CorpusFormat::Jsonl, registry).map_err(|e| PipelineError::stage(step, e))?;
        Ok((pairs, read_json(&report_path)?))
    }

    fn save(&mut self, step: &str, pairs: &[SentencePair], report: &FilterReport) -> Result<(), PipelineError> {
        let (pairs_path, report_path) = self.paths(step);
        write_corpus(pairs, &pairs_path, CorpusFormat::Jsonl).map_err(|e| PipelineError::stage(step, e))?;
        write_json(&report_path, report)?;
        self.checkpoint.completed.push(step.to_string());
        write_json(&self.dir.join("checkpoint.json"), &self.checkpoint)
    }
}

fn load_input(
    cfg: &PipelineConfig,
    registry: &LanguageRegistry,
    mined_rows_path: &Path,
) -> Result<(Vec<SentencePair>, FilterReport), PipelineError> {
    let pairs = read_corpus(&cfg.input.corpus, cfg.input_format()?, registry)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", cfg.input.corpus.display())))?;
    let mut report = FilterReport::new();
    report.stages.push(StageCount {
        stage: INPUT_STEP.to_string(),
        input: 0,
        rejected: 0,
        added: pairs.len(),
    });
    let Some(m) = &cfg.mining else {
        return Ok((pairs, report));
    };
    let load_sents = |p: &Path, lang: &Option<String>| {
        read_sentences(p, lang.as_deref(), registry).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())))
    };
    let load_table =
        |p: &Path| EmbeddingTable::load(p).map_err(|e| PipelineError::Input(format!("{}: {e}", p.display())));
    let src = load_sents(&m.src_sentences, &m.src_lang)?;
    let tgt = load_sents(&m.tgt_sentences, &m.tgt_lang)?;
    let rows = mine_document_rows(
        &src,
        &load_table(&m.src_embeddings)?,
        &tgt,
        &load_table(&m.tgt_embeddings)?,
        &m.params,
    )
    .map_err(|e| PipelineError::stage("mining", e))?;
    // Mined pairs continue the id space; with margin filtering their
    // embeddings are appended after the corpus rows, so ids start there.
    let mut first_id = pairs.iter().map(|p| p.id + 1).max().unwrap_or(0);
    if let (true, Some(mc)) = (cfg.enabled(Stage::Margin), &cfg.margin) {
        first_id = first_id.max(load_table(&mc.src_embeddings)?.len() as u64);
    }
    let mined = pairs_from_rows(&src, &tgt, &rows, first_id).map_err(|e| PipelineError::stage("mining", e))?;
    write_json(mined_rows_path, &(first_id, &rows))?;
    report.stages.push(StageCount {
        stage: "mining".to_string(),
        input: pairs.len(),
        rejected: 0,
        added: mined.len(),
    });
    let mut pairs = pairs;
    pairs.extend(mined);
    Ok((pairs, report))
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    registry: &'a LanguageRegistry,
    backends: &'a Backends,
    cache: Option<ResponseCache>,
    mined_rows_path: PathBuf,
    next_id: u64,
}

impl Runner<'_> {
    fn lid_threshold(&self) -> f64 {
        self.cfg.lid.as_ref().map_or(DEFAULT_LID_THRESHOLD, |l| l.threshold)
    }

    fn cleaner_parts(&self) -> Result<(&dyn ChatBackend, &ResponseCache, &CleanerSection), String> {
        let chat = self.backends.chat.as_deref().ok_or("no chat backend configured")?;
        let cache = self.cache.as_ref().ok_or("no response cache")?;
        let section = self.cfg.cleaner.as_ref().ok_or("no [cleaner] section")?;
        Ok((chat, cache, section))
    }

    fn run(&self, stage: Stage, pairs: Vec<SentencePair>) -> Result<(Vec<SentencePair>, FilterReport), String> {
        match stage {
            Stage::Heuristics => Ok(run_heuristics(pairs, &self.cfg.heuristics)),
            Stage::Lid => {
                let lid = self.backends.lid.as_deref().ok_or("no LID backend configured")?;
                lid_gate(pairs, lid, self.lid_threshold()).map_err(|e| e.to_string())
            }
            Stage::Margin => self.margin(pairs),
            Stage::Cleaner => {
                let (chat, cache, section) = self.cleaner_parts()?;
                Ok(clean_corpus(pairs, chat, cache, &default_few_shots(), &section.params))
            }
            Stage::Backtranslation => self.backtranslation(pairs),
            Stage::EmitSft => unreachable!("emission is not a filtering step"),
        }
    }

    fn margin(&self, pairs: Vec<SentencePair>) -> Result<(Vec<SentencePair>, FilterReport), String> {
        let m = self.cfg.margin.as_ref().ok_or("no [margin] section")?;
        let load = |p: &Path| EmbeddingTable::load(p).map_err(|e| format!("{}: {e}", p.display()));
        let mut src = load(&m.src_embeddings)?;
        let mut tgt = load(&m.tgt_embeddings)?;
        if let Some(mc) = &self.cfg.mining {
            let (first_id, rows): (u64, Vec<MinedRow>) = read_json(&self.mined_rows_path).map_err(|e| e.to_string())?;
            if first_id != src.len() as u64 {
                return Err(format!(
                    "margin embeddings have {} rows but pair ids reach {first_id}",
                    src.len()
                ));
            }
            let src_rows: Vec<usize> = rows.iter().map(|r| r.src_row).collect();
            let tgt_rows: Vec<usize> = rows.iter().map(|r| r.tgt_row).collect();
            let extend = |table: &EmbeddingTable, path: &Path, idx: &[usize]| {
                table
                    .concat(&load(path)?.select(idx).map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())
            };
            src = extend(&src, &mc.src_embeddings, &src_rows)?;
            tgt = extend(&tgt, &mc.tgt_embeddings, &tgt_rows)?;
        }
        filter_by_margin(pairs, &src, &tgt, m.threshold, m.k).map_err(|e| e.to_string())
    }

    fn backtranslation(&self, pairs: Vec<SentencePair>) -> Result<(Vec<SentencePair>, FilterReport), String> {
        let b = self
            .cfg
            .backtranslation
            .as_ref()
            .ok_or("no [backtranslation] section")?;
        let translator = self.backends.translator.as_deref().ok_or("no translator configured")?;
        let lid: Option<&dyn LidBackend> = self.backends.backtranslation_lid.as_deref().or(self
            .backends
            .lid
            .as_deref()
            .filter(|_| self.cfg.enabled(Stage::Lid)));
        let lid = lid.map(|l| (l, self.lid_threshold()));
        let src_lang = self.registry.get(&b.src_lang).map_err(|e| e.to_string())?;

        let mono = read_sentences(&b.monolingual, Some(&b.lang), self.registry)
            .map_err(|e| format!("{}: {e}", b.monolingual.display()))?;
        if let Some(s) = mono.iter().find(|s| s.lang.code() != b.lang) {
            return Err(format!(
                "monolingual sentence {} is in {}, expected {}",
                s.id,
                s.lang.code(),
                b.lang
            ));
        }
        let total = mono.len();
        let (mono, _) = select_monolingual(mono, &self.cfg.heuristics, lid).map_err(|e| e.to_string())?;
        let selected = mono.len();
        let mono = match b.sample {
            Some(n) => sample_monolingual(mono, n, self.cfg.seed),
            None => mono,
        };
        let (synthetic, bt_report) =
            backtranslate(&mono, translator, src_lang, &b.params).map_err(|e| e.to_string())?;
        let synthetic: Vec<SentencePair> = synthetic
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.with_id(self.next_id + i as u64))
            .collect();
        let generated = synthetic.len();

        let cleaner = if self.cfg.enabled(Stage::Cleaner) {
            let (backend, cache, section) = self.cleaner_parts()?;
            Some((backend, cache, section))
        } else {
            None
        };
        let few_shots = default_few_shots();
        let synth_pipeline = SyntheticPipeline {
            heuristics: self.cfg.enabled(Stage::Heuristics).then_some(&self.cfg.heuristics),
            lid,
            margin: None,
            cleaner: cleaner.map(|(backend, cache, section)| CleanerStage {
                backend,
                cache,
                few_shots: &few_shots,
                cfg: &section.params,
            }),
        };
        let (kept, sub) = build_synthetic_corpus(synthetic, &synth_pipeline).map_err(|e| e.to_string())?;

        let mut report = FilterReport::new();
        let rejections: Vec<Rejection> = sub
            .rejections
            .iter()
            .map(|r| Rejection {
                pair_id: r.pair_id,
                stage: Stage::Backtranslation.as_str().to_string(),
                reason: format!("{}/{}", r.stage, r.reason),
            })
            .collect();
        report.stages.push(StageCount {
            stage: Stage::Backtranslation.as_str().to_string(),
            input: pairs.len(),
            rejected: rejections.len(),
            added: generated,
        });
        report.rejections = rejections;
        report.bump("backtranslation_monolingual", total as u64);
        report.bump("backtranslation_selected", selected as u64);
        report.bump("backtranslation_sampled", mono.len() as u64);
        for (k, v) in bt_report.counters.into_iter().chain(sub.counters) {
            report.bump(&format!("backtranslation_{k}"), v);
        }
        report.errors.extend(bt_report.errors);
        report.errors.extend(sub.errors);

        let mut out = pairs;
        out.extend(kept);
        Ok((out, report))
    }
}

/// Runs the configured stages in their fixed order, resuming from the
/// output directory's checkpoint when config and input are unchanged.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    backends: &Backends,
    opts: &RunOptions,
) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let registry = cfg.registry()?;
    let out_dir = &cfg.output.dir;
    let mut ws = Workspace::open(out_dir, fingerprint(cfg)?)?;
    let mut report = FilterReport::new();
    let mut boundaries = Vec::new();
    let mut resumed = Vec::new();
    let mined_rows_path = ws.stages.join("00_mined_rows.json");

    let (mut pairs, step_report) = if ws.done(INPUT_STEP) {
        resumed.push(INPUT_STEP.to_string());
        ws.load(INPUT_STEP, &registry)?
    } else {
        let (pairs, r) = load_input(cfg, &registry, &mined_rows_path)?;
        ws.save(INPUT_STEP, &pairs, &r)?;
        (pairs, r)
    };
    let input_pairs = pairs.clone();
    let boundary_name = |r: &FilterReport, fallback: &str| {
        r.stages
            .last()
            .map_or_else(|| fallback.to_string(), |s| s.stage.clone())
    };
    boundaries.push(Boundary::new(&boundary_name(&step_report, INPUT_STEP), &pairs));
    report.extend(step_report);

    let cache = match cfg.cache_path().filter(|_| cfg.enabled(Stage::Cleaner)) {
        Some(p) => Some(ResponseCache::open(&p).map_err(PipelineError::io(&p))?),
        None => None,
    };
    let runner = Runner {
        cfg,
        registry: &registry,
        backends,
        cache,
        mined_rows_path,
        next_id: input_pairs.iter().map(|p| p.id + 1).max().unwrap_or(0),
    };

    for stage in Stage::ALL
        .into_iter()
        .filter(|s| *s != Stage::EmitSft && cfg.enabled(*s))
    {
        let name = stage.as_str();
        let (next, step_report) = if ws.done(name) {
            resumed.push(name.to_string());
            ws.load(name, &registry)?
        } else {
            log::info!("running {name} on {} pairs", pairs.len());
            let (next, r) = runner.run(stage, pairs).map_err(|e| PipelineError::stage(name, e))?;
            ws.save(name, &next, &r)?;
            (next, r)
        };
        pairs = next;
        boundaries.push(Boundary::new(&boundary_name(&step_report, name), &pairs));
        report.extend(step_report);
        if opts.stop_after == Some(stage) {
            break;
        }
    }

    let authentic: Vec<SentencePair> = pairs.iter().filter(|p| !p.is_synthetic()).cloned().collect();
    let table = stats_report(&input_pairs, &authentic).map_err(|e| PipelineError::stage("stats", e))?;
    let stats = PipelineStats {
        stages: report.stages.clone(),
        boundaries,
        table,
    };

    let stopped_early = opts.stop_after.is_some_and(|s| s != Stage::EmitSft);
    let (split, emitted) = if cfg.enabled(Stage::EmitSft) && !stopped_early {
        let split = split_dataset(&pairs, cfg.seed).map_err(|e| PipelineError::stage(Stage::EmitSft.as_str(), e))?;
        let records = expand_directions(&pairs).map_err(|e| PipelineError::stage(Stage::EmitSft.as_str(), e))?;
        let summary = emit_sft(&records, &split, &out_dir.join("sft"))
            .map_err(|e| PipelineError::stage(Stage::EmitSft.as_str(), e))?;
        write_json(&out_dir.join("split.json"), &split)?;
        (Some(split), Some(summary))
    } else {
        (None, None)
    };

    let corpus_path = out_dir.join("corpus.jsonl");
    write_corpus(&pairs, &corpus_path, CorpusFormat::Jsonl).map_err(|e| PipelineError::stage("output", e))?;
    write_provenance(&out_dir.join("provenance.jsonl"), &pairs, &report, split.as_ref())?;
    write_json(&out_dir.join("report.json"), &report)?;
    write_json(&out_dir.join("stats.json"), &stats)?;
    write_atomic(&out_dir.join("stats.txt"), stats.table.render().as_bytes())?;

    Ok(PipelineOutcome {
        corpus: pairs,
        report,
        stats,
        resumed,
        split,
        emitted,
    })
}

/// One line per pair id, ascending: survivors with their split, rejected
/// pairs with stage and reason.
fn write_provenance(
    path: &Path,
    survivors: &[SentencePair],
    report: &FilterReport,
    split: Option<&SplitAssignment>,
) -> Result<(), PipelineError> {
    let mut records: BTreeMap<u64, ProvenanceRecord<'_>> = BTreeMap::new();
    for r in &report.rejections {
        let prev = records.insert(
            r.pair_id,
            ProvenanceRecord {
                pair_id: r.pair_id,
                outcome: "rejected",
                stage: Some(&r.stage),
                reason: Some(&r.reason),
                split: None,
            },
        );
        if prev.is_some() {
            return Err(PipelineError::stage(
                "provenance",
                format!("pair {} rejected twice", r.pair_id),
            ));
        }
    }
    let mut seen = HashSet::new();
    for p in survivors {
        if records.contains_key(&p.id) || !seen.insert(p.id) {
            return Err(PipelineError::stage(
                "provenance",
                format!("pair {} has two outcomes", p.id),
            ));
        }
        records.insert(
            p.id,
            ProvenanceRecord {
                pair_id: p.id,
                outcome: "kept",
                stage: None,
                reason: None,
                split: split.and_then(|s| s.which(p.id)).map(|n| n.as_str()),
            },
        );
    }
    let mut text = String::new();
    for r in records.values() {
        text.push_str(&serde_json::to_string(r).expect("provenance serializes"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}
