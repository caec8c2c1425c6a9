//! `bitext`: command-line front end for the corpus curation stages.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bitext_core::backtranslation::{backtranslate, sample_monolingual, select_monolingual, BacktranslateConfig};
use bitext_core::bleu::{self, bleu, load_text, load_token_sidecar, Smoothing, MAX_ORDER};
use bitext_core::cleaner::{clean_corpus, default_few_shots, CleanerConfig, ResponseCache, DEFAULT_MODEL};
use bitext_core::corpus::read_sentences;
use bitext_core::heuristics::{run_heuristics, HeuristicConfig};
use bitext_core::lid::lid_gate;
use bitext_core::margin::{filter_by_margin, mine_documents, mine_pairs, EmbeddingTable, MineConfig};
use bitext_core::pipeline::{
    build_chat, build_lid, build_translator, run_pipeline, stats_report, Backends, PipelineConfig, PipelineError,
    RunOptions, Stage,
};
use bitext_core::sft::{emit_sft, expand_directions};
use bitext_core::{
    read_corpus, split_dataset, write_corpus, CorpusFormat, FilterReport, LanguageRegistry, SentencePair,
    SplitAssignment,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bitext", version, about = "Parallel corpus curation for low-resource MT")]
struct Cli {
    /// Extra or overridden language, as `code=Display Name`. Repeatable.
    #[arg(long = "lang", global = true, value_name = "CODE=NAME")]
    langs: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Input corpus (.jsonl, or .tsv)
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the filter report here as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dedup and rule-based filters
    Filter {
        /// TOML with heuristic thresholds, bare or under [heuristics]
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        io: Io,
    },
    /// Language-ID gate
    Lid {
        /// sidecar:<tsv> or ngram:<model tsv>
        #[arg(long)]
        backend: String,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[command(flatten)]
        io: Io,
    },
    /// Ratio-margin filter over sentence embeddings
    MarginFilter {
        #[arg(long)]
        src_emb: PathBuf,
        #[arg(long)]
        tgt_emb: PathBuf,
        #[arg(long, default_value_t = 1.09)]
        threshold: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[command(flatten)]
        io: Io,
    },
    /// Mine pairs from comparable sentence sets
    Mine {
        /// Source sentences (.jsonl records or plain text lines)
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        src_emb: PathBuf,
        #[arg(long)]
        tgt_emb: PathBuf,
        /// Language of plain-text source lines
        #[arg(long)]
        src_lang: Option<String>,
        #[arg(long)]
        tgt_lang: Option<String>,
        #[arg(long, default_value_t = 0.7)]
        sim: f64,
        /// Require mutual nearest neighbours
        #[arg(long)]
        mutual: bool,
        /// Mine within documents (sentences grouped by origin)
        #[arg(long)]
        by_document: bool,
        #[arg(long, default_value_t = 0)]
        first_id: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// LLM alignment check and cleanup
    Clean {
        /// http or replay:<jsonl>
        #[arg(long)]
        backend: String,
        #[arg(long, default_value = DEFAULT_MODEL)]
        model: String,
        #[arg(long, default_value_t = 8)]
        batch_size: usize,
        #[arg(long, default_value_t = 2)]
        retries: usize,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        /// Delays before each retry, comma separated; the last one repeats
        #[arg(long, value_delimiter = ',', default_values_t = [1000u64, 4000])]
        backoff_ms: Vec<u64>,
        /// Reject pairs whose batch could not be verified
        #[arg(long)]
        strict: bool,
        /// Persistent response cache (JSONL)
        #[arg(long)]
        cache: Option<PathBuf>,
        #[command(flatten)]
        io: Io,
    },
    /// Generate synthetic pairs from monolingual text
    Backtranslate {
        #[arg(long)]
        mono: PathBuf,
        /// Language of plain-text monolingual lines
        #[arg(long)]
        mono_lang: Option<String>,
        /// Language to translate into (the synthetic source side)
        #[arg(long)]
        src_lang: String,
        /// http or replay:<jsonl>
        #[arg(long)]
        translator: String,
        /// LID backend used to select monolingual sentences
        #[arg(long)]
        lid: Option<String>,
        #[arg(long, default_value_t = 0.9)]
        lid_threshold: f64,
        /// Keep a random subset of this many selected sentences
        #[arg(long)]
        sample_n: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        chunk_size: usize,
        #[arg(long, default_value_t = 2)]
        concurrency: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// 90/5/5 train/validation/test split of pair ids
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit prompt/completion records per split
    EmitSft {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Reuse a split written by `split` instead of drawing one
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus BLEU, printed as JSON
    EvalBleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// none or add1_for_n_ge_2
        #[arg(long, default_value = "add1_for_n_ge_2")]
        smoothing: Smoothing,
        /// Inputs are pre-tokenized sidecars (e.g. SentencePiece pieces)
        #[arg(long)]
        tokenized: bool,
        #[arg(long, default_value_t = MAX_ORDER)]
        max_order: usize,
    },
    /// Before/after counts per dataset and language pair
    Stats {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        /// Print JSON instead of the text table
        #[arg(long)]
        json: bool,
    },
    /// Run the configured pipeline, resuming from checkpoints
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop once this stage is checkpointed
        #[arg(long)]
        stop_after: Option<Stage>,
    },
}

/// Bad input or configuration detected before any work was done.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(e: impl fmt::Display) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(p) = e.downcast_ref::<PipelineError>() {
        return p.exit_code() as u8;
    }
    if e.chain().any(|c| c.is::<Invalid>()) {
        1
    } else {
        2
    }
}

fn registry(extra: &[String]) -> Result<LanguageRegistry> {
    let mut map: BTreeMap<String, String> = LanguageRegistry::default()
        .iter()
        .map(|t| (t.code().to_string(), t.display_name().to_string()))
        .collect();
    for spec in extra {
        let (code, name) = spec
            .split_once('=')
            .ok_or_else(|| invalid(format!("--lang expects code=Name, got {spec:?}")))?;
        map.insert(code.trim().to_string(), name.trim().to_string());
    }
    LanguageRegistry::from_pairs(map).map_err(invalid)
}

fn load_pairs(path: &Path, langs: &LanguageRegistry) -> Result<Vec<SentencePair>> {
    read_corpus(path, CorpusFormat::from_path(path), langs)
        .map_err(invalid)
        .with_context(|| format!("reading {}", path.display()))
}

fn save_pairs(pairs: &[SentencePair], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_corpus(pairs, path, CorpusFormat::from_path(path))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn finish(kept: &[SentencePair], report: &FilterReport, out: &Path, report_path: Option<&Path>) -> Result<()> {
    save_pairs(kept, out)?;
    for stage in &report.stages {
        log::info!("{}: {} in, {} rejected", stage.stage, stage.input, stage.rejected);
    }
    for err in &report.errors {
        log::warn!("{err}");
    }
    if let Some(p) = report_path {
        write_json(p, report)?;
    }
    Ok(())
}

fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::load(path)
        .map_err(invalid)
        .with_context(|| format!("reading {}", path.display()))
}

fn heuristic_config(path: Option<&Path>) -> Result<HeuristicConfig> {
    let Some(path) = path else {
        return Ok(HeuristicConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table = text.parse().map_err(invalid)?;
    let section = match table.remove("heuristics") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(invalid("[heuristics] must be a table")),
        None => table,
    };
    let cfg: HeuristicConfig = section.try_into().map_err(invalid)?;
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let langs = registry(&cli.langs)?;
    match cli.command {
        Command::Filter { config, io } => {
            let cfg = heuristic_config(config.as_deref())?;
            let pairs = load_pairs(&io.input, &langs)?;
            let (kept, report) = run_heuristics(pairs, &cfg);
            finish(&kept, &report, &io.out, io.report.as_deref())
        }
        Command::Lid { backend, threshold, io } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(invalid(format!("--threshold must lie in [0, 1], got {threshold}")));
            }
            let backend = build_lid(&backend)?;
            let pairs = load_pairs(&io.input, &langs)?;
            let (kept, report) = lid_gate(pairs, backend.as_ref(), threshold)?;
            finish(&kept, &report, &io.out, io.report.as_deref())
        }
        Command::MarginFilter {
            src_emb,
            tgt_emb,
            threshold,
            k,
            io,
        } => {
            if k == 0 || threshold <= 0.0 {
                return Err(invalid("--k and --threshold must be positive"));
            }
            let (src, tgt) = (load_embeddings(&src_emb)?, load_embeddings(&tgt_emb)?);
            let pairs = load_pairs(&io.input, &langs)?;
            let (kept, report) = filter_by_margin(pairs, &src, &tgt, threshold, k).map_err(invalid)?;
            finish(&kept, &report, &io.out, io.report.as_deref())
        }
        Command::Mine {
            src,
            tgt,
            src_emb,
            tgt_emb,
            src_lang,
            tgt_lang,
            sim,
            mutual,
            by_document,
            first_id,
            out,
        } => {
            if !(-1.0..=1.0).contains(&sim) {
                return Err(invalid(format!("--sim must lie in [-1, 1], got {sim}")));
            }
            let cfg = MineConfig {
                sim_threshold: sim,
                mutual,
            };
            let src_sents = read_sentences(&src, src_lang.as_deref(), &langs).map_err(invalid)?;
            let tgt_sents = read_sentences(&tgt, tgt_lang.as_deref(), &langs).map_err(invalid)?;
            let (src_table, tgt_table) = (load_embeddings(&src_emb)?, load_embeddings(&tgt_emb)?);
            let mined = if by_document {
                mine_documents(&src_sents, &src_table, &tgt_sents, &tgt_table, &cfg, first_id)
            } else {
                mine_pairs(&src_sents, &src_table, &tgt_sents, &tgt_table, &cfg).map(|p| {
                    p.into_iter()
                        .map(|p| {
                            let id = p.id + first_id;
                            p.with_id(id)
                        })
                        .collect()
                })
            }
            .map_err(invalid)?;
            log::info!(
                "mined {} pairs from {}x{} sentences",
                mined.len(),
                src_sents.len(),
                tgt_sents.len()
            );
            save_pairs(&mined, &out)
        }
        Command::Clean {
            backend,
            model,
            batch_size,
            retries,
            concurrency,
            backoff_ms,
            strict,
            cache,
            io,
        } => {
            let cfg = CleanerConfig {
                batch_size,
                retries,
                strict,
                concurrency,
                backoff_ms,
            };
            cfg.validate().map_err(invalid)?;
            let backend = build_chat(&backend, &model)?;
            let cache = match &cache {
                Some(p) => ResponseCache::open(p).with_context(|| format!("opening cache {}", p.display()))?,
                None => ResponseCache::in_memory(),
            };
            let pairs = load_pairs(&io.input, &langs)?;
            let (kept, report) = clean_corpus(pairs, backend.as_ref(), &cache, &default_few_shots(), &cfg);
            finish(&kept, &report, &io.out, io.report.as_deref())
        }
        Command::Backtranslate {
            mono,
            mono_lang,
            src_lang,
            translator,
            lid,
            lid_threshold,
            sample_n,
            seed,
            chunk_size,
            concurrency,
            out,
            report,
        } => {
            let src_lang = langs.get(&src_lang).map_err(invalid)?.clone();
            let cfg = BacktranslateConfig {
                chunk_size,
                concurrency,
            };
            if chunk_size == 0 || concurrency == 0 {
                return Err(invalid("--chunk-size and --concurrency must be positive"));
            }
            let translator = build_translator(&translator)?;
            let lid = lid.as_deref().map(build_lid).transpose()?;
            let sentences = read_sentences(&mono, mono_lang.as_deref(), &langs).map_err(invalid)?;
            let (selected, mut full) = select_monolingual(
                sentences,
                &HeuristicConfig::default(),
                lid.as_deref().map(|b| (b, lid_threshold)),
            )?;
            let selected = match sample_n {
                Some(n) => sample_monolingual(selected, n, seed),
                None => selected,
            };
            let (pairs, bt) = backtranslate(&selected, translator.as_ref(), &src_lang, &cfg).map_err(invalid)?;
            full.extend(bt);
            finish(&pairs, &full, &out, report.as_deref())
        }
        Command::Split { input, seed, out } => {
            let pairs = load_pairs(&input, &langs)?;
            let split = split_dataset(&pairs, seed).map_err(invalid)?;
            let (train, validation, test) = split.sizes();
            log::info!("train {train}, validation {validation}, test {test}");
            write_json(&out, &split)
        }
        Command::EmitSft {
            input,
            seed,
            split,
            out,
        } => {
            let pairs = load_pairs(&input, &langs)?;
            let split: SplitAssignment = match split {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).map_err(invalid)?
                }
                None => split_dataset(&pairs, seed).map_err(invalid)?,
            };
            let records = expand_directions(&pairs).map_err(invalid)?;
            let summary = emit_sft(&records, &split, &out)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(())
        }
        Command::EvalBleu {
            hyp,
            reference,
            smoothing,
            tokenized,
            max_order,
        } => {
            let (h, r) = if tokenized {
                let h = load_token_sidecar(&hyp, None).map_err(invalid)?;
                let r = load_token_sidecar(&reference, Some(h.len())).map_err(invalid)?;
                (h, r)
            } else {
                (
                    load_text(&hyp).map_err(invalid)?,
                    load_text(&reference).map_err(invalid)?,
                )
            };
            let score = bleu(&h, &r, max_order, smoothing).map_err(|e| match e {
                bleu::BleuError::Io { .. } => anyhow::Error::from(e),
                other => invalid(other),
            })?;
            println!("{}", serde_json::to_string(&score)?);
            Ok(())
        }
        Command::Stats { before, after, json } => {
            let before = load_pairs(&before, &langs)?;
            let after = load_pairs(&after, &langs)?;
            let table = stats_report(&before, &after).map_err(invalid)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.render());
            }
            Ok(())
        }
        Command::Run { config, stop_after } => {
            if !cli.langs.is_empty() {
                bail!(invalid(
                    "--lang does not apply to run; declare [languages] in the config"
                ));
            }
            let cfg = PipelineConfig::load(&config)?;
            cfg.validate()?;
            let backends = Backends::from_config(&cfg)?;
            let outcome = run_pipeline(&cfg, &backends, &RunOptions { stop_after })?;
            if !outcome.resumed.is_empty() {
                log::info!("resumed from checkpoint: {}", outcome.resumed.join(", "));
            }
            if let Some(e) = &outcome.emitted {
                log::info!(
                    "SFT records: train {}, validation {}, test {}",
                    e.train,
                    e.validation,
                    e.test
                );
            }
            eprint!("{}", outcome.stats.table.render());
            println!("{} pairs written to {}", outcome.corpus.len(), cfg.output.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
