//! Fixtures and mock backends shared by the integration and acceptance
//! tests.
#![allow(dead_code)]

pub mod oracles;

use std::fs;
use std::path::{Path, PathBuf};

use bitext_core::backtranslation::TranslatorBackend;
use bitext_core::cleaner::ChatBackend;
use bitext_core::lid::{LanguageScore, LidBackend, LidError};
use bitext_core::margin::EmbeddingTable;
use bitext_core::pipeline::{Backends, PipelineConfig};
use bitext_core::transport::BackendError;
use bitext_core::{CorpusFormat, LanguageRegistry, LanguageTag, Sentence, SentencePair};

/// Declared-language probability 0.3 for texts containing `zzz`, else 0.97.
pub struct MarkerLid;

impl LidBackend for MarkerLid {
    fn score(&self, s: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        let prob = if s.text.contains("zzz") { 0.3 } else { 0.97 };
        Ok(vec![LanguageScore {
            lang: s.lang.code().to_string(),
            prob,
        }])
    }
}

/// Panics when used; proves a stage was not re-run.
pub struct PanicLid;

impl LidBackend for PanicLid {
    fn score(&self, _: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        panic!("LID must not run again")
    }
}

/// Reads the batch back out of the prompt. Pairs whose text contains
/// `MISALIGNED` are judged misaligned; others are returned with every
/// ` (noise)` removed.
pub struct RuleCleaner;

pub fn batch_lines(prompt: &str) -> Vec<(String, String)> {
    let (_, batch) = prompt
        .split_once("Now, clean the following sentence pairs:\n")
        .expect("prompt has a batch section");
    batch
        .split("\n\n")
        .map(|block| {
            let (a, b) = block.split_once('\n').expect("two lines per pair");
            (a.to_string(), b.to_string())
        })
        .collect()
}

impl ChatBackend for RuleCleaner {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let blocks: Vec<String> = batch_lines(prompt)
            .into_iter()
            .map(|(a, b)| {
                if a.contains("MISALIGNED") || b.contains("MISALIGNED") {
                    "False".to_string()
                } else {
                    format!("True\n{}\n{}", a.replace(" (noise)", ""), b.replace(" (noise)", ""))
                }
            })
            .collect();
        Ok(blocks.join("\n\n"))
    }
}

/// Reverses word order.
pub struct ReverseTranslator;

impl TranslatorBackend for ReverseTranslator {
    fn translate(&self, texts: &[String], _: &LanguageTag, _: &LanguageTag) -> Result<Vec<String>, BackendError> {
        Ok(texts
            .iter()
            .map(|t| t.split_whitespace().rev().collect::<Vec<_>>().join(" "))
            .collect())
    }
}

pub fn mock_backends() -> Backends {
    Backends {
        lid: None,
        backtranslation_lid: Some(Box::new(MarkerLid)),
        chat: Some(Box::new(RuleCleaner)),
        translator: Some(Box::new(ReverseTranslator)),
    }
}

pub const DUPLICATES: [u64; 2] = [3, 25];
pub const TOO_SHORT: [u64; 3] = [5, 21, 33];
pub const BAD_RATIO: [u64; 2] = [7, 35];
pub const LONG_WORD: [u64; 2] = [9, 27];
pub const PUNCT_DIGIT: [u64; 2] = [11, 37];
pub const LOW_LID: [u64; 3] = [13, 23, 31];
pub const LOW_MARGIN: [u64; 2] = [15, 29];
pub const MISALIGNED: [u64; 3] = [17, 26, 38];
pub const NOISY: [u64; 3] = [0, 20, 34];

pub const EMBED_DIM: usize = 41;

fn dataset(id: u64) -> (&'static str, &'static str, &'static str) {
    match id {
        0..=19 => ("nllb", "en", "ban"),
        20..=29 => ("nusax", "min", "en"),
        _ => ("bible", "id", "ban"),
    }
}

fn base_text(lang: &str, i: u64) -> String {
    match lang {
        "en" => format!("The village temple ceremony number {i} was very beautiful."),
        "ban" => format!("Upacara ring pura desa nomor {i} becik pisan."),
        "min" => format!("Upacaro di surau nomor {i} sangaik rancak bana."),
        "id" => format!("Upacara di pura desa nomor {i} sangat indah."),
        _ => unreachable!(),
    }
}

/// The 40-pair corpus. Each constant above lists the pairs built to trip
/// one stage; all other pairs pass everything.
pub fn fixture_pairs() -> Vec<SentencePair> {
    let reg = LanguageRegistry::default();
    (0..40u64)
        .map(|id| {
            let (origin, s, t) = dataset(id);
            let mut src = base_text(s, id);
            let mut tgt = base_text(t, id);
            if DUPLICATES.contains(&id) {
                src = base_text(s, id - 1);
                tgt = base_text(t, id - 1);
            } else if TOO_SHORT.contains(&id) {
                src = "Hello there.".to_string();
            } else if BAD_RATIO.contains(&id) {
                src = "Ceremony seven today.".to_string();
                tgt = format!("{tgt} Lan akeh krama sane rauh saking desa sane lianan.");
            } else if LONG_WORD.contains(&id) {
                src = format!("{src} Supercalifragilisticexpialidocious");
            } else if PUNCT_DIGIT.contains(&id) {
                src = "Call 555-1234-5678 now!! #99 (ok)".to_string();
            } else if MISALIGNED.contains(&id) {
                src = format!("MISALIGNED {src}");
            } else if NOISY.contains(&id) {
                tgt = format!("{tgt} (noise)");
            }
            SentencePair::new(
                id,
                src,
                reg.get(s).unwrap().clone(),
                tgt,
                reg.get(t).unwrap().clone(),
                origin,
            )
            .unwrap()
        })
        .collect()
}

fn basis(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; EMBED_DIM];
    v[i] = 1.0;
    v
}

/// Row i is e_i on both sides, except low-margin pairs whose target points
/// at the next pair's source.
pub fn fixture_embeddings() -> (EmbeddingTable, EmbeddingTable) {
    let src: Vec<Vec<f64>> = (0..40).map(basis).collect();
    let tgt: Vec<Vec<f64>> = (0..40u64)
        .map(|i| {
            if LOW_MARGIN.contains(&i) {
                basis(i as usize + 1)
            } else {
                basis(i as usize)
            }
        })
        .collect();
    (
        EmbeddingTable::from_rows(src).unwrap(),
        EmbeddingTable::from_rows(tgt).unwrap(),
    )
}

/// `sentence_id lang prob` for every sentence of the fixture.
pub fn fixture_lid_sidecar() -> String {
    let mut out = String::new();
    for p in fixture_pairs() {
        let low = LOW_LID.contains(&p.id);
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            p.src.id,
            p.src.lang.code(),
            if low { 0.3 } else { 0.97 }
        ));
        out.push_str(&format!("{}\t{}\t0.97\n", p.tgt.id, p.tgt.lang.code()));
    }
    out
}

pub const MONOLINGUAL: [&str; 10] = [
    "Tiang meli buku ring toko punika.",
    "Ida sang prabu lunga ka pasar gede.",
    "Anak alit",
    "Tiang meli buku ring toko punika.",
    "Krama desa ngaturang canang sari ring pura.",
    "Semeton sami rauh ring pura ento dibi.",
    "MISALIGNED sasuratan puniki nenten patut.",
    "Ia ngajeng nasi di umah timpalne.",
    "Sekolah punika magenah ring Denpasar.",
    "zzz basa tan kauningin ring dija.",
];

pub const CONFIG: &str = r#"
seed = 42
stages = ["heuristics", "lid", "margin", "cleaner", "backtranslation", "emit_sft"]

[input]
corpus = "pairs.jsonl"

[output]
dir = "out"

[lid]
backend = "sidecar:lid.tsv"

[margin]
src_embeddings = "src.emb"
tgt_embeddings = "tgt.emb"

[cleaner]
backend = "replay:cleaner_replay.jsonl"
batch_size = 4
concurrency = 2
backoff_ms = [0]

[backtranslation]
monolingual = "mono.txt"
lang = "ban"
src_lang = "en"
translator = "replay:translations.jsonl"
chunk_size = 3
"#;

/// Writes the fixture files and config into `dir`; returns the loaded
/// config. Replay files are empty: tests inject mock backends.
pub fn write_fixture(dir: &Path) -> PipelineConfig {
    bitext_core::write_corpus(&fixture_pairs(), &dir.join("pairs.jsonl"), CorpusFormat::Jsonl).unwrap();
    let (src, tgt) = fixture_embeddings();
    src.save_binary(&dir.join("src.emb")).unwrap();
    tgt.save_binary(&dir.join("tgt.emb")).unwrap();
    fs::write(dir.join("lid.tsv"), fixture_lid_sidecar()).unwrap();
    fs::write(dir.join("mono.txt"), MONOLINGUAL.join("\n") + "\n").unwrap();
    fs::write(dir.join("cleaner_replay.jsonl"), "").unwrap();
    fs::write(dir.join("translations.jsonl"), "").unwrap();
    let path = dir.join("pipeline.toml");
    fs::write(&path, CONFIG).unwrap();
    PipelineConfig::load(&path).unwrap()
}

/// Mock backends plus the real sidecar LID for the authentic corpus.
pub fn fixture_backends(cfg: &PipelineConfig) -> Backends {
    let mut b = mock_backends();
    b.lid = Some(bitext_core::pipeline::build_lid(&cfg.lid.as_ref().unwrap().backend).unwrap());
    b
}

pub fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
