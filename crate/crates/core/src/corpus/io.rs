use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CorpusError, LanguageRegistry, Sentence, SentencePair, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Picks TSV for `.tsv`/`.tab` files, JSON Lines otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or tsv)")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    src_lang: String,
    tgt_lang: String,
    src_text: String,
    tgt_text: String,
    origin: String,
    #[serde(default)]
    scores: BTreeMap<String, f64>,
    #[serde(default = "raw_status")]
    status: Status,
}

fn raw_status() -> Status {
    Status::Raw
}

impl From<&SentencePair> for PairRecord {
    fn from(p: &SentencePair) -> Self {
        PairRecord {
            id: Some(p.id),
            src_lang: p.src.lang.code().to_string(),
            tgt_lang: p.tgt.lang.code().to_string(),
            src_text: p.src.text.clone(),
            tgt_text: p.tgt.text.clone(),
            origin: p.origin().to_string(),
            scores: p.scores.clone(),
            status: p.status.clone(),
        }
    }
}

impl PairRecord {
    fn into_pair(self, line: usize, default_id: u64, langs: &LanguageRegistry) -> Result<SentencePair, CorpusError> {
        let lang = |code: &str| {
            langs.get(code).cloned().map_err(|_| CorpusError::UnknownLanguageAt {
                line,
                code: code.to_string(),
            })
        };
        let src_lang = lang(&self.src_lang)?;
        let tgt_lang = lang(&self.tgt_lang)?;
        for (side, text) in [("src_text", &self.src_text), ("tgt_text", &self.tgt_text)] {
            if text.trim().is_empty() {
                return Err(CorpusError::malformed(line, format!("{side} is empty")));
            }
        }
        let mut pair = SentencePair::new(
            self.id.unwrap_or(default_id),
            self.src_text,
            src_lang,
            self.tgt_text,
            tgt_lang,
            self.origin,
        )
        .map_err(|e| CorpusError::malformed(line, e.to_string()))?;
        pair.scores = self.scores;
        pair.status = self.status;
        Ok(pair)
    }
}

pub fn read_corpus(
    path: &Path,
    format: CorpusFormat,
    langs: &LanguageRegistry,
) -> Result<Vec<SentencePair>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_corpus_from(BufReader::new(file), format, langs)
}

/// Pairs receive sequential ids in file order unless the record carries
/// an explicit `id`.
pub fn read_corpus_from<R: BufRead>(
    reader: R,
    format: CorpusFormat,
    langs: &LanguageRegistry,
) -> Result<Vec<SentencePair>, CorpusError> {
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::malformed(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = match format {
            CorpusFormat::Jsonl => {
                serde_json::from_str::<PairRecord>(&line).map_err(|e| CorpusError::malformed(lineno, e.to_string()))?
            }
            CorpusFormat::Tsv => parse_tsv_line(&line, lineno)?,
        };
        let pair = record.into_pair(lineno, pairs.len() as u64, langs)?;
        if !seen.insert(pair.id) {
            return Err(CorpusError::DuplicateId {
                line: lineno,
                id: pair.id,
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn write_corpus(pairs: &[SentencePair], path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus_to(pairs, &mut out, format).map_err(|e| CorpusError::io(path, e))?;
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn write_corpus_to<W: Write>(pairs: &[SentencePair], out: &mut W, format: CorpusFormat) -> std::io::Result<()> {
    for pair in pairs {
        let record = PairRecord::from(pair);
        match format {
            CorpusFormat::Jsonl => {
                serde_json::to_writer(&mut *out, &record)?;
            }
            CorpusFormat::Tsv => {
                let scores = serde_json::to_string(&record.scores)?;
                let fields = [
                    record.src_lang.as_str(),
                    record.tgt_lang.as_str(),
                    &escape_tsv(&record.src_text),
                    &escape_tsv(&record.tgt_text),
                    &escape_tsv(&record.origin),
                    &escape_tsv(&record.status.to_string()),
                    &scores,
                    &pair.id.to_string(),
                ];
                out.write_all(fields.join("\t").as_bytes())?;
            }
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// TSV columns: src_lang, tgt_lang, src_text, tgt_text, origin, and
/// optionally status, scores (JSON object) and id.
fn parse_tsv_line(line: &str, lineno: usize) -> Result<PairRecord, CorpusError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 && fields.len() != 8 {
        return Err(CorpusError::malformed(
            lineno,
            format!(
                "expected 5 fields (or 8 with status, scores and id), found {}",
                fields.len()
            ),
        ));
    }
    let mut record = PairRecord {
        id: None,
        src_lang: fields[0].to_string(),
        tgt_lang: fields[1].to_string(),
        src_text: unescape_tsv(fields[2]),
        tgt_text: unescape_tsv(fields[3]),
        origin: unescape_tsv(fields[4]),
        scores: BTreeMap::new(),
        status: Status::Raw,
    };
    if fields.len() == 8 {
        record.status = unescape_tsv(fields[5])
            .parse()
            .map_err(|e: String| CorpusError::malformed(lineno, e))?;
        record.scores = serde_json::from_str(fields[6]).map_err(|e| CorpusError::malformed(lineno, e.to_string()))?;
        record.id = Some(
            fields[7]
                .parse()
                .map_err(|_| CorpusError::malformed(lineno, format!("bad id {:?}", fields[7])))?,
        );
    }
    Ok(record)
}

pub fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    text: String,
    lang: String,
    #[serde(default)]
    origin: String,
}

/// Reads monolingual sentences. JSONL records are `{"id"?, "text", "lang",
/// "origin"}`; any other extension is read as plain text, one sentence per
/// line, in `default_lang`.
pub fn read_sentences(
    path: &Path,
    default_lang: Option<&str>,
    langs: &LanguageRegistry,
) -> Result<Vec<Sentence>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let jsonl = path.extension().and_then(|e| e.to_str()) == Some("jsonl");
    let origin = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mono").to_string();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CorpusError::malformed(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = if jsonl {
            serde_json::from_str::<SentenceRecord>(&line).map_err(|e| CorpusError::malformed(lineno, e.to_string()))?
        } else {
            let lang = default_lang.ok_or_else(|| {
                CorpusError::malformed(lineno, "plain-text sentences need a declared language".to_string())
            })?;
            SentenceRecord {
                id: None,
                text: line,
                lang: lang.to_string(),
                origin: origin.clone(),
            }
        };
        let lang = langs
            .get(&record.lang)
            .cloned()
            .map_err(|_| CorpusError::UnknownLanguageAt {
                line: lineno,
                code: record.lang.clone(),
            })?;
        let id = record.id.unwrap_or(out.len() as u64);
        if !seen.insert(id) {
            return Err(CorpusError::DuplicateId { line: lineno, id });
        }
        out.push(Sentence::new(id, record.text, lang, record.origin));
    }
    Ok(out)
}

pub fn write_sentences(sentences: &[Sentence], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in sentences {
        let record = SentenceRecord {
            id: Some(s.id),
            text: s.text.clone(),
            lang: s.lang.code().to_string(),
            origin: s.origin.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| CorpusError::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}
