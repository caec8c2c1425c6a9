//! Shared domain types, corpus files and dataset splitting.

mod io;
mod split;
mod types;

use std::path::{Path, PathBuf};

pub use io::{
    escape_tsv, read_corpus, read_corpus_from, read_sentences, unescape_tsv, write_corpus, write_corpus_to,
    write_sentences, CorpusFormat,
};
pub use split::{split_dataset, SplitAssignment, SplitName, MIN_SPLIT_SIZE};
pub use types::{src_sentence_id, tgt_sentence_id, LanguageRegistry, LanguageTag, Sentence, SentencePair, Status};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unknown language code {code:?}")]
    UnknownLanguageAt { line: usize, code: String },
    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),
    #[error("invalid language: {0}")]
    InvalidLanguage(String),
    #[error("source and target share language {0:?}")]
    SameLanguage(String),
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: u64 },
    #[error("split: {0}")]
    Split(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn malformed(line: usize, msg: impl Into<String>) -> Self {
        CorpusError::Malformed { line, msg: msg.into() }
    }
}
