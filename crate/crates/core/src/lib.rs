//! Parallel-corpus curation for low-resource machine translation.
//!
//! Stages, in pipeline order: rule-based [`heuristics`], a language-ID
//! gate ([`lid`]), embedding [`margin`] filtering and bitext mining, the
//! batch-prompted LLM [`cleaner`], [`backtranslation`], dataset splitting
//! and [`sft`] record emission. [`bleu`] scores translations and
//! [`pipeline`] wires everything together behind a config file.

pub mod backtranslation;
pub mod bleu;
pub mod cleaner;
pub mod corpus;
pub mod heuristics;
pub mod lid;
pub mod margin;
pub mod pipeline;
pub mod report;
pub mod sft;
pub mod transport;

pub use corpus::{
    read_corpus, split_dataset, write_corpus, CorpusError, CorpusFormat, LanguageRegistry, LanguageTag, Sentence,
    SentencePair, SplitAssignment, Status,
};
pub use report::{Decision, FilterReport, Rejection, StageCount};
