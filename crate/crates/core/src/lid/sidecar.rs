use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{LanguageScore, LidBackend, LidError};
use crate::corpus::Sentence;

/// Precomputed scores, one `sentence_id<TAB>lang<TAB>prob` line per sentence.
/// In a bitext the source of pair `p` is sentence `2p` and the target `2p+1`.
#[derive(Clone, Debug, Default)]
pub struct SidecarBackend {
    table: HashMap<u64, LanguageScore>,
}

impl SidecarBackend {
    pub fn load(path: &Path) -> Result<Self, LidError> {
        let file = File::open(path).map_err(|source| LidError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LidError> {
        let mut table = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let malformed = |msg: String| LidError::Malformed { line: lineno, msg };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, lang, prob] = fields[..] else {
                return Err(malformed(format!("expected 3 fields, found {}", fields.len())));
            };
            let id: u64 = id
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad sentence id {id:?}")))?;
            let prob: f64 = prob
                .trim()
                .parse()
                .map_err(|_| malformed(format!("bad probability {prob:?}")))?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(malformed(format!("probability {prob} outside [0, 1]")));
            }
            let score = LanguageScore {
                lang: lang.trim().to_string(),
                prob,
            };
            if table.insert(id, score).is_some() {
                return Err(malformed(format!("duplicate sentence id {id}")));
            }
        }
        Ok(Self { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl LidBackend for SidecarBackend {
    fn score(&self, sentence: &Sentence) -> Result<Vec<LanguageScore>, LidError> {
        self.table
            .get(&sentence.id)
            .map(|s| vec![s.clone()])
            .ok_or(LidError::MissingScore(sentence.id))
    }
}
