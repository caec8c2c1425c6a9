//! Translation-prompt rendering and SFT dataset emission.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{SentencePair, SplitAssignment, SplitName};

#[derive(Debug, thiserror::Error)]
pub enum SftError {
    #[error("direction {direction} does not match pair {pair_id} ({langs})")]
    DirectionMismatch {
        pair_id: u64,
        direction: String,
        langs: String,
    },
    #[error("language {0:?} has no display name")]
    UnknownLanguageName(String),
    #[error("pair {0} is not assigned to any split")]
    Unassigned(u64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A translation direction by language code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub from: String,
    pub to: String,
}

impl Direction {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from, self.to)
    }
}

/// One training example. `prompt + completion` is the full training text;
/// loss is computed from `loss_mask_offset` (a character index) onwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub prompt: String,
    pub completion: String,
    pub direction: String,
    pub origin: String,
    pub synthetic: bool,
    pub loss_mask_offset: usize,
    pub pair_id: u64,
}

impl SftRecord {
    pub fn text(&self) -> String {
        format!("{}{}", self.prompt, self.completion)
    }
}

/// Renders `pair` in `direction`:
///
/// ```text
/// Translate this from <Src> to <Tgt>:
/// <Src>: <source text>
/// <Tgt>:
/// ```
///
/// followed by the completion `" <target text>"`.
pub fn render_translation_prompt(pair: &SentencePair, direction: &Direction) -> Result<SftRecord, SftError> {
    let (src, tgt) = if direction.from == pair.src.lang.code() && direction.to == pair.tgt.lang.code() {
        (&pair.src, &pair.tgt)
    } else if direction.from == pair.tgt.lang.code() && direction.to == pair.src.lang.code() {
        (&pair.tgt, &pair.src)
    } else {
        return Err(SftError::DirectionMismatch {
            pair_id: pair.id,
            direction: direction.to_string(),
            langs: format!("{}-{}", pair.src.lang.code(), pair.tgt.lang.code()),
        });
    };
    let src_name = src.lang.display_name();
    let tgt_name = tgt.lang.display_name();
    for (name, code) in [(src_name, src.lang.code()), (tgt_name, tgt.lang.code())] {
        if name.trim().is_empty() {
            return Err(SftError::UnknownLanguageName(code.to_string()));
        }
    }
    let prompt = format!(
        "Translate this from {src_name} to {tgt_name}: \n{src_name}: {}\n{tgt_name}:",
        src.text
    );
    Ok(SftRecord {
        loss_mask_offset: prompt.chars().count(),
        prompt,
        completion: format!(" {}", tgt.text),
        direction: direction.to_string(),
        origin: pair.origin().to_string(),
        synthetic: pair.is_synthetic(),
        pair_id: pair.id,
    })
}

/// Authentic pairs yield both directions (forward first); synthetic pairs
/// yield only generated-to-authentic, i.e. src to tgt. Rejected pairs yield
/// nothing.
pub fn expand_directions(pairs: &[SentencePair]) -> Result<Vec<SftRecord>, SftError> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs.iter().filter(|p| !p.is_rejected()) {
        let forward = Direction::new(pair.src.lang.code(), pair.tgt.lang.code());
        out.push(render_translation_prompt(pair, &forward)?);
        if !pair.is_synthetic() {
            let backward = Direction::new(pair.tgt.lang.code(), pair.src.lang.code());
            out.push(render_translation_prompt(pair, &backward)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmitSummary {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl EmitSummary {
    pub fn get(&self, name: SplitName) -> usize {
        match name {
            SplitName::Train => self.train,
            SplitName::Validation => self.validation,
            SplitName::Test => self.test,
        }
    }
}

/// Writes `train.jsonl`, `validation.jsonl` and `test.jsonl` under
/// `out_dir`, routing each record by its pair id.
pub fn emit_sft(records: &[SftRecord], split: &SplitAssignment, out_dir: &Path) -> Result<EmitSummary, SftError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SftError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut routed: [Vec<&SftRecord>; 3] = Default::default();
    for r in records {
        let name = split.which(r.pair_id).ok_or(SftError::Unassigned(r.pair_id))?;
        routed[name as usize].push(r);
    }
    for name in SplitName::ALL {
        let path = out_dir.join(format!("{}.jsonl", name.as_str()));
        let mut w = BufWriter::new(File::create(&path).map_err(io(&path))?);
        for r in &routed[name as usize] {
            let line = serde_json::to_string(r).expect("records serialize");
            writeln!(w, "{line}").map_err(io(&path))?;
        }
        w.flush().map_err(io(&path))?;
    }
    Ok(EmitSummary {
        train: routed[SplitName::Train as usize].len(),
        validation: routed[SplitName::Validation as usize].len(),
        test: routed[SplitName::Test as usize].len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_dataset, LanguageRegistry, Status};

    fn pair(id: u64, src: &str, tgt: &str) -> SentencePair {
        let reg = LanguageRegistry::default();
        SentencePair::new(
            id,
            src,
            reg.get("en").unwrap().clone(),
            tgt,
            reg.get("ban").unwrap().clone(),
            "wiki",
        )
        .unwrap()
    }

    fn synthetic(id: u64) -> SentencePair {
        let mut p = pair(id, &format!("generated {id}"), &format!("authentic {id}"));
        p.status = Status::Synthetic {
            from: "ban".into(),
            to: "en".into(),
        };
        p
    }

    #[test]
    fn astaire_both_directions() {
        let p = pair(
            0,
            "Astaire continued to act in the 1970s.",
            "Astaire sasai maakting ring warsa 1970-an.",
        );
        let fwd = render_translation_prompt(&p, &Direction::new("en", "ban")).unwrap();
        assert_eq!(
            fwd.prompt,
            "Translate this from English to Balinese: \nEnglish: Astaire continued to act in the 1970s.\nBalinese:"
        );
        assert_eq!(fwd.completion, " Astaire sasai maakting ring warsa 1970-an.");
        assert_eq!(fwd.direction, "en-ban");

        let bwd = render_translation_prompt(&p, &Direction::new("ban", "en")).unwrap();
        assert_eq!(
            bwd.prompt,
            "Translate this from Balinese to English: \nBalinese: Astaire sasai maakting ring warsa 1970-an.\nEnglish:"
        );
        assert_eq!(bwd.completion, " Astaire continued to act in the 1970s.");
    }

    #[test]
    fn offset_counts_chars() {
        let p = pair(0, "Ça va très bien.", "Becik pisan é.");
        let r = render_translation_prompt(&p, &Direction::new("en", "ban")).unwrap();
        assert_eq!(r.loss_mask_offset, r.prompt.chars().count());
        assert!(r.loss_mask_offset < r.prompt.len());
        let text = r.text();
        assert_eq!(text.chars().skip(r.loss_mask_offset).collect::<String>(), r.completion);
    }

    #[test]
    fn mismatched_direction() {
        let p = pair(3, "a", "b");
        assert!(matches!(
            render_translation_prompt(&p, &Direction::new("en", "id")),
            Err(SftError::DirectionMismatch { pair_id: 3, .. })
        ));
    }

    #[test]
    fn expansion_counts() {
        let authentic: Vec<_> = (0..10).map(|i| pair(i, "x y", "z w")).collect();
        let synth: Vec<_> = (10..15).map(synthetic).collect();
        assert_eq!(expand_directions(&authentic).unwrap().len(), 20);
        assert_eq!(expand_directions(&synth).unwrap().len(), 5);
        let mixed: Vec<_> = authentic.into_iter().chain(synth).collect();
        let records = expand_directions(&mixed).unwrap();
        assert_eq!(records.len(), 25);
        for r in records.iter().filter(|r| r.synthetic) {
            assert_eq!(r.direction, "en-ban");
            assert!(r.prompt.contains("English: generated"));
        }
    }

    #[test]
    fn rejected_pairs_are_skipped() {
        let mut p = pair(0, "a", "b");
        p.reject("length", "too_short");
        assert!(expand_directions(&[p]).unwrap().is_empty());
    }

    #[test]
    fn emission_routes_by_pair() {
        let pairs: Vec<_> = (0..40).map(|i| pair(i, &format!("s {i}"), &format!("t {i}"))).collect();
        let split = split_dataset(&pairs, 42).unwrap();
        let records = expand_directions(&pairs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = emit_sft(&records, &split, dir.path()).unwrap();
        let (tr, va, te) = split.sizes();
        assert_eq!(
            summary,
            EmitSummary {
                train: tr * 2,
                validation: va * 2,
                test: te * 2
            }
        );
        let test = fs::read_to_string(dir.path().join("test.jsonl")).unwrap();
        for line in test.lines() {
            let r: SftRecord = serde_json::from_str(line).unwrap();
            assert_eq!(split.which(r.pair_id), Some(SplitName::Test));
        }
    }
}
