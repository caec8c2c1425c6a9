use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// A language code paired with the English name used when rendering prompts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageTag {
    code: String,
    display_name: String,
}

impl LanguageTag {
    pub fn new(code: impl Into<String>, display_name: impl Into<String>) -> Result<Self, CorpusError> {
        let code = code.into();
        let display_name = display_name.into();
        if code.is_empty()
            || !code
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        {
            return Err(CorpusError::InvalidLanguage(format!(
                "language code {code:?} must be non-empty lowercase ASCII"
            )));
        }
        if display_name.trim().is_empty() {
            return Err(CorpusError::InvalidLanguage(format!(
                "language {code:?} has an empty display name"
            )));
        }
        Ok(Self { code, display_name })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

/// Code to display-name map. Names must be unique so prompt prefixes can be
/// mapped back to codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguageRegistry {
    by_code: BTreeMap<String, LanguageTag>,
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::from_pairs([
            ("en", "English"),
            ("id", "Indonesian"),
            ("ban", "Balinese"),
            ("min", "Minangkabau"),
        ])
        .expect("default language map is valid")
    }
}

impl LanguageRegistry {
    pub fn from_pairs<I, C, N>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (C, N)>,
        C: Into<String>,
        N: Into<String>,
    {
        let mut by_code = BTreeMap::new();
        let mut names = BTreeMap::new();
        for (code, name) in pairs {
            let tag = LanguageTag::new(code, name)?;
            if let Some(prev) = names.insert(tag.display_name.clone(), tag.code.clone()) {
                return Err(CorpusError::InvalidLanguage(format!(
                    "display name {:?} is shared by {prev:?} and {:?}",
                    tag.display_name, tag.code
                )));
            }
            if by_code.insert(tag.code.clone(), tag.clone()).is_some() {
                return Err(CorpusError::InvalidLanguage(format!(
                    "language code {:?} declared twice",
                    tag.code
                )));
            }
        }
        Ok(Self { by_code })
    }

    pub fn get(&self, code: &str) -> Result<&LanguageTag, CorpusError> {
        self.by_code
            .get(code)
            .ok_or_else(|| CorpusError::UnknownLanguage(code.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Option<&LanguageTag> {
        self.by_code.values().find(|t| t.display_name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageTag> {
        self.by_code.values()
    }

    pub fn len(&self) -> usize {
        self.by_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_code.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub id: u64,
    pub text: String,
    pub lang: LanguageTag,
    pub origin: String,
}

impl Sentence {
    pub fn new(id: u64, text: impl Into<String>, lang: LanguageTag, origin: impl Into<String>) -> Self {
        Self {
            id,
            text: text.into(),
            lang,
            origin: origin.into(),
        }
    }
}

/// Sentence ids inside a bitext: the source of pair `p` is `2p`, the target `2p + 1`.
pub fn src_sentence_id(pair_id: u64) -> u64 {
    pair_id * 2
}

pub fn tgt_sentence_id(pair_id: u64) -> u64 {
    pair_id * 2 + 1
}

/// Lifecycle of a pair through the pipeline.
///
/// Serialized as `raw`, `passed`, `rejected:<stage>:<reason>`, `cleaned`,
/// `unverified` or `synthetic:<from>><to>` where `from` is the authentic
/// (monolingual) language and `to` the generated one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Raw,
    Passed,
    Rejected { stage: String, reason: String },
    Cleaned,
    Unverified,
    Synthetic { from: String, to: String },
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Raw => f.write_str("raw"),
            Status::Passed => f.write_str("passed"),
            Status::Rejected { stage, reason } => write!(f, "rejected:{stage}:{reason}"),
            Status::Cleaned => f.write_str("cleaned"),
            Status::Unverified => f.write_str("unverified"),
            Status::Synthetic { from, to } => write!(f, "synthetic:{from}>{to}"),
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => return Ok(Status::Raw),
            "passed" => return Ok(Status::Passed),
            "cleaned" => return Ok(Status::Cleaned),
            "unverified" => return Ok(Status::Unverified),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("rejected:") {
            let (stage, reason) = rest
                .split_once(':')
                .ok_or_else(|| format!("rejected status {s:?} needs stage and reason"))?;
            if stage.is_empty() || reason.is_empty() {
                return Err(format!("rejected status {s:?} needs stage and reason"));
            }
            return Ok(Status::Rejected {
                stage: stage.to_string(),
                reason: reason.to_string(),
            });
        }
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let (from, to) = rest
                .split_once('>')
                .ok_or_else(|| format!("synthetic status {s:?} needs a direction"))?;
            if from.is_empty() || to.is_empty() {
                return Err(format!("synthetic status {s:?} needs a direction"));
            }
            return Ok(Status::Synthetic {
                from: from.to_string(),
                to: to.to_string(),
            });
        }
        Err(format!("unknown status {s:?}"))
    }
}

impl Serialize for Status {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Status {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentencePair {
    pub id: u64,
    pub src: Sentence,
    pub tgt: Sentence,
    pub scores: BTreeMap<String, f64>,
    pub status: Status,
}

impl SentencePair {
    pub fn new(
        id: u64,
        src_text: impl Into<String>,
        src_lang: LanguageTag,
        tgt_text: impl Into<String>,
        tgt_lang: LanguageTag,
        origin: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        if src_lang.code() == tgt_lang.code() {
            return Err(CorpusError::SameLanguage(src_lang.code().to_string()));
        }
        let origin = origin.into();
        Ok(Self {
            id,
            src: Sentence::new(src_sentence_id(id), src_text, src_lang, origin.clone()),
            tgt: Sentence::new(tgt_sentence_id(id), tgt_text, tgt_lang, origin),
            scores: BTreeMap::new(),
            status: Status::Raw,
        })
    }

    pub fn origin(&self) -> &str {
        &self.src.origin
    }

    /// Renumbers the pair and both of its sentences.
    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self.src.id = src_sentence_id(id);
        self.tgt.id = tgt_sentence_id(id);
        self
    }

    /// Unordered language pair key such as `ban-en`.
    pub fn lang_pair(&self) -> String {
        let (a, b) = (self.src.lang.code(), self.tgt.lang.code());
        if a <= b {
            format!("{a}-{b}")
        } else {
            format!("{b}-{a}")
        }
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self.status, Status::Rejected { .. })
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.status, Status::Synthetic { .. })
    }

    pub fn mark_passed(&mut self) {
        if matches!(self.status, Status::Raw) {
            self.status = Status::Passed;
        }
    }

    /// First rejection wins; a rejected pair is never revived.
    pub fn reject(&mut self, stage: &str, reason: &str) {
        if !self.is_rejected() {
            self.status = Status::Rejected {
                stage: stage.to_string(),
                reason: reason.to_string(),
            };
        }
    }

    /// Replaces both texts. Synthetic pairs keep their status so the
    /// generation direction survives cleaning.
    pub fn mark_cleaned(&mut self, src_text: String, tgt_text: String) {
        if self.is_rejected() {
            return;
        }
        self.src.text = src_text;
        self.tgt.text = tgt_text;
        if !self.is_synthetic() {
            self.status = Status::Cleaned;
        }
    }

    pub fn mark_unverified(&mut self) {
        if self.is_rejected() {
            return;
        }
        self.scores.insert("cleaner_unverified".to_string(), 1.0);
        if !self.is_synthetic() {
            self.status = Status::Unverified;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(code: &str, name: &str) -> LanguageTag {
        LanguageTag::new(code, name).unwrap()
    }

    #[test]
    fn language_codes_are_lowercase_ascii() {
        assert!(LanguageTag::new("BAN", "Balinese").is_err());
        assert!(LanguageTag::new("", "Balinese").is_err());
        assert!(LanguageTag::new("ban", " ").is_err());
        assert_eq!(tag("ban", "Balinese").display_name(), "Balinese");
    }

    #[test]
    fn registry_rejects_shared_names() {
        let err = LanguageRegistry::from_pairs([("en", "English"), ("eng", "English")]);
        assert!(err.is_err());
        let reg = LanguageRegistry::default();
        assert_eq!(reg.get("min").unwrap().display_name(), "Minangkabau");
        assert_eq!(reg.by_name("Indonesian").unwrap().code(), "id");
        assert!(reg.get("xx").is_err());
    }

    #[test]
    fn status_strings_round_trip() {
        for s in [
            Status::Raw,
            Status::Passed,
            Status::Cleaned,
            Status::Unverified,
            Status::Rejected {
                stage: "length".into(),
                reason: "too_short".into(),
            },
            Status::Synthetic {
                from: "ban".into(),
                to: "en".into(),
            },
        ] {
            assert_eq!(s.to_string().parse::<Status>().unwrap(), s);
        }
        assert!("rejected:length".parse::<Status>().is_err());
        assert!("bogus".parse::<Status>().is_err());
    }

    #[test]
    fn rejection_is_terminal() {
        let mut p = SentencePair::new(3, "a", tag("en", "English"), "b", tag("ban", "Balinese"), "t").unwrap();
        assert_eq!((p.src.id, p.tgt.id), (6, 7));
        p.mark_passed();
        assert_eq!(p.status, Status::Passed);
        p.reject("length", "too_short");
        p.reject("lid", "lid_src");
        p.mark_passed();
        p.mark_cleaned("x".into(), "y".into());
        assert_eq!(
            p.status,
            Status::Rejected {
                stage: "length".into(),
                reason: "too_short".into()
            }
        );
        assert_eq!(p.src.text, "a");
    }

    #[test]
    fn synthetic_survives_cleaning() {
        let mut p = SentencePair::new(0, "gen", tag("en", "English"), "auth", tag("ban", "Balinese"), "wiki").unwrap();
        p.status = Status::Synthetic {
            from: "ban".into(),
            to: "en".into(),
        };
        p.mark_passed();
        p.mark_cleaned("gen2".into(), "auth2".into());
        assert!(p.is_synthetic());
        p.mark_unverified();
        assert!(p.is_synthetic());
        assert_eq!(p.scores["cleaner_unverified"], 1.0);
    }

    #[test]
    fn same_language_pairs_are_refused() {
        let en = tag("en", "English");
        assert!(SentencePair::new(0, "a", en.clone(), "b", en, "o").is_err());
    }

    #[test]
    fn lang_pair_is_unordered() {
        let p = SentencePair::new(0, "a", tag("en", "English"), "b", tag("ban", "Balinese"), "o").unwrap();
        assert_eq!(p.lang_pair(), "ban-en");
    }
}
