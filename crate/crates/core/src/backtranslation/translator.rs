use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::corpus::LanguageTag;
use crate::transport::{agent, env_var, post_json, BackendError};

pub const TRANSLATOR_API_URL: &str = "TRANSLATOR_API_URL";

/// Translates a chunk of texts; the output has the same length and order.
pub trait TranslatorBackend: Send + Sync {
    fn translate(&self, texts: &[String], from: &LanguageTag, to: &LanguageTag) -> Result<Vec<String>, BackendError>;
}

impl<T: TranslatorBackend + ?Sized> TranslatorBackend for &T {
    fn translate(&self, texts: &[String], from: &LanguageTag, to: &LanguageTag) -> Result<Vec<String>, BackendError> {
        (**self).translate(texts, from, to)
    }
}

impl<T: TranslatorBackend + ?Sized> TranslatorBackend for Box<T> {
    fn translate(&self, texts: &[String], from: &LanguageTag, to: &LanguageTag) -> Result<Vec<String>, BackendError> {
        (**self).translate(texts, from, to)
    }
}

/// `POST {"src_lang", "tgt_lang", "texts"}` answered by `{"translations"}`.
pub struct HttpTranslator {
    url: String,
    agent: ureq::Agent,
}

impl HttpTranslator {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            agent: agent(Duration::from_secs(300)),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Ok(Self::new(env_var(TRANSLATOR_API_URL)?))
    }
}

impl TranslatorBackend for HttpTranslator {
    fn translate(&self, texts: &[String], from: &LanguageTag, to: &LanguageTag) -> Result<Vec<String>, BackendError> {
        let body = json!({"src_lang": from.code(), "tgt_lang": to.code(), "texts": texts});
        let resp = post_json(&self.agent, &self.url, None, &body)?;
        let out: Vec<String> = resp
            .get("translations")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .ok_or_else(|| BackendError::Protocol("response has no translations array".to_string()))?;
        if out.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "sent {} texts, received {} translations",
                texts.len(),
                out.len()
            )));
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct ReplayRecord {
    text: String,
    translation: String,
}

/// Recorded translations from JSONL `{"text", "translation"}` lines. A chunk
/// containing an unknown text fails as a whole.
#[derive(Clone, Debug, Default)]
pub struct ReplayTranslator {
    table: HashMap<String, String>,
}

impl ReplayTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, text: impl Into<String>, translation: impl Into<String>) {
        self.table.insert(text.into(), translation.into());
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut out = Self::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?;
            out.table.insert(rec.text, rec.translation);
        }
        Ok(out)
    }
}

impl TranslatorBackend for ReplayTranslator {
    fn translate(&self, texts: &[String], _from: &LanguageTag, _to: &LanguageTag) -> Result<Vec<String>, BackendError> {
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| BackendError::Missing(format!("no translation for {t:?}")))
            })
            .collect()
    }
}
