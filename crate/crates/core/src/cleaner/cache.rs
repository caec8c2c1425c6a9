use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::prompt_digest;
use super::TEMPLATE_VERSION;

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    response: String,
}

/// Parsed-OK responses keyed by template version and prompt, optionally
/// persisted as append-only JSONL.
pub struct ResponseCache {
    entries: Mutex<HashMap<String, String>>,
    sink: Mutex<Option<BufWriter<File>>>,
    path: Option<PathBuf>,
}

pub fn cache_key(prompt: &str) -> String {
    prompt_digest(&format!("{TEMPLATE_VERSION}\n{prompt}"))
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            sink: Mutex::new(None),
            path: None,
        }
    }

    /// Loads existing entries and appends new ones to `path`. A torn last
    /// line from an interrupted run is skipped.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if let Ok(rec) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.insert(rec.key, rec.response);
                }
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let torn = {
            let mut f = File::open(path)?;
            let len = f.metadata()?.len();
            let mut last = *b"\n";
            if len > 0 {
                f.seek(SeekFrom::End(-1))?;
                f.read_exact(&mut last)?;
            }
            last[0] != b'\n'
        };
        if torn {
            file.write_all(b"\n")?;
        }
        Ok(Self {
            entries: Mutex::new(entries),
            sink: Mutex::new(Some(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: &str, response: &str) -> std::io::Result<()> {
        let fresh = self
            .entries
            .lock()
            .unwrap()
            .insert(key.to_string(), response.to_string())
            .is_none();
        if fresh {
            if let Some(sink) = self.sink.lock().unwrap().as_mut() {
                let rec = CacheRecord {
                    key: key.to_string(),
                    response: response.to_string(),
                };
                serde_json::to_writer(&mut *sink, &rec)?;
                sink.write_all(b"\n")?;
                sink.flush()?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
