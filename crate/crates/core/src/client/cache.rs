use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Append-only store of `digest<TAB>json-string-output` lines.
///
/// Later lines win when a digest repeats. Writes are serialized.
#[derive(Debug)]
pub struct TranslationCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

#[derive(Debug)]
struct Inner {
    entries: HashMap<String, String>,
    file: Option<File>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(format!("reading cache {}", path.display()), e))?;
            for (n, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let parsed = line
                    .split_once('\t')
                    .and_then(|(d, o)| serde_json::from_str::<String>(o).ok().map(|o| (d, o)));
                match parsed {
                    Some((digest, output)) => {
                        entries.insert(digest.to_string(), output);
                    }
                    None => {
                        return Err(Error::Parse {
                            path: path.clone(),
                            line: n + 1,
                            message: "malformed cache line".into(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(format!("opening cache {}", path.display()), e))?;
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(Inner {
                entries,
                file: Some(file),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.inner
            .lock()
            .expect("cache lock")
            .entries
            .get(digest)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, digest: &str, output: &str) -> Result<()> {
        let mut inner = self.inner.lock().expect("cache lock");
        if let Some(file) = inner.file.as_mut() {
            let line = format!("{digest}\t{}\n", serde_json::to_string(output)?);
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| Error::io("appending to cache", e))?;
        }
        inner.entries.insert(digest.to_string(), output.to_string());
        Ok(())
    }
}
