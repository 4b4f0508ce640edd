//! Translator backends: a dictionary stub for tests and offline runs, an
//! HTTP endpoint client, and an external-process bridge for local models.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::MtError;

/// Source text in, translated text out.
pub trait TranslatorAdapter {
    fn translate(&self, source: &str) -> Result<String, MtError>;
}

/// Wraps a `source<TAB>target` dictionary file; anything not in the
/// dictionary passes through unchanged (identity fallback).
#[derive(Debug, Default, Clone)]
pub struct DictTranslator {
    entries: HashMap<String, String>,
}

impl DictTranslator {
    pub fn new(entries: HashMap<String, String>) -> Self {
        Self { entries }
    }

    pub fn from_tsv(path: &Path) -> Result<Self, MtError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (src, tgt) = line.split_once('\t').ok_or_else(|| {
                MtError::Backend(format!(
                    "{}:{}: expected 'source<TAB>target'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.insert(src.to_string(), tgt.to_string());
        }
        Ok(Self::new(entries))
    }
}

impl TranslatorAdapter for DictTranslator {
    fn translate(&self, source: &str) -> Result<String, MtError> {
        Ok(self
            .entries
            .get(source)
            .cloned()
            .unwrap_or_else(|| source.to_string()))
    }
}

/// POSTs `{"text": ...}` to an HTTP endpoint and reads `{"translation": ...}`.
pub struct HttpTranslator {
    url: String,
    agent: ureq::Agent,
}

impl HttpTranslator {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            agent: ureq::Agent::new(),
        }
    }
}

impl TranslatorAdapter for HttpTranslator {
    fn translate(&self, source: &str) -> Result<String, MtError> {
        let response = self
            .agent
            .post(&self.url)
            .send_json(ureq::json!({ "text": source }))
            .map_err(|e| MtError::Backend(format!("POST {}: {e}", self.url)))?;
        let body: serde_json::Value = response
            .into_json()
            .map_err(|e| MtError::Backend(format!("{}: bad JSON response: {e}", self.url)))?;
        body.get("translation")
            .and_then(|v| v.as_str())
            .map(|s| s.to_string())
            .ok_or_else(|| {
                MtError::Backend(format!("{}: response missing \"translation\"", self.url))
            })
    }
}

/// Bridges to a local model served by an external program: the source
/// text goes to the program's stdin, the translation comes back on
/// stdout. One process per call keeps the contract trivial.
pub struct CommandTranslator {
    program: PathBuf,
}

impl CommandTranslator {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl TranslatorAdapter for CommandTranslator {
    fn translate(&self, source: &str) -> Result<String, MtError> {
        use std::io::Write;
        let mut child = Command::new(&self.program)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MtError::Backend(format!("{}: {e}", self.program.display())))?;
        child
            .stdin
            .take()
            .expect("stdin piped")
            .write_all(source.as_bytes())
            .map_err(|e| MtError::Backend(format!("{}: stdin: {e}", self.program.display())))?;
        let output = child
            .wait_with_output()
            .map_err(|e| MtError::Backend(format!("{}: {e}", self.program.display())))?;
        if !output.status.success() {
            return Err(MtError::Backend(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&output.stdout)
            .trim_end_matches('\n')
            .to_string())
    }
}
