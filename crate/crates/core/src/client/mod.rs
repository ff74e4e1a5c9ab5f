//! Translation backends: an HTTP model-serving endpoint, offline
//! translation files, and deterministic mock translators.

mod cache;
mod http;
mod mock;
mod template;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::TranslationCache;
pub use http::{HttpBackend, ENDPOINT_ENV, TOKEN_ENV};
pub use mock::{MockRule, MockTranslator};
pub use template::{language_name, PromptTemplate};

use crate::corpus::WinoMtInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Beam,
    TopK,
    TopP,
    Contrastive,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "greedy" => Ok(Strategy::Greedy),
            "beam" => Ok(Strategy::Beam),
            "top_k" => Ok(Strategy::TopK),
            "top_p" => Ok(Strategy::TopP),
            "contrastive" => Ok(Strategy::Contrastive),
            other => Err(Error::Config(format!(
                "unknown decoding strategy {other:?}"
            ))),
        }
    }
}

/// Decoding parameters passed through to the serving backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub strategy: Strategy,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_beams: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top_k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalty_alpha: Option<f64>,
    pub max_tokens: u32,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Beam,
            num_beams: Some(4),
            top_k: None,
            top_p: None,
            temperature: None,
            penalty_alpha: None,
            max_tokens: 256,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<()> {
        let missing = |field: &str| {
            Err(Error::Config(format!(
                "{:?} decoding needs {field}",
                self.strategy
            )))
        };
        match self.strategy {
            Strategy::Greedy => {}
            Strategy::Beam if self.num_beams.is_none() => return missing("num_beams"),
            Strategy::TopK if self.top_k.is_none() => return missing("top_k"),
            Strategy::TopP if self.top_p.is_none() => return missing("top_p"),
            Strategy::Contrastive if self.top_k.is_none() || self.penalty_alpha.is_none() => {
                return missing("top_k and penalty_alpha")
            }
            _ => {}
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// One prompt to translate. The instance is required by mock backends.
#[derive(Debug, Clone)]
pub struct TranslationRequest {
    pub instance_id: String,
    pub prompt: String,
    pub instance: Option<WinoMtInstance>,
}

impl TranslationRequest {
    pub fn from_template(
        instance: &WinoMtInstance,
        template: PromptTemplate,
        src_lang: &str,
        tgt_lang: &str,
    ) -> Self {
        Self {
            instance_id: instance.id.clone(),
            prompt: template.render(&instance.source_text, src_lang, tgt_lang),
            instance: Some(instance.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub instance_id: String,
    pub prompt_digest: String,
    pub output: String,
    pub backend: String,
    pub decoding: DecodingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// SHA-256 over the prompt bytes, a 0x1F separator and the JSON-serialized config.
pub fn prompt_digest(prompt: &str, decoding: &DecodingConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0x1f]);
    hasher.update(serde_json::to_vec(decoding).expect("config serializes"));
    hex::encode(hasher.finalize())
}

pub enum Backend {
    Http(HttpBackend),
    Offline(BTreeMap<String, String>),
    Mock(MockTranslator),
}

impl Backend {
    pub fn tag(&self) -> String {
        match self {
            Backend::Http(h) => format!("http:{}", h.url()),
            Backend::Offline(_) => "offline".into(),
            Backend::Mock(m) => format!("mock:{}", m.rule().name()),
        }
    }
}

/// Translates every request, returning records in input order.
///
/// Offline mode fails as a whole when ids are missing. HTTP failures are
/// recorded per item after retries are exhausted.
pub fn translate_batch(
    requests: &[TranslationRequest],
    decoding: &DecodingConfig,
    backend: &Backend,
    cache: Option<&TranslationCache>,
) -> Result<Vec<TranslationRecord>> {
    decoding.validate()?;
    let tag = backend.tag();
    let digests: Vec<String> = requests
        .iter()
        .map(|r| prompt_digest(&r.prompt, decoding))
        .collect();
    let outputs: Vec<std::result::Result<String, String>> = match backend {
        Backend::Offline(map) => {
            let missing: Vec<String> = requests
                .iter()
                .filter(|r| !map.contains_key(&r.instance_id))
                .map(|r| r.instance_id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingIds(missing));
            }
            requests
                .iter()
                .map(|r| Ok(map[&r.instance_id].clone()))
                .collect()
        }
        Backend::Mock(mock) => requests
            .iter()
            .map(|r| match &r.instance {
                Some(instance) => mock.translate(instance).map_err(|e| e.to_string()),
                None => Err(format!(
                    "{}: mock backend needs the corpus instance",
                    r.instance_id
                )),
            })
            .collect(),
        Backend::Http(http) => http.translate_all(requests, &digests, decoding, cache),
    };
    Ok(requests
        .iter()
        .zip(digests)
        .zip(outputs)
        .map(|((request, digest), output)| {
            let (output, error) = match output {
                Ok(text) => {
                    if text.trim().is_empty() {
                        log::warn!("{}: empty model output", request.instance_id);
                    }
                    (text, None)
                }
                Err(e) => (String::new(), Some(e)),
            };
            TranslationRecord {
                instance_id: request.instance_id.clone(),
                prompt_digest: digest,
                output,
                backend: tag.clone(),
                decoding: decoding.clone(),
                error,
            }
        })
        .collect())
}

/// Reads `instance_id<TAB>translation`; the translation is taken verbatim.
pub fn load_offline_translations(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading translations {}", path.display()), e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((id, translation)) = line.split_once('\t') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected instance_id<TAB>translation".into(),
            });
        };
        if out
            .insert(id.to_string(), translation.to_string())
            .is_some()
        {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("duplicate id {id}"),
            });
        }
    }
    Ok(out)
}

/// Offline-format TSV. Tabs and line breaks inside outputs become spaces.
pub fn translations_tsv(records: &[TranslationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let clean: String = r
            .output
            .chars()
            .map(|c| {
                if matches!(c, '\t' | '\n' | '\r') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        if clean != r.output {
            log::warn!(
                "{}: tabs/newlines in output replaced by spaces",
                r.instance_id
            );
        }
        out.push_str(&r.instance_id);
        out.push('\t');
        out.push_str(&clean);
        out.push('\n');
    }
    out
}
