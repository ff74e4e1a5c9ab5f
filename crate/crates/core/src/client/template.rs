use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptTemplate {
    /// `{src_text} Translate this to {tgt_lang}?`
    T1,
    /// `Translate from {src_lang} to {tgt_lang}:\n\n{src_text}\n\n{tgt_lang}:`
    T2,
    /// Q/A shape shared with the few-shot prompts.
    QA,
}

impl PromptTemplate {
    pub fn pattern(self) -> &'static str {
        match self {
            PromptTemplate::T1 => "{src_text} Translate this to {tgt_lang}?",
            PromptTemplate::T2 => {
                "Translate from {src_lang} to {tgt_lang}:\n\n{src_text}\n\n{tgt_lang}:"
            }
            PromptTemplate::QA => "Q: Translate {src_text} to {tgt_lang}?\n\nA:",
        }
    }

    pub fn render(self, src_text: &str, src_lang: &str, tgt_lang: &str) -> String {
        // Substitute the text last so braces inside it are left alone.
        self.pattern()
            .replace("{src_lang}", src_lang)
            .replace("{tgt_lang}", tgt_lang)
            .replace("{src_text}", src_text)
    }

    pub fn id(self) -> &'static str {
        match self {
            PromptTemplate::T1 => "T1",
            PromptTemplate::T2 => "T2",
            PromptTemplate::QA => "QA",
        }
    }
}

impl std::str::FromStr for PromptTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(PromptTemplate::T1),
            "T2" => Ok(PromptTemplate::T2),
            "QA" => Ok(PromptTemplate::QA),
            other => Err(Error::Config(format!("unknown template {other:?}"))),
        }
    }
}

/// English name for a language code, as used inside prompts.
pub fn language_name(code: &str) -> String {
    match code.to_ascii_lowercase().as_str() {
        "en" => "English".into(),
        "es" => "Spanish".into(),
        "de" => "German".into(),
        "fr" => "French".into(),
        "it" => "Italian".into(),
        "pt" => "Portuguese".into(),
        _ => code.to_string(),
    }
}
