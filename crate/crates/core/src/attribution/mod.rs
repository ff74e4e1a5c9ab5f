//! Word attribution: raw Integrated-Gradients tensors, their reduction to
//! word-level matrices, and the three diagnostic scores per instance.

mod format;
mod ig;
mod model;

use serde::{Deserialize, Serialize};

pub use format::{
    read_tensor, read_tensor_bytes, write_tensor, write_tensor_bytes, FORMAT_VERSION,
};
pub use ig::{integrated_gradients, Embeddings, ScalarFunction, DEFAULT_STEPS};
pub use model::{subword_tokenize, ReferenceModel, TargetScore};

use crate::corpus::WinoMtInstance;
use crate::error::{Error, Result};
use crate::lexicon::ProfessionMatch;

/// Raw scores of shape `S_r x T_r x h`, row-major (source, target, hidden).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionTensor {
    pub instance_id: String,
    pub source_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub hidden_size: usize,
    pub source_word_map: Vec<usize>,
    pub target_word_map: Vec<usize>,
    pub scores: Vec<f32>,
    /// Extra header fields (e.g. the scalar output an extractor differentiated).
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl AttributionTensor {
    pub fn source_len(&self) -> usize {
        self.source_tokens.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_tokens.len()
    }

    pub fn score(&self, source: usize, target: usize, hidden: usize) -> f32 {
        self.scores[(source * self.target_len() + target) * self.hidden_size + hidden]
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Format("hidden_size must be positive".into()));
        }
        if self.source_word_map.len() != self.source_len() {
            return Err(Error::Format(
                "source_word_map length differs from source_tokens".into(),
            ));
        }
        if self.target_word_map.len() != self.target_len() {
            return Err(Error::Format(
                "target_word_map length differs from target_tokens".into(),
            ));
        }
        check_word_map(&self.source_word_map, "source")?;
        check_word_map(&self.target_word_map, "target")?;
        let expected = self.source_len() * self.target_len() * self.hidden_size;
        if self.scores.len() != expected {
            return Err(Error::Format(format!(
                "payload holds {} values, expected {expected}",
                self.scores.len()
            )));
        }
        if let Some(pos) = self.scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite score at offset {pos}")));
        }
        Ok(())
    }

    pub fn source_words(&self) -> usize {
        self.source_word_map.last().map_or(0, |w| w + 1)
    }

    pub fn target_words(&self) -> usize {
        self.target_word_map.last().map_or(0, |w| w + 1)
    }
}

fn check_word_map(map: &[usize], side: &str) -> Result<()> {
    let Some(&first) = map.first() else {
        return Err(Error::Format(format!("{side} side has no tokens")));
    };
    if first != 0 {
        return Err(Error::Format(format!("{side}_word_map must start at 0")));
    }
    for pair in map.windows(2) {
        if pair[1] != pair[0] && pair[1] != pair[0] + 1 {
            return Err(Error::Format(format!(
                "{side}_word_map must be non-decreasing without gaps"
            )));
        }
    }
    Ok(())
}

/// Aggregated `S x T` word-level scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAttributionMatrix {
    pub source_words: usize,
    pub target_words: usize,
    pub values: Vec<f64>,
}

impl WordAttributionMatrix {
    pub fn new(source_words: usize, target_words: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != source_words * target_words {
            return Err(Error::Attribution(format!(
                "matrix payload {} does not match {source_words}x{target_words}",
                values.len()
            )));
        }
        Ok(Self {
            source_words,
            target_words,
            values,
        })
    }

    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.values[source * self.target_words + target]
    }
}

/// Signed max-abs reduction; on `|a| == |b|` the earlier element is kept.
pub fn signed_max_abs<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    values.into_iter().fold(None, |best, v| match best {
        Some(b) if f64::abs(b) >= v.abs() => Some(b),
        _ => Some(v),
    })
}

fn spans(word_map: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    for (token, &word) in word_map.iter().enumerate() {
        if word == out.len() {
            out.push(token..token + 1);
        } else {
            out[word].end = token + 1;
        }
    }
    out
}

/// Sub-token spans are collapsed with a signed max-abs (source span first,
/// then target span), then each hidden vector is replaced by its Euclidean
/// norm.
pub fn aggregate(tensor: &AttributionTensor) -> Result<WordAttributionMatrix> {
    tensor.validate()?;
    let source_spans = spans(&tensor.source_word_map);
    let target_spans = spans(&tensor.target_word_map);
    let h = tensor.hidden_size;
    let mut values = Vec::with_capacity(source_spans.len() * target_spans.len());
    let mut reduced = vec![0.0f64; h];
    for src in &source_spans {
        for tgt in &target_spans {
            for (d, slot) in reduced.iter_mut().enumerate() {
                let per_target = tgt.clone().map(|k| {
                    signed_max_abs(src.clone().map(|i| f64::from(tensor.score(i, k, d))))
                        .expect("non-empty span")
                });
                *slot = signed_max_abs(per_target).expect("non-empty span");
            }
            values.push(reduced.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    WordAttributionMatrix::new(source_spans.len(), target_spans.len(), values)
}

/// Scores toward the translated profession word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionTriple {
    /// First source word (control).
    pub a_ctrl_prof: f64,
    /// Source profession word(s).
    pub a_prof_prof: f64,
    /// Source pronoun.
    pub a_pron_prof: f64,
    pub source_prof_index: usize,
    pub source_pron_index: usize,
    pub target_prof_index: usize,
    pub matched: bool,
}

pub fn extract_triple(
    matrix: &WordAttributionMatrix,
    instance: &WinoMtInstance,
    profession_match: &ProfessionMatch,
) -> Result<AttributionTriple> {
    let target = match (profession_match.found, profession_match.word_index) {
        (true, Some(j)) => j,
        _ => return Err(Error::NotMatched(instance.id.clone())),
    };
    let (start, end) = instance.profession_span().ok_or_else(|| {
        Error::SourceAlignment(format!(
            "{}: {:?} not in source",
            instance.id, instance.target_profession
        ))
    })?;
    let pron = instance.pronoun_index;
    if end > matrix.source_words || pron >= matrix.source_words || target >= matrix.target_words {
        return Err(Error::Attribution(format!(
            "{}: indices exceed {}x{} attribution matrix",
            instance.id, matrix.source_words, matrix.target_words
        )));
    }
    let a_prof_prof =
        signed_max_abs((start..end).map(|i| matrix.get(i, target))).expect("non-empty span");
    Ok(AttributionTriple {
        a_ctrl_prof: matrix.get(0, target),
        a_prof_prof,
        a_pron_prof: matrix.get(pron, target),
        source_prof_index: end - 1,
        source_pron_index: pron,
        target_prof_index: target,
        matched: true,
    })
}
