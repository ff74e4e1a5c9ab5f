//! Stage glue shared by the command-line tool and the integration tests:
//! corpus-level matching and attribution, record assembly, and JSON-lines
//! files that carry results between stages.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    aggregate, extract_triple, read_tensor, AttributionTensor, AttributionTriple, ReferenceModel,
};
use crate::corpus::{Corpus, Gender};
use crate::error::{Error, Result};
use crate::gnt::GntRecord;
use crate::lexicon::{GenderLexicon, ProfessionMatch};
use crate::metrics::EvaluationRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub instance_id: String,
    pub translation: String,
    pub profession_match: ProfessionMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub instance_id: String,
    pub triple: Option<AttributionTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Matches every corpus instance's translation against the lexicon.
pub fn match_corpus(
    corpus: &Corpus,
    lexicon: &GenderLexicon,
    translations: &BTreeMap<String, String>,
) -> Result<Vec<MatchRecord>> {
    let missing: Vec<String> = corpus
        .instances()
        .iter()
        .filter(|i| !translations.contains_key(&i.id))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let mut unknown: Vec<String> = corpus
        .instances()
        .iter()
        .filter(|i| lexicon.get(&i.target_profession).is_none())
        .map(|i| i.target_profession.to_lowercase())
        .collect();
    unknown.sort();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(Error::Lexicon(format!(
            "professions missing from lexicon: {}",
            unknown.join(", ")
        )));
    }
    corpus
        .instances()
        .iter()
        .map(|i| {
            let translation = translations[&i.id].clone();
            let profession_match = lexicon.match_profession(&translation, &i.target_profession)?;
            Ok(MatchRecord {
                instance_id: i.id.clone(),
                translation,
                profession_match,
            })
        })
        .collect()
}

fn triple_for(
    corpus: &Corpus,
    m: &MatchRecord,
    tensor: impl FnOnce() -> Result<AttributionTensor>,
) -> TripleRecord {
    let result = (|| {
        if !m.profession_match.found {
            return Ok(None);
        }
        let instance = corpus
            .get(&m.instance_id)
            .ok_or_else(|| Error::MissingIds(vec![m.instance_id.clone()]))?;
        let matrix = aggregate(&tensor()?)?;
        extract_triple(&matrix, instance, &m.profession_match).map(Some)
    })();
    match result {
        Ok(triple) => TripleRecord {
            instance_id: m.instance_id.clone(),
            triple,
            error: None,
        },
        Err(e) => TripleRecord {
            instance_id: m.instance_id.clone(),
            triple: None,
            error: Some(format!("{}: {e}", e.kind())),
        },
    }
}

/// Runs the reference model over matched instances in parallel; output order follows `matches`.
pub fn attribute_with_model(
    corpus: &Corpus,
    matches: &[MatchRecord],
    model: &ReferenceModel,
    steps: usize,
) -> Vec<TripleRecord> {
    matches
        .par_iter()
        .map(|m| {
            triple_for(corpus, m, || {
                let instance = corpus.get(&m.instance_id).expect("checked by triple_for");
                model.attribute(&m.instance_id, &instance.source_text, &m.translation, steps)
            })
        })
        .collect()
}

/// Aggregates `.attr` files found in `dir`, keyed by the instance id in their headers.
pub fn attribute_from_tensors(
    corpus: &Corpus,
    matches: &[MatchRecord],
    dir: impl AsRef<Path>,
) -> Result<Vec<TripleRecord>> {
    let dir = dir.as_ref();
    let mut files = HashMap::new();
    let entries =
        std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    for entry in entries {
        let path = entry
            .map_err(|e| Error::io("reading directory entry", e))?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some("attr") {
            continue;
        }
        let tensor =
            read_tensor(&path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        files.insert(tensor.instance_id.clone(), tensor);
    }
    Ok(matches
        .iter()
        .map(|m| {
            triple_for(corpus, m, || {
                files
                    .get(&m.instance_id)
                    .cloned()
                    .ok_or_else(|| Error::MissingIds(vec![format!("{}.attr", m.instance_id)]))
            })
        })
        .collect())
}

/// Joins matches and (optional) triples into evaluation records for gendered instances.
pub fn evaluation_records(
    corpus: &Corpus,
    matches: &[MatchRecord],
    triples: Option<&[TripleRecord]>,
) -> Result<Vec<EvaluationRecord>> {
    let triples: HashMap<&str, &TripleRecord> = triples
        .unwrap_or_default()
        .iter()
        .map(|t| (t.instance_id.as_str(), t))
        .collect();
    matches
        .iter()
        .filter_map(|m| {
            let instance = match corpus.get(&m.instance_id) {
                Some(i) => i,
                None => return Some(Err(Error::MissingIds(vec![m.instance_id.clone()]))),
            };
            if instance.gold_gender == Gender::Neutral {
                return None;
            }
            let triple = triples
                .get(m.instance_id.as_str())
                .and_then(|t| t.triple.clone());
            Some(Ok(EvaluationRecord::from_match(
                instance,
                &m.profession_match,
                triple,
            )))
        })
        .collect()
}

/// Neutral-referent instances with their match outcome.
pub fn gnt_records(
    corpus: &Corpus,
    matches: &[MatchRecord],
    triples: Option<&[TripleRecord]>,
) -> Vec<GntRecord> {
    let triples: HashMap<&str, &TripleRecord> = triples
        .unwrap_or_default()
        .iter()
        .map(|t| (t.instance_id.as_str(), t))
        .collect();
    matches
        .iter()
        .filter_map(|m| {
            let instance = corpus.get(&m.instance_id)?;
            (instance.gold_gender == Gender::Neutral).then(|| GntRecord {
                instance_id: m.instance_id.clone(),
                gold_gender: instance.gold_gender,
                profession_match: m.profession_match.clone(),
                triple: triples
                    .get(m.instance_id.as_str())
                    .and_then(|t| t.triple.clone()),
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
