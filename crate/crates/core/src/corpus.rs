//! WinoMT-style bias corpora.
//!
//! One instance per line, tab separated:
//!
//! ```text
//! gender <TAB> pronoun_index <TAB> sentence <TAB> profession [<TAB> pro|anti|none]
//! ```
//!
//! `pronoun_index` is a 0-based index into the whitespace words of the
//! sentence. Instance ids are `line:<n>` with `n` the 1-based line number.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pronouns accepted at the annotated pronoun position.
pub const PRONOUNS: [&str; 9] = [
    "he", "she", "his", "her", "him", "hers", "they", "them", "their",
];
pub const NEUTRAL_PRONOUNS: [&str; 3] = ["they", "them", "their"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Neutral,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            "neutral" => Ok(Gender::Neutral),
            other => Err(format!("unknown gender token {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stereotype {
    Pro,
    Anti,
    None,
}

impl Stereotype {
    pub fn as_str(self) -> &'static str {
        match self {
            Stereotype::Pro => "pro",
            Stereotype::Anti => "anti",
            Stereotype::None => "none",
        }
    }
}

impl fmt::Display for Stereotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stereotype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pro" => Ok(Stereotype::Pro),
            "anti" => Ok(Stereotype::Anti),
            "none" => Ok(Stereotype::None),
            other => Err(format!("unknown stereotype tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinoMtInstance {
    pub id: String,
    pub gold_gender: Gender,
    pub pronoun_index: usize,
    pub source_text: String,
    pub target_profession: String,
    pub stereotype: Stereotype,
    /// Whether the stereotype came from a fifth column (kept for round-trips).
    #[serde(skip)]
    pub(crate) tag_column: bool,
}

impl WinoMtInstance {
    pub fn new(
        id: impl Into<String>,
        gold_gender: Gender,
        pronoun_index: usize,
        source_text: impl Into<String>,
        target_profession: impl Into<String>,
        stereotype: Stereotype,
    ) -> Result<Self> {
        let instance = Self {
            id: id.into(),
            gold_gender,
            pronoun_index,
            source_text: source_text.into(),
            target_profession: target_profession.into(),
            stereotype,
            tag_column: true,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn words(&self) -> Vec<&str> {
        words(&self.source_text)
    }

    pub fn pronoun(&self) -> String {
        normalize_word(self.words()[self.pronoun_index])
    }

    /// Word span `[start, end)` of the first case-insensitive occurrence of
    /// the target profession in the source sentence.
    pub fn profession_span(&self) -> Option<(usize, usize)> {
        let haystack: Vec<String> = self.words().into_iter().map(normalize_word).collect();
        let needle: Vec<String> = words(&self.target_profession)
            .into_iter()
            .map(normalize_word)
            .collect();
        find_span(&haystack, &needle).map(|start| (start, start + needle.len()))
    }

    pub fn validate(&self) -> Result<()> {
        let ws = self.words();
        if self.pronoun_index >= ws.len() {
            return Err(Error::Validation(format!(
                "{}: pronoun index {} out of bounds for {} words",
                self.id,
                self.pronoun_index,
                ws.len()
            )));
        }
        let pronoun = normalize_word(ws[self.pronoun_index]);
        if !PRONOUNS.contains(&pronoun.as_str()) {
            return Err(Error::Validation(format!(
                "{}: word {:?} at index {} is not a pronoun",
                self.id, ws[self.pronoun_index], self.pronoun_index
            )));
        }
        let neutral_pronoun = NEUTRAL_PRONOUNS.contains(&pronoun.as_str());
        if neutral_pronoun != (self.gold_gender == Gender::Neutral) {
            return Err(Error::Validation(format!(
                "{}: gold gender {} inconsistent with pronoun {:?}",
                self.id, self.gold_gender, pronoun
            )));
        }
        if words(&self.target_profession).is_empty() || self.profession_span().is_none() {
            return Err(Error::Validation(format!(
                "{}: profession {:?} not found in sentence",
                self.id, self.target_profession
            )));
        }
        if self.stereotype == Stereotype::None && self.gold_gender != Gender::Neutral {
            return Err(Error::Validation(format!(
                "{}: gendered instance without pro/anti tag",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub language_pair: (String, String),
    instances: Vec<WinoMtInstance>,
}

impl Corpus {
    /// Builds a corpus from already-constructed instances, rejecting duplicate ids.
    pub fn new(language_pair: (String, String), instances: Vec<WinoMtInstance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for instance in &instances {
            instance.validate()?;
            if !seen.insert(instance.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate instance id {}",
                    instance.id
                )));
            }
        }
        Ok(Self {
            language_pair,
            instances,
        })
    }

    pub fn instances(&self) -> &[WinoMtInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&WinoMtInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn index(&self) -> BTreeMap<&str, &WinoMtInstance> {
        self.instances.iter().map(|i| (i.id.as_str(), i)).collect()
    }

    /// Instance count for one (gold gender, stereotype) cell.
    pub fn count(&self, gender: Gender, stereotype: Stereotype) -> usize {
        self.instances
            .iter()
            .filter(|i| i.gold_gender == gender && i.stereotype == stereotype)
            .count()
    }

    pub fn cell_counts(&self) -> BTreeMap<(Gender, Stereotype), usize> {
        let mut counts = BTreeMap::new();
        for i in &self.instances {
            *counts.entry((i.gold_gender, i.stereotype)).or_insert(0) += 1;
        }
        counts
    }

    /// Concatenates corpora (e.g. separately tagged pro and anti subsets).
    /// Ids are prefixed with `prefixes[k]/` when they would otherwise collide.
    pub fn merge(parts: Vec<(String, Corpus)>) -> Result<Corpus> {
        let language_pair = parts
            .first()
            .map(|(_, c)| c.language_pair.clone())
            .unwrap_or_default();
        let mut instances = Vec::new();
        for (prefix, corpus) in parts {
            if corpus.language_pair != language_pair {
                return Err(Error::Validation(
                    "merged corpora differ in language pair".into(),
                ));
            }
            for mut instance in corpus.instances {
                instance.id = format!("{prefix}/{}", instance.id);
                instances.push(instance);
            }
        }
        Corpus::new(language_pair, instances)
    }

    /// Serializes back into the TSV layout.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for i in &self.instances {
            out.push_str(i.gold_gender.as_str());
            out.push('\t');
            out.push_str(&i.pronoun_index.to_string());
            out.push('\t');
            out.push_str(&i.source_text);
            out.push('\t');
            out.push_str(&i.target_profession);
            if i.tag_column {
                out.push('\t');
                out.push_str(i.stereotype.as_str());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub language_pair: (String, String),
    /// Tag applied to lines without a fifth column.
    pub stereotype_tag: Option<Stereotype>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            language_pair: ("en".into(), "es".into()),
            stereotype_tag: None,
        }
    }
}

pub fn parse_corpus(path: impl AsRef<Path>, options: &ParseOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading corpus {}", path.display()), e))?;
    parse_corpus_str(&text, path, options)
}

pub fn parse_corpus_str(text: &str, path: &Path, options: &ParseOptions) -> Result<Corpus> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut instances = Vec::new();
    for (n, line) in text.split('\n').enumerate() {
        let line_no = n + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(parse_err(
                line_no,
                format!(
                    "expected 4 or 5 tab-separated fields, found {}",
                    fields.len()
                ),
            ));
        }
        let gold_gender: Gender = fields[0].parse().map_err(|m| parse_err(line_no, m))?;
        let pronoun_index: usize = fields[1].trim().parse().map_err(|_| {
            parse_err(
                line_no,
                format!("non-integer pronoun index {:?}", fields[1]),
            )
        })?;
        let (stereotype, tag_column) = match fields.get(4) {
            Some(tag) => {
                let tag: Stereotype = tag.parse().map_err(|m| parse_err(line_no, m))?;
                if let Some(expected) = options.stereotype_tag {
                    if expected != tag {
                        return Err(parse_err(
                            line_no,
                            format!("tag column {tag} conflicts with subset tag {expected}"),
                        ));
                    }
                }
                (tag, true)
            }
            None => (options.stereotype_tag.unwrap_or(Stereotype::None), false),
        };
        let instance = WinoMtInstance {
            id: format!("line:{line_no}"),
            gold_gender,
            pronoun_index,
            source_text: fields[2].to_string(),
            target_profession: fields[3].to_string(),
            stereotype,
            tag_column,
        };
        instance.validate()?;
        instances.push(instance);
    }
    Corpus::new(options.language_pair.clone(), instances)
}

/// Splits on runs of Unicode whitespace; punctuation stays attached.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// First start index where `needle` occurs contiguously in `haystack`.
pub(crate) fn find_span<T: PartialEq>(haystack: &[T], needle: &[T]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}
