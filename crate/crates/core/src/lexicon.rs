//! Gendered profession lexicon and dictionary alignment of MT output.
//!
//! Matching is hard string matching over normalized words (lowercase,
//! leading/trailing punctuation stripped). Diacritics are significant.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{find_span, normalize_word, words};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub masculine: Vec<String>,
    pub feminine: Vec<String>,
    pub neutral: Option<Vec<String>>,
}

impl LexiconEntry {
    /// Masculine and feminine forms coincide; only a determiner can tell them apart.
    pub fn is_epicene(&self) -> bool {
        self.masculine == self.feminine
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderLexicon {
    pub language: String,
    entries: BTreeMap<String, LexiconEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchedForm {
    Masculine,
    Feminine,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedGender {
    Male,
    Female,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfessionMatch {
    pub found: bool,
    /// Index of the last word of the matched span.
    pub word_index: Option<usize>,
    pub matched_form: Option<MatchedForm>,
    pub ambiguous: bool,
    pub predicted_gender: PredictedGender,
}

impl ProfessionMatch {
    pub fn not_found() -> Self {
        Self {
            found: false,
            word_index: None,
            matched_form: None,
            ambiguous: false,
            predicted_gender: PredictedGender::Unknown,
        }
    }
}

impl GenderLexicon {
    pub fn new(language: impl Into<String>) -> Self {
        Self {
            language: language.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(
        &mut self,
        profession: &str,
        masculine: &str,
        feminine: &str,
        neutral: Option<&str>,
    ) -> Result<()> {
        let key = profession.trim().to_lowercase();
        if key.is_empty() {
            return Err(Error::Lexicon("empty profession".into()));
        }
        let form = |s: &str, what: &str| -> Result<Vec<String>> {
            let ws: Vec<String> = words(s).into_iter().map(str::to_string).collect();
            if ws.is_empty() {
                return Err(Error::Lexicon(format!("{key}: empty {what} form")));
            }
            Ok(ws)
        };
        let entry = LexiconEntry {
            masculine: form(masculine, "masculine")?,
            feminine: form(feminine, "feminine")?,
            neutral: neutral.map(|n| form(n, "neutral")).transpose()?,
        };
        if self.entries.contains_key(&key) {
            return Err(Error::Lexicon(format!("duplicate profession {key:?}")));
        }
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn get(&self, profession: &str) -> Option<&LexiconEntry> {
        self.entries.get(&profession.trim().to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LexiconEntry)> {
        self.entries.iter()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (prof, e) in &self.entries {
            out.push_str(prof);
            out.push('\t');
            out.push_str(&e.masculine.join(" "));
            out.push('\t');
            out.push_str(&e.feminine.join(" "));
            if let Some(n) = &e.neutral {
                out.push('\t');
                out.push_str(&n.join(" "));
            }
            out.push('\n');
        }
        out
    }

    /// Locates the profession in `translation` and infers its grammatical gender.
    pub fn match_profession(&self, translation: &str, profession: &str) -> Result<ProfessionMatch> {
        let entry = self
            .get(profession)
            .ok_or_else(|| Error::Lexicon(format!("profession {profession:?} not in lexicon")))?;
        Ok(match_entry(translation, entry, &self.language))
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, language: &str) -> Result<GenderLexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading lexicon {}", path.display()), e))?;
    parse_lexicon_str(&text, language)
}

pub fn parse_lexicon_str(text: &str, language: &str) -> Result<GenderLexicon> {
    let mut lexicon = GenderLexicon::new(language);
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Lexicon(format!(
                "line {}: expected 3 or 4 tab-separated fields, found {}",
                n + 1,
                fields.len()
            )));
        }
        lexicon
            .insert(fields[0], fields[1], fields[2], fields.get(3).copied())
            .map_err(|e| Error::Lexicon(format!("line {}: {e}", n + 1)))?;
    }
    Ok(lexicon)
}

/// Determiner gender for the languages with known article systems.
fn determiner_gender(language: &str, word: &str) -> Option<PredictedGender> {
    let lang = language.to_ascii_lowercase();
    match (lang.as_str(), word) {
        ("es", "el" | "los" | "un") => Some(PredictedGender::Male),
        ("es", "la" | "las" | "una") => Some(PredictedGender::Female),
        ("de", "der" | "ein") => Some(PredictedGender::Male),
        ("de", "die" | "eine") => Some(PredictedGender::Female),
        _ => None,
    }
}

const DETERMINER_WINDOW: usize = 2;

fn match_entry(translation: &str, entry: &LexiconEntry, language: &str) -> ProfessionMatch {
    let tokens: Vec<String> = words(translation).into_iter().map(normalize_word).collect();
    let norm =
        |form: &[String]| -> Vec<String> { form.iter().map(|w| normalize_word(w)).collect() };
    let masc = norm(&entry.masculine);
    let fem = norm(&entry.feminine);
    let neutral = entry.neutral.as_deref().map(norm);

    let hit = |form: &[String]| find_span(&tokens, form).map(|start| (start, form.len()));
    let masc_hit = hit(&masc);
    let fem_hit = if entry.is_epicene() { None } else { hit(&fem) };
    let neutral_hit = neutral.as_deref().and_then(hit);

    // Earliest start wins; at equal starts the longer span wins.
    let mut candidates: Vec<(usize, usize, MatchedForm)> = Vec::new();
    if let Some((s, l)) = masc_hit {
        candidates.push((s, l, MatchedForm::Masculine));
    }
    if let Some((s, l)) = fem_hit {
        candidates.push((s, l, MatchedForm::Feminine));
    }
    if let Some((s, l)) = neutral_hit {
        candidates.push((s, l, MatchedForm::Neutral));
    }
    let Some(&(start, len, form)) = candidates
        .iter()
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
    else {
        return ProfessionMatch::not_found();
    };
    let word_index = start + len - 1;

    if form == MatchedForm::Masculine && entry.is_epicene() {
        let resolved = (1..=DETERMINER_WINDOW)
            .filter_map(|d| start.checked_sub(d))
            .find_map(|i| determiner_gender(language, &tokens[i]));
        return match resolved {
            Some(PredictedGender::Male) => found(word_index, MatchedForm::Masculine, false),
            Some(PredictedGender::Female) => found(word_index, MatchedForm::Feminine, false),
            _ => found(word_index, MatchedForm::Neutral, true),
        };
    }

    let ambiguous = masc_hit.is_some() && fem_hit.is_some();
    found(word_index, form, ambiguous)
}

fn found(word_index: usize, form: MatchedForm, ambiguous: bool) -> ProfessionMatch {
    let predicted_gender = match form {
        MatchedForm::Masculine => PredictedGender::Male,
        MatchedForm::Feminine => PredictedGender::Female,
        MatchedForm::Neutral => PredictedGender::Unknown,
    };
    ProfessionMatch {
        found: true,
        word_index: Some(word_index),
        matched_form: Some(form),
        ambiguous,
        predicted_gender,
    }
}

/// Fraction of matches where the profession was found.
pub fn match_rate(matches: &[ProfessionMatch]) -> Result<f64> {
    if matches.is_empty() {
        return Err(Error::Metric("match rate of an empty list".into()));
    }
    let found = matches.iter().filter(|m| m.found).count();
    Ok(found as f64 / matches.len() as f64)
}
