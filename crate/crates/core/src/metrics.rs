//! Bias metrics over evaluation records.
//!
//! Values are fractions internally; rendering multiplies by 100.
//! `delta_g` is `F1(Male) - F1(Female)`, so male-favoring systems score
//! positive. Unknown predictions are wrong for accuracy and count against
//! both classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionTriple;
use crate::corpus::{Gender, Stereotype, WinoMtInstance};
use crate::error::{Error, Result};
use crate::lexicon::{PredictedGender, ProfessionMatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub instance_id: String,
    pub profession: String,
    pub gold_gender: Gender,
    pub stereotype: Stereotype,
    pub predicted_gender: PredictedGender,
    pub correct: bool,
    #[serde(default)]
    pub triple: Option<AttributionTriple>,
}

impl EvaluationRecord {
    pub fn new(
        instance: &WinoMtInstance,
        predicted_gender: PredictedGender,
        triple: Option<AttributionTriple>,
    ) -> Self {
        Self {
            instance_id: instance.id.clone(),
            profession: instance.target_profession.to_lowercase(),
            gold_gender: instance.gold_gender,
            stereotype: instance.stereotype,
            predicted_gender,
            correct: is_correct(instance.gold_gender, predicted_gender),
            triple,
        }
    }

    pub fn from_match(
        instance: &WinoMtInstance,
        profession_match: &ProfessionMatch,
        triple: Option<AttributionTriple>,
    ) -> Self {
        Self::new(instance, profession_match.predicted_gender, triple)
    }
}

pub fn is_correct(gold: Gender, predicted: PredictedGender) -> bool {
    matches!(
        (gold, predicted),
        (Gender::Male, PredictedGender::Male) | (Gender::Female, PredictedGender::Female)
    )
}

fn predicted_as(gender: Gender) -> PredictedGender {
    match gender {
        Gender::Male => PredictedGender::Male,
        Gender::Female => PredictedGender::Female,
        Gender::Neutral => PredictedGender::Unknown,
    }
}

/// Records with a male or female referent.
pub fn gendered(records: &[EvaluationRecord]) -> Vec<EvaluationRecord> {
    records
        .iter()
        .filter(|r| r.gold_gender != Gender::Neutral)
        .cloned()
        .collect()
}

pub fn accuracy(records: &[EvaluationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Metric("accuracy of an empty record set".into()));
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Per-class F1, computed as `2·TP / (predicted + gold)`; 0 when the class
/// is neither predicted nor gold.
pub fn f1(records: &[EvaluationRecord], class: Gender) -> f64 {
    let target = predicted_as(class);
    let predicted = records
        .iter()
        .filter(|r| r.predicted_gender == target)
        .count();
    let gold = records.iter().filter(|r| r.gold_gender == class).count();
    let hits = records
        .iter()
        .filter(|r| r.gold_gender == class && r.predicted_gender == target)
        .count();
    f1_from_counts(hits, predicted, gold)
}

pub(crate) fn f1_from_counts(hits: usize, predicted: usize, gold: usize) -> f64 {
    if predicted + gold == 0 {
        0.0
    } else {
        (2 * hits) as f64 / (predicted + gold) as f64
    }
}

fn require_both_classes(records: &[EvaluationRecord]) -> Result<()> {
    for class in [Gender::Male, Gender::Female] {
        if !records.iter().any(|r| r.gold_gender == class) {
            return Err(Error::Metric(format!("no {class} gold records")));
        }
    }
    Ok(())
}

pub fn delta_g(records: &[EvaluationRecord]) -> Result<f64> {
    require_both_classes(records)?;
    Ok(f1(records, Gender::Male) - f1(records, Gender::Female))
}

/// Unweighted mean of the male and female F1.
pub fn macro_f1(records: &[EvaluationRecord]) -> Result<f64> {
    require_both_classes(records)?;
    Ok((f1(records, Gender::Male) + f1(records, Gender::Female)) / 2.0)
}

fn subset(records: &[EvaluationRecord], stereotype: Stereotype) -> Vec<EvaluationRecord> {
    records
        .iter()
        .filter(|r| r.stereotype == stereotype)
        .cloned()
        .collect()
}

/// Accuracy on pro-stereotypical minus accuracy on anti-stereotypical records.
pub fn delta_s(records: &[EvaluationRecord]) -> Result<f64> {
    let pro = subset(records, Stereotype::Pro);
    let anti = subset(records, Stereotype::Anti);
    if pro.is_empty() || anti.is_empty() {
        return Err(Error::Metric(
            "delta_s needs both pro and anti records".into(),
        ));
    }
    Ok(accuracy(&pro)? - accuracy(&anti)?)
}

/// Which attribution score to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Ctrl,
    Prof,
    Pron,
}

impl Score {
    pub const ALL: [Score; 3] = [Score::Ctrl, Score::Prof, Score::Pron];

    pub fn of(self, triple: &AttributionTriple) -> f64 {
        match self {
            Score::Ctrl => triple.a_ctrl_prof,
            Score::Prof => triple.a_prof_prof,
            Score::Pron => triple.a_pron_prof,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Score::Ctrl => "a_ctrl_prof",
            Score::Prof => "a_prof_prof",
            Score::Pron => "a_pron_prof",
        }
    }
}

/// One (stereotype, gold gender) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub stereotype: Stereotype,
    pub gender: Gender,
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub matched: usize,
    pub mean_ctrl: Option<f64>,
    pub mean_prof: Option<f64>,
    pub mean_pron: Option<f64>,
}

/// Cells in table order.
pub const CELLS: [(Stereotype, Gender); 4] = [
    (Stereotype::Pro, Gender::Female),
    (Stereotype::Pro, Gender::Male),
    (Stereotype::Anti, Gender::Female),
    (Stereotype::Anti, Gender::Male),
];

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn disaggregate(records: &[EvaluationRecord]) -> Vec<CellSummary> {
    CELLS
        .iter()
        .map(|&(stereotype, gender)| {
            let cell: Vec<&EvaluationRecord> = records
                .iter()
                .filter(|r| r.stereotype == stereotype && r.gold_gender == gender)
                .collect();
            let correct = cell.iter().filter(|r| r.correct).count();
            let triples: Vec<&AttributionTriple> = cell
                .iter()
                .filter_map(|r| r.triple.as_ref())
                .filter(|t| t.matched)
                .collect();
            let means = |s: Score| mean(&triples.iter().map(|t| s.of(t)).collect::<Vec<_>>());
            CellSummary {
                stereotype,
                gender,
                count: cell.len(),
                correct,
                accuracy: (!cell.is_empty()).then(|| correct as f64 / cell.len() as f64),
                matched: triples.len(),
                mean_ctrl: means(Score::Ctrl),
                mean_prof: means(Score::Prof),
                mean_pron: means(Score::Pron),
            }
        })
        .collect()
}

/// `100 * (mean_correct - mean_wrong) / mean_wrong` over matched records.
pub fn correct_wrong_relative_diff(records: &[EvaluationRecord], score: Score) -> Result<f64> {
    let mut correct = Vec::new();
    let mut wrong = Vec::new();
    for r in records {
        if let Some(t) = r.triple.as_ref().filter(|t| t.matched) {
            if r.correct {
                correct.push(score.of(t));
            } else {
                wrong.push(score.of(t));
            }
        }
    }
    let (Some(c), Some(w)) = (mean(&correct), mean(&wrong)) else {
        return Err(Error::Metric(
            "need at least one correct and one wrong matched record".into(),
        ));
    };
    if w == 0.0 {
        return Err(Error::Metric(
            "mean score over wrong translations is zero".into(),
        ));
    }
    Ok(100.0 * (c - w) / w)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerProfessionDeltaG {
    pub delta_g: BTreeMap<String, f64>,
    /// Professions lacking a male or a female gold record.
    pub omitted: Vec<String>,
}

pub fn per_profession_delta_g(records: &[EvaluationRecord]) -> PerProfessionDeltaG {
    let mut groups: BTreeMap<&str, Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.gold_gender != Gender::Neutral) {
        groups
            .entry(r.profession.as_str())
            .or_default()
            .push(r.clone());
    }
    let mut out = PerProfessionDeltaG::default();
    for (profession, group) in groups {
        match delta_g(&group) {
            Ok(v) => {
                out.delta_g.insert(profession.to_string(), v);
            }
            Err(_) => out.omitted.push(profession.to_string()),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeDifference {
    pub score: Score,
    pub stereotype: Option<Stereotype>,
    pub gender: Option<Gender>,
    pub percent: Option<f64>,
}

/// Correct-vs-wrong relative differences per score, overall and per cell.
pub fn relative_differences(records: &[EvaluationRecord]) -> Vec<RelativeDifference> {
    let mut out = Vec::new();
    for score in Score::ALL {
        out.push(RelativeDifference {
            score,
            stereotype: None,
            gender: None,
            percent: correct_wrong_relative_diff(records, score).ok(),
        });
        for (stereotype, gender) in CELLS {
            let cell: Vec<EvaluationRecord> = records
                .iter()
                .filter(|r| r.stereotype == stereotype && r.gold_gender == gender)
                .cloned()
                .collect();
            out.push(RelativeDifference {
                score,
                stereotype: Some(stereotype),
                gender: Some(gender),
                percent: correct_wrong_relative_diff(&cell, score).ok(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub records: usize,
    pub accuracy: f64,
    pub delta_g: f64,
    pub delta_s: Option<f64>,
    pub macro_f1: f64,
    pub cells: Vec<CellSummary>,
    pub per_profession: PerProfessionDeltaG,
}

impl BiasReport {
    /// Computes every metric over the gendered records; neutral referents are skipped.
    pub fn compute(records: &[EvaluationRecord]) -> Result<Self> {
        let gendered = gendered(records);
        Ok(Self {
            records: gendered.len(),
            accuracy: accuracy(&gendered)?,
            delta_g: delta_g(&gendered)?,
            delta_s: delta_s(&gendered).ok(),
            macro_f1: macro_f1(&gendered)?,
            cells: disaggregate(&gendered),
            per_profession: per_profession_delta_g(&gendered),
        })
    }
}
