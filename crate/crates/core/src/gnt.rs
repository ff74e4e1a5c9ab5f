//! Gender-neutral (they/them/their) subset analysis.

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionTriple;
use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::lexicon::{PredictedGender, ProfessionMatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GntBucket {
    Female,
    Male,
    NeutralUnknown,
    NonMatching,
}

impl GntBucket {
    pub const ALL: [GntBucket; 4] = [
        GntBucket::Female,
        GntBucket::Male,
        GntBucket::NeutralUnknown,
        GntBucket::NonMatching,
    ];

    pub fn of(profession_match: &ProfessionMatch) -> GntBucket {
        if !profession_match.found {
            return GntBucket::NonMatching;
        }
        match (
            profession_match.ambiguous,
            profession_match.predicted_gender,
        ) {
            (false, PredictedGender::Female) => GntBucket::Female,
            (false, PredictedGender::Male) => GntBucket::Male,
            _ => GntBucket::NeutralUnknown,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GntBucket::Female => "Female",
            GntBucket::Male => "Male",
            GntBucket::NeutralUnknown => "Neutral/Unknown",
            GntBucket::NonMatching => "Non-matching",
        }
    }
}

/// One neutral-referent instance with its match outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GntRecord {
    pub instance_id: String,
    pub gold_gender: Gender,
    pub profession_match: ProfessionMatch,
    pub triple: Option<AttributionTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub bucket: GntBucket,
    pub count: usize,
    /// Percentage of all neutral records.
    pub share: f64,
    pub median_a_pron_prof: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GntReport {
    pub total: usize,
    pub buckets: Vec<BucketSummary>,
}

/// Median; the mean of the two central values for even-sized input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

pub fn analyze_gnt(records: &[GntRecord]) -> Result<GntReport> {
    if records.is_empty() {
        return Err(Error::Metric("no gender-neutral records".into()));
    }
    if let Some(r) = records.iter().find(|r| r.gold_gender != Gender::Neutral) {
        return Err(Error::Validation(format!(
            "{} has gold gender {}, expected neutral",
            r.instance_id, r.gold_gender
        )));
    }
    let total = records.len();
    let buckets = GntBucket::ALL
        .iter()
        .map(|&bucket| {
            let members: Vec<&GntRecord> = records
                .iter()
                .filter(|r| GntBucket::of(&r.profession_match) == bucket)
                .collect();
            let scores: Vec<f64> = members
                .iter()
                .filter_map(|r| r.triple.as_ref())
                .map(|t| t.a_pron_prof)
                .collect();
            BucketSummary {
                bucket,
                count: members.len(),
                share: 100.0 * members.len() as f64 / total as f64,
                median_a_pron_prof: median(&scores),
            }
        })
        .collect();
    Ok(GntReport { total, buckets })
}
