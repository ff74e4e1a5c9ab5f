//! Interpretability-guided few-shot exemplar selection.
//!
//! Candidates are the instances whose translated profession relied least on
//! the source pronoun (lowest `a_pron_prof`), kept per (stereotype, gender)
//! stratum. Exemplars are drawn from those pools with [`SplitMix64`] and
//! rendered as Q/A pairs in front of the query.
//!
//! Draw protocol: one generator seeded with the selection seed; strata are
//! visited in the order Pro-F, Pro-M, Anti-F, Anti-M; within a stratum of
//! pool size `p`, draw `k` runs a partial Fisher-Yates shuffle
//! (`j = k + below(p - k)`, swap `k` and `j`, take position `k`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::client::PromptTemplate;
use crate::corpus::{Corpus, Gender, Stereotype};
use crate::error::{Error, Result};
use crate::metrics::{EvaluationRecord, CELLS};
use crate::rng::SplitMix64;

pub const DEFAULT_POOL_FRACTION: f64 = 0.25;
pub const DEFAULT_EXEMPLARS: usize = 4;
pub const DEFAULT_SELECTION_SEED: u64 = 4;
pub const DEFAULT_NT_SEED: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stratum {
    pub stereotype: Stereotype,
    pub gender: Gender,
}

impl Stratum {
    pub fn all() -> [Stratum; 4] {
        CELLS.map(|(stereotype, gender)| Stratum { stereotype, gender })
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = match self.gender {
            Gender::Male => "M",
            Gender::Female => "F",
            Gender::Neutral => "N",
        };
        write!(f, "{}-{g}", self.stereotype)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub instance_id: String,
    /// `None` for pools built without attributions (random baseline).
    pub a_pron_prof: Option<f64>,
}

/// Candidate lists in stratum order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    pub strata: Vec<(Stratum, Vec<Candidate>)>,
}

fn pool_size(fraction: f64, cell: usize) -> usize {
    // Tolerate representation error in products like 0.1 * 30.
    ((fraction * cell as f64 - 1e-9).ceil() as usize).clamp(1, cell)
}

/// Lowest-`a_pron_prof` candidates per stratum: the bottom `ceil(q * n)` (at least one).
pub fn build_pool(records: &[EvaluationRecord], fraction: f64) -> Result<Pools> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Selection(format!(
            "pool fraction {fraction} outside (0, 1]"
        )));
    }
    let mut strata = Vec::new();
    for stratum in Stratum::all() {
        let mut cell: Vec<(f64, &str)> = records
            .iter()
            .filter(|r| r.stereotype == stratum.stereotype && r.gold_gender == stratum.gender)
            .filter_map(|r| {
                r.triple
                    .as_ref()
                    .filter(|t| t.matched)
                    .map(|t| (t.a_pron_prof, r.instance_id.as_str()))
            })
            .collect();
        if cell.is_empty() {
            return Err(Error::Selection(format!(
                "stratum {stratum} has no matched records"
            )));
        }
        cell.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let keep = pool_size(fraction, cell.len());
        let candidates = cell
            .into_iter()
            .take(keep)
            .map(|(score, id)| Candidate {
                instance_id: id.to_string(),
                a_pron_prof: Some(score),
            })
            .collect();
        strata.push((stratum, candidates));
    }
    Ok(Pools { strata })
}

/// Every corpus instance of each stratum, ordered by id (random baseline).
pub fn stratified_pool(corpus: &Corpus) -> Result<Pools> {
    let mut strata = Vec::new();
    for stratum in Stratum::all() {
        let mut ids: Vec<&str> = corpus
            .instances()
            .iter()
            .filter(|i| i.stereotype == stratum.stereotype && i.gold_gender == stratum.gender)
            .map(|i| i.id.as_str())
            .collect();
        if ids.is_empty() {
            return Err(Error::Selection(format!("stratum {stratum} is empty")));
        }
        ids.sort_unstable();
        let candidates = ids
            .into_iter()
            .map(|id| Candidate {
                instance_id: id.to_string(),
                a_pron_prof: None,
            })
            .collect();
        strata.push((stratum, candidates));
    }
    Ok(Pools { strata })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedExemplar {
    pub instance_id: String,
    pub stratum: Stratum,
    pub a_pron_prof: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rng_seed: u64,
    pub exemplars: Vec<SelectedExemplar>,
}

/// `n / 4` exemplars per stratum.
pub fn select_exemplars(pools: &Pools, n: usize, seed: u64) -> Result<Selection> {
    let strata = pools.strata.len();
    if strata == 0 || !n.is_multiple_of(strata) {
        return Err(Error::Selection(format!(
            "n = {n} is not divisible by the {strata} strata"
        )));
    }
    select_with_allocation(pools, &vec![n / strata; strata], seed)
}

/// Draws `allocation[s]` exemplars from stratum `s`.
pub fn select_with_allocation(pools: &Pools, allocation: &[usize], seed: u64) -> Result<Selection> {
    if allocation.len() != pools.strata.len() {
        return Err(Error::Selection(format!(
            "allocation has {} entries for {} strata",
            allocation.len(),
            pools.strata.len()
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut exemplars = Vec::new();
    for ((stratum, pool), &take) in pools.strata.iter().zip(allocation) {
        if pool.len() < take {
            return Err(Error::Selection(format!(
                "stratum {stratum}: pool of {} cannot supply {take} exemplars",
                pool.len()
            )));
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        for k in 0..take {
            let j = k + rng.below((pool.len() - k) as u64) as usize;
            order.swap(k, j);
            let c = &pool[order[k]];
            exemplars.push(SelectedExemplar {
                instance_id: c.instance_id.clone(),
                stratum: *stratum,
                a_pron_prof: c.a_pron_prof,
            });
        }
    }
    Ok(Selection {
        rng_seed: seed,
        exemplars,
    })
}

/// Inflection used for the non-target profession in human translations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NtPolicy {
    #[serde(rename = "nt-female")]
    NtFemale,
    #[serde(rename = "nt-male")]
    NtMale,
    #[serde(rename = "nt-random")]
    NtRandom,
}

impl std::str::FromStr for NtPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nt-female" | "female" => Ok(NtPolicy::NtFemale),
            "nt-male" | "male" => Ok(NtPolicy::NtMale),
            "nt-random" | "random" => Ok(NtPolicy::NtRandom),
            other => Err(Error::Config(format!("unknown NT policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanTranslations {
    pub nt_female: String,
    pub nt_male: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub instance_id: String,
    pub source_text: String,
    pub human_translations: HumanTranslations,
    pub stratum: Stratum,
    pub a_pron_prof: Option<f64>,
    /// Translation placed in the prompt under the set's policy.
    pub translation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub n: usize,
    pub nt_policy: NtPolicy,
    pub rng_seed: u64,
    pub exemplars: Vec<Exemplar>,
}

/// Reads `instance_id<TAB>nt_female<TAB>nt_male`.
pub fn load_human_translations(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, HumanTranslations>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading human translations {}", path.display()), e))?;
    parse_human_translations(&text, path)
}

pub fn parse_human_translations(
    text: &str,
    path: &Path,
) -> Result<BTreeMap<String, HumanTranslations>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        let nt_female = fields.next().unwrap_or_default().to_string();
        let nt_male = fields.next().unwrap_or_default().to_string();
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected at most 3 tab-separated fields".into(),
            });
        }
        if out
            .insert(id.clone(), HumanTranslations { nt_female, nt_male })
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

/// Attaches human translations and picks the variant each exemplar shows.
/// Under `NtRandom` the choice is a coin flip per exemplar, in exemplar
/// order, from a generator seeded with `seed`.
pub fn resolve_translations(
    selection: &Selection,
    corpus: &Corpus,
    human: &BTreeMap<String, HumanTranslations>,
    policy: NtPolicy,
    seed: u64,
) -> Result<ExemplarSet> {
    let mut gaps = Vec::new();
    for e in &selection.exemplars {
        match human.get(&e.instance_id) {
            None => gaps.push(format!("{} (missing)", e.instance_id)),
            Some(h) => {
                if h.nt_female.trim().is_empty() {
                    gaps.push(format!("{} (nt_female)", e.instance_id));
                }
                if h.nt_male.trim().is_empty() {
                    gaps.push(format!("{} (nt_male)", e.instance_id));
                }
            }
        }
        if corpus.get(&e.instance_id).is_none() {
            gaps.push(format!("{} (not in corpus)", e.instance_id));
        }
    }
    if !gaps.is_empty() {
        return Err(Error::MissingIds(gaps));
    }
    let mut rng = SplitMix64::new(seed);
    let exemplars = selection
        .exemplars
        .iter()
        .map(|e| {
            let h = human[&e.instance_id].clone();
            let female = match policy {
                NtPolicy::NtFemale => true,
                NtPolicy::NtMale => false,
                NtPolicy::NtRandom => rng.coin(),
            };
            let translation = if female {
                h.nt_female.clone()
            } else {
                h.nt_male.clone()
            };
            Exemplar {
                instance_id: e.instance_id.clone(),
                source_text: corpus
                    .get(&e.instance_id)
                    .expect("checked")
                    .source_text
                    .clone(),
                human_translations: h,
                stratum: e.stratum,
                a_pron_prof: e.a_pron_prof,
                translation,
            }
        })
        .collect::<Vec<_>>();
    Ok(ExemplarSet {
        n: exemplars.len(),
        nt_policy: policy,
        rng_seed: seed,
        exemplars,
    })
}

/// Q/A few-shot prompt. Without exemplars, falls back to the zero-shot
/// template and logs a warning.
pub fn build_fewshot_prompt(exemplars: &[Exemplar], query: &str, language: &str) -> String {
    if exemplars.is_empty() {
        log::warn!("no exemplars; using the zero-shot template");
        return PromptTemplate::T1.render(query, "English", language);
    }
    let mut prompt = String::new();
    for e in exemplars {
        prompt.push_str("Q: Translate ");
        prompt.push_str(&e.source_text);
        prompt.push_str(" to ");
        prompt.push_str(language);
        prompt.push_str("?\n\nA: ");
        prompt.push_str(&e.translation);
        prompt.push_str("\n\n\n");
    }
    prompt.push_str("Q: Translate ");
    prompt.push_str(query);
    prompt.push_str(" to ");
    prompt.push_str(language);
    prompt.push_str("?\n\nA:");
    prompt
}
