//! Paired bootstrap significance test between two systems.
//!
//! Each resample draws `ceil(fraction * |ids|)` shared instance ids with
//! replacement and evaluates both systems on that multiset. The one-sided
//! p-value for "A better than B" is the share of resamples where
//! `metric(A) <= metric(B)`; ties count toward the null. Resample `r` uses
//! its own [`SplitMix64`] stream seeded with `derive_seed(seed, r)`, so the
//! result does not depend on scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::lexicon::PredictedGender;
use crate::metrics::{f1_from_counts, EvaluationRecord};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMetric {
    Accuracy,
    MacroF1,
}

impl std::str::FromStr for BootstrapMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "acc" => Ok(BootstrapMetric::Accuracy),
            "macro_f1" | "f1" => Ok(BootstrapMetric::MacroF1),
            other => Err(Error::Config(format!("unknown bootstrap metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub metric: BootstrapMetric,
}

pub const DEFAULT_BOOTSTRAP_SEED: u64 = 20_230_601;

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            sample_fraction: 0.30,
            seed: DEFAULT_BOOTSTRAP_SEED,
            metric: BootstrapMetric::MacroF1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub p_value: f64,
    pub resamples: usize,
    /// Total draws including redraws of resamples where the metric was undefined.
    pub draws: usize,
    pub sample_size: usize,
    pub metric_a: f64,
    pub metric_b: f64,
}

/// Per-id (gold, predicted) pairs for one resample.
struct Paired {
    gold: Vec<Gender>,
    a: Vec<PredictedGender>,
    b: Vec<PredictedGender>,
}

fn by_id(records: &[EvaluationRecord], side: &str) -> Result<BTreeMap<String, EvaluationRecord>> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.gold_gender != Gender::Neutral) {
        if out.insert(r.instance_id.clone(), r.clone()).is_some() {
            return Err(Error::Bootstrap(format!(
                "duplicate id {} in {side}",
                r.instance_id
            )));
        }
    }
    Ok(out)
}

fn matches_gold(gold: Gender, pred: PredictedGender) -> bool {
    matches!(
        (gold, pred),
        (Gender::Male, PredictedGender::Male) | (Gender::Female, PredictedGender::Female)
    )
}

/// Metric over a multiset of indices; `None` when undefined.
fn metric_on(
    idx: &[usize],
    gold: &[Gender],
    pred: &[PredictedGender],
    metric: BootstrapMetric,
) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    match metric {
        BootstrapMetric::Accuracy => {
            let correct = idx
                .iter()
                .filter(|&&i| matches_gold(gold[i], pred[i]))
                .count();
            Some(correct as f64 / idx.len() as f64)
        }
        BootstrapMetric::MacroF1 => {
            let mut total = 0.0;
            for (class, label) in [
                (Gender::Male, PredictedGender::Male),
                (Gender::Female, PredictedGender::Female),
            ] {
                let gold_n = idx.iter().filter(|&&i| gold[i] == class).count();
                if gold_n == 0 {
                    return None;
                }
                let pred_n = idx.iter().filter(|&&i| pred[i] == label).count();
                let hits = idx
                    .iter()
                    .filter(|&&i| gold[i] == class && pred[i] == label)
                    .count();
                total += f1_from_counts(hits, pred_n, gold_n);
            }
            Some(total / 2.0)
        }
    }
}

pub fn bootstrap_compare(
    records_a: &[EvaluationRecord],
    records_b: &[EvaluationRecord],
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if config.resamples == 0 {
        return Err(Error::Bootstrap("resamples must be >= 1".into()));
    }
    if !(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0) {
        return Err(Error::Bootstrap(format!(
            "sample fraction {} outside (0, 1]",
            config.sample_fraction
        )));
    }
    let a = by_id(records_a, "A")?;
    let b = by_id(records_b, "B")?;
    if !a.keys().eq(b.keys()) {
        let only: Vec<String> = a
            .keys()
            .filter(|k| !b.contains_key(*k))
            .chain(b.keys().filter(|k| !a.contains_key(*k)))
            .cloned()
            .collect();
        return Err(Error::Bootstrap(format!(
            "systems cover different instance ids: {}",
            only.join(", ")
        )));
    }
    if let Some((id, _)) = a.iter().find(|(id, r)| b[*id].gold_gender != r.gold_gender) {
        return Err(Error::Bootstrap(format!(
            "gold gender of {id} differs between systems"
        )));
    }
    if a.is_empty() {
        return Err(Error::Bootstrap("no gendered records to compare".into()));
    }
    let paired = Paired {
        gold: a.values().map(|r| r.gold_gender).collect(),
        a: a.values().map(|r| r.predicted_gender).collect(),
        b: b.values().map(|r| r.predicted_gender).collect(),
    };
    let ids = paired.gold.len();
    let all: Vec<usize> = (0..ids).collect();
    let metric_a = metric_on(&all, &paired.gold, &paired.a, config.metric)
        .ok_or_else(|| Error::Bootstrap("metric undefined on the full set".into()))?;
    let metric_b = metric_on(&all, &paired.gold, &paired.b, config.metric)
        .ok_or_else(|| Error::Bootstrap("metric undefined on the full set".into()))?;

    let sample_size = ((config.sample_fraction * ids as f64 - 1e-9).ceil() as usize).clamp(1, ids);
    let cap = config.resamples.saturating_mul(10);
    let draws = AtomicUsize::new(0);
    let outcomes: Vec<Option<bool>> = (0..config.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = SplitMix64::new(derive_seed(config.seed, r as u64));
            let mut idx = vec![0usize; sample_size];
            loop {
                if draws.fetch_add(1, Ordering::Relaxed) >= cap {
                    return None;
                }
                for slot in idx.iter_mut() {
                    *slot = rng.below(ids as u64) as usize;
                }
                let ma = metric_on(&idx, &paired.gold, &paired.a, config.metric);
                let mb = metric_on(&idx, &paired.gold, &paired.b, config.metric);
                if let (Some(ma), Some(mb)) = (ma, mb) {
                    return Some(ma <= mb);
                }
            }
        })
        .collect();
    let draws = draws.into_inner();
    if outcomes.iter().any(Option::is_none) {
        return Err(Error::Bootstrap(format!(
            "metric undefined too often: exceeded {cap} draws"
        )));
    }
    let not_better = outcomes.iter().filter(|o| **o == Some(true)).count();
    Ok(BootstrapResult {
        p_value: not_better as f64 / config.resamples as f64,
        resamples: config.resamples,
        draws,
        sample_size,
        metric_a,
        metric_b,
    })
}
