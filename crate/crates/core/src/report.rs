//! Rendering of computed reports as JSON, plain-text tables and CSV.
//!
//! Percentages print with one decimal and attribution means with three,
//! rounded half away from zero at render time only. Every output embeds
//! the digest of the [`RunManifest`] it was computed under.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::DecodingConfig;
use crate::error::{Error, Result};
use crate::gnt::GntReport;
use crate::metrics::{BiasReport, RelativeDifference};
use crate::stats::BootstrapResult;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus_digest: Option<String>,
    pub lexicon_digest: Option<String>,
    pub backend: Option<String>,
    pub decoding: Option<DecodingConfig>,
    pub template: Option<String>,
    pub nt_policy: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// SHA-256 of a file's bytes, for manifest entries.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub manifest: RunManifest,
    pub manifest_digest: String,
    #[serde(default)]
    pub match_rate: Option<f64>,
    #[serde(default)]
    pub bias: Option<BiasReport>,
    #[serde(default)]
    pub relative_differences: Vec<RelativeDifference>,
    #[serde(default)]
    pub gnt: Option<GntReport>,
    #[serde(default)]
    pub comparison: Option<BootstrapResult>,
}

impl FullReport {
    pub fn new(manifest: RunManifest) -> Self {
        Self {
            manifest_digest: manifest.digest(),
            manifest,
            match_rate: None,
            bias: None,
            relative_differences: Vec::new(),
            gnt: None,
            comparison: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Structured,
    Table,
    Delimited,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "json" => Ok(Format::Structured),
            "table" | "text" => Ok(Format::Table),
            "delimited" | "csv" => Ok(Format::Delimited),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let r = (value * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Fraction rendered as a percentage with one decimal.
pub fn pct(fraction: f64) -> String {
    format!("{:.1}", round_to(fraction * 100.0, 1))
}

/// Value already in percent, one decimal.
pub fn pct_value(percent: f64) -> String {
    format!("{:.1}", round_to(percent, 1))
}

pub fn score(value: f64) -> String {
    format!("{:.3}", round_to(value, 3))
}

fn opt(value: Option<f64>, f: fn(f64) -> String) -> String {
    value.map(f).unwrap_or_else(|| "-".into())
}

/// `Acc ΔG ΔS` as one row, e.g. `65.1 7.2 35.1`.
pub fn summary_row(accuracy: f64, delta_g: f64, delta_s: Option<f64>) -> String {
    format!("{} {} {}", pct(accuracy), pct(delta_g), opt(delta_s, pct))
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn row<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn per_profession_table(per_profession: &BTreeMap<String, f64>) -> String {
    let mut rows = vec![row(["Profession", "ΔG"])];
    for (p, v) in per_profession {
        rows.push(vec![p.clone(), pct(*v)]);
    }
    aligned(&rows)
}

pub fn render_table(report: &FullReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# manifest {}", report.manifest_digest);
    if let Some(rate) = report.match_rate {
        let _ = writeln!(out, "\nProfession match rate: {}%", pct(rate));
    }
    if let Some(bias) = &report.bias {
        let _ = writeln!(out, "\nAcc ΔG ΔS");
        let _ = writeln!(
            out,
            "{}",
            summary_row(bias.accuracy, bias.delta_g, bias.delta_s)
        );
        let _ = writeln!(out, "\nDisaggregated scores");
        let mut rows = vec![row([
            "Stereotype",
            "Gender",
            "N",
            "a_ctrl",
            "a_prof",
            "a_pron",
            "Acc",
        ])];
        for c in &bias.cells {
            rows.push(vec![
                c.stereotype.to_string(),
                c.gender.to_string(),
                c.count.to_string(),
                opt(c.mean_ctrl, score),
                opt(c.mean_prof, score),
                opt(c.mean_pron, score),
                opt(c.accuracy, pct),
            ]);
        }
        out.push_str(&aligned(&rows));
        let _ = writeln!(out, "\nPer-profession ΔG");
        out.push_str(&per_profession_table(&bias.per_profession.delta_g));
        if !bias.per_profession.omitted.is_empty() {
            let _ = writeln!(
                out,
                "omitted (single gold class): {}",
                bias.per_profession.omitted.join(", ")
            );
        }
    }
    if !report.relative_differences.is_empty() {
        let _ = writeln!(out, "\nCorrect vs wrong relative difference (%)");
        let mut rows = vec![row(["Score", "Stereotype", "Gender", "Diff"])];
        for d in &report.relative_differences {
            rows.push(vec![
                d.score.name().to_string(),
                d.stereotype.map_or("all".into(), |s| s.to_string()),
                d.gender.map_or("all".into(), |g| g.to_string()),
                opt(d.percent, pct_value),
            ]);
        }
        out.push_str(&aligned(&rows));
    }
    if let Some(gnt) = &report.gnt {
        let _ = writeln!(out, "\nGender-neutral instances (n = {})", gnt.total);
        let mut rows = vec![row(["Bucket", "Share", "Median a_pron"])];
        for b in &gnt.buckets {
            rows.push(vec![
                b.bucket.label().to_string(),
                pct_value(b.share),
                opt(b.median_a_pron_prof, score),
            ]);
        }
        out.push_str(&aligned(&rows));
    }
    if let Some(c) = &report.comparison {
        let _ = writeln!(
            out,
            "\nBootstrap comparison: p = {:.3} ({} resamples of {})",
            c.p_value, c.resamples, c.sample_size
        );
    }
    out
}

pub fn render_structured(report: &FullReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_structured(text: &str) -> Result<FullReport> {
    Ok(serde_json::from_str(text)?)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV exports by file name. Values keep full precision.
pub fn render_delimited(report: &FullReport) -> Result<BTreeMap<String, String>> {
    let d = report.manifest_digest.clone();
    let mut files = BTreeMap::new();
    if let Some(bias) = &report.bias {
        files.insert(
            "summary.csv".into(),
            csv_string(
                &[
                    "manifest", "records", "accuracy", "delta_g", "delta_s", "macro_f1",
                ],
                vec![vec![
                    d.clone(),
                    bias.records.to_string(),
                    bias.accuracy.to_string(),
                    bias.delta_g.to_string(),
                    num(bias.delta_s),
                    bias.macro_f1.to_string(),
                ]],
            )?,
        );
        files.insert(
            "cells.csv".into(),
            csv_string(
                &[
                    "manifest",
                    "stereotype",
                    "gender",
                    "count",
                    "accuracy",
                    "a_ctrl_prof",
                    "a_prof_prof",
                    "a_pron_prof",
                ],
                bias.cells
                    .iter()
                    .map(|c| {
                        vec![
                            d.clone(),
                            c.stereotype.to_string(),
                            c.gender.to_string(),
                            c.count.to_string(),
                            num(c.accuracy),
                            num(c.mean_ctrl),
                            num(c.mean_prof),
                            num(c.mean_pron),
                        ]
                    })
                    .collect(),
            )?,
        );
        files.insert(
            "per_profession.csv".into(),
            csv_string(
                &["manifest", "profession", "delta_g"],
                bias.per_profession
                    .delta_g
                    .iter()
                    .map(|(p, v)| vec![d.clone(), p.clone(), v.to_string()])
                    .collect(),
            )?,
        );
    }
    if !report.relative_differences.is_empty() {
        files.insert(
            "relative_differences.csv".into(),
            csv_string(
                &["manifest", "score", "stereotype", "gender", "percent"],
                report
                    .relative_differences
                    .iter()
                    .map(|r| {
                        vec![
                            d.clone(),
                            r.score.name().into(),
                            r.stereotype.map_or("all".into(), |s| s.to_string()),
                            r.gender.map_or("all".into(), |g| g.to_string()),
                            num(r.percent),
                        ]
                    })
                    .collect(),
            )?,
        );
    }
    if let Some(gnt) = &report.gnt {
        files.insert(
            "gnt.csv".into(),
            csv_string(
                &["manifest", "bucket", "count", "share", "median_a_pron_prof"],
                gnt.buckets
                    .iter()
                    .map(|b| {
                        vec![
                            d.clone(),
                            b.bucket.label().into(),
                            b.count.to_string(),
                            b.share.to_string(),
                            num(b.median_a_pron_prof),
                        ]
                    })
                    .collect(),
            )?,
        );
    }
    Ok(files)
}

/// Writes the report in `format` under `dir`, returning the written paths.
pub fn render(report: &FullReport, format: Format, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let files: Vec<(String, String)> = match format {
        Format::Structured => vec![("report.json".into(), render_structured(report)?)],
        Format::Table => vec![("report.txt".into(), render_table(report))],
        Format::Delimited => render_delimited(report)?.into_iter().collect(),
    };
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        written.push(path);
    }
    Ok(written)
}
