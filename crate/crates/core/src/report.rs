//! Machine-readable run reports: one JSON document per run plus flat CSV
//! tables for plotting.
//!
//! Undefined numbers are `null` in JSON and the literal `null` in CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::ScoreNormalization;
use crate::distributions::FamilyRanking;
use crate::error::{Result, SpeError};
use crate::experiment::{ExperimentResult, MethodSummary, TrialRow};
use crate::inference::{PosteriorEnsemble, ProposalSpec};
use crate::mixture::{MixtureParams, PairScore, StartDiagnostic};
use crate::performance::{ConditionTable, CurveBand, PerformanceCurve, Recommendation};

pub const SCHEMA_VERSION: &str = "1.0";

pub const NULL_MARKER: &str = "null";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: Option<String>,
    pub items: usize,
    pub labeled: usize,
    pub labeled_positive: usize,
    pub normalization: Option<ScoreNormalization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub params: MixtureParams,
    pub log_posterior: f64,
    pub best_start: usize,
    pub starts: Vec<StartDiagnostic>,
    pub candidates: Vec<PairScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub requested_samples: usize,
    pub retained_samples: usize,
    pub dropped: usize,
    pub ess: f64,
    pub mean_pi: f64,
    pub proposal: ProposalSpec,
    pub warnings: Vec<String>,
}

impl EnsembleSummary {
    pub fn of(e: &PosteriorEnsemble) -> Self {
        Self {
            requested_samples: e.requested_samples,
            retained_samples: e.len(),
            dropped: e.dropped,
            ess: e.ess,
            mean_pi: e.mean_pi(),
            proposal: e.proposal.clone(),
            warnings: e.warnings.clone(),
        }
    }
}

impl FitSummary {
    pub fn of(e: &PosteriorEnsemble) -> Self {
        Self {
            params: e.map.params.clone(),
            log_posterior: e.map.log_posterior,
            best_start: e.map.best_start,
            starts: e.map.starts.clone(),
            candidates: e.candidates.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemProbability {
    pub id: String,
    pub score: f64,
    pub label: Option<bool>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRankings {
    pub negative: Vec<FamilyRanking>,
    pub positive: Vec<FamilyRanking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub table: ConditionTable,
    pub recommendation: Recommendation,
    /// Recommended threshold on the input's raw score scale.
    pub recommended_tau_raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub generated_at: u64,
    pub command: String,
    pub seed: Option<u64>,
    pub input: Option<InputSummary>,
    pub config: Option<RunConfig>,
    pub ranking: Option<ClassRankings>,
    pub fit: Option<FitSummary>,
    pub ensemble: Option<EnsembleSummary>,
    pub band: Option<CurveBand>,
    pub expected_curve: Option<PerformanceCurve>,
    pub items: Option<Vec<ItemProbability>>,
    pub conditions: Vec<ConditionReport>,
    pub experiment: Option<ExperimentResult>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            generated_at,
            command: command.to_string(),
            seed: None,
            input: None,
            config: None,
            ranking: None,
            fit: None,
            ensemble: None,
            band: None,
            expected_curve: None,
            items: None,
            conditions: Vec::new(),
            experiment: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn normalization(&self) -> Option<ScoreNormalization> {
        self.input.as_ref().and_then(|i| i.normalization)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(SpeError::Validation(format!("unknown format `{other}` (json, csv)"))),
        }
    }
}

fn num(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map_or_else(|| NULL_MARKER.to_string(), |x| x.to_string())
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| SpeError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per recall grid point.
pub fn band_csv(band: &CurveBand) -> Result<String> {
    let mut header = vec!["recall".to_string()];
    header.extend(band.levels.iter().map(|q| format!("q{q}")));
    header.extend(["mean".to_string(), "excluded".to_string()]);
    let rows = band
        .points
        .iter()
        .map(|p| {
            let mut row = vec![p.recall.to_string()];
            row.extend(p.quantiles.iter().map(|&q| num(q)));
            row.push(num(p.mean));
            row.push(p.excluded.to_string());
            row
        })
        .collect();
    table(header, rows)
}

pub fn conditions_csv(conditions: &[ConditionReport], norm: Option<ScoreNormalization>) -> Result<String> {
    let header = [
        "recall_floor",
        "precision_floor",
        "tau",
        "tau_raw",
        "probability",
        "expected_recall",
        "expected_precision",
    ]
    .map(String::from)
    .to_vec();
    let rows = conditions
        .iter()
        .flat_map(|c| {
            c.table.rows.iter().map(move |r| {
                vec![
                    c.table.condition.recall_floor.to_string(),
                    c.table.condition.precision_floor.to_string(),
                    r.tau.to_string(),
                    num(norm.map(|n| n.inverse(r.tau))),
                    r.probability.to_string(),
                    num(r.expected_recall),
                    num(r.expected_precision),
                ]
            })
        })
        .collect();
    table(header, rows)
}

pub fn items_csv(items: &[ItemProbability]) -> Result<String> {
    let header = ["id", "score", "label", "probability"].map(String::from).to_vec();
    let rows = items
        .iter()
        .map(|i| {
            vec![
                i.id.clone(),
                i.score.to_string(),
                i.label.map_or_else(|| NULL_MARKER.to_string(), |y| (y as u8).to_string()),
                i.probability.to_string(),
            ]
        })
        .collect();
    table(header, rows)
}

pub fn trials_csv(rows: &[TrialRow]) -> Result<String> {
    let header = ["budget", "trial", "method", "error", "labeled_positives", "failure"]
        .map(String::from)
        .to_vec();
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.budget.to_string(),
                r.trial.to_string(),
                r.method.name().to_string(),
                num(r.error),
                r.labeled_positives.to_string(),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    table(header, rows)
}

pub fn summary_csv(summary: &[MethodSummary]) -> Result<String> {
    let header = ["budget", "method", "completed", "failures", "mean", "std_error", "median"]
        .map(String::from)
        .to_vec();
    let rows = summary
        .iter()
        .map(|s| {
            vec![
                s.budget.to_string(),
                s.method.name().to_string(),
                s.completed.to_string(),
                s.failures.to_string(),
                num(s.mean),
                num(s.std_error),
                num(s.median),
            ]
        })
        .collect();
    table(header, rows)
}

pub fn ranking_csv(r: &ClassRankings) -> Result<String> {
    let header = ["class", "rank", "family", "holdout_log_likelihood", "relative_log_likelihood", "failure"]
        .map(String::from)
        .to_vec();
    let rows = [("negative", &r.negative), ("positive", &r.positive)]
        .into_iter()
        .flat_map(|(class, list)| {
            list.iter().enumerate().map(move |(k, f)| {
                vec![
                    class.to_string(),
                    (k + 1).to_string(),
                    f.family.name().to_string(),
                    num(f.holdout_log_likelihood),
                    num(f.relative_log_likelihood),
                    f.failure.clone().unwrap_or_default(),
                ]
            })
        })
        .collect();
    table(header, rows)
}

/// Named CSV tables available in the report, most important first.
pub fn csv_tables(report: &Report) -> Result<Vec<(&'static str, String)>> {
    let mut out = Vec::new();
    if !report.conditions.is_empty() {
        out.push(("conditions", conditions_csv(&report.conditions, report.normalization())?));
    }
    if let Some(b) = &report.band {
        out.push(("band", band_csv(b)?));
    }
    if let Some(items) = &report.items {
        out.push(("items", items_csv(items)?));
    }
    if let Some(e) = &report.experiment {
        out.push(("trials", trials_csv(&e.rows)?));
        out.push(("summary", summary_csv(&e.summary)?));
    }
    if let Some(r) = &report.ranking {
        out.push(("ranking", ranking_csv(r)?));
    }
    Ok(out)
}

/// Where each CSV table lands: the first at `path`, the rest beside it as
/// `<stem>.<table>.csv`.
pub fn csv_paths(path: &Path, names: &[&str]) -> Vec<PathBuf> {
    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            if k == 0 {
                path.to_path_buf()
            } else {
                path.with_file_name(format!("{stem}.{name}.csv"))
            }
        })
        .collect()
}

/// Write the report. Without a path, JSON (or the first CSV table) goes to
/// stdout. Returns the files written.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> Result<Vec<PathBuf>> {
    match (format, path) {
        (Format::Json, None) => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", report.to_json()?)?;
            Ok(Vec::new())
        }
        (Format::Json, Some(p)) => {
            std::fs::write(p, report.to_json()? + "\n")?;
            Ok(vec![p.to_path_buf()])
        }
        (Format::Csv, target) => {
            let tables = csv_tables(report)?;
            if tables.is_empty() {
                return Err(SpeError::Validation(format!(
                    "`{}` produces no tables; use --format json",
                    report.command
                )));
            }
            match target {
                None => {
                    let mut out = std::io::stdout().lock();
                    out.write_all(tables[0].1.as_bytes())?;
                    Ok(Vec::new())
                }
                Some(p) => {
                    let names: Vec<&str> = tables.iter().map(|t| t.0).collect();
                    let paths = csv_paths(p, &names);
                    for (path, (_, body)) in paths.iter().zip(&tables) {
                        std::fs::write(path, body)?;
                    }
                    Ok(paths)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::performance::BandPoint;

    #[test]
    fn undefined_points_use_the_null_marker() {
        let band = CurveBand {
            levels: vec![0.05, 0.95],
            points: vec![
                BandPoint {
                    recall: 0.5,
                    quantiles: vec![Some(0.8), Some(0.9)],
                    mean: Some(0.85),
                    excluded: 0,
                },
                BandPoint {
                    recall: 1.0,
                    quantiles: vec![None, None],
                    mean: None,
                    excluded: 3,
                },
            ],
            members_without_positives: 3,
        };
        let csv = band_csv(&band).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "recall,q0.05,q0.95,mean,excluded");
        assert_eq!(lines[2], "1,null,null,null,3");
    }

    #[test]
    fn json_round_trip() {
        let mut r = Report::new("fit");
        r.seed = Some(4);
        let back = Report::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn sibling_paths() {
        let p = csv_paths(Path::new("/tmp/out.csv"), &["band", "items"]);
        assert_eq!(p[0], Path::new("/tmp/out.csv"));
        assert_eq!(p[1], Path::new("/tmp/out.items.csv"));
    }
}
