//! SPE versus the naive labeled-subset estimate across label budgets.
//!
//! Each trial reveals a random subset of labels, estimates the PR curve
//! both ways and scores each estimate by its area error against the curve
//! computed from all labels. All curves are compared on the same recall
//! grid.

use serde::{Deserialize, Serialize};

use crate::data::sample_label_budget;
use crate::error::{Result, SpeError};
use crate::inference::{run_spe, SpeOptions};
use crate::mixture::{MixtureLayout, PriorSpec};
use crate::performance::{
    area_between_curves, empirical_pr_curve, ensemble_curve_band, naive_estimate, recall_grid,
    PerformanceCurve,
};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pointwise posterior median curve.
    Spe,
    /// Posterior expected curve.
    SpeMean,
    Naive,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Spe, Method::SpeMean, Method::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Method::Spe => "spe",
            Method::SpeMean => "spe-mean",
            Method::Naive => "naive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub priors: PriorSpec,
    pub pairs: Vec<MixtureLayout>,
    pub spe: SpeOptions,
    pub grid_size: usize,
    /// Draw this many items at random per trial before revealing labels.
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub budget: usize,
    pub trial: usize,
    pub method: Method,
    pub error: Option<f64>,
    pub labeled_positives: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub budget: usize,
    pub method: Method,
    pub completed: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub std_error: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<MethodSummary>,
}

struct TrialOutcome {
    spe: Result<(f64, f64)>,
    naive: Result<f64>,
    labeled_positives: usize,
}

fn run_trial(scores: &[f64], labels: &[bool], budget: usize, cfg: &ExperimentConfig, seed: u64) -> Result<TrialOutcome> {
    let mut rng = seeded(seed);
    let (scores, labels) = match cfg.subsample {
        Some(n) if n < scores.len() => {
            let mut idx = rand::seq::index::sample(&mut rng, scores.len(), n).into_vec();
            idx.sort_unstable();
            (idx.iter().map(|&i| scores[i]).collect(), idx.iter().map(|&i| labels[i]).collect())
        }
        _ => (scores.to_vec(), labels.to_vec()),
    };
    let grid = recall_grid(cfg.grid_size);
    let truth = empirical_pr_curve(&scores, &labels)?;
    let truth = PerformanceCurve::from_grid(&grid, &truth.rasterize(&grid))?;
    let data = sample_label_budget(&scores, &labels, budget, &mut rng)?;
    let labeled_positives = data.labels().iter().filter(|&&y| y == Some(true)).count();

    let naive = naive_estimate(&data)
        .and_then(|c| PerformanceCurve::from_grid(&grid, &c.rasterize(&grid)))
        .and_then(|c| area_between_curves(&c, &truth));
    let spe = run_spe(&data, &cfg.priors, &cfg.pairs, &cfg.spe, &mut rng).and_then(|ensemble| {
        let band = ensemble_curve_band(&ensemble, &data, &grid, &[0.5])?;
        let median = area_between_curves(&band.quantile_curve(0)?, &truth)?;
        let mean = area_between_curves(&band.expected_curve()?, &truth)?;
        Ok((median, mean))
    });
    Ok(TrialOutcome {
        spe,
        naive,
        labeled_positives,
    })
}

/// Run every budget for `cfg.trials` trials on a fully labeled dataset.
/// Failed estimates are recorded in the rows rather than aborting.
pub fn run_experiment(scores: &[f64], labels: &[bool], cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if scores.len() != labels.len() {
        return Err(SpeError::Validation(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if cfg.trials == 0 || cfg.budgets.is_empty() {
        return Err(SpeError::Validation("experiment needs at least one budget and one trial".into()));
    }
    let n = cfg.subsample.map_or(scores.len(), |s| s.min(scores.len()));
    if let Some(&b) = cfg.budgets.iter().find(|&&b| b > n) {
        return Err(SpeError::Domain(format!("label budget {b} exceeds {n} items")));
    }
    let mut rows = Vec::with_capacity(cfg.budgets.len() * cfg.trials * 3);
    for &budget in &cfg.budgets {
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.seed, &[budget as u64, trial as u64]);
            let outcome = run_trial(scores, labels, budget, cfg, seed)?;
            let row = |method, r: std::result::Result<f64, String>| TrialRow {
                budget,
                trial,
                method,
                error: r.as_ref().ok().copied(),
                labeled_positives: outcome.labeled_positives,
                failure: r.err(),
            };
            let (median, mean) = match &outcome.spe {
                Ok((a, b)) => (Ok(*a), Ok(*b)),
                Err(e) => (Err(e.to_string()), Err(e.to_string())),
            };
            rows.push(row(Method::Spe, median));
            rows.push(row(Method::SpeMean, mean));
            rows.push(row(Method::Naive, outcome.naive.as_ref().copied().map_err(|e| e.to_string())));
        }
    }
    let summary = summarize(&rows);
    Ok(ExperimentResult { rows, summary })
}

/// Aggregate trial rows per `(budget, method)`; failures are counted and
/// left out of the statistics.
pub fn summarize(rows: &[TrialRow]) -> Vec<MethodSummary> {
    let mut keys: Vec<(usize, Method)> = rows.iter().map(|r| (r.budget, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(budget, method)| {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.budget == budget && r.method == method).collect();
            let mut errors: Vec<f64> = group.iter().filter_map(|r| r.error).collect();
            errors.sort_by(f64::total_cmp);
            let k = errors.len();
            let mean = (k > 0).then(|| errors.iter().sum::<f64>() / k as f64);
            let std_error = mean.filter(|_| k > 1).map(|m| {
                let var = errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (k - 1) as f64;
                (var / k as f64).sqrt()
            });
            MethodSummary {
                budget,
                method,
                completed: k,
                failures: group.len() - k,
                mean,
                std_error,
                median: median(&errors),
            }
        })
        .collect()
}

/// Median of sorted values.
pub fn median(sorted: &[f64]) -> Option<f64> {
    let k = sorted.len();
    match k {
        0 => None,
        _ if k % 2 == 1 => Some(sorted[k / 2]),
        _ => Some(0.5 * (sorted[k / 2 - 1] + sorted[k / 2])),
    }
}

impl ExperimentResult {
    pub fn summary_for(&self, budget: usize, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.budget == budget && s.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(budget: usize, method: Method, error: Option<f64>) -> TrialRow {
        TrialRow {
            budget,
            trial: 0,
            method,
            error,
            labeled_positives: 1,
            failure: error.is_none().then(|| "failed".to_string()),
        }
    }

    #[test]
    fn summary_statistics() {
        let rows = vec![
            row(10, Method::Naive, Some(0.1)),
            row(10, Method::Naive, Some(0.3)),
            row(10, Method::Naive, None),
            row(10, Method::Spe, Some(0.2)),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        let naive = s.iter().find(|m| m.method == Method::Naive).unwrap();
        assert_eq!((naive.completed, naive.failures), (2, 1));
        assert!((naive.mean.unwrap() - 0.2).abs() < 1e-15);
        assert!((naive.median.unwrap() - 0.2).abs() < 1e-15);
        assert!((naive.std_error.unwrap() - 0.1).abs() < 1e-12);
        let spe = s.iter().find(|m| m.method == Method::Spe).unwrap();
        assert_eq!(spe.std_error, None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[1.0, 2.0, 5.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 4.0, 5.0]), Some(3.0));
    }
}
