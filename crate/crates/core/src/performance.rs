//! Precision-recall curves: population curves from model parameters,
//! sample curves from (completed) labels, posterior bands, the area error
//! metric, and threshold conditions.
//!
//! Curves are stored in sweep order (threshold descending, so recall is
//! nondecreasing). Reading a curve at recall `r` uses step interpolation
//! with the last value carried forward: the precision of the last sweep
//! point whose recall is at most `r`. Below the first point the curve is
//! extended flat to recall 0.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpeError};
use crate::inference::PosteriorEnsemble;
use crate::mixture::{MixtureParams, ScoreDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub recall: f64,
    pub precision: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCurve {
    points: Vec<CurvePoint>,
}

impl PerformanceCurve {
    /// Points must be in sweep order with values in `[0, 1]`.
    pub fn from_points(points: Vec<CurvePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(SpeError::Curve("curve has no points".into()));
        }
        for p in &points {
            if !((0.0..=1.0).contains(&p.recall) && (0.0..=1.0).contains(&p.precision)) {
                return Err(SpeError::Curve(format!("point {p:?} outside the unit square")));
            }
        }
        if points.windows(2).any(|w| w[1].recall < w[0].recall) {
            return Err(SpeError::Curve("recall must be nondecreasing along the curve".into()));
        }
        Ok(Self { points })
    }

    /// Curve through `(grid[j], precision[j])`, skipping undefined entries.
    pub fn from_grid(grid: &[f64], precision: &[Option<f64>]) -> Result<Self> {
        Self::from_points(
            grid.iter()
                .zip(precision)
                .filter_map(|(&recall, p)| {
                    p.map(|precision| CurvePoint {
                        recall,
                        precision,
                        threshold: None,
                    })
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn max_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }

    /// Step-interpolated precision at recall `r`: the last sweep point whose
    /// recall does not exceed `r`, or the first point below the curve's
    /// recall range. `None` beyond the largest recall.
    pub fn precision_at(&self, r: f64) -> Option<f64> {
        if r > self.max_recall() {
            return None;
        }
        let k = self.points.partition_point(|p| p.recall <= r);
        Some(self.points[k.saturating_sub(1)].precision)
    }

    pub fn rasterize(&self, grid: &[f64]) -> Vec<Option<f64>> {
        grid.iter().map(|&r| self.precision_at(r)).collect()
    }
}

/// `r_j = j / size` for `j = 1..=size`.
pub fn recall_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|j| j as f64 / size as f64).collect()
}

/// Items sorted by descending score and grouped into ties, so that many
/// label vectors over the same scores can be swept cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOrder {
    order: Vec<usize>,
    group_ends: Vec<usize>,
    thresholds: Vec<f64>,
}

impl ScoreOrder {
    pub fn new(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut group_ends = Vec::new();
        let mut thresholds = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let last = k + 1 == order.len() || scores[order[k + 1]] != scores[i];
            if last {
                group_ends.push(k + 1);
                thresholds.push(scores[i]);
            }
        }
        Self {
            order,
            group_ends,
            thresholds,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Distinct score values, descending.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of items with score `>= tau`.
    pub fn count_at_or_above(&self, tau: f64) -> usize {
        let g = self.thresholds.partition_point(|&t| t >= tau);
        if g == 0 {
            0
        } else {
            self.group_ends[g - 1]
        }
    }

    /// `prefix[k]` = positives among the top `k` items in sweep order.
    pub fn positive_prefix(&self, labels: &[bool]) -> Vec<u32> {
        let mut prefix = Vec::with_capacity(self.order.len() + 1);
        let mut acc = 0u32;
        prefix.push(0);
        for &i in &self.order {
            acc += labels[i] as u32;
            prefix.push(acc);
        }
        prefix
    }

    /// Sample PR curve for one full labeling of the scores.
    pub fn curve(&self, labels: &[bool]) -> Result<PerformanceCurve> {
        if labels.len() != self.order.len() {
            return Err(SpeError::Curve(format!(
                "{} labels for {} scores",
                labels.len(),
                self.order.len()
            )));
        }
        let mut tp = 0usize;
        let mut start = 0usize;
        let total: usize = labels.iter().filter(|&&y| y).count();
        if total == 0 {
            return Err(SpeError::Curve("no positive labels; precision-recall curve is undefined".into()));
        }
        let mut points = Vec::with_capacity(self.group_ends.len());
        for (&end, &tau) in self.group_ends.iter().zip(&self.thresholds) {
            tp += self.order[start..end].iter().filter(|&&i| labels[i]).count();
            start = end;
            points.push(CurvePoint {
                recall: tp as f64 / total as f64,
                precision: tp as f64 / end as f64,
                threshold: Some(tau),
            });
        }
        Ok(PerformanceCurve { points })
    }
}

/// Sweep the threshold down through the observed scores; an item counts as
/// predicted positive when its score is `>= tau`.
pub fn empirical_pr_curve(scores: &[f64], labels: &[bool]) -> Result<PerformanceCurve> {
    if scores.len() != labels.len() {
        return Err(SpeError::Curve(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    ScoreOrder::new(scores).curve(labels)
}

/// Curve from the labeled items alone.
pub fn naive_estimate(data: &ScoreDataset) -> Result<PerformanceCurve> {
    let (scores, labels) = data
        .labeled_subset()
        .ok_or_else(|| SpeError::Curve("no labeled items".into()))?;
    empirical_pr_curve(&scores, &labels)
}

/// `R(tau) = P(s >= tau | y = 1)`.
pub fn recall_population(tau: f64, theta: &MixtureParams) -> f64 {
    theta.positive.survival(tau)
}

/// `P(tau) = pi R / (pi R + (1 - pi) S0)`; `None` when no mass lies above
/// `tau`.
pub fn precision_population(tau: f64, theta: &MixtureParams) -> Option<f64> {
    let tp = theta.pi * theta.positive.survival(tau);
    let fp = (1.0 - theta.pi) * theta.negative.survival(tau);
    let den = tp + fp;
    (den > 0.0).then(|| tp / den)
}

/// Precision at the threshold where population recall equals `r`.
pub fn precision_at_recall(r: f64, theta: &MixtureParams) -> Result<Option<f64>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(SpeError::Domain(format!("recall {r} outside (0, 1]")));
    }
    let tau = theta.positive.quantile(1.0 - r)?;
    Ok(precision_population(tau, theta))
}

/// Population curve sampled on a recall grid.
pub fn population_pr_curve(theta: &MixtureParams, grid: &[f64]) -> Result<PerformanceCurve> {
    let mut points = Vec::with_capacity(grid.len());
    for &r in grid {
        let tau = theta.positive.quantile(1.0 - r)?;
        if let Some(precision) = precision_population(tau, theta) {
            points.push(CurvePoint {
                recall: r,
                precision,
                threshold: Some(tau),
            });
        }
    }
    PerformanceCurve::from_points(points)
}

/// `integral |P_a(r) - P_b(r)| dr` over `[0, min(max recall a, max recall b)]`.
pub fn area_between_curves(a: &PerformanceCurve, b: &PerformanceCurve) -> Result<f64> {
    let upper = a.max_recall().min(b.max_recall());
    if !(upper > 0.0) {
        return Err(SpeError::Metric("curves share no recall range".into()));
    }
    let mut knots: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|p| p.recall)
        .filter(|&r| r > 0.0 && r < upper)
        .collect();
    knots.push(0.0);
    knots.push(upper);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut area = 0.0;
    for w in knots.windows(2) {
        // both curves are constant on [w[0], w[1])
        let pa = a.precision_at(w[0]).expect("knot within range");
        let pb = b.precision_at(w[0]).expect("knot within range");
        area += (pa - pb).abs() * (w[1] - w[0]);
    }
    Ok(area)
}

/// Weighted quantile: the smallest value whose cumulative weight reaches
/// `q` of the total.
pub fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for &(v, w) in sorted {
        acc += w;
        if acc >= target - 1e-12 * total {
            return v;
        }
    }
    sorted.last().map_or(f64::NAN, |p| p.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub recall: f64,
    /// One entry per quantile level; `None` when every member is undefined
    /// here.
    pub quantiles: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Members without a defined precision at this recall.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBand {
    pub levels: Vec<f64>,
    pub points: Vec<BandPoint>,
    /// Members whose completed labeling has no positives.
    pub members_without_positives: usize,
}

impl CurveBand {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.recall).collect()
    }

    /// Weighted-mean precision as a curve over the grid.
    pub fn expected_curve(&self) -> Result<PerformanceCurve> {
        let grid = self.grid();
        let mean: Vec<Option<f64>> = self.points.iter().map(|p| p.mean).collect();
        PerformanceCurve::from_grid(&grid, &mean)
    }

    /// Curve through the quantile at `level_index`.
    pub fn quantile_curve(&self, level_index: usize) -> Result<PerformanceCurve> {
        let grid = self.grid();
        let q: Vec<Option<f64>> = self.points.iter().map(|p| p.quantiles[level_index]).collect();
        PerformanceCurve::from_grid(&grid, &q)
    }
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(SpeError::Validation("at least one quantile level is required".into()));
    }
    if levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpeError::Validation(format!(
            "quantile levels must be strictly increasing in (0, 1), got {levels:?}"
        )));
    }
    Ok(())
}

/// Pointwise weighted quantiles and weighted mean of the members' sample
/// curves on `grid`.
pub fn ensemble_curve_band(
    ensemble: &PosteriorEnsemble,
    data: &ScoreDataset,
    grid: &[f64],
    levels: &[f64],
) -> Result<CurveBand> {
    validate_levels(levels)?;
    if ensemble.is_empty() {
        return Err(SpeError::Curve("ensemble is empty".into()));
    }
    let order = ScoreOrder::new(data.scores());
    let mut columns: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(ensemble.len()); grid.len()];
    let mut without_positives = 0;
    for m in 0..ensemble.len() {
        let labels = ensemble.merged_labels(data, m);
        let w = ensemble.members[m].weight;
        match order.curve(&labels) {
            Ok(curve) => {
                for (col, p) in columns.iter_mut().zip(curve.rasterize(grid)) {
                    if let Some(p) = p {
                        col.push((p, w));
                    }
                }
            }
            Err(_) => without_positives += 1,
        }
    }
    let points = grid
        .iter()
        .zip(columns)
        .map(|(&recall, mut col)| {
            let excluded = ensemble.len() - col.len();
            if col.is_empty() {
                return BandPoint {
                    recall,
                    quantiles: vec![None; levels.len()],
                    mean: None,
                    excluded,
                };
            }
            col.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = col.iter().map(|p| p.1).sum();
            let (lo, hi) = (col[0].0, col[col.len() - 1].0);
            let mean = if lo == hi {
                lo
            } else {
                (col.iter().map(|(v, w)| v * w).sum::<f64>() / total).clamp(lo, hi)
            };
            BandPoint {
                recall,
                quantiles: levels.iter().map(|&q| Some(weighted_quantile(&col, total, q))).collect(),
                mean: Some(mean),
                excluded,
            }
        })
        .collect();
    Ok(CurveBand {
        levels: levels.to_vec(),
        points,
        members_without_positives: without_positives,
    })
}

/// `C(tau) = [R(tau) > recall_floor and P(tau) > precision_floor]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub recall_floor: f64,
    pub precision_floor: f64,
}

impl ConditionSpec {
    pub fn new(recall_floor: f64, precision_floor: f64) -> Result<Self> {
        for (name, v) in [("recall", recall_floor), ("precision", precision_floor)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SpeError::Validation(format!("{name} floor {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            recall_floor,
            precision_floor,
        })
    }

    /// Whether the sample metrics at a threshold satisfy the condition.
    pub fn holds(&self, recall: Option<f64>, precision: Option<f64>) -> bool {
        matches!((recall, precision), (Some(r), Some(p)) if r > self.recall_floor && p > self.precision_floor)
    }
}

/// Sample recall and precision at `tau`; `None` where undefined.
pub fn sample_metrics_at(order: &ScoreOrder, prefix: &[u32], tau: f64) -> (Option<f64>, Option<f64>) {
    let total = *prefix.last().unwrap_or(&0);
    let k = order.count_at_or_above(tau);
    let tp = prefix[k] as f64;
    let recall = (total > 0).then(|| tp / total as f64);
    let precision = (k > 0).then(|| tp / k as f64);
    (recall, precision)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub tau: f64,
    pub probability: f64,
    pub expected_recall: Option<f64>,
    pub expected_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionTable {
    pub condition: ConditionSpec,
    pub rows: Vec<ConditionRow>,
}

/// Posterior probability of the condition at every threshold in `taus`,
/// with posterior expected recall and precision alongside.
pub fn condition_probability(
    ensemble: &PosteriorEnsemble,
    data: &ScoreDataset,
    condition: ConditionSpec,
    taus: &[f64],
) -> Result<ConditionTable> {
    if ensemble.is_empty() {
        return Err(SpeError::Inference("ensemble is empty".into()));
    }
    let order = ScoreOrder::new(data.scores());
    let k = taus.len();
    let mut prob = vec![0.0; k];
    let mut rec = vec![(0.0, 0.0); k];
    let mut prec = vec![(0.0, 0.0); k];
    for m in 0..ensemble.len() {
        let labels = ensemble.merged_labels(data, m);
        let w = ensemble.members[m].weight;
        let prefix = order.positive_prefix(&labels);
        for (j, &tau) in taus.iter().enumerate() {
            let (r, p) = sample_metrics_at(&order, &prefix, tau);
            if condition.holds(r, p) {
                prob[j] += w;
            }
            if let Some(r) = r {
                rec[j].0 += w * r;
                rec[j].1 += w;
            }
            if let Some(p) = p {
                prec[j].0 += w * p;
                prec[j].1 += w;
            }
        }
    }
    let ratio = |(num, den): (f64, f64)| (den > 0.0).then(|| (num / den).clamp(0.0, 1.0));
    let rows = (0..k)
        .map(|j| ConditionRow {
            tau: taus[j],
            probability: prob[j].clamp(0.0, 1.0),
            expected_recall: ratio(rec[j]),
            expected_precision: ratio(prec[j]),
        })
        .collect();
    Ok(ConditionTable { condition, rows })
}

/// Distinct observed scores, ascending: the default threshold grid.
pub fn observed_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = ScoreOrder::new(scores).thresholds().to_vec();
    t.reverse();
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub tau: f64,
    pub probability: f64,
    pub expected_recall: Option<f64>,
    pub expected_precision: Option<f64>,
    pub confidence: f64,
    /// False when no threshold reaches the requested confidence; `tau` is
    /// then the most probable threshold.
    pub met: bool,
}

/// Highest expected recall among thresholds whose condition probability is
/// at least `confidence`; otherwise the most probable threshold, flagged.
pub fn recalibrate_threshold(table: &ConditionTable, confidence: f64) -> Result<Recommendation> {
    if table.rows.is_empty() {
        return Err(SpeError::Domain("threshold grid is empty".into()));
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(SpeError::Validation(format!("confidence {confidence} outside [0, 1]")));
    }
    let recall = |row: &ConditionRow| row.expected_recall.unwrap_or(0.0);
    let qualifying = table
        .rows
        .iter()
        .filter(|row| row.probability >= confidence)
        .fold(None::<&ConditionRow>, |best, row| match best {
            Some(b) if recall(b) >= recall(row) => Some(b),
            _ => Some(row),
        });
    let (row, met) = match qualifying {
        Some(row) => (row, true),
        None => {
            let row = table.rows.iter().fold(&table.rows[0], |b, row| {
                if row.probability > b.probability {
                    row
                } else {
                    b
                }
            });
            (row, false)
        }
    };
    Ok(Recommendation {
        tau: row.tau,
        probability: row.probability,
        expected_recall: row.expected_recall,
        expected_precision: row.expected_precision,
        confidence,
        met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[(f64, f64)]) -> PerformanceCurve {
        PerformanceCurve::from_points(
            points
                .iter()
                .map(|&(recall, precision)| CurvePoint {
                    recall,
                    precision,
                    threshold: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn four_item_sweep() {
        let c = empirical_pr_curve(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        let got: Vec<(f64, f64)> = c.points().iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(got, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0), (1.0, 0.5)]);
    }

    #[test]
    fn ties_form_one_step() {
        let c = empirical_pr_curve(&[0.9, 0.5, 0.5, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(c.points().len(), 3);
        assert_eq!((c.points()[1].recall, c.points()[1].precision), (1.0, 2.0 / 3.0));
    }

    #[test]
    fn no_positives_is_an_error() {
        assert!(matches!(empirical_pr_curve(&[0.3, 0.4], &[false, false]), Err(SpeError::Curve(_))));
    }

    #[test]
    fn naive_with_two_labels() {
        let data = ScoreDataset::new(vec![0.8, 0.3, 0.5], vec![Some(true), Some(false), None]).unwrap();
        let c = naive_estimate(&data).unwrap();
        let got: Vec<(f64, f64)> = c.points().iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(got, vec![(1.0, 1.0), (1.0, 0.5)]);
    }

    #[test]
    fn step_interpolation() {
        let c = curve(&[(0.5, 1.0), (0.5, 0.5), (1.0, 0.6)]);
        assert_eq!(c.precision_at(0.1), Some(1.0));
        assert_eq!(c.precision_at(0.5), Some(0.5));
        assert_eq!(c.precision_at(0.75), Some(0.5));
        assert_eq!(c.precision_at(1.0), Some(0.6));
        let short = curve(&[(0.4, 1.0)]);
        assert_eq!(short.precision_at(0.5), None);
    }

    #[test]
    fn rectangle_area() {
        let a = curve(&[(1.0, 1.0)]);
        let b = curve(&[(1.0, 0.5)]);
        assert!((area_between_curves(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(area_between_curves(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn two_step_area_by_hand() {
        // a: 1.0 on [0, .7), 0.6 on [.7, .8); b: 0.8 on [0, .6), 0.7 on [.6, .8)
        let a = curve(&[(0.5, 1.0), (0.7, 0.6), (1.0, 0.6)]);
        let b = curve(&[(0.25, 0.8), (0.6, 0.7), (0.8, 0.9)]);
        let expected = 0.6 * 0.2 + 0.1 * 0.3 + 0.1 * 0.1;
        let got = area_between_curves(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn weighted_quantiles() {
        let v = [(0.1, 0.25), (0.2, 0.25), (0.3, 0.5)];
        assert_eq!(weighted_quantile(&v, 1.0, 0.05), 0.1);
        assert_eq!(weighted_quantile(&v, 1.0, 0.5), 0.2);
        assert_eq!(weighted_quantile(&v, 1.0, 0.95), 0.3);
    }

    #[test]
    fn level_validation() {
        assert!(validate_levels(&[0.05, 0.5, 0.95]).is_ok());
        assert!(validate_levels(&[0.5, 0.05]).is_err());
        assert!(validate_levels(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn score_order_counts() {
        let o = ScoreOrder::new(&[0.3, 0.9, 0.3, 0.1]);
        assert_eq!(o.thresholds(), &[0.9, 0.3, 0.1]);
        assert_eq!(o.count_at_or_above(0.3), 3);
        assert_eq!(o.count_at_or_above(0.31), 1);
        assert_eq!(o.count_at_or_above(1.0), 0);
        assert_eq!(o.count_at_or_above(0.0), 4);
    }

    #[test]
    fn recalibration_rules() {
        let row = |tau: f64, probability: f64, r: f64| ConditionRow {
            tau,
            probability,
            expected_recall: Some(r),
            expected_precision: Some(0.5),
        };
        let cond = ConditionSpec::new(0.5, 0.5).unwrap();
        let t = ConditionTable {
            condition: cond,
            rows: vec![row(0.1, 0.0, 1.0), row(0.2, 1.0, 0.8), row(0.3, 0.0, 0.5)],
        };
        let rec = recalibrate_threshold(&t, 0.9).unwrap();
        assert!(rec.met && rec.tau == 0.2);
        let t = ConditionTable {
            condition: cond,
            rows: vec![row(0.1, 0.3, 1.0), row(0.2, 0.3, 0.8)],
        };
        let rec = recalibrate_threshold(&t, 0.9).unwrap();
        assert!(!rec.met && rec.tau == 0.1);
        let empty = ConditionTable { condition: cond, rows: vec![] };
        assert!(matches!(recalibrate_threshold(&empty, 0.9), Err(SpeError::Domain(_))));
    }
}
