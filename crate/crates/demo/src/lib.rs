//! Browser front end: draw a synthetic detector, reveal a few labels, and
//! watch the estimated precision-recall band against the hidden truth.
//!
//! Everything crosses the wasm boundary as JSON strings so the page needs no
//! bindings beyond `JSON.parse`.

use serde::{Deserialize, Serialize};
use spe::data::{sample_label_budget, synthetic};
use spe::mixture::PriorSpec;
use spe::performance::{
    area_between_curves, condition_probability, empirical_pr_curve, ensemble_curve_band, naive_estimate,
    observed_thresholds, recall_grid, recalibrate_threshold, ConditionSpec, PerformanceCurve,
};
use spe::rng::seeded;
use spe::{run_spe, FamilyTag, MixtureParams, PosteriorEnsemble, ScoreDataset, ScoreDistribution, SpeOptions};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
pub struct Component {
    pub family: FamilyTag,
    pub params: Vec<f64>,
}

impl Component {
    fn build(&self) -> spe::Result<ScoreDistribution> {
        ScoreDistribution::new(self.family, self.params.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Scenario {
    pub pi: f64,
    pub negative: Component,
    pub positive: Component,
    pub items: usize,
    pub labels: usize,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_samples() -> usize {
    300
}

fn default_grid() -> usize {
    100
}

impl Scenario {
    fn theta(&self) -> spe::Result<MixtureParams> {
        MixtureParams::new(self.pi, self.negative.build()?, self.positive.build()?)
    }
}

#[derive(Debug, Serialize)]
pub struct BandView {
    pub recall: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub median: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub truth: Vec<Option<f64>>,
    /// Absent when the revealed labels contain no positive.
    pub naive: Option<Vec<Option<f64>>>,
    pub spe_error: Option<f64>,
    pub naive_error: Option<f64>,
    pub ess: f64,
    pub members: usize,
    pub posterior_pi: f64,
    pub labeled_positives: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ConditionView {
    pub tau: Vec<f64>,
    pub probability: Vec<f64>,
    /// Whether the condition holds on the hidden true labels.
    pub holds_on_truth: Vec<bool>,
    pub recommended_tau: f64,
    pub recommended_probability: f64,
    pub met: bool,
}

#[derive(Debug, Serialize)]
pub struct DensityView {
    pub x: Vec<f64>,
    pub negative: Vec<f64>,
    pub positive: Vec<f64>,
    /// Histogram of one synthetic draw, normalized to a density.
    pub bin_edges: Vec<f64>,
    pub histogram: Vec<f64>,
}

/// A synthetic dataset with its hidden labels and a fitted ensemble.
pub struct Evaluation {
    scores: Vec<f64>,
    truth: Vec<bool>,
    data: ScoreDataset,
    ensemble: PosteriorEnsemble,
    grid: usize,
}

fn raster(curve: &PerformanceCurve, grid: &[f64]) -> spe::Result<PerformanceCurve> {
    PerformanceCurve::from_grid(grid, &curve.rasterize(grid))
}

impl Evaluation {
    pub fn run(s: &Scenario) -> spe::Result<Self> {
        let theta = s.theta()?;
        let mut rng = seeded(s.seed);
        let (scores, truth) = synthetic(&theta, s.items, &mut rng);
        let data = sample_label_budget(&scores, &truth, s.labels, &mut rng)?;
        let opts = SpeOptions {
            samples: s.samples,
            ..SpeOptions::default()
        };
        let pair = spe::mixture::MixtureLayout::new(s.negative.family, s.positive.family);
        let ensemble = run_spe(&data, &PriorSpec::default(), &[pair], &opts, &mut rng)?;
        Ok(Self {
            scores,
            truth,
            data,
            ensemble,
            grid: s.grid,
        })
    }

    pub fn band(&self) -> spe::Result<BandView> {
        let grid = recall_grid(self.grid);
        let band = ensemble_curve_band(&self.ensemble, &self.data, &grid, &[0.05, 0.5, 0.95])?;
        let level = |k: usize| band.points.iter().map(|p| p.quantiles[k]).collect::<Vec<_>>();
        let truth = raster(&empirical_pr_curve(&self.scores, &self.truth)?, &grid)?;
        let median = band.quantile_curve(1)?;
        let naive = naive_estimate(&self.data).and_then(|c| raster(&c, &grid)).ok();
        let labeled_positives = self.data.labels().iter().filter(|&&y| y == Some(true)).count();
        Ok(BandView {
            lower: level(0),
            median: level(1),
            upper: level(2),
            truth: truth.rasterize(&grid),
            spe_error: area_between_curves(&median, &truth).ok(),
            naive_error: naive.as_ref().and_then(|n| area_between_curves(n, &truth).ok()),
            naive: naive.map(|n| n.rasterize(&grid)),
            recall: grid,
            ess: self.ensemble.ess,
            members: self.ensemble.len(),
            posterior_pi: self.ensemble.mean_pi(),
            labeled_positives,
            warnings: self.ensemble.warnings.clone(),
        })
    }

    pub fn condition(&self, recall: f64, precision: f64, confidence: f64) -> spe::Result<ConditionView> {
        let cond = ConditionSpec::new(recall, precision)?;
        let taus = observed_thresholds(&self.scores);
        let table = condition_probability(&self.ensemble, &self.data, cond, &taus)?;
        let rec = recalibrate_threshold(&table, confidence)?;
        let order = spe::performance::ScoreOrder::new(&self.scores);
        let prefix = order.positive_prefix(&self.truth);
        let holds_on_truth = taus
            .iter()
            .map(|&t| {
                let (r, p) = spe::performance::sample_metrics_at(&order, &prefix, t);
                cond.holds(r, p)
            })
            .collect();
        Ok(ConditionView {
            probability: table.rows.iter().map(|r| r.probability).collect(),
            tau: taus,
            holds_on_truth,
            recommended_tau: rec.tau,
            recommended_probability: rec.probability,
            met: rec.met,
        })
    }
}

/// Component densities on `[0, x_max]` and a histogram of one draw.
pub fn densities(s: &Scenario, points: usize, bins: usize) -> spe::Result<DensityView> {
    let theta = s.theta()?;
    let (scores, _) = synthetic(&theta, s.items, &mut seeded(s.seed));
    let x_max = scores.iter().copied().fold(0.0, f64::max) * 1.05;
    let points = points.max(2);
    let bins = bins.max(1);
    let x: Vec<f64> = (0..points).map(|i| x_max * i as f64 / (points - 1) as f64).collect();
    let weighted = |d: &ScoreDistribution, w: f64| x.iter().map(|&v| w * d.pdf(v)).collect::<Vec<_>>();
    let width = x_max / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in &scores {
        let k = ((v / width) as usize).min(bins - 1);
        counts[k] += 1.0;
    }
    let n = scores.len() as f64;
    Ok(DensityView {
        negative: weighted(&theta.negative, 1.0 - theta.pi),
        positive: weighted(&theta.positive, theta.pi),
        bin_edges: (0..=bins).map(|k| k as f64 * width).collect(),
        histogram: counts.iter().map(|c| c / (n * width)).collect(),
        x,
    })
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn parse(json: &str) -> Result<Scenario, JsError> {
    serde_json::from_str(json).map_err(js_err)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

/// Fitted scenario kept alive between calls so the condition explorer does
/// not refit.
#[wasm_bindgen]
pub struct Session {
    inner: Evaluation,
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario_json: &str) -> Result<Session, JsError> {
        let inner = Evaluation::run(&parse(scenario_json)?).map_err(js_err)?;
        Ok(Session { inner })
    }

    /// Posterior band, truth and naive curves as JSON.
    pub fn band(&self) -> Result<String, JsError> {
        to_json(&self.inner.band().map_err(js_err)?)
    }

    /// Probability of `recall > r and precision > p` per threshold.
    pub fn condition(&self, recall: f64, precision: f64, confidence: f64) -> Result<String, JsError> {
        to_json(&self.inner.condition(recall, precision, confidence).map_err(js_err)?)
    }
}

#[wasm_bindgen(js_name = densityCurves)]
pub fn density_curves(scenario_json: &str, points: usize, bins: usize) -> Result<String, JsError> {
    to_json(&densities(&parse(scenario_json)?, points, bins).map_err(js_err)?)
}

/// Family names accepted in scenarios.
#[wasm_bindgen]
pub fn families() -> String {
    let names: Vec<&str> = FamilyTag::ALL.iter().map(|f| f.name()).collect();
    serde_json::to_string(&names).expect("names serialize")
}
