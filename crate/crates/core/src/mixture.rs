//! Two-component generative model for classifier scores.
//!
//! Scores of negatives follow `p0(s | theta0)` and scores of positives
//! `p1(s | theta1)`; an item is positive with probability `pi`. Labeled items
//! contribute their class-specific factor, unlabeled items the mixture
//! density with the label summed out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    fit::unconstrained_bounds, moment_init, FamilyTag, ParamKind, ScoreDistribution,
};
use crate::error::{Result, SpeError};
use crate::optimize::{minimize, Bounds, MinimizeOptions, Termination};
use crate::rng::{derive_seed, seeded};

/// Scores for every item plus the labels known so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDataset {
    scores: Vec<f64>,
    labels: Vec<Option<bool>>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl ScoreDataset {
    /// Scores must be finite and positive (the score families live on the
    /// half line); ingestion normalizes raw scores into `(0, 1]`.
    pub fn new(scores: Vec<f64>, labels: Vec<Option<bool>>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(SpeError::Validation(format!(
                "{} scores but {} label slots",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(SpeError::Validation("dataset has no items".into()));
        }
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return Err(SpeError::Validation(format!("item {i}: score {s} must be finite and > 0")));
        }
        let (labeled, unlabeled) = (0..scores.len()).partition(|&i| labels[i].is_some());
        Ok(Self {
            scores,
            labels,
            labeled,
            unlabeled,
        })
    }

    pub fn fully_labeled(scores: Vec<f64>, labels: &[bool]) -> Result<Self> {
        Self::new(scores, labels.iter().map(|&y| Some(y)).collect())
    }

    pub fn unlabeled(scores: Vec<f64>) -> Result<Self> {
        let n = scores.len();
        Self::new(scores, vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Option<bool>] {
        &self.labels
    }

    pub fn labeled_indices(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled_indices(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.unlabeled.is_empty()
    }

    /// Labels for all items, with `completion[k]` filling the `k`-th
    /// unlabeled index.
    pub fn merge_labels(&self, completion: &[bool]) -> Vec<bool> {
        debug_assert_eq!(completion.len(), self.unlabeled.len());
        let mut out: Vec<bool> = self.labels.iter().map(|y| y.unwrap_or(false)).collect();
        for (&i, &y) in self.unlabeled.iter().zip(completion) {
            out[i] = y;
        }
        out
    }

    /// Labeled items only, as a fully labeled dataset.
    pub fn labeled_subset(&self) -> Option<(Vec<f64>, Vec<bool>)> {
        if self.labeled.is_empty() {
            return None;
        }
        Some(
            self.labeled
                .iter()
                .map(|&i| (self.scores[i], self.labels[i].unwrap_or(false)))
                .unzip(),
        )
    }
}

/// `theta = {pi, theta0, theta1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub pi: f64,
    pub negative: ScoreDistribution,
    pub positive: ScoreDistribution,
}

impl MixtureParams {
    pub fn new(pi: f64, negative: ScoreDistribution, positive: ScoreDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(SpeError::Domain(format!("mixture weight {pi} outside [0, 1]")));
        }
        Ok(Self { pi, negative, positive })
    }

    pub fn families(&self) -> (FamilyTag, FamilyTag) {
        (self.negative.family(), self.positive.family())
    }

    /// `ln((1 - pi) p0(s))` and `ln(pi p1(s))`.
    #[inline]
    pub fn joint_log_densities(&self, s: f64) -> (f64, f64) {
        (
            ln_weight(1.0 - self.pi) + self.negative.log_pdf(s),
            ln_weight(self.pi) + self.positive.log_pdf(s),
        )
    }

    /// `p(y = 1 | s, theta)`; `None` when both class densities vanish at `s`.
    pub fn responsibility(&self, s: f64) -> Option<f64> {
        let (l0, l1) = self.joint_log_densities(s);
        if l0 == f64::NEG_INFINITY && l1 == f64::NEG_INFINITY {
            return None;
        }
        Some(1.0 / (1.0 + (l0 - l1).exp()))
    }

    /// Mixture density `(1 - pi) p0(s) + pi p1(s)`.
    pub fn pdf(&self, s: f64) -> f64 {
        let (l0, l1) = self.joint_log_densities(s);
        log_add_exp(l0, l1).exp()
    }
}

#[inline]
fn ln_weight(w: f64) -> f64 {
    if w <= 0.0 {
        f64::NEG_INFINITY
    } else {
        w.ln()
    }
}

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamPrior {
    Flat,
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl ParamPrior {
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            ParamPrior::Flat => 0.0,
            ParamPrior::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - crate::distributions::LN_SQRT_2PI
            }
            ParamPrior::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let power = if shape == 1.0 { 0.0 } else { (shape - 1.0) * x.ln() };
                power - x / scale - statrs::function::gamma::ln_gamma(shape) - shape * scale.ln()
            }
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            ParamPrior::Flat => true,
            ParamPrior::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            ParamPrior::Gamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SpeError::Config(format!("invalid {what} prior {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPrior {
    pub fn log_density(&self, pi: f64) -> f64 {
        if !(0.0..=1.0).contains(&pi) {
            return f64::NEG_INFINITY;
        }
        if self.alpha == 1.0 && self.beta == 1.0 {
            return 0.0;
        }
        let term = |a: f64, x: f64| if a == 1.0 { 0.0 } else { (a - 1.0) * ln_weight(x) };
        term(self.alpha, pi) + term(self.beta, 1.0 - pi)
            - statrs::function::beta::ln_beta(self.alpha, self.beta)
    }
}

/// Priors on `theta`: a beta prior on `pi` and one prior per parameter kind,
/// applied to every component parameter of that kind on its natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub pi: BetaPrior,
    pub location: ParamPrior,
    pub log_location: ParamPrior,
    pub positive: ParamPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            pi: BetaPrior { alpha: 1.0, beta: 1.0 },
            location: ParamPrior::Normal { mean: 0.5, sd: 0.25 },
            log_location: ParamPrior::Normal { mean: -1.0, sd: 1.5 },
            positive: ParamPrior::Gamma { shape: 2.0, scale: 1.0 },
        }
    }
}

impl PriorSpec {
    pub fn flat() -> Self {
        Self {
            pi: BetaPrior { alpha: 1.0, beta: 1.0 },
            location: ParamPrior::Flat,
            log_location: ParamPrior::Flat,
            positive: ParamPrior::Flat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let BetaPrior { alpha, beta } = self.pi;
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(SpeError::Config(format!("beta prior needs alpha, beta > 0, got ({alpha}, {beta})")));
        }
        self.location.validate("location")?;
        self.log_location.validate("log-location")?;
        self.positive.validate("positive-parameter")
    }

    pub fn for_kind(&self, kind: ParamKind) -> &ParamPrior {
        match kind {
            ParamKind::Location => &self.location,
            ParamKind::LogLocation => &self.log_location,
            ParamKind::Positive => &self.positive,
        }
    }

    /// Log prior of one component's parameters.
    pub fn component_log_density(&self, dist: &ScoreDistribution) -> f64 {
        dist.family()
            .param_kinds()
            .iter()
            .zip(dist.params().values())
            .map(|(&kind, &x)| self.for_kind(kind).log_density(x))
            .sum()
    }
}

/// Fully supervised log-likelihood; every item must carry a label.
pub fn log_likelihood_supervised(theta: &MixtureParams, data: &ScoreDataset) -> Result<f64> {
    if !data.is_fully_labeled() {
        return Err(SpeError::Validation(format!(
            "supervised likelihood needs every item labeled; {} are not",
            data.unlabeled_indices().len()
        )));
    }
    Ok(labeled_term(theta, data))
}

fn labeled_term(theta: &MixtureParams, data: &ScoreDataset) -> f64 {
    let ln_pi = ln_weight(theta.pi);
    let ln_not_pi = ln_weight(1.0 - theta.pi);
    data.labeled
        .iter()
        .map(|&i| {
            let s = data.scores[i];
            if data.labels[i] == Some(true) {
                ln_pi + theta.positive.log_pdf(s)
            } else {
                ln_not_pi + theta.negative.log_pdf(s)
            }
        })
        .sum()
}

/// Log-likelihood with the labels of unlabeled items marginalized out.
pub fn log_likelihood_semisupervised(theta: &MixtureParams, data: &ScoreDataset) -> f64 {
    let unlabeled: f64 = data
        .unlabeled
        .iter()
        .map(|&i| {
            let (l0, l1) = theta.joint_log_densities(data.scores[i]);
            log_add_exp(l0, l1)
        })
        .sum();
    labeled_term(theta, data) + unlabeled
}

pub fn log_prior(theta: &MixtureParams, priors: &PriorSpec) -> f64 {
    let lp = priors.pi.log_density(theta.pi);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + priors.component_log_density(&theta.negative) + priors.component_log_density(&theta.positive)
}

/// Unnormalized log posterior.
pub fn log_posterior(theta: &MixtureParams, data: &ScoreDataset, priors: &PriorSpec) -> f64 {
    let lp = log_prior(theta, priors);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + log_likelihood_semisupervised(theta, data)
}

/// Unconstrained coordinates for a family pair:
/// `[logit pi, negative params..., positive params...]` with positive
/// parameters on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureLayout {
    pub negative: FamilyTag,
    pub positive: FamilyTag,
}

impl MixtureLayout {
    pub fn new(negative: FamilyTag, positive: FamilyTag) -> Self {
        Self { negative, positive }
    }

    pub fn dim(&self) -> usize {
        1 + self.negative.dim() + self.positive.dim()
    }

    pub fn encode(&self, theta: &MixtureParams) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.dim());
        u.push(logit(theta.pi));
        u.extend(self.negative.to_unconstrained(theta.negative.params()));
        u.extend(self.positive.to_unconstrained(theta.positive.params()));
        u
    }

    pub fn decode(&self, u: &[f64]) -> Result<MixtureParams> {
        if u.len() != self.dim() {
            return Err(SpeError::Domain(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                u.len()
            )));
        }
        let d0 = self.negative.dim();
        let negative = ScoreDistribution::new(self.negative, self.negative.from_unconstrained(&u[1..1 + d0]))?;
        let positive = ScoreDistribution::new(self.positive, self.positive.from_unconstrained(&u[1 + d0..]))?;
        MixtureParams::new(sigmoid(u[0]), negative, positive)
    }

    /// `ln |d theta / d u|`.
    pub fn log_jacobian(&self, u: &[f64]) -> f64 {
        let d0 = self.negative.dim();
        // d sigmoid / du = sigmoid(u) sigmoid(-u)
        let pi_term = -softplus(-u[0]) - softplus(u[0]);
        pi_term + self.negative.log_jacobian(&u[1..1 + d0]) + self.positive.log_jacobian(&u[1 + d0..])
    }

    pub fn bounds(&self) -> Bounds {
        let (mut lo, mut hi) = (vec![-20.0], vec![20.0]);
        for family in [self.negative, self.positive] {
            let (l, h) = unconstrained_bounds(family);
            lo.extend(l);
            hi.extend(h);
        }
        Bounds::new(lo, hi)
    }

    /// Log posterior as a function of unconstrained coordinates; `-inf` where
    /// the coordinates do not decode to valid parameters.
    pub fn log_posterior_at(&self, u: &[f64], data: &ScoreDataset, priors: &PriorSpec) -> f64 {
        match self.decode(u) {
            Ok(theta) => log_posterior(&theta, data, priors),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Per-start record from [`map_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub start: usize,
    pub initial_log_posterior: Option<f64>,
    pub final_log_posterior: Option<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub params: MixtureParams,
    pub log_posterior: f64,
    /// Index of the start that produced `params`.
    pub best_start: usize,
    pub starts: Vec<StartDiagnostic>,
}

/// Moment-based initializer: split items at a score threshold (labels
/// override the side they fall on), fit each side by moments and set `pi`
/// to the positive fraction.
fn split_initializer(
    data: &ScoreDataset,
    layout: &MixtureLayout,
    threshold: f64,
) -> Result<MixtureParams> {
    let mut neg = Vec::new();
    let mut pos = Vec::new();
    for (&s, y) in data.scores.iter().zip(&data.labels) {
        let positive = y.unwrap_or(s > threshold);
        if positive {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    let n = data.len() as f64;
    let pi = (pos.len() as f64 / n).clamp(0.5 / n, 1.0 - 0.5 / n);
    let negative = ScoreDistribution::new(layout.negative, moment_init(layout.negative, &neg)?)?;
    let positive = ScoreDistribution::new(layout.positive, moment_init(layout.positive, &pos)?)?;
    if data.labeled.is_empty() && positive.median() < negative.median() {
        return Err(SpeError::Domain(
            "initializer places the positive component below the negative one".into(),
        ));
    }
    MixtureParams::new(pi, negative, positive)
}

/// Base split threshold: halfway between the mean labeled negative and mean
/// labeled positive scores when both classes are labeled, the score median
/// otherwise.
fn base_threshold(data: &ScoreDataset) -> f64 {
    let mean_of = |want: bool| {
        let v: Vec<f64> = data
            .labeled
            .iter()
            .filter(|&&i| data.labels[i] == Some(want))
            .map(|&i| data.scores[i])
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    match (mean_of(false), mean_of(true)) {
        (Some(m0), Some(m1)) if m1 > m0 => 0.5 * (m0 + m1),
        _ => score_quantile(&data.scores, 0.5),
    }
}

fn score_quantile(scores: &[f64], q: f64) -> f64 {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q).round() as usize;
    v[idx]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub n_starts: usize,
    pub optimizer: MinimizeOptions,
    /// Standard deviation of the jitter added to perturbed starts, in
    /// unconstrained coordinates.
    pub jitter: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            n_starts: 10,
            optimizer: MinimizeOptions::default(),
            jitter: 0.1,
        }
    }
}

/// Multi-start MAP estimate of `theta` for a fixed family pair.
///
/// Start 0 is the base moment initializer; the others re-split the scores at
/// a random quantile and jitter the result. Each start is optimized in
/// unconstrained coordinates; the best converged start wins, ties going to
/// the lowest index.
pub fn map_estimate<R: Rng + ?Sized>(
    data: &ScoreDataset,
    priors: &PriorSpec,
    layout: MixtureLayout,
    opts: &MapOptions,
    rng: &mut R,
) -> Result<MapEstimate> {
    if opts.n_starts == 0 {
        return Err(SpeError::Domain("n_starts must be at least 1".into()));
    }
    priors.validate()?;
    let base_seed: u64 = rng.random();
    let n = data.len() as f64;
    let bounds = layout.bounds();
    let objective = |u: &[f64]| {
        let lp = layout.log_posterior_at(u, data, priors);
        if lp.is_nan() || lp == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            -lp / n
        }
    };

    let mut diagnostics = Vec::with_capacity(opts.n_starts);
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for start in 0..opts.n_starts {
        let mut start_rng = seeded(derive_seed(base_seed, &[start as u64]));
        let init = if start == 0 {
            split_initializer(data, &layout, base_threshold(data))
        } else {
            let q = start_rng.random_range(0.3..0.97);
            split_initializer(data, &layout, score_quantile(&data.scores, q))
        };
        let mut diag = StartDiagnostic {
            start,
            initial_log_posterior: None,
            final_log_posterior: None,
            iterations: 0,
            termination: None,
            failure: None,
        };
        let init = match init {
            Ok(theta) => theta,
            Err(e) => {
                diag.failure = Some(format!("initializer: {e}"));
                diagnostics.push(diag);
                continue;
            }
        };
        let mut u0 = layout.encode(&init);
        if start > 0 {
            for v in &mut u0 {
                *v += opts.jitter * start_rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
        }
        let f0 = objective(&u0);
        if f0.is_finite() {
            diag.initial_log_posterior = Some(-f0 * n);
        }
        match minimize(objective, &u0, &bounds, &opts.optimizer) {
            Ok(m) => {
                diag.iterations = m.iterations;
                diag.termination = Some(m.termination);
                diag.final_log_posterior = Some(-m.value * n);
                if m.termination.converged() {
                    if best.as_ref().is_none_or(|(v, _, _)| m.value < *v) {
                        best = Some((m.value, m.x, start));
                    }
                } else {
                    diag.failure = Some(format!("no convergence after {} iterations", m.iterations));
                }
            }
            Err(e) => diag.failure = Some(e.to_string()),
        }
        diagnostics.push(diag);
    }

    let Some((value, u, best_start)) = best else {
        return Err(SpeError::Estimation {
            message: format!("no start converged for {}/{}", layout.negative, layout.positive),
            diagnostics: diagnostics
                .iter()
                .map(|d| format!("start {}: {}", d.start, d.failure.as_deref().unwrap_or("unknown")))
                .collect(),
        });
    };
    Ok(MapEstimate {
        params: layout.decode(&u)?,
        log_posterior: -value * n,
        best_start,
        starts: diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub negative: FamilyTag,
    pub positive: FamilyTag,
    pub log_posterior: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySelection {
    pub layout: MixtureLayout,
    pub map: MapEstimate,
    pub candidates: Vec<PairScore>,
}

/// Fit every candidate `(negative, positive)` family pair and keep the one
/// with the highest attained log posterior.
pub fn select_family_pair<R: Rng + ?Sized>(
    data: &ScoreDataset,
    priors: &PriorSpec,
    pairs: &[MixtureLayout],
    opts: &MapOptions,
    rng: &mut R,
) -> Result<FamilySelection> {
    if pairs.is_empty() {
        return Err(SpeError::Domain("no candidate family pairs".into()));
    }
    let base_seed: u64 = rng.random();
    let mut candidates = Vec::with_capacity(pairs.len());
    let mut best: Option<(MixtureLayout, MapEstimate)> = None;
    for (k, &layout) in pairs.iter().enumerate() {
        let mut pair_rng = seeded(derive_seed(base_seed, &[k as u64]));
        match map_estimate(data, priors, layout, opts, &mut pair_rng) {
            Ok(map) => {
                candidates.push(PairScore {
                    negative: layout.negative,
                    positive: layout.positive,
                    log_posterior: Some(map.log_posterior),
                    failure: None,
                });
                if best.as_ref().is_none_or(|(_, b)| map.log_posterior > b.log_posterior) {
                    best = Some((layout, map));
                }
            }
            Err(e) => candidates.push(PairScore {
                negative: layout.negative,
                positive: layout.positive,
                log_posterior: None,
                failure: Some(e.to_string()),
            }),
        }
    }
    match best {
        Some((layout, map)) => Ok(FamilySelection { layout, map, candidates }),
        None => Err(SpeError::Estimation {
            message: "every candidate family pair failed".into(),
            diagnostics: candidates
                .iter()
                .map(|c| format!("{}/{}: {}", c.negative, c.positive, c.failure.as_deref().unwrap_or("")))
                .collect(),
        }),
    }
}

/// All ordered pairs drawn from `families`.
pub fn all_pairs(families: &[FamilyTag]) -> Vec<MixtureLayout> {
    families
        .iter()
        .flat_map(|&a| families.iter().map(move |&b| MixtureLayout::new(a, b)))
        .collect()
}
