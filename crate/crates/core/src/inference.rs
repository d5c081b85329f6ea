//! Posterior sampling over mixture parameters and missing labels.
//!
//! The procedure: find the MAP estimate, fit a diagonal Gaussian proposal
//! around it in unconstrained coordinates, draw `M` weighted parameter
//! samples by importance sampling, then complete the unknown labels once per
//! sample. The resulting weighted ensemble of completed label vectors is
//! what every performance estimate integrates over.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::LN_SQRT_2PI;
use crate::error::{Result, SpeError};
use crate::mixture::{
    map_estimate, select_family_pair, MapEstimate, MapOptions, MixtureLayout, MixtureParams,
    PairScore, PriorSpec, ScoreDataset,
};
use crate::rng::{derive_seed, seeded};

/// Diagonal Gaussian `N(mean, diag(scales^2))` in unconstrained coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub mean: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ProposalSpec {
    pub fn new(mean: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if mean.len() != scales.len() {
            return Err(SpeError::Inference(format!(
                "proposal mean has {} entries, scales {}",
                mean.len(),
                scales.len()
            )));
        }
        if let Some(d) = scales.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(SpeError::Proposal {
                dimension: d,
                curvature: f64::NAN,
            });
        }
        Ok(Self { mean, scales })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean.clone(),
            scales: self.scales.iter().map(|s| s * factor).collect(),
        }
    }

    pub fn log_density(&self, u: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.scales)
            .zip(u)
            .map(|((m, s), x)| {
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - LN_SQRT_2PI
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.scales)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// One-dimensional Laplace fit along every axis through `center`.
///
/// The second derivative along axis `d` comes from a central difference
/// with step `step`, halved once if any probe is non-finite.
pub fn fit_proposal<F>(log_target: F, center: &[f64], step: f64) -> Result<ProposalSpec>
where
    F: Fn(&[f64]) -> f64,
{
    let f0 = log_target(center);
    if !f0.is_finite() {
        return Err(SpeError::Inference(format!("log target is {f0} at the proposal center")));
    }
    let mut probe = center.to_vec();
    let mut scales = Vec::with_capacity(center.len());
    for d in 0..center.len() {
        let mut h = step;
        let mut curvature = f64::NAN;
        for _ in 0..2 {
            probe[d] = center[d] + h;
            let up = log_target(&probe);
            probe[d] = center[d] - h;
            let down = log_target(&probe);
            probe[d] = center[d];
            if up.is_finite() && down.is_finite() {
                curvature = (up - 2.0 * f0 + down) / (h * h);
                break;
            }
            h *= 0.5;
        }
        if !(curvature < 0.0) {
            return Err(SpeError::Proposal { dimension: d, curvature });
        }
        scales.push((-curvature).sqrt().recip());
    }
    ProposalSpec::new(center.to_vec(), scales)
}

/// Normalize log weights into probabilities and report `ESS = 1 / sum w^2`.
/// NaN entries count as zero weight.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(SpeError::Inference(
            "all importance weights are zero; the proposal misses the posterior".into(),
        ));
    }
    let raw: Vec<f64> = log_weights
        .iter()
        .map(|&v| if v.is_nan() { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok((weights, ess))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceSamples {
    pub draws: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub ess: f64,
}

/// Draw `m` points from `proposal` and weight them by `target / proposal`.
pub fn importance_sample<F, R>(log_target: F, proposal: &ProposalSpec, m: usize, rng: &mut R) -> Result<ImportanceSamples>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if m == 0 {
        return Err(SpeError::Domain("need at least one importance sample".into()));
    }
    let draws: Vec<Vec<f64>> = (0..m).map(|_| proposal.sample(rng)).collect();
    let log_weights: Vec<f64> = draws
        .iter()
        .map(|u| log_target(u) - proposal.log_density(u))
        .collect();
    let (weights, ess) = normalize_log_weights(&log_weights)?;
    Ok(ImportanceSamples { draws, weights, ess })
}

/// Draw every unlabeled item's label from its posterior responsibility
/// under `theta`. The output is indexed like `data.unlabeled_indices()`.
pub fn sample_unlabeled_labels<R: Rng + ?Sized>(
    theta: &MixtureParams,
    data: &ScoreDataset,
    rng: &mut R,
) -> Result<Vec<bool>> {
    data.unlabeled_indices()
        .iter()
        .map(|&i| {
            let s = data.scores()[i];
            let r = theta.responsibility(s).ok_or_else(|| {
                SpeError::Inference(format!("item {i} (score {s}) has zero density under both classes"))
            })?;
            Ok(rng.random::<f64>() < r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeOptions {
    /// Number of importance samples `M`.
    pub samples: usize,
    pub map: MapOptions,
    pub proposal_inflation: f64,
    pub fd_step: f64,
    /// Scale multiplier for the single retry when ESS falls below `M / 10`.
    pub ess_retry_factor: f64,
}

impl Default for SpeOptions {
    fn default() -> Self {
        Self {
            samples: 500,
            map: MapOptions::default(),
            proposal_inflation: 1.2,
            fd_step: 1e-4,
            ess_retry_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub theta: MixtureParams,
    pub weight: f64,
    /// Labels for the unlabeled items, in `unlabeled_indices` order.
    pub completion: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub layout: MixtureLayout,
    pub map: MapEstimate,
    /// Scores of all family pairs tried (a single entry without selection).
    pub candidates: Vec<PairScore>,
    pub proposal: ProposalSpec,
    pub members: Vec<EnsembleMember>,
    pub requested_samples: usize,
    /// Draws dropped for carrying zero weight.
    pub dropped: usize,
    pub ess: f64,
    pub warnings: Vec<String>,
}

impl PosteriorEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.members.iter().map(|m| m.weight)
    }

    /// Posterior mean of the mixture weight.
    pub fn mean_pi(&self) -> f64 {
        self.members.iter().map(|m| m.weight * m.theta.pi).sum()
    }

    /// Full label vector for member `m`.
    pub fn merged_labels(&self, data: &ScoreDataset, m: usize) -> Vec<bool> {
        data.merge_labels(&self.members[m].completion)
    }
}

/// Build a posterior ensemble for `data`.
///
/// With one entry in `pairs` that family pair is used directly; with more,
/// every pair is fitted and the one with the highest MAP log posterior wins.
pub fn run_spe<R: Rng + ?Sized>(
    data: &ScoreDataset,
    priors: &PriorSpec,
    pairs: &[MixtureLayout],
    opts: &SpeOptions,
    rng: &mut R,
) -> Result<PosteriorEnsemble> {
    if opts.samples == 0 {
        return Err(SpeError::Domain("need at least one posterior sample".into()));
    }
    let base_seed: u64 = rng.random();
    let mut map_rng = seeded(derive_seed(base_seed, &[0]));
    let (layout, map, candidates) = match pairs {
        [] => return Err(SpeError::Domain("no candidate family pairs".into())),
        [layout] => {
            let map = map_estimate(data, priors, *layout, &opts.map, &mut map_rng)?;
            let score = PairScore {
                negative: layout.negative,
                positive: layout.positive,
                log_posterior: Some(map.log_posterior),
                failure: None,
            };
            (*layout, map, vec![score])
        }
        _ => {
            let sel = select_family_pair(data, priors, pairs, &opts.map, &mut map_rng)?;
            (sel.layout, sel.map, sel.candidates)
        }
    };

    let log_target = |u: &[f64]| {
        let lp = layout.log_posterior_at(u, data, priors);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp + layout.log_jacobian(u)
        }
    };
    let center = layout.encode(&map.params);
    let proposal = fit_proposal(log_target, &center, opts.fd_step)?.scaled(opts.proposal_inflation);

    let mut warnings = Vec::new();
    let mut is_rng = seeded(derive_seed(base_seed, &[1]));
    let mut samples = importance_sample(log_target, &proposal, opts.samples, &mut is_rng)?;
    let mut proposal_used = proposal;
    let threshold = opts.samples as f64 / 10.0;
    if samples.ess < threshold {
        let msg = format!(
            "effective sample size {:.1} is below M/10 = {threshold:.1}; retrying with proposal scales x{}",
            samples.ess, opts.ess_retry_factor
        );
        warn!("{msg}");
        warnings.push(msg);
        let wider = proposal_used.scaled(opts.ess_retry_factor);
        let mut retry_rng = seeded(derive_seed(base_seed, &[2]));
        let retry = importance_sample(log_target, &wider, opts.samples, &mut retry_rng)?;
        if retry.ess > samples.ess {
            samples = retry;
            proposal_used = wider;
        }
        if samples.ess < threshold {
            let msg = format!("effective sample size remains low ({:.1}); proceeding", samples.ess);
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let label_seed = derive_seed(base_seed, &[3]);
    let mut members = Vec::with_capacity(opts.samples);
    let mut dropped = 0;
    for (m, (u, &w)) in samples.draws.iter().zip(&samples.weights).enumerate() {
        let theta = match layout.decode(u) {
            Ok(theta) if w > 0.0 => theta,
            _ => {
                dropped += 1;
                continue;
            }
        };
        let mut member_rng = seeded(derive_seed(label_seed, &[m as u64]));
        let completion = sample_unlabeled_labels(&theta, data, &mut member_rng)?;
        members.push(EnsembleMember {
            theta,
            weight: w,
            completion,
        });
    }
    let total: f64 = members.iter().map(|m| m.weight).sum();
    for member in &mut members {
        member.weight /= total;
    }
    let ess = 1.0 / members.iter().map(|m| m.weight * m.weight).sum::<f64>();

    Ok(PosteriorEnsemble {
        layout,
        map,
        candidates,
        proposal: proposal_used,
        members,
        requested_samples: opts.samples,
        dropped,
        ess,
        warnings,
    })
}

/// Posterior probability that each item is positive: the known label for
/// labeled items, the weighted fraction of completions for the rest.
pub fn posterior_label_probability(ensemble: &PosteriorEnsemble, data: &ScoreDataset) -> Vec<f64> {
    let mut out: Vec<f64> = data
        .labels()
        .iter()
        .map(|y| match y {
            Some(true) => 1.0,
            _ => 0.0,
        })
        .collect();
    for member in &ensemble.members {
        for (&i, &y) in data.unlabeled_indices().iter().zip(&member.completion) {
            if y {
                out[i] += member.weight;
            }
        }
    }
    for &i in data.unlabeled_indices() {
        out[i] = out[i].min(1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{FamilyTag, ScoreDistribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplace_fit_of_gaussian() {
        let f = |u: &[f64]| -0.5 * (u[0] / 0.3).powi(2);
        let p = fit_proposal(f, &[0.0], 1e-4).unwrap();
        assert!((p.scales[0] - 0.3).abs() < 1e-4);
    }

    #[test]
    fn isotropic_quadratic_gives_equal_scales() {
        let f = |u: &[f64]| -u.iter().map(|x| x * x).sum::<f64>();
        let p = fit_proposal(f, &[0.1, -0.2, 0.3, 0.0], 1e-4).unwrap();
        for s in &p.scales {
            assert!((s - p.scales[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_direction_is_rejected() {
        let f = |u: &[f64]| -u[0] * u[0];
        match fit_proposal(f, &[0.0, 0.0], 1e-4) {
            Err(SpeError::Proposal { dimension, .. }) => assert_eq!(dimension, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weight_arithmetic() {
        let (w, ess) = normalize_log_weights(&[0.0, 3f64.ln()]).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.75).abs() < 1e-15);
        assert!((ess - 1.0 / (0.0625 + 0.5625)).abs() < 1e-12);
        assert!(normalize_log_weights(&[f64::NEG_INFINITY, f64::NAN]).is_err());
    }

    #[test]
    fn matching_target_gives_uniform_weights() {
        let q = ProposalSpec::new(vec![0.5, -1.0], vec![0.2, 2.0]).unwrap();
        let qc = q.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = importance_sample(move |u| qc.log_density(u), &q, 200, &mut rng).unwrap();
        for w in &s.weights {
            assert!((w - 1.0 / 200.0).abs() < 1e-12);
        }
        assert!((s.ess - 200.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_responsibilities() {
        let neg = ScoreDistribution::new(FamilyTag::Gamma, vec![2.0, 0.05]).unwrap();
        let pos = ScoreDistribution::new(FamilyTag::TruncatedNormal, vec![0.7, 0.1]).unwrap();
        let data = ScoreDataset::unlabeled(vec![0.1, 0.5, 0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let theta = MixtureParams::new(0.0, neg.clone(), pos.clone()).unwrap();
        assert_eq!(sample_unlabeled_labels(&theta, &data, &mut rng).unwrap(), vec![false; 3]);
        let theta = MixtureParams::new(1.0, neg, pos).unwrap();
        assert_eq!(sample_unlabeled_labels(&theta, &data, &mut rng).unwrap(), vec![true; 3]);
    }
}
