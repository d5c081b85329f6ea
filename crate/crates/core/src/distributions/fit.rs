use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DistParams, FamilyTag, ParamKind, ScoreDistribution};
use crate::error::{Result, SpeError};
use crate::optimize::{minimize, Bounds, MinimizeOptions};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Box in unconstrained coordinates used for every fit.
pub(crate) fn unconstrained_bounds(family: FamilyTag) -> (Vec<f64>, Vec<f64>) {
    family
        .param_kinds()
        .iter()
        .map(|kind| match kind {
            ParamKind::Location => (-100.0, 100.0),
            ParamKind::LogLocation => (-50.0, 50.0),
            ParamKind::Positive => (-25.0, 12.0),
        })
        .unzip()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Method-of-moments starting point. Always returns valid parameters for
/// non-degenerate positive data.
pub fn moment_init(family: FamilyTag, scores: &[f64]) -> Result<DistParams> {
    check_sample(family, scores, 2)?;
    let (m, sd) = mean_sd(scores);
    let sd = sd.max(1e-12 * m.abs().max(1e-300));
    let beta = sd * 6f64.sqrt() / std::f64::consts::PI;
    let params = match family {
        FamilyTag::TruncatedNormal => vec![m, sd],
        FamilyTag::Gamma => vec![(m * m) / (sd * sd), sd * sd / m],
        FamilyTag::LogNormal => {
            let logs: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
            let (lm, lsd) = mean_sd(&logs);
            vec![lm, lsd.max(1e-12)]
        }
        FamilyTag::GumbelRight => vec![m - EULER_GAMMA * beta, beta],
        FamilyTag::GumbelLeft => vec![m + EULER_GAMMA * beta, beta],
        FamilyTag::TruncatedStudentT => vec![median(scores), sd * (3.0f64 / 5.0).sqrt(), 5.0],
        FamilyTag::Gompertz => vec![1.0, median(scores) / (1.0 + 2f64.ln()).ln()],
        FamilyTag::FrechetRight => {
            // ln X is Gumbel (max) with location ln(scale) and scale 1/shape.
            let logs: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
            let (lm, lsd) = mean_sd(&logs);
            let b = (lsd * 6f64.sqrt() / std::f64::consts::PI).max(1e-12);
            vec![1.0 / b, (lm - EULER_GAMMA * b).exp()]
        }
    };
    let params = DistParams::new(params);
    ScoreDistribution::new(family, params.clone()).map_err(|e| SpeError::Fit {
        family,
        reason: format!("moment initializer invalid: {e}"),
    })?;
    Ok(params)
}

fn check_sample(family: FamilyTag, scores: &[f64], min_len: usize) -> Result<()> {
    let fail = |reason: String| Err(SpeError::Fit { family, reason });
    if scores.len() < min_len {
        return fail(format!("need at least {min_len} scores, got {}", scores.len()));
    }
    if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return fail(format!("score {bad} outside the support (0, inf)"));
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if hi - lo <= 1e-12 * hi.abs() {
        return fail(format!("degenerate sample: all {} scores equal {lo}", scores.len()));
    }
    Ok(())
}

fn mean_log_likelihood(dist: &ScoreDistribution, scores: &[f64]) -> f64 {
    scores.iter().map(|&s| dist.log_pdf(s)).sum::<f64>() / scores.len() as f64
}

/// Maximum-likelihood fit: moment-matched start, then bounded quasi-Newton on
/// the mean log-likelihood in log-parameterized coordinates. The result is
/// never worse than the starting point.
pub fn mle_fit(family: FamilyTag, scores: &[f64]) -> Result<DistParams> {
    check_sample(family, scores, family.dim() + 1)?;
    let init = moment_init(family, scores)?;
    let u0 = family.to_unconstrained(&init);
    let (lo, hi) = unconstrained_bounds(family);
    let bounds = Bounds::new(lo, hi);
    let objective = |u: &[f64]| match ScoreDistribution::new(family, family.from_unconstrained(u)) {
        Ok(d) => {
            let ll = mean_log_likelihood(&d, scores);
            if ll.is_nan() {
                f64::INFINITY
            } else {
                -ll
            }
        }
        Err(_) => f64::INFINITY,
    };
    let f0 = objective(&u0);
    let opts = MinimizeOptions {
        max_iter: 300,
        ..Default::default()
    };
    let best = match minimize(&objective, &u0, &bounds, &opts) {
        Ok(m) if m.value <= f0 => family.from_unconstrained(&m.x),
        _ if f0.is_finite() => init,
        Ok(m) => family.from_unconstrained(&m.x),
        Err(e) => {
            return Err(SpeError::Fit {
                family,
                reason: e.to_string(),
            })
        }
    };
    let dist = ScoreDistribution::new(family, best.clone()).map_err(|e| SpeError::Fit {
        family,
        reason: e.to_string(),
    })?;
    if !mean_log_likelihood(&dist, scores).is_finite() {
        return Err(SpeError::Fit {
            family,
            reason: "log-likelihood is not finite at the fitted parameters".into(),
        });
    }
    Ok(best)
}

/// One row of a family ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanking {
    pub family: FamilyTag,
    /// Held-out log-likelihood; `None` when the fit failed.
    pub holdout_log_likelihood: Option<f64>,
    /// Held-out log-likelihood minus the best one (so 0 for the winner).
    pub relative_log_likelihood: Option<f64>,
    pub params: Option<DistParams>,
    pub failure: Option<String>,
}

/// Rank every known family; see [`rank_families_with`].
pub fn rank_families<R: Rng + ?Sized>(
    scores: &[f64],
    holdout_fraction: f64,
    rng: &mut R,
) -> Result<Vec<FamilyRanking>> {
    rank_families_with(scores, &FamilyTag::ALL, holdout_fraction, rng)
}

/// Fit each family on a random training split and rank by log-likelihood on
/// the held-out remainder, best first. Families that fail to fit are
/// appended after the successful ones.
pub fn rank_families_with<R: Rng + ?Sized>(
    scores: &[f64],
    families: &[FamilyTag],
    holdout_fraction: f64,
    rng: &mut R,
) -> Result<Vec<FamilyRanking>> {
    if scores.is_empty() {
        return Err(SpeError::Domain("cannot rank families on an empty sample".into()));
    }
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(SpeError::Domain(format!(
            "holdout fraction {holdout_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n_holdout = holdout_size(scores.len(), holdout_fraction);
    if n_holdout == 0 || n_holdout >= scores.len() {
        return Err(SpeError::Domain(format!(
            "{} scores are too few for a {holdout_fraction} holdout",
            scores.len()
        )));
    }
    let mut shuffled = scores.to_vec();
    shuffled.shuffle(rng);
    let (holdout, train) = shuffled.split_at(n_holdout);

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &family in families {
        let fitted = mle_fit(family, train).and_then(|p| {
            let d = ScoreDistribution::new(family, p.clone())?;
            let ll: f64 = holdout.iter().map(|&s| d.log_pdf(s)).sum();
            Ok((p, ll))
        });
        match fitted {
            Ok((p, ll)) if !ll.is_nan() => ok.push((family, p, ll)),
            Ok(_) => failed.push((family, "held-out log-likelihood is NaN".to_string())),
            Err(e) => failed.push((family, e.to_string())),
        }
    }
    ok.sort_by(|a, b| b.2.total_cmp(&a.2));
    let best = ok.first().map(|r| r.2);
    let mut out: Vec<FamilyRanking> = ok
        .into_iter()
        .map(|(family, params, ll)| FamilyRanking {
            family,
            holdout_log_likelihood: Some(ll),
            relative_log_likelihood: best.map(|b| ll - b),
            params: Some(params),
            failure: None,
        })
        .collect();
    out.extend(failed.into_iter().map(|(family, reason)| FamilyRanking {
        family,
        holdout_log_likelihood: None,
        relative_log_likelihood: None,
        params: None,
        failure: Some(reason),
    }));
    Ok(out)
}

pub(crate) fn holdout_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn draws(family: FamilyTag, p: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let d = ScoreDistribution::new(family, p.to_vec()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn too_few_or_degenerate_scores_fail() {
        assert!(matches!(mle_fit(FamilyTag::Gamma, &[0.5, 0.6]), Err(SpeError::Fit { .. })));
        assert!(matches!(
            mle_fit(FamilyTag::Gamma, &[0.5, 0.5, 0.5, 0.5]),
            Err(SpeError::Fit { .. })
        ));
        assert!(mle_fit(FamilyTag::Gamma, &[0.5, -0.1, 0.3]).is_err());
    }

    #[test]
    fn gumbel_right_on_two_points_is_finite() {
        // Two distinct values plus one more to meet the dim+1 minimum.
        let p = mle_fit(FamilyTag::GumbelRight, &[0.3, 0.6, 0.6]).unwrap();
        let d = ScoreDistribution::new(FamilyTag::GumbelRight, p).unwrap();
        assert!(d.log_pdf(0.3).is_finite() && d.log_pdf(0.6).is_finite());
    }

    #[test]
    fn fit_never_worse_than_initializer() {
        for family in FamilyTag::ALL {
            let xs = draws(FamilyTag::Gamma, &[2.0, 0.1], 500, 4);
            let init = moment_init(family, &xs).unwrap();
            let fit = mle_fit(family, &xs).unwrap();
            let ll = |p: &DistParams| {
                let d = ScoreDistribution::new(family, p.clone()).unwrap();
                xs.iter().map(|&s| d.log_pdf(s)).sum::<f64>()
            };
            assert!(ll(&fit) >= ll(&init) - 1e-9, "{family}");
        }
    }

    #[test]
    fn holdout_split_arithmetic() {
        assert_eq!(holdout_size(100, 0.2), 20);
        assert_eq!(holdout_size(2000, 0.2), 400);
    }

    #[test]
    fn ranking_lists_failures_last() {
        let xs = draws(FamilyTag::Gamma, &[2.0, 0.1], 300, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = rank_families(&xs, 0.2, &mut rng).unwrap();
        assert_eq!(r.len(), FamilyTag::ALL.len());
        let mut seen_failure = false;
        for row in &r {
            if row.failure.is_some() {
                seen_failure = true;
            } else {
                assert!(!seen_failure, "successful row after a failure");
            }
        }
        let lls: Vec<f64> = r.iter().filter_map(|x| x.holdout_log_likelihood).collect();
        assert!(lls.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(r[0].relative_log_likelihood, Some(0.0));
    }

    #[test]
    fn ranking_rejects_empty_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(rank_families(&[], 0.2, &mut rng), Err(SpeError::Domain(_))));
    }
}
