mod common;

use std::sync::OnceLock;

use common::{dist, reference_layout, reference_theta};
use proptest::prelude::*;
use spe::data::{normalize_scores, sample_label_budget, synthetic};
use spe::inference::normalize_log_weights;
use spe::mixture::{MixtureParams, PriorSpec, ScoreDataset};
use spe::performance::{
    area_between_curves, condition_probability, empirical_pr_curve, ensemble_curve_band, naive_estimate,
    recall_grid, recall_population, weighted_quantile, ConditionSpec,
};
use spe::rng::seeded;
use spe::{run_spe, FamilyTag, PosteriorEnsemble, SpeOptions};

fn shared_run() -> &'static (ScoreDataset, PosteriorEnsemble) {
    static RUN: OnceLock<(ScoreDataset, PosteriorEnsemble)> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut rng = seeded(77);
        let (scores, labels) = synthetic(&reference_theta(), 600, &mut rng);
        let data = sample_label_budget(&scores, &labels, 20, &mut rng).unwrap();
        let opts = SpeOptions {
            samples: 200,
            ..SpeOptions::default()
        };
        let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &opts, &mut rng).unwrap();
        (data, e)
    })
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0.001f64..1.0, any::<bool>()), 2..80).prop_map(|v| {
        let (s, mut y): (Vec<f64>, Vec<bool>) = v.into_iter().unzip();
        y[0] = true;
        (s, y)
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn weights_sum_to_one_and_ess_is_bounded(logw in prop::collection::vec(-50.0f64..50.0, 1..200)) {
        let (w, ess) = normalize_log_weights(&logw).unwrap();
        let total: f64 = w.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= logw.len() as f64 + 1e-9);
    }

    #[test]
    fn equal_log_weights_are_uniform(c in -700.0f64..700.0, m in 1usize..300) {
        let (w, ess) = normalize_log_weights(&vec![c; m]).unwrap();
        for x in w {
            prop_assert!((x - 1.0 / m as f64).abs() < 1e-12);
        }
        prop_assert!((ess - m as f64).abs() < 1e-9 * m as f64);
    }

    #[test]
    fn empirical_curve_is_a_valid_sweep((scores, labels) in labeled_scores()) {
        let curve = empirical_pr_curve(&scores, &labels).unwrap();
        let pts = curve.points();
        prop_assert!(pts.windows(2).all(|w| w[0].recall <= w[1].recall));
        prop_assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.precision) && p.recall >= 0.0));
        prop_assert_eq!(pts.last().unwrap().recall, 1.0);
        let positives = labels.iter().filter(|&&y| y).count() as f64;
        prop_assert!((pts.last().unwrap().precision - positives / labels.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn naive_with_every_label_is_empirical((scores, labels) in labeled_scores()) {
        let data = ScoreDataset::fully_labeled(scores.clone(), &labels).unwrap();
        prop_assert_eq!(naive_estimate(&data).unwrap(), empirical_pr_curve(&scores, &labels).unwrap());
    }

    #[test]
    fn area_is_a_symmetric_distance((sa, ya) in labeled_scores(), (sb, yb) in labeled_scores()) {
        let a = empirical_pr_curve(&sa, &ya).unwrap();
        let b = empirical_pr_curve(&sb, &yb).unwrap();
        let ab = area_between_curves(&a, &b).unwrap();
        let ba = area_between_curves(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(area_between_curves(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn population_recall_is_nonincreasing(
        loc in 0.2f64..0.9, scale in 0.03f64..0.3, taus in prop::collection::vec(0.0f64..2.0, 2..30)
    ) {
        let theta = MixtureParams::new(
            0.2,
            dist(FamilyTag::Gamma, &[2.0, 0.05]),
            dist(FamilyTag::TruncatedNormal, &[loc, scale]),
        ).unwrap();
        let mut taus = taus;
        taus.sort_by(f64::total_cmp);
        let r: Vec<f64> = taus.iter().map(|&t| recall_population(t, &theta)).collect();
        prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(r.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn weighted_quantiles_are_ordered(
        pairs in prop::collection::vec((0.0f64..1.0, 0.001f64..1.0), 1..50),
        q1 in 0.0f64..1.0, q2 in 0.0f64..1.0,
    ) {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = weighted_quantile(&pairs, total, lo);
        let b = weighted_quantile(&pairs, total, hi);
        prop_assert!(a <= b);
        prop_assert!(a >= pairs[0].0 && b <= pairs.last().unwrap().0);
    }

    #[test]
    fn normalization_preserves_order(raw in prop::collection::vec(-1e3f64..1e3, 2..60)) {
        prop_assume!(raw.iter().any(|&x| x != raw[0]));
        let (scaled, norm) = normalize_scores(&raw).unwrap();
        prop_assert!(scaled.iter().all(|&s| s > 0.0 && s <= 1.0));
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                prop_assert_eq!(raw[i] < raw[j], scaled[i] < scaled[j]);
            }
            prop_assert!((norm.inverse(scaled[i]) - raw[i]).abs() <= 1e-9 * (1.0 + raw[i].abs()));
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn condition_probability_is_monotone_in_the_floors(
        r1 in 0.0f64..1.0, r2 in 0.0f64..1.0, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, tau in 0.0f64..1.0
    ) {
        let (data, e) = shared_run();
        let loose = ConditionSpec::new(r1.min(r2), p1.min(p2)).unwrap();
        let strict = ConditionSpec::new(r1.max(r2), p1.max(p2)).unwrap();
        let a = condition_probability(e, data, loose, &[tau]).unwrap().rows[0].probability;
        let b = condition_probability(e, data, strict, &[tau]).unwrap().rows[0].probability;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a) && (0.0..=1.0 + 1e-12).contains(&b));
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn band_levels_are_ordered(lo in 0.01f64..0.49, hi in 0.51f64..0.99) {
        let (data, e) = shared_run();
        let band = ensemble_curve_band(e, data, &recall_grid(40), &[lo, 0.5, hi]).unwrap();
        for p in &band.points {
            if let [Some(a), Some(m), Some(b)] = p.quantiles[..] {
                prop_assert!(a <= m && m <= b);
                let mean = p.mean.unwrap();
                prop_assert!((0.0..=1.0).contains(&mean));
            }
        }
    }
}
