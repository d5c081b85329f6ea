mod common;

use common::{dist, integrate, integrate_half_line, reference_layout, reference_theta};
use spe::data::{sample_label_budget, synthetic};
use spe::mixture::{MixtureParams, PriorSpec, ScoreDataset};
use spe::performance::{
    condition_probability, empirical_pr_curve, naive_estimate, observed_thresholds, precision_at_recall,
    precision_population, recall_population, ConditionSpec,
};
use spe::rng::seeded;
use spe::{run_spe, FamilyTag, SpeOptions};

#[test]
fn recall_at_the_positive_location_is_one_half() {
    let theta = reference_theta();
    let quad = integrate(|x| theta.positive.pdf(x), 0.7, 3.0, 1e-12);
    let r = recall_population(0.7, &theta);
    assert!((r - quad).abs() < 1e-9, "{r} vs {quad}");
    assert!((r - 0.5).abs() < 1e-9);
    assert_eq!(recall_population(-1.0, &theta), 1.0);
    assert_eq!(recall_population(f64::INFINITY, &theta), 0.0);
}

#[test]
fn precision_from_quadrature_of_both_tails() {
    let theta = reference_theta();
    let tail = |d: &spe::ScoreDistribution| integrate(|x| d.pdf(x), 0.5, 0.5 + 50.0, 1e-13);
    let tp = 0.1 * tail(&theta.positive);
    let fp = 0.9 * tail(&theta.negative);
    let want = tp / (tp + fp);
    let got = precision_population(0.5, &theta).unwrap();
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn precision_at_recall_composes_with_the_quantile() {
    let theta = reference_theta();
    // tau with half the positive mass above it, located by bisection on
    // the quadrature cdf
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let above = 1.0 - integrate(|x| theta.positive.pdf(x), 0.0, mid, 1e-13);
        if above > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let want = precision_population(0.5 * (lo + hi), &theta).unwrap();
    let got = precision_at_recall(0.5, &theta).unwrap().unwrap();
    assert!((got - want).abs() < 1e-9);
}

#[test]
fn population_edge_cases() {
    let theta = reference_theta();
    // recall 1: every item is above the threshold
    assert!((precision_at_recall(1.0, &theta).unwrap().unwrap() - 0.1).abs() < 1e-9);
    let all_pos = MixtureParams::new(1.0, theta.negative.clone(), theta.positive.clone()).unwrap();
    for r in [0.1, 0.5, 0.9] {
        assert_eq!(precision_at_recall(r, &all_pos).unwrap(), Some(1.0));
    }
    let c = dist(FamilyTag::Gamma, &[2.0, 0.1]);
    let same = MixtureParams::new(0.5, c.clone(), c).unwrap();
    for tau in [0.05, 0.2, 0.6] {
        assert!((precision_population(tau, &same).unwrap() - 0.5).abs() < 1e-12);
    }
    assert!(precision_at_recall(0.0, &theta).is_err());
}

#[test]
fn quadrature_oracle_is_normalized() {
    let theta = reference_theta();
    let mass = integrate_half_line(|x| theta.pdf(x), 1e-12);
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn naive_on_full_labels_is_the_empirical_curve() {
    let (scores, labels) = synthetic(&reference_theta(), 500, &mut seeded(1));
    let data = ScoreDataset::fully_labeled(scores.clone(), &labels).unwrap();
    assert_eq!(naive_estimate(&data).unwrap(), empirical_pr_curve(&scores, &labels).unwrap());
}

#[test]
fn naive_with_only_positive_labels_is_flat() {
    let data = ScoreDataset::new(vec![0.9, 0.5, 0.4], vec![Some(true), None, Some(true)]).unwrap();
    let curve = naive_estimate(&data).unwrap();
    assert!(curve.points().iter().all(|p| p.precision == 1.0));
}

#[test]
fn condition_probability_tracks_the_generating_model() {
    let theta = reference_theta();
    let mut rng = seeded(2);
    let (scores, labels) = synthetic(&theta, 2000, &mut rng);
    let data = sample_label_budget(&scores, &labels, 20, &mut rng).unwrap();
    let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut rng).unwrap();
    let cond = ConditionSpec::new(0.5, 0.5).unwrap();
    let taus: Vec<f64> = [0.05, 0.12, 0.2, 0.3, 0.45, 0.6, 0.7, 0.8, 0.9].to_vec();
    let table = condition_probability(&e, &data, cond, &taus).unwrap();
    for row in &table.rows {
        // under the generating model, with margins around the boundaries
        let r = recall_population(row.tau, &theta);
        let p = precision_population(row.tau, &theta).unwrap_or(0.0);
        if r > 0.55 && p > 0.6 {
            assert!(row.probability > 0.8, "tau {}: {}", row.tau, row.probability);
        }
        if r < 0.45 || p < 0.4 {
            assert!(row.probability < 0.2, "tau {}: {}", row.tau, row.probability);
        }
    }
    let peak = table.rows.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap();
    assert!(recall_population(peak.tau, &theta) > 0.5);
}

#[test]
fn trivial_conditions() {
    let theta = reference_theta();
    let mut rng = seeded(3);
    let (scores, labels) = synthetic(&theta, 400, &mut rng);
    let data = sample_label_budget(&scores, &labels, 20, &mut rng).unwrap();
    let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut rng).unwrap();
    let taus = observed_thresholds(data.scores());
    let bottom = taus[0];
    let any = condition_probability(&e, &data, ConditionSpec::new(0.0, 0.0).unwrap(), &[bottom]).unwrap();
    assert!((any.rows[0].probability - 1.0).abs() < 1e-9);
    // perfect recall and precision at the lowest threshold needs no
    // negatives at all
    let perfect = condition_probability(&e, &data, ConditionSpec::new(1.0, 1.0).unwrap(), &[bottom]).unwrap();
    assert_eq!(perfect.rows[0].probability, 0.0);
}
