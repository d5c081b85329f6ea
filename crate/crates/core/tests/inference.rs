mod common;

use common::{dist, reference_layout, reference_theta};
use spe::data::{sample_label_budget, synthetic};
use spe::inference::{posterior_label_probability, sample_unlabeled_labels, SpeOptions};
use spe::mixture::{MixtureParams, PriorSpec, ScoreDataset};
use spe::performance::{ensemble_curve_band, recall_grid};
use spe::rng::seeded;
use spe::{run_spe, FamilyTag};

fn twenty_label_data(seed: u64) -> ScoreDataset {
    let mut rng = seeded(seed);
    let (scores, labels) = synthetic(&reference_theta(), 2000, &mut rng);
    sample_label_budget(&scores, &labels, 20, &mut rng).unwrap()
}

#[test]
fn label_frequency_matches_responsibility() {
    // pi = 0.7 with identical components puts the responsibility at 0.7
    // for every score.
    let c = dist(FamilyTag::Gamma, &[2.0, 0.1]);
    let theta = MixtureParams::new(0.7, c.clone(), c).unwrap();
    let data = ScoreDataset::unlabeled(vec![0.2; 10_000]).unwrap();
    assert!((theta.responsibility(0.2).unwrap() - 0.7).abs() < 1e-12);
    let labels = sample_unlabeled_labels(&theta, &data, &mut seeded(1)).unwrap();
    let freq = labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64;
    assert!((freq - 0.7).abs() <= 0.015, "{freq}");
}

#[test]
fn ensemble_mean_pi_is_close_to_truth() {
    for seed in [2, 3, 4] {
        let data = twenty_label_data(seed);
        let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut seeded(seed + 100)).unwrap();
        assert!((e.mean_pi() - 0.1).abs() <= 0.05, "seed {seed}: {}", e.mean_pi());
        let total: f64 = e.weights().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(e.ess >= 1.0 && e.ess <= e.len() as f64 + 1e-9);
    }
}

#[test]
fn same_seed_gives_identical_ensembles() {
    let data = twenty_label_data(5);
    let run = || run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut seeded(55)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let c = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut seeded(56)).unwrap();
    assert_ne!(a.members[0].theta, c.members[0].theta);
}

#[test]
fn fully_labeled_data_has_nothing_to_complete() {
    let (scores, labels) = synthetic(&reference_theta(), 500, &mut seeded(6));
    let data = ScoreDataset::fully_labeled(scores, &labels).unwrap();
    let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &SpeOptions::default(), &mut seeded(7)).unwrap();
    assert!(e.members.iter().all(|m| m.completion.is_empty()));
    let band = ensemble_curve_band(&e, &data, &recall_grid(50), &[0.05, 0.95]).unwrap();
    for p in &band.points {
        assert_eq!(p.quantiles[0], p.quantiles[1]);
    }
}

#[test]
fn item_probabilities_track_true_responsibilities() {
    let theta = reference_theta();
    let data = twenty_label_data(8);
    let opts = SpeOptions {
        samples: 2000,
        ..SpeOptions::default()
    };
    let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &opts, &mut seeded(9)).unwrap();
    let probs = posterior_label_probability(&e, &data);
    let mut sq = 0.0;
    for &i in data.unlabeled_indices() {
        let r = theta.responsibility(data.scores()[i]).unwrap();
        sq += (probs[i] - r).powi(2);
    }
    let rms = (sq / data.unlabeled_indices().len() as f64).sqrt();
    assert!(rms <= 0.05, "rms {rms}");
    for &i in data.labeled_indices() {
        let want = if data.labels()[i] == Some(true) { 1.0 } else { 0.0 };
        assert_eq!(probs[i], want);
    }
}

#[test]
fn zero_samples_is_rejected() {
    let data = twenty_label_data(10);
    let opts = SpeOptions {
        samples: 0,
        ..SpeOptions::default()
    };
    let err = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &opts, &mut seeded(1)).unwrap_err();
    assert_eq!(err.class(), "domain");
}
