mod common;

use common::{reference_layout, reference_theta};
use spe::data::{normalize_scores, read_scores, sample_label_budget, synthetic};
use spe::experiment::{run_experiment, ExperimentConfig, Method};
use spe::inference::posterior_label_probability;
use spe::mixture::PriorSpec;
use spe::performance::{ensemble_curve_band, observed_thresholds, recall_grid};
use spe::report::{band_csv, csv_tables, EnsembleSummary, FitSummary, ItemProbability, Report};
use spe::rng::seeded;
use spe::{run_spe, SpeOptions};

fn config(budgets: Vec<usize>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        budgets,
        trials,
        seed: 5,
        priors: PriorSpec::default(),
        pairs: vec![reference_layout()],
        spe: SpeOptions {
            samples: 200,
            ..SpeOptions::default()
        },
        grid_size: 100,
        subsample: None,
    }
}

#[test]
fn raw_thresholds_reproduce_the_normalized_partition() {
    let (scores, _) = synthetic(&reference_theta(), 500, &mut seeded(1));
    let raw: Vec<f64> = scores.iter().map(|s| 40.0 * s - 7.0).collect();
    let (norm_scores, norm) = normalize_scores(&raw).unwrap();
    for tau in observed_thresholds(&norm_scores) {
        let back = norm.inverse(tau);
        let above_norm = norm_scores.iter().filter(|&&s| s >= tau).count();
        let above_raw = raw.iter().filter(|&&s| s >= back).count();
        assert_eq!(above_norm, above_raw, "tau {tau} -> {back}");
    }
}

#[test]
fn csv_ingestion_to_dataset() {
    let text = "id,score,label\na,0.2,\nb,3.5,1\nc,-1.0,\n";
    let table = read_scores(text.as_bytes()).unwrap();
    let (data, norm) = table.to_dataset().unwrap();
    assert_eq!(data.labeled_indices(), &[1]);
    assert_eq!(data.unlabeled_indices(), &[0, 2]);
    assert_eq!(data.scores()[1], 1.0);
    assert!((norm.inverse(data.scores()[2]) + 1.0).abs() < 1e-12);
}

#[test]
fn full_budget_gives_zero_error_for_both_methods() {
    let (scores, labels) = synthetic(&reference_theta(), 300, &mut seeded(2));
    let result = run_experiment(&scores, &labels, &config(vec![300], 2)).unwrap();
    for row in &result.rows {
        assert_eq!(row.error, Some(0.0), "{row:?}");
    }
}

#[test]
fn experiment_reruns_identically() {
    let (scores, labels) = synthetic(&reference_theta(), 400, &mut seeded(3));
    let cfg = config(vec![20], 1);
    let a = run_experiment(&scores, &labels, &cfg).unwrap();
    let b = run_experiment(&scores, &labels, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), Method::ALL.len());
}

#[test]
fn subsampled_trials_run() {
    let (scores, labels) = synthetic(&reference_theta(), 600, &mut seeded(4));
    let mut cfg = config(vec![20], 2);
    cfg.subsample = Some(300);
    let result = run_experiment(&scores, &labels, &cfg).unwrap();
    let spe = result.summary_for(20, Method::Spe).unwrap();
    assert_eq!(spe.completed + spe.failures, 2);
}

#[test]
fn evaluate_report_round_trips_and_exports_every_grid_point() {
    let mut rng = seeded(6);
    let (scores, labels) = synthetic(&reference_theta(), 400, &mut rng);
    let data = sample_label_budget(&scores, &labels, 20, &mut rng).unwrap();
    let opts = SpeOptions {
        samples: 200,
        ..SpeOptions::default()
    };
    let e = run_spe(&data, &PriorSpec::default(), &[reference_layout()], &opts, &mut rng).unwrap();
    let grid = recall_grid(50);
    let band = ensemble_curve_band(&e, &data, &grid, &[0.05, 0.5, 0.95]).unwrap();
    let probs = posterior_label_probability(&e, &data);

    let mut report = Report::new("evaluate");
    report.seed = Some(6);
    report.fit = Some(FitSummary::of(&e));
    report.ensemble = Some(EnsembleSummary::of(&e));
    report.expected_curve = band.expected_curve().ok();
    report.items = Some(
        data.scores()
            .iter()
            .zip(data.labels())
            .zip(probs)
            .enumerate()
            .map(|(i, ((&score, &label), probability))| ItemProbability {
                id: format!("item{i}"),
                score,
                label,
                probability,
            })
            .collect(),
    );
    report.band = Some(band.clone());

    let json = report.to_json().unwrap();
    assert_eq!(Report::from_json(&json).unwrap(), report);
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["schema_version"], "1.0");

    let csv = band_csv(&band).unwrap();
    assert_eq!(csv.lines().count(), grid.len() + 1);
    let names: Vec<&str> = csv_tables(&report).unwrap().iter().map(|(n, _)| *n).collect();
    assert!(names.contains(&"band") && names.contains(&"items"), "{names:?}");
}
