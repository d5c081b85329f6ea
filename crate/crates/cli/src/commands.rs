use std::io::Write;

use log::info;
use spe::config::{parse_condition, parse_families, parse_levels, ConfigFile, RunConfig};
use spe::data::{load_scores, normalize_scores, sample_label_budget, synthetic, ScoreNormalization, ScoreTable};
use spe::distributions::rank_families_with;
use spe::experiment::{run_experiment, ExperimentConfig};
use spe::inference::posterior_label_probability;
use spe::mixture::{map_estimate, select_family_pair, MixtureParams, ScoreDataset};
use spe::performance::{
    condition_probability, ensemble_curve_band, observed_thresholds, recall_grid, recalibrate_threshold,
};
use spe::report::{
    emit_report, ClassRankings, ConditionReport, EnsembleSummary, FitSummary, InputSummary, ItemProbability,
    Report,
};
use spe::rng::seeded;
use spe::{run_spe, FamilyTag, PosteriorEnsemble, Result, ScoreDistribution, SpeError};

use crate::{ExperimentArgs, OutputArgs, RankArgs, RecalibrateArgs, RunArgs, SynthArgs};

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(a.seed);
    if let Some(path) = &a.config {
        cfg = cfg.with_file(&ConfigFile::load(path)?)?;
    }
    if let Some(f) = &a.families {
        cfg.pairs = parse_families(f)?;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.starts {
        cfg.starts = v;
    }
    if let Some(q) = &a.quantiles {
        cfg.quantiles = parse_levels(q)?;
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Loaded {
    table: ScoreTable,
    data: ScoreDataset,
    norm: ScoreNormalization,
    summary: InputSummary,
}

fn load(path: &std::path::Path) -> Result<Loaded> {
    let table = load_scores(path)?;
    let (data, norm) = table.to_dataset()?;
    let summary = InputSummary {
        path: Some(path.display().to_string()),
        items: table.len(),
        labeled: table.labeled_count(),
        labeled_positive: table.labels.iter().filter(|&&y| y == Some(true)).count(),
        normalization: Some(norm),
    };
    info!("loaded {} items, {} labeled", summary.items, summary.labeled);
    Ok(Loaded {
        table,
        data,
        norm,
        summary,
    })
}

fn emit(report: &Report, out: &OutputArgs) -> Result<()> {
    for path in emit_report(report, out.format, out.out.as_deref())? {
        info!("wrote {}", path.display());
    }
    Ok(())
}

pub fn rank_dists(a: &RankArgs) -> Result<()> {
    let table = load_scores(&a.scores)?;
    let (scores, _) = normalize_scores(&table.scores)?;
    let families: Vec<FamilyTag> = match &a.families {
        None => FamilyTag::ALL.to_vec(),
        Some(spec) => spec
            .split(',')
            .map(|s| s.parse::<FamilyTag>())
            .collect::<Result<Vec<_>>>()?,
    };
    let mut rng = seeded(a.seed);
    let mut rank_class = |want: bool| -> Result<Vec<spe::distributions::FamilyRanking>> {
        let class: Vec<f64> = scores
            .iter()
            .zip(&table.labels)
            .filter(|(_, y)| **y == Some(want))
            .map(|(s, _)| *s)
            .collect();
        if class.is_empty() {
            log::warn!("no {} labels; skipping that class", if want { "positive" } else { "negative" });
            return Ok(Vec::new());
        }
        rank_families_with(&class, &families, a.holdout, &mut rng)
    };
    let negative = rank_class(false)?;
    let positive = rank_class(true)?;
    if negative.is_empty() && positive.is_empty() {
        return Err(SpeError::Validation("ranking needs labeled items".into()));
    }
    let mut report = Report::new("rank-dists");
    report.seed = Some(a.seed);
    report.ranking = Some(ClassRankings { negative, positive });
    emit(&report, &a.output)
}

fn base_report(command: &str, cfg: &RunConfig, input: &Loaded) -> Report {
    let mut report = Report::new(command);
    report.seed = Some(cfg.seed);
    report.config = Some(cfg.clone());
    report.input = Some(input.summary.clone());
    report
}

pub fn fit(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let input = load(&a.scores)?;
    let mut rng = seeded(cfg.seed);
    let opts = cfg.map_options();
    let (map, candidates) = if cfg.pairs.len() == 1 {
        let map = map_estimate(&input.data, &cfg.priors, cfg.pairs[0], &opts, &mut rng)?;
        let score = spe::mixture::PairScore {
            negative: cfg.pairs[0].negative,
            positive: cfg.pairs[0].positive,
            log_posterior: Some(map.log_posterior),
            failure: None,
        };
        (map, vec![score])
    } else {
        let sel = select_family_pair(&input.data, &cfg.priors, &cfg.pairs, &opts, &mut rng)?;
        (sel.map, sel.candidates)
    };
    let mut report = base_report("fit", &cfg, &input);
    report.fit = Some(FitSummary {
        params: map.params,
        log_posterior: map.log_posterior,
        best_start: map.best_start,
        starts: map.starts,
        candidates,
    });
    emit(&report, &a.output)
}

fn posterior(cfg: &RunConfig, input: &Loaded, command: &str) -> Result<(PosteriorEnsemble, Report)> {
    let mut rng = seeded(cfg.seed);
    let ensemble = run_spe(&input.data, &cfg.priors, &cfg.pairs, &cfg.spe_options(), &mut rng)?;
    info!(
        "ensemble: {} members, ESS {:.1}, families {}/{}",
        ensemble.len(),
        ensemble.ess,
        ensemble.layout.negative,
        ensemble.layout.positive
    );
    let grid = recall_grid(cfg.grid);
    let band = ensemble_curve_band(&ensemble, &input.data, &grid, &cfg.quantiles)?;
    let probs = posterior_label_probability(&ensemble, &input.data);

    let mut report = base_report(command, cfg, input);
    report.fit = Some(FitSummary::of(&ensemble));
    report.ensemble = Some(EnsembleSummary::of(&ensemble));
    report.expected_curve = band.expected_curve().ok();
    report.band = Some(band);
    report.items = Some(
        input
            .table
            .ids
            .iter()
            .zip(&input.table.scores)
            .zip(input.table.labels.iter().zip(probs))
            .map(|((id, &score), (&label, probability))| ItemProbability {
                id: id.clone(),
                score,
                label,
                probability,
            })
            .collect(),
    );
    Ok((ensemble, report))
}

pub fn evaluate(a: &RunArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let input = load(&a.scores)?;
    let (_, report) = posterior(&cfg, &input, "evaluate")?;
    emit(&report, &a.output)
}

pub fn recalibrate(a: &RecalibrateArgs) -> Result<()> {
    let cfg = run_config(&a.run)?;
    let conditions = a
        .conditions
        .iter()
        .map(|c| parse_condition(c))
        .collect::<Result<Vec<_>>>()?;
    let input = load(&a.run.scores)?;
    let (ensemble, mut report) = posterior(&cfg, &input, "recalibrate")?;

    let taus = observed_thresholds(input.data.scores());
    for condition in conditions {
        let table = condition_probability(&ensemble, &input.data, condition, &taus)?;
        let recommendation = recalibrate_threshold(&table, a.confidence)?;
        // exact on the item partition: raw >= this iff normalized >= tau
        let recommended_tau_raw = input.norm.inverse(recommendation.tau);
        if !recommendation.met {
            log::warn!(
                "no threshold reaches confidence {} for recall > {}, precision > {}",
                a.confidence,
                condition.recall_floor,
                condition.precision_floor
            );
        }
        report.conditions.push(ConditionReport {
            table,
            recommendation,
            recommended_tau_raw,
        });
    }
    emit(&report, &a.run.output)
}

pub fn experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = run_config(&a.run)?;
    let input = load(&a.run.scores)?;
    let labels = input.table.full_labels()?;
    let budgets = a
        .budget
        .split(',')
        .map(|b| {
            b.trim()
                .parse::<usize>()
                .map_err(|_| SpeError::Validation(format!("budget `{b}` is not a count")))
        })
        .collect::<Result<Vec<_>>>()?;
    let exp = ExperimentConfig {
        budgets,
        trials: a.trials,
        seed: cfg.seed,
        priors: cfg.priors,
        pairs: cfg.pairs.clone(),
        spe: cfg.spe_options(),
        grid_size: cfg.grid,
        subsample: a.subsample,
    };
    let result = run_experiment(input.data.scores(), &labels, &exp)?;
    let mut report = base_report("experiment", &cfg, &input);
    report.experiment = Some(result);
    emit(&report, &a.run.output)
}

fn parse_component(spec: &str) -> Result<ScoreDistribution> {
    let (family, params) = spec
        .split_once(':')
        .ok_or_else(|| SpeError::Validation(format!("component `{spec}` must look like `gamma:2,0.05`")))?;
    let family: FamilyTag = family.parse()?;
    let params = params
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| SpeError::Validation(format!("parameter `{p}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScoreDistribution::new(family, params)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let theta = MixtureParams::new(a.pi, parse_component(&a.negative)?, parse_component(&a.positive)?)?;
    let mut rng = seeded(a.seed);
    let (scores, labels) = synthetic(&theta, a.items, &mut rng);
    let revealed: Vec<Option<bool>> = match a.reveal {
        None => labels.iter().map(|&y| Some(y)).collect(),
        Some(t) => sample_label_budget(&scores, &labels, t, &mut rng)?.labels().to_vec(),
    };
    let mut body = String::from("id,score,label\n");
    for (i, (s, y)) in scores.iter().zip(&revealed).enumerate() {
        let y = y.map_or(String::new(), |y| (y as u8).to_string());
        body.push_str(&format!("item{i},{s},{y}\n"));
    }
    match &a.out {
        Some(path) => std::fs::write(path, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}
