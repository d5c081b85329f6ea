//! Score ingestion, normalization, label budgets and synthetic data.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpeError};
use crate::mixture::{MixtureParams, ScoreDataset};

/// Rows of an `id,score[,label]` file, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<Option<bool>>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|y| y.is_some()).count()
    }

    /// All labels, failing if any item is unlabeled.
    pub fn full_labels(&self) -> Result<Vec<bool>> {
        self.labels
            .iter()
            .zip(&self.ids)
            .map(|(y, id)| y.ok_or_else(|| SpeError::Validation(format!("item {id} has no label"))))
            .collect()
    }

    /// Normalize scores into `(0, 1]` and build a dataset with the file's labels.
    pub fn to_dataset(&self) -> Result<(ScoreDataset, ScoreNormalization)> {
        let (scores, map) = normalize_scores(&self.scores)?;
        Ok((ScoreDataset::new(scores, self.labels.clone())?, map))
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_scores(file)
}

/// Parse `id,score[,label]` with a header row. Labels are `0`/`1`; an empty
/// label cell means unlabeled.
pub fn read_scores<R: Read>(reader: R) -> Result<ScoreTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(id_col), Some(score_col)) = (column("id"), column("score")) else {
        return Err(SpeError::Parse {
            line: 1,
            message: format!("header must name `id` and `score` columns, got {:?}", headers.iter().collect::<Vec<_>>()),
        });
    };
    let label_col = column("label");

    let mut table = ScoreTable::default();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, what: &str| {
            record.get(col).ok_or_else(|| SpeError::Parse {
                line,
                message: format!("missing {what} field"),
            })
        };
        let id = field(id_col, "id")?.to_string();
        let raw = field(score_col, "score")?;
        let score: f64 = raw.parse().map_err(|_| SpeError::Parse {
            line,
            message: format!("score `{raw}` is not a number"),
        })?;
        if !score.is_finite() {
            return Err(SpeError::Parse {
                line,
                message: format!("score `{raw}` is not finite"),
            });
        }
        let label = match label_col.and_then(|c| record.get(c)) {
            None | Some("") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => {
                return Err(SpeError::Validation(format!("line {line}: label `{other}` is not 0 or 1")))
            }
        };
        if !seen.insert(id.clone()) {
            return Err(SpeError::Validation(format!("duplicate id `{id}` on line {line}")));
        }
        table.ids.push(id);
        table.scores.push(score);
        table.labels.push(label);
    }
    if table.is_empty() {
        return Err(SpeError::Validation("score file has no rows".into()));
    }
    Ok(table)
}

/// Affine map `s' = (s - min + delta) / (max - min + delta)` with
/// `delta = (max - min) / 1000`, sending the data into `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreNormalization {
    pub min: f64,
    pub max: f64,
    pub delta: f64,
}

impl ScoreNormalization {
    pub fn fit(scores: &[f64]) -> Result<Self> {
        let (min, max) = scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if !(min.is_finite() && max.is_finite()) {
            return Err(SpeError::Validation("scores must be finite".into()));
        }
        if max <= min {
            return Err(SpeError::Validation(format!(
                "cannot normalize: all scores equal {min}"
            )));
        }
        Ok(Self {
            min,
            max,
            delta: (max - min) / 1000.0,
        })
    }

    fn span(&self) -> f64 {
        self.max - self.min + self.delta
    }

    pub fn forward(&self, s: f64) -> f64 {
        (s - self.min + self.delta) / self.span()
    }

    /// Map a normalized threshold back to the raw score scale.
    ///
    /// Returns the smallest raw `x` with `forward(x) >= t`, so a raw score
    /// is at or above the result exactly when its normalized score is at or
    /// above `t`. Plain algebra can be an ulp off either way.
    pub fn inverse(&self, t: f64) -> f64 {
        let mut x = t * self.span() + self.min - self.delta;
        if !x.is_finite() {
            return x;
        }
        while self.forward(x) < t {
            x = x.next_up();
        }
        while self.forward(x.next_down()) >= t {
            x = x.next_down();
        }
        x
    }
}

pub fn normalize_scores(scores: &[f64]) -> Result<(Vec<f64>, ScoreNormalization)> {
    let map = ScoreNormalization::fit(scores)?;
    Ok((scores.iter().map(|&s| map.forward(s)).collect(), map))
}

/// Reveal a uniformly random subset of `budget` labels.
pub fn sample_label_budget<R: Rng + ?Sized>(
    scores: &[f64],
    labels: &[bool],
    budget: usize,
    rng: &mut R,
) -> Result<ScoreDataset> {
    let n = scores.len();
    if labels.len() != n {
        return Err(SpeError::Validation(format!("{n} scores but {} labels", labels.len())));
    }
    if budget > n {
        return Err(SpeError::Domain(format!("label budget {budget} exceeds {n} items")));
    }
    let mut revealed = vec![None; n];
    for i in rand::seq::index::sample(rng, n, budget) {
        revealed[i] = Some(labels[i]);
    }
    ScoreDataset::new(scores.to_vec(), revealed)
}

/// Draw `n` labeled items from the generative model `theta`.
pub fn synthetic<R: Rng + ?Sized>(theta: &MixtureParams, n: usize, rng: &mut R) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random::<f64>() < theta.pi;
        let component = if y { &theta.positive } else { &theta.negative };
        let s = loop {
            let s = component.sample(rng);
            if s.is_finite() && s > 0.0 {
                break s;
            }
        };
        scores.push(s);
        labels.push(y);
    }
    (scores, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_rows_one_label() {
        let t = read_scores("id,score,label\na,0.1,\nb,0.7,1\nc,0.3,\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.labeled_count(), 1);
        let (d, _) = t.to_dataset().unwrap();
        assert_eq!(d.labeled_indices().len(), 1);
        assert_eq!(d.unlabeled_indices().len(), 2);
    }

    #[test]
    fn label_column_is_optional() {
        let t = read_scores("id,score\na,1\nb,2\n".as_bytes()).unwrap();
        assert_eq!(t.labels, vec![None, None]);
    }

    #[test]
    fn empty_and_duplicate_files() {
        assert!(matches!(read_scores("id,score,label\n".as_bytes()), Err(SpeError::Validation(_))));
        match read_scores("id,score\nx,1\nx,2\n".as_bytes()) {
            Err(SpeError::Validation(m)) => assert!(m.contains("`x`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        match read_scores("id,score\na,0.1\nb,abc\n".as_bytes()) {
            Err(SpeError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_scores("id,score,label\na,0.1,2\n".as_bytes()),
            Err(SpeError::Validation(_))
        ));
    }

    #[test]
    fn normalization_arithmetic() {
        let (s, map) = normalize_scores(&[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(map.delta, 0.01);
        assert!((s[0] - 0.01 / 10.01).abs() < 1e-15);
        assert!((s[1] - 5.01 / 10.01).abs() < 1e-15);
        assert_eq!(s[2], 1.0);
        assert!((map.inverse(s[1]) - 5.0).abs() < 1e-12);
        assert!(normalize_scores(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn budgets() {
        let scores = vec![0.1, 0.2, 0.3, 0.4];
        let labels = vec![true, false, true, false];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_label_budget(&scores, &labels, 4, &mut rng).unwrap().is_fully_labeled());
        assert_eq!(sample_label_budget(&scores, &labels, 0, &mut rng).unwrap().labeled_indices().len(), 0);
        assert!(sample_label_budget(&scores, &labels, 5, &mut rng).is_err());
        let a = sample_label_budget(&scores, &labels, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_label_budget(&scores, &labels, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
