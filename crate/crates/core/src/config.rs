//! Run configuration and the optional TOML file that overrides priors and
//! defaults.
//!
//! ```toml
//! families = "gamma,truncated-normal"
//! samples = 500
//!
//! [priors]
//! pi = { alpha = 1.0, beta = 1.0 }
//! location = { kind = "normal", mean = 0.5, sd = 0.25 }
//! positive = { kind = "gamma", shape = 2.0, scale = 1.0 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::FamilyTag;
use crate::error::{Result, SpeError};
use crate::inference::SpeOptions;
use crate::mixture::{all_pairs, MapOptions, MixtureLayout, PriorSpec};
use crate::performance::validate_levels;

pub const DEFAULT_FAMILIES: &str = "truncated-normal,gamma,log-normal";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub priors: Option<PriorSpec>,
    pub families: Option<String>,
    pub samples: Option<usize>,
    pub starts: Option<usize>,
    pub quantiles: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub proposal_inflation: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| SpeError::Config(e.to_string()))?;
        if let Some(p) = &cfg.priors {
            p.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }
}

/// Parse a family specification into candidate `(negative, positive)` pairs.
///
/// `gamma/truncated-normal` names an explicit pair (several may be given,
/// comma separated); a plain list such as `gamma,truncated-normal` means
/// every ordered pair drawn from it.
pub fn parse_families(spec: &str) -> Result<Vec<MixtureLayout>> {
    let items: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(SpeError::Validation("no families given".into()));
    }
    let parse = |s: &str| s.parse::<FamilyTag>().map_err(|e| SpeError::Validation(e.to_string()));
    if items.iter().any(|s| s.contains('/')) {
        items
            .iter()
            .map(|item| {
                let (neg, pos) = item.split_once('/').ok_or_else(|| {
                    SpeError::Validation(format!("`{item}`: mix of pairs and single families"))
                })?;
                Ok(MixtureLayout::new(parse(neg.trim())?, parse(pos.trim())?))
            })
            .collect()
    } else {
        let mut families = Vec::with_capacity(items.len());
        for item in items {
            let f = parse(item)?;
            if !families.contains(&f) {
                families.push(f);
            }
        }
        Ok(all_pairs(&families))
    }
}

/// Parse `r,p` into a floor pair.
pub fn parse_condition(spec: &str) -> Result<crate::performance::ConditionSpec> {
    let (r, p) = spec
        .split_once(',')
        .ok_or_else(|| SpeError::Validation(format!("condition `{spec}` must look like `0.5,0.5`")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| SpeError::Validation(format!("condition `{spec}`: `{s}` is not a number")))
    };
    crate::performance::ConditionSpec::new(num(r)?, num(p)?)
}

pub fn parse_levels(spec: &str) -> Result<Vec<f64>> {
    let levels = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| SpeError::Validation(format!("quantile `{s}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    validate_levels(&levels)?;
    Ok(levels)
}

/// Everything a single SPE run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pairs: Vec<MixtureLayout>,
    pub priors: PriorSpec,
    pub samples: usize,
    pub starts: usize,
    pub seed: u64,
    pub quantiles: Vec<f64>,
    pub grid: usize,
    pub proposal_inflation: f64,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            pairs: parse_families(DEFAULT_FAMILIES).expect("default families parse"),
            priors: PriorSpec::default(),
            samples: 500,
            starts: 10,
            seed,
            quantiles: vec![0.05, 0.5, 0.95],
            grid: 200,
            proposal_inflation: 1.2,
        }
    }

    /// Apply values from a config file.
    pub fn with_file(mut self, file: &ConfigFile) -> Result<Self> {
        if let Some(p) = file.priors {
            self.priors = p;
        }
        if let Some(f) = &file.families {
            self.pairs = parse_families(f)?;
        }
        if let Some(v) = file.samples {
            self.samples = v;
        }
        if let Some(v) = file.starts {
            self.starts = v;
        }
        if let Some(v) = &file.quantiles {
            self.quantiles = v.clone();
        }
        if let Some(v) = file.grid {
            self.grid = v;
        }
        if let Some(v) = file.proposal_inflation {
            self.proposal_inflation = v;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(SpeError::Validation("no candidate family pairs".into()));
        }
        if self.samples == 0 || self.starts == 0 || self.grid == 0 {
            return Err(SpeError::Validation("samples, starts and grid must all be at least 1".into()));
        }
        if !(self.proposal_inflation.is_finite() && self.proposal_inflation > 0.0) {
            return Err(SpeError::Validation("proposal inflation must be positive".into()));
        }
        validate_levels(&self.quantiles)?;
        self.priors.validate()
    }

    pub fn spe_options(&self) -> SpeOptions {
        SpeOptions {
            samples: self.samples,
            map: MapOptions {
                n_starts: self.starts,
                ..MapOptions::default()
            },
            proposal_inflation: self.proposal_inflation,
            ..SpeOptions::default()
        }
    }

    pub fn map_options(&self) -> MapOptions {
        self.spe_options().map
    }
}
