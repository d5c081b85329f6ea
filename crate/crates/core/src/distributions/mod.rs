//! Parametric families for class-conditional score densities.
//!
//! Every family lives on the non-negative half line. Families whose natural
//! support is the whole real line (normal, Student's t, both Gumbels) are
//! truncated at zero and renormalized.

pub(crate) mod fit;
mod special;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution as _, Gamma, LogNormal, Normal, Open01, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Result, SpeError};

pub use fit::{mle_fit, moment_init, rank_families, rank_families_with, FamilyRanking};
pub(crate) use special::ln_norm_sf;
pub use special::LN_SQRT_2PI;

/// Below this acceptance rate, truncated draws switch from rejection to
/// inversion.
const MIN_REJECTION_ACCEPTANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyTag {
    TruncatedNormal,
    Gamma,
    LogNormal,
    GumbelLeft,
    GumbelRight,
    TruncatedStudentT,
    Gompertz,
    FrechetRight,
}

/// How a parameter is constrained, which decides both its unconstrained
/// reparameterization and the prior it receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    /// Real-valued location on the score scale.
    Location,
    /// Real-valued location on the log-score scale.
    LogLocation,
    /// Strictly positive scale or shape.
    Positive,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 8] = [
        FamilyTag::TruncatedNormal,
        FamilyTag::Gamma,
        FamilyTag::LogNormal,
        FamilyTag::GumbelLeft,
        FamilyTag::GumbelRight,
        FamilyTag::TruncatedStudentT,
        FamilyTag::Gompertz,
        FamilyTag::FrechetRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::TruncatedNormal => "truncated-normal",
            FamilyTag::Gamma => "gamma",
            FamilyTag::LogNormal => "log-normal",
            FamilyTag::GumbelLeft => "gumbel-left",
            FamilyTag::GumbelRight => "gumbel-right",
            FamilyTag::TruncatedStudentT => "truncated-student-t",
            FamilyTag::Gompertz => "gompertz",
            FamilyTag::FrechetRight => "frechet-right",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            FamilyTag::TruncatedNormal | FamilyTag::GumbelLeft | FamilyTag::GumbelRight => {
                &["location", "scale"]
            }
            FamilyTag::Gamma | FamilyTag::Gompertz | FamilyTag::FrechetRight => &["shape", "scale"],
            FamilyTag::LogNormal => &["log_location", "log_scale"],
            FamilyTag::TruncatedStudentT => &["location", "scale", "dof"],
        }
    }

    pub fn param_kinds(self) -> &'static [ParamKind] {
        use ParamKind::*;
        match self {
            FamilyTag::TruncatedNormal | FamilyTag::GumbelLeft | FamilyTag::GumbelRight => {
                &[Location, Positive]
            }
            FamilyTag::Gamma | FamilyTag::Gompertz | FamilyTag::FrechetRight => &[Positive, Positive],
            FamilyTag::LogNormal => &[LogLocation, Positive],
            FamilyTag::TruncatedStudentT => &[Location, Positive, Positive],
        }
    }

    pub fn dim(self) -> usize {
        self.param_kinds().len()
    }

    pub fn is_truncated(self) -> bool {
        matches!(
            self,
            FamilyTag::TruncatedNormal
                | FamilyTag::TruncatedStudentT
                | FamilyTag::GumbelLeft
                | FamilyTag::GumbelRight
        )
    }

    /// Map natural parameters to unconstrained coordinates (positive entries
    /// go through `ln`).
    pub fn to_unconstrained(self, params: &DistParams) -> Vec<f64> {
        self.param_kinds()
            .iter()
            .zip(params.values())
            .map(|(kind, &v)| match kind {
                ParamKind::Positive => v.ln(),
                _ => v,
            })
            .collect()
    }

    pub fn from_unconstrained(self, coords: &[f64]) -> DistParams {
        DistParams::new(
            self.param_kinds()
                .iter()
                .zip(coords)
                .map(|(kind, &u)| match kind {
                    ParamKind::Positive => u.exp(),
                    _ => u,
                })
                .collect(),
        )
    }

    /// `ln |d natural / d unconstrained|` at `coords`.
    pub fn log_jacobian(self, coords: &[f64]) -> f64 {
        self.param_kinds()
            .iter()
            .zip(coords)
            .filter(|(kind, _)| **kind == ParamKind::Positive)
            .map(|(_, &u)| u)
            .sum()
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyTag {
    type Err = SpeError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let tag = match key.as_str() {
            "truncated-normal" | "normal" | "n" => FamilyTag::TruncatedNormal,
            "gamma" | "g" => FamilyTag::Gamma,
            "log-normal" | "lognormal" | "ln" => FamilyTag::LogNormal,
            "gumbel-left" | "g-l" => FamilyTag::GumbelLeft,
            "gumbel-right" | "g-r" => FamilyTag::GumbelRight,
            "truncated-student-t" | "student-t" | "t" => FamilyTag::TruncatedStudentT,
            "gompertz" | "gz" => FamilyTag::Gompertz,
            "frechet-right" | "frechet" | "f-r" => FamilyTag::FrechetRight,
            _ => return Err(SpeError::Config(format!("unknown distribution family `{s}`"))),
        };
        Ok(tag)
    }
}

/// Natural parameter vector of one family, in the order of
/// [`FamilyTag::param_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistParams(Vec<f64>);

impl DistParams {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DistParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for DistParams {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

/// A validated family + parameter pair with its truncation normalizer cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub struct ScoreDistribution {
    family: FamilyTag,
    params: DistParams,
    /// `ln P(X > 0)` under the untruncated base; zero for families that
    /// already live on the half line.
    log_mass: f64,
}

/// Serialized form of [`ScoreDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: FamilyTag,
    pub params: DistParams,
}

impl TryFrom<DistributionSpec> for ScoreDistribution {
    type Error = SpeError;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        ScoreDistribution::new(spec.family, spec.params)
    }
}

impl From<ScoreDistribution> for DistributionSpec {
    fn from(d: ScoreDistribution) -> Self {
        DistributionSpec {
            family: d.family,
            params: d.params,
        }
    }
}

impl ScoreDistribution {
    pub fn new(family: FamilyTag, params: impl Into<DistParams>) -> Result<Self> {
        let params = params.into();
        let invalid = |reason: String| SpeError::InvalidParams { family, reason };
        let v = params.values();
        if v.len() != family.dim() {
            return Err(invalid(format!("expected {} parameters, got {}", family.dim(), v.len())));
        }
        for ((&x, kind), name) in v.iter().zip(family.param_kinds()).zip(family.param_names()) {
            if !x.is_finite() {
                return Err(invalid(format!("{name} = {x} is not finite")));
            }
            if *kind == ParamKind::Positive && x <= 0.0 {
                return Err(invalid(format!("{name} = {x} must be strictly positive")));
            }
        }
        let mut dist = Self {
            family,
            params,
            log_mass: 0.0,
        };
        if family.is_truncated() {
            let log_mass = dist.base_ln_sf(0.0);
            if !(log_mass > f64::NEG_INFINITY) {
                return Err(invalid("no probability mass above the truncation point".into()));
            }
            dist.log_mass = log_mass;
        }
        Ok(dist)
    }

    pub fn family(&self) -> FamilyTag {
        self.family
    }

    pub fn params(&self) -> &DistParams {
        &self.params
    }

    fn p(&self, i: usize) -> f64 {
        self.params.0[i]
    }

    /// Natural log of the normalized density; `-inf` outside the support.
    pub fn log_pdf(&self, s: f64) -> f64 {
        if s.is_nan() {
            return f64::NAN;
        }
        if s < 0.0 || s == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        match self.family {
            FamilyTag::Gamma => {
                let (k, theta) = (self.p(0), self.p(1));
                if s == 0.0 {
                    return if k == 1.0 {
                        -theta.ln()
                    } else if k > 1.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    };
                }
                (k - 1.0) * s.ln() - s / theta - ln_gamma(k) - k * theta.ln()
            }
            FamilyTag::LogNormal => {
                if s == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (mu, sigma) = (self.p(0), self.p(1));
                let z = (s.ln() - mu) / sigma;
                -s.ln() - sigma.ln() - LN_SQRT_2PI - 0.5 * z * z
            }
            FamilyTag::Gompertz => {
                let (c, b) = (self.p(0), self.p(1));
                let x = s / b;
                c.ln() - b.ln() + x - c * x.exp_m1()
            }
            FamilyTag::FrechetRight => {
                if s == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (c, b) = (self.p(0), self.p(1));
                let x = s / b;
                c.ln() - b.ln() - (1.0 + c) * x.ln() - x.powf(-c)
            }
            _ => self.base_ln_pdf(s) - self.log_mass,
        }
    }

    pub fn pdf(&self, s: f64) -> f64 {
        self.log_pdf(s).exp()
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.cdf_sf(s).0
    }

    pub fn survival(&self, s: f64) -> f64 {
        self.cdf_sf(s).1
    }

    /// `(cdf, survival)`, each computed from the expression that is accurate
    /// on its side.
    pub fn cdf_sf(&self, s: f64) -> (f64, f64) {
        if s.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        if s <= 0.0 {
            return (0.0, 1.0);
        }
        if s == f64::INFINITY {
            return (1.0, 0.0);
        }
        match self.family {
            FamilyTag::Gamma => {
                let x = s / self.p(1);
                if x == f64::INFINITY {
                    return (1.0, 0.0);
                }
                let k = self.p(0);
                (gamma_lr(k, x), gamma_ur(k, x))
            }
            FamilyTag::LogNormal => {
                let z = (s.ln() - self.p(0)) / self.p(1);
                (ln_norm_sf(-z).exp(), ln_norm_sf(z).exp())
            }
            FamilyTag::Gompertz => {
                let ln_sf = -self.p(0) * (s / self.p(1)).exp_m1();
                (-ln_sf.exp_m1(), ln_sf.exp())
            }
            FamilyTag::FrechetRight => {
                let ln_cdf = -(s / self.p(1)).powf(-self.p(0));
                (ln_cdf.exp(), -ln_cdf.exp_m1())
            }
            _ => {
                let ln_ratio = (self.base_ln_sf(s) - self.log_mass).min(0.0);
                (-ln_ratio.exp_m1(), ln_ratio.exp())
            }
        }
    }

    /// Inverse cdf by bracketing and bisection. `p = 0` maps to the support
    /// infimum (0) and `p = 1` to `+inf`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SpeError::Domain(format!("quantile probability {p} outside [0, 1]")));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        if p == 1.0 {
            return Ok(f64::INFINITY);
        }
        // `below(x)` is true while x sits left of the target quantile; in the
        // upper half the comparison runs on the survival side so that small
        // tail probabilities keep full relative precision.
        let upper = p > 0.5;
        let q = 1.0 - p;
        let below = |x: f64| {
            let (c, s) = self.cdf_sf(x);
            if upper {
                s > q
            } else {
                c < p
            }
        };
        let mut lo = 0.0;
        let mut hi = self.scale_hint().max(f64::MIN_POSITIVE);
        let mut expansions = 0;
        while below(hi) {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 2000 || !hi.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// A positive value of the order of the distribution's spread, used to
    /// seed quantile bracketing.
    fn scale_hint(&self) -> f64 {
        let hint = match self.family {
            FamilyTag::Gamma => self.p(0) * self.p(1),
            FamilyTag::LogNormal => self.p(0).exp(),
            FamilyTag::Gompertz | FamilyTag::FrechetRight => self.p(1),
            _ => self.p(0).abs() + self.p(1),
        };
        if hint.is_finite() && hint > 0.0 {
            hint
        } else {
            1.0
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).unwrap_or(f64::NAN)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let acceptance = self.log_mass.exp();
        match self.family {
            FamilyTag::Gamma => Gamma::new(self.p(0), self.p(1))
                .expect("validated gamma parameters")
                .sample(rng),
            FamilyTag::LogNormal => LogNormal::new(self.p(0), self.p(1))
                .expect("validated log-normal parameters")
                .sample(rng),
            FamilyTag::Gompertz => {
                let u: f64 = rng.sample(Open01);
                self.p(1) * (-u.ln() / self.p(0)).ln_1p()
            }
            FamilyTag::FrechetRight => {
                let u: f64 = rng.sample(Open01);
                self.p(1) * (-u.ln()).powf(-1.0 / self.p(0))
            }
            _ if acceptance < MIN_REJECTION_ACCEPTANCE => {
                let u: f64 = rng.sample(Open01);
                self.quantile(u).unwrap_or(0.0)
            }
            _ => loop {
                let x = self.sample_base(rng);
                if x >= 0.0 {
                    break x;
                }
            },
        }
    }

    fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (loc, scale) = (self.p(0), self.p(1));
        match self.family {
            FamilyTag::TruncatedNormal => Normal::new(loc, scale)
                .expect("validated normal parameters")
                .sample(rng),
            FamilyTag::TruncatedStudentT => {
                let t: f64 = StudentT::new(self.p(2))
                    .expect("validated Student's t parameters")
                    .sample(rng);
                loc + scale * t
            }
            FamilyTag::GumbelRight => {
                let u: f64 = rng.sample(Open01);
                loc - scale * (-u.ln()).ln()
            }
            FamilyTag::GumbelLeft => {
                let u: f64 = rng.sample(Open01);
                loc + scale * (-u.ln()).ln()
            }
            _ => unreachable!("only truncated families have a base draw"),
        }
    }

    /// Log density of the untruncated base of a truncated family.
    fn base_ln_pdf(&self, x: f64) -> f64 {
        let (loc, scale) = (self.p(0), self.p(1));
        let z = (x - loc) / scale;
        match self.family {
            FamilyTag::TruncatedNormal => -0.5 * z * z - scale.ln() - LN_SQRT_2PI,
            FamilyTag::TruncatedStudentT => {
                let nu = self.p(2);
                ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln()
                    - scale.ln()
                    - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
            }
            FamilyTag::GumbelRight => -scale.ln() - z - (-z).exp(),
            FamilyTag::GumbelLeft => -scale.ln() + z - z.exp(),
            _ => unreachable!("base density requested for an untruncated family"),
        }
    }

    /// `ln P(X > x)` under the untruncated base.
    fn base_ln_sf(&self, x: f64) -> f64 {
        let (loc, scale) = (self.p(0), self.p(1));
        let z = (x - loc) / scale;
        match self.family {
            FamilyTag::TruncatedNormal => ln_norm_sf(z),
            FamilyTag::TruncatedStudentT => special::ln_student_t_sf(z, self.p(2)),
            FamilyTag::GumbelRight => {
                let e = (-z).exp();
                (-(-e).exp_m1()).ln()
            }
            FamilyTag::GumbelLeft => -z.exp(),
            _ => unreachable!("base survival requested for an untruncated family"),
        }
    }
}

/// Log density of `family(params)` at `s`.
pub fn log_pdf(family: FamilyTag, params: &DistParams, s: f64) -> Result<f64> {
    Ok(ScoreDistribution::new(family, params.clone())?.log_pdf(s))
}

pub fn cdf(family: FamilyTag, params: &DistParams, s: f64) -> Result<f64> {
    Ok(ScoreDistribution::new(family, params.clone())?.cdf(s))
}

pub fn survival(family: FamilyTag, params: &DistParams, s: f64) -> Result<f64> {
    Ok(ScoreDistribution::new(family, params.clone())?.survival(s))
}

pub fn quantile(family: FamilyTag, params: &DistParams, p: f64) -> Result<f64> {
    ScoreDistribution::new(family, params.clone())?.quantile(p)
}

pub fn sample<R: Rng + ?Sized>(family: FamilyTag, params: &DistParams, rng: &mut R) -> Result<f64> {
    Ok(ScoreDistribution::new(family, params.clone())?.sample(rng))
}
