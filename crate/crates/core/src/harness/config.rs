//! Experiment configuration: a TOML document with a top-level `seed` and an
//! `[experiment]` table selected by its `kind` key.
//!
//! ```toml
//! seed = 11
//!
//! [experiment]
//! kind = "spacing_poisson"
//! sequence = { kind = "geometric", base = 2 }
//! n = 2000
//! samples = 20
//! guard = 64
//! levels = [1, 2]
//! max_median_ks = [0.05, 0.06]
//! ```
//!
//! Every `max_*` / `min_*` key is an optional pass/fail threshold.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlations::{TestFunction, TestKind};
use crate::counting::HomogeneousVariant;
use crate::fracparts::DEFAULT_GUARD;
use crate::sequences::{SequenceSpec, DEFAULT_BIT_BUDGET};
use crate::spacings::SpacingMode;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Cap on the bits materialised for the sequence values.
    #[serde(default)]
    pub bit_budget: Option<u64>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SpacingPoisson,
    JointSpacing,
    IntervalCount,
    RKLimit,
    MeanCheck,
    VarianceDecay,
    Stability,
    CountingGrowth,
    Contrast,
    SmallpartsCensus,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SpacingPoisson => "spacing_poisson",
            Self::JointSpacing => "joint_spacing",
            Self::IntervalCount => "interval_count",
            Self::RKLimit => "r_k_limit",
            Self::MeanCheck => "mean_check",
            Self::VarianceDecay => "variance_decay",
            Self::Stability => "stability",
            Self::CountingGrowth => "counting_growth",
            Self::Contrast => "contrast",
            Self::SmallpartsCensus => "smallparts_census",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    SpacingPoisson(SpacingPoisson),
    JointSpacing(JointSpacing),
    IntervalCount(IntervalCount),
    #[serde(rename = "r_k_limit")]
    RKLimit(RkLimit),
    MeanCheck(MeanCheck),
    VarianceDecay(VarianceDecay),
    Stability(Stability),
    CountingGrowth(CountingGrowth),
    Contrast(Contrast),
    SmallpartsCensus(SmallpartsCensus),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::SpacingPoisson(_) => ExperimentKind::SpacingPoisson,
            Self::JointSpacing(_) => ExperimentKind::JointSpacing,
            Self::IntervalCount(_) => ExperimentKind::IntervalCount,
            Self::RKLimit(_) => ExperimentKind::RKLimit,
            Self::MeanCheck(_) => ExperimentKind::MeanCheck,
            Self::VarianceDecay(_) => ExperimentKind::VarianceDecay,
            Self::Stability(_) => ExperimentKind::Stability,
            Self::CountingGrowth(_) => ExperimentKind::CountingGrowth,
            Self::Contrast(_) => ExperimentKind::Contrast,
            Self::SmallpartsCensus(_) => ExperimentKind::SmallpartsCensus,
        }
    }
}

fn default_guard() -> u32 {
    DEFAULT_GUARD
}

fn default_levels() -> Vec<u32> {
    vec![1]
}

fn default_order() -> usize {
    2
}

fn default_r() -> usize {
    2
}

fn default_lambda() -> f64 {
    1.0
}

fn default_trials() -> u64 {
    100_000
}

fn default_max_k() -> usize {
    6
}

fn default_stability_delta() -> f64 {
    0.3
}

fn default_census_delta() -> f64 {
    0.5
}

fn default_contrast_sequence() -> SequenceSpec {
    SequenceSpec::polynomial(2)
}

fn default_lacunary_sequence() -> SequenceSpec {
    SequenceSpec::geometric(2)
}

/// A test function family member; its dimension is fixed by the order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: TestKind,
    pub rho: f64,
}

impl FunctionSpec {
    pub fn build(&self, k: usize) -> Result<TestFunction> {
        TestFunction::for_order(self.kind, k, self.rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingPoisson {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default)]
    pub mode: SpacingMode,
    /// Also run the same statistic on i.i.d. uniform points.
    #[serde(default)]
    pub control: bool,
    /// One threshold per entry of `levels`.
    #[serde(default)]
    pub max_median_ks: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpacing {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    /// Consecutive spacings per tuple.
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub mode: SpacingMode,
    #[serde(default)]
    pub max_median_ks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalCount {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Random arcs per alpha.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Occupancies `0..=max_k` are compared with the Poisson law.
    #[serde(default = "default_max_k")]
    pub max_k: usize,
    #[serde(default)]
    pub max_abs_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RkLimit {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_order")]
    pub k: usize,
    pub f: FunctionSpec,
    /// Bound on `mean |R_k - int f| / int f`.
    #[serde(default)]
    pub max_rel_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanCheck {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_order")]
    pub k: usize,
    pub f: FunctionSpec,
    #[serde(default)]
    pub n_max: Option<u64>,
    /// Bound on `|mean - b(0,N)/N^k|` in standard errors.
    #[serde(default)]
    pub max_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceDecay {
    pub sequence: SequenceSpec,
    pub ns: Vec<usize>,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_order")]
    pub k: usize,
    pub f: FunctionSpec,
    #[serde(default)]
    pub max_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stability {
    pub sequence: SequenceSpec,
    pub n: usize,
    /// Extension length `K`; defaults to `floor(N^(1 - delta))`.
    #[serde(default)]
    pub extra: Option<usize>,
    #[serde(default = "default_stability_delta")]
    pub delta: f64,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_order")]
    pub k: usize,
    pub f: FunctionSpec,
    #[serde(default)]
    pub max_delta: Option<f64>,
}

impl Stability {
    pub fn extension(&self) -> usize {
        self.extra.unwrap_or_else(|| (self.n as f64).powf(1.0 - self.delta).floor() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthSystem {
    Homogeneous {
        r: usize,
        #[serde(default)]
        variant: HomogeneousVariant,
    },
    PairEquation {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingGrowth {
    pub sequence: SequenceSpec,
    pub system: GrowthSystem,
    pub ns: Vec<u64>,
    /// Fixed log power in the model `A N^p (log N)^q`.
    pub q: f64,
    #[serde(default)]
    pub max_cost: Option<f64>,
    #[serde(default)]
    pub max_p: Option<f64>,
    /// Frozen totals, one decimal string per entry of `ns`.
    #[serde(default)]
    pub expected: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contrast {
    pub ns: Vec<u64>,
    #[serde(default = "default_contrast_sequence")]
    pub contrast_sequence: SequenceSpec,
    #[serde(default = "default_lacunary_sequence")]
    pub lacunary_sequence: SequenceSpec,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub max_cost: Option<f64>,
    /// Lower bound on `p_contrast - p_lacunary`.
    #[serde(default)]
    pub min_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallpartsCensus {
    pub sequence: SequenceSpec,
    pub n: usize,
    pub samples: usize,
    #[serde(default = "default_guard")]
    pub guard: u32,
    #[serde(default = "default_census_delta")]
    pub delta: f64,
    #[serde(default)]
    pub max_fraction: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn bit_budget(&self) -> u64 {
        self.bit_budget.unwrap_or(DEFAULT_BIT_BUDGET)
    }

    /// Canonical bytes: compact JSON with fields in declaration order and
    /// every default filled in.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_bytes`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    /// Schema checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(m));
        let samples_n = |samples: usize, n: usize| -> Result<()> {
            if samples == 0 {
                return Err(Error::Schema("samples must be positive".into()));
            }
            if n < 2 {
                return Err(Error::Schema(format!("N must be at least 2, got {n}")));
            }
            Ok(())
        };
        let sequence_ok = |s: &SequenceSpec| s.validate().map_err(|e| Error::Schema(e.to_string()));
        match &self.experiment {
            Experiment::SpacingPoisson(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
                if e.levels.is_empty() {
                    return bad("levels must not be empty".into());
                }
                if let Some(t) = &e.max_median_ks {
                    if t.len() != e.levels.len() {
                        return bad(format!("max_median_ks has {} entries for {} levels", t.len(), e.levels.len()));
                    }
                }
            }
            Experiment::JointSpacing(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
            }
            Experiment::IntervalCount(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
            }
            Experiment::RKLimit(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
                e.f.build(e.k).map_err(|err| Error::Schema(err.to_string()))?;
            }
            Experiment::MeanCheck(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
                if e.samples < 2 {
                    return bad("mean_check needs at least 2 samples".into());
                }
                e.f.build(e.k).map_err(|err| Error::Schema(err.to_string()))?;
            }
            Experiment::VarianceDecay(e) => {
                sequence_ok(&e.sequence)?;
                if e.ns.len() < 2 {
                    return bad("variance_decay needs at least two N".into());
                }
                for &n in &e.ns {
                    samples_n(e.samples, n)?;
                }
                if e.samples < 2 {
                    return bad("variance_decay needs at least 2 samples".into());
                }
                e.f.build(e.k).map_err(|err| Error::Schema(err.to_string()))?;
            }
            Experiment::Stability(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
                e.f.build(e.k).map_err(|err| Error::Schema(err.to_string()))?;
            }
            Experiment::CountingGrowth(e) => {
                sequence_ok(&e.sequence)?;
                if let Some(x) = &e.expected {
                    if x.len() != e.ns.len() {
                        return bad(format!("expected has {} entries for {} values of N", x.len(), e.ns.len()));
                    }
                }
            }
            Experiment::Contrast(e) => {
                sequence_ok(&e.contrast_sequence)?;
                sequence_ok(&e.lacunary_sequence)?;
            }
            Experiment::SmallpartsCensus(e) => {
                sequence_ok(&e.sequence)?;
                samples_n(e.samples, e.n)?;
            }
        }
        Ok(())
    }
}
