//! Experiment drivers. Each kind computes typed per-sample data; a separate
//! pure summary step turns that data into summary statistics and checks, so a
//! stored record can be re-summarised without recomputation.

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::*;
use super::ledger::{Check, Outcome};
use crate::correlations::{correlation_direct, mean_via_b0, FourierOptions};
use crate::counting::{fit_growth, fit_line, CountBudget, CountQuery, CountResult, GrowthFit};
use crate::fracparts::{
    frac_parts_prepared, required_precision_for, sample_alpha, OrderedPoints, PreparedValues, UnitFrac,
    DEFAULT_MAX_PRECISION,
};
use crate::poisson_model::{interval_count_pmf, joint_spacing_cdf, level_spacing_cdf};
use crate::seeds::{derive_seed, sample_rng};
use crate::sequences::{generate_with_budget, SequenceSpec};
use crate::smallparts::{exceptional_fraction, summarize_exceptional};
use crate::spacings::{interval_counts, joint_ks_distance, joint_spacings, ks_distance, normalized_spacings, Histogram};
use crate::{Error, Result};

/// Salts separating auxiliary random streams from the alpha stream.
const CONTROL_SALT: u64 = 0x636f_6e74_726f_6c00;
const ARC_SALT: u64 = 0x6172_6373_0000_0000;

/// Sequence values plus the precision needed to sample alpha for them.
struct Pipeline {
    values: PreparedValues,
    precision: u64,
    guard: u32,
}

impl Pipeline {
    fn new(spec: &SequenceSpec, n: usize, guard: u32, bit_budget: u64) -> Result<Self> {
        let values = generate_with_budget(spec, n, bit_budget)?;
        let precision = required_precision_for(&values, guard, DEFAULT_MAX_PRECISION)?;
        Ok(Self { values: PreparedValues::new(values), precision, guard })
    }

    /// Fractional parts for sample `i`; alpha is keyed by `derive_seed(seed, i)`.
    fn points(&self, seed: u64, i: usize) -> Result<OrderedPoints> {
        let alpha = sample_alpha(derive_seed(seed, i as u64), self.precision)?;
        frac_parts_prepared(&alpha, &self.values, self.guard)
    }

    fn per_sample<T: Send>(
        &self,
        seed: u64,
        samples: usize,
        f: impl Fn(usize, OrderedPoints) -> Result<T> + Sync,
    ) -> Result<Vec<T>> {
        (0..samples).into_par_iter().map(|i| f(i, self.points(seed, i)?)).collect()
    }
}

/// i.i.d. uniform control points for sample `i`.
fn control_points(seed: u64, i: usize, n: usize) -> OrderedPoints {
    let mut rng = sample_rng(seed ^ CONTROL_SALT, i as u64);
    OrderedPoints::new((0..n).map(|_| UnitFrac(rng.gen())).collect(), 127, "iid")
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingData {
    /// `ks[l][i]`: KS distance at `levels[l]` for sample `i`.
    pub ks: Vec<Vec<f64>>,
    #[serde(default)]
    pub control_ks: Option<Vec<Vec<f64>>>,
    /// Pooled spacing histograms, one per level.
    pub histograms: Vec<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointData {
    pub ks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalData {
    /// `freqs[i][k]`: fraction of arcs holding `k` points, sample `i`.
    pub freqs: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationData {
    pub values: Vec<f64>,
    pub integral: f64,
    /// `b(0,N)/N^k` from the Fourier side (mean check only).
    #[serde(default)]
    pub b0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceData {
    #[serde(rename = "Ns")]
    pub ns: Vec<usize>,
    /// `values[j][i]`: `R_k` at `ns[j]` for sample `i`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityData {
    pub extra: usize,
    pub r_n: Vec<f64>,
    pub r_n_plus_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthData {
    pub counts: Vec<CountResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastData {
    pub contrast: Vec<CountResult>,
    pub lacunary: Vec<CountResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusData {
    pub g_values: Vec<usize>,
}

/// Runs the experiment described by `cfg`. Deterministic in `cfg`.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let seed = cfg.seed;
    let budget = cfg.bit_budget();
    let samples = match &cfg.experiment {
        Experiment::SpacingPoisson(e) => {
            for &a in &e.levels {
                level_spacing_cdf(a, 1.0)?;
            }
            let pipe = Pipeline::new(&e.sequence, e.n, e.guard, budget)?;
            let run = |pts: &OrderedPoints| -> Result<(Vec<f64>, Vec<Histogram>)> {
                let mut ks = Vec::new();
                let mut hists = Vec::new();
                for &a in &e.levels {
                    let s = normalized_spacings(pts, a as usize, e.mode)?;
                    ks.push(ks_distance(&s.deltas, |x| level_spacing_cdf(a, x).unwrap_or(f64::NAN)));
                    let mut h = Histogram::spacing_default();
                    h.extend(s.deltas.iter().copied());
                    hists.push(h);
                }
                Ok((ks, hists))
            };
            let per = pipe.per_sample(seed, e.samples, |_, pts| run(&pts))?;
            let control = if e.control {
                let c: Vec<(Vec<f64>, Vec<Histogram>)> = (0..e.samples)
                    .into_par_iter()
                    .map(|i| run(&control_points(seed, i, e.n)))
                    .collect::<Result<_>>()?;
                Some(transpose(c.into_iter().map(|x| x.0).collect()))
            } else {
                None
            };
            let mut histograms: Vec<Histogram> = e.levels.iter().map(|_| Histogram::spacing_default()).collect();
            for (_, hs) in &per {
                for (acc, h) in histograms.iter_mut().zip(hs) {
                    acc.merge(h);
                }
            }
            let ks = transpose(per.into_iter().map(|x| x.0).collect());
            to_value(SpacingData { ks, control_ks: control, histograms })?
        }
        Experiment::JointSpacing(e) => {
            let pipe = Pipeline::new(&e.sequence, e.n, e.guard, budget)?;
            let ks = pipe.per_sample(seed, e.samples, |_, pts| {
                let tuples = joint_spacings(&pts, e.r, e.mode)?;
                Ok(joint_ks_distance(&tuples, |s| joint_spacing_cdf(s).unwrap_or(f64::NAN)))
            })?;
            to_value(JointData { ks })?
        }
        Experiment::IntervalCount(e) => {
            let pipe = Pipeline::new(&e.sequence, e.n, e.guard, budget)?;
            let per = pipe.per_sample(seed, e.samples, |i, pts| {
                let h = interval_counts(&pts, e.lambda, e.trials, derive_seed(seed ^ ARC_SALT, i as u64))?;
                Ok(((0..=e.max_k).map(|k| h.freq(k)).collect::<Vec<f64>>(), h.mean()))
            })?;
            let (freqs, means) = per.into_iter().unzip();
            to_value(IntervalData { freqs, means })?
        }
        Experiment::RKLimit(e) => {
            let f = e.f.build(e.k)?;
            let pipe = Pipeline::new(&e.sequence, e.n, e.guard, budget)?;
            let values = pipe.per_sample(seed, e.samples, |_, pts| Ok(correlation_direct(&pts, e.k, &f)?.value))?;
            to_value(CorrelationData { values, integral: f.integral(), b0: None })?
        }
        Experiment::MeanCheck(e) => {
            let f = e.f.build(e.k)?;
            let pipe = Pipeline::new(&e.sequence, e.n, e.guard, budget)?;
            let b0 = mean_via_b0(e.k, &f, e.n, pipe.values.values(), FourierOptions { n_max: e.n_max, tol: None })?;
            let values = pipe.per_sample(seed, e.samples, |_, pts| Ok(correlation_direct(&pts, e.k, &f)?.value))?;
            to_value(CorrelationData { values, integral: f.integral(), b0: Some(b0) })?
        }
        Experiment::VarianceDecay(e) => {
            let f = e.f.build(e.k)?;
            let mut values = Vec::with_capacity(e.ns.len());
            for &n in &e.ns {
                let pipe = Pipeline::new(&e.sequence, n, e.guard, budget)?;
                values.push(pipe.per_sample(seed, e.samples, |_, pts| Ok(correlation_direct(&pts, e.k, &f)?.value))?);
            }
            to_value(VarianceData { ns: e.ns.clone(), values })?
        }
        Experiment::Stability(e) => {
            let f = e.f.build(e.k)?;
            let extra = e.extension();
            crate::correlations::check_stability_window(e.n, extra, e.delta)?;
            let pipe = Pipeline::new(&e.sequence, e.n + extra, e.guard, budget)?;
            let per = pipe.per_sample(seed, e.samples, |_, pts| {
                let short = correlation_direct(&pts.prefix(e.n), e.k, &f)?.value;
                let long = correlation_direct(&pts, e.k, &f)?.value;
                Ok((short, long))
            })?;
            let (r_n, r_n_plus_k) = per.into_iter().unzip();
            to_value(StabilityData { extra, r_n, r_n_plus_k })?
        }
        Experiment::CountingGrowth(e) => {
            let count_budget = count_budget(e.max_cost);
            let top = e.ns.iter().copied().max().unwrap_or(0) as usize;
            let values = generate_with_budget(&e.sequence, top, budget)?;
            let counts = e
                .ns
                .iter()
                .map(|&n| {
                    let q = match e.system {
                        GrowthSystem::Homogeneous { r, variant } => CountQuery::Homogeneous { r, n, variant },
                        GrowthSystem::PairEquation { k } => CountQuery::PairEquation { k, n },
                    };
                    q.run(&values, &count_budget)
                })
                .collect::<Result<Vec<_>>>()?;
            to_value(GrowthData { counts })?
        }
        Experiment::Contrast(e) => {
            let count_budget = count_budget(e.max_cost);
            let top = e.ns.iter().copied().max().unwrap_or(0) as usize;
            let run = |spec: &SequenceSpec| -> Result<Vec<CountResult>> {
                let values = generate_with_budget(spec, top, budget)?;
                e.ns.iter().map(|&n| CountQuery::ContrastTriple { n }.run(&values, &count_budget)).collect()
            };
            to_value(ContrastData { contrast: run(&e.contrast_sequence)?, lacunary: run(&e.lacunary_sequence)? })?
        }
        Experiment::SmallpartsCensus(e) => {
            let values = generate_with_budget(&e.sequence, e.n, budget)?;
            let est = exceptional_fraction(e.delta, e.samples, seed, &values, e.guard, DEFAULT_MAX_PRECISION)?;
            to_value(CensusData { g_values: est.g_values })?
        }
    };
    summarize(cfg, samples)
}

fn count_budget(max_cost: Option<f64>) -> CountBudget {
    let mut b = CountBudget::default();
    if let Some(c) = max_cost {
        b.max_cost = c;
    }
    b
}

fn to_value<T: Serialize>(x: T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn from_value<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("malformed per-sample data: {e}")))
}

fn transpose(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn fit_json(fit: &GrowthFit) -> Value {
    let num = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
    json!({
        "p": num(fit.p),
        "log_a": num(fit.log_a),
        "residual": num(fit.residual),
        "q": fit.q,
        "points_used": fit.points_used,
        "degenerate": fit.degenerate,
    })
}

fn growth_points(counts: &[CountResult]) -> Vec<(u64, u128)> {
    counts.iter().map(|c| (c.n, c.total)).collect()
}

/// Summary statistics and checks from per-sample data alone.
pub fn summarize(cfg: &ExperimentConfig, samples: Value) -> Result<Outcome> {
    let mut s = Map::new();
    let mut checks = Vec::new();
    match &cfg.experiment {
        Experiment::SpacingPoisson(e) => {
            let d: SpacingData = from_value(&samples)?;
            for (l, &a) in e.levels.iter().enumerate() {
                let med = median(&d.ks[l]);
                s.insert(format!("median_ks_level{a}"), json!(med));
                s.insert(format!("mean_ks_level{a}"), json!(mean(&d.ks[l])));
                if let Some(c) = &d.control_ks {
                    s.insert(format!("control_median_ks_level{a}"), json!(median(&c[l])));
                }
                if let Some(t) = &e.max_median_ks {
                    checks.push(Check::at_most(format!("median_ks_level{a}"), med, t[l]));
                }
            }
        }
        Experiment::JointSpacing(e) => {
            let d: JointData = from_value(&samples)?;
            let med = median(&d.ks);
            s.insert("median_ks".into(), json!(med));
            s.insert("mean_ks".into(), json!(mean(&d.ks)));
            if let Some(t) = e.max_median_ks {
                checks.push(Check::at_most("median_ks", med, t));
            }
        }
        Experiment::IntervalCount(e) => {
            let d: IntervalData = from_value(&samples)?;
            let m = d.freqs.len() as f64;
            let mut pooled = Vec::new();
            let mut dev: f64 = 0.0;
            for k in 0..=e.max_k {
                let f = d.freqs.iter().map(|r| r[k]).sum::<f64>() / m;
                let p = interval_count_pmf(e.lambda, k as u64)?;
                dev = dev.max((f - p).abs());
                pooled.push(f);
            }
            s.insert("pooled_freqs".into(), json!(pooled));
            s.insert("mean_occupancy".into(), json!(mean(&d.means)));
            s.insert("max_abs_dev".into(), json!(dev));
            if let Some(t) = e.max_abs_dev {
                checks.push(Check::at_most("max_abs_dev", dev, t));
            }
        }
        Experiment::RKLimit(e) => {
            let d: CorrelationData = from_value(&samples)?;
            let devs: Vec<f64> = d.values.iter().map(|v| (v - d.integral).abs()).collect();
            let rel = mean(&devs) / d.integral;
            s.insert("integral".into(), json!(d.integral));
            s.insert("mean_r".into(), json!(mean(&d.values)));
            s.insert("mean_abs_dev".into(), json!(mean(&devs)));
            s.insert("mean_rel_dev".into(), json!(rel));
            if let Some(t) = e.max_rel_dev {
                checks.push(Check::at_most("mean_rel_dev", rel, t));
            }
        }
        Experiment::MeanCheck(e) => {
            let d: CorrelationData = from_value(&samples)?;
            let b0 = d.b0.ok_or_else(|| Error::Parse("mean_check data lacks b0".into()))?;
            let m = mean(&d.values);
            let se = (variance(&d.values) / d.values.len() as f64).sqrt();
            let z = (m - b0).abs() / se;
            s.insert("mean_r".into(), json!(m));
            s.insert("standard_error".into(), json!(se));
            s.insert("b0_normalized".into(), json!(b0));
            s.insert("integral".into(), json!(d.integral));
            s.insert("z".into(), json!(z));
            if let Some(t) = e.max_z {
                checks.push(Check::at_most("z", z, t));
            }
        }
        Experiment::VarianceDecay(e) => {
            let d: VarianceData = from_value(&samples)?;
            let vars: Vec<f64> = d.values.iter().map(|v| variance(v)).collect();
            let xy: Vec<(f64, f64)> = d
                .ns
                .iter()
                .zip(&vars)
                .filter(|(_, v)| **v > 0.0)
                .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
                .collect();
            s.insert("variances".into(), json!(vars));
            s.insert("means".into(), json!(d.values.iter().map(|v| mean(v)).collect::<Vec<_>>()));
            match fit_line(&xy) {
                Some(line) => {
                    s.insert("slope".into(), json!(line.slope));
                    s.insert("intercept".into(), json!(line.intercept));
                    s.insert("residual".into(), json!(line.residual));
                    if let Some(t) = e.max_slope {
                        checks.push(Check::at_most("slope", line.slope, t));
                    }
                }
                None => {
                    s.insert("slope".into(), Value::Null);
                    if let Some(t) = e.max_slope {
                        checks.push(Check::at_most("slope", f64::NAN, t));
                    }
                }
            }
        }
        Experiment::Stability(e) => {
            let d: StabilityData = from_value(&samples)?;
            let deltas: Vec<f64> = d.r_n.iter().zip(&d.r_n_plus_k).map(|(a, b)| (b - a).abs()).collect();
            s.insert("extra".into(), json!(d.extra));
            s.insert("max_delta".into(), json!(max(&deltas)));
            s.insert("mean_delta".into(), json!(mean(&deltas)));
            if let Some(t) = e.max_delta {
                checks.push(Check::at_most("max_delta", max(&deltas), t));
            }
        }
        Experiment::CountingGrowth(e) => {
            let d: GrowthData = from_value(&samples)?;
            let fit = fit_growth(&growth_points(&d.counts), e.q)?;
            s.insert("totals".into(), json!(d.counts.iter().map(|c| c.total.to_string()).collect::<Vec<_>>()));
            s.insert("fit".into(), fit_json(&fit));
            if let Some(t) = e.max_p {
                checks.push(Check::at_most("p", if fit.degenerate { f64::NAN } else { fit.p }, t));
            }
            if let Some(expected) = &e.expected {
                let mismatches =
                    d.counts.iter().zip(expected).filter(|(c, x)| c.total.to_string() != x.trim()).count();
                s.insert("fixture_mismatches".into(), json!(mismatches));
                checks.push(Check::at_most("fixture_mismatches", mismatches as f64, 0.0));
            }
        }
        Experiment::Contrast(e) => {
            let d: ContrastData = from_value(&samples)?;
            let fc = fit_growth(&growth_points(&d.contrast), e.q)?;
            let fl = fit_growth(&growth_points(&d.lacunary), e.q)?;
            let gap = fc.p - fl.p;
            s.insert("contrast_fit".into(), fit_json(&fc));
            s.insert("lacunary_fit".into(), fit_json(&fl));
            s.insert("gap".into(), if gap.is_finite() { json!(gap) } else { Value::Null });
            if let Some(t) = e.min_gap {
                checks.push(Check::at_least("gap", gap, t));
            }
        }
        Experiment::SmallpartsCensus(e) => {
            let d: CensusData = from_value(&samples)?;
            let est = summarize_exceptional(e.delta, e.n, d.g_values.clone());
            let g: Vec<f64> = d.g_values.iter().map(|&x| x as f64).collect();
            s.insert("fraction".into(), json!(est.fraction));
            s.insert("half_width".into(), json!(est.half_width));
            s.insert("exceeded".into(), json!(est.exceeded));
            s.insert("threshold".into(), json!((e.n as f64).powf(e.delta)));
            s.insert("median_g".into(), json!(median(&g)));
            s.insert("max_g".into(), json!(max(&g)));
            if let Some(t) = e.max_fraction {
                checks.push(Check::at_most("fraction", est.fraction, t));
            }
        }
    }
    Ok(Outcome { samples, summary: s, checks })
}
