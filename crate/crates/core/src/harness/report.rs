//! Human-readable summaries and plot-ready CSV series for ledger records.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::config::{Experiment, GrowthSystem};
use super::experiments::{
    CensusData, ContrastData, CorrelationData, GrowthData, IntervalData, JointData, SpacingData, StabilityData,
    VarianceData,
};
use super::ledger::{ExperimentRecord, Ledger};
use crate::counting::CountResult;
use crate::io::{fmt_f64, write_atomic};
use crate::poisson_model::{interval_count_pmf, level_spacing_pdf};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub files: Vec<PathBuf>,
}

/// Summary text for record `id`; CSV series are written to `out_dir` if given.
pub fn report(ledger: &Ledger, id: &str, out_dir: Option<&Path>) -> Result<Report> {
    let record = ledger.find(id)?;
    let files = match out_dir {
        Some(dir) => write_data_files(&record, dir)?,
        None => Vec::new(),
    };
    Ok(Report { text: summary_text(&record), files })
}

/// Writes every data file of `record` into `dir` atomically.
pub fn write_data_files(record: &ExperimentRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, bytes) in data_files(record)? {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        out.push(path);
    }
    Ok(out)
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("malformed per-sample data: {e}")))
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn fit_params(fit: &Value) -> Option<(f64, f64, f64)> {
    Some((fit.get("p")?.as_f64()?, fit.get("log_a")?.as_f64()?, fit.get("q")?.as_f64()?))
}

fn model_value(params: Option<(f64, f64, f64)>, n: u64) -> String {
    match params {
        Some((p, log_a, q)) => {
            let ln = (n as f64).ln();
            fmt_f64((log_a + p * ln + q * ln.ln()).exp())
        }
        None => String::new(),
    }
}

fn indexed(values: &[f64]) -> Vec<Vec<String>> {
    values.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]).collect()
}

/// `(file name, CSV bytes)` for every series of the record.
pub fn data_files(record: &ExperimentRecord) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    match &record.config.experiment {
        Experiment::SpacingPoisson(e) => {
            let d: SpacingData = parse(&record.samples)?;
            for (l, &a) in e.levels.iter().enumerate() {
                let rows = d.histograms[l]
                    .densities()
                    .into_iter()
                    .map(|(s, dens)| Ok(vec![fmt_f64(s), fmt_f64(dens), fmt_f64(level_spacing_pdf(a, s)?)]))
                    .collect::<Result<Vec<_>>>()?;
                let header = if a == 1 {
                    ["s", "empirical_density", "exp_minus_s"]
                } else {
                    ["s", "empirical_density", "poisson_density"]
                };
                files.push((format!("spacing_level{a}.csv"), csv_bytes(&header, rows)?));
            }
            let mut header = vec!["sample".to_string()];
            header.extend(e.levels.iter().map(|a| format!("ks_level{a}")));
            if d.control_ks.is_some() {
                header.extend(e.levels.iter().map(|a| format!("control_ks_level{a}")));
            }
            let rows = (0..e.samples)
                .map(|i| {
                    let mut r = vec![i.to_string()];
                    r.extend(d.ks.iter().map(|k| fmt_f64(k[i])));
                    if let Some(c) = &d.control_ks {
                        r.extend(c.iter().map(|k| fmt_f64(k[i])));
                    }
                    r
                })
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            files.push(("ks.csv".into(), csv_bytes(&header, rows)?));
        }
        Experiment::JointSpacing(_) => {
            let d: JointData = parse(&record.samples)?;
            files.push(("ks.csv".into(), csv_bytes(&["sample", "ks"], indexed(&d.ks))?));
        }
        Experiment::IntervalCount(e) => {
            let d: IntervalData = parse(&record.samples)?;
            let m = d.freqs.len() as f64;
            let rows = (0..=e.max_k)
                .map(|k| {
                    let f = d.freqs.iter().map(|r| r[k]).sum::<f64>() / m;
                    Ok(vec![k.to_string(), fmt_f64(f), fmt_f64(interval_count_pmf(e.lambda, k as u64)?)])
                })
                .collect::<Result<Vec<_>>>()?;
            files.push(("occupancy.csv".into(), csv_bytes(&["k", "empirical_freq", "poisson_pmf"], rows)?));
        }
        Experiment::RKLimit(_) | Experiment::MeanCheck(_) => {
            let d: CorrelationData = parse(&record.samples)?;
            files.push(("r_k.csv".into(), csv_bytes(&["sample", "r_k"], indexed(&d.values))?));
        }
        Experiment::VarianceDecay(_) => {
            let d: VarianceData = parse(&record.samples)?;
            let vars = record.summary.get("variances").and_then(Value::as_array).cloned().unwrap_or_default();
            let slope = record.summary.get("slope").and_then(Value::as_f64);
            let intercept = record.summary.get("intercept").and_then(Value::as_f64);
            let rows = d
                .ns
                .iter()
                .zip(vars)
                .map(|(&n, v)| {
                    let fitted = match (slope, intercept) {
                        (Some(b), Some(a)) => fmt_f64((a + b * (n as f64).ln()).exp()),
                        _ => String::new(),
                    };
                    vec![n.to_string(), fmt_f64(v.as_f64().unwrap_or(f64::NAN)), fitted]
                })
                .collect();
            files.push(("variance.csv".into(), csv_bytes(&["N", "variance", "fitted"], rows)?));
        }
        Experiment::Stability(_) => {
            let d: StabilityData = parse(&record.samples)?;
            let rows = d
                .r_n
                .iter()
                .zip(&d.r_n_plus_k)
                .enumerate()
                .map(|(i, (a, b))| vec![i.to_string(), fmt_f64(*a), fmt_f64(*b), fmt_f64((b - a).abs())])
                .collect();
            files.push(("stability.csv".into(), csv_bytes(&["sample", "r_n", "r_n_plus_k", "delta"], rows)?));
        }
        Experiment::CountingGrowth(_) => {
            let d: GrowthData = parse(&record.samples)?;
            let params = record.summary.get("fit").and_then(fit_params);
            files.push(("growth.csv".into(), growth_csv(&d.counts, params)?));
        }
        Experiment::Contrast(_) => {
            let d: ContrastData = parse(&record.samples)?;
            let pc = record.summary.get("contrast_fit").and_then(fit_params);
            let pl = record.summary.get("lacunary_fit").and_then(fit_params);
            let rows = d
                .contrast
                .iter()
                .zip(&d.lacunary)
                .map(|(c, l)| {
                    vec![
                        c.n.to_string(),
                        c.total.to_string(),
                        model_value(pc, c.n),
                        l.total.to_string(),
                        model_value(pl, l.n),
                    ]
                })
                .collect();
            files.push((
                "contrast.csv".into(),
                csv_bytes(&["N", "contrast_count", "contrast_model", "lacunary_count", "lacunary_model"], rows)?,
            ));
        }
        Experiment::SmallpartsCensus(_) => {
            let d: CensusData = parse(&record.samples)?;
            let rows = d.g_values.iter().enumerate().map(|(i, g)| vec![i.to_string(), g.to_string()]).collect();
            files.push(("g_max.csv".into(), csv_bytes(&["sample", "g_max"], rows)?));
        }
    }
    Ok(files)
}

fn growth_csv(counts: &[CountResult], params: Option<(f64, f64, f64)>) -> Result<Vec<u8>> {
    let rows = counts.iter().map(|c| vec![c.n.to_string(), c.total.to_string(), model_value(params, c.n)]).collect();
    csv_bytes(&["N", "exact_count", "model"], rows)
}

fn num(record: &ExperimentRecord, key: &str) -> String {
    match record.summary.get(key) {
        Some(Value::Number(x)) if x.is_f64() => x.as_f64().map(fmt_f64).unwrap_or_else(|| x.to_string()),
        Some(Value::Number(x)) => x.to_string(),
        Some(Value::Null) | None => "n/a".into(),
        Some(other) => other.to_string(),
    }
}

fn fit_p(record: &ExperimentRecord, key: &str) -> String {
    match record.summary.get(key).and_then(|f| f.get("p")).and_then(Value::as_f64) {
        Some(p) => fmt_f64(p),
        None => "n/a (degenerate)".into(),
    }
}

/// Plain-text summary naming the quantity checked and the observed value.
pub fn summary_text(record: &ExperimentRecord) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "experiment {} ({}), seed {}, config {}, {}",
        record.id, record.kind, record.seed, &record.config_digest[..12], record.timestamp
    );
    match &record.config.experiment {
        Experiment::SpacingPoisson(e) => {
            for &a in &e.levels {
                let law = match a {
                    1 => "P_1(s) = e^(-s)".to_string(),
                    2 => "P_2(s) = s e^(-s)".to_string(),
                    _ => format!("P_{a}(s) = s^{} e^(-s) / {}!", a - 1, a - 1),
                };
                let _ = write!(
                    t,
                    "level-{a} normalized spacings at N = {} vs the Poisson law {law}: median KS distance {} over {} alphas",
                    e.n,
                    num(record, &format!("median_ks_level{a}")),
                    e.samples
                );
                if e.control {
                    let _ = write!(t, " (i.i.d. control {})", num(record, &format!("control_median_ks_level{a}")));
                }
                t.push('\n');
            }
        }
        Experiment::JointSpacing(e) => {
            let _ = writeln!(
                t,
                "joint law of {} consecutive spacings at N = {} vs independent exponentials: median KS distance {}",
                e.r,
                e.n,
                num(record, "median_ks")
            );
        }
        Experiment::IntervalCount(e) => {
            let _ = writeln!(
                t,
                "points in random arcs of length {}/N at N = {} vs Poisson({}): max |freq - pmf| {} (mean occupancy {})",
                e.lambda,
                e.n,
                e.lambda,
                num(record, "max_abs_dev"),
                num(record, "mean_occupancy")
            );
        }
        Experiment::RKLimit(e) => {
            let _ = writeln!(
                t,
                "R_{}(f, N) at N = {} vs its Poisson limit int f = {}: mean {}, mean |R - int f| / int f = {}",
                e.k,
                e.n,
                num(record, "integral"),
                num(record, "mean_r"),
                num(record, "mean_rel_dev")
            );
        }
        Experiment::MeanCheck(e) => {
            let _ = writeln!(
                t,
                "mean over alpha of R_{}(f, N) at N = {} vs b(0,N)/N^{} = {}: Monte Carlo {} +- {} (z = {})",
                e.k,
                e.n,
                e.k,
                num(record, "b0_normalized"),
                num(record, "mean_r"),
                num(record, "standard_error"),
                num(record, "z")
            );
        }
        Experiment::VarianceDecay(e) => {
            let _ = writeln!(
                t,
                "variance over alpha of R_{}(f, N) for N in {:?}: fitted log-log slope {} (decay N^(-1+eps) predicted)",
                e.k,
                e.ns,
                num(record, "slope")
            );
        }
        Experiment::Stability(e) => {
            let _ = writeln!(
                t,
                "|R_{k}(f, N+K) - R_{k}(f, N)| at N = {}, K = {}: max {}, mean {}",
                e.n,
                num(record, "extra"),
                num(record, "max_delta"),
                num(record, "mean_delta"),
                k = e.k
            );
        }
        Experiment::CountingGrowth(e) => {
            let _ = writeln!(
                t,
                "exact solution counts of the {} system for N in {:?} vs A N^p (log N)^{}: fitted p = {}",
                match e.system {
                    GrowthSystem::Homogeneous { r, variant } => format!("homogeneous (r = {r}, {variant:?})"),
                    GrowthSystem::PairEquation { k } => format!("pair equation (k = {k})"),
                },
                e.ns,
                e.q,
                fit_p(record, "fit")
            );
        }
        Experiment::Contrast(e) => {
            let _ = writeln!(
                t,
                "contrast equation counts for N in {:?}: fitted p = {} (contrast) vs {} (lacunary), gap {}",
                e.ns,
                fit_p(record, "contrast_fit"),
                fit_p(record, "lacunary_fit"),
                num(record, "gap")
            );
        }
        Experiment::SmallpartsCensus(e) => {
            let _ = writeln!(
                t,
                "fraction of alphas with G(N, alpha) > N^{} = {} at N = {}: {} +- {} (median G {}, max G {})",
                e.delta,
                num(record, "threshold"),
                e.n,
                num(record, "fraction"),
                num(record, "half_width"),
                num(record, "median_g"),
                num(record, "max_g")
            );
        }
    }
    for c in &record.checks {
        let _ = writeln!(
            t,
            "check {}: {} {} {} -> {}",
            c.name,
            fmt_f64(c.observed),
            c.relation,
            fmt_f64(c.threshold),
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(t, "overall: {}", if record.passed { "pass" } else { "FAIL" });
    t
}
