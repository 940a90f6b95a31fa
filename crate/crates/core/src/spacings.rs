//! Local spacing observables of ordered points on the circle: level-`a`
//! spacings, joint nearest-neighbour spacings, interval occupancies, and the
//! Kolmogorov-Smirnov distance used to compare them with reference laws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fracparts::{OrderedPoints, UnitFrac};
use crate::seeds::sample_rng;
use crate::{Error, Result};

const TWO_POW_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// Trials handled by one random stream in [`interval_counts`].
const TRIAL_BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingMode {
    /// Indices wrap around the circle; N spacings at every level.
    #[default]
    Circular,
    /// No wrap; N - a spacings at level a.
    Linear,
}

impl std::str::FromStr for SpacingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circular" => Ok(Self::Circular),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Parse(format!("unknown spacing mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub level: usize,
    pub mode: SpacingMode,
    pub n: usize,
    pub deltas: Vec<f64>,
}

/// Normalized gap `N (theta_j - theta_i)` between sorted positions `i < j`.
fn forward_gap(sorted: &[UnitFrac], i: usize, j: usize, n: f64) -> f64 {
    (sorted[j].0 - sorted[i].0) as f64 / TWO_POW_128 * n
}

/// `N (theta_{j} + 1 - theta_i)` for a step that wraps past 1, `j < i`.
fn wrapped_gap(sorted: &[UnitFrac], i: usize, j: usize, n: f64) -> f64 {
    (1.0 - (sorted[i].0 - sorted[j].0) as f64 / TWO_POW_128) * n
}

/// `delta_{a,n} = N (theta_{n+a} - theta_n)`; circular mode wraps the last
/// `a` spacings around the circle.
pub fn normalized_spacings(points: &OrderedPoints, a: usize, mode: SpacingMode) -> Result<SpacingSample> {
    let n = points.len();
    if a == 0 || a >= n {
        return Err(Error::LevelOutOfRange { level: a, n });
    }
    let s = points.sorted();
    let nf = n as f64;
    let mut deltas: Vec<f64> = (0..n - a).map(|i| forward_gap(s, i, i + a, nf)).collect();
    if mode == SpacingMode::Circular {
        deltas.extend((n - a..n).map(|i| wrapped_gap(s, i, i + a - n, nf)));
    }
    Ok(SpacingSample { level: a, mode, n, deltas })
}

/// Consecutive `r`-tuples of level-1 spacings.
pub fn joint_spacings(points: &OrderedPoints, r: usize, mode: SpacingMode) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    if r == 0 || r >= n {
        return Err(Error::WindowOutOfRange { window: r, n });
    }
    let d = normalized_spacings(points, 1, mode)?.deltas;
    Ok(match mode {
        SpacingMode::Circular => (0..n).map(|i| (0..r).map(|j| d[(i + j) % n]).collect()).collect(),
        SpacingMode::Linear => (0..n - r).map(|i| d[i..i + r].to_vec()).collect(),
    })
}

/// Fixed-width histogram with an overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    pub upper: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

impl Histogram {
    pub fn new(width: f64, upper: f64) -> Self {
        let bins = (upper / width).round() as usize;
        Self { width, upper, counts: vec![0; bins], overflow: 0, total: 0 }
    }

    /// Default binning for spacing densities: width 0.1 on [0, 10].
    pub fn spacing_default() -> Self {
        Self::new(0.1, 10.0)
    }

    pub fn add(&mut self, v: f64) {
        self.total += 1;
        let i = (v / self.width).floor();
        if i >= 0.0 && (i as usize) < self.counts.len() {
            self.counts[i as usize] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, it: I) {
        for v in it {
            self.add(v);
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total += other.total;
    }

    /// Bin centres paired with empirical densities.
    pub fn densities(&self) -> Vec<(f64, f64)> {
        let norm = self.total.max(1) as f64 * self.width;
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| ((i as f64 + 0.5) * self.width, c as f64 / norm))
            .collect()
    }
}

/// Empirical occupancy frequencies of random arcs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyHistogram {
    /// `counts[k]` = number of trials whose arc held exactly k points.
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl OccupancyHistogram {
    pub fn freq(&self, k: usize) -> f64 {
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>()
            / self.trials as f64
    }

    fn record(&mut self, k: usize) {
        if self.counts.len() <= k {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
        self.trials += 1;
    }

    fn merge(&mut self, other: &OccupancyHistogram) {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
    }
}

/// Number of points in the half-open arc `[left, left + len)`; `len` is a
/// fraction of the circle in units of 2^-128 and `None` means the full circle.
pub fn arc_count(sorted: &[UnitFrac], left: UnitFrac, len: Option<u128>) -> usize {
    let Some(len) = len else { return sorted.len() };
    let below = |v: u128| sorted.partition_point(|t| t.0 < v);
    let start = below(left.0);
    match left.0.checked_add(len) {
        Some(end) => below(end) - start,
        None => sorted.len() - start + below(left.0.wrapping_add(len)),
    }
}

/// Occupancy histogram of `trials` uniformly placed arcs of length
/// `lambda / N`. Trials are split into fixed blocks, each with its own
/// derived stream, so the result depends only on `seed`.
pub fn interval_counts(points: &OrderedPoints, lambda: f64, trials: u64, seed: u64) -> Result<OccupancyHistogram> {
    let n = points.len();
    if n == 0 || !(lambda > 0.0) || lambda > n as f64 {
        return Err(Error::Domain(format!("lambda {lambda} must lie in (0, N = {n}]")));
    }
    if trials == 0 {
        return Err(Error::Domain("at least one trial".into()));
    }
    let frac = lambda / n as f64;
    let len = if frac >= 1.0 { None } else { Some((frac * TWO_POW_128) as u128) };
    let sorted = points.sorted();
    let blocks = trials.div_ceil(TRIAL_BLOCK);
    let mut total = OccupancyHistogram { counts: Vec::new(), trials: 0 };
    for b in 0..blocks {
        let mut rng = sample_rng(seed, b);
        let todo = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
        let mut hist = OccupancyHistogram { counts: Vec::new(), trials: 0 };
        for _ in 0..todo {
            let left = UnitFrac(rng.gen::<u128>());
            hist.record(arc_count(sorted, left, len));
        }
        total.merge(&hist);
    }
    Ok(total)
}

/// `sup_t |F_emp(t) - cdf(t)|` over the sample points, checking both sides
/// of each jump of the right-continuous empirical distribution function.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    assert!(!samples.is_empty(), "ks_distance needs samples");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        // ties jump together
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    d.clamp(0.0, 1.0)
}

/// Multivariate KS-type distance for tuples: `max |F_emp(t) - cdf(t)|` with
/// `t` ranging over the sample tuples themselves. Quadratic in the sample
/// count.
pub fn joint_ks_distance<F: Fn(&[f64]) -> f64>(tuples: &[Vec<f64>], cdf: F) -> f64 {
    let n = tuples.len() as f64;
    let mut d: f64 = 0.0;
    for t in tuples {
        let below = tuples
            .iter()
            .filter(|u| u.iter().zip(t).all(|(a, b)| a <= b))
            .count() as f64;
        d = d.max((below / n - cdf(t)).abs());
    }
    d
}
