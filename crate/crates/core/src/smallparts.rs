//! Clustering of fractional parts in windows of width 1/N: the counts
//! `G(N, alpha, beta)`, their maximum `G(N, alpha)`, the exceptional sets
//! `A(delta, N)` and the exact measure of `Lambda(a, N)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fracparts::{frac_parts_prepared, required_precision_for, sample_alpha, OrderedPoints, PreparedValues, UnitFrac};
use crate::seeds::derive_seed;
use crate::spacings::arc_count;
use crate::{Error, Result};

/// Distances closer than this to a window edge are treated as ambiguous.
pub const MARGIN_LOG2: u32 = 40;
/// Guard used when a census is recomputed after a margin violation.
pub const RERUN_GUARD: u32 = 112;

/// Largest circle distance, in units of 2^-128, that is `< 1/N`.
pub fn half_width(n: usize) -> u128 {
    u128::MAX / n as u128
}

/// `G(N, alpha, beta)`: points at circle distance `< 1/N` from `beta`.
pub fn g_count(points: &OrderedPoints, beta: UnitFrac) -> usize {
    let n = points.len();
    if n == 0 {
        return 0;
    }
    let w = half_width(n);
    let len = w.checked_mul(2).and_then(|v| v.checked_add(1));
    arc_count(points.sorted(), UnitFrac(beta.0.wrapping_sub(w)), len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCensus {
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha_digest: String,
    pub g_max: usize,
    pub argmax_beta: UnitFrac,
    /// No pairwise gap lies within `2^-margin_log2` of the window length.
    pub margin_ok: bool,
    pub margin_log2: u32,
}

/// `G(N, alpha) = max_beta G(N, alpha, beta)`: the most points in a closed
/// arc of length `2w`, by a two-pointer sweep of the sorted circle. The
/// witness is the midpoint of a maximizing arc.
pub fn g_max(points: &OrderedPoints) -> WindowCensus {
    g_max_with_margin(points, MARGIN_LOG2)
}

pub fn g_max_with_margin(points: &OrderedPoints, margin_log2: u32) -> WindowCensus {
    let n = points.len();
    let s = points.sorted();
    let mut census = WindowCensus {
        n,
        alpha_digest: points.alpha_digest().to_string(),
        g_max: 0,
        argmax_beta: UnitFrac::ZERO,
        margin_ok: true,
        margin_log2,
    };
    if n == 0 {
        return census;
    }
    let span = half_width(n).saturating_mul(2);
    let margin = 1u128 << (128 - margin_log2);
    let near = |gap: u128| gap.abs_diff(span) <= margin;
    // j runs over the doubled circle; points i..j lie within span of s[i]
    let mut j = 0usize;
    for i in 0..n {
        if j < i + 1 {
            j = i + 1;
        }
        while j < i + n && s[i].forward_to(s[j % n]) <= span {
            j += 1;
        }
        let count = j - i;
        if j > i + 1 && near(s[i].forward_to(s[(j - 1) % n])) {
            census.margin_ok = false;
        }
        if j < i + n && near(s[i].forward_to(s[j % n])) {
            census.margin_ok = false;
        }
        if count > census.g_max {
            census.g_max = count;
            census.argmax_beta = UnitFrac(s[i].0.wrapping_add(span / 2));
        }
    }
    census
}

/// Oracle: maximum of a linear-scan count over the critical `beta`, the
/// arc endpoints `theta_i +- w`.
pub fn g_max_brute(points: &OrderedPoints) -> usize {
    let n = points.len();
    let w = half_width(n);
    let scan = |beta: UnitFrac| points.by_index().iter().filter(|t| t.circle_distance(beta) <= w).count();
    points
        .by_index()
        .iter()
        .flat_map(|t| [UnitFrac(t.0.wrapping_add(w)), UnitFrac(t.0.wrapping_sub(w))])
        .map(scan)
        .max()
        .unwrap_or(0)
}

/// Census from an alpha and the sequence values, rerun at guard
/// [`RERUN_GUARD`] when the first pass is too close to a window edge.
pub fn census_for_alpha_seed(seed: u64, values: &PreparedValues, guard: u32, max_bits: u64) -> Result<WindowCensus> {
    let run = |g: u32| -> Result<WindowCensus> {
        let p = required_precision_for(values.values(), g, max_bits)?;
        let alpha = sample_alpha(seed, p)?;
        let pts = frac_parts_prepared(&alpha, values, g)?;
        Ok(g_max(&pts))
    };
    let first = run(guard)?;
    if first.margin_ok || guard >= RERUN_GUARD {
        return Ok(first);
    }
    let second = run(RERUN_GUARD)?;
    // errors are now far below the margin, so the classification stands
    Ok(WindowCensus { margin_ok: true, margin_log2: RERUN_GUARD - 8, ..second })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalEstimate {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub exceeded: usize,
    pub fraction: f64,
    /// Normal-approximation 95% half-width of the binomial proportion.
    pub half_width: f64,
    /// `G(N, alpha_i)` per sample, in sample order.
    pub g_values: Vec<usize>,
}

/// Fraction of seeded alphas with `G(N, alpha) > N^delta`.
pub fn exceptional_fraction(
    delta: f64,
    m: usize,
    seed: u64,
    values: &[BigUint],
    guard: u32,
    max_bits: u64,
) -> Result<ExceptionalEstimate> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if m < 100 {
        return Err(Error::Domain(format!("need at least 100 samples, got {m}")));
    }
    let prepared = PreparedValues::new(values.to_vec());
    let g_values: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|i| census_for_alpha_seed(derive_seed(seed, i as u64), &prepared, guard, max_bits).map(|c| c.g_max))
        .collect::<Result<_>>()?;
    Ok(summarize_exceptional(delta, values.len(), g_values))
}

/// Threshold statistics for a fixed list of `G` values.
pub fn summarize_exceptional(delta: f64, n: usize, g_values: Vec<usize>) -> ExceptionalEstimate {
    let threshold = (n as f64).powf(delta);
    let exceeded = g_values.iter().filter(|&&g| g as f64 > threshold).count();
    let m = g_values.len();
    let fraction = exceeded as f64 / m as f64;
    let half_width = 1.96 * (fraction * (1.0 - fraction) / m as f64).sqrt();
    ExceptionalEstimate { delta, n, samples: m, exceeded, fraction, half_width, g_values }
}

/// Sorted, pairwise disjoint closed intervals with exact endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalUnion {
    intervals: Vec<(BigRational, BigRational)>,
}

impl IntervalUnion {
    pub fn unit() -> Self {
        Self { intervals: vec![(BigRational::zero(), BigRational::one())] }
    }

    /// Builds a union from arbitrary closed intervals, merging overlaps.
    pub fn from_intervals(mut v: Vec<(BigRational, BigRational)>) -> Self {
        v.retain(|(a, b)| a <= b);
        v.sort();
        let mut out: Vec<(BigRational, BigRational)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(BigRational, BigRational)] {
        &self.intervals
    }

    pub fn measure(&self) -> BigRational {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        self.intervals.iter().any(|(a, b)| a <= x && x <= b)
    }

    /// Intersection with `{alpha : ||alpha q|| <= r}`, generating only the
    /// arcs `[(m - r) / q, (m + r) / q]` that meet an existing interval.
    fn intersect_arcs(&self, q: &BigInt, r: &BigRational) -> Self {
        let qr = BigRational::from_integer(q.clone());
        let mut pieces = Vec::new();
        for (lo, hi) in &self.intervals {
            let first = (lo * &qr - r).ceil().to_integer();
            let last = (hi * &qr + r).floor().to_integer();
            let mut m = first;
            while m <= last {
                let mr = BigRational::from_integer(m.clone());
                let a = (&mr - r) / &qr;
                let b = (&mr + r) / &qr;
                let a = if &a > lo { a } else { lo.clone() };
                let b = if &b < hi { b } else { hi.clone() };
                if a <= b {
                    pieces.push((a, b));
                }
                m += 1;
            }
        }
        Self::from_intervals(pieces)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMeasure {
    pub a: Vec<u64>,
    #[serde(rename = "N")]
    pub n: u64,
    /// Exact measure as "p/q".
    pub measure: String,
    /// `4^k / N^k` as "p/q".
    pub bound: String,
    pub within_bound: bool,
    pub intervals: usize,
}

/// Largest admissible `a_1`.
pub const LAMBDA_MAX_A1: u64 = 1000;

/// `Lambda(a, N) = {alpha in [0, 1] : ||alpha a_j|| <= 1/N for all j}` as an
/// exact interval union.
pub fn lambda_set(a: &[u64], n: u64) -> Result<IntervalUnion> {
    lambda_set_in_order(a, n, &(0..a.len()).collect::<Vec<_>>())
}

/// Same set, intersecting the constraints in the given order.
pub fn lambda_set_in_order(a: &[u64], n: u64, order: &[usize]) -> Result<IntervalUnion> {
    validate_lambda(a, n)?;
    let r = BigRational::new(BigInt::one(), BigInt::from(n));
    let mut u = IntervalUnion::unit();
    for &j in order {
        u = u.intersect_arcs(&BigInt::from(a[j]), &r);
    }
    Ok(u)
}

fn validate_lambda(a: &[u64], n: u64) -> Result<()> {
    if !(1..=3).contains(&a.len()) {
        return Err(Error::InvalidSpec(format!("Lambda takes 1 to 3 integers, got {}", a.len())));
    }
    if n < 1 || a[0] == 0 {
        return Err(Error::InvalidSpec("need N >= 1 and positive integers".into()));
    }
    if let Some(w) = a.windows(2).find(|w| (w[1] as u128) < n as u128 * w[0] as u128) {
        return Err(Error::InvalidSpec(format!("{} < N * {} violates the growth condition", w[1], w[0])));
    }
    if a[0] > LAMBDA_MAX_A1 {
        return Err(Error::BudgetExceeded { cost: a[0] as f64, budget: LAMBDA_MAX_A1 as f64 });
    }
    Ok(())
}

pub fn lambda_measure(a: &[u64], n: u64) -> Result<LambdaMeasure> {
    let set = lambda_set(a, n)?;
    let measure = set.measure();
    let k = a.len() as u32;
    let bound = BigRational::new(BigInt::from(4u8).pow(k), BigInt::from(n).pow(k));
    Ok(LambdaMeasure {
        a: a.to_vec(),
        n,
        within_bound: measure <= bound,
        measure: ratio_string(&measure),
        bound: ratio_string(&bound),
        intervals: set.intervals().len(),
    })
}

/// "p/q" in lowest terms (integers print without a denominator).
pub fn ratio_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        let g = r.numer().gcd(r.denom());
        format!("{}/{}", r.numer() / &g, r.denom() / &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> OrderedPoints {
        OrderedPoints::new((0..n).map(|i| UnitFrac::from_ratio(i as u64, n as u64)).collect(), 127, "grid")
    }

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn g_count_examples() {
        let zero = OrderedPoints::new(vec![UnitFrac::ZERO; 7], 127, "zero");
        assert_eq!(g_count(&zero, UnitFrac::ZERO), 7);
        for n in [4usize, 8, 64] {
            let beta = UnitFrac(UnitFrac::from_ratio(1, 2).0 + UnitFrac::from_ratio(1, 2 * n as u64).0);
            assert_eq!(g_count(&grid(n), beta), 2);
        }
        // strict: with N = 4 a point at distance exactly 1/4 is excluded
        let quarter = 1u128 << 126;
        let four = OrderedPoints::new(vec![UnitFrac(0), UnitFrac(2 * quarter), UnitFrac(3 * quarter), UnitFrac(3 * quarter)], 127, "x");
        assert_eq!(g_count(&four, UnitFrac(quarter)), 0);
        assert_eq!(g_count(&four, UnitFrac(quarter + 1)), 1);
        assert_eq!(g_count(&four, UnitFrac(quarter - 1)), 1);
    }

    #[test]
    fn g_max_examples() {
        // grids with exactly representable points
        for n in [4usize, 16, 64] {
            let c = g_max(&grid(n));
            assert_eq!(c.g_max, 2);
            assert_eq!(g_count(&grid(n), c.argmax_beta), 2);
        }
        let same = OrderedPoints::new(vec![UnitFrac::from_f64(0.3); 5], 127, "same");
        assert_eq!(g_max(&same).g_max, 5);
        // both points lie within 1/2 of beta = 1/4
        let two = OrderedPoints::from_f64(&[0.0, 0.5]);
        assert_eq!(g_max(&two).g_max, 2);
        assert_eq!(g_count(&two, UnitFrac::from_f64(0.25)), 2);
        assert_eq!(g_max(&OrderedPoints::from_f64(&[0.7])).g_max, 1);
    }

    #[test]
    fn two_pointer_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::seeds::sample_rng(5, 0);
        for n in [2usize, 3, 5, 17, 64, 200] {
            for _ in 0..20 {
                let clustered: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 0.2).powi(2)).collect();
                let pts = OrderedPoints::from_f64(&clustered);
                let c = g_max(&pts);
                assert_eq!(c.g_max, g_max_brute(&pts), "N={n}");
                assert_eq!(g_count(&pts, c.argmax_beta), c.g_max);
            }
        }
    }

    #[test]
    fn margin_flags_boundary_gaps() {
        let span = half_width(4) * 2;
        let q = 1u128 << 126;
        let pts = OrderedPoints::new(vec![UnitFrac(0), UnitFrac(span + 5), UnitFrac(3 * q), UnitFrac(3 * q + 7)], 127, "x");
        assert!(!g_max(&pts).margin_ok);
        assert!(g_max(&OrderedPoints::from_f64(&[0.0, 0.1, 0.55, 0.8])).margin_ok);
        // a floored grid of 3 points has gaps just below 2/N
        assert!(!g_max(&grid(3)).margin_ok);
    }

    #[test]
    fn exceptional_extremes() {
        let g: Vec<usize> = vec![1, 2, 3, 1, 2];
        assert_eq!(summarize_exceptional(1.0, 5, g.clone()).fraction, 0.0);
        // N^delta > 1 for every delta > 0, so only G >= 2 counts
        assert_eq!(summarize_exceptional(1e-9, 5, vec![2, 3, 2]).fraction, 1.0);
        assert_eq!(summarize_exceptional(1e-9, 5, g.clone()).fraction, 0.6);
        let mid = summarize_exceptional(0.5, 5, g);
        assert_eq!(mid.exceeded, 1);
        assert!(exceptional_fraction(0.0, 100, 1, &[BigUint::from(2u8)], 48, 1 << 20).is_err());
        assert!(exceptional_fraction(0.5, 10, 1, &[BigUint::from(2u8)], 48, 1 << 20).is_err());
    }

    #[test]
    fn lambda_single_constraint() {
        assert_eq!(lambda_set(&[1], 4).unwrap().measure(), rat(1, 2));
        for a1 in [1u64, 2, 3, 7, 50] {
            for n in [2u64, 3, 8, 33] {
                assert_eq!(lambda_set(&[a1], n).unwrap().measure(), rat(2, n as i64), "a={a1} N={n}");
            }
        }
        assert_eq!(lambda_measure(&[5], 10).unwrap().measure, "1/5");
    }

    #[test]
    fn lambda_two_constraints_match_sampling() {
        let n = 8u64;
        let a = [3u64, 24];
        let set = lambda_set(&a, n).unwrap();
        let m = set.measure();
        assert!(m <= rat(1, 4));
        let samples = 1_000_000u64;
        let hits = (0..samples)
            .filter(|&i| {
                let alpha = (i as f64 + 0.5) / samples as f64;
                a.iter().all(|&aj| {
                    let t = alpha * aj as f64;
                    (t - t.round()).abs() <= 1.0 / n as f64
                })
            })
            .count();
        let approx = hits as f64 / samples as f64;
        let exact = m.numer().to_string().parse::<f64>().unwrap() / m.denom().to_string().parse::<f64>().unwrap();
        assert!((approx - exact).abs() < 1e-4, "{approx} vs {exact}");
    }

    #[test]
    fn lambda_order_independent() {
        let a = [2u64, 20, 200];
        let base = lambda_set(&a, 10).unwrap();
        for order in [[2usize, 1, 0], [1, 0, 2], [0, 2, 1]] {
            assert_eq!(lambda_set_in_order(&a, 10, &order).unwrap(), base);
        }
        let r = lambda_measure(&a, 10).unwrap();
        assert!(r.within_bound);
        assert_eq!(r.bound, "8/125");
    }

    #[test]
    fn lambda_errors() {
        assert!(matches!(lambda_set(&[3, 20], 8), Err(Error::InvalidSpec(_))));
        assert!(matches!(lambda_set(&[1001], 8), Err(Error::BudgetExceeded { .. })));
        assert!(lambda_set(&[], 8).is_err());
        assert!(lambda_set(&[1, 2, 4, 8], 2).is_err());
    }

    #[test]
    fn interval_union_merges() {
        let u = IntervalUnion::from_intervals(vec![(rat(1, 2), rat(3, 4)), (rat(0, 1), rat(1, 4)), (rat(1, 4), rat(1, 3))]);
        assert_eq!(u.intervals().len(), 2);
        assert_eq!(u.measure(), rat(7, 12));
        assert!(u.contains(&rat(1, 4)) && !u.contains(&rat(2, 5)));
        assert_eq!(ratio_string(&rat(6, 8)), "3/4");
        assert_eq!(ratio_string(&rat(4, 2)), "2");
    }
}
