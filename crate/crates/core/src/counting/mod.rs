//! Exact solution counts for the Diophantine systems that bound the variance
//! of the correlation sums, and power-law growth fits of those counts.
//!
//! All counts are of ordered solutions, with no quotient by symmetry.

mod exact;
mod fit;
mod hashjoin;

pub use fit::{fit_growth, fit_line, GrowthFit, LineFit};
pub use hashjoin::{count_contrast_triple, count_pair_equation};

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use exact::{bits_of, fits_i128, max_bits, solve_reduced, Exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Sandwich,
    HyperplanePair,
    Homogeneous,
    PairEquation,
    ContrastTriple,
}

impl std::str::FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sandwich" => Self::Sandwich,
            "hyperplane_pair" | "hyperplane-pair" => Self::HyperplanePair,
            "homogeneous" => Self::Homogeneous,
            "pair_equation" | "pair-equation" => Self::PairEquation,
            "contrast_triple" | "contrast-triple" | "contrast" => Self::ContrastTriple,
            other => return Err(Error::Parse(format!("unknown system {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomogeneousVariant {
    /// z_1, ..., z_r pairwise distinct.
    #[default]
    Distinct,
    /// Repeated z allowed, with the degenerate / nondegenerate split.
    Repeated,
}

/// Hard limits checked before any enumeration starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountBudget {
    /// Upper bound on the estimated number of elementary steps.
    pub max_cost: f64,
    /// Keys held in memory at once by the join; more keys means more passes.
    pub max_pass_entries: usize,
}

impl Default for CountBudget {
    fn default() -> Self {
        Self { max_cost: 2e9, max_pass_entries: 1 << 22 }
    }
}

impl CountBudget {
    fn check(&self, cost: f64) -> Result<()> {
        if cost > self.max_cost {
            return Err(Error::BudgetExceeded { cost, budget: self.max_cost });
        }
        Ok(())
    }
}

mod dec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<u128>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.serialize_some(&v.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u128>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| s.parse().map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

/// Counts are serialized as decimal strings so they stay exact in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub system: System,
    #[serde(rename = "N")]
    pub n: u64,
    pub params: serde_json::Value,
    #[serde(with = "dec")]
    pub total: u128,
    #[serde(with = "dec::opt", default)]
    pub degenerate: Option<u128>,
    #[serde(with = "dec::opt", default)]
    pub nondegenerate: Option<u128>,
    pub elapsed_ms: f64,
}

impl CountResult {
    fn new(system: System, n: u64, params: serde_json::Value, total: u128, started: Instant) -> Self {
        Self {
            system,
            n,
            params,
            total,
            degenerate: None,
            nondegenerate: None,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn check_values(values: &[BigUint], n: u64) -> Result<&[BigUint]> {
    if n == 0 {
        return Err(Error::InvalidSpec("bound N must be at least 1".into()));
    }
    let n = n as usize;
    if values.len() < n {
        return Err(Error::InvalidSpec(format!("need a(1..{n}), got {} values", values.len())));
    }
    let v = &values[..n];
    if v.windows(2).any(|w| w[0] >= w[1]) || v[0].is_zero() {
        return Err(Error::InvalidSpec("sequence values must be positive and strictly increasing".into()));
    }
    Ok(v)
}

fn to_exact<T: Exact>(values: &[BigUint]) -> Vec<T> {
    values.iter().map(T::from_big).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichQuery {
    /// Strictly decreasing positive coefficients, at most four.
    pub a: Vec<BigUint>,
    pub b: BigInt,
    pub c: BigRational,
    pub n: u64,
}

/// Brute-force count of `y in [-N, N]^s` with `|y . A + b| <= C A_1`.
pub fn count_sandwich(q: &SandwichQuery, budget: &CountBudget) -> Result<CountResult> {
    let started = Instant::now();
    let s = q.a.len();
    if !(1..=4).contains(&s) {
        return Err(Error::InvalidSpec(format!("sandwich takes 1 to 4 coefficients, got {s}")));
    }
    if q.a.windows(2).any(|w| w[0] <= w[1]) || q.a[s - 1].is_zero() {
        return Err(Error::InvalidSpec("coefficients must be positive and strictly decreasing".into()));
    }
    if !q.c.is_positive() {
        return Err(Error::InvalidSpec("C must be positive".into()));
    }
    if q.n == 0 {
        return Err(Error::InvalidSpec("bound N must be at least 1".into()));
    }
    budget.check((2.0 * q.n as f64 + 1.0).powi(s as i32))?;
    let a: Vec<BigInt> = to_exact(&q.a);
    // q |S + b| <= p A_1 with C = p / q
    let lhs_scale = q.c.denom().clone();
    let rhs = q.c.numer() * &a[0];
    let n = q.n as i64;
    let total: u128 = (-n..=n)
        .into_par_iter()
        .map(|y1| {
            let mut count = 0u128;
            let start = &a[0] * y1 + &q.b;
            sandwich_rec(&a, 1, start, n, &lhs_scale, &rhs, &mut count);
            count
        })
        .sum();
    let params = serde_json::json!({
        "A": q.a.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "b": q.b.to_string(),
        "C": q.c.to_string(),
    });
    Ok(CountResult::new(System::Sandwich, q.n, params, total, started))
}

fn sandwich_rec(a: &[BigInt], depth: usize, acc: BigInt, n: i64, lhs_scale: &BigInt, rhs: &BigInt, count: &mut u128) {
    if depth == a.len() {
        if (lhs_scale * acc.abs()) <= *rhs {
            *count += 1;
        }
        return;
    }
    let mut v = acc - &a[depth] * n;
    for _ in -n..=n {
        sandwich_rec(a, depth + 1, v.clone(), n, lhs_scale, rhs, count);
        v += &a[depth];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneQuery {
    /// Strictly decreasing indices `z_1 > ... > z_s`, `s >= 2`.
    pub z: Vec<usize>,
    pub b: BigInt,
    pub d: BigInt,
    pub c: BigRational,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneCheck {
    /// Solutions of the two-condition system, by brute force.
    pub direct: u128,
    /// Count of the reduced inequality in `s - 1` unknowns.
    pub reduced: u128,
    pub reduced_a: Vec<String>,
    pub reduced_b: String,
    pub reduced_c: String,
}

impl HyperplaneCheck {
    pub fn holds(&self) -> bool {
        self.direct <= self.reduced
    }
}

/// Eliminating `y_s` from
/// `|sum y_j a(z_j) + b| <= C a(z_1)`, `sum y_j + d = 0`
/// gives the sandwich inequality with `A_j = a(z_j) - a(z_s)`,
/// `b' = b - d a(z_s)` and `C' A_1 = C a(z_1)`. Dropping `|y_s| <= N` can
/// only add solutions, so `direct <= reduced`.
pub fn hyperplane_pair(values: &[BigUint], q: &HyperplaneQuery, budget: &CountBudget) -> Result<HyperplaneCheck> {
    let s = q.z.len();
    if !(2..=5).contains(&s) {
        return Err(Error::InvalidSpec(format!("hyperplane pair takes 2 to 5 indices, got {s}")));
    }
    if q.z.windows(2).any(|w| w[0] <= w[1]) || q.z[s - 1] == 0 {
        return Err(Error::InvalidSpec("indices must be positive and strictly decreasing".into()));
    }
    let top = q.z[0];
    let vals = check_values(values, top as u64)?;
    if q.n == 0 || !q.c.is_positive() {
        return Err(Error::InvalidSpec("need N >= 1 and C > 0".into()));
    }
    budget.check((2.0 * q.n as f64 + 1.0).powi(s as i32))?;
    let a: Vec<BigInt> = q.z.iter().map(|&z| BigInt::from(vals[z - 1].clone())).collect();

    let n = q.n as i64;
    let scale = q.c.denom().clone();
    let rhs = q.c.numer() * &a[0];
    let mut direct = 0u128;
    let mut y = vec![0i64; s];
    let mut visit = |y: &[i64]| {
        let sum: i64 = y.iter().sum::<i64>();
        if BigInt::from(sum) + &q.d != BigInt::zero() {
            return;
        }
        let lin: BigInt = y.iter().zip(&a).map(|(&yi, ai)| ai * yi).sum::<BigInt>() + &q.b;
        if &scale * lin.abs() <= rhs {
            direct += 1;
        }
    };
    cube(&mut y, 0, n, &mut visit);

    let last = &a[s - 1];
    let reduced_a: Vec<BigInt> = a[..s - 1].iter().map(|v| v - last).collect();
    let reduced_b = &q.b - &q.d * last;
    let reduced_c = &q.c * BigRational::new(a[0].clone(), reduced_a[0].clone());
    let sq = SandwichQuery {
        a: reduced_a.iter().map(|v| v.magnitude().clone()).collect(),
        b: reduced_b.clone(),
        c: reduced_c.clone(),
        n: q.n,
    };
    let reduced = if s - 1 <= 4 { count_sandwich(&sq, budget)?.total } else { u128::MAX };
    Ok(HyperplaneCheck {
        direct,
        reduced,
        reduced_a: reduced_a.iter().map(|v| v.to_string()).collect(),
        reduced_b: reduced_b.to_string(),
        reduced_c: reduced_c.to_string(),
    })
}

fn cube(y: &mut [i64], depth: usize, n: i64, visit: &mut dyn FnMut(&[i64])) {
    if depth == y.len() {
        visit(y);
        return;
    }
    for v in -n..=n {
        y[depth] = v;
        cube(y, depth + 1, n, visit);
    }
}

/// `table[u + parts n]` = number of `y in [-n, n]^parts` with `sum y = u`.
fn composition_table(parts: usize, n: i64) -> Vec<u128> {
    let mut t = vec![1u128];
    for _ in 0..parts {
        let mut next = vec![0u128; t.len() + 2 * n as usize];
        for (i, &c) in t.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for slot in &mut next[i..=i + 2 * n as usize] {
                *slot += c;
            }
        }
        t = next;
    }
    t
}

/// Ordered compositions of `r` into `m` positive parts.
fn compositions(r: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for p in 1..=left.saturating_sub(parts - 1) {
            cur.push(p);
            rec(left - p, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(r, m, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Estimated elementary steps of [`count_homogeneous`].
pub fn homogeneous_cost(r: usize, n: u64, variant: HomogeneousVariant) -> f64 {
    let ms: Vec<usize> = match variant {
        HomogeneousVariant::Distinct => vec![r],
        HomogeneousVariant::Repeated => (1..=r).collect(),
    };
    ms.into_iter()
        .map(|m| {
            let comps = binomial(r as u64 - 1, m as u64 - 1);
            let free = (2.0 * (r as f64) * n as f64 + 1.0).powi(m.saturating_sub(3) as i32);
            comps * binomial(n, m as u64) * free
        })
        .sum()
}

/// Solutions `(y, z)` of `sum y_j a(z_j) = 0`, `sum y_j = 0`, `y != 0`,
/// `|y_j| <= N`, `1 <= z_j <= N`.
///
/// Each multiset of z-values is visited once: the distinct values
/// `w_1 < ... < w_m` carry group sums `u_s`, which solve the same system,
/// and each `u` stands for `prod W(n_s, u_s)` choices of `y`. The all-zero
/// `u` is the degenerate stratum.
pub fn count_homogeneous(
    r: usize,
    n: u64,
    values: &[BigUint],
    variant: HomogeneousVariant,
    budget: &CountBudget,
) -> Result<CountResult> {
    let started = Instant::now();
    if !(2..=4).contains(&r) {
        return Err(Error::InvalidSpec(format!("homogeneous system needs r in 2..=4, got {r}")));
    }
    let vals = check_values(values, n)?;
    budget.check(homogeneous_cost(r, n, variant))?;
    let a_bits = max_bits(vals) + 1;
    let bits = 2 * a_bits + bits_of((r * r) as u64 * n) + 2;
    let (total, degenerate) = if fits_i128(bits) {
        homogeneous_kernel(r, n as i64, &to_exact::<i128>(vals), variant)
    } else {
        homogeneous_kernel(r, n as i64, &to_exact::<BigInt>(vals), variant)
    };
    let params = serde_json::json!({ "r": r, "variant": variant });
    let mut res = CountResult::new(System::Homogeneous, n, params, total, started);
    if variant == HomogeneousVariant::Repeated {
        res.degenerate = Some(degenerate);
        res.nondegenerate = Some(total - degenerate);
    }
    Ok(res)
}

fn homogeneous_kernel<T: Exact>(r: usize, n: i64, a: &[T], variant: HomogeneousVariant) -> (u128, u128) {
    let tables: Vec<Vec<u128>> = (0..=r).map(|p| composition_table(p, n)).collect();
    let ms: Vec<usize> = match variant {
        HomogeneousVariant::Distinct => vec![r],
        HomogeneousVariant::Repeated => (1..=r).collect(),
    };
    let mut plans = Vec::new();
    for m in ms {
        for comp in compositions(r, m) {
            let mult = factorial(r) / comp.iter().map(|&p| factorial(p)).product::<u128>();
            plans.push((m, comp, mult));
        }
    }
    let big_n = a.len();
    let per_first: Vec<(u128, u128)> = (0..big_n)
        .into_par_iter()
        .map(|w1| {
            let mut total = 0u128;
            let mut degenerate = 0u128;
            for (m, comp, mult) in &plans {
                let bounds: Vec<i64> = comp.iter().map(|&p| p as i64 * n).collect();
                let mut w = vec![w1];
                increasing(big_n, *m, &mut w, &mut |w| {
                    let aw: Vec<T> = w.iter().map(|&i| a[i].clone()).collect();
                    solve_reduced(&aw, &bounds, &mut |u| {
                        let weight: u128 = u
                            .iter()
                            .zip(comp)
                            .map(|(&us, &p)| tables[p][(us + p as i64 * n) as usize])
                            .product();
                        if u.iter().all(|&x| x == 0) {
                            // drop y = 0
                            total += (weight - 1) * mult;
                            degenerate += (weight - 1) * mult;
                        } else {
                            total += weight * mult;
                        }
                    });
                });
            }
            (total, degenerate)
        })
        .collect();
    per_first.into_iter().fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
}

/// Extends `w` to increasing tuples of length `m` over `0..n`.
fn increasing(n: usize, m: usize, w: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if w.len() == m {
        visit(w);
        return;
    }
    let from = w.last().map_or(0, |&x| x + 1);
    for x in from..n {
        w.push(x);
        increasing(n, m, w, visit);
        w.pop();
    }
}

/// A serializable counting request, as used by the CLI and the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum CountQuery {
    Sandwich { a: Vec<u64>, b: i64, c: String, n: u64 },
    HyperplanePair { z: Vec<usize>, b: i64, d: i64, c: String, n: u64 },
    Homogeneous { r: usize, n: u64, #[serde(default)] variant: HomogeneousVariant },
    PairEquation { k: usize, n: u64 },
    ContrastTriple { n: u64 },
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(BigRational::new(p, q))
    } else if let Ok(i) = s.parse::<BigInt>() {
        Ok(BigRational::from_integer(i))
    } else {
        let f: f64 = s.parse().map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        BigRational::from_f64(f).ok_or_else(|| Error::Parse(format!("bad rational {s:?}")))
    }
}

impl CountQuery {
    pub fn n(&self) -> u64 {
        match self {
            Self::Sandwich { n, .. }
            | Self::HyperplanePair { n, .. }
            | Self::Homogeneous { n, .. }
            | Self::PairEquation { n, .. }
            | Self::ContrastTriple { n } => *n,
        }
    }

    /// Runs the query; `values` must hold `a(1), ..., a(N)` (unused by the
    /// sandwich system).
    pub fn run(&self, values: &[BigUint], budget: &CountBudget) -> Result<CountResult> {
        match self {
            Self::Sandwich { a, b, c, n } => count_sandwich(
                &SandwichQuery {
                    a: a.iter().map(|&v| BigUint::from(v)).collect(),
                    b: BigInt::from(*b),
                    c: parse_rational(c)?,
                    n: *n,
                },
                budget,
            ),
            Self::HyperplanePair { z, b, d, c, n } => {
                let started = Instant::now();
                let q = HyperplaneQuery {
                    z: z.clone(),
                    b: BigInt::from(*b),
                    d: BigInt::from(*d),
                    c: parse_rational(c)?,
                    n: *n,
                };
                let check = hyperplane_pair(values, &q, budget)?;
                let params = serde_json::json!({
                    "z": z, "b": b, "d": d, "C": c,
                    "reduced": check.reduced.to_string(),
                    "reduced_A": check.reduced_a,
                    "reduced_b": check.reduced_b,
                    "reduced_C": check.reduced_c,
                    "holds": check.holds(),
                });
                Ok(CountResult::new(System::HyperplanePair, *n, params, check.direct, started))
            }
            Self::Homogeneous { r, n, variant } => count_homogeneous(*r, *n, values, *variant, budget),
            Self::PairEquation { k, n } => count_pair_equation(*k, *n, values, budget),
            Self::ContrastTriple { n } => count_contrast_triple(*n, values, budget),
        }
    }
}

/// Number of ordered `k`-tuples of distinct indices in `1..=n`.
fn falling(n: u64, k: usize) -> u128 {
    (0..k as u64).map(|i| n.saturating_sub(i) as u128).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{generate, SequenceSpec};
    use num_traits::One;

    fn one_if(b: bool) -> u128 {
        u128::from(b)
    }

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    fn sandwich(a: &[u64], b: i64, c: &str, n: u64) -> u128 {
        let q = SandwichQuery {
            a: big(a),
            b: BigInt::from(b),
            c: parse_rational(c).unwrap(),
            n,
        };
        count_sandwich(&q, &CountBudget::default()).unwrap().total
    }

    #[test]
    fn sandwich_examples() {
        assert_eq!(sandwich(&[1], 0, "1", 5), 3);
        assert_eq!(sandwich(&[8, 2], 1, "1/2", 1), 3);
        let mut want = 0;
        for y1 in -2i64..=2 {
            for y2 in -2i64..=2 {
                want += one_if((4 * y1 + y2).abs() <= 4);
            }
        }
        assert_eq!(sandwich(&[4, 1], 0, "1", 2), want);
        assert_eq!(want, 11);
    }

    #[test]
    fn sandwich_errors() {
        let q = SandwichQuery { a: big(&[1, 2]), b: BigInt::zero(), c: BigRational::one(), n: 2 };
        assert!(matches!(count_sandwich(&q, &CountBudget::default()), Err(Error::InvalidSpec(_))));
        let q = SandwichQuery { a: big(&[9, 5, 3, 2]), b: BigInt::zero(), c: BigRational::one(), n: 100 };
        let tight = CountBudget { max_cost: 1e6, ..Default::default() };
        assert!(matches!(count_sandwich(&q, &tight), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn composition_table_small() {
        // y1 + y2 = u over [-1, 1]^2
        assert_eq!(composition_table(2, 1), vec![1, 2, 3, 2, 1]);
        assert_eq!(composition_table(0, 3), vec![1]);
        let t = composition_table(3, 2);
        assert_eq!(t.iter().sum::<u128>(), 125);
        assert_eq!(t[6], 19);
    }

    #[test]
    fn compositions_list() {
        assert_eq!(compositions(3, 2), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(compositions(4, 1), vec![vec![4]]);
        assert_eq!(compositions(4, 3).len(), 3);
    }

    #[test]
    fn homogeneous_examples() {
        let v = generate(&SequenceSpec::geometric(2), 10).unwrap();
        let b = CountBudget::default();
        for n in 1..=10 {
            assert_eq!(count_homogeneous(2, n, &v, HomogeneousVariant::Distinct, &b).unwrap().total, 0);
        }
        let rep = count_homogeneous(2, 2, &v, HomogeneousVariant::Repeated, &b).unwrap();
        assert_eq!((rep.total, rep.degenerate, rep.nondegenerate), (8, Some(8), Some(0)));
        assert!(count_homogeneous(5, 4, &v, HomogeneousVariant::Distinct, &b).is_err());
        assert!(count_homogeneous(3, 11, &v, HomogeneousVariant::Distinct, &b).is_err());
    }

    /// Nested loops over every `(y, z)`; returns (total, degenerate).
    fn homogeneous_brute(r: usize, n: usize, a: &[i128], distinct: bool) -> (u128, u128) {
        let mut total = 0;
        let mut degenerate = 0;
        let ni = n as i64;
        let mut z = vec![0usize; r];
        let mut y = vec![0i64; r];
        loop {
            let ok_z = !distinct || (0..r).all(|i| (0..i).all(|j| z[i] != z[j]));
            if ok_z {
                y.iter_mut().for_each(|v| *v = -ni);
                loop {
                    let nonzero = y.iter().any(|&v| v != 0);
                    let s: i64 = y.iter().sum();
                    let w: i128 = y.iter().zip(&z).map(|(&v, &zi)| v as i128 * a[zi]).sum();
                    if nonzero && s == 0 && w == 0 {
                        total += 1;
                        let degen = (0..r).all(|i| (0..r).filter(|&j| z[j] == z[i]).map(|j| y[j]).sum::<i64>() == 0);
                        degenerate += one_if(degen);
                    }
                    if !odometer(&mut y, -ni, ni) {
                        break;
                    }
                }
            }
            let mut zi: Vec<i64> = z.iter().map(|&v| v as i64).collect();
            if !odometer(&mut zi, 0, ni - 1) {
                break;
            }
            z = zi.iter().map(|&v| v as usize).collect();
        }
        (total, degenerate)
    }

    fn odometer(v: &mut [i64], lo: i64, hi: i64) -> bool {
        for x in v.iter_mut() {
            if *x < hi {
                *x += 1;
                return true;
            }
            *x = lo;
        }
        false
    }

    #[test]
    fn homogeneous_matches_nested_loops() {
        let b = CountBudget::default();
        for spec in [SequenceSpec::geometric(2), SequenceSpec::polynomial(2), SequenceSpec::geometric(3)] {
            let v = generate(&spec, 8).unwrap();
            let a: Vec<i128> = to_exact(&v);
            for (r, n) in [(2usize, 5u64), (3, 3), (3, 6), (4, 3), (4, 4)] {
                let nn = n as usize;
                let d = count_homogeneous(r, n, &v, HomogeneousVariant::Distinct, &b).unwrap();
                assert_eq!(d.total, homogeneous_brute(r, nn, &a[..nn], true).0, "{spec:?} r={r} N={n}");
                let rep = count_homogeneous(r, n, &v, HomogeneousVariant::Repeated, &b).unwrap();
                let (t, dg) = homogeneous_brute(r, nn, &a[..nn], false);
                assert_eq!((rep.total, rep.degenerate), (t, Some(dg)), "{spec:?} r={r} N={n}");
                assert_eq!(rep.degenerate.unwrap() + rep.nondegenerate.unwrap(), rep.total);
            }
        }
    }

    #[test]
    fn kernels_agree_across_integer_types() {
        let v = generate(&SequenceSpec::geometric(2), 30).unwrap();
        for variant in [HomogeneousVariant::Distinct, HomogeneousVariant::Repeated] {
            let via_big = homogeneous_kernel::<BigInt>(3, 30, &to_exact(&v), variant);
            let via_small = homogeneous_kernel::<i128>(3, 30, &to_exact(&v), variant);
            assert_eq!(via_big, via_small);
        }
        // a(70) = 2^70 forces the BigInt path
        let v = generate(&SequenceSpec::geometric(2), 70).unwrap();
        assert!(count_homogeneous(3, 70, &v, HomogeneousVariant::Distinct, &CountBudget::default()).unwrap().total > 0);
    }

    #[test]
    fn hyperplane_reduction_dominates() {
        let v = generate(&SequenceSpec::geometric(2), 8).unwrap();
        let q = HyperplaneQuery {
            z: vec![5, 3, 1],
            b: BigInt::from(3),
            d: BigInt::from(1),
            c: parse_rational("3/2").unwrap(),
            n: 4,
        };
        let c = hyperplane_pair(&v, &q, &CountBudget::default()).unwrap();
        assert!(c.holds(), "{c:?}");
        assert_eq!(c.reduced_a, vec!["30", "6"]);
        assert_eq!(c.reduced_b, "1");
        assert_eq!(c.reduced_c, "8/5");
    }

    #[test]
    fn query_serde() {
        let q: CountQuery = serde_json::from_str(r#"{"system":"homogeneous","r":3,"n":8}"#).unwrap();
        assert_eq!(q, CountQuery::Homogeneous { r: 3, n: 8, variant: HomogeneousVariant::Distinct });
        let v = generate(&SequenceSpec::geometric(2), 8).unwrap();
        let res = q.run(&v, &CountBudget::default()).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        let back: CountResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.total, res.total);
        assert!(json.contains(&format!("\"total\":\"{}\"", res.total)));
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/2").unwrap(), BigRational::new(3.into(), 2.into()));
        assert_eq!(parse_rational("7").unwrap(), BigRational::from_integer(7.into()));
        assert_eq!(parse_rational("0.5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
