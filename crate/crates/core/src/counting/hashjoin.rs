//! Counts of the form `sum_v L(v)^2` where `L(v)` is the number of
//! left-hand configurations with value `v`. Negating the coefficient vector
//! maps value `v` to `-v`, so only coefficient vectors whose first nonzero
//! entry is positive are generated and keyed by `|v|`:
//! `sum_{v != 0} L(v)^2 = 2 sum_{w > 0} H(w)^2`.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use rayon::prelude::*;

use super::exact::{bits_of, fits_i128, max_bits, Exact};
use super::{check_values, falling, to_exact, CountBudget, CountResult, System};
use crate::{Error, Result};

struct JoinStats {
    /// `sum_{w > 0} H(w)^2`.
    sum_sq: u128,
    /// `H(0)`.
    zeros: u128,
}

/// Runs the join over generated values in hash-partitioned passes, each pass
/// sorting its keys and summing squared run lengths.
fn fold_join<T, G>(firsts: usize, entries: f64, budget: &CountBudget, gen: G) -> JoinStats
where
    T: Exact,
    G: Fn(usize, &mut dyn FnMut(&T)) + Sync,
{
    let passes = ((entries / budget.max_pass_entries as f64).ceil() as u64).max(1);
    let mut stats = JoinStats { sum_sq: 0, zeros: 0 };
    for pass in 0..passes {
        let chunks: Vec<(Vec<T>, u128)> = (0..firsts)
            .into_par_iter()
            .map(|i| {
                let mut keys = Vec::new();
                let mut zeros = 0u128;
                gen(i, &mut |v: &T| {
                    if v.is_zero() {
                        zeros += 1;
                    } else {
                        let w = v.abs();
                        if w.mix() % passes == pass {
                            keys.push(w);
                        }
                    }
                });
                (keys, zeros)
            })
            .collect();
        if pass == 0 {
            stats.zeros = chunks.iter().map(|c| c.1).sum();
        }
        let mut keys: Vec<T> = chunks.into_iter().flat_map(|c| c.0).collect();
        keys.par_sort_unstable();
        let mut i = 0;
        while i < keys.len() {
            let mut j = i + 1;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            let run = (j - i) as u128;
            stats.sum_sq += run * run;
            i = j;
        }
    }
    stats
}

/// Coefficient vectors in `[-n, n]^dims` whose first nonzero entry is
/// positive, visited together with `sum m_j d_j` (added to `base`).
fn half_coefficients<T: Exact>(d: &[T], n: i64, base: &T, seen: bool, visit: &mut dyn FnMut(&T)) {
    let Some((first, rest)) = d.split_first() else {
        if seen {
            visit(base);
        }
        return;
    };
    if !seen {
        half_coefficients(rest, n, base, false, visit);
    }
    let lo = if seen { -n } else { 1 };
    let mut acc = base.clone() + first.clone() * T::from_i64(lo).unwrap();
    for _ in lo..=n {
        half_coefficients(rest, n, &acc, true, visit);
        acc = acc + first.clone();
    }
}

/// Ordered tuples of distinct indices extending `tuple` to length `k`.
fn distinct_tuples(n: usize, k: usize, tuple: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if tuple.len() == k {
        visit(tuple);
        return;
    }
    for x in 0..n {
        if tuple.contains(&x) {
            continue;
        }
        tuple.push(x);
        distinct_tuples(n, k, tuple, visit);
        tuple.pop();
    }
}

/// Consecutive differences `a(x_i) - a(x_{i+1})` of a tuple.
fn diffs<T: Exact>(a: &[T], tuple: &[usize]) -> Vec<T> {
    tuple.windows(2).map(|w| a[w[0]].clone() - a[w[1]].clone()).collect()
}

fn half_count(n: u64, dims: usize) -> f64 {
    ((2.0 * n as f64 + 1.0).powi(dims as i32) - 1.0) / 2.0
}

/// `H` statistics for `v = sum m_j (a(x_j) - a(x_{j+1}))` over ordered
/// distinct `k`-tuples `x` and half-space coefficient vectors `m`.
fn tuple_join<T: Exact>(a: &[T], k: usize, n: i64, budget: &CountBudget) -> JoinStats {
    let big_n = a.len();
    let entries = falling(big_n as u64, k) as f64 * half_count(n as u64, k - 1);
    fold_join::<T, _>(big_n, entries, budget, |first, emit| {
        let mut tuple = vec![first];
        distinct_tuples(big_n, k, &mut tuple, &mut |t| {
            let d = diffs(a, t);
            half_coefficients(&d, n, &T::zero(), false, emit);
        });
    })
}

fn join_bits(values: &[BigUint], k: usize, n: u64) -> u64 {
    max_bits(values) + 1 + bits_of(n * k as u64) + 1
}

/// Solutions of
/// `sum m_j (a(n_j) - a(n_{j+1})) = sum m'_j (a(n'_j) - a(n'_{j+1}))`
/// with `n` and `n'` each distinct, `(m, m') != 0`, all entries bounded by
/// `N`: `sum_v L(v)^2` minus the `(m, m') = (0, 0)` stratum.
pub fn count_pair_equation(k: usize, n: u64, values: &[BigUint], budget: &CountBudget) -> Result<CountResult> {
    let started = Instant::now();
    if !(2..=3).contains(&k) {
        return Err(Error::InvalidSpec(format!("pair equation needs k in 2..=3, got {k}")));
    }
    let vals = check_values(values, n)?;
    budget.check(pair_equation_cost(k, n))?;
    let stats = if fits_i128(join_bits(vals, k, n)) {
        tuple_join(&to_exact::<i128>(vals), k, n as i64, budget)
    } else {
        tuple_join(&to_exact::<BigInt>(vals), k, n as i64, budget)
    };
    let d = falling(n, k);
    let l0 = d + 2 * stats.zeros;
    let total = l0 * l0 + 2 * stats.sum_sq - d * d;
    // m' = m, n' = n for every nonzero m
    let diagonal = d * ((2 * n as u128 + 1).pow(k as u32 - 1) - 1);
    assert!(total >= diagonal, "pair equation count {total} below diagonal {diagonal}");
    let params = serde_json::json!({ "k": k, "diagonal": diagonal.to_string() });
    Ok(CountResult::new(System::PairEquation, n, params, total, started))
}

pub fn pair_equation_cost(k: usize, n: u64) -> f64 {
    falling(n, k) as f64 * half_count(n, k - 1)
}

pub fn contrast_cost(n: u64) -> f64 {
    falling(n, 3) as f64 * half_count(n, 2)
}

/// Solutions of
/// `n_1 (a(x_1) - a(x_2)) + n_2 (a(x_2) - a(x_3)) = n'_1 (...) + n'_2 (...)`
/// with `n != 0`, `n' != 0`, distinct triples and entries bounded by `N`.
pub fn count_contrast_triple(n: u64, values: &[BigUint], budget: &CountBudget) -> Result<CountResult> {
    let started = Instant::now();
    let vals = check_values(values, n)?;
    budget.check(contrast_cost(n))?;
    let stats = if fits_i128(join_bits(vals, 3, n)) {
        tuple_join(&to_exact::<i128>(vals), 3, n as i64, budget)
    } else {
        tuple_join(&to_exact::<BigInt>(vals), 3, n as i64, budget)
    };
    let l0 = 2 * stats.zeros;
    let total = l0 * l0 + 2 * stats.sum_sq;
    let diagonal = falling(n, 3) * ((2 * n as u128 + 1).pow(2) - 1);
    assert!(total >= diagonal, "contrast count {total} below diagonal {diagonal}");
    let params = serde_json::json!({ "diagonal": diagonal.to_string() });
    Ok(CountResult::new(System::ContrastTriple, n, params, total, started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{generate, SequenceSpec};

    /// Nested-loop count over every pair of left-hand configurations.
    fn nested(a: &[i128], k: usize, n: i64, nonzero: bool) -> u128 {
        let mut lhs = Vec::new();
        let mut tuple = Vec::new();
        distinct_tuples(a.len(), k, &mut tuple, &mut |t| lhs.push(t.to_vec()));
        let cube: Vec<Vec<i64>> = {
            let mut all = vec![vec![]];
            for _ in 0..k - 1 {
                all = all
                    .into_iter()
                    .flat_map(|v: Vec<i64>| {
                        (-n..=n).map(move |x| {
                            let mut w = v.clone();
                            w.push(x);
                            w
                        })
                    })
                    .collect();
            }
            all
        };
        let value = |m: &[i64], t: &[usize]| -> i128 {
            m.iter().zip(t.windows(2)).map(|(&mi, w)| mi as i128 * (a[w[0]] - a[w[1]])).sum()
        };
        let mut count = 0u128;
        for t in &lhs {
            for m in &cube {
                let m_zero = m.iter().all(|&x| x == 0);
                if nonzero && m_zero {
                    continue;
                }
                let v = value(m, t);
                for t2 in &lhs {
                    for m2 in &cube {
                        let m2_zero = m2.iter().all(|&x| x == 0);
                        if (nonzero && m2_zero) || (!nonzero && m_zero && m2_zero) {
                            continue;
                        }
                        if value(m2, t2) == v {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    fn ints(v: &[BigUint]) -> Vec<i128> {
        to_exact::<i128>(v)
    }

    #[test]
    fn pair_equation_small_cases() {
        let v = generate(&SequenceSpec::geometric(2), 12).unwrap();
        let b = CountBudget::default();
        assert_eq!(count_pair_equation(2, 1, &v, &b).unwrap().total, 0);
        // m1 e = m1' e' with e, e' = +-2 and |m| <= 2, not both zero
        let two = count_pair_equation(2, 2, &v, &b).unwrap().total;
        let mut want = 0u128;
        for m in -2i64..=2 {
            for e in [-1i64, 1] {
                for m2 in -2i64..=2 {
                    for e2 in [-1i64, 1] {
                        if (m, m2) != (0, 0) && m * e == m2 * e2 {
                            want += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(two, want);
        assert_eq!(two, 16);
    }

    #[test]
    fn join_matches_nested_loops() {
        let b = CountBudget::default();
        for spec in [SequenceSpec::geometric(2), SequenceSpec::polynomial(2), SequenceSpec::fibonacci_like(1, 2)] {
            let v = generate(&spec, 12).unwrap();
            for n in [2u64, 3, 5, 8, 12] {
                let a = ints(&v[..n as usize]);
                assert_eq!(count_pair_equation(2, n, &v, &b).unwrap().total, nested(&a, 2, n as i64, false), "{spec:?} N={n}");
            }
            for n in [3u64, 4] {
                let a = ints(&v[..n as usize]);
                assert_eq!(count_pair_equation(3, n, &v, &b).unwrap().total, nested(&a, 3, n as i64, false));
                assert_eq!(count_contrast_triple(n, &v, &b).unwrap().total, nested(&a, 3, n as i64, true));
            }
        }
    }

    #[test]
    fn partitioned_passes_agree() {
        let v = generate(&SequenceSpec::polynomial(2), 16).unwrap();
        let one = count_contrast_triple(10, &v, &CountBudget::default()).unwrap().total;
        let many = count_contrast_triple(10, &v, &CountBudget { max_pass_entries: 5000, ..Default::default() })
            .unwrap()
            .total;
        assert_eq!(one, many);
    }

    #[test]
    fn big_keys_agree_with_i128() {
        let v = generate(&SequenceSpec::geometric(2), 10).unwrap();
        let a_small = to_exact::<i128>(&v);
        let a_big = to_exact::<BigInt>(&v);
        let b = CountBudget::default();
        for k in [2usize, 3] {
            let s = tuple_join(&a_small, k, 6, &b);
            let t = tuple_join(&a_big, k, 6, &b);
            assert_eq!((s.sum_sq, s.zeros), (t.sum_sq, t.zeros));
        }
    }

    #[test]
    fn contrast_edge_cases() {
        let v = generate(&SequenceSpec::polynomial(2), 3).unwrap();
        let b = CountBudget::default();
        assert_eq!(count_contrast_triple(2, &v, &b).unwrap().total, 0);
        let r3 = count_contrast_triple(3, &v, &b).unwrap();
        assert_eq!(r3.total, nested(&ints(&v), 3, 3, true));
        assert!(count_contrast_triple(30, &generate(&SequenceSpec::polynomial(2), 30).unwrap(), &CountBudget {
            max_cost: 1e6,
            ..Default::default()
        })
        .is_err());
    }
}
