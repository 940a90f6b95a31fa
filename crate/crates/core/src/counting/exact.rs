use std::fmt::Debug;
use std::hash::Hash;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Exact signed integers used by the counting kernels: `i128` when every
/// intermediate provably fits, `BigInt` otherwise.
pub(crate) trait Exact:
    Clone + Ord + Hash + Send + Sync + Debug + Integer + Signed + FromPrimitive + ToPrimitive
{
    fn from_big(v: &BigUint) -> Self;
    /// Cheap deterministic mix of the value, used for partitioning.
    fn mix(&self) -> u64;
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Exact for i128 {
    fn from_big(v: &BigUint) -> Self {
        v.to_i128().expect("caller checked the i128 range")
    }

    fn mix(&self) -> u64 {
        splitmix(*self as u64 ^ splitmix((*self >> 64) as u64))
    }
}

impl Exact for BigInt {
    fn from_big(v: &BigUint) -> Self {
        BigInt::from_biguint(Sign::Plus, v.clone())
    }

    fn mix(&self) -> u64 {
        let lo = self.iter_u64_digits().next().unwrap_or(0);
        splitmix(lo ^ self.bits())
    }
}

/// True when magnitudes up to `2^bits` leave headroom in an `i128`.
pub(crate) fn fits_i128(bits: u64) -> bool {
    bits <= 124
}

pub(crate) fn bits_of(n: u64) -> u64 {
    64 - n.leading_zeros() as u64
}

pub(crate) fn max_bits(values: &[BigUint]) -> u64 {
    values.iter().map(|v| v.bits()).max().unwrap_or(0)
}

/// Integer `t` with `|c + t s| <= m` as an inclusive range; `s != 0`.
pub(crate) fn t_range<T: Exact>(c: &T, s: &T, m: &T) -> (T, T) {
    let lo_num = -m.clone() - c.clone();
    let hi_num = m.clone() - c.clone();
    if s.is_positive() {
        (Integer::div_ceil(&lo_num, s), Integer::div_floor(&hi_num, s))
    } else {
        (Integer::div_ceil(&hi_num, s), Integer::div_floor(&lo_num, s))
    }
}

/// Visits every integer vector `u` with `sum u_s a_s = 0`, `sum u_s = 0`
/// and `|u_s| <= bounds[s]`. The `a_s` must be pairwise distinct.
pub(crate) fn solve_reduced<T: Exact>(a: &[T], bounds: &[i64], visit: &mut dyn FnMut(&[i64])) {
    let m = a.len();
    debug_assert_eq!(m, bounds.len());
    if m <= 2 {
        // one or two distinct values admit only u = 0
        visit(&vec![0; m]);
        return;
    }
    let last = &a[m - 1];
    let e: Vec<T> = a[..m - 1].iter().map(|v| v.clone() - last.clone()).collect();
    let mut u = vec![0i64; m];
    free_vars(&e, bounds, 0, 0, &T::zero(), &mut u, visit);
}

fn free_vars<T: Exact>(
    e: &[T],
    bounds: &[i64],
    depth: usize,
    sum: i64,
    weighted: &T,
    u: &mut [i64],
    visit: &mut dyn FnMut(&[i64]),
) {
    let m = bounds.len();
    if depth + 3 == m {
        line(e, bounds, sum, weighted, u, visit);
        return;
    }
    let b = bounds[depth];
    for v in -b..=b {
        u[depth] = v;
        let w = weighted.clone() + e[depth].clone() * T::from_i64(v).unwrap();
        free_vars(e, bounds, depth + 1, sum + v, &w, u, visit);
    }
}

/// Solves `u_i e_i + u_j e_j = -weighted` for the last two free unknowns.
fn line<T: Exact>(e: &[T], bounds: &[i64], sum: i64, weighted: &T, u: &mut [i64], visit: &mut dyn FnMut(&[i64])) {
    let m = bounds.len();
    let (i, j) = (m - 3, m - 2);
    let (p, q) = (&e[i], &e[j]);
    let eg = p.extended_gcd(q);
    let g = eg.gcd;
    let rhs = -weighted.clone();
    if !rhs.is_multiple_of(&g) {
        return;
    }
    let k = rhs / g.clone();
    // u_i = b1 + t q/g, u_j = b2 - t p/g
    let b1 = eg.x * k.clone();
    let b2 = eg.y * k;
    let s1 = q.clone() / g.clone();
    let s2 = -(p.clone() / g);
    let big = |v: i64| T::from_i64(v).unwrap();
    let (lo1, hi1) = t_range(&b1, &s1, &big(bounds[i]));
    let (lo2, hi2) = t_range(&b2, &s2, &big(bounds[j]));
    let c3 = big(sum) + b1.clone() + b2.clone();
    let s3 = s1.clone() + s2.clone();
    let (lo3, hi3) = t_range(&c3, &s3, &big(bounds[m - 1]));
    let lo = lo1.max(lo2).max(lo3);
    let hi = hi1.min(hi2).min(hi3);
    let mut t = lo;
    while t <= hi {
        let ui = b1.clone() + t.clone() * s1.clone();
        let uj = b2.clone() + t.clone() * s2.clone();
        u[i] = ui.to_i64().unwrap();
        u[j] = uj.to_i64().unwrap();
        u[m - 1] = -(sum + u[i] + u[j]);
        visit(u);
        t = t + T::one();
    }
}
