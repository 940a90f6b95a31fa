//! Fractional parts `theta_x = {alpha * a(x)}` with a worst-case error bound.
//!
//! `alpha` is a binary fixed-point fraction `mantissa / 2^P`. For an integer
//! `a`, the product `mantissa * a mod 2^P` is computed exactly and its top 128
//! bits become the stored point. If `alpha` stands in for a real number in the
//! cell `[mantissa / 2^P, (mantissa + 1) / 2^P)`, every stored point is within
//! `a(x) * 2^-P <= 2^-guard` of the true fractional part as long as `P` is at
//! least [`required_precision`].
//!
//! Points live on the circle as [`UnitFrac`], a 128-bit fixed-point fraction,
//! so circle differences are exact wrapping subtractions.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sequences::SequenceSpec;
use crate::{Error, Result};

/// Lowest admissible guard.
pub const MIN_GUARD: u32 = 48;
/// Points carry 128 bits, so guards beyond this cannot be honoured.
pub const MAX_GUARD: u32 = 120;
pub const DEFAULT_GUARD: u32 = 48;
/// Precision ceiling used by [`required_precision`].
pub const DEFAULT_MAX_PRECISION: u64 = 1 << 24;

const TWO_POW_128: f64 = 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// A point of the unit circle `R/Z`, stored as `value / 2^128`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitFrac(pub u128);

impl UnitFrac {
    pub const ZERO: UnitFrac = UnitFrac(0);

    /// Nearest representable point to `x mod 1`.
    pub fn from_f64(x: f64) -> Self {
        let f = x - x.floor();
        let scaled = f * TWO_POW_128;
        if scaled >= TWO_POW_128 {
            UnitFrac(0)
        } else {
            UnitFrac(scaled as u128)
        }
    }

    /// `num / den mod 1`, rounded down.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0);
        let r = BigUint::from(num % den) << 128u32;
        UnitFrac((r / BigUint::from(den)).to_u128().unwrap_or(u128::MAX))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TWO_POW_128
    }

    /// Length of the arc travelled going forward from `self` to `other`, as a
    /// fraction of the circle.
    pub fn forward_to(self, other: UnitFrac) -> u128 {
        other.0.wrapping_sub(self.0)
    }

    /// Signed circle difference `self - other` wrapped into `[-1/2, 1/2)`.
    pub fn signed_diff(self, other: UnitFrac) -> f64 {
        (self.0.wrapping_sub(other.0) as i128) as f64 / TWO_POW_128
    }

    /// Distance to the nearest integer of `self - other`, in units of 2^-128.
    pub fn circle_distance(self, other: UnitFrac) -> u128 {
        let d = self.0.wrapping_sub(other.0);
        d.min(d.wrapping_neg())
    }
}

/// Serialized as a 40-digit decimal string, which parses back exactly.
impl Serialize for UnitFrac {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&crate::io::unit_frac_decimal(*self, 40))
    }
}

impl<'de> Deserialize<'de> for UnitFrac {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        crate::io::parse_unit_frac(&s).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for UnitFrac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::io::unit_frac_decimal(*self, 30))
    }
}

/// Where an `alpha` came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AlphaProvenance {
    Seeded { seed: u64 },
    Rational { num: u64, den: u64 },
    Mantissa,
}

/// `alpha = mantissa / 2^precision_bits` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointAlpha {
    mantissa: BigUint,
    precision_bits: u64,
    provenance: AlphaProvenance,
}

impl FixedPointAlpha {
    pub fn from_mantissa(mantissa: BigUint, precision_bits: u64) -> Result<Self> {
        if precision_bits < 64 {
            return Err(Error::Domain(format!("precision {precision_bits} < 64 bits")));
        }
        if mantissa.bits() > precision_bits {
            return Err(Error::Domain("mantissa does not fit below 2^P".into()));
        }
        Ok(Self { mantissa, precision_bits, provenance: AlphaProvenance::Mantissa })
    }

    /// `floor(num * 2^P / den) / 2^P`, i.e. `num/den` rounded down to `P` bits.
    pub fn from_rational(num: u64, den: u64, precision_bits: u64) -> Result<Self> {
        if den == 0 || num >= den {
            return Err(Error::Domain(format!("{num}/{den} is not in [0, 1)")));
        }
        let mut alpha = Self::from_mantissa(
            (BigUint::from(num) << precision_bits) / BigUint::from(den),
            precision_bits,
        )?;
        alpha.provenance = AlphaProvenance::Rational { num, den };
        Ok(alpha)
    }

    pub fn zero(precision_bits: u64) -> Result<Self> {
        Self::from_mantissa(BigUint::zero(), precision_bits)
    }

    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn precision_bits(&self) -> u64 {
        self.precision_bits
    }

    pub fn provenance(&self) -> &AlphaProvenance {
        &self.provenance
    }

    /// Short hex digest of `(P, mantissa)`.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.precision_bits.to_le_bytes());
        h.update(self.mantissa.to_bytes_le());
        hex::encode(&h.finalize()[..8])
    }

    /// Leading 53 bits as a float, for display only.
    pub fn approx_f64(&self) -> f64 {
        let shift = self.precision_bits.saturating_sub(128);
        let top = (&self.mantissa >> shift).to_u128().unwrap_or(0);
        let top_bits = self.precision_bits - shift;
        top as f64 / 2f64.powi(top_bits as i32)
    }
}

/// Draws `alpha` uniformly from the `2^P` grid points of `[0, 1)`.
///
/// The mantissa is read most-significant word first from a ChaCha20 stream
/// keyed by `seed`, so raising `P` appends bits below the existing ones and
/// leaves the leading bits untouched.
pub fn sample_alpha(seed: u64, precision_bits: u64) -> Result<FixedPointAlpha> {
    if precision_bits < 64 {
        return Err(Error::Domain(format!("precision {precision_bits} < 64 bits")));
    }
    let words = precision_bits.div_ceil(64) as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // big-endian words -> little-endian u32 digits for BigUint::new
    let mut digits = Vec::with_capacity(2 * words);
    let stream: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
    for w in stream.iter().rev() {
        digits.push(*w as u32);
        digits.push((*w >> 32) as u32);
    }
    let full = BigUint::new(digits);
    let mantissa = full >> (64 * words as u64 - precision_bits);
    Ok(FixedPointAlpha {
        mantissa,
        precision_bits,
        provenance: AlphaProvenance::Seeded { seed },
    })
}

fn ceil_log2_big(v: &BigUint) -> u64 {
    if v.is_zero() || v.bits() == 1 {
        return 0;
    }
    let b = v.bits();
    if v.trailing_zeros() == Some(b - 1) {
        b - 1
    } else {
        b
    }
}

fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

fn check_guard(guard: u32) -> Result<()> {
    if !(MIN_GUARD..=MAX_GUARD).contains(&guard) {
        return Err(Error::Domain(format!(
            "guard {guard} outside [{MIN_GUARD}, {MAX_GUARD}]"
        )));
    }
    Ok(())
}

/// `ceil(log2 max a) + ceil(log2 N) + guard` for explicit values.
pub fn required_precision_for(values: &[BigUint], guard: u32, max_bits: u64) -> Result<u64> {
    check_guard(guard)?;
    let top = values.iter().max().map(ceil_log2_big).unwrap_or(0);
    let p = top + ceil_log2(values.len()) + guard as u64;
    let p = p.max(64);
    if p > max_bits {
        return Err(Error::ResourceLimit(format!(
            "required precision {p} bits exceeds maximum {max_bits}"
        )));
    }
    Ok(p)
}

/// Minimum mantissa width so that every `{alpha a(x)}`, `x <= n`, carries
/// `guard` accurate bits.
pub fn required_precision(spec: &SequenceSpec, n: usize, guard: u32) -> Result<u64> {
    check_guard(guard)?;
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    // sequences are increasing, so a(n) is the maximum
    let top = ceil_log2_big(&spec.term(n)?);
    let p = (top + ceil_log2(n) + guard as u64).max(64);
    if p > DEFAULT_MAX_PRECISION {
        return Err(Error::ResourceLimit(format!(
            "required precision {p} bits exceeds maximum {DEFAULT_MAX_PRECISION}"
        )));
    }
    Ok(p)
}

/// Sorted view of N points on the circle plus the index-ordered view.
#[derive(Debug, Clone)]
pub struct OrderedPoints {
    by_index: Vec<UnitFrac>,
    sorted: Vec<UnitFrac>,
    order: Vec<u32>,
    error_log2: u32,
    alpha_digest: String,
}

impl OrderedPoints {
    /// Builds both views; ties keep index order.
    pub fn new(by_index: Vec<UnitFrac>, error_log2: u32, alpha_digest: impl Into<String>) -> Self {
        let mut order: Vec<u32> = (0..by_index.len() as u32).collect();
        order.sort_by_key(|&i| by_index[i as usize]);
        let sorted = order.iter().map(|&i| by_index[i as usize]).collect();
        Self { by_index, sorted, order, error_log2, alpha_digest: alpha_digest.into() }
    }

    /// Points given as reals; each is reduced mod 1. Error bound is 2^-52.
    pub fn from_f64(values: &[f64]) -> Self {
        let fr = values.iter().map(|&v| UnitFrac::from_f64(v)).collect();
        Self::new(fr, 52, "f64")
    }

    pub fn len(&self) -> usize {
        self.by_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_index.is_empty()
    }

    /// `theta_x` for x = 1..N (stored 0-based).
    pub fn by_index(&self) -> &[UnitFrac] {
        &self.by_index
    }

    pub fn sorted(&self) -> &[UnitFrac] {
        &self.sorted
    }

    /// `order()[i]` is the 0-based index x-1 of the i-th smallest point.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Points are within `2^-error_log2` of the exact fractional parts.
    pub fn error_log2(&self) -> u32 {
        self.error_log2
    }

    pub fn alpha_digest(&self) -> &str {
        &self.alpha_digest
    }

    /// The first `n` points of the index-ordered view, re-sorted.
    pub fn prefix(&self, n: usize) -> OrderedPoints {
        OrderedPoints::new(
            self.by_index[..n.min(self.len())].to_vec(),
            self.error_log2,
            self.alpha_digest.clone(),
        )
    }
}

/// How `a(x)` relates to earlier terms; exact identities only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Full,
    Scale(u64),
    Sum,
}

/// Residue `r mod 2^P` as little-endian 64-bit limbs.
#[derive(Clone, Debug)]
struct Residue {
    limbs: Vec<u64>,
    bits: u64,
}

impl Residue {
    fn from_big(v: &BigUint, bits: u64) -> Self {
        let n = bits.div_ceil(64) as usize;
        let mut limbs: Vec<u64> = v.iter_u64_digits().take(n).collect();
        limbs.resize(n, 0);
        let mut r = Self { limbs, bits };
        r.mask();
        r
    }

    fn mask(&mut self) {
        let rem = self.bits % 64;
        if rem != 0 {
            if let Some(top) = self.limbs.last_mut() {
                *top &= (1u64 << rem) - 1;
            }
        }
    }

    fn mul_small(&mut self, q: u64) {
        let mut carry = 0u128;
        for limb in &mut self.limbs {
            let t = *limb as u128 * q as u128 + carry;
            *limb = t as u64;
            carry = t >> 64;
        }
        self.mask();
    }

    fn add(&mut self, other: &Residue) {
        let mut carry = false;
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            let (s1, c1) = a.overflowing_add(*b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *a = s2;
            carry = c1 || c2;
        }
        self.mask();
    }

    /// Bits `[P-128, P)` as a 128-bit fraction (zero-extended when P < 128).
    fn top128(&self) -> UnitFrac {
        if self.bits <= 128 {
            let mut v = 0u128;
            for (i, l) in self.limbs.iter().enumerate() {
                v |= (*l as u128) << (64 * i);
            }
            return UnitFrac(v << (128 - self.bits));
        }
        let lo = self.bits - 128;
        let (word, off) = ((lo / 64) as usize, lo % 64);
        if off == 0 {
            let v = self.limbs[word] as u128 | (self.limbs[word + 1] as u128) << 64;
            return UnitFrac(v);
        }
        let l0 = self.limbs[word] as u128 >> off;
        let l1 = (self.limbs[word + 1] as u128) << (64 - off);
        let l2 = self.limbs.get(word + 2).copied().unwrap_or(0) as u128;
        UnitFrac(l0 | l1 | (l2 << (128 - off)))
    }
}

/// Values of a sequence prepared for repeated fractional-part evaluation.
///
/// Consecutive terms related by `a(x) = q a(x-1)` (small `q`) or
/// `a(x) = a(x-1) + a(x-2)` are advanced with a single limb pass instead of a
/// full multiplication. Both identities are exact, so results are bitwise
/// identical to the direct product.
#[derive(Debug, Clone)]
pub struct PreparedValues {
    values: Vec<BigUint>,
    steps: Vec<Step>,
}

impl PreparedValues {
    pub fn new(values: Vec<BigUint>) -> Self {
        let mut steps = Vec::with_capacity(values.len());
        for x in 0..values.len() {
            let step = if x == 0 || values[x - 1].is_zero() {
                Step::Full
            } else if values[x].bits() <= values[x - 1].bits() + 63 && {
                let (q, r) = values[x].div_rem(&values[x - 1]);
                r.is_zero() && q.to_u64().is_some()
            } {
                Step::Scale((&values[x] / &values[x - 1]).to_u64().unwrap())
            } else if x >= 2 && values[x] == &values[x - 1] + &values[x - 2] {
                Step::Sum
            } else {
                Step::Full
            };
            steps.push(step);
        }
        Self { values, steps }
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index-ordered `{alpha a(x)}` without precision checks.
    fn residues(&self, alpha: &FixedPointAlpha) -> Vec<UnitFrac> {
        let p = alpha.precision_bits;
        let modulus_mask = |v: &BigUint| -> BigUint {
            if v.bits() > p {
                v % (BigUint::from(1u8) << p)
            } else {
                v.clone()
            }
        };
        let mut out = Vec::with_capacity(self.values.len());
        let mut prev: Option<Residue> = None;
        let mut prev2: Option<Residue> = None;
        for (x, step) in self.steps.iter().enumerate() {
            let cur = match (step, &prev, &prev2) {
                (Step::Scale(q), Some(r1), _) => {
                    let mut r = r1.clone();
                    r.mul_small(*q);
                    r
                }
                (Step::Sum, Some(r1), Some(r2)) => {
                    let mut r = r1.clone();
                    r.add(r2);
                    r
                }
                _ => Residue::from_big(&(&alpha.mantissa * modulus_mask(&self.values[x])), p),
            };
            out.push(cur.top128());
            prev2 = prev.take();
            prev = Some(cur);
        }
        out
    }
}

/// `{alpha a(x)}` for every value, sorted and index-ordered.
///
/// Fails with `InsufficientPrecision` unless `alpha` has at least
/// [`required_precision_for`] bits at the given guard.
pub fn frac_parts(alpha: &FixedPointAlpha, values: &[BigUint], guard: u32) -> Result<OrderedPoints> {
    frac_parts_prepared(alpha, &PreparedValues::new(values.to_vec()), guard)
}

pub fn frac_parts_prepared(
    alpha: &FixedPointAlpha,
    values: &PreparedValues,
    guard: u32,
) -> Result<OrderedPoints> {
    let need = required_precision_for(&values.values, guard, u64::MAX)?;
    if alpha.precision_bits < need {
        return Err(Error::InsufficientPrecision { have: alpha.precision_bits, need });
    }
    Ok(OrderedPoints::new(values.residues(alpha), guard, alpha.digest()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::generate;

    fn pow2(n: usize) -> Vec<BigUint> {
        generate(&SequenceSpec::geometric(2), n).unwrap()
    }

    #[test]
    fn required_precision_examples() {
        assert_eq!(required_precision(&SequenceSpec::geometric(2), 100, 64).unwrap(), 171);
        assert_eq!(required_precision(&SequenceSpec::polynomial(2), 1000, 64).unwrap(), 94);
        let one = SequenceSpec::explicit(vec![BigUint::from(1u8)]);
        assert_eq!(required_precision(&one, 1, 64).unwrap(), 64);
        assert!(matches!(
            required_precision(&SequenceSpec::geometric(2), 100, 32),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            required_precision_for(&pow2(100), 64, 150),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn zero_alpha_gives_zero_points() {
        let alpha = FixedPointAlpha::zero(256).unwrap();
        let pts = frac_parts(&alpha, &pow2(50), 64).unwrap();
        assert!(pts.by_index().iter().all(|t| *t == UnitFrac::ZERO));
    }

    #[test]
    fn half_times_powers_of_two_is_zero() {
        let alpha = FixedPointAlpha::from_rational(1, 2, 128).unwrap();
        let pts = frac_parts(&alpha, &pow2(3), 64).unwrap();
        assert_eq!(pts.by_index(), &[UnitFrac::ZERO; 3]);
    }

    #[test]
    fn third_times_powers_of_two() {
        let alpha = FixedPointAlpha::from_rational(1, 3, 128).unwrap();
        let pts = frac_parts(&alpha, &pow2(4), 64).unwrap();
        let expect = [2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0];
        for (t, e) in pts.by_index().iter().zip(expect) {
            assert!((t.to_f64() - e).abs() < 2f64.powi(-64));
        }
    }

    #[test]
    fn insufficient_precision_rejected() {
        let alpha = sample_alpha(1, 128).unwrap();
        let err = frac_parts(&alpha, &pow2(100), 64).unwrap_err();
        assert!(matches!(err, Error::InsufficientPrecision { have: 128, need: 171 }));
    }

    #[test]
    fn sample_alpha_reproducible_and_prefix_consistent() {
        let a = sample_alpha(1, 128).unwrap();
        let b = sample_alpha(1, 128).unwrap();
        assert_eq!(a.mantissa(), b.mantissa());
        let c = sample_alpha(2, 128).unwrap();
        assert_ne!(a.mantissa(), c.mantissa());
        let wide = sample_alpha(1, 192).unwrap();
        assert_eq!(a.mantissa() >> 64u32, wide.mantissa() >> 128u32);
        assert_eq!(a.mantissa(), &(wide.mantissa() >> 64u32));
        let odd = sample_alpha(1, 100).unwrap();
        assert_eq!(odd.mantissa(), &(a.mantissa() >> 28u32));
        assert!(a.mantissa().bits() <= 128);
        assert!(matches!(sample_alpha(1, 32), Err(Error::Domain(_))));
    }

    #[test]
    fn fast_paths_match_full_products() {
        // geometric (scale), fibonacci (sum) and polynomial (full) all agree with
        // a direct product computed here.
        for spec in [
            SequenceSpec::geometric(3),
            SequenceSpec::fibonacci_like(1, 2),
            SequenceSpec::polynomial(3),
        ] {
            let vals = generate(&spec, 150).unwrap();
            let p = required_precision_for(&vals, 64, u64::MAX).unwrap() + 13;
            let alpha = sample_alpha(99, p).unwrap();
            let pts = frac_parts(&alpha, &vals, 64).unwrap();
            let modulus = BigUint::from(1u8) << p;
            for (x, v) in vals.iter().enumerate() {
                let r = (alpha.mantissa() * v) % &modulus;
                let top = if p >= 128 { r >> (p - 128) } else { r << (128 - p) };
                assert_eq!(pts.by_index()[x].0, top.to_u128().unwrap(), "{spec:?} x={x}");
            }
        }
        let steps = PreparedValues::new(pow2(5)).steps;
        assert_eq!(steps[0], Step::Full);
        assert!(steps[1..].iter().all(|s| *s == Step::Scale(2)));
    }

    #[test]
    fn sorted_view_is_stable_permutation() {
        let alpha = FixedPointAlpha::from_rational(1, 2, 128).unwrap();
        let values: Vec<BigUint> = (1u32..=6).map(BigUint::from).collect();
        let pts = frac_parts(&alpha, &values, 64).unwrap();
        assert!(pts.sorted().windows(2).all(|w| w[0] <= w[1]));
        // ties keep index order: even terms give 0, odd terms give 1/2
        assert_eq!(pts.order(), &[1, 3, 5, 0, 2, 4]);
    }

    #[test]
    fn unit_frac_arithmetic() {
        let a = UnitFrac::from_f64(0.1);
        let b = UnitFrac::from_f64(0.9);
        assert!((a.signed_diff(b) - 0.2).abs() < 1e-15);
        assert!((b.signed_diff(a) + 0.2).abs() < 1e-15);
        assert!((a.circle_distance(b) as f64 / TWO_POW_128 - 0.2).abs() < 1e-15);
        assert_eq!(UnitFrac::from_f64(1.0), UnitFrac::ZERO);
        assert_eq!(UnitFrac::from_ratio(1, 2), UnitFrac(1u128 << 127));
    }
}
