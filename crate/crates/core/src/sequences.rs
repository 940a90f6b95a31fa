//! Integer sequences `a(1), a(2), ...` whose fractional-part statistics are
//! studied: geometric `g^x`, Fibonacci-type recurrences, polynomial `x^d`
//! (the non-lacunary contrast class) and explicit lists.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the total number of bits materialised by one call to
/// [`generate`].
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    /// `a(x) = base^x`.
    Geometric { base: u64 },
    /// `a(1) = first`, `a(2) = second`, `a(x) = a(x-1) + a(x-2)`.
    FibonacciLike { first: u64, second: u64 },
    /// `a(x) = x^degree`. Never lacunary.
    Polynomial { degree: u32 },
    /// An explicit list; `a(x)` is the x-th entry.
    Explicit {
        #[serde(with = "decimal_list")]
        values: Vec<BigUint>,
    },
}

/// Declarative description of a sequence family plus its claimed gap
/// condition `a(x+1) > c * a(x)` for `x >= gap_start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    /// Claimed gap constant `c > 1`. `None` for sequences that are not lacunary.
    #[serde(default)]
    pub gap_constant: Option<Ratio<u64>>,
    /// First index (1-based) from which the gap condition is claimed.
    #[serde(default = "default_gap_start")]
    pub gap_start: usize,
}

fn default_gap_start() -> usize {
    1
}

impl SequenceSpec {
    /// `a(x) = g^x` with gap constant `(2g-1)/2`, valid from `x = 1`.
    pub fn geometric(base: u64) -> Self {
        Self {
            kind: SequenceKind::Geometric { base },
            gap_constant: Some(Ratio::new(2 * base.max(1) - 1, 2)),
            gap_start: 1,
        }
    }

    /// Fibonacci-type recurrence. The ratio only approaches the golden mean
    /// asymptotically, so the claimed constant is 7/5 from `x = 2`.
    pub fn fibonacci_like(first: u64, second: u64) -> Self {
        Self {
            kind: SequenceKind::FibonacciLike { first, second },
            gap_constant: Some(Ratio::new(7, 5)),
            gap_start: 2,
        }
    }

    pub fn polynomial(degree: u32) -> Self {
        Self {
            kind: SequenceKind::Polynomial { degree },
            gap_constant: None,
            gap_start: 1,
        }
    }

    pub fn explicit(values: Vec<BigUint>) -> Self {
        Self {
            kind: SequenceKind::Explicit { values },
            gap_constant: None,
            gap_start: 1,
        }
    }

    pub fn with_gap(mut self, c: Ratio<u64>, gap_start: usize) -> Self {
        self.gap_constant = Some(c);
        self.gap_start = gap_start;
        self
    }

    /// Polynomial sequences are the contrast class and are flagged here.
    pub fn is_lacunary(&self) -> bool {
        !matches!(self.kind, SequenceKind::Polynomial { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SequenceKind::Geometric { base } if *base < 2 => {
                return Err(Error::InvalidSpec(format!("geometric base {base} < 2")))
            }
            SequenceKind::FibonacciLike { first, second } if *first == 0 || first >= second => {
                return Err(Error::InvalidSpec(format!(
                    "fibonacci-like seed ({first}, {second}) must satisfy 0 < first < second"
                )))
            }
            SequenceKind::Polynomial { degree } if *degree == 0 => {
                return Err(Error::InvalidSpec("polynomial degree must be >= 1".into()))
            }
            SequenceKind::Explicit { values } => {
                if values.first().is_some_and(Zero::is_zero) {
                    return Err(Error::InvalidSpec("explicit values must be positive".into()));
                }
                if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidSpec(format!(
                        "explicit list not strictly increasing at position {}",
                        i + 2
                    )));
                }
            }
            _ => {}
        }
        if let Some(c) = &self.gap_constant {
            if c.numer() <= c.denom() {
                return Err(Error::InvalidSpec(format!("gap constant {c} must exceed 1")));
            }
        }
        if self.gap_start == 0 {
            return Err(Error::InvalidSpec("gap_start is 1-based".into()));
        }
        Ok(())
    }

    /// The single term `a(x)`, 1-based.
    pub fn term(&self, x: usize) -> Result<BigUint> {
        self.validate()?;
        if x == 0 {
            return Err(Error::Domain("sequence index is 1-based".into()));
        }
        Ok(match &self.kind {
            SequenceKind::Geometric { base } => BigUint::from(*base).pow(x),
            SequenceKind::Polynomial { degree } => BigUint::from(x).pow(*degree),
            SequenceKind::FibonacciLike { first, second } => {
                let (mut prev, mut cur) = (BigUint::from(*first), BigUint::from(*second));
                if x == 1 {
                    return Ok(prev);
                }
                for _ in 2..x {
                    let next = &prev + &cur;
                    prev = std::mem::replace(&mut cur, next);
                }
                cur
            }
            SequenceKind::Explicit { values } => values.get(x - 1).cloned().ok_or_else(|| {
                Error::InvalidSpec(format!("explicit list has only {} entries", values.len()))
            })?,
        })
    }
}

/// `a(1), ..., a(n)` with the default bit budget.
pub fn generate(spec: &SequenceSpec, n: usize) -> Result<Vec<BigUint>> {
    generate_with_budget(spec, n, DEFAULT_BIT_BUDGET)
}

/// `a(1), ..., a(n)`, failing with `ResourceLimit` once the total number of
/// materialised bits would exceed `bit_budget`.
pub fn generate_with_budget(spec: &SequenceSpec, n: usize, bit_budget: u64) -> Result<Vec<BigUint>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("N must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n);
    let mut used = 0u64;
    let mut push = |v: BigUint, out: &mut Vec<BigUint>| -> Result<()> {
        used += v.bits();
        if used > bit_budget {
            return Err(Error::ResourceLimit(format!(
                "sequence needs more than {bit_budget} bits by x = {}",
                out.len() + 1
            )));
        }
        out.push(v);
        Ok(())
    };
    match &spec.kind {
        SequenceKind::Geometric { base } => {
            let g = BigUint::from(*base);
            let mut cur = BigUint::one();
            for _ in 0..n {
                cur *= &g;
                push(cur.clone(), &mut out)?;
            }
        }
        SequenceKind::Polynomial { degree } => {
            for x in 1..=n {
                push(BigUint::from(x).pow(*degree), &mut out)?;
            }
        }
        SequenceKind::FibonacciLike { first, second } => {
            push(BigUint::from(*first), &mut out)?;
            if n > 1 {
                push(BigUint::from(*second), &mut out)?;
            }
            while out.len() < n {
                let next = &out[out.len() - 1] + &out[out.len() - 2];
                push(next, &mut out)?;
            }
        }
        SequenceKind::Explicit { values } => {
            if values.len() < n {
                return Err(Error::InvalidSpec(format!(
                    "explicit list has {} entries, {n} requested",
                    values.len()
                )));
            }
            for v in &values[..n] {
                push(v.clone(), &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Outcome of [`verify_gap`]. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapCheck {
    pub holds: bool,
    /// Smallest `x >= x0` with `a(x+1) <= c * a(x)`.
    pub first_violation: Option<usize>,
}

/// Checks `a(x+1) > c * a(x)` for every `x >= x0` with `x + 1 <= len`, using
/// exact rational comparison.
pub fn verify_gap(values: &[BigUint], c: &Ratio<u64>, x0: usize) -> Result<GapCheck> {
    if values.is_empty() {
        return Err(Error::Domain("verify_gap needs at least one value".into()));
    }
    if c.numer() <= c.denom() {
        return Err(Error::Domain(format!("gap constant {c} must exceed 1")));
    }
    if x0 == 0 {
        return Err(Error::Domain("x0 is 1-based".into()));
    }
    let (p, q) = (BigUint::from(*c.numer()), BigUint::from(*c.denom()));
    for x in x0..values.len() {
        // a(x+1) > (p/q) a(x)  <=>  q a(x+1) > p a(x)
        if &q * &values[x] <= &p * &values[x - 1] {
            return Ok(GapCheck { holds: false, first_violation: Some(x) });
        }
    }
    Ok(GapCheck { holds: true, first_violation: None })
}

mod decimal_list {
    use num_bigint::BigUint;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Item {
            Int(u64),
            Str(String),
        }
        Vec::<Item>::deserialize(d)?
            .into_iter()
            .map(|item| match item {
                Item::Int(v) => Ok(BigUint::from(v)),
                Item::Str(s) => BigUint::parse_bytes(s.trim().as_bytes(), 10)
                    .ok_or_else(|| D::Error::custom(format!("not a decimal integer: {s:?}"))),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate(&SequenceSpec::geometric(2), 5).unwrap(), big(&[2, 4, 8, 16, 32]));
        assert_eq!(generate(&SequenceSpec::polynomial(2), 4).unwrap(), big(&[1, 4, 9, 16]));
        assert_eq!(
            generate(&SequenceSpec::fibonacci_like(1, 2), 6).unwrap(),
            big(&[1, 2, 3, 5, 8, 13])
        );
    }

    #[test]
    fn term_matches_generate() {
        for spec in [
            SequenceSpec::geometric(3),
            SequenceSpec::fibonacci_like(2, 5),
            SequenceSpec::polynomial(3),
        ] {
            let v = generate(&spec, 12).unwrap();
            for x in 1..=12 {
                assert_eq!(spec.term(x).unwrap(), v[x - 1]);
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(generate(&SequenceSpec::geometric(1), 3), Err(Error::InvalidSpec(_))));
        assert!(matches!(generate(&SequenceSpec::polynomial(0), 3), Err(Error::InvalidSpec(_))));
        assert!(matches!(
            generate(&SequenceSpec::fibonacci_like(1, 1), 3),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            generate(&SequenceSpec::explicit(big(&[1, 3, 3])), 3),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            generate(&SequenceSpec::explicit(big(&[1, 3])), 3),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(generate(&SequenceSpec::geometric(2), 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn bit_budget_enforced() {
        let err = generate_with_budget(&SequenceSpec::geometric(2), 100, 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
        // 2^x has x + 1 bits, so 43 terms take 989 bits
        assert!(generate_with_budget(&SequenceSpec::geometric(2), 43, 1000).is_ok());
        assert!(generate_with_budget(&SequenceSpec::geometric(2), 44, 1000).is_err());
    }

    #[test]
    fn verify_gap_examples() {
        let c = Ratio::new(3, 2);
        let ok = verify_gap(&big(&[2, 4, 8, 16]), &c, 1).unwrap();
        assert!(ok.holds && ok.first_violation.is_none());

        // 25/16 = 1.5625 > 3/2, so the squares up to 25 still pass.
        assert!(verify_gap(&big(&[1, 4, 9, 16, 25]), &c, 2).unwrap().holds);
        // 36/25 = 1.44 < 3/2 is the first violation.
        let bad = verify_gap(&big(&[1, 4, 9, 16, 25, 36]), &c, 2).unwrap();
        assert_eq!(bad, GapCheck { holds: false, first_violation: Some(5) });

        // golden ratio minus 0.2 ~ 1.41803
        let c = Ratio::new(141_803, 100_000);
        assert!(verify_gap(&big(&[1, 2, 3, 5, 8]), &c, 2).unwrap().holds);
        // the ratio 3/2 at x = 2 is not strictly above c = 3/2
        let strict = verify_gap(&big(&[1, 2, 3, 5, 8]), &Ratio::new(3, 2), 1).unwrap();
        assert_eq!(strict.first_violation, Some(2));
    }

    #[test]
    fn geometric_gap_threshold() {
        for g in 2u64..6 {
            let v = generate(&SequenceSpec::geometric(g), 10).unwrap();
            assert!(verify_gap(&v, &Ratio::new(g * 100 - 1, 100), 1).unwrap().holds);
            assert!(!verify_gap(&v, &Ratio::new(g, 1), 1).unwrap().holds);
            assert!(!verify_gap(&v, &Ratio::new(g * 10 + 1, 10), 1).unwrap().holds);
        }
    }

    #[test]
    fn polynomial_eventually_fails_gap() {
        let v = generate(&SequenceSpec::polynomial(2), 400).unwrap();
        for c in [Ratio::new(11, 10), Ratio::new(101, 100)] {
            assert!(!verify_gap(&v, &c, 2).unwrap().holds);
        }
        assert!(!SequenceSpec::polynomial(2).is_lacunary());
    }

    #[test]
    fn default_gap_claims_hold() {
        for spec in [SequenceSpec::geometric(2), SequenceSpec::fibonacci_like(1, 2)] {
            let v = generate(&spec, 60).unwrap();
            let c = spec.gap_constant.unwrap();
            assert!(verify_gap(&v, &c, spec.gap_start).unwrap().holds, "{spec:?}");
        }
    }

    #[test]
    fn spec_serde_roundtrip() {
        let spec = SequenceSpec::explicit(big(&[3, 24, 192]));
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"192\""));
        let back: SequenceSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let t: SequenceSpec = toml::from_str("kind = \"geometric\"\nbase = 2\n").unwrap();
        assert_eq!(t.kind, SequenceKind::Geometric { base: 2 });
    }
}
