use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::test_function::TestFunction;
use crate::{Error, Result};

/// Terms with `|n|_inf > n_max` are dropped; the default is `64 N`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FourierOptions {
    pub n_max: Option<u64>,
    /// Fail when the tail bound exceeds this.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierB {
    pub l: i64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub value: f64,
    /// Upper bound on the absolute value of the dropped terms.
    pub tail_bound: f64,
    pub n_max: u64,
    /// Number of `(n, x)` pairs summed.
    pub terms: u64,
}

/// `b(l, N) = sum_n sum*_{n . Delta(x) = l} f^(n / N)` for k = 2 or 3.
pub fn fourier_b(
    l: i64,
    n: usize,
    k: usize,
    f: &TestFunction,
    values: &[BigUint],
    opts: FourierOptions,
) -> Result<FourierB> {
    if !(2..=3).contains(&k) {
        return Err(Error::OrderOutOfRange(k));
    }
    if f.dim != k - 1 {
        return Err(Error::Domain(format!("order {k} needs a test function of dimension {}", k - 1)));
    }
    if !f.has_fourier() {
        return Err(Error::NoClosedFormTransform(format!("{:?}", f.kind)));
    }
    if values.len() < n {
        return Err(Error::Domain(format!("need {n} values, got {}", values.len())));
    }
    let a = small_values(&values[..n])?;
    let n_max = opts.n_max.unwrap_or(64 * n as u64);
    let mut out = FourierB { l, n, k, value: 0.0, tail_bound: 0.0, n_max, terms: 0 };
    let nf = n as f64;
    let factor = |m: i128| f.fourier_factor(m as f64 / nf);
    let (h, b, p) = f.factor_decay();
    let scale = f.scale.abs();
    let l = l as i128;
    let m_cap = n_max as i128;

    if k == 2 {
        for (i, &ai) in a.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                let d = ai - aj;
                if i == j || l % d != 0 {
                    continue;
                }
                let m = l / d;
                if m.abs() <= m_cap {
                    out.value += f.scale * factor(m);
                    out.terms += 1;
                } else {
                    let xi = m as f64 / nf;
                    out.tail_bound += scale * h.min(b / xi.abs().powi(p));
                }
            }
        }
    } else {
        let c = b * nf.powi(p);
        for (i, &ai) in a.iter().enumerate() {
            for (j, &aj) in a.iter().enumerate() {
                if i == j {
                    continue;
                }
                for (s, &as_) in a.iter().enumerate() {
                    if s == i || s == j {
                        continue;
                    }
                    let (d1, d2) = (ai - aj, aj - as_);
                    let eg = d1.extended_gcd(&d2);
                    let g = eg.gcd;
                    if l % g != 0 {
                        continue;
                    }
                    let q = l / g;
                    let base1 = checked(eg.x.checked_mul(q))?;
                    let base2 = checked(eg.y.checked_mul(q))?;
                    // n1 = base1 + t d2/g, n2 = base2 - t d1/g
                    let (s1, s2) = (d2 / g, -(d1 / g));
                    let (lo1, hi1) = t_range(base1, s1, m_cap);
                    let (lo2, hi2) = t_range(base2, s2, m_cap);
                    for t in lo1.max(lo2)..=hi1.min(hi2) {
                        let n1 = base1 + t * s1;
                        let n2 = base2 + t * s2;
                        out.value += f.scale * factor(n1) * factor(n2);
                        out.terms += 1;
                    }
                    out.tail_bound += scale * line_tail(d1, d2, g, l, m_cap, h, c, p);
                }
            }
        }
    }
    if let Some(tol) = opts.tol {
        if out.tail_bound > tol {
            return Err(Error::TruncationTooCoarse { tail: out.tail_bound, tol });
        }
    }
    Ok(out)
}

/// `b(0, N) / N^k`, the mean of `R_k(f, N)` over alpha.
pub fn mean_via_b0(k: usize, f: &TestFunction, n: usize, values: &[BigUint], opts: FourierOptions) -> Result<f64> {
    let b0 = fourier_b(0, n, k, f, values, opts)?;
    Ok(b0.value / (n as f64).powi(k as i32))
}

fn small_values(values: &[BigUint]) -> Result<Vec<i128>> {
    let limit = BigUint::from(1u8) << 125u32;
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        if *v >= limit {
            return Err(Error::ResourceLimit("Fourier coefficients need a(x) < 2^125".into()));
        }
        out.push(v.to_i128().expect("below 2^125"));
    }
    let mut sorted = out.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("sequence values must be distinct".into()));
    }
    Ok(out)
}

fn checked(v: Option<i128>) -> Result<i128> {
    v.ok_or_else(|| Error::ResourceLimit("coefficient overflow on the Fourier path".into()))
}

/// Integer `t` with `|c + t s| <= m`, as an inclusive range.
fn t_range(c: i128, s: i128, m: i128) -> (i128, i128) {
    let (a, b) = if s > 0 { (-m - c, m - c) } else { (m - c, -m - c) };
    (Integer::div_ceil(&a, &s), Integer::div_floor(&b, &s))
}

/// Bound on the sum of `|f^(n1/N) f^(n2/N)|` over the points of the line
/// `n1 d1 + n2 d2 = l` with `|n|_inf > m_cap`, given the per-coordinate
/// decay `|factor(xi)| <= min(h, b / |xi|^p)` and `c = b N^p`.
#[allow(clippy::too_many_arguments)]
fn line_tail(d1: i128, d2: i128, g: i128, l: i128, m_cap: i128, h: f64, c: f64, p: i32) -> f64 {
    // parametrise by the coordinate with the smaller coefficient
    let (da, db) = if d1.abs() <= d2.abs() { (d1.abs(), d2.abs()) } else { (d2.abs(), d1.abs()) };
    let (da, db, l) = (da as f64, db as f64, l.abs() as f64);
    let step = db / g.abs() as f64;
    let m_cap = m_cap as f64;
    // |n_b| > m_cap forces |n_a| >= ((m_cap + 1) db - l) / da
    let m0 = (m_cap + 1.0).min((((m_cap + 1.0) * db - l) / da).ceil());
    if m0 < 1.0 {
        return f64::INFINITY;
    }
    let phi_m0 = h * h.min(c / m0.powi(p));
    // below m_l the other coordinate has no usable lower bound
    let m_l = 2.0 * l / da;
    let m_a = m0.max(m_l);
    let mut integral = (m_a - m0) * h * c / m0.powi(p);
    let rho = 2.0 * db / da;
    let crho = c * rho.powi(p);
    let m_star = rho * (c / h).powf(1.0 / p as f64);
    let far = |m: f64| c * crho / ((2 * p - 1) as f64 * m.powi(2 * p - 1));
    integral += if m_a >= m_star {
        far(m_a)
    } else {
        let near = if p == 1 { h * c * (m_star / m_a).ln() } else { h * c * (1.0 / m_a - 1.0 / m_star) };
        near + far(m_star)
    };
    2.0 * (phi_m0 + integral / step)
}
