//! Reference laws of the Poisson model (i.i.d. uniform levels).
//!
//! * level-`a` spacing density `P_a(s) = s^(a-1) e^-s / (a-1)!`
//! * its distribution function, the regularized lower incomplete gamma
//!   ratio `gamma(a, s) / Gamma(a)`
//! * interval occupancy `e^-lambda lambda^k / k!`
//! * joint nearest-neighbour spacing density `prod e^-s_i`

use crate::{Error, Result};

/// Largest spacing level with a precomputed factorial.
pub const MAX_LEVEL: u32 = 20;

const FACTORIALS: [u64; 21] = {
    let mut t = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        t[i] = t[i - 1] * i as u64;
        i += 1;
    }
    t
};

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

fn check_level(a: u32) -> Result<()> {
    if a == 0 || a > MAX_LEVEL {
        return Err(Error::Domain(format!("level {a} outside 1..={MAX_LEVEL}")));
    }
    Ok(())
}

fn check_spacing(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::Domain(format!("spacing {s} must be >= 0")));
    }
    Ok(())
}

/// `(a-1)!` exactly, for `1 <= a <= 21`.
pub fn factorial(n: u32) -> u64 {
    FACTORIALS[n as usize]
}

/// `P_a(s) = s^(a-1) e^-s / (a-1)!`.
pub fn level_spacing_pdf(a: u32, s: f64) -> Result<f64> {
    check_level(a)?;
    check_spacing(s)?;
    if a == 1 {
        return Ok((-s).exp());
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let log = (a - 1) as f64 * s.ln() - s - (factorial(a - 1) as f64).ln();
    Ok(log.exp())
}

/// `int_0^s P_a`, the regularized lower incomplete gamma function `P(a, s)`.
pub fn level_spacing_cdf(a: u32, s: f64) -> Result<f64> {
    check_level(a)?;
    check_spacing(s)?;
    Ok(regularized_lower_gamma(a, s))
}

/// `P(a, x)` for integer `a`: series below `a + 1`, continued fraction above.
fn regularized_lower_gamma(a: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let af = a as f64;
    // x^a e^-x / Gamma(a)
    let log_prefactor = af * x.ln() - x - (factorial(a - 1) as f64).ln();
    if x < af + 1.0 {
        // P(a,x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
        let mut term = 1.0 / af;
        let mut sum = term;
        let mut denom = af;
        for _ in 0..GAMMA_MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        // modified Lentz for Q(a,x) = x^a e^-x / Gamma(a) * 1/(x+1-a- 1(1-a)/(x+3-a- ...))
        let tiny = 1e-300;
        let mut b = x + 1.0 - af;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - af);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (1.0 - log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}

/// `e^-lambda lambda^k / k!`, evaluated in log space.
pub fn interval_count_pmf(lambda: f64, k: u64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda {lambda} must be positive")));
    }
    let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
    Ok((-lambda + k as f64 * lambda.ln() - ln_fact).exp())
}

/// `prod_i e^-s_i`.
pub fn joint_spacing_pdf(s: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &si in s {
        check_spacing(si)?;
        total += si;
    }
    Ok((-total).exp())
}

/// `prod_i (1 - e^-s_i)`, the distribution function of independent unit
/// exponentials.
pub fn joint_spacing_cdf(s: &[f64]) -> Result<f64> {
    let mut prod = 1.0;
    for &si in s {
        check_spacing(si)?;
        prod *= -(-si).exp_m1();
    }
    Ok(prod)
}
