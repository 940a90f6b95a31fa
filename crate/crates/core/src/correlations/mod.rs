//! k-level correlation sums `R_k(f, N) = (1/N) sum* F_N(alpha Delta(x))`
//! over ordered tuples of distinct indices, in windowed and naive form, plus
//! the Fourier-side coefficients `b(l, N)`.

mod fourier;
mod test_function;

pub use fourier::{fourier_b, mean_via_b0, FourierB, FourierOptions};
pub use test_function::{unit_bump_integral, LinearCombination, TestFunction, TestKind, Window};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fracparts::{OrderedPoints, UnitFrac};
use crate::{Error, Result};

pub const MAX_ORDER: usize = 4;
pub const NAIVE_MAX_N: usize = 128;
/// Largest N at which the naive enumeration accepts k = 4.
pub const NAIVE_MAX_N_ORDER4: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Windowed,
    Naive,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windowed" => Ok(Self::Windowed),
            "naive" => Ok(Self::Naive),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    /// Tuples with a nonzero summand.
    pub tuple_count: u64,
    pub method: Method,
    pub f_digest: String,
}

/// Maps each coordinate into (-1/2, 1/2].
fn wrap(y: f64) -> f64 {
    y - (y - 0.5).ceil()
}

/// `F_N(y) = sum_m f(N (m + y))`, which for `N > 2 rho` is the single term
/// `f(N wrap(y))`.
pub fn periodize<W: Window + ?Sized>(f: &W, n: usize, y: &[f64]) -> Result<f64> {
    check_n(f, n)?;
    if y.len() != f.dim() {
        return Err(Error::Domain(format!("expected {} coordinates, got {}", f.dim(), y.len())));
    }
    let scaled: Vec<f64> = y.iter().map(|&v| n as f64 * wrap(v)).collect();
    Ok(f.eval(&scaled))
}

fn check_n<W: Window + ?Sized>(f: &W, n: usize) -> Result<()> {
    if (n as f64) <= 2.0 * f.radius() {
        return Err(Error::NTooSmall { n, radius: f.radius() });
    }
    Ok(())
}

fn check_order<W: Window + ?Sized>(f: &W, k: usize) -> Result<()> {
    if !(2..=MAX_ORDER).contains(&k) {
        return Err(Error::OrderOutOfRange(k));
    }
    if f.dim() != k - 1 {
        return Err(Error::Domain(format!("order {k} needs a test function of dimension {}", k - 1)));
    }
    Ok(())
}

/// Summand for one tuple: `F_N` at the consecutive circle differences.
struct Summand<'a, W: ?Sized> {
    f: &'a W,
    theta: &'a [UnitFrac],
    n: f64,
}

impl<W: Window + ?Sized> Summand<'_, W> {
    fn eval(&self, tuple: &[usize], buf: &mut [f64]) -> f64 {
        for (i, w) in tuple.windows(2).enumerate() {
            buf[i] = self.n * self.theta[w[0]].signed_diff(self.theta[w[1]]);
        }
        self.f.eval(buf)
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    sum: f64,
    count: u64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        if v != 0.0 {
            self.sum += v;
            self.count += 1;
        }
    }
}

/// Indices whose circle distance to each point is at most `thr`.
fn neighbour_lists(points: &OrderedPoints, thr: u128) -> Vec<Vec<u32>> {
    let n = points.len();
    let sorted = points.sorted();
    let order = points.order();
    let mut nb = vec![Vec::new(); n];
    for p in 0..n {
        let list = &mut nb[order[p] as usize];
        let mut steps = 0;
        let mut q = p;
        while steps + 1 < n {
            q = (q + 1) % n;
            if sorted[p].forward_to(sorted[q]) > thr {
                break;
            }
            list.push(order[q]);
            steps += 1;
        }
        let mut q = p;
        while steps + 1 < n {
            q = (q + n - 1) % n;
            if sorted[q].forward_to(sorted[p]) > thr {
                break;
            }
            list.push(order[q]);
            steps += 1;
        }
    }
    nb
}

fn result<W: Window + ?Sized>(f: &W, k: usize, n: usize, acc: Acc, method: Method) -> CorrelationResult {
    CorrelationResult {
        k,
        n,
        value: acc.sum / n as f64,
        tuple_count: acc.count,
        method,
        f_digest: f.digest(),
    }
}

/// Windowed evaluation: only chains whose consecutive circle distances are
/// at most `rho / N` are visited. Anchors run in parallel and are reduced in
/// index order.
pub fn correlation_direct<W: Window + ?Sized>(points: &OrderedPoints, k: usize, f: &W) -> Result<CorrelationResult> {
    check_order(f, k)?;
    let n = points.len();
    check_n(f, n)?;
    // slack absorbs the rounding of the f64 summand arguments
    let frac = f.radius() / n as f64 * (1.0 + 1e-9) + 1e-30;
    let thr = (frac * 2f64.powi(128)) as u128;
    let nb = neighbour_lists(points, thr);
    let summand = Summand { f, theta: points.by_index(), n: n as f64 };

    let per_anchor: Vec<Acc> = (0..n)
        .into_par_iter()
        .map(|x1| {
            let mut acc = Acc::default();
            let mut tuple = vec![x1];
            let mut buf = vec![0.0; k - 1];
            chains(&nb, &summand, k, &mut tuple, &mut buf, &mut acc);
            acc
        })
        .collect();
    let mut total = Acc::default();
    for a in per_anchor {
        total.sum += a.sum;
        total.count += a.count;
    }
    Ok(result(f, k, n, total, Method::Windowed))
}

fn chains<W: Window + ?Sized>(
    nb: &[Vec<u32>],
    summand: &Summand<W>,
    k: usize,
    tuple: &mut Vec<usize>,
    buf: &mut [f64],
    acc: &mut Acc,
) {
    if tuple.len() == k {
        acc.add(summand.eval(tuple, buf));
        return;
    }
    let last = *tuple.last().unwrap();
    for &next in &nb[last] {
        let next = next as usize;
        if tuple.contains(&next) {
            continue;
        }
        tuple.push(next);
        chains(nb, summand, k, tuple, buf, acc);
        tuple.pop();
    }
}

/// Full enumeration of ordered distinct tuples; the reference oracle.
pub fn correlation_naive<W: Window + ?Sized>(points: &OrderedPoints, k: usize, f: &W) -> Result<CorrelationResult> {
    check_order(f, k)?;
    let n = points.len();
    let limit = if k >= 4 { NAIVE_MAX_N_ORDER4 } else { NAIVE_MAX_N };
    if n > limit {
        return Err(Error::SizeGuard(format!("naive enumeration of order {k} allows N <= {limit}, got {n}")));
    }
    check_n(f, n)?;
    let summand = Summand { f, theta: points.by_index(), n: n as f64 };
    let mut acc = Acc::default();
    let mut tuple = vec![0usize; k];
    let mut buf = vec![0.0; k - 1];
    enumerate_distinct(n, k, 0, &mut tuple, &mut |t| acc.add(summand.eval(t, &mut buf)));
    Ok(result(f, k, n, acc, Method::Naive))
}

fn enumerate_distinct(n: usize, k: usize, depth: usize, tuple: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
    if depth == k {
        visit(tuple);
        return;
    }
    for x in 0..n {
        if tuple[..depth].contains(&x) {
            continue;
        }
        tuple[depth] = x;
        enumerate_distinct(n, k, depth + 1, tuple, visit);
    }
}

pub fn correlation<W: Window + ?Sized>(points: &OrderedPoints, k: usize, f: &W, method: Method) -> Result<CorrelationResult> {
    match method {
        Method::Windowed => correlation_direct(points, k, f),
        Method::Naive => correlation_naive(points, k, f),
    }
}

/// `|R_k(f, N + K) - R_k(f, N)|` for two point sets from the same alpha.
pub fn stability_delta<W: Window + ?Sized>(
    points_n: &OrderedPoints,
    points_nk: &OrderedPoints,
    k: usize,
    f: &W,
) -> Result<f64> {
    if points_nk.len() < points_n.len() {
        return Err(Error::Domain("second point set must extend the first".into()));
    }
    let a = correlation_direct(points_n, k, f)?.value;
    let b = correlation_direct(points_nk, k, f)?.value;
    Ok((b - a).abs())
}

/// Checks `K <= N^(1 - delta)`.
pub fn check_stability_window(n: usize, extra: usize, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if extra as f64 > (n as f64).powf(1.0 - delta) {
        return Err(Error::Domain(format!("K = {extra} exceeds N^(1 - {delta}) for N = {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> OrderedPoints {
        OrderedPoints::new((0..n).map(|i| UnitFrac::from_ratio(i as u64, n as u64)).collect(), 127, "grid")
    }

    fn boxed(dim: usize, rho: f64) -> TestFunction {
        TestFunction::new(TestKind::Box, dim, rho).unwrap()
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap(0.5), 0.5);
        assert_eq!(wrap(-0.5), 0.5);
        assert!((wrap(0.995) + 0.005).abs() < 1e-12);
        assert_eq!(wrap(0.25), 0.25);
        assert!((wrap(1.75) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn periodize_examples() {
        let f = boxed(2, 1.0);
        assert_eq!(periodize(&f, 100, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(periodize(&f, 100, &[0.015, 0.015]).unwrap(), 0.0);
        assert_eq!(periodize(&f, 100, &[0.995, 0.0]).unwrap(), 1.0);
        let bump = TestFunction::new(TestKind::SmoothBump, 1, 1.0).unwrap();
        assert_eq!(periodize(&bump, 10, &[0.0]).unwrap(), 1.0);
        assert!(matches!(periodize(&f, 2, &[0.0, 0.0]), Err(Error::NTooSmall { n: 2, .. })));
    }

    #[test]
    fn grid_examples() {
        let g = grid(50);
        let r = correlation_direct(&g, 2, &boxed(1, 0.5)).unwrap();
        assert_eq!((r.value, r.tuple_count), (0.0, 0));
        let r = correlation_direct(&g, 2, &boxed(1, 1.5)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.tuple_count, 100);
        assert_eq!(r.method, Method::Windowed);
    }

    #[test]
    fn coincident_pair() {
        let pts = OrderedPoints::from_f64(&[0.3, 0.3]);
        // N = 2 needs rho < 1 for a single translate
        let f = boxed(1, 0.9);
        for m in [Method::Windowed, Method::Naive] {
            let r = correlation(&pts, 2, &f, m).unwrap();
            assert_eq!(r.value, 1.0);
        }
    }

    #[test]
    fn three_point_hand_example() {
        let pts = OrderedPoints::from_f64(&[0.0, 0.4, 0.8]);
        let f = boxed(1, 1.0);
        let naive = correlation_naive(&pts, 2, &f).unwrap();
        assert!((naive.value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(naive.tuple_count, 2);
        let direct = correlation_direct(&pts, 2, &f).unwrap();
        assert!((direct.value - naive.value).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let f = boxed(1, 1.0);
        assert!(matches!(correlation_naive(&grid(129), 2, &f), Err(Error::SizeGuard(_))));
        let f3 = boxed(3, 1.0);
        assert!(matches!(correlation_naive(&grid(49), 4, &f3), Err(Error::SizeGuard(_))));
        assert!(correlation_naive(&grid(48), 4, &f3).is_ok());
        let f4 = boxed(4, 1.0);
        assert!(matches!(correlation_direct(&grid(64), 5, &f4), Err(Error::OrderOutOfRange(5))));
        assert!(matches!(correlation_direct(&grid(64), 3, &f), Err(Error::Domain(_))));
    }

    #[test]
    fn order_four_matches_naive() {
        let pts = OrderedPoints::from_f64(&(0..40).map(|i| ((i * i) as f64 * 0.618_033_988_7).fract()).collect::<Vec<_>>());
        for kind in [TestKind::Box, TestKind::Triangle, TestKind::SmoothBump] {
            let f = TestFunction::new(kind, 3, 3.0).unwrap();
            let a = correlation_direct(&pts, 4, &f).unwrap();
            let b = correlation_naive(&pts, 4, &f).unwrap();
            assert!((a.value - b.value).abs() < 1e-9);
            assert_eq!(a.tuple_count, b.tuple_count);
        }
    }

    #[test]
    fn stability_examples() {
        let f = TestFunction::new(TestKind::SmoothBump, 1, 1.0).unwrap();
        let pts = OrderedPoints::from_f64(&(0..100).map(|i| (i as f64 * 0.754_877_666).fract()).collect::<Vec<_>>());
        assert_eq!(stability_delta(&pts, &pts, 2, &f).unwrap(), 0.0);
        assert_eq!(stability_delta(&grid(40), &grid(41), 2, &boxed(1, 0.5)).unwrap(), 0.0);
        assert!(stability_delta(&grid(41), &grid(40), 2, &boxed(1, 0.5)).is_err());
        assert!(check_stability_window(1000, 31, 0.3).is_ok());
        assert!(check_stability_window(1000, 200, 0.3).is_err());
    }
}
