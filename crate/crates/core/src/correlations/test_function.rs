use std::f64::consts::PI;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::quad::integrate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[serde(alias = "bump")]
    SmoothBump,
    Box,
    Triangle,
}

impl std::str::FromStr for TestKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" | "smooth_bump" => Ok(Self::SmoothBump),
            "box" => Ok(Self::Box),
            "triangle" => Ok(Self::Triangle),
            other => Err(Error::Parse(format!("unknown test function {other:?}"))),
        }
    }
}

/// Anything that can be summed by the correlation routines.
pub trait Window: Sync {
    fn dim(&self) -> usize;
    /// Radius of a sup-norm box containing the support.
    fn radius(&self) -> f64;
    fn eval(&self, y: &[f64]) -> f64;
    fn digest(&self) -> String;
}

/// A nonnegative, compactly supported function on R^dim, optionally scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub dim: usize,
    pub rho: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TestFunction {
    pub fn new(kind: TestKind, dim: usize, rho: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("test function needs dimension >= 1".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidSpec(format!("radius must be positive, got {rho}")));
        }
        Ok(Self { kind, dim, rho, scale: 1.0 })
    }

    /// Test function for the k-level correlation (dimension k - 1).
    pub fn for_order(kind: TestKind, k: usize, rho: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::OrderOutOfRange(k));
        }
        Self::new(kind, k - 1, rho)
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { scale: self.scale * c, ..self }
    }

    fn eval_unscaled(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        match self.kind {
            TestKind::Box => {
                if y.iter().all(|v| v.abs() <= self.rho) {
                    1.0
                } else {
                    0.0
                }
            }
            TestKind::Triangle => y.iter().map(|v| (1.0 - v.abs() / self.rho).max(0.0)).product(),
            TestKind::SmoothBump => {
                let r2: f64 = y.iter().map(|v| (v / self.rho).powi(2)).sum();
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Integral over R^dim.
    pub fn integral(&self) -> f64 {
        let d = self.dim as i32;
        self.scale
            * match self.kind {
                TestKind::Box => (2.0 * self.rho).powi(d),
                TestKind::Triangle => self.rho.powi(d),
                TestKind::SmoothBump => self.rho.powi(d) * unit_bump_integral(self.dim),
            }
    }

    pub fn has_fourier(&self) -> bool {
        self.kind != TestKind::SmoothBump
    }

    /// One-dimensional factor of the transform (box and triangle are
    /// products over coordinates).
    pub(crate) fn fourier_factor(&self, xi: f64) -> f64 {
        let rho = self.rho;
        match self.kind {
            TestKind::Box => {
                if xi == 0.0 {
                    2.0 * rho
                } else {
                    (2.0 * PI * rho * xi).sin() / (PI * xi)
                }
            }
            TestKind::Triangle => rho * sinc(rho * xi).powi(2),
            TestKind::SmoothBump => f64::NAN,
        }
    }

    /// Constants `(H, B, p)` with `|factor(xi)| <= min(H, B / |xi|^p)`.
    pub(crate) fn factor_decay(&self) -> (f64, f64, i32) {
        match self.kind {
            TestKind::Box => (2.0 * self.rho, 1.0 / PI, 1),
            TestKind::Triangle => (self.rho, 1.0 / (PI * PI * self.rho), 2),
            TestKind::SmoothBump => (f64::NAN, f64::NAN, 0),
        }
    }

    /// `f^(xi) = int f(y) e(-xi . y) dy`.
    pub fn fourier(&self, xi: &[f64]) -> Result<f64> {
        if !self.has_fourier() {
            return Err(Error::NoClosedFormTransform(format!("{:?}", self.kind)));
        }
        if xi.len() != self.dim {
            return Err(Error::Domain(format!("expected {} frequencies, got {}", self.dim, xi.len())));
        }
        Ok(self.scale * xi.iter().map(|&x| self.fourier_factor(x)).product::<f64>())
    }
}

impl Window for TestFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn radius(&self) -> f64 {
        self.rho
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.scale * self.eval_unscaled(y)
    }

    fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("test function serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Finite linear combination of test functions of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombination {
    terms: Vec<(f64, TestFunction)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, TestFunction)>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidSpec("empty linear combination".into()));
        };
        if terms.iter().any(|(_, f)| f.dim != first.1.dim) {
            return Err(Error::InvalidSpec("mixed dimensions in linear combination".into()));
        }
        Ok(Self { terms })
    }
}

impl Window for LinearCombination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim
    }

    fn radius(&self) -> f64 {
        self.terms.iter().map(|(_, f)| f.rho).fold(0.0, f64::max)
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.eval(y)).sum()
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (c, f) in &self.terms {
            h.update(c.to_le_bytes());
            h.update(f.digest().as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

static BUMP_CACHE: Mutex<Vec<(usize, f64)>> = Mutex::new(Vec::new());

/// Integral of the radius-1 bump over R^d, by radial quadrature.
pub fn unit_bump_integral(d: usize) -> f64 {
    if let Some(&(_, v)) = BUMP_CACHE.lock().unwrap().iter().find(|(k, _)| *k == d) {
        return v;
    }
    let radial = integrate(
        |r| {
            if r >= 1.0 {
                0.0
            } else {
                r.powi(d as i32 - 1) * (1.0 - 1.0 / (1.0 - r * r)).exp()
            }
        },
        0.0,
        1.0,
        1e-14,
    );
    let v = sphere_area(d) * radial;
    BUMP_CACHE.lock().unwrap().push((d, v));
    v
}

/// Surface area of the unit sphere in R^d, `2 pi^(d/2) / Gamma(d/2)`.
fn sphere_area(d: usize) -> f64 {
    // Gamma(d/2) from Gamma(1/2) = sqrt(pi) or Gamma(1) = 1
    let (mut g, mut x) = if d.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn closed_form_integrals() {
        let b = TestFunction::new(TestKind::Box, 2, 0.75).unwrap();
        assert_eq!(b.integral(), 2.25);
        let t = TestFunction::new(TestKind::Triangle, 3, 2.0).unwrap();
        assert_eq!(t.integral(), 8.0);
        assert_eq!(t.scaled(0.5).integral(), 4.0);
    }

    #[test]
    fn bump_integral_matches_cartesian_quadrature() {
        let f = TestFunction::new(TestKind::SmoothBump, 1, 1.0).unwrap();
        let direct = integrate(|y| f.eval(&[y]), -1.0, 1.0, 1e-13);
        assert!((f.integral() - direct).abs() < 1e-10);
        assert!((f.integral() - 0.443_993_816_168_079_4 * std::f64::consts::E).abs() < 1e-9);

        let g = TestFunction::new(TestKind::SmoothBump, 2, 1.5).unwrap();
        let direct = integrate(
            |x| integrate(|y| g.eval(&[x, y]), -1.5, 1.5, 1e-12),
            -1.5,
            1.5,
            1e-11,
        );
        assert!((g.integral() - direct).abs() < 1e-8, "{} vs {direct}", g.integral());
    }

    #[test]
    fn support_and_peak() {
        for kind in [TestKind::Box, TestKind::Triangle, TestKind::SmoothBump] {
            let f = TestFunction::new(kind, 2, 1.0).unwrap();
            assert_eq!(f.eval(&[0.0, 0.0]), 1.0);
            assert_eq!(f.eval(&[1.01, 0.0]), 0.0);
            assert_eq!(f.eval(&[0.0, -1.5]), 0.0);
        }
        let bump = TestFunction::new(TestKind::SmoothBump, 2, 1.0).unwrap();
        assert_eq!(bump.eval(&[0.8, 0.8]), 0.0);
        let boxed = TestFunction::new(TestKind::Box, 2, 1.0).unwrap();
        assert_eq!(boxed.eval(&[1.0, -1.0]), 1.0);
    }

    #[test]
    fn transforms_match_numeric_integrals() {
        for kind in [TestKind::Box, TestKind::Triangle] {
            let f = TestFunction::new(kind, 1, 0.8).unwrap();
            assert_eq!(f.fourier(&[0.0]).unwrap(), f.integral());
            for xi in [0.1, 0.37, 1.3] {
                // f is even, so the transform is a cosine integral
                let numeric = integrate(|y| f.eval(&[y]) * (2.0 * PI * xi * y).cos(), -0.8, 0.8, 1e-13);
                assert!((f.fourier(&[xi]).unwrap() - numeric).abs() < 1e-10, "{kind:?} {xi}");
            }
        }
        let bump = TestFunction::new(TestKind::SmoothBump, 1, 1.0).unwrap();
        assert!(matches!(bump.fourier(&[0.0]), Err(Error::NoClosedFormTransform(_))));
        let b = TestFunction::new(TestKind::Box, 1, 1.0).unwrap();
        assert!(b.fourier(&[0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn decay_constants_bound_transform() {
        for kind in [TestKind::Box, TestKind::Triangle] {
            let f = TestFunction::new(kind, 1, 1.3).unwrap();
            let (h, b, p) = f.factor_decay();
            for i in 1..2000 {
                let xi = i as f64 * 0.013;
                let v = f.fourier_factor(xi).abs();
                assert!(v <= h + 1e-12 && v <= b / xi.powi(p) + 1e-12);
            }
        }
    }

    #[test]
    fn invalid_and_parsing() {
        assert!(TestFunction::new(TestKind::Box, 0, 1.0).is_err());
        assert!(TestFunction::new(TestKind::Box, 1, 0.0).is_err());
        assert!(TestFunction::for_order(TestKind::Box, 1, 1.0).is_err());
        assert_eq!("bump".parse::<TestKind>().unwrap(), TestKind::SmoothBump);
        assert!("gauss".parse::<TestKind>().is_err());
    }

    #[test]
    fn digest_tracks_parameters() {
        let a = TestFunction::new(TestKind::Box, 1, 1.0).unwrap();
        let b = TestFunction::new(TestKind::Box, 1, 1.5).unwrap();
        assert_eq!(a.digest(), a.digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }
}
