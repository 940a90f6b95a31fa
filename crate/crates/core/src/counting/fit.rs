use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Least-squares fit of `count ~ A N^p (log N)^q` with `q` held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub p: f64,
    pub log_a: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    pub q: f64,
    pub points_used: usize,
    /// Fewer than two nonzero counts; `p` and `log_a` are NaN.
    pub degenerate: bool,
}

pub fn fit_growth(points: &[(u64, u128)], q: f64) -> Result<GrowthFit> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("growth fit needs at least 4 points, got {}", points.len())));
    }
    if let Some(&(n, _)) = points.iter().find(|(n, _)| *n < 2) {
        return Err(Error::Domain(format!("growth fit needs N >= 2, got {n}")));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|&(n, c)| {
            let ln = (n as f64).ln();
            (ln, (c as f64).ln() - q * ln.ln())
        })
        .collect();
    if xy.len() < 2 {
        return Ok(GrowthFit {
            p: f64::NAN,
            log_a: f64::NAN,
            residual: f64::NAN,
            q,
            points_used: xy.len(),
            degenerate: true,
        });
    }
    let line = fit_line(&xy).ok_or_else(|| Error::Domain("growth fit needs at least two distinct N".into()))?;
    Ok(GrowthFit { p: line.slope, log_a: line.intercept, residual: line.residual, q, points_used: xy.len(), degenerate: false })
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual.
    pub residual: f64,
}

/// `None` when fewer than two distinct abscissae are given.
pub fn fit_line(xy: &[(f64, f64)]) -> Option<LineFit> {
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if xy.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xy.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    Some(LineFit { slope, intercept, residual })
}

impl GrowthFit {
    /// Fitted model value at `n`.
    pub fn model(&self, n: u64) -> f64 {
        let ln = (n as f64).ln();
        (self.log_a + self.p * ln + self.q * ln.ln()).exp()
    }
}
