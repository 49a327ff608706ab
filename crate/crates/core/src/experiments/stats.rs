//! Run-fraction confidence intervals, power-law fits, and order statistics
//! that respect censoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Rounds;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Point estimate and 95% Wilson score interval for `successes / trials`.
pub fn estimate_whp(successes: u64, trials: u64) -> Result<Proportion> {
    if trials == 0 || successes > trials {
        return Err(Error::Precondition(format!(
            "need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(Proportion {
        successes,
        trials,
        fraction: p,
        lower: (center - half).clamp(0.0, 1.0).min(p),
        upper: (center + half).clamp(0.0, 1.0).max(p),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Largest `|fitted / observed - 1|` over the points.
    pub residual: f64,
}

/// Least-squares fit of `ln value = intercept + exponent * ln n`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Fit(format!("non-positive point ({x}, {y})")));
    }
    let k = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all n values are equal".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = logs
        .iter()
        .map(|&(lx, ly)| ((intercept + exponent * lx - ly).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerFit {
        exponent,
        intercept,
        residual,
    })
}

/// Nearest-rank quantile of a non-empty slice (sorted internally).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[rank(sorted.len(), q)])
}

fn rank(len: usize, q: f64) -> usize {
    ((q.clamp(0.0, 1.0) * len as f64).ceil() as usize).clamp(1, len) - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        let q = |p| quantile(values, p);
        Some(Quantiles {
            min: q(0.0)?,
            q10: q(0.10)?,
            q25: q(0.25)?,
            median: q(0.5)?,
            q75: q(0.75)?,
            q90: q(0.90)?,
            max: q(1.0)?,
        })
    }
}

/// Order statistics of durations where censored values rank above every
/// observed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub runs: u64,
    pub observed: Proportion,
    pub q10: Rounds,
    pub median: Rounds,
    pub q90: Rounds,
}

impl DurationStats {
    pub fn of(values: &[Rounds]) -> Option<DurationStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by_key(|r| (r.is_censored(), r.value()));
        let at = |q| sorted[rank(sorted.len(), q)];
        let observed = values.iter().filter(|r| !r.is_censored()).count() as u64;
        Some(DurationStats {
            runs: values.len() as u64,
            observed: estimate_whp(observed, values.len() as u64).ok()?,
            q10: at(0.10),
            median: at(0.5),
            q90: at(0.90),
        })
    }
}
