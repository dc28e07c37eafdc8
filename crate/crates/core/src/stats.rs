//! Reductions and log-log regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, not on how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return MeanEstimate { mean, stderr: f64::NAN };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    MeanEstimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Levels whose error is below this multiple of its standard error are
/// excluded from the fit.
pub const CENSOR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub resolution: f64,
    pub error: f64,
    pub stderr: f64,
}

impl From<(f64, f64, f64)> for FitPoint {
    fn from((resolution, error, stderr): (f64, f64, f64)) -> Self {
        FitPoint {
            resolution,
            error,
            stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Indices of the input points excluded as noise-floor censored.
    pub censored: Vec<usize>,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Unweighted fit of `log error` against `log resolution`. Points with
/// nonpositive error or with `error < 10 · stderr` are censored.
pub fn fit_order(points: &[FitPoint]) -> Result<OrderFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut censored = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let below_floor = p.stderr.is_finite() && p.error < CENSOR_FACTOR * p.stderr;
        if !(p.error > 0.0 && p.resolution > 0.0) || below_floor {
            censored.push(i);
        } else {
            x.push(p.resolution.ln());
            y.push(p.error.ln());
        }
    }
    if x.len() < 2 {
        return Err(Error::InsufficientPoints(x.len()));
    }
    let (slope, intercept, r_squared) = least_squares(&x, &y);
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        censored,
    })
}
