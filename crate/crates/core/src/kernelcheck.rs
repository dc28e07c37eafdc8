//! Quadrature of the double integrals of the fBm kernel
//! `φ(u, v) = α_H |u − v|^{2H−2}` against exponential damping factors, and
//! log-log scaling fits of the results.
//!
//! The interval is cut into `n` uniform cells of width `w`. On each cell
//! pair the kernel is integrated exactly,
//! `∫_{cell j}∫_{cell k} φ = w^{2H} · ½(|d+1|^{2H} − 2|d|^{2H} + |d−1|^{2H})`
//! with `d = j − k`, so the diagonal singularity is never sampled. The
//! outer factors are taken at cell midpoints. Every value is checked against
//! the same quadrature at twice the resolution.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{second_difference, HurstParameter};
use crate::spectral::eigenvalue;
use crate::stats::least_squares;

/// Relative change allowed between resolutions `res` and `2 res`.
pub const RICHARDSON_TOLERANCE: f64 = 1e-6;
pub const MIN_RESOLUTION: usize = 64;
/// Largest cell count tried by the automatic variants.
pub const MAX_RESOLUTION: usize = 1 << 24;
/// The Hölder pair exponent used in the mode-damped decay check.
pub const HOELDER_PAIR_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    HoelderKernel,
    ModeDamped,
    IncrementBlock,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::HoelderKernel => "hoelder_kernel",
            KernelKind::ModeDamped => "mode_damped",
            KernelKind::IncrementBlock => "increment_block",
        }
    }
}

/// One converged quadrature. For `IncrementBlock`, `s` holds the step `h`
/// and `t` the end time `t_n`; `res` is the finer of the two resolutions
/// compared (cells per step for `IncrementBlock`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelIntegral {
    pub kind: KernelKind,
    pub hurst: f64,
    pub rho: f64,
    pub lambda: f64,
    pub s: f64,
    pub t: f64,
    pub value: f64,
    pub res: usize,
    pub coarse_value: f64,
}

impl KernelIntegral {
    pub fn relative_change(&self) -> f64 {
        ((self.value - self.coarse_value) / self.value).abs()
    }

    pub const CSV_HEADER: &'static str = "kind,H,rho,lambda,s,t,value,res";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.kind.name(),
            self.hurst,
            self.rho,
            self.lambda,
            self.s,
            self.t,
            self.value,
            self.res
        )
    }
}

fn check_common(lambda: f64, s: f64, t: f64, res: usize) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be nonnegative"));
    }
    if !(s < t && s.is_finite() && t.is_finite()) {
        return Err(Error::param("interval", "need s < t"));
    }
    if res < MIN_RESOLUTION {
        return Err(Error::param("res", format!("must be >= {MIN_RESOLUTION}")));
    }
    Ok(())
}

/// `Σ_{j,k} g_j g_k Φ(j − k)` for `g_j = exp(−λ (n − j − ½) w)`, using the
/// closed-form lag sums of the geometric weights.
fn exponential_form(p: f64, lambda: f64, w: f64, n: usize) -> f64 {
    let x = lambda * w;
    // C_d = Σ_i g_i g_{i+d} = r^{d+1} (1 − r^{2(n−d)}) / (1 − r²)
    let lag_sum = |d: usize| -> f64 {
        let m = (n - d) as f64;
        if x == 0.0 {
            m
        } else {
            (-(d as f64 + 1.0) * x).exp() * (-2.0 * x * m).exp_m1() / (-2.0 * x).exp_m1()
        }
    };
    let mut total = second_difference(p, 0) * lag_sum(0);
    for d in 1..n {
        if (d as f64 + 1.0) * x > 745.0 {
            break;
        }
        total += 2.0 * second_difference(p, d as i64) * lag_sum(d);
    }
    w.powf(p) * total
}

/// `Σ_{j,k} g_j g_k Φ(j − k)` for arbitrary weights; lag sums by FFT
/// autocorrelation above a small size.
fn general_form(p: f64, g: &[f64], w: f64, planner: &mut FftPlanner<f64>) -> f64 {
    let n = g.len();
    let lags: Vec<f64> = if n <= 256 {
        (0..n)
            .map(|d| g[..n - d].iter().zip(&g[d..]).map(|(a, b)| a * b).sum())
            .collect()
    } else {
        let len = (2 * n).next_power_of_two();
        let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
        let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(len);
        let mut buf: Vec<Complex<f64>> = g.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
        inv.process(&mut buf);
        buf[..n].iter().map(|c| c.re / len as f64).collect()
    };
    let mut total = second_difference(p, 0) * lags[0];
    for (d, c) in lags.iter().enumerate().skip(1) {
        total += 2.0 * second_difference(p, d as i64) * c;
    }
    w.powf(p) * total
}

fn richardson(coarse: f64, fine: f64, res: usize) -> Result<()> {
    let rel = if fine == 0.0 {
        (coarse - fine).abs()
    } else {
        ((coarse - fine) / fine).abs()
    };
    if rel <= RICHARDSON_TOLERANCE {
        Ok(())
    } else {
        Err(Error::QuadratureNotConverged {
            res,
            fine_res: 2 * res,
            coarse,
            fine,
            rel,
        })
    }
}

fn hoelder_value(hurst: HurstParameter, rho: f64, lambda: f64, len: f64, n: usize) -> f64 {
    let p = hurst.two_h();
    lambda.powf(2.0 * rho) * exponential_form(p, lambda, len / n as f64, n)
}

/// `∫_s^t∫_s^t λ^{2ρ} e^{−λ(t−u)} e^{−λ(t−v)} φ(u, v) du dv` with `res`
/// cells, checked against `2 res`.
pub fn quad_hoelder_kernel(
    hurst: HurstParameter,
    rho: f64,
    lambda: f64,
    s: f64,
    t: f64,
    res: usize,
) -> Result<KernelIntegral> {
    check_common(lambda, s, t, res)?;
    if !(0.0..=hurst.value()).contains(&rho) {
        return Err(Error::param("rho", "must lie in [0, H]"));
    }
    let coarse = hoelder_value(hurst, rho, lambda, t - s, res);
    let fine = hoelder_value(hurst, rho, lambda, t - s, 2 * res);
    richardson(coarse, fine, res)?;
    Ok(KernelIntegral {
        kind: KernelKind::HoelderKernel,
        hurst: hurst.value(),
        rho,
        lambda,
        s,
        t,
        value: fine,
        res: 2 * res,
        coarse_value: coarse,
    })
}

/// `∫_s^t∫_s^t e^{−λ(t−u)} e^{−λ(t−v)} φ(u, v) du dv`.
pub fn quad_mode_damped(hurst: HurstParameter, lambda: f64, s: f64, t: f64, res: usize) -> Result<KernelIntegral> {
    let mut k = quad_hoelder_kernel(hurst, 0.0, lambda, s, t, res)?;
    k.kind = KernelKind::ModeDamped;
    Ok(k)
}

/// Number of trailing steps whose damping `e^{−λ(t_n − t_{b+1})}` is not
/// negligible.
fn active_blocks(lambda: f64, h: f64, blocks: usize) -> usize {
    if lambda == 0.0 {
        return blocks;
    }
    let keep = (40.0 / (lambda * h)).floor() as usize + 1;
    keep.min(blocks)
}

fn increment_value(
    hurst: HurstParameter,
    lambda: f64,
    h: f64,
    blocks: usize,
    per_block: usize,
    planner: &mut FftPlanner<f64>,
) -> f64 {
    let w = h / per_block as f64;
    let active = active_blocks(lambda, h, blocks);
    // G(σ) = ∫_σ^{⌈σ⌉} e^{−λ(t_n − s)} ds at cell midpoints.
    let inner: Vec<f64> = (0..per_block)
        .map(|p| {
            let rem = (per_block as f64 - p as f64 - 0.5) * w;
            if lambda == 0.0 {
                rem
            } else {
                -(-lambda * rem).exp_m1() / lambda
            }
        })
        .collect();
    let mut g = Vec::with_capacity(active * per_block);
    for b in (0..active).rev() {
        let outer = (-lambda * h * b as f64).exp();
        g.extend(inner.iter().map(|v| outer * v));
    }
    general_form(hurst.two_h(), &g, w, planner)
}

/// `∫_0^{t_n}∫_0^{t_n} e^{−λ(t_n−s_1)} e^{−λ(t_n−s_2)}
///  ∫_{⌊s_1⌋}^{s_1}∫_{⌊s_2⌋}^{s_2} φ(σ_1, σ_2) dσ_2 dσ_1 ds_1 ds_2`,
/// where `⌊s⌋` is the grid point of step `h` below `s`; `res` cells per step.
pub fn quad_increment_block(
    hurst: HurstParameter,
    lambda: f64,
    h: f64,
    t_n: f64,
    res: usize,
) -> Result<KernelIntegral> {
    check_common(lambda, 0.0, t_n, res)?;
    let blocks = (t_n / h).round();
    if !(h > 0.0) || blocks < 1.0 || ((blocks * h - t_n) / t_n).abs() > 1e-12 {
        return Err(Error::param("h", "must divide t_n"));
    }
    let blocks = blocks as usize;
    let mut planner = FftPlanner::new();
    let coarse = increment_value(hurst, lambda, h, blocks, res, &mut planner);
    let fine = increment_value(hurst, lambda, h, blocks, 2 * res, &mut planner);
    richardson(coarse, fine, res)?;
    Ok(KernelIntegral {
        kind: KernelKind::IncrementBlock,
        hurst: hurst.value(),
        rho: 0.0,
        lambda,
        s: h,
        t: t_n,
        value: fine,
        res: 2 * res,
        coarse_value: coarse,
    })
}

/// Doubles `res` from `start` until the Richardson check passes.
fn auto<F>(start: usize, mut eval: F) -> Result<KernelIntegral>
where
    F: FnMut(usize) -> Result<KernelIntegral>,
{
    let mut res = start.max(MIN_RESOLUTION).next_power_of_two();
    loop {
        match eval(res) {
            Err(e @ Error::QuadratureNotConverged { .. }) => {
                if 2 * res > MAX_RESOLUTION {
                    return Err(e);
                }
                res *= 2;
            }
            other => return other,
        }
    }
}

fn start_res(lambda: f64, len: f64) -> usize {
    (lambda * len * 8.0).ceil().min(MAX_RESOLUTION as f64) as usize
}

pub fn hoelder_kernel_auto(hurst: HurstParameter, rho: f64, lambda: f64, s: f64, t: f64) -> Result<KernelIntegral> {
    auto(start_res(lambda, t - s), |r| quad_hoelder_kernel(hurst, rho, lambda, s, t, r))
}

pub fn mode_damped_auto(hurst: HurstParameter, lambda: f64, s: f64, t: f64) -> Result<KernelIntegral> {
    auto(start_res(lambda, t - s), |r| quad_mode_damped(hurst, lambda, s, t, r))
}

pub fn increment_block_auto(hurst: HurstParameter, lambda: f64, h: f64, t_n: f64) -> Result<KernelIntegral> {
    auto(start_res(lambda, h), |r| quad_increment_block(hurst, lambda, h, t_n, r))
}

/// A log-log fit over a family of quadratures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<KernelIntegral>,
}

fn fit(points: Vec<KernelIntegral>, abscissa: impl Fn(&KernelIntegral) -> f64) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    let x: Vec<f64> = points.iter().map(|k| abscissa(k).ln()).collect();
    let y: Vec<f64> = points.iter().map(|k| k.value.ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&x, &y);
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points,
    })
}

/// Largest `λ_i L` over which the supremum in [`hoelder_sup`] searches.
pub const HOELDER_SEARCH_LIMIT: f64 = 400.0;

/// `sup_i` of the single-mode kernel over `[0, len]`, searching modes with
/// `λ_i len ≤ 400`. The mode profile is unimodal, so the search stops once
/// values fall below half the running maximum. Returns the maximizing
/// quadrature.
pub fn hoelder_sup(hurst: HurstParameter, rho: f64, len: f64) -> Result<KernelIntegral> {
    let mut best: Option<KernelIntegral> = None;
    let mut i = 1;
    loop {
        let lambda = eigenvalue(i);
        if i > 1 && lambda * len > HOELDER_SEARCH_LIMIT {
            break;
        }
        let k = hoelder_kernel_auto(hurst, rho, lambda, 0.0, len)?;
        match best {
            Some(b) if k.value < 0.5 * b.value => break,
            Some(b) if k.value <= b.value => {}
            _ => best = Some(k),
        }
        i += 1;
    }
    Ok(best.expect("at least one mode"))
}

/// Exponent of `sup_i λ_i^{2ρ} ∫∫ …` against the interval length.
pub fn hoelder_exponent_fit(hurst: HurstParameter, rho: f64, lengths: &[f64]) -> Result<ScalingFit> {
    let points = lengths
        .iter()
        .map(|&l| hoelder_sup(hurst, rho, l))
        .collect::<Result<Vec<_>>>()?;
    fit(points, |k| k.t - k.s)
}

/// Decay exponent in `λ` of the mode-damped kernel over `[0, 1]`.
pub fn mode_damped_decay_fit(hurst: HurstParameter, modes: &[usize]) -> Result<ScalingFit> {
    let points = modes
        .iter()
        .map(|&i| mode_damped_auto(hurst, eigenvalue(i), 0.0, 1.0))
        .collect::<Result<Vec<_>>>()?;
    fit(points, |k| k.lambda)
}

/// The bound checked by [`mode_damped_decay_fit`]: `−(2H − ε) + 0.1`.
pub fn mode_damped_slope_bound(hurst: HurstParameter) -> f64 {
    -(1.0 + hurst.two_h() - 1.0 - HOELDER_PAIR_EPSILON) + 0.1
}

/// Exponent in `h` of the increment block at fixed `λ` and `t_n`.
pub fn increment_block_h_fit(hurst: HurstParameter, lambda: f64, t_n: f64, steps: &[f64]) -> Result<ScalingFit> {
    let points = steps
        .iter()
        .map(|&h| increment_block_auto(hurst, lambda, h, t_n))
        .collect::<Result<Vec<_>>>()?;
    fit(points, |k| k.s)
}

/// Exponent in `λ` of the increment block at fixed `h` and `t_n`.
pub fn increment_block_lambda_fit(hurst: HurstParameter, h: f64, t_n: f64, modes: &[usize]) -> Result<ScalingFit> {
    let points = modes
        .iter()
        .map(|&i| increment_block_auto(hurst, eigenvalue(i), h, t_n))
        .collect::<Result<Vec<_>>>()?;
    fit(points, |k| k.lambda)
}

/// Lengths `2^{-6} … 2^{-14}` used by the default Hölder audit; with
/// `λ_1 L ≤ 0.16` the lowest mode is in its small-interval regime.
pub fn default_lengths() -> Vec<f64> {
    (6..=14).map(|k| 0.5f64.powi(k)).collect()
}

/// The default audit grid at one Hurst index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAudit {
    pub hurst: f64,
    /// `(ρ, fit)` for `ρ ∈ {0, H/2}` over [`default_lengths`].
    pub hoelder: Vec<(f64, ScalingFit)>,
    /// `λ_1 … λ_32` over `[0, 1]`.
    pub mode_damped: ScalingFit,
    pub mode_damped_bound: f64,
    /// `h ∈ {1/8, 1/16, 1/32}` at `λ_1`, `t_n = 1`.
    pub block_h: ScalingFit,
    /// `λ_1 … λ_16` at `h = 1/32`, `t_n = 1`.
    pub block_lambda: ScalingFit,
}

impl KernelAudit {
    pub fn run(hurst: HurstParameter) -> Result<Self> {
        let hoelder = [0.0, hurst.value() / 2.0]
            .iter()
            .map(|&rho| Ok((rho, hoelder_exponent_fit(hurst, rho, &default_lengths())?)))
            .collect::<Result<Vec<_>>>()?;
        let modes32: Vec<usize> = (1..=32).collect();
        let modes16: Vec<usize> = (1..=16).collect();
        Ok(KernelAudit {
            hurst: hurst.value(),
            hoelder,
            mode_damped: mode_damped_decay_fit(hurst, &modes32)?,
            mode_damped_bound: mode_damped_slope_bound(hurst),
            block_h: increment_block_h_fit(hurst, eigenvalue(1), 1.0, &[0.125, 0.0625, 0.03125])?,
            block_lambda: increment_block_lambda_fit(hurst, 0.03125, 1.0, &modes16)?,
        })
    }

    /// Every quadrature of the audit, in grid order.
    pub fn rows(&self) -> Vec<KernelIntegral> {
        let mut rows: Vec<KernelIntegral> = self.hoelder.iter().flat_map(|(_, f)| f.points.iter().copied()).collect();
        rows.extend(&self.mode_damped.points);
        rows.extend(&self.block_h.points);
        rows.extend(&self.block_lambda.points);
        rows
    }

    pub fn max_relative_change(&self) -> f64 {
        self.rows().iter().map(|k| k.relative_change()).fold(0.0, f64::max)
    }
}
