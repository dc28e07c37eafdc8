//! Fractional Gaussian noise: the increments of fractional Brownian motion on
//! a uniform grid.
//!
//! Two samplers share one law. [`CholeskySampler`] factors the dense
//! Toeplitz covariance and serves as the slow reference; [`CirculantSampler`]
//! embeds the covariance in a circulant matrix of size `2(n-1)` and samples
//! through the FFT. For `H > 1/2` that embedding is nonnegative definite.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{GaussianStream, Seed};

/// Hurst index restricted to the long-memory range `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.5 && value < 1.0 {
            Ok(HurstParameter(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.0
    }

    /// `α_H = H(2H - 1)`, the normalization of the kernel `α_H |u - v|^{2H-2}`.
    #[inline]
    pub fn alpha(&self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    #[inline]
    pub fn two_h(&self) -> f64 {
        2.0 * self.0
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        HurstParameter::new(v)
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

/// Second difference `½(|k+1|^p - 2|k|^p + |k-1|^p)` of `|k|^p`, evaluated
/// through its binomial series for large `|k|` where the direct form cancels.
pub(crate) fn second_difference(p: f64, lag: i64) -> f64 {
    let k = lag.unsigned_abs() as f64;
    if k < 8.0 {
        return 0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p));
    }
    // |k|^p * sum_{j>=1} C(p, 2j) k^{-2j}
    let x2 = 1.0 / (k * k);
    let mut binom = 1.0;
    let mut xpow = 1.0;
    let mut sum = 0.0;
    for j in 1..=24 {
        let m = 2 * j;
        binom *= (p - (m as f64 - 2.0)) / (m as f64 - 1.0);
        binom *= (p - (m as f64 - 1.0)) / m as f64;
        xpow *= x2;
        let term = binom * xpow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    k.powf(p) * sum
}

/// Autocovariance of fGn increments over steps of length `dt` at `lag`.
pub fn fgn_autocovariance(hurst: HurstParameter, dt: f64, lag: i64) -> f64 {
    let p = hurst.two_h();
    dt.powf(p) * second_difference(p, lag)
}

/// Covariance `E[β_t β_s]` of fractional Brownian motion.
pub fn fbm_covariance(hurst: HurstParameter, t: f64, s: f64) -> f64 {
    let p = hurst.two_h();
    0.5 * (t.powf(p) + s.powf(p) - (t - s).abs().powf(p))
}

/// `num_streams` independent fGn rows of `num_steps` increments each.
#[derive(Debug, Clone, PartialEq)]
pub struct FgnBlock {
    hurst: HurstParameter,
    dt: f64,
    increments: Array2<f64>,
}

impl FgnBlock {
    /// Wraps an existing increment matrix (rows = streams, columns = steps).
    pub fn from_increments(hurst: HurstParameter, dt: f64, increments: Array2<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if increments.is_empty() {
            return Err(Error::Dimension("fGn block must be non-empty".into()));
        }
        Ok(FgnBlock {
            hurst,
            dt,
            increments,
        })
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_steps(&self) -> usize {
        self.increments.ncols()
    }

    pub fn num_streams(&self) -> usize {
        self.increments.nrows()
    }

    pub fn increments(&self) -> &Array2<f64> {
        &self.increments
    }

    pub fn row(&self, stream: usize) -> ArrayView1<'_, f64> {
        self.increments.row(stream)
    }

    pub fn into_increments(self) -> Array2<f64> {
        self.increments
    }
}

fn check_grid(dt: f64, num_steps: usize, num_streams: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive and finite, got {dt}")));
    }
    if num_steps == 0 {
        return Err(Error::param("num_steps", "must be positive"));
    }
    if num_streams == 0 {
        return Err(Error::param("num_streams", "must be positive"));
    }
    Ok(())
}

fn sample_rows(
    num_streams: usize,
    num_steps: usize,
    seed: Seed,
    mut fill: impl FnMut(&mut GaussianStream, &mut [f64]),
) -> Array2<f64> {
    let mut out = Array2::zeros((num_streams, num_steps));
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let mut stream = seed.stream(i as u64);
        let slice = row.as_slice_mut().expect("standard layout");
        fill(&mut stream, slice);
    }
    out
}

/// Soft cap on the dense oracle's grid length.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

/// Exact sampler through the Cholesky factor of the Toeplitz covariance.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    hurst: HurstParameter,
    dt: f64,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(hurst: HurstParameter, dt: f64, num_steps: usize) -> Result<Self> {
        check_grid(dt, num_steps, 1)?;
        if num_steps > CHOLESKY_MAX_STEPS {
            return Err(Error::param(
                "num_steps",
                format!("{num_steps} exceeds the Cholesky oracle cap {CHOLESKY_MAX_STEPS}"),
            ));
        }
        let n = num_steps;
        let gamma: Vec<f64> = (0..n as i64).map(|k| fgn_autocovariance(hurst, dt, k)).collect();
        let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
        let factor = cov
            .cholesky()
            .ok_or(Error::NotPositiveDefinite { n })?
            .unpack();
        Ok(CholeskySampler { hurst, dt, factor })
    }

    pub fn num_steps(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample_row(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        let n = self.num_steps();
        let mut z = DVector::zeros(n);
        stream.fill_normal(z.as_mut_slice());
        let x = &self.factor * z;
        out.copy_from_slice(x.as_slice());
    }

    pub fn sample_block(&self, num_streams: usize, seed: Seed) -> Result<FgnBlock> {
        check_grid(self.dt, self.num_steps(), num_streams)?;
        let inc = sample_rows(num_streams, self.num_steps(), seed, |s, row| {
            self.sample_row(s, row)
        });
        FgnBlock::from_increments(self.hurst, self.dt, inc)
    }
}

/// Relative tolerance below which negative embedding eigenvalues are clipped.
pub const EMBEDDING_TOLERANCE: f64 = 1e-10;

/// Circulant-embedding (Davies–Harte) sampler.
#[derive(Clone)]
pub struct CirculantSampler {
    hurst: HurstParameter,
    dt: f64,
    num_steps: usize,
    eigenvalues: Vec<f64>,
    // sqrt(λ_k / m), the per-frequency amplitude
    amplitude: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("hurst", &self.hurst)
            .field("dt", &self.dt)
            .field("num_steps", &self.num_steps)
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(hurst: HurstParameter, dt: f64, num_steps: usize) -> Result<Self> {
        check_grid(dt, num_steps, 1)?;
        let n = num_steps;
        if n == 1 {
            let v = fgn_autocovariance(hurst, dt, 0);
            return Ok(CirculantSampler {
                hurst,
                dt,
                num_steps,
                eigenvalues: vec![v],
                amplitude: vec![v.sqrt()],
                fft: None,
            });
        }
        let m = 2 * (n - 1);
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j < n { j } else { m - j };
                Complex::new(fgn_autocovariance(hurst, dt, lag as i64), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let mut eigenvalues: Vec<f64> = row.iter().map(|c| c.re).collect();
        let max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        for (index, ev) in eigenvalues.iter_mut().enumerate() {
            if *ev < 0.0 {
                if *ev < -EMBEDDING_TOLERANCE * max {
                    return Err(Error::EmbeddingFailure {
                        index,
                        value: *ev,
                        max,
                    });
                }
                *ev = 0.0;
            }
        }
        let amplitude = eigenvalues.iter().map(|&ev| (ev / m as f64).sqrt()).collect();
        Ok(CirculantSampler {
            hurst,
            dt,
            num_steps,
            eigenvalues,
            amplitude,
            fft: Some(fft),
        })
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hurst(&self) -> HurstParameter {
        self.hurst
    }

    /// Eigenvalues of the circulant embedding after clipping.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// One row: `Re(FFT(sqrt(λ/m) · (Z₁ + iZ₂)))[..n]`.
    pub fn sample_row(&self, stream: &mut GaussianStream, scratch: &mut Vec<Complex<f64>>, out: &mut [f64]) {
        let Some(fft) = &self.fft else {
            out[0] = self.amplitude[0] * stream.next_normal();
            return;
        };
        scratch.clear();
        scratch.extend(self.amplitude.iter().map(|&a| {
            let re = stream.next_normal();
            let im = stream.next_normal();
            Complex::new(a * re, a * im)
        }));
        fft.process(scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = c.re;
        }
    }

    pub fn sample_block(&self, num_streams: usize, seed: Seed) -> Result<FgnBlock> {
        check_grid(self.dt, self.num_steps, num_streams)?;
        let mut scratch = Vec::with_capacity(self.amplitude.len());
        let inc = sample_rows(num_streams, self.num_steps, seed, |s, row| {
            self.sample_row(s, &mut scratch, row)
        });
        FgnBlock::from_increments(self.hurst, self.dt, inc)
    }
}

/// Exact sampler through a dense Cholesky factor.
pub fn sample_fgn_cholesky(
    hurst: HurstParameter,
    dt: f64,
    num_steps: usize,
    num_streams: usize,
    seed: impl Into<Seed>,
) -> Result<FgnBlock> {
    CholeskySampler::new(hurst, dt, num_steps)?.sample_block(num_streams, seed.into())
}

/// Fast sampler through circulant embedding.
pub fn sample_fgn_circulant(
    hurst: HurstParameter,
    dt: f64,
    num_steps: usize,
    num_streams: usize,
    seed: impl Into<Seed>,
) -> Result<FgnBlock> {
    CirculantSampler::new(hurst, dt, num_steps)?.sample_block(num_streams, seed.into())
}

/// Sums `factor` consecutive increments: the same paths seen on a grid
/// `factor` times coarser.
pub fn aggregate_increments(block: &FgnBlock, factor: usize) -> Result<FgnBlock> {
    let increments = aggregate_columns(block.increments(), factor)?;
    FgnBlock::from_increments(block.hurst, block.dt * factor as f64, increments)
}

pub(crate) fn aggregate_columns(data: &Array2<f64>, factor: usize) -> Result<Array2<f64>> {
    let n = data.ncols();
    if factor == 0 || n % factor != 0 {
        return Err(Error::Dimension(format!(
            "aggregation factor {factor} does not divide {n} steps"
        )));
    }
    if factor == 1 {
        return Ok(data.clone());
    }
    let coarse = n / factor;
    let mut out = Array2::zeros((data.nrows(), coarse));
    for (src, mut dst) in data.outer_iter().zip(out.outer_iter_mut()) {
        for (j, d) in dst.iter_mut().enumerate() {
            *d = src.slice(ndarray::s![j * factor..(j + 1) * factor]).sum();
        }
    }
    Ok(out)
}
