//! Truncated Q-fractional noise in the Laplacian eigenbasis.
//!
//! With `U = V` and `f_i = e_i`, the covariance operator `Q` is diagonal with
//! eigenvalues `q(i) = c · i^{-ρ}`, and the truncated noise increment over a
//! step is `Σ_{i≤K} √q(i) Δβ^i e_i`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{aggregate_columns, FgnBlock, HurstParameter};

/// Margin below `gamma_max` used when certifying a regularity exponent.
pub const GAMMA_EPSILON: f64 = 1e-6;

/// Power-law spectrum `q(i) = amplitude · i^{-decay}` of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSpectrum {
    decay: f64,
    amplitude: f64,
}

impl QSpectrum {
    /// Amplitude zero switches the noise off.
    pub fn new(decay: f64, amplitude: f64) -> Result<Self> {
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::param("q_decay", format!("must be positive, got {decay}")));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::param("q_amplitude", format!("must be nonnegative, got {amplitude}")));
        }
        Ok(QSpectrum { decay, amplitude })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    #[inline]
    pub fn q(&self, i: usize) -> f64 {
        self.amplitude * (i as f64).powf(-self.decay)
    }

    #[inline]
    pub fn sqrt_q(&self, i: usize) -> f64 {
        self.q(i).sqrt()
    }

    /// Supremum (exclusive) of the `γ` with `Σ λ_i^{γ-1} q(i) < ∞`.
    pub fn gamma_max(&self) -> f64 {
        (self.decay + 1.0) / 2.0
    }

    pub fn admits_gamma(&self, gamma: f64) -> bool {
        gamma < self.gamma_max()
    }

    /// Largest certified exponent, `gamma_max - ε`.
    pub fn certified_gamma(&self) -> f64 {
        self.gamma_max() - GAMMA_EPSILON
    }

    /// `‖A^{(γ-1)/2}‖²_{L⁰₂} = Σ_i λ_i^{γ-1} q(i)`, or `None` when the series
    /// diverges.
    pub fn l02_norm_sq(&self, gamma: f64) -> Option<f64> {
        if !self.admits_gamma(gamma) {
            return None;
        }
        let exponent = self.decay - 2.0 * (gamma - 1.0);
        Some(self.amplitude * PI.powf(2.0 * (gamma - 1.0)) * zeta_tail(exponent, 0))
    }
}

/// `Σ_{i>k} i^{-p}` for `p > 1`: a direct sum of the first terms followed by
/// an Euler–Maclaurin remainder.
pub(crate) fn zeta_tail(p: f64, k: usize) -> f64 {
    const DIRECT: usize = 2000;
    let start = k + 1;
    let stop = start + DIRECT; // exclusive
    let mut direct = 0.0;
    // sum smallest terms first
    for i in (start..stop).rev() {
        direct += (i as f64).powf(-p);
    }
    let l = stop as f64;
    // Σ_{i≥L} i^{-p} ≈ ∫_L^∞ + f(L)/2 - f'(L)/12 + f'''(L)/720
    let integral = l.powf(1.0 - p) / (p - 1.0);
    let f = l.powf(-p);
    let d1 = -p * l.powf(-p - 1.0);
    let d3 = -p * (p + 1.0) * (p + 2.0) * l.powf(-p - 3.0);
    direct + integral + 0.5 * f - d1 / 12.0 + d3 / 720.0
}

/// `‖Q^{1/2}(Id - P_K)‖_{L₂(U, V̇^{-2H})} = sqrt(Σ_{i>K} λ_i^{-2H} q(i))`.
pub fn q_tail_norm(q: &QSpectrum, k: usize, hurst: HurstParameter) -> f64 {
    let two_h = hurst.two_h();
    let p = 2.0 * two_h + q.decay;
    (q.amplitude * PI.powf(-2.0 * two_h) * zeta_tail(p, k)).sqrt()
}

/// Noise coefficient increments: entry `(i, n)` is `√q(i+1) Δβ^{i+1}_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrements {
    dt: f64,
    increments: Array2<f64>,
}

impl NoiseIncrements {
    pub fn from_increments(dt: f64, increments: Array2<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        Ok(NoiseIncrements { dt, increments })
    }

    /// No noise: `k` zero rows.
    pub fn zeros(k: usize, num_steps: usize, dt: f64) -> Result<Self> {
        Self::from_increments(dt, Array2::zeros((k, num_steps)))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn num_modes(&self) -> usize {
        self.increments.nrows()
    }

    pub fn num_steps(&self) -> usize {
        self.increments.ncols()
    }

    pub fn increments(&self) -> &Array2<f64> {
        &self.increments
    }

    /// All mode increments of step `n` (0-based).
    pub fn step(&self, n: usize) -> ArrayView1<'_, f64> {
        self.increments.column(n)
    }
}

/// Scales fGn row `i` by `√q(i+1)`.
pub fn build_noise(q: &QSpectrum, block: &FgnBlock) -> NoiseIncrements {
    let mut inc = block.increments().clone();
    for (i, mut row) in inc.axis_iter_mut(Axis(0)).enumerate() {
        let s = q.sqrt_q(i + 1);
        row.iter_mut().for_each(|x| *x *= s);
    }
    NoiseIncrements {
        dt: block.dt(),
        increments: inc,
    }
}

/// The same noise path on a grid `factor` times coarser.
pub fn coarsen_noise(noise: &NoiseIncrements, factor: usize) -> Result<NoiseIncrements> {
    Ok(NoiseIncrements {
        dt: noise.dt * factor as f64,
        increments: aggregate_columns(&noise.increments, factor)?,
    })
}

/// Keeps the first `k_target` modes.
pub fn truncate_noise(noise: &NoiseIncrements, k_target: usize) -> Result<NoiseIncrements> {
    if k_target == 0 || k_target > noise.num_modes() {
        return Err(Error::Dimension(format!(
            "cannot truncate {} noise modes to {k_target}",
            noise.num_modes()
        )));
    }
    Ok(NoiseIncrements {
        dt: noise.dt,
        increments: noise.increments.slice(ndarray::s![..k_target, ..]).to_owned(),
    })
}
