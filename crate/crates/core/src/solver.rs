//! Exponential integrator for the spectral Galerkin system.
//!
//! One step maps `X ↦ S_h (X + h P_M F(X) + P_M ΔW)`, where `S_h` multiplies
//! mode `i` by `e^{-λ_i h}`. Noise modes above `M` are discarded.

use std::f64::consts::{PI, SQRT_2};
use std::io::{self, Write};

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseIncrements;
use crate::spectral::{project, DirichletSpectrum, Nonlinearity, SpectralState, TransformScratch};

/// Discretization parameters: `M` Galerkin modes, `N` steps over `[0, T]`,
/// `K` noise modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub modes: usize,
    pub steps: usize,
    pub noise_modes: usize,
    pub t_end: f64,
}

impl SchemeConfig {
    pub fn new(modes: usize, steps: usize, noise_modes: usize, t_end: f64) -> Result<Self> {
        let c = SchemeConfig {
            modes,
            steps,
            noise_modes,
            t_end,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::param("modes", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be positive"));
        }
        if self.noise_modes == 0 {
            return Err(Error::param("noise_modes", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "must be positive"));
        }
        Ok(())
    }

    /// Step size `h = T/N`.
    pub fn h(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// `t_n = n T / N`.
    pub fn time(&self, n: usize) -> f64 {
        self.t_end * n as f64 / self.steps as f64
    }
}

/// States at `t_0, …, t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    config: SchemeConfig,
    states: Vec<SpectralState>,
}

impl TrajectoryRecord {
    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn states(&self) -> &[SpectralState] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &SpectralState {
        &self.states[n]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &SpectralState {
        self.states.last().expect("trajectory holds t_0")
    }

    /// CSV with header `time,mode,coefficient`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,mode,coefficient")?;
        for (n, s) in self.states.iter().enumerate() {
            let t = self.config.time(n);
            for (i, c) in s.coeffs().iter().enumerate() {
                writeln!(w, "{t:.16e},{},{c:.16e}", i + 1)?;
            }
        }
        Ok(())
    }
}

/// The fully discrete scheme for a fixed configuration and nonlinearity.
#[derive(Debug, Clone)]
pub struct Scheme {
    config: SchemeConfig,
    spectrum: DirichletSpectrum,
    decay: Vec<f64>,
    nonlinearity: Nonlinearity,
}

#[derive(Default)]
struct StepWork {
    drift: Vec<f64>,
    transform: TransformScratch,
}

impl Scheme {
    pub fn new(config: SchemeConfig, nonlinearity: Nonlinearity) -> Result<Self> {
        config.validate()?;
        let spectrum = DirichletSpectrum::new(config.modes)?;
        let h = config.h();
        let decay = spectrum.eigenvalues().iter().map(|l| (-l * h).exp()).collect();
        Ok(Scheme {
            config,
            spectrum,
            decay,
            nonlinearity,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn spectrum(&self) -> &DirichletSpectrum {
        &self.spectrum
    }

    /// One step from `state` driven by the increments of all noise modes over
    /// that step.
    pub fn step(&self, state: &SpectralState, increment: ArrayView1<'_, f64>) -> Result<SpectralState> {
        if state.len() != self.config.modes {
            return Err(Error::Dimension(format!(
                "state has {} modes, scheme has {}",
                state.len(),
                self.config.modes
            )));
        }
        let mut next = state.clone();
        let mut work = StepWork::default();
        self.step_in_place(next.coeffs_mut(), increment, &mut work);
        Ok(next)
    }

    fn step_in_place(&self, coeffs: &mut [f64], increment: ArrayView1<'_, f64>, work: &mut StepWork) {
        let h = self.config.h();
        if !self.nonlinearity.is_zero() {
            work.drift.resize(coeffs.len(), 0.0);
            self.spectrum
                .nemytskii_into(coeffs, &self.nonlinearity, &mut work.drift, &mut work.transform);
            for (c, d) in coeffs.iter_mut().zip(&work.drift) {
                *c += h * d;
            }
        }
        for (c, dw) in coeffs.iter_mut().zip(increment.iter()) {
            *c += dw;
        }
        for (c, e) in coeffs.iter_mut().zip(&self.decay) {
            *c *= e;
        }
    }

    /// Iterates the scheme from `P_M u0` over all `N` steps of `noise`.
    pub fn run(&self, noise: &NoiseIncrements, u0: &SpectralState) -> Result<TrajectoryRecord> {
        let n = self.config.steps;
        if noise.num_steps() != n {
            return Err(Error::Dimension(format!(
                "noise has {} steps, scheme expects {n}",
                noise.num_steps()
            )));
        }
        let h = self.config.h();
        if (noise.dt() - h).abs() > 1e-12 * h {
            return Err(Error::Dimension(format!("noise step {} differs from h = {h}", noise.dt())));
        }
        let mut states = Vec::with_capacity(n + 1);
        let mut current = project(u0, self.config.modes);
        let mut work = StepWork::default();
        states.push(current.clone());
        for j in 0..n {
            self.step_in_place(current.coeffs_mut(), noise.step(j), &mut work);
            states.push(current.clone());
        }
        Ok(TrajectoryRecord {
            config: self.config,
            states,
        })
    }
}

/// `⟨1, e_i⟩ = √2 (1 - (-1)^i) / (iπ)`.
pub fn constant_mode_coefficient(i: usize) -> f64 {
    if i % 2 == 1 {
        2.0 * SQRT_2 / (i as f64 * PI)
    } else {
        0.0
    }
}

/// Mild solution of the Galerkin system with `f(u) = a u + b`, evaluated mode
/// by mode: closed-form deterministic part plus a left-point Riemann–Stieltjes
/// sum of the stochastic convolution on the fine grid of `noise_fine`.
///
/// Returns the states at the `scheme_steps + 1` times `n T / scheme_steps`,
/// where `T` is the horizon of `noise_fine`.
pub fn oracle_linear(
    modes: usize,
    a: f64,
    b: f64,
    u0: &SpectralState,
    noise_fine: &NoiseIncrements,
    scheme_steps: usize,
) -> Result<Vec<SpectralState>> {
    let lambda1 = crate::spectral::eigenvalue(1);
    if !(a < lambda1) {
        return Err(Error::param("a", format!("must be below λ_1 = {lambda1}, got {a}")));
    }
    let n_fine = noise_fine.num_steps();
    if scheme_steps == 0 || n_fine % scheme_steps != 0 {
        return Err(Error::Dimension(format!(
            "{scheme_steps} scheme steps do not divide {n_fine} fine steps"
        )));
    }
    let stride = n_fine / scheme_steps;
    let dt = noise_fine.dt();
    let used = noise_fine.num_modes().min(modes);
    let u0 = project(u0, modes);
    let mut out = vec![SpectralState::zeros(modes); scheme_steps + 1];

    for i in 0..modes {
        let mu = crate::spectral::eigenvalue(i + 1) - a;
        let forcing = b * constant_mode_coefficient(i + 1);
        let x0 = u0.coeffs()[i];
        let damp = (-mu * dt).exp();
        let row = (i < used).then(|| noise_fine.increments().row(i));
        let mut conv = 0.0;
        for n in 0..=scheme_steps {
            if n > 0 {
                if let Some(row) = &row {
                    for j in (n - 1) * stride..n * stride {
                        conv = damp * (conv + row[j]);
                    }
                }
            }
            let t = dt * (n * stride) as f64;
            let e = (-mu * t).exp();
            out[n].coeffs_mut()[i] = e * x0 + forcing * (1.0 - e) / mu + conv;
        }
    }
    Ok(out)
}
