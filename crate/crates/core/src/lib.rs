//! Full discretization of the stochastic heat equation on (0, 1) with
//! Dirichlet boundary conditions, driven by additive infinite-dimensional
//! fractional Brownian motion with Hurst index `H ∈ (1/2, 1)`:
//! noise truncation to `K` modes, spectral Galerkin projection to `M` modes
//! and the exponential Euler integrator with `N` steps.
//!
//! The [`harness`] module estimates strong errors and regularity exponents by
//! Monte Carlo; [`kernelcheck`] audits the singular kernel integrals behind
//! the error analysis by quadrature.

pub mod config;
pub mod error;
pub mod fgn;
pub mod harness;
pub mod kernelcheck;
pub mod noise;
pub mod rng;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use config::{ModelConfig, ParsedConfig, PlanSettings};
pub use error::{Error, Result};
pub use fgn::{FgnBlock, HurstParameter};
pub use harness::{Axis, ErrorReport, ExperimentPlan};
pub use noise::{NoiseIncrements, QSpectrum};
pub use rng::Seed;
pub use solver::{Scheme, SchemeConfig, TrajectoryRecord};
pub use spectral::{DirichletSpectrum, Nonlinearity, SpectralState};
