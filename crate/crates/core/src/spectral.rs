//! Dirichlet Laplacian on (0, 1) in its sine eigenbasis.
//!
//! `A = -Δ` has eigenpairs `λ_i = i²π²`, `e_i(x) = √2 sin(iπx)`. A field in
//! `V_M = span{e_1, …, e_M}` is stored as its coefficient vector; physical
//! values live on the collocation points `x_m = m/(M+1)`, and the two are
//! related by a type-I discrete sine transform.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `λ_i = i²π²`.
#[inline]
pub fn eigenvalue(i: usize) -> f64 {
    let k = i as f64 * PI;
    k * k
}

/// `e_i(x) = √2 sin(iπx)`.
#[inline]
pub fn eigenfunction_value(i: usize, x: f64) -> f64 {
    SQRT_2 * (i as f64 * PI * x).sin()
}

/// Coefficients `a_i = ⟨X, e_i⟩` for `i = 1..=M` (stored zero-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::param("coeffs", format!("coefficient {} is not finite", i + 1)));
        }
        Ok(SpectralState { coeffs })
    }

    pub fn zeros(m: usize) -> Self {
        SpectralState { coeffs: vec![0.0; m] }
    }

    /// Unit coefficient on `mode` (1-based).
    pub fn unit(m: usize, mode: usize) -> Self {
        let mut s = Self::zeros(m);
        s.coeffs[mode - 1] = 1.0;
        s
    }

    /// Builds a state from sparse `(mode, coefficient)` pairs; modes above `m`
    /// are dropped.
    pub fn from_modes(m: usize, modes: &[(usize, f64)]) -> Result<Self> {
        let mut s = Self::zeros(m);
        for &(mode, c) in modes {
            if mode == 0 {
                return Err(Error::param("mode", "modes are 1-based"));
            }
            if !c.is_finite() {
                return Err(Error::param("coefficient", "must be finite"));
            }
            if mode <= m {
                s.coeffs[mode - 1] += c;
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `‖X‖_V`, by Parseval the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `‖self - other‖²_V`, zero-padding the shorter state.
    pub fn distance_sq(&self, other: &SpectralState) -> f64 {
        let (long, short) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let shared: f64 = short
            .coeffs
            .iter()
            .zip(&long.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let tail: f64 = long.coeffs[short.len()..].iter().map(|c| c * c).sum();
        shared + tail
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }
}

/// Truncation (or zero padding) to `m_target` modes: `P_M`.
pub fn project(state: &SpectralState, m_target: usize) -> SpectralState {
    let mut coeffs = state.coeffs[..m_target.min(state.len())].to_vec();
    coeffs.resize(m_target, 0.0);
    SpectralState { coeffs }
}

/// Pointwise nonlinearity `f` of the Nemytskii operator `F(X)(x) = f(X(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    /// `f(u) = a u + b`; globally Lipschitz but unbounded, so outside the
    /// bounded-derivative class. Kept for the closed-form oracle.
    Linear { a: f64, b: f64 },
    /// `f(u) = amplitude · sin(u)`.
    Sine { amplitude: f64 },
    /// `f(u) = amplitude · tanh(u)`.
    Tanh { amplitude: f64 },
}

// sup |tanh''| = 4/(3√3), attained at tanh(u) = 1/√3; sup |tanh'''| = 2 at u = 0.
const TANH_D2_SUP: f64 = 0.769_800_358_919_501;
const TANH_D3_SUP: f64 = 2.0;

impl Nonlinearity {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { a, b } => a * u + b,
            Nonlinearity::Sine { amplitude } => amplitude * u.sin(),
            Nonlinearity::Tanh { amplitude } => amplitude * u.tanh(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { a, .. } => a,
            Nonlinearity::Sine { amplitude } => amplitude * u.cos(),
            Nonlinearity::Tanh { amplitude } => {
                let c = u.cosh();
                amplitude / (c * c)
            }
        }
    }

    /// Sup norms of `f'`, `f''`, `f'''` over the real line.
    pub fn derivative_bounds(&self) -> [f64; 3] {
        match *self {
            Nonlinearity::Zero => [0.0; 3],
            Nonlinearity::Linear { a, .. } => [a.abs(), 0.0, 0.0],
            Nonlinearity::Sine { amplitude } => [amplitude.abs(); 3],
            Nonlinearity::Tanh { amplitude } => {
                let a = amplitude.abs();
                [a, TANH_D2_SUP * a, TANH_D3_SUP * a]
            }
        }
    }

    /// Lipschitz constant `sup |f'|`.
    pub fn lipschitz(&self) -> f64 {
        self.derivative_bounds()[0]
    }

    /// Whether `f` is C³ with bounded first three derivatives. `Linear` with
    /// `a != 0` is the one preset that is not.
    pub fn has_bounded_derivatives(&self) -> bool {
        !matches!(self, Nonlinearity::Linear { a, .. } if *a != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Linear { a, b } => a == 0.0 && b == 0.0,
            Nonlinearity::Sine { amplitude } | Nonlinearity::Tanh { amplitude } => amplitude == 0.0,
        }
    }
}

/// Type-I DST, `y_k = Σ_{m=1}^{M} x_m sin(πkm/(M+1))`, through a complex FFT
/// of length `2(M+1)`.
#[derive(Clone)]
struct SineTransform {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    fn new(m: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (m + 1));
        SineTransform { m, fft }
    }

    fn apply(&self, input: &[f64], output: &mut [f64], buf: &mut Vec<Complex<f64>>) {
        let m = self.m;
        let len = 2 * (m + 1);
        buf.clear();
        buf.resize(len, Complex::new(0.0, 0.0));
        for (j, &x) in input.iter().enumerate() {
            buf[j + 1].re = x;
            buf[len - j - 1].re = -x;
        }
        self.fft.process(buf);
        for (k, y) in output.iter_mut().enumerate() {
            *y = -0.5 * buf[k + 1].im;
        }
    }
}

/// Scratch space reused across transforms.
#[derive(Debug, Default, Clone)]
pub struct TransformScratch {
    buf: Vec<Complex<f64>>,
    values: Vec<f64>,
}

/// Eigenvalues of `A` truncated to `M` modes, with the collocation transform.
#[derive(Clone)]
pub struct DirichletSpectrum {
    eigenvalues: Vec<f64>,
    dst: SineTransform,
}

impl std::fmt::Debug for DirichletSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSpectrum").field("m", &self.len()).finish()
    }
}

impl DirichletSpectrum {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        Ok(DirichletSpectrum {
            eigenvalues: (1..=m).map(eigenvalue).collect(),
            dst: SineTransform::new(m),
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Collocation points `x_m = m/(M+1)`.
    pub fn grid(&self) -> Vec<f64> {
        let m = self.len();
        (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Dimension(format!(
                "state has {len} modes, spectrum has {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `S_t x`: mode `i` scaled by `e^{-λ_i t}`.
    pub fn apply_semigroup(&self, state: &SpectralState, t: f64) -> Result<SpectralState> {
        self.check_len(state.len())?;
        if !(t >= 0.0) {
            return Err(Error::param("t", "must be nonnegative"));
        }
        let coeffs = state
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(a, l)| a * (-l * t).exp())
            .collect();
        Ok(SpectralState { coeffs })
    }

    /// `‖A^{θ/2} x‖_V`.
    pub fn fractional_norm(&self, state: &SpectralState, theta: f64) -> Result<f64> {
        self.check_len(state.len())?;
        Ok(state
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(a, l)| l.powf(theta) * a * a)
            .sum::<f64>()
            .sqrt())
    }

    /// Values of the field at the collocation points.
    pub fn to_physical(&self, state: &SpectralState) -> Result<Vec<f64>> {
        self.check_len(state.len())?;
        let mut out = vec![0.0; self.len()];
        let mut scratch = TransformScratch::default();
        self.to_physical_into(state.coeffs(), &mut out, &mut scratch);
        Ok(out)
    }

    /// Inverse of [`to_physical`](Self::to_physical) on the collocation grid.
    pub fn to_spectral(&self, values: &[f64]) -> Result<SpectralState> {
        self.check_len(values.len())?;
        let mut coeffs = vec![0.0; self.len()];
        let mut scratch = TransformScratch::default();
        self.to_spectral_into(values, &mut coeffs, &mut scratch);
        SpectralState::new(coeffs)
    }

    pub(crate) fn to_physical_into(&self, coeffs: &[f64], out: &mut [f64], scratch: &mut TransformScratch) {
        self.dst.apply(coeffs, out, &mut scratch.buf);
        out.iter_mut().for_each(|v| *v *= SQRT_2);
    }

    pub(crate) fn to_spectral_into(&self, values: &[f64], out: &mut [f64], scratch: &mut TransformScratch) {
        self.dst.apply(values, out, &mut scratch.buf);
        let w = SQRT_2 / (self.len() + 1) as f64;
        out.iter_mut().for_each(|v| *v *= w);
    }

    /// Pseudo-spectral `P_M F(X)`: evaluate `f` at the collocation points and
    /// transform back. No dealiasing.
    pub fn apply_nemytskii(&self, state: &SpectralState, f: &Nonlinearity) -> Result<SpectralState> {
        self.check_len(state.len())?;
        let mut out = vec![0.0; self.len()];
        let mut scratch = TransformScratch::default();
        self.nemytskii_into(state.coeffs(), f, &mut out, &mut scratch);
        SpectralState::new(out)
    }

    pub(crate) fn nemytskii_into(
        &self,
        coeffs: &[f64],
        f: &Nonlinearity,
        out: &mut [f64],
        scratch: &mut TransformScratch,
    ) {
        if matches!(f, Nonlinearity::Zero) {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let mut values = std::mem::take(&mut scratch.values);
        values.resize(self.len(), 0.0);
        self.to_physical_into(coeffs, &mut values, scratch);
        values.iter_mut().for_each(|v| *v = f.eval(*v));
        self.to_spectral_into(&values, out, scratch);
        scratch.values = values;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn direct_physical(coeffs: &[f64]) -> Vec<f64> {
        let m = coeffs.len();
        (1..=m)
            .map(|j| {
                let x = j as f64 / (m + 1) as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * eigenfunction_value(i + 1, x))
                    .sum()
            })
            .collect()
    }

    fn random_state(m: usize, seed: u64) -> SpectralState {
        let mut g = crate::rng::Seed::new(seed).stream(0);
        SpectralState::new((0..m).map(|_| g.next_normal()).collect()).unwrap()
    }

    #[test]
    fn eigen_examples() {
        assert_relative_eq!(eigenvalue(1), 9.869_604_401_089_358, epsilon = 1e-14);
        assert_relative_eq!(eigenvalue(2), 39.478_417_604_357_43, epsilon = 1e-12);
        assert_relative_eq!(eigenvalue(10), 100.0 * PI * PI, epsilon = 1e-12);
        assert_relative_eq!(eigenfunction_value(1, 0.5), SQRT_2, epsilon = 1e-15);
        assert!(eigenfunction_value(2, 0.5).abs() < 1e-15);
        assert_relative_eq!(eigenfunction_value(3, 1.0 / 6.0), SQRT_2, epsilon = 1e-15);
        assert!(eigenfunction_value(7, 0.0).abs() < 1e-15);
        assert!(eigenfunction_value(7, 1.0).abs() < 1e-14);
        let s = DirichletSpectrum::new(50).unwrap();
        assert!(s.eigenvalues().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn semigroup_examples() {
        let sp = DirichletSpectrum::new(8).unwrap();
        let x = random_state(8, 1);
        assert_eq!(sp.apply_semigroup(&x, 0.0).unwrap(), x);
        let u = SpectralState::unit(8, 1);
        let y = sp.apply_semigroup(&u, 0.01).unwrap();
        assert_relative_eq!(y.coeffs()[0], (-PI * PI / 100.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(y.coeffs()[0], 0.906_018_055_79, epsilon = 1e-11);
        let ones = SpectralState::new(vec![1.0; 8]).unwrap();
        let mut prev = ones.norm();
        for k in 1..20 {
            let n = sp.apply_semigroup(&ones, 0.01 * k as f64).unwrap().norm();
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 0.2);
        assert!(sp.apply_semigroup(&x, -1.0).is_err());
    }

    #[test]
    fn semigroup_property_and_smoothing() {
        let sp = DirichletSpectrum::new(32).unwrap();
        let x = random_state(32, 2);
        let (t, s) = (0.003, 0.0071);
        let a = sp.apply_semigroup(&sp.apply_semigroup(&x, t).unwrap(), s).unwrap();
        let b = sp.apply_semigroup(&x, t + s).unwrap();
        for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((p - q).abs() <= 1e-13 * q.abs().max(1e-300));
        }
        // max_i λ_i^μ e^{-λ_i t} ≤ (μ/e)^μ t^{-μ}
        for &mu in &[0.25, 0.5, 1.0, 2.0] {
            for &t in &[1e-4f64, 1e-2, 0.5] {
                let bound = (mu / std::f64::consts::E).powf(mu) * t.powf(-mu);
                for &l in sp.eigenvalues() {
                    assert!(l.powf(mu) * (-l * t).exp() <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn fractional_norm_examples() {
        let sp = DirichletSpectrum::new(4).unwrap();
        let x = random_state(4, 3);
        assert_relative_eq!(sp.fractional_norm(&x, 0.0).unwrap(), x.norm(), epsilon = 1e-14);
        assert_relative_eq!(sp.fractional_norm(&SpectralState::unit(4, 1), 2.0).unwrap(), PI * PI, epsilon = 1e-13);
        let v = sp.fractional_norm(&SpectralState::unit(4, 2), -1.5).unwrap();
        assert_relative_eq!(v, (4.0 * PI * PI).powf(-0.75), epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let x = SpectralState::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(project(&x, 3), x);
        assert_eq!(project(&x, 2).coeffs(), &[1.0, 1.0]);
        assert_eq!(project(&x, 5).coeffs(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_commutes_with_semigroup() {
        let big = DirichletSpectrum::new(16).unwrap();
        let small = DirichletSpectrum::new(6).unwrap();
        let x = random_state(16, 4);
        let a = project(&big.apply_semigroup(&x, 0.01).unwrap(), 6);
        let b = small.apply_semigroup(&project(&x, 6), 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transform_matches_direct_sum() {
        let sp = DirichletSpectrum::new(3).unwrap();
        let v = sp.to_physical(&SpectralState::unit(3, 1)).unwrap();
        let expect = [
            SQRT_2 * (PI / 4.0).sin(),
            SQRT_2 * (PI / 2.0).sin(),
            SQRT_2 * (3.0 * PI / 4.0).sin(),
        ];
        for (a, b) in v.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
        for m in [1usize, 2, 7, 31, 64] {
            let sp = DirichletSpectrum::new(m).unwrap();
            let x = random_state(m, m as u64);
            let fast = sp.to_physical(&x).unwrap();
            let slow = direct_physical(x.coeffs());
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let m = 64;
        let sp = DirichletSpectrum::new(m).unwrap();
        let x = random_state(m, 17);
        let vals = sp.to_physical(&x).unwrap();
        let back = sp.to_spectral(&vals).unwrap();
        let dev = x.coeffs().iter().zip(back.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12 * x.norm());
        let quad: f64 = vals.iter().map(|v| v * v).sum::<f64>() / (m + 1) as f64;
        assert!((quad - x.norm_sq()).abs() < 1e-10 * x.norm_sq());
    }

    #[test]
    fn constant_function_coefficients() {
        let m = 2047;
        let sp = DirichletSpectrum::new(m).unwrap();
        let c = sp.to_spectral(&vec![1.0; m]).unwrap();
        let exact = |j: usize| SQRT_2 * (1.0 - (-1f64).powi(j as i32)) / (j as f64 * PI);
        assert_relative_eq!(exact(1), 0.900_316_316_157_106, epsilon = 1e-12);
        for j in 1..6 {
            assert!((c.coeffs()[j - 1] - exact(j)).abs() < 1e-6, "mode {j}");
        }
    }

    #[test]
    fn nemytskii_examples() {
        let sp = DirichletSpectrum::new(32).unwrap();
        let x = random_state(32, 5);
        assert_eq!(sp.apply_nemytskii(&x, &Nonlinearity::Zero).unwrap(), SpectralState::zeros(32));
        let d = sp.apply_nemytskii(&x, &Nonlinearity::Linear { a: 2.0, b: 0.0 }).unwrap();
        for (a, b) in d.coeffs().iter().zip(x.coeffs()) {
            assert!((a - 2.0 * b).abs() < 1e-13 * x.norm());
        }
        let mut small = SpectralState::unit(32, 1);
        small.scale(0.1);
        let s = sp.apply_nemytskii(&small, &Nonlinearity::Sine { amplitude: 1.0 }).unwrap();
        assert!(s.distance_sq(&small).sqrt() < 1e-3);
    }

    #[test]
    fn derivative_bounds_hold_on_a_grid() {
        for f in [
            Nonlinearity::Sine { amplitude: 0.7 },
            Nonlinearity::Tanh { amplitude: 1.3 },
        ] {
            let [d1, d2, d3] = f.derivative_bounds();
            let h = 1e-3;
            for k in -4000..4000 {
                let u = k as f64 * 2e-3;
                let fd1 = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
                let fd2 = (f.eval(u + h) - 2.0 * f.eval(u) + f.eval(u - h)) / (h * h);
                let fd3 = (f.eval(u + 2.0 * h) - 2.0 * f.eval(u + h) + 2.0 * f.eval(u - h) - f.eval(u - 2.0 * h))
                    / (2.0 * h * h * h);
                assert!(fd1.abs() <= d1 + 1e-5);
                assert!(fd2.abs() <= d2 + 1e-4);
                assert!(fd3.abs() <= d3 + 1e-2);
                assert!((f.derivative(u) - fd1).abs() < 1e-5);
            }
        }
        assert!(!Nonlinearity::Linear { a: 1.0, b: 0.0 }.has_bounded_derivatives());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_contractive(m in 1usize..40, t in 1usize..40, seed in 0u64..500) {
            let x = random_state(m, seed);
            let p = project(&x, t);
            prop_assert_eq!(project(&p, t), p.clone());
            if t <= m {
                prop_assert!(p.norm() <= x.norm());
            }
        }

        #[test]
        fn round_trip(m in 1usize..130, seed in 0u64..500) {
            let sp = DirichletSpectrum::new(m).unwrap();
            let x = random_state(m, seed);
            let back = sp.to_spectral(&sp.to_physical(&x).unwrap()).unwrap();
            for (a, b) in x.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + x.norm()));
            }
        }
    }
}
