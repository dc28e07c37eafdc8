//! Kernel quadratures against independent reductions.

use fbmshe::kernelcheck::{hoelder_kernel_auto, increment_block_auto, hoelder_sup};
use fbmshe::spectral::eigenvalue;
use fbmshe::HurstParameter;

/// `∫∫_{[0,L]²} e^{−λ(a+b)} α|a−b|^{2H−2}` reduced to one dimension in the
/// lag `r = |a − b|`, then `r = L x^{1/(2H−1)}` removes the singularity;
/// composite Simpson in `x`.
fn one_dimensional(h: f64, lambda: f64, len: f64) -> f64 {
    let alpha = h * (2.0 * h - 1.0);
    let p = 1.0 / (2.0 * h - 1.0);
    let g = |x: f64| {
        let r = len * x.powf(p);
        if lambda == 0.0 {
            len - r
        } else {
            (-lambda * r).exp() * -(-2.0 * lambda * (len - r)).exp_m1() / (2.0 * lambda)
        }
    };
    let n = 200_000;
    let dx = 1.0 / n as f64;
    let mut s = g(0.0) + g(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * dx);
    }
    2.0 * alpha * len.powf(2.0 * h - 1.0) * p * s * dx / 3.0
}

#[test]
fn hoelder_kernel_matches_lag_reduction() {
    for (h, lambda, len) in [(0.75, eigenvalue(1), 1.0), (0.6, eigenvalue(3), 0.5), (0.9, eigenvalue(2), 0.25), (0.75, 500.0, 0.1)] {
        let hp = HurstParameter::new(h).unwrap();
        let q = hoelder_kernel_auto(hp, 0.0, lambda, 0.0, len).unwrap();
        let o = one_dimensional(h, lambda, len);
        assert!(((q.value - o) / o).abs() < 1e-5, "H={h} λ={lambda} L={len}: {} vs {o}", q.value);
        // shifting the interval changes nothing
        let shifted = hoelder_kernel_auto(hp, 0.0, lambda, 3.0, 3.0 + len).unwrap();
        assert!(((shifted.value - q.value) / q.value).abs() < 1e-12);
    }
}

#[test]
fn rho_equal_h_is_bounded() {
    let hp = HurstParameter::new(0.75).unwrap();
    let v: Vec<f64> = [1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0]
        .iter()
        .map(|&l| hoelder_sup(hp, 0.75, l).unwrap().value)
        .collect();
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min < 1.05, "{v:?}");
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `∫∫ e^{−λ(t_n−s)} e^{−λ(t_n−u)} E[(β_s − β_⌊s⌋)(β_u − β_⌊u⌋)] ds du` from the
/// fBm covariance by composite Gauss–Legendre in `s` and `u`.
fn covariance_form(h: f64, lambda: f64, step: f64, t_n: f64) -> f64 {
    let r = |a: f64, b: f64| 0.5 * (a.powf(2.0 * h) + b.powf(2.0 * h) - (a - b).abs().powf(2.0 * h));
    let blocks = (t_n / step).round() as usize;
    let sub = 48;
    let rule = gauss_legendre(8);
    let mut pts = Vec::new();
    for b in 0..blocks {
        let lo = b as f64 * step;
        let w = step / sub as f64;
        for j in 0..sub {
            let a = lo + j as f64 * w;
            for &(x, wt) in &rule {
                let s = a + 0.5 * w * (x + 1.0);
                pts.push((s, lo, 0.5 * w * wt * (-lambda * (t_n - s)).exp()));
            }
        }
    }
    let mut total = 0.0;
    for &(s, fs, ws) in &pts {
        for &(u, fu, wu) in &pts {
            total += ws * wu * (r(s, u) - r(s, fu) - r(fs, u) + r(fs, fu));
        }
    }
    total
}

#[test]
fn increment_block_matches_covariance_form() {
    for (h, lambda, step, t_n) in [(0.75, 0.0, 0.125, 0.5), (0.75, eigenvalue(1), 0.125, 0.5), (0.6, eigenvalue(2), 0.25, 1.0)] {
        let hp = HurstParameter::new(h).unwrap();
        let q = increment_block_auto(hp, lambda, step, t_n).unwrap();
        let o = covariance_form(h, lambda, step, t_n);
        assert!(((q.value - o) / o).abs() < 1e-5, "H={h} λ={lambda}: {} vs {o}", q.value);
    }
}
