//! Acceptance suite: one printed PASS/FAIL line per criterion, followed by
//! an assertion on the same verdict. Run with `--nocapture` to see the lines.

use std::fs;
use std::path::Path;

use fbmshe::fgn::{fgn_autocovariance, CholeskySampler, CirculantSampler, FgnBlock};
use fbmshe::harness::{strong_error, sup_distance_sq};
use fbmshe::noise::{build_noise, coarsen_noise};
use fbmshe::solver::oracle_linear;
use fbmshe::spectral::eigenvalue;
use fbmshe::stats::{fit_order, FitPoint};
use fbmshe::{HurstParameter, NoiseIncrements, Nonlinearity, QSpectrum, Scheme, SchemeConfig, Seed, SpectralState};
use serde_json::Value;

const MODEL: &str = "hurst = 0.75\nq_decay = 7\nq_amplitude = 1\nnonlinearity = sine\nnonlinearity_amplitude = 1\nu0 = 1:1.0\nt_end = 1\n";
const SEED: &str = "seed = 20240601\n";

fn verdict(name: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

/// Runs a subcommand on a config text and returns the parsed report.json
/// together with its raw bytes.
fn run_cli(sub: &str, config: &str, threads: usize, dir: &Path) -> (Value, Vec<u8>) {
    fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let argv = [
        "fbmshe",
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        &threads.to_string(),
    ];
    let code = fbmshe_cli::run_command(argv);
    assert_eq!(code, 0, "{sub} exited with {code}");
    let bytes = fs::read(out.join("report.json")).unwrap();
    (serde_json::from_slice(&bytes).unwrap(), bytes)
}

fn f(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn levels_text(report: &Value) -> String {
    report["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| format!("{}:{:.3e}", l["level"], l["error"].as_f64().unwrap()))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn temporal_super_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "{MODEL}modes = 64\nnoise_modes = 64\nlevels = 4, 8, 16, 32, 64\nreference_level = 1024\nsamples = 200\n{SEED}"
    );
    let (r, _) = run_cli("converge-time", &config, 2, dir.path());
    let slope = f(&r["fit"]["slope"]);
    let r2 = f(&r["fit"]["r_squared"]);
    let pass = slope.is_some_and(|s| (-1.15..=-0.85).contains(&s) && -s > 0.75) && r2.is_some_and(|r| r >= 0.98);
    verdict(
        "temporal order one",
        pass,
        format!("slope {slope:?} in [-1.15, -0.85], R^2 {r2:?} >= 0.98, |slope| > H = 0.75; {}", levels_text(&r)),
    );
}

#[test]
fn spatial_rate() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{MODEL}steps = 512\nlevels = 4, 8, 16, 32\nreference_level = 256\nsamples = 200\n{SEED}");
    let (r, _) = run_cli("converge-space", &config, 2, dir.path());
    let slope = f(&r["fit"]["slope"]);
    let pass = slope.is_some_and(|s| (-2.3..=-1.7).contains(&s));
    verdict("spatial rate", pass, format!("slope {slope:?} in [-2.3, -1.7]; {}", levels_text(&r)));
}

#[test]
fn truncation_rate() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{MODEL}steps = 4096\nlevels = 2, 4, 8, 16\nreference_level = 32\nsamples = 100\n{SEED}");
    let (r, _) = run_cli("converge-trunc", &config, 2, dir.path());
    let slope = f(&r["fit"]["slope"]);
    let ratios: Vec<f64> = r["levels"].as_array().unwrap().iter().map(|l| l["ratio"].as_f64().unwrap()).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    let pass = slope.is_some_and(|s| (s + 4.75).abs() <= 0.75) && spread < 10.0;
    verdict(
        "truncation rate",
        pass,
        format!("slope {slope:?} within 0.75 of -4.75, ratio spread {spread:.3} < 10; ratios {ratios:.3?}"),
    );
}

#[test]
fn temporal_hoelder_exponent() {
    let mut details = Vec::new();
    let mut pass = true;
    for h in [0.6, 0.75] {
        let dir = tempfile::tempdir().unwrap();
        let model = MODEL.replace("hurst = 0.75", &format!("hurst = {h}"));
        let config = format!("{model}modes = 64\nnoise_modes = 64\nsteps = 1024\nlevels = 1, 2, 4, 8, 16, 32\nsamples = 100\n{SEED}");
        let (r, _) = run_cli("hoelder", &config, 2, dir.path());
        let e = f(&r["exponent"]);
        pass &= e.is_some_and(|e| (e - h).abs() <= 0.1);
        details.push(format!("H={h}: exponent {e:?} in [{}, {}]", h - 0.1, h + 0.1));
    }
    verdict("temporal hoelder exponent", pass, details.join("; "));
}

/// Per-lag means of within-path products and their standard errors across
/// independent streams.
fn ensemble_autocovariance(block: &FgnBlock, lags: usize) -> Vec<(f64, f64)> {
    let inc = block.increments();
    let (s, n) = inc.dim();
    (0..lags)
        .map(|k| {
            let y: Vec<f64> = (0..s)
                .map(|i| (0..n - k).map(|j| inc[[i, j]] * inc[[i, j + k]]).sum::<f64>() / (n - k) as f64)
                .collect();
            let mean = y.iter().sum::<f64>() / s as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
            (mean, (var / s as f64).sqrt())
        })
        .collect()
}

#[test]
fn fgn_engine() {
    let h = HurstParameter::new(0.75).unwrap();
    let (n, dt, samples) = (32, 1.0 / 32.0, 20_000);
    let circ = CirculantSampler::new(h, dt, n).unwrap().sample_block(samples, Seed::new(7)).unwrap();
    let chol = CholeskySampler::new(h, dt, n).unwrap().sample_block(samples, Seed::new(8)).unwrap();
    let ec = ensemble_autocovariance(&circ, 6);
    let eh = ensemble_autocovariance(&chol, 6);
    let mut worst_c: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    let mut worst_pair: f64 = 0.0;
    for k in 0..6 {
        let exact = fgn_autocovariance(h, dt, k as i64);
        worst_c = worst_c.max((ec[k].0 - exact).abs() / ec[k].1);
        worst_h = worst_h.max((eh[k].0 - exact).abs() / eh[k].1);
        worst_pair = worst_pair.max((ec[k].0 - eh[k].0).abs() / (ec[k].1.powi(2) + eh[k].1.powi(2)).sqrt());
    }
    let mut worst_var: f64 = 0.0;
    for steps in [1usize, 2, 10, 100, 1000] {
        let var: f64 = (0..steps)
            .flat_map(|i| (0..steps).map(move |j| i as i64 - j as i64))
            .map(|lag| fgn_autocovariance(h, dt, lag))
            .sum();
        let exact = (steps as f64 * dt).powf(1.5);
        worst_var = worst_var.max((var / exact - 1.0).abs());
    }
    let pass = worst_c < 4.0 && worst_h < 4.0 && worst_pair < 4.0 && worst_var <= 1e-10;
    verdict(
        "fgn engine",
        pass,
        format!(
            "lags 0-5, {samples} samples: circulant {worst_c:.2} SE, cholesky {worst_h:.2} SE, difference {worst_pair:.2} SE (< 4); n-step variance rel err {worst_var:.1e} <= 1e-10"
        ),
    );
}

#[test]
fn kernel_audits() {
    let dir = tempfile::tempdir().unwrap();
    let (r, _) = run_cli("verify-kernels", "hurst = 0.75\n", 2, dir.path());
    let audit = &r["audit"];
    let h = 0.75;
    let mut pass = true;
    let mut details = Vec::new();
    for entry in audit["hoelder"].as_array().unwrap() {
        let rho = entry[0].as_f64().unwrap();
        let slope = entry[1]["slope"].as_f64().unwrap();
        let target = 2.0 * (h - rho);
        pass &= (slope - target).abs() <= 0.1;
        details.push(format!("rho={rho}: exponent {slope:.4} vs {target}"));
    }
    let hs = audit["block_h"]["slope"].as_f64().unwrap();
    let ls = audit["block_lambda"]["slope"].as_f64().unwrap();
    let rel = r["max_relative_change"].as_f64().unwrap();
    pass &= (1.8..=2.2).contains(&hs) && (-1.2..=-0.8).contains(&ls) && rel <= 1e-6;
    details.push(format!("block h-exponent {hs:.4} in [1.8, 2.2]"));
    details.push(format!("block lambda-exponent {ls:.4} in [-1.2, -0.8]"));
    details.push(format!("max Richardson change {rel:.1e} <= 1e-6"));
    verdict("kernel audits", pass, details.join("; "));
}

#[test]
fn solver_exactness() {
    // f = zero without noise against the semigroup
    let (m, n) = (32, 64);
    let cfg = SchemeConfig::new(m, n, m, 1.0).unwrap();
    let scheme = Scheme::new(cfg, Nonlinearity::Zero).unwrap();
    let u0 = SpectralState::from_modes(m, &[(1, 1.0), (2, -0.5), (5, 0.3), (17, 2.0), (32, 1.0)]).unwrap();
    let traj = scheme.run(&NoiseIncrements::zeros(m, n, cfg.h()).unwrap(), &u0).unwrap();
    let mut worst: f64 = 0.0;
    for (step, state) in traj.states().iter().enumerate() {
        let t = cfg.time(step);
        let exact: Vec<f64> = u0.coeffs().iter().enumerate().map(|(i, c)| c * (-eigenvalue(i + 1) * t).exp()).collect();
        let exact = SpectralState::new(exact).unwrap();
        worst = worst.max(state.distance_sq(&exact).sqrt() / exact.norm());
    }

    // linear f against the mild-solution oracle on a fine grid
    let h = HurstParameter::new(0.75).unwrap();
    let q = QSpectrum::new(7.0, 1.0).unwrap();
    let (modes, n_ref, samples) = (16, 8192, 50);
    let levels = [16usize, 32, 64, 128, 256, 512];
    let (a, b) = (-2.0, 0.5);
    let f = Nonlinearity::Linear { a, b };
    let u0 = SpectralState::from_modes(modes, &[(1, 1.0), (3, 0.2)]).unwrap();
    let sampler = CirculantSampler::new(h, 1.0 / n_ref as f64, n_ref).unwrap();
    let mut columns = vec![Vec::new(); levels.len()];
    for s in 0..samples {
        let noise = build_noise(&q, &sampler.sample_block(modes, Seed::new(11).child(s)).unwrap());
        for (col, &steps) in columns.iter_mut().zip(&levels) {
            let exact = oracle_linear(modes, a, b, &u0, &noise, steps).unwrap();
            let scheme = Scheme::new(SchemeConfig::new(modes, steps, modes, 1.0).unwrap(), f).unwrap();
            let run = scheme.run(&coarsen_noise(&noise, n_ref / steps).unwrap(), &u0).unwrap();
            col.push(sup_distance_sq(&exact, 1, run.states()));
        }
    }
    let points: Vec<FitPoint> = levels
        .iter()
        .zip(&columns)
        .map(|(&steps, col)| {
            let (e, se) = strong_error(col);
            (steps as f64, e, se).into()
        })
        .collect();
    let fit = fit_order(&points).unwrap();
    let pass = worst <= 1e-13 && (-1.15..=-0.85).contains(&fit.slope);
    verdict(
        "solver exactness",
        pass,
        format!(
            "semigroup max rel err {worst:.1e} <= 1e-13; linear oracle slope {:.4} in [-1.15, -0.85] (R^2 {:.4})",
            fit.slope, fit.r_squared
        ),
    );
}

#[test]
fn reproducibility_across_threads() {
    let config = format!(
        "{MODEL}modes = 64\nnoise_modes = 64\nlevels = 4, 8, 16, 32, 64\nreference_level = 1024\nsamples = 200\n{SEED}"
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, one) = run_cli("converge-time", &config, 1, a.path());
    let (_, four) = run_cli("converge-time", &config, 4, b.path());
    verdict(
        "reproducibility",
        one == four,
        format!("report.json with --threads 1 and --threads 4: {} and {} bytes, identical {}", one.len(), four.len(), one == four),
    );
}
