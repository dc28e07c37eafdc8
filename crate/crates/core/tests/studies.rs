//! Small end-to-end studies through the public API.

use fbmshe::harness::{run_study, Axis, ExperimentPlan};
use fbmshe::{HurstParameter, ModelConfig, Nonlinearity, PlanSettings, QSpectrum};

fn settings(levels: Vec<usize>, reference: usize, samples: usize) -> PlanSettings {
    PlanSettings {
        levels: Some(levels),
        reference_level: Some(reference),
        samples: Some(samples),
        ..Default::default()
    }
}

#[test]
fn temporal_errors_decrease() {
    let m = ModelConfig::with_hurst(0.75).unwrap();
    let mut s = settings(vec![8, 16, 32, 64], 512, 40);
    s.modes = Some(16);
    let r = run_study(&m, &ExperimentPlan::from_settings(Axis::Time, &m, &s).unwrap()).unwrap();
    for w in r.levels.windows(2) {
        assert!(w[1].error < w[0].error + 2.0 * (w[0].stderr + w[1].stderr));
    }
    let slope = r.slope().unwrap();
    assert!(slope < -0.5 && slope > -1.5, "{slope}");
}

#[test]
fn self_convergence_without_drift() {
    let m = ModelConfig::new(HurstParameter::new(0.75).unwrap(), QSpectrum::new(7.0, 1.0).unwrap(), Nonlinearity::Zero, vec![(1, 1.0)], 1.0).unwrap();
    let mut s = settings(vec![16, 32, 64, 128], 2048, 40);
    s.modes = Some(16);
    let r = run_study(&m, &ExperimentPlan::from_settings(Axis::Time, &m, &s).unwrap()).unwrap();
    let slope = r.slope().unwrap();
    assert!((slope + 1.0).abs() < 0.15, "{slope}");
}

#[test]
fn low_regularity_runs_are_exploratory() {
    let m = ModelConfig::new(HurstParameter::new(0.6).unwrap(), QSpectrum::new(1.4, 1.0).unwrap(), Nonlinearity::Sine { amplitude: 1.0 }, vec![(1, 1.0)], 1.0).unwrap();
    assert!((m.certified_gamma - 1.2).abs() < 1e-5);
    let mut s = settings(vec![4, 8], 16, 4);
    s.steps = Some(32);
    let r = run_study(&m, &ExperimentPlan::from_settings(Axis::Space, &m, &s).unwrap()).unwrap();
    assert_eq!(r.status, fbmshe::harness::RunStatus::Exploratory);
}

#[test]
fn truncation_tracks_tail() {
    let m = ModelConfig::with_hurst(0.75).unwrap();
    let mut s = settings(vec![2, 4, 8], 16, 20);
    s.steps = Some(2048);
    let r = run_study(&m, &ExperimentPlan::from_settings(Axis::Truncation, &m, &s).unwrap()).unwrap();
    let ratios: Vec<f64> = r.levels.iter().map(|l| l.ratio.unwrap()).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 3.0, "{ratios:?}");
}

#[test]
fn hoelder_without_noise_is_smooth() {
    let m = ModelConfig::new(HurstParameter::new(0.75).unwrap(), QSpectrum::new(7.0, 0.0).unwrap(), Nonlinearity::Zero, vec![(1, 1.0)], 1.0).unwrap();
    let mut s = settings(vec![1, 2, 4, 8], 256, 2);
    s.steps = Some(256);
    s.modes = Some(8);
    let r = run_study(&m, &ExperimentPlan::from_settings(Axis::Hoelder, &m, &s).unwrap()).unwrap();
    // a C¹ path: increments scale like the lag, second moment like lag²
    let e = r.exponent.unwrap();
    assert!((e - 1.0).abs() < 0.05, "{e}");
}
