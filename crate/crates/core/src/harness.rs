//! Monte Carlo strong-error studies along the time, space and truncation
//! axes, and temporal Hölder-exponent estimation.
//!
//! Every sample draws one fine fGn block from its own substream
//! `seed.child(sample)`; all levels of that sample are driven by the same
//! noise (aggregated in time, dropped rows in truncation, projected inside
//! the step in space). Per-sample results are reduced by pairwise summation
//! in sample order, so reports do not depend on the thread count.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{echo_model, ModelConfig, PlanSettings};
use crate::error::{Error, Result};
use crate::fgn::CirculantSampler;
use crate::noise::{build_noise, coarsen_noise, q_tail_norm, truncate_noise, NoiseIncrements};
use crate::rng::Seed;
use crate::solver::{Scheme, SchemeConfig};
use crate::spectral::SpectralState;
use crate::stats::{fit_order, mean_estimate, FitPoint, OrderFit};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    Space,
    Truncation,
    Hoelder,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Time => "time",
            Axis::Space => "space",
            Axis::Truncation => "truncation",
            Axis::Hoelder => "hoelder",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One study: the axis, its levels, the reference level and the base
/// discretization shared by all levels.
///
/// `scheme` holds the reference discretization: `steps = reference_level`
/// on the time axis, `modes = noise_modes = reference_level` in space and
/// truncation. On the Hölder axis `levels` are lags in steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub axis: Axis,
    pub levels: Vec<usize>,
    pub reference_level: usize,
    pub samples: usize,
    pub scheme: SchemeConfig,
    pub seed: u64,
}

impl ExperimentPlan {
    /// Fills unset keys with per-axis defaults and validates the result.
    pub fn from_settings(axis: Axis, model: &ModelConfig, s: &PlanSettings) -> Result<Self> {
        let t = model.t_end;
        let seed = s.seed.unwrap_or(DEFAULT_SEED);
        let plan = match axis {
            Axis::Time => {
                let reference = s.reference_level.or(s.steps).unwrap_or(1024);
                let modes = s.modes.unwrap_or(64);
                ExperimentPlan {
                    axis,
                    levels: s.levels.clone().unwrap_or_else(|| vec![4, 8, 16, 32, 64]),
                    reference_level: reference,
                    samples: s.samples.unwrap_or(200),
                    scheme: SchemeConfig {
                        modes,
                        steps: reference,
                        noise_modes: s.noise_modes.unwrap_or(modes),
                        t_end: t,
                    },
                    seed,
                }
            }
            Axis::Space => {
                let reference = s.reference_level.or(s.modes).unwrap_or(256);
                ExperimentPlan {
                    axis,
                    levels: s.levels.clone().unwrap_or_else(|| vec![4, 8, 16, 32]),
                    reference_level: reference,
                    samples: s.samples.unwrap_or(200),
                    scheme: SchemeConfig {
                        modes: reference,
                        steps: s.steps.unwrap_or(512),
                        noise_modes: reference,
                        t_end: t,
                    },
                    seed,
                }
            }
            Axis::Truncation => {
                let reference = s.reference_level.or(s.noise_modes).unwrap_or(32);
                ExperimentPlan {
                    axis,
                    levels: s.levels.clone().unwrap_or_else(|| vec![2, 4, 8, 16]),
                    reference_level: reference,
                    samples: s.samples.unwrap_or(100),
                    scheme: SchemeConfig {
                        modes: s.modes.unwrap_or(reference),
                        steps: s.steps.unwrap_or(4096),
                        noise_modes: reference,
                        t_end: t,
                    },
                    seed,
                }
            }
            Axis::Hoelder => {
                let steps = s.steps.or(s.reference_level).unwrap_or(1024);
                let modes = s.modes.unwrap_or(64);
                ExperimentPlan {
                    axis,
                    levels: s.levels.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32]),
                    reference_level: steps,
                    samples: s.samples.unwrap_or(100),
                    scheme: SchemeConfig {
                        modes,
                        steps,
                        noise_modes: s.noise_modes.unwrap_or(modes),
                        t_end: t,
                    },
                    seed,
                }
            }
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.samples < 2 {
            return Err(Error::InsufficientSamples(self.samples));
        }
        if self.levels.is_empty() {
            return Err(Error::param("levels", "must not be empty"));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) || self.levels[0] == 0 {
            return Err(Error::param("levels", "must be positive and strictly increasing"));
        }
        let r = self.reference_level;
        match self.axis {
            Axis::Time => {
                if self.scheme.steps != r {
                    return Err(Error::param("steps", "must equal the reference level on the time axis"));
                }
                if let Some(l) = self.levels.iter().find(|&&l| r % l != 0) {
                    return Err(Error::param(
                        "levels",
                        format!("level {l} does not divide the reference level {r}"),
                    ));
                }
            }
            Axis::Space | Axis::Truncation => {
                if let Some(l) = self.levels.iter().find(|&&l| l > r) {
                    return Err(Error::param(
                        "levels",
                        format!("level {l} exceeds the reference level {r}"),
                    ));
                }
                if self.scheme.noise_modes != r {
                    return Err(Error::param("noise_modes", "must equal the reference level"));
                }
                if self.axis == Axis::Space && self.scheme.modes != r {
                    return Err(Error::param("modes", "must equal the reference level on the space axis"));
                }
            }
            Axis::Hoelder => {
                if self.scheme.steps != r {
                    return Err(Error::param("steps", "must equal the reference level on the hoelder axis"));
                }
                let half = self.scheme.steps / 2;
                if let Some(l) = self.levels.iter().find(|&&l| l > half) {
                    return Err(Error::param(
                        "levels",
                        format!("lag {l} exceeds half the number of steps"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Plan keys in config syntax.
    pub fn echo(&self) -> String {
        let levels = self.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
        format!(
            "levels = {levels}\nreference_level = {}\nsamples = {}\nmodes = {}\nsteps = {}\nnoise_modes = {}\nseed = {}\n",
            self.reference_level, self.samples, self.scheme.modes, self.scheme.steps, self.scheme.noise_modes, self.seed
        )
    }
}

/// Full config echo: model keys followed by plan keys.
pub fn config_echo(model: &ModelConfig, plan: &ExperimentPlan) -> String {
    format!("# axis = {}\n{}{}", plan.axis, echo_model(model), plan.echo())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Acceptance,
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub level: usize,
    /// Strong error `ê`, or the mean squared increment on the Hölder axis.
    pub error: f64,
    pub stderr: f64,
    pub samples: usize,
    pub censored: bool,
    /// Truncation axis: the noise tail norm at this level.
    pub tail_norm: Option<f64>,
    /// Truncation axis: `ê / tail`.
    pub ratio: Option<f64>,
    /// Hölder axis: mean fourth power of the increment norm.
    pub fourth_moment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub schema_version: u32,
    pub axis: Axis,
    pub status: RunStatus,
    pub levels: Vec<LevelError>,
    /// `None` when fewer than two levels survive censoring.
    pub fit: Option<OrderFit>,
    /// Hölder axis: `slope / 2`; other axes: the fitted slope.
    pub exponent: Option<f64>,
    /// Hölder axis: `slope / 4` of the fourth moment (not asserted).
    pub fourth_moment_exponent: Option<f64>,
    pub predicted_slope: f64,
    pub certified_gamma: f64,
    pub model: ModelConfig,
    pub plan: ExperimentPlan,
    pub config_echo: String,
}

impl ErrorReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    pub fn r_squared(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.r_squared)
    }

    pub fn is_degenerate(&self) -> bool {
        self.fit.is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::param("report", e.to_string()))
    }

    /// CSV with `# schema_version` and config echo comment lines, one row per
    /// level and a `slope,<v>,r2,<v>` trailer (`nan` when degenerate).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# schema_version = {}", self.schema_version)?;
        for line in self.config_echo.lines() {
            if line.starts_with('#') {
                writeln!(w, "{line}")?;
            } else {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "axis,level,error,stderr,samples")?;
        for l in &self.levels {
            writeln!(w, "{},{},{:.16e},{:.16e},{}", self.axis, l.level, l.error, l.stderr, l.samples)?;
        }
        let (slope, r2) = match &self.fit {
            Some(f) => (f.slope, f.r_squared),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(w, "slope,{slope:.16e},r2,{r2:.16e}")
    }
}

/// `max_n ‖reference(stride · n) − approx(n)‖²` over the shared times.
pub fn sup_distance_sq(reference: &[SpectralState], stride: usize, approx: &[SpectralState]) -> f64 {
    approx
        .iter()
        .enumerate()
        .map(|(n, x)| reference[n * stride].distance_sq(x))
        .fold(0.0, f64::max)
}

/// Per-level strong error `sqrt(mean)` and its delta-method standard error
/// from per-sample squared sup-distances.
pub fn strong_error(squared: &[f64]) -> (f64, f64) {
    let est = mean_estimate(squared);
    let e = est.mean.max(0.0).sqrt();
    let se = if e > 0.0 { est.stderr / (2.0 * e) } else { 0.0 };
    (e, se)
}

fn check_axis(plan: &ExperimentPlan, axis: Axis) -> Result<()> {
    if plan.axis != axis {
        return Err(Error::param("axis", format!("expected {axis}, got {}", plan.axis)));
    }
    plan.validate()
}

fn status(model: &ModelConfig) -> RunStatus {
    if model.satisfies_rate_assumptions() {
        RunStatus::Acceptance
    } else {
        RunStatus::Exploratory
    }
}

/// Draws the fine noise for one sample: `k` modes on `steps` steps.
fn sample_noise(
    model: &ModelConfig,
    sampler: &Option<CirculantSampler>,
    k: usize,
    steps: usize,
    dt: f64,
    seed: Seed,
) -> Result<NoiseIncrements> {
    match sampler {
        Some(s) => Ok(build_noise(&model.q, &s.sample_block(k, seed)?)),
        None => NoiseIncrements::zeros(k, steps, dt),
    }
}

fn make_sampler(model: &ModelConfig, dt: f64, steps: usize) -> Result<Option<CirculantSampler>> {
    if model.q.is_zero() {
        Ok(None)
    } else {
        CirculantSampler::new(model.hurst, dt, steps).map(Some)
    }
}

/// Runs `per_sample` in parallel and transposes to per-level columns.
fn collect_levels<F>(plan: &ExperimentPlan, per_sample: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(Seed) -> Result<Vec<f64>> + Sync,
{
    let root = Seed::new(plan.seed);
    let rows: Vec<Vec<f64>> = (0..plan.samples)
        .into_par_iter()
        .map(|s| per_sample(root.child(s as u64)))
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, |r| r.len());
    Ok((0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

fn finish(
    model: &ModelConfig,
    plan: &ExperimentPlan,
    levels: Vec<LevelError>,
    predicted_slope: f64,
) -> Result<ErrorReport> {
    let points: Vec<FitPoint> = levels
        .iter()
        .map(|l| (l.level as f64, l.error, l.stderr).into())
        .collect();
    let fit = fit_order(&points).ok();
    let mut levels = levels;
    if let Some(f) = &fit {
        for &i in &f.censored {
            levels[i].censored = true;
        }
    } else {
        levels.iter_mut().for_each(|l| l.censored = true);
    }
    let slope = fit.as_ref().map(|f| f.slope);
    if let Some(s) = slope {
        if !s.is_finite() {
            return Err(Error::param("fit", "slope is not finite"));
        }
    }
    Ok(ErrorReport {
        schema_version: SCHEMA_VERSION,
        axis: plan.axis,
        status: status(model),
        levels,
        fit,
        exponent: slope,
        fourth_moment_exponent: None,
        predicted_slope,
        certified_gamma: model.certified_gamma,
        model: model.clone(),
        plan: plan.clone(),
        config_echo: config_echo(model, plan),
    })
}

fn level_rows(plan: &ExperimentPlan, columns: &[Vec<f64>]) -> Vec<LevelError> {
    plan.levels
        .iter()
        .zip(columns)
        .map(|(&level, col)| {
            let (error, stderr) = strong_error(col);
            LevelError {
                level,
                error,
                stderr,
                samples: plan.samples,
                censored: false,
                tail_norm: None,
                ratio: None,
                fourth_moment: None,
            }
        })
        .collect()
}

/// Error against a reference at `N_ref` steps; each level `N` runs on the
/// aggregated reference noise and is compared at its own grid times.
pub fn run_temporal_study(model: &ModelConfig, plan: &ExperimentPlan) -> Result<ErrorReport> {
    check_axis(plan, Axis::Time)?;
    let base = plan.scheme;
    let n_ref = plan.reference_level;
    let reference = Scheme::new(base, model.nonlinearity)?;
    let coarse: Vec<(usize, Scheme)> = plan
        .levels
        .iter()
        .map(|&n| Ok((n_ref / n, Scheme::new(SchemeConfig { steps: n, ..base }, model.nonlinearity)?)))
        .collect::<Result<_>>()?;
    let sampler = make_sampler(model, base.h(), n_ref)?;
    let u0 = model.u0_state(base.modes);
    let columns = collect_levels(plan, |seed| {
        let noise = sample_noise(model, &sampler, base.noise_modes, n_ref, base.h(), seed)?;
        let fine = reference.run(&noise, &u0)?;
        coarse
            .iter()
            .map(|(ratio, scheme)| {
                let traj = scheme.run(&coarsen_noise(&noise, *ratio)?, &u0)?;
                Ok(sup_distance_sq(fine.states(), *ratio, traj.states()))
            })
            .collect()
    })?;
    finish(model, plan, level_rows(plan, &columns), -1.0)
}

/// Error against a reference with `M_ref` modes; every level sees the same
/// `K = M_ref` noise modes and drops those above `M` inside the step.
pub fn run_spatial_study(model: &ModelConfig, plan: &ExperimentPlan) -> Result<ErrorReport> {
    check_axis(plan, Axis::Space)?;
    let base = plan.scheme;
    let reference = Scheme::new(base, model.nonlinearity)?;
    let coarse: Vec<Scheme> = plan
        .levels
        .iter()
        .map(|&m| Scheme::new(SchemeConfig { modes: m, ..base }, model.nonlinearity))
        .collect::<Result<_>>()?;
    let sampler = make_sampler(model, base.h(), base.steps)?;
    let u0_ref = model.u0_state(base.modes);
    let columns = collect_levels(plan, |seed| {
        let noise = sample_noise(model, &sampler, base.noise_modes, base.steps, base.h(), seed)?;
        let fine = reference.run(&noise, &u0_ref)?;
        coarse
            .iter()
            .map(|scheme| {
                let u0 = model.u0_state(scheme.config().modes);
                let traj = scheme.run(&noise, &u0)?;
                Ok(sup_distance_sq(fine.states(), 1, traj.states()))
            })
            .collect()
    })?;
    let gamma = model.certified_gamma;
    let predicted = -f64::min(2.0 * model.hurst.value() + gamma - 1.0, 2.0);
    finish(model, plan, level_rows(plan, &columns), predicted)
}

/// Error against `K_ref` noise modes with `M = K_ref` fixed; level `K`
/// keeps only the first `K` rows of the same noise. Each level also reports
/// the tail norm and the ratio `ê / tail`.
pub fn run_truncation_study(model: &ModelConfig, plan: &ExperimentPlan) -> Result<ErrorReport> {
    check_axis(plan, Axis::Truncation)?;
    let base = plan.scheme;
    let scheme = Scheme::new(base, model.nonlinearity)?;
    let sampler = make_sampler(model, base.h(), base.steps)?;
    let u0 = model.u0_state(base.modes);
    let columns = collect_levels(plan, |seed| {
        let noise = sample_noise(model, &sampler, base.noise_modes, base.steps, base.h(), seed)?;
        let fine = scheme.run(&noise, &u0)?;
        plan.levels
            .iter()
            .map(|&k| {
                let traj = scheme.run(&truncate_noise(&noise, k)?, &u0)?;
                Ok(sup_distance_sq(fine.states(), 1, traj.states()))
            })
            .collect()
    })?;
    let mut rows = level_rows(plan, &columns);
    for row in &mut rows {
        let tail = q_tail_norm(&model.q, row.level, model.hurst);
        row.tail_norm = Some(tail);
        row.ratio = (tail > 0.0).then(|| row.error / tail);
    }
    let predicted = -(4.0 * model.hurst.value() + model.q.decay() - 1.0) / 2.0;
    finish(model, plan, rows, predicted)
}

/// Mean `‖X_{t+δ} − X_t‖²` at lags `δ = ℓ h`, averaged over samples and
/// over start times in the second half of the horizon. The exponent is half
/// the log-log slope against `δ`.
pub fn run_hoelder_study(model: &ModelConfig, plan: &ExperimentPlan) -> Result<ErrorReport> {
    check_axis(plan, Axis::Hoelder)?;
    let base = plan.scheme;
    let scheme = Scheme::new(base, model.nonlinearity)?;
    let sampler = make_sampler(model, base.h(), base.steps)?;
    let u0 = model.u0_state(base.modes);
    let start = base.steps / 2;
    let columns = collect_levels(plan, |seed| {
        let noise = sample_noise(model, &sampler, base.noise_modes, base.steps, base.h(), seed)?;
        let traj = scheme.run(&noise, &u0)?;
        let states = traj.states();
        let mut out = Vec::with_capacity(2 * plan.levels.len());
        for &lag in &plan.levels {
            let d: Vec<f64> = (start..=base.steps - lag)
                .map(|n| states[n + lag].distance_sq(&states[n]))
                .collect();
            let d4: Vec<f64> = d.iter().map(|x| x * x).collect();
            out.push(crate::stats::pairwise_sum(&d) / d.len() as f64);
            out.push(crate::stats::pairwise_sum(&d4) / d4.len() as f64);
        }
        Ok(out)
    })?;
    let h = base.h();
    let mut rows = Vec::new();
    let mut fourth_points = Vec::new();
    for (i, &lag) in plan.levels.iter().enumerate() {
        let m2 = mean_estimate(&columns[2 * i]);
        let m4 = mean_estimate(&columns[2 * i + 1]);
        fourth_points.push(FitPoint::from((lag as f64 * h, m4.mean, m4.stderr)));
        rows.push(LevelError {
            level: lag,
            error: m2.mean,
            stderr: m2.stderr,
            samples: plan.samples,
            censored: false,
            tail_norm: None,
            ratio: None,
            fourth_moment: Some(m4.mean),
        });
    }
    let mut report = finish(model, plan, rows, 2.0 * model.hurst.value())?;
    report.exponent = report.fit.as_ref().map(|f| f.slope / 2.0);
    report.fourth_moment_exponent = fit_order(&fourth_points).ok().map(|f| f.slope / 4.0);
    Ok(report)
}

pub fn run_study(model: &ModelConfig, plan: &ExperimentPlan) -> Result<ErrorReport> {
    match plan.axis {
        Axis::Time => run_temporal_study(model, plan),
        Axis::Space => run_spatial_study(model, plan),
        Axis::Truncation => run_truncation_study(model, plan),
        Axis::Hoelder => run_hoelder_study(model, plan),
    }
}
