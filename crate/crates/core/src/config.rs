//! Model configuration and the flat `key = value` experiment file format.
//!
//! ```text
//! # acceptance run in time
//! hurst = 0.75
//! q_decay = 7
//! nonlinearity = sine
//! nonlinearity_amplitude = 1
//! u0 = 1:1.0, 3:0.2
//! levels = 4, 8, 16, 32, 64
//! reference_level = 1024
//! ```
//!
//! Every key except `hurst` is optional. All violations are collected and
//! reported together, each with its line number.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::HurstParameter;
use crate::noise::QSpectrum;
use crate::spectral::{eigenvalue, Nonlinearity, SpectralState};

pub const DEFAULT_Q_DECAY: f64 = 7.0;
pub const DEFAULT_Q_AMPLITUDE: f64 = 1.0;
pub const DEFAULT_T_END: f64 = 1.0;

/// The problem instance: Hurst index, noise spectrum, nonlinearity, initial
/// condition and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hurst: HurstParameter,
    pub q: QSpectrum,
    pub nonlinearity: Nonlinearity,
    /// Sparse sine coefficients `(mode, coefficient)` of `u0`.
    pub u0: Vec<(usize, f64)>,
    pub t_end: f64,
    pub certified_gamma: f64,
}

/// Outcome of the regularity assumptions for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub certified_gamma: f64,
    /// `max{3 - 2H, 3/2}`; the main rate needs `γ` strictly above it.
    pub gamma_threshold: f64,
    pub rate_assumptions_hold: bool,
    /// `‖u0‖` in `V̇^{2H+γ-1}` over the supplied modes.
    pub u0_norm: f64,
    pub nonlinearity_bounded_derivatives: bool,
}

impl ModelConfig {
    pub fn new(
        hurst: HurstParameter,
        q: QSpectrum,
        nonlinearity: Nonlinearity,
        u0: Vec<(usize, f64)>,
        t_end: f64,
    ) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::param("t_end", "must be positive"));
        }
        if u0.iter().any(|&(m, c)| m == 0 || !c.is_finite()) {
            return Err(Error::param("u0", "modes must be >= 1 with finite coefficients"));
        }
        Ok(ModelConfig {
            hurst,
            q,
            nonlinearity,
            u0,
            t_end,
            certified_gamma: q.certified_gamma(),
        })
    }

    /// Default instance at the given Hurst index: `q(i) = i^{-7}`,
    /// `f = sin`, `u0 = e_1`, `T = 1`.
    pub fn with_hurst(hurst: f64) -> Result<Self> {
        Self::new(
            HurstParameter::new(hurst)?,
            QSpectrum::new(DEFAULT_Q_DECAY, DEFAULT_Q_AMPLITUDE)?,
            Nonlinearity::Sine { amplitude: 1.0 },
            vec![(1, 1.0)],
            DEFAULT_T_END,
        )
    }

    pub fn gamma_threshold(&self) -> f64 {
        f64::max(3.0 - 2.0 * self.hurst.value(), 1.5)
    }

    pub fn satisfies_rate_assumptions(&self) -> bool {
        self.certified_gamma > self.gamma_threshold()
    }

    pub fn u0_state(&self, modes: usize) -> SpectralState {
        SpectralState::from_modes(modes, &self.u0).expect("validated at construction")
    }

    pub fn u0_regularity_norm(&self) -> f64 {
        let theta = 2.0 * self.hurst.value() + self.certified_gamma - 1.0;
        self.u0
            .iter()
            .map(|&(m, c)| eigenvalue(m).powf(theta) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn assumptions(&self) -> AssumptionReport {
        AssumptionReport {
            certified_gamma: self.certified_gamma,
            gamma_threshold: self.gamma_threshold(),
            rate_assumptions_hold: self.satisfies_rate_assumptions(),
            u0_norm: self.u0_regularity_norm(),
            nonlinearity_bounded_derivatives: self.nonlinearity.has_bounded_derivatives(),
        }
    }
}

/// Experiment keys; every field is optional and filled from per-axis
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanSettings {
    pub levels: Option<Vec<usize>>,
    pub reference_level: Option<usize>,
    pub samples: Option<usize>,
    pub modes: Option<usize>,
    pub steps: Option<usize>,
    pub noise_modes: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub model: ModelConfig,
    pub plan: PlanSettings,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// All violations found in a config document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KEYS: &[&str] = &[
    "hurst",
    "q_decay",
    "q_amplitude",
    "nonlinearity",
    "nonlinearity_amplitude",
    "nonlinearity_offset",
    "u0",
    "t_end",
    "levels",
    "reference_level",
    "samples",
    "modes",
    "steps",
    "noise_modes",
    "seed",
];

struct Entries<'a> {
    values: HashMap<&'a str, (usize, &'a str)>,
    errors: Vec<ConfigError>,
}

impl<'a> Entries<'a> {
    fn err(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str) -> Option<T> {
        let (line, raw) = *self.values.get(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(Some(line), format!("{key}: cannot parse `{raw}`"));
                None
            }
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|e| e.0)
    }

    fn list(&mut self, key: &str) -> Option<Vec<usize>> {
        let (line, raw) = *self.values.get(key)?;
        let parsed: std::result::Result<Vec<usize>, _> =
            raw.split(',').map(|s| s.trim().parse::<usize>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.err(Some(line), format!("{key}: expected a comma separated list of positive integers, got `{raw}`"));
                None
            }
        }
    }
}

fn parse_u0(raw: &str) -> std::result::Result<Vec<(usize, f64)>, String> {
    if raw.trim().is_empty() || raw.trim() == "0" {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|item| {
            let (m, c) = item
                .split_once(':')
                .ok_or_else(|| format!("u0 entry `{}` must be mode:coefficient", item.trim()))?;
            let m: usize = m.trim().parse().map_err(|_| format!("u0 mode `{}` is not an integer", m.trim()))?;
            let c: f64 = c.trim().parse().map_err(|_| format!("u0 coefficient `{}` is not a number", c.trim()))?;
            if m == 0 {
                return Err("u0 modes are 1-based".to_string());
            }
            if !c.is_finite() {
                return Err(format!("u0 coefficient for mode {m} must be finite"));
            }
            Ok((m, c))
        })
        .collect()
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> std::result::Result<ParsedConfig, ConfigErrors> {
    let mut entries = Entries {
        values: HashMap::new(),
        errors: Vec::new(),
    };
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            entries.err(Some(line_no), format!("expected `key = value`, got `{content}`"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            entries.err(Some(line_no), format!("unknown key `{key}`"));
            continue;
        }
        if let Some(&(first, _)) = entries.values.get(key) {
            entries.err(Some(line_no), format!("duplicate key `{key}` (lines {first} and {line_no})"));
            continue;
        }
        entries.values.insert(key, (line_no, value));
    }

    let hurst_line = entries.line("hurst");
    let hurst = match entries.get::<f64>("hurst") {
        Some(v) => match HurstParameter::new(v) {
            Ok(h) => Some(h),
            Err(_) => {
                entries.err(hurst_line, "hurst must lie strictly in (0.5, 1)");
                None
            }
        },
        None => {
            if hurst_line.is_none() {
                entries.err(None, "missing required key `hurst`");
            }
            None
        }
    };

    let decay = entries.get::<f64>("q_decay").unwrap_or(DEFAULT_Q_DECAY);
    let amplitude = entries.get::<f64>("q_amplitude").unwrap_or(DEFAULT_Q_AMPLITUDE);
    let q = match QSpectrum::new(decay, amplitude) {
        Ok(q) => Some(q),
        Err(e) => {
            let line = if decay > 0.0 { entries.line("q_amplitude") } else { entries.line("q_decay") };
            entries.err(line, e.to_string());
            None
        }
    };

    let kind_line = entries.line("nonlinearity");
    let kind: String = entries.get("nonlinearity").unwrap_or_else(|| "sine".to_string());
    let f_amp = entries.get::<f64>("nonlinearity_amplitude").unwrap_or(1.0);
    let offset_line = entries.line("nonlinearity_offset");
    let f_offset = entries.get::<f64>("nonlinearity_offset");
    if !f_amp.is_finite() {
        let l = entries.line("nonlinearity_amplitude");
        entries.err(l, "nonlinearity_amplitude must be finite");
    }
    let nonlinearity = match kind.as_str() {
        "zero" => Some(Nonlinearity::Zero),
        "linear" => {
            let a = f_amp;
            if !(a < eigenvalue(1)) {
                let l = entries.line("nonlinearity_amplitude");
                entries.err(l, format!("linear slope must be below λ_1 = {}", eigenvalue(1)));
            }
            Some(Nonlinearity::Linear { a, b: f_offset.unwrap_or(0.0) })
        }
        "sine" => Some(Nonlinearity::Sine { amplitude: f_amp }),
        "tanh" => Some(Nonlinearity::Tanh { amplitude: f_amp }),
        other => {
            entries.err(kind_line, format!("nonlinearity must be one of zero, linear, sine, tanh; got `{other}`"));
            None
        }
    };
    if f_offset.is_some() && kind != "linear" {
        entries.err(offset_line, "nonlinearity_offset only applies to nonlinearity = linear");
    }

    let u0 = match entries.values.get("u0").copied() {
        Some((line, raw)) => match parse_u0(raw) {
            Ok(v) => v,
            Err(msg) => {
                entries.err(Some(line), msg);
                Vec::new()
            }
        },
        None => vec![(1, 1.0)],
    };

    let t_end = entries.get::<f64>("t_end").unwrap_or(DEFAULT_T_END);
    if !(t_end > 0.0 && t_end.is_finite()) {
        let l = entries.line("t_end");
        entries.err(l, "t_end must be positive");
    }

    let plan = PlanSettings {
        levels: entries.list("levels"),
        reference_level: entries.get("reference_level"),
        samples: entries.get("samples"),
        modes: entries.get("modes"),
        steps: entries.get("steps"),
        noise_modes: entries.get("noise_modes"),
        seed: entries.get("seed"),
    };
    for (key, v) in [
        ("reference_level", plan.reference_level),
        ("modes", plan.modes),
        ("steps", plan.steps),
        ("noise_modes", plan.noise_modes),
    ] {
        if v == Some(0) {
            let l = entries.line(key);
            entries.err(l, format!("{key} must be positive"));
        }
    }
    if let Some(levels) = &plan.levels {
        if levels.iter().any(|&l| l == 0) {
            let l = entries.line("levels");
            entries.err(l, "levels must be positive");
        }
    }
    if let Some(s) = plan.samples {
        if s < 2 {
            let l = entries.line("samples");
            entries.err(l, "samples must be >= 2");
        }
    }

    if !entries.errors.is_empty() {
        entries.errors.sort_by_key(|e| e.line.unwrap_or(0));
        return Err(ConfigErrors(entries.errors));
    }
    let model = ModelConfig::new(hurst.unwrap(), q.unwrap(), nonlinearity.unwrap(), u0, t_end)
        .map_err(|e| ConfigErrors(vec![ConfigError { line: None, message: e.to_string() }]))?;
    Ok(ParsedConfig { model, plan })
}

fn nonlinearity_keys(f: &Nonlinearity) -> String {
    match *f {
        Nonlinearity::Zero => "nonlinearity = zero\n".to_string(),
        Nonlinearity::Linear { a, b } => format!(
            "nonlinearity = linear\nnonlinearity_amplitude = {a:?}\nnonlinearity_offset = {b:?}\n"
        ),
        Nonlinearity::Sine { amplitude } => format!("nonlinearity = sine\nnonlinearity_amplitude = {amplitude:?}\n"),
        Nonlinearity::Tanh { amplitude } => format!("nonlinearity = tanh\nnonlinearity_amplitude = {amplitude:?}\n"),
    }
}

/// Canonical text form of a model; [`parse_config`] reads it back to an
/// identical model.
pub fn echo_model(model: &ModelConfig) -> String {
    let u0 = if model.u0.is_empty() {
        "0".to_string()
    } else {
        model
            .u0
            .iter()
            .map(|(m, c)| format!("{m}:{c:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "hurst = {:?}\nq_decay = {:?}\nq_amplitude = {:?}\n{}u0 = {u0}\nt_end = {:?}\n",
        model.hurst.value(),
        model.q.decay(),
        model.q.amplitude(),
        nonlinearity_keys(&model.nonlinearity),
        model.t_end,
    )
}
