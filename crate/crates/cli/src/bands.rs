//! Acceptance bands shown in the stdout summary.

use std::fmt;

use fbmshe::harness::{Axis, ErrorReport};

pub const TIME_SLOPE: (f64, f64) = (-1.15, -0.85);
pub const TIME_R2_MIN: f64 = 0.98;
pub const SPACE_SLOPE: (f64, f64) = (-2.3, -1.7);
pub const TRUNCATION_EXPONENT: f64 = -4.75;
pub const TRUNCATION_HALF_WIDTH: f64 = 0.75;
pub const TRUNCATION_RATIO_SPREAD: f64 = 10.0;
pub const HOELDER_HALF_WIDTH: f64 = 0.1;
pub const KERNEL_EXPONENT_HALF_WIDTH: f64 = 0.1;
pub const BLOCK_H_SLOPE: (f64, f64) = (1.8, 2.2);
pub const BLOCK_LAMBDA_SLOPE: (f64, f64) = (-1.2, -0.8);

fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

/// One summary line: a measured value against its band.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub band: String,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: Option<f64>, (lo, hi): (f64, f64)) -> Self {
        Check {
            name: name.into(),
            value,
            band: format!("[{}, {}]", num(lo), num(hi)),
            pass: value.is_some_and(|v| (lo..=hi).contains(&v)),
        }
    }

    pub fn at_most(name: impl Into<String>, value: Option<f64>, max: f64) -> Self {
        Check {
            name: name.into(),
            value,
            band: format!("<= {}", num(max)),
            pass: value.is_some_and(|v| v <= max),
        }
    }

    pub fn at_least(name: impl Into<String>, value: Option<f64>, min: f64) -> Self {
        Check {
            name: name.into(),
            value,
            band: format!(">= {}", num(min)),
            pass: value.is_some_and(|v| v >= min),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.value.map_or("undefined".to_string(), |v| {
            if v != 0.0 && v.abs() < 1e-3 {
                format!("{v:.3e}")
            } else {
                format!("{v:.4}")
            }
        });
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "  {verdict}  {:<34} {v:>12}  band {}", self.name, self.band)
    }
}

/// Spread `max / min` of the truncation ratios `ê / tail`.
pub fn ratio_spread(report: &ErrorReport) -> Option<f64> {
    let ratios: Vec<f64> = report.levels.iter().filter_map(|l| l.ratio).filter(|r| *r > 0.0).collect();
    if ratios.is_empty() {
        return None;
    }
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    Some(max / min)
}

pub fn report_checks(report: &ErrorReport) -> Vec<Check> {
    let slope = report.slope();
    match report.axis {
        Axis::Time => vec![
            Check::within("slope in N", slope, TIME_SLOPE),
            Check::at_least("R^2", report.r_squared(), TIME_R2_MIN),
            Check::at_least("|slope| - H", slope.map(|s| -s - report.model.hurst.value()), 0.0),
        ],
        Axis::Space => vec![Check::within("slope in M", slope, SPACE_SLOPE)],
        Axis::Truncation => vec![
            Check::within(
                "slope in K",
                slope,
                (TRUNCATION_EXPONENT - TRUNCATION_HALF_WIDTH, TRUNCATION_EXPONENT + TRUNCATION_HALF_WIDTH),
            ),
            Check::at_most("ratio spread max/min", ratio_spread(report), TRUNCATION_RATIO_SPREAD),
        ],
        Axis::Hoelder => {
            let h = report.model.hurst.value();
            vec![Check::within(
                "Hoelder exponent",
                report.exponent,
                (h - HOELDER_HALF_WIDTH, h + HOELDER_HALF_WIDTH),
            )]
        }
    }
}
