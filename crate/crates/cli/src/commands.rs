use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use fbmshe::config::{echo_model, parse_config};
use fbmshe::fgn::{fgn_autocovariance, CirculantSampler};
use fbmshe::harness::{run_study, Axis, ErrorReport, SCHEMA_VERSION};
use fbmshe::kernelcheck::{KernelAudit, KernelIntegral, RICHARDSON_TOLERANCE};
use fbmshe::noise::build_noise;
use fbmshe::{ExperimentPlan, ModelConfig, PlanSettings, Scheme, SchemeConfig, Seed};
use serde_json::json;

use crate::bands::{self, Check};
use crate::{CliError, Command, CommonArgs};

const DEFAULT_HURST: f64 = 0.75;
const DEFAULT_SEED: u64 = fbmshe::harness::DEFAULT_SEED;

struct Inputs {
    model: ModelConfig,
    settings: PlanSettings,
}

fn load(args: &CommonArgs) -> Result<Inputs, CliError> {
    let (model, mut settings) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let parsed = parse_config(&text).map_err(|e| CliError::Invalid(format!("{}:\n{e}", path.display())))?;
            (parsed.model, parsed.plan)
        }
        None => (ModelConfig::with_hurst(DEFAULT_HURST)?, PlanSettings::default()),
    };
    if args.seed.is_some() {
        settings.seed = args.seed;
    }
    if args.samples.is_some() {
        settings.samples = args.samples;
    }
    Ok(Inputs { model, settings })
}

fn write_file(out: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `# schema_version` plus the echo as comment lines.
fn csv_preamble(echo: &str) -> String {
    let mut s = format!("# schema_version = {SCHEMA_VERSION}\n");
    for line in echo.lines() {
        if line.starts_with('#') {
            s.push_str(line);
        } else {
            s.push_str("# ");
            s.push_str(line);
        }
        s.push('\n');
    }
    s
}

fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |v| format!("{v:.4}"))
}

pub(crate) fn dispatch(command: &Command, args: &CommonArgs) -> Result<String, CliError> {
    let inputs = load(args)?;
    match command {
        Command::Simulate(_) => simulate(&inputs, &args.out),
        Command::ConvergeTime(_) => study(Axis::Time, "converge-time", &inputs, &args.out),
        Command::ConvergeSpace(_) => study(Axis::Space, "converge-space", &inputs, &args.out),
        Command::ConvergeTrunc(_) => study(Axis::Truncation, "converge-trunc", &inputs, &args.out),
        Command::Hoelder(_) => study(Axis::Hoelder, "hoelder", &inputs, &args.out),
        Command::VerifyKernels(_) => verify_kernels(&inputs, &args.out),
        Command::SampleFbm(_) => sample_fbm(&inputs, &args.out),
    }
}

fn study(axis: Axis, name: &str, inputs: &Inputs, out: &Path) -> Result<String, CliError> {
    let plan = ExperimentPlan::from_settings(axis, &inputs.model, &inputs.settings)?;
    let report = run_study(&inputs.model, &plan)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut json = report.to_json();
    json.push('\n');
    write_file(out, "report.json", json.as_bytes())?;
    write_file(out, "errors.csv", &csv)?;
    write_file(out, "config.echo.txt", report.config_echo.as_bytes())?;
    Ok(study_summary(name, &report, out))
}

fn study_summary(name: &str, report: &ErrorReport, out: &Path) -> String {
    let mut s = String::new();
    let status = format!("{:?}", report.status).to_lowercase();
    let _ = writeln!(
        s,
        "fbmshe {name}: axis {}, H = {}, certified gamma = {:.4}, status {status}",
        report.axis,
        report.model.hurst.value(),
        report.certified_gamma
    );
    let _ = writeln!(
        s,
        "  samples {}, seed {}, M {}, N {}, K {}",
        report.plan.samples, report.plan.seed, report.plan.scheme.modes, report.plan.scheme.steps, report.plan.scheme.noise_modes
    );
    let value_name = if report.axis == Axis::Hoelder { "E|dX|^2" } else { "error" };
    let _ = writeln!(s, "  {:>8} {:>14} {:>12}  censored", "level", value_name, "stderr");
    for l in &report.levels {
        let _ = write!(s, "  {:>8} {:>14.6e} {:>12.3e}  {}", l.level, l.error, l.stderr, l.censored);
        if let Some(r) = l.ratio {
            let _ = write!(s, "  ratio {r:.4}");
        }
        s.push('\n');
    }
    match &report.fit {
        Some(f) => {
            let _ = writeln!(
                s,
                "  slope {:.4}  intercept {:.4}  R^2 {:.4}  (predicted {:.4})",
                f.slope, f.intercept, f.r_squared, report.predicted_slope
            );
        }
        None => {
            let _ = writeln!(s, "  fit degenerate: fewer than two levels above the noise floor");
        }
    }
    if let Some(e) = report.exponent.filter(|_| report.axis == Axis::Hoelder) {
        let _ = writeln!(s, "  exponent {e:.4}  fourth-moment exponent {}", fmt_opt(report.fourth_moment_exponent));
    }
    let _ = writeln!(s, "acceptance bands:");
    for c in bands::report_checks(report) {
        let _ = writeln!(s, "{c}");
    }
    let _ = writeln!(s, "wrote report.json, errors.csv, config.echo.txt to {}", out.display());
    s
}

fn simulation_config(inputs: &Inputs) -> Result<(SchemeConfig, u64), CliError> {
    let s = &inputs.settings;
    let modes = s.modes.unwrap_or(64);
    let steps = s.steps.or(s.reference_level).unwrap_or(1024);
    let cfg = SchemeConfig::new(modes, steps, s.noise_modes.unwrap_or(modes), inputs.model.t_end)?;
    Ok((cfg, s.seed.unwrap_or(DEFAULT_SEED)))
}

fn simulate(inputs: &Inputs, out: &Path) -> Result<String, CliError> {
    let model = &inputs.model;
    let (cfg, seed) = simulation_config(inputs)?;
    let echo = format!(
        "# command = simulate\n{}modes = {}\nsteps = {}\nnoise_modes = {}\nseed = {seed}\n",
        echo_model(model),
        cfg.modes,
        cfg.steps,
        cfg.noise_modes
    );
    let noise = if model.q.is_zero() {
        fbmshe::NoiseIncrements::zeros(cfg.noise_modes, cfg.steps, cfg.h())?
    } else {
        let sampler = CirculantSampler::new(model.hurst, cfg.h(), cfg.steps)?;
        build_noise(&model.q, &sampler.sample_block(cfg.noise_modes, Seed::new(seed).child(0))?)
    };
    let scheme = Scheme::new(cfg, model.nonlinearity)?;
    let traj = scheme.run(&noise, &model.u0_state(cfg.modes))?;

    let mut csv = csv_preamble(&echo).into_bytes();
    traj.write_csv(&mut csv)?;
    let norms: Vec<f64> = traj.states().iter().map(|s| s.norm()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let final_norm = *norms.last().expect("trajectory is never empty");
    let assumptions = model.assumptions();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "scheme": cfg,
        "seed": seed,
        "final_norm": final_norm,
        "max_norm": max_norm,
        "assumptions": assumptions,
        "model": model,
        "config_echo": echo,
    });
    write_file(out, "report.json", &json_bytes(&report))?;
    write_file(out, "trajectory.csv", &csv)?;
    write_file(out, "config.echo.txt", echo.as_bytes())?;
    Ok(format!(
        "fbmshe simulate: H = {}, M {}, N {}, K {}, seed {seed}\n  final |X| = {final_norm:.6e}, max |X| = {max_norm:.6e}\n  rate assumptions hold: {}\nwrote report.json, trajectory.csv, config.echo.txt to {}\n",
        model.hurst.value(),
        cfg.modes,
        cfg.steps,
        cfg.noise_modes,
        assumptions.rate_assumptions_hold,
        out.display()
    ))
}

/// Summary checks for the kernel audit.
pub fn kernel_checks(audit: &KernelAudit) -> Vec<Check> {
    let mut checks = Vec::new();
    for (rho, fit) in &audit.hoelder {
        let target = 2.0 * (audit.hurst - rho);
        checks.push(Check::within(
            format!("hoelder_kernel exponent rho={rho}"),
            Some(fit.slope),
            (target - bands::KERNEL_EXPONENT_HALF_WIDTH, target + bands::KERNEL_EXPONENT_HALF_WIDTH),
        ));
    }
    checks.push(Check::at_most("mode_damped lambda slope", Some(audit.mode_damped.slope), audit.mode_damped_bound));
    checks.push(Check::within("increment_block h slope", Some(audit.block_h.slope), bands::BLOCK_H_SLOPE));
    checks.push(Check::within(
        "increment_block lambda slope",
        Some(audit.block_lambda.slope),
        bands::BLOCK_LAMBDA_SLOPE,
    ));
    checks.push(Check::at_most(
        "max Richardson relative change",
        Some(audit.max_relative_change()),
        RICHARDSON_TOLERANCE,
    ));
    checks
}

fn verify_kernels(inputs: &Inputs, out: &Path) -> Result<String, CliError> {
    let hurst = inputs.model.hurst;
    let echo = format!("# command = verify-kernels\nhurst = {:?}\n", hurst.value());
    let audit = KernelAudit::run(hurst)?;
    let rows = audit.rows();
    let mut csv = csv_preamble(&echo);
    csv.push_str(KernelIntegral::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let checks = kernel_checks(&audit);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify-kernels",
        "audit": audit,
        "max_relative_change": audit.max_relative_change(),
        "checks": checks.iter().map(|c| json!({"name": c.name, "value": c.value, "band": c.band, "pass": c.pass})).collect::<Vec<_>>(),
        "config_echo": echo,
    });
    write_file(out, "report.json", &json_bytes(&report))?;
    write_file(out, "kernels.csv", csv.as_bytes())?;
    write_file(out, "config.echo.txt", echo.as_bytes())?;
    let mut s = format!("fbmshe verify-kernels: H = {}, {} quadratures\n", hurst.value(), rows.len());
    for (rho, f) in &audit.hoelder {
        let _ = writeln!(s, "  hoelder_kernel rho={rho}: exponent {:.4} (R^2 {:.4})", f.slope, f.r_squared);
    }
    let _ = writeln!(s, "  mode_damped: lambda slope {:.4}", audit.mode_damped.slope);
    let _ = writeln!(s, "  increment_block: h slope {:.4}, lambda slope {:.4}", audit.block_h.slope, audit.block_lambda.slope);
    let _ = writeln!(s, "acceptance bands:");
    for c in &checks {
        let _ = writeln!(s, "{c}");
    }
    let _ = writeln!(s, "wrote report.json, kernels.csv, config.echo.txt to {}", out.display());
    Ok(s)
}

const FGN_LAGS: usize = 6;

fn sample_fbm(inputs: &Inputs, out: &Path) -> Result<String, CliError> {
    let model = &inputs.model;
    let s = &inputs.settings;
    let steps = s.steps.or(s.reference_level).unwrap_or(1024);
    let streams = s.samples.unwrap_or(4);
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    if streams == 0 {
        return Err(CliError::Invalid("samples must be positive".into()));
    }
    let dt = model.t_end / steps as f64;
    let echo = format!(
        "# command = sample-fbm\nhurst = {:?}\nt_end = {:?}\nsteps = {steps}\nsamples = {streams}\nseed = {seed}\n",
        model.hurst.value(),
        model.t_end
    );
    let block = CirculantSampler::new(model.hurst, dt, steps)?.sample_block(streams, Seed::new(seed))?;
    let mut csv = Vec::new();
    {
        let mut w = BufWriter::new(&mut csv);
        w.write_all(csv_preamble(&echo).as_bytes())?;
        writeln!(w, "stream,step,increment")?;
        for (i, row) in block.increments().outer_iter().enumerate() {
            for (n, x) in row.iter().enumerate() {
                writeln!(w, "{i},{n},{x:.16e}")?;
            }
        }
        w.flush()?;
    }
    let lags = FGN_LAGS.min(steps);
    let empirical: Vec<f64> = (0..lags)
        .map(|k| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for row in block.increments().outer_iter() {
                for n in 0..steps - k {
                    sum += row[n] * row[n + k];
                    count += 1;
                }
            }
            sum / count as f64
        })
        .collect();
    let exact: Vec<f64> = (0..lags).map(|k| fgn_autocovariance(model.hurst, dt, k as i64)).collect();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "sample-fbm",
        "hurst": model.hurst.value(),
        "dt": dt,
        "steps": steps,
        "streams": streams,
        "seed": seed,
        "empirical_autocovariance": empirical,
        "exact_autocovariance": exact,
        "config_echo": echo,
    });
    write_file(out, "report.json", &json_bytes(&report))?;
    write_file(out, "fgn.csv", &csv)?;
    write_file(out, "config.echo.txt", echo.as_bytes())?;
    let mut s = format!("fbmshe sample-fbm: H = {}, {streams} streams x {steps} steps, dt = {dt:e}\n", model.hurst.value());
    let _ = writeln!(s, "  {:>4} {:>14} {:>14}", "lag", "empirical", "exact");
    for k in 0..lags {
        let _ = writeln!(s, "  {k:>4} {:>14.6e} {:>14.6e}", empirical[k], exact[k]);
    }
    let _ = writeln!(s, "wrote report.json, fgn.csv, config.echo.txt to {}", out.display());
    Ok(s)
}
