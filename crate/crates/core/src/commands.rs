//! Command orchestration: config in, CSV/JSON/plot files out.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, TargetConfig};
use crate::error::{Error, Result};
use crate::parallel::{try_map_indexed, with_workers};
use crate::recovery::{recover_expansion, Mode};
use crate::report::{emit_plot_data, sha256_hex, write_csv, write_json, Manifest, PlotSeries, ResultRow, SCHEMA_VERSION};
use crate::stats::{
    default_tube_exponent, noise_statistics, nonconvergence_experiment, rate_certificate_experiment,
    trajectory_as_convergence_check, variance_scaling_experiment, SlopeRegression, Z95,
};

const MODULE: &str = "cli_io";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Recover,
    NoiseStats,
    VarianceScaling,
    Nonconvergence,
    Rate,
    Asymptotics,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Recover,
        Command::NoiseStats,
        Command::VarianceScaling,
        Command::Nonconvergence,
        Command::Rate,
        Command::Asymptotics,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Recover => "recover",
            Command::NoiseStats => "noise-stats",
            Command::VarianceScaling => "variance-scaling",
            Command::Nonconvergence => "nonconvergence",
            Command::Rate => "rate",
            Command::Asymptotics => "asymptotics",
        }
    }

    fn file_stem(&self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::config(MODULE, format!("unknown command {s:?}")))
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    /// Fill the `wall_time_s` column (makes CSVs differ between runs).
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment_id: String,
    pub rows: Vec<ResultRow>,
    pub summary: Value,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Short human-readable report.
    pub lines: Vec<String>,
}

struct Output {
    tables: Vec<(String, Vec<ResultRow>)>,
    summary: Value,
    plots: Vec<PlotSeries>,
    warnings: Vec<String>,
    lines: Vec<String>,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::config(MODULE, format!("config has no [{name}] table")))
}

fn c64(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Loads the config, applies overrides, runs `command`, writes artifacts.
pub fn run_command(command: Command, config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = config.clone();
    if let Some(s) = options.seed {
        cfg.seed = s;
    }
    if let Some(t) = options.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let canonical = cfg.to_toml_string()?;
    let config_sha256 = sha256_hex(canonical.as_bytes());
    let experiment_id = sha256_hex(format!("{}:{}:{}", command.name(), config_sha256, cfg.seed).as_bytes())[..16].to_string();
    let out_dir = options
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));

    let start = Instant::now();
    let mut output = with_workers(options.workers, || execute(command, &cfg, &experiment_id))?;
    let wall = start.elapsed().as_secs_f64();
    if options.timing {
        for (_, rows) in &mut output.tables {
            for r in rows.iter_mut() {
                r.wall_time_s = Some(wall);
            }
        }
    }

    fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    let stem = command.file_stem();
    for (suffix, rows) in &output.tables {
        let path = out_dir.join(format!("{stem}{suffix}.csv"));
        write_csv(&path, rows)?;
        files.push(path);
    }
    let summary_path = out_dir.join(format!("{stem}_summary.json"));
    write_json(&summary_path, &output.summary)?;
    files.push(summary_path);
    let (plot_files, plot_warnings) = emit_plot_data(&out_dir, &output.plots)?;
    files.extend(plot_files);
    output.warnings.extend(plot_warnings);

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment_id: experiment_id.clone(),
        command: command.name().to_string(),
        config_sha256,
        config: canonical,
        seed: cfg.seed,
        trials: cfg.trials,
        workers: options.workers,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        files: files.iter().map(|f| file_name(f)).collect(),
        wall_time_s: wall,
    };
    let manifest_path = out_dir.join(format!("{stem}_manifest.json"));
    write_json(&manifest_path, &manifest)?;
    files.push(manifest_path);

    Ok(RunOutcome {
        experiment_id,
        rows: output.tables.into_iter().flat_map(|(_, r)| r).collect(),
        summary: output.summary,
        files,
        warnings: output.warnings,
        lines: output.lines,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn execute(command: Command, cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    match command {
        Command::Recover => recover(cfg, id),
        Command::NoiseStats => noise_stats(cfg, id),
        Command::VarianceScaling => variance_scaling(cfg, id),
        Command::Nonconvergence => nonconvergence(cfg, id),
        Command::Rate => rate(cfg, id),
        Command::Asymptotics => asymptotics(cfg, id),
    }
}

fn recover(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let r = section(&cfg.recover, "recover")?;
    let plan = cfg.plan()?;
    let options = cfg.recovery_options(r)?;
    let report = recover_expansion(&cfg.model()?, &plan, &r.x0_grid, &r.xi0, &options)?;
    let name = Command::Recover.name();
    let rows = report
        .estimates
        .iter()
        .map(|e| {
            ResultRow::new(id, name, e.term, e.n, e.value, e.seed)
                .truth(e.truth)
                .error(e.error)
                .variance(e.noise_variance)
                .ci(Z95 * (e.noise_variance / 2.0).sqrt())
        })
        .collect();
    let mut plot = PlotSeries::new("recover", &["x0", "xi0", "term", "value_re", "value_im", "truth_re", "truth_im"]);
    for e in &report.estimates {
        plot.push(vec![e.x0, e.xi0, e.term as f64, e.value.re, e.value.im, e.truth.re, e.truth.im]);
    }
    let mut lines = vec![format!(
        "plan: j_beta = {}, k_beta = {}, lambdas = {:?}, modes = {:?}",
        plan.j_beta,
        plan.k_beta,
        plan.lambdas,
        plan.modes.iter().map(|m| m.as_str()).collect::<Vec<_>>()
    )];
    let mut warnings = Vec::new();
    for j in 1..=plan.k_beta {
        lines.push(format!("term {j}: max |error| = {:.4e}", report.max_error(j)));
    }
    for a in report.alerts() {
        warnings.push(format!(
            "term {} at x0 = {}, xi0 = {}: error {:.4e} exceeds the alert threshold",
            a.term, a.x0, a.xi0, a.error
        ));
    }
    let summary = json!({
        "command": name,
        "experiment_id": id,
        "plan": report.plan,
        "subtract": report.subtract.as_str(),
        "max_error": (1..=plan.k_beta).map(|j| report.max_error(j)).collect::<Vec<_>>(),
        "alerts": report.alerts().count(),
        "estimates": report.estimates,
    });
    Ok(Output {
        tables: vec![(String::new(), rows)],
        summary,
        plots: vec![plot],
        warnings,
        lines,
    })
}

fn noise_stats(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let n = section(&cfg.noise_stats, "noise_stats")?;
    let samples = n.samples.unwrap_or(cfg.trials);
    let s = noise_statistics(&cfg.family(n.lambda)?, &n.nodes, cfg.model.beta, n.truncation, samples, cfg.seed)?;
    let name = Command::NoiseStats.name();
    let mut rows = Vec::new();
    for (i, &t) in s.nodes.iter().enumerate() {
        rows.push(
            ResultRow::new(id, name, 0, t, c64(s.isometry[i]), cfg.seed)
                .truth(c64(1.0))
                .error((s.isometry[i] - 1.0).abs())
                .ci(Z95 * s.isometry_stderr[i]),
        );
    }
    for (i, &t) in s.nodes.iter().enumerate() {
        for j in 0..s.nodes.len() {
            rows.push(
                ResultRow::new(id, name, j + 1, t, c64(s.covariance[i][j]), cfg.seed)
                    .truth(c64(s.kernel[i][j]))
                    .error((s.covariance[i][j] - s.kernel[i][j]).abs())
                    .ci(Z95 * s.covariance_stderr[i][j]),
            );
        }
    }
    let lines = vec![
        format!("isometry ratios: {:?}", s.isometry),
        format!("pseudo-covariances: {:?}", s.pseudo.iter().map(|p| (p.re, p.im)).collect::<Vec<_>>()),
        format!("max relative covariance gap: {:.4}", s.max_relative_covariance_gap(0.05)),
    ];
    Ok(Output {
        tables: vec![(String::new(), rows)],
        summary: json!({ "command": name, "experiment_id": id, "stats": s }),
        plots: Vec::new(),
        warnings: Vec::new(),
        lines,
    })
}

fn fit_note(f: &SlopeRegression) -> String {
    format!("fit slope {} intercept {} stderr {}", f.slope, f.intercept, f.stderr)
}

fn variance_scaling(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let v = section(&cfg.variance_scaling, "variance_scaling")?;
    let target = cfg.target(&v.target)?;
    let r = variance_scaling_experiment(&target, &v.grid, cfg.trials, cfg.seed)?;
    let name = Command::VarianceScaling.name();
    let rows = (0..r.grid.len())
        .map(|i| {
            ResultRow::new(id, name, target.term, r.grid[i], c64(r.empirical[i]), cfg.seed)
                .truth(c64(r.exact[i]))
                .error((r.empirical[i] / r.exact[i] - 1.0).abs())
                .variance(r.empirical[i])
                .ci(Z95 * r.empirical_stderr[i])
        })
        .collect();
    let mut plot = PlotSeries::new("variance", &["log_T", "log_var_empirical", "log_var_exact"]).note(fit_note(&r.fit));
    for i in 0..r.grid.len() {
        plot.push(vec![r.grid[i].ln(), r.empirical[i].ln(), r.exact[i].ln()]);
    }
    let lines = vec![
        format!(
            "{} term {} (lambda = {}): slope {:.4} ± {:.4}, predicted {:.4}",
            target.mode.as_str(),
            target.term,
            target.lambda,
            r.fit.slope,
            r.fit.stderr,
            r.predicted_slope
        ),
        format!("largest Monte Carlo vs kernel gap: {:.2}%", 100.0 * r.max_relative_gap()),
    ];
    Ok(Output {
        tables: vec![(String::new(), rows)],
        summary: json!({
            "command": name,
            "experiment_id": id,
            "mode": target.mode.as_str(),
            "term": target.term,
            "lambda": target.lambda,
            "max_relative_gap": r.max_relative_gap(),
            "result": r,
        }),
        plots: vec![plot],
        warnings: Vec::new(),
        lines,
    })
}

fn nonconvergence(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let n = section(&cfg.nonconvergence, "nonconvergence")?;
    let target = cfg.target(&n.target)?;
    let d = nonconvergence_experiment(&target, &n.grid, n.c, cfg.trials, cfg.seed)?;
    let name = Command::Nonconvergence.name();
    let rows = (0..d.grid.len())
        .map(|i| {
            ResultRow::new(id, name, target.term, d.grid[i], c64(d.probability[i]), cfg.seed)
                .truth(c64(d.closed_form[i]))
                .error((d.probability[i] - d.closed_form[i]).abs())
                .variance(d.sigma2[i])
                .ci(d.half_width[i])
        })
        .collect();
    let mut plot = PlotSeries::new("deviation", &["T", "p_hat", "half_width"]).note(format!("c = {}", d.c));
    for i in 0..d.grid.len() {
        plot.push(vec![d.grid[i], d.probability[i], d.half_width[i]]);
    }
    let lines = vec![
        format!("deviation probabilities: {:?}", d.probability),
        format!(
            "monotone within bands: {}, max distance to closed form: {:.2} half-widths",
            d.is_monotone_within_bands(),
            d.max_band_ratio()
        ),
    ];
    Ok(Output {
        tables: vec![(String::new(), rows)],
        summary: json!({
            "command": name,
            "experiment_id": id,
            "mode": target.mode.as_str(),
            "term": target.term,
            "lambda": target.lambda,
            "monotone": d.is_monotone_within_bands(),
            "max_band_ratio": d.max_band_ratio(),
            "curve": d,
        }),
        plots: vec![plot],
        warnings: Vec::new(),
        lines,
    })
}

fn rate(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let r = section(&cfg.rate, "rate")?;
    let target = cfg.target(&r.target)?;
    let cert = rate_certificate_experiment(&target, &r.epsilon, &r.delta, &r.grid, cfg.trials, cfg.seed)?;
    let name = Command::Rate.name();
    let mut rows = Vec::new();
    for e in &cert.entries {
        for (i, &n) in cert.grid.iter().enumerate() {
            let k = (e.success[i] * cert.trials as f64).round() as usize;
            let (_, hw) = crate::stats::wilson(k, cert.trials, Z95);
            rows.push(
                ResultRow::new(id, name, target.term, n, c64(e.success[i]), cfg.seed)
                    .truth(c64(1.0 - e.delta))
                    .error(((1.0 - e.delta) - e.success[i]).max(0.0))
                    .ci(hw),
            );
        }
    }
    let mut lines: Vec<String> = cert
        .entries
        .iter()
        .map(|e| format!("epsilon = {}, delta = {}: N0 = {}", e.epsilon, e.delta, e.n0))
        .collect();
    lines.push(format!("fitted C = {:.4}, theta = {:.4}", cert.fitted_c, cert.fitted_theta));
    let mut tables = vec![(String::new(), rows)];
    let mut plots = Vec::new();
    let mut warnings = Vec::new();
    let mut trajectory = Value::Null;
    if let Some(tc) = &r.trajectory {
        let mut plot = PlotSeries::new("trajectory", &["N", "error", "tube"]);
        if tc.ns.is_empty() {
            warnings.push("trajectory has no sizes; skipped".to_string());
        } else {
            let theta = tc.theta.unwrap_or_else(|| default_tube_exponent(&target));
            let tr = trajectory_as_convergence_check(&target, &tc.ns, theta, tc.burn_in, cfg.seed)?;
            let trows = (0..tr.ns.len())
                .map(|i| {
                    ResultRow::new(id, name, target.term, tr.ns[i], tr.estimates[i], cfg.seed)
                        .truth(target.truth())
                        .error(tr.errors[i])
                        .ci(tr.tube[i])
                })
                .collect();
            for i in 0..tr.ns.len() {
                plot.push(vec![tr.ns[i], tr.errors[i], tr.tube[i]]);
            }
            lines.push(format!("trajectory in tube N^-{theta:.3}: {}", if tr.passed { "pass" } else { "fail" }));
            tables.push(("_trajectory".to_string(), trows));
            trajectory = serde_json::to_value(&tr)?;
        }
        plots.push(plot);
    }
    Ok(Output {
        tables,
        summary: json!({
            "command": name,
            "experiment_id": id,
            "mode": target.mode.as_str(),
            "term": target.term,
            "lambda": target.lambda,
            "certificate": cert,
            "trajectory": trajectory,
        }),
        plots,
        warnings,
        lines,
    })
}

/// Expected log-log slope of the noise-free plain error for term `j`.
pub fn predicted_bias_slope(orders: &[f64], j: usize, lambda: f64) -> f64 {
    let gap = orders.get(j).map_or(f64::INFINITY, |next| lambda * (orders[j - 1] - next));
    -f64::min(1.0, f64::min(gap, lambda - 1.0))
}

/// Noise-free estimates of term `j` along `grid`.
pub fn noise_free_errors(cfg: &ExperimentConfig, target: &TargetConfig, grid: &[f64]) -> Result<(Vec<Complex64>, Vec<f64>, f64)> {
    let mut t = cfg.target(target)?;
    t.model = t.model.without_noise();
    let setups = try_map_indexed(grid.len(), |i| t.setup(grid[i]))?;
    let truth = t.truth();
    let values: Vec<Complex64> = setups.iter().map(|s| s.deterministic).collect();
    let errors = values.iter().map(|v| (v - truth).norm()).collect();
    Ok((values, errors, t.lambda))
}

fn asymptotics(cfg: &ExperimentConfig, id: &str) -> Result<Output> {
    let a = section(&cfg.asymptotics, "asymptotics")?;
    if a.grid.windows(2).any(|w| !(w[1] > w[0])) || a.grid.iter().any(|t| !(*t >= 1.0)) {
        return Err(Error::config(MODULE, "asymptotics grid must be increasing with values >= 1"));
    }
    let target = cfg.target(&a.target)?;
    let (values, errors, lambda) = noise_free_errors(cfg, &a.target, &a.grid)?;
    let truth = target.truth();
    let name = Command::Asymptotics.name();
    let rows = (0..a.grid.len())
        .map(|i| {
            ResultRow::new(id, name, target.term, a.grid[i], values[i], cfg.seed)
                .truth(truth)
                .error(errors[i])
        })
        .collect();
    let predicted = match target.mode {
        Mode::Plain => Some(predicted_bias_slope(&cfg.orders(), target.term, lambda)),
        Mode::Averaged => None,
    };
    let fit = if a.grid.len() >= 4 && errors.iter().all(|e| *e > 0.0) {
        Some(SlopeRegression::fit_loglog(&a.grid, &errors)?)
    } else {
        None
    };
    let mut plot = PlotSeries::new("asymptotics", &["log_t", "log_error"]);
    if let Some(f) = &fit {
        plot = plot.note(fit_note(f));
    }
    for i in 0..a.grid.len() {
        if errors[i] > 0.0 {
            plot.push(vec![a.grid[i].ln(), errors[i].ln()]);
        }
    }
    let mut lines = vec![format!("errors: {errors:?}")];
    if let Some(f) = &fit {
        lines.push(format!("slope {:.4} ± {:.4}, predicted {:?}", f.slope, f.stderr, predicted));
    }
    Ok(Output {
        tables: vec![(String::new(), rows)],
        summary: json!({
            "command": name,
            "experiment_id": id,
            "term": target.term,
            "lambda": lambda,
            "mode": target.mode.as_str(),
            "grid": a.grid,
            "errors": errors,
            "fit": fit,
            "predicted_slope": predicted,
        }),
        plots: vec![plot],
        warnings: Vec::new(),
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert_eq!("bogus".parse::<Command>().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bias_slope_rule() {
        assert_eq!(predicted_bias_slope(&[1.0, 0.0], 1, 2.0), -1.0);
        assert!((predicted_bias_slope(&[1.0, 0.7], 1, 2.0) + 0.6).abs() < 1e-12);
        assert!((predicted_bias_slope(&[1.0], 1, 1.5) + 0.5).abs() < 1e-12);
    }
}
