//! End-to-end acceptance checks. Each check prints one PASS or FAIL line;
//! the process fails if any check fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use psdo_recovery::commands::{run_command, Command, RunOptions};
use psdo_recovery::config::ExperimentConfig;
use psdo_recovery::packets::{PacketProfile, WavePacketFamily};
use psdo_recovery::recovery::{measurement_seed, term_setup, AverageNodes, MeasurementModel, Mode};
use psdo_recovery::spectral::JapaneseBracketWeight;
use psdo_recovery::stats::{
    noise_statistics, nonconvergence_experiment, rate_certificate_experiment, variance_scaling_experiment,
    SlopeRegression, Target,
};
use psdo_recovery::symbols::{Coefficient, HomogeneousTerm, Observable, SymbolExpansion};

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn model(terms: &[(f64, &str, f64, f64)], beta: f64, x0: f64) -> MeasurementModel {
    let terms = terms
        .iter()
        .map(|&(m, c, hm, hp)| HomogeneousTerm::new(m, Coefficient::parse(c, hm, hp).unwrap()).unwrap())
        .collect();
    MeasurementModel::new(
        Observable::new(SymbolExpansion::new(terms).unwrap()),
        beta,
        x0,
        1.0,
        PacketProfile::shared(1.0).unwrap(),
    )
}

fn target(model: MeasurementModel, term: usize, mode: Mode, lambda: f64) -> Target {
    Target {
        model,
        term,
        mode,
        lambda,
        average_nodes: AverageNodes::Auto,
    }
}

fn packet_norms() -> Result<String, String> {
    let fam = WavePacketFamily::with_default_profile(0.3, 1.0, 2.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in [2.0, 8.0, 32.0] {
        let n = fam.make_packet(t).map_err(|e| e.to_string())?.l2_norm();
        worst = worst.max((n - 1.0).abs());
    }
    ensure(worst <= 1e-6, format!("max | ||f_t|| - 1 | = {worst:.2e}"))?;
    let ts = [8.0, 16.0, 32.0, 64.0];
    let mut notes = vec![format!("max | ||f_t|| - 1 | = {worst:.1e}")];
    for (beta, lambda) in [(0.5, 2.0), (-0.5, 2.5)] {
        let fam = WavePacketFamily::with_default_profile(0.3, 1.0, lambda).map_err(|e| e.to_string())?;
        let norms: Vec<f64> = ts
            .iter()
            .map(|&t| fam.make_packet(t).unwrap().sobolev_norm(JapaneseBracketWeight::new(beta)))
            .collect();
        let fit = SlopeRegression::fit_loglog(&ts, &norms).map_err(|e| e.to_string())?;
        let want = lambda * beta;
        ensure(
            (fit.slope - want).abs() <= 0.05,
            format!("beta = {beta}, lambda = {lambda}: slope {:.4} vs {want}", fit.slope),
        )?;
        notes.push(format!("slope {:.4} (want {want})", fit.slope));
    }
    Ok(notes.join(", "))
}

fn noise_isometry() -> Result<String, String> {
    let fam = WavePacketFamily::with_default_profile(0.0, 1.0, 1.5).map_err(|e| e.to_string())?;
    let s = noise_statistics(&fam, &[2.0, 2.2, 2.5], 0.0, 128, 10_000, 11).map_err(|e| e.to_string())?;
    for i in 0..s.nodes.len() {
        ensure(
            (s.isometry[i] - 1.0).abs() <= 0.05,
            format!("isometry ratio {:.4} at t = {}", s.isometry[i], s.nodes[i]),
        )?;
        let p = s.pseudo[i];
        let se = s.pseudo_stderr[i];
        ensure(
            p.re.abs() <= 3.0 * se && p.im.abs() <= 3.0 * se,
            format!("pseudo-covariance {p:.4} exceeds 3 standard errors ({se:.4}) at t = {}", s.nodes[i]),
        )?;
    }
    Ok(format!(
        "ratios {:?}, pseudo-covariances within {:.2} standard errors",
        s.isometry.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
        s.pseudo
            .iter()
            .zip(&s.pseudo_stderr)
            .map(|(p, se)| p.re.abs().max(p.im.abs()) / se)
            .fold(0.0, f64::max)
    ))
}

fn kernel_oracle() -> Result<String, String> {
    let fam = WavePacketFamily::with_default_profile(0.0, 1.0, 1.5).map_err(|e| e.to_string())?;
    let s = noise_statistics(&fam, &[2.0, 2.2, 2.5], 0.0, 128, 10_000, 12).map_err(|e| e.to_string())?;
    let gap = s.max_relative_covariance_gap(0.0);
    ensure(gap <= 0.05, format!("max relative covariance gap {gap:.4}"))?;
    Ok(format!("max relative entry gap {gap:.4} over 9 entries"))
}

fn deterministic_rates() -> Result<String, String> {
    let cases: [(&[(f64, &str, f64, f64)], f64, f64); 2] = [
        (&[(1.0, "1 + 0.5*sin(x)", -1.0, 1.0), (0.6, "0.4", 1.0, 1.0)], 2.0, 0.4),
        (&[(0.5, "2 + sin(x)", 1.0, 1.0), (0.2, "0.3 + 0.5*cos(x)", 1.0, 1.0), (-1.0, "0.1", 1.0, 1.0)], 2.5, 0.0),
    ];
    let ts = [8.0, 16.0, 32.0, 64.0];
    let mut notes = Vec::new();
    for (terms, lambda, x0) in cases {
        let t = target(model(terms, 0.0, x0).without_noise(), 1, Mode::Plain, lambda);
        let truth = t.truth();
        let errs: Vec<f64> = ts
            .iter()
            .map(|&n| (t.setup(n).unwrap().deterministic - truth).norm())
            .collect();
        let fit = SlopeRegression::fit_loglog(&ts, &errs).map_err(|e| e.to_string())?;
        let gap = lambda * (terms[0].0 - terms[1].0);
        let want = -f64::min(1.0, f64::min(gap, lambda - 1.0));
        ensure(
            (fit.slope - want).abs() <= 0.2,
            format!("orders {:?}: slope {:.4} vs {want:.2}", terms.iter().map(|t| t.0).collect::<Vec<_>>(), fit.slope),
        )?;
        notes.push(format!("slope {:.3} (want {want:.2})", fit.slope));
    }
    Ok(notes.join(", "))
}

fn plain_noise_scaling() -> Result<String, String> {
    let mut notes = Vec::new();
    for (beta, lambda) in [(0.0, 2.0), (0.25, 2.5)] {
        let t = target(model(&[(1.0, "1", -1.0, 1.0)], beta, 0.0), 1, Mode::Plain, lambda);
        let v = variance_scaling_experiment(&t, &[8.0, 16.0, 32.0, 64.0], 2000, 21).map_err(|e| e.to_string())?;
        let want = -2.0 * lambda * (1.0 - 2.0 * beta);
        ensure(
            (v.fit.slope - want).abs() <= 0.1,
            format!("beta = {beta}: slope {:.4} vs {want}", v.fit.slope),
        )?;
        notes.push(format!("slope {:.4} ± {:.4} (want {want})", v.fit.slope, v.fit.stderr));
    }
    Ok(notes.join(", "))
}

fn averaged_noise_scaling() -> Result<String, String> {
    let t = target(model(&[(0.0, "1", 1.0, 1.0)], 0.0, 0.0), 1, Mode::Averaged, 2.5);
    let v = variance_scaling_experiment(&t, &[8.0, 16.0, 32.0, 64.0], 1000, 22).map_err(|e| e.to_string())?;
    let want = 2.0 * 2.5 * (0.0 - 0.5 - 0.0) + 1.0;
    ensure((v.fit.slope - want).abs() <= 0.3, format!("slope {:.4} vs {want}", v.fit.slope))?;
    let gap = v.max_relative_gap();
    ensure(gap <= 0.10, format!("Monte Carlo vs kernel quadrature gap {gap:.4}"))?;
    Ok(format!(
        "slope {:.4} ± {:.4} (want {want}), kernel-quadrature slope {:.4}, max gap {:.1}%",
        v.fit.slope,
        v.fit.stderr,
        v.exact_fit.slope,
        100.0 * gap
    ))
}

fn end_to_end_recovery() -> Result<String, String> {
    let cfg = ExperimentConfig::from_path(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/calderon.toml"))
        .map_err(|e| e.to_string())?;
    let plan = cfg.plan().map_err(|e| e.to_string())?;
    ensure(
        plan.j_beta == 1 && plan.k_beta == 2 && plan.modes == [Mode::Plain, Mode::Averaged],
        format!("unexpected plan {plan:?}"),
    )?;
    let base = cfg.model().map_err(|e| e.to_string())?;
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let n = 48.0;
    let mut setups = Vec::new();
    for (i, &x0) in grid.iter().enumerate() {
        let m = base.at(x0, 1.0);
        for j in 1..=2 {
            let s = term_setup(&m, &plan, j, n, AverageNodes::Auto, &m.observable.terms()[..j - 1])
                .map_err(|e| e.to_string())?;
            setups.push((i, j, m.truth(j), s));
        }
    }
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let max_err = setups
            .iter()
            .map(|(i, j, truth, s)| (s.sample(measurement_seed(seed, *i, 1.0, *j)) - truth).norm())
            .fold(0.0, f64::max);
        worst = worst.max(max_err);
        if max_err <= 0.1 {
            good += 1;
        }
    }
    ensure(good >= 95, format!("{good}/100 seeds recovered both terms within 0.1"))?;
    let bias: f64 = setups
        .iter()
        .map(|(_, _, truth, s)| (s.deterministic - truth).norm())
        .fold(0.0, f64::max);
    Ok(format!("{good}/100 seeds within 0.1 (worst {worst:.3}, noise-free bias {bias:.2e})"))
}

fn nonconvergence() -> Result<String, String> {
    let cases = [
        (model(&[(1.0, "1", -1.0, 1.0)], 0.75, 0.0), Mode::Plain, vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0]),
        (model(&[(1.0, "1", -1.0, 1.0)], 0.55, 0.0), Mode::Plain, vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0]),
        (model(&[(0.0, "1", 1.0, 1.0)], 0.5, 0.0), Mode::Averaged, vec![4.0, 8.0, 16.0, 32.0]),
    ];
    let mut notes = Vec::new();
    for (k, (m, mode, grid)) in cases.into_iter().enumerate() {
        let beta = m.beta;
        let t = target(m, 1, mode, 2.0);
        let d = nonconvergence_experiment(&t, &grid, 0.1, 1000, 30 + k as u64).map_err(|e| e.to_string())?;
        let label = format!("{} beta = {beta}", mode.as_str());
        ensure(d.last() >= 0.9, format!("{label}: final probability {:.3}", d.last()))?;
        ensure(d.is_monotone_within_bands(), format!("{label}: not monotone {:?}", d.probability))?;
        ensure(
            d.max_band_ratio() <= 3.0,
            format!("{label}: {:.2} half-widths from exp(-c^2/sigma^2)", d.max_band_ratio()),
        )?;
        notes.push(format!(
            "{label}: p {:.3} -> {:.3}, {:.2} half-widths",
            d.probability[0],
            d.last(),
            d.max_band_ratio()
        ));
    }
    Ok(notes.join("; "))
}

fn rate_certificate() -> Result<String, String> {
    let m = model(&[(1.0, "1 + 0.5*sin(x)", -1.0, 1.0), (0.0, "0.2", 1.0, 1.0)], 0.3, 0.4);
    let grid = [4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0];
    let t = target(m, 1, Mode::Plain, 2.5);
    let cert = rate_certificate_experiment(&t, &[0.1, 0.05], &[0.1], &grid, 1000, 40).map_err(|e| e.to_string())?;
    let e1 = cert.entry(0.1, 0.1).ok_or("missing entry")?;
    let e2 = cert.entry(0.05, 0.1).ok_or("missing entry")?;
    let min_verify = e1.verification.iter().copied().fold(1.0, f64::min);
    ensure(min_verify >= 0.9, format!("verification rate {min_verify:.3} below 0.9 beyond N0 = {}", e1.n0))?;
    ensure(e2.n0 >= e1.n0, format!("N0(eps/2) = {} < N0(eps) = {}", e2.n0, e1.n0))?;
    ensure(cert.fitted_theta > 0.0, format!("fitted theta {}", cert.fitted_theta))?;
    Ok(format!(
        "N0(0.1, 0.1) = {}, N0(0.05, 0.1) = {}, min fresh-seed success beyond N0 {min_verify:.3}",
        e1.n0, e2.n0
    ))
}

fn reproducibility() -> Result<String, String> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut recover = ExperimentConfig::from_path(&root.join("configs/calderon.toml")).map_err(|e| e.to_string())?;
    if let Some(r) = recover.recover.as_mut() {
        r.n = 8.0;
        r.x0_grid = vec![-0.5, 0.0, 0.5];
    }
    let variance = ExperimentConfig::from_path(&root.join("configs/variance_averaged.toml")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for (cmd, cfg) in [(Command::Recover, &recover), (Command::VarianceScaling, &variance)] {
        let mut outputs = Vec::new();
        for (k, workers) in [1usize, 1, 4, 4].into_iter().enumerate() {
            let out = dir.path().join(format!("{cmd}-{k}"));
            let options = RunOptions {
                out: Some(out.clone()),
                workers,
                ..RunOptions::default()
            };
            let outcome = run_command(cmd, cfg, &options).map_err(|e| e.to_string())?;
            let csv = outcome
                .files
                .iter()
                .find(|f| f.extension().is_some_and(|e| e == "csv"))
                .ok_or("no csv written")?;
            outputs.push(std::fs::read(csv).map_err(|e| e.to_string())?);
        }
        ensure(
            outputs.windows(2).all(|w| w[0] == w[1]),
            format!("{cmd}: CSV bytes differ across runs or worker counts"),
        )?;
        checked += 1;
    }
    Ok(format!("{checked} commands byte-identical over 2 runs x workers {{1, 4}}"))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("packet norms", packet_norms),
        ("noise isometry", noise_isometry),
        ("kernel vs basis oracle", kernel_oracle),
        ("deterministic rates", deterministic_rates),
        ("plain noise scaling", plain_noise_scaling),
        ("averaged noise scaling", averaged_noise_scaling),
        ("end-to-end recovery", end_to_end_recovery),
        ("non-convergence", nonconvergence),
        ("rate certificate", rate_certificate),
        ("reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
