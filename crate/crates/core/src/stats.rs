//! Monte Carlo experiments: variance scaling, deviation probabilities, rate
//! certificates and single-path trajectory checks.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{build_kernel, build_kernel_on, sample_path, BasisOracle};
use crate::packets::WavePacketFamily;
use crate::spectral::Lattice;
use crate::parallel::{map_indexed, try_map_indexed};
use crate::recovery::{averaging_nodes, AverageNodes, EstimatorSetup, MeasurementModel, Mode, OrderPlan};
use crate::rng::{derive_seed, purpose};

const MODULE: &str = "stats_harness";

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Least-squares line through `(x, y)` with the slope's standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRegression {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

impl SlopeRegression {
    pub fn fit(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 4 {
            return Err(Error::config(MODULE, format!("regression needs at least 4 paired points (got {n})")));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::numerical(MODULE, "regression data finite", "non-finite point"));
        }
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        if sxx == 0.0 {
            return Err(Error::config(MODULE, "regression abscissae are all equal"));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let stderr = (rss / (nf - 2.0) / sxx).sqrt();
        Ok(SlopeRegression {
            x,
            y,
            slope,
            intercept,
            stderr,
        })
    }

    /// Fit of `ln y` against `ln x`.
    pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.iter().chain(y).any(|v| !(*v > 0.0)) {
            return Err(Error::numerical(MODULE, "log-log data positive", format!("x = {x:?}, y = {y:?}")));
        }
        Self::fit(x.iter().map(|v| v.ln()).collect(), y.iter().map(|v| v.ln()).collect())
    }
}

/// Wilson score interval `(centre, half-width)` for `k` successes in `n`.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.5, 0.5);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    (centre, half)
}

pub fn wilson_lower(k: usize, n: usize, z: f64) -> f64 {
    let (c, h) = wilson(k, n, z);
    (c - h).max(0.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean of complex samples and the variance `E|X − EX|²` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexMoments {
    pub mean: Complex64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub pseudo: Complex64,
    pub pseudo_stderr: f64,
}

pub fn complex_moments(xs: &[Complex64]) -> ComplexMoments {
    let n = xs.len() as f64;
    let mean: Complex64 = xs.iter().sum::<Complex64>() / n;
    let dev: Vec<Complex64> = xs.iter().map(|x| x - mean).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d.norm_sqr()).collect();
    let variance = sq.iter().sum::<f64>() / (n - 1.0);
    let var_sq = sq.iter().map(|s| (s - variance).powi(2)).sum::<f64>() / (n - 1.0);
    let pseudo: Complex64 = dev.iter().map(|d| d * d).sum::<Complex64>() / n;
    let pseudo_var = dev.iter().map(|d| (d * d - pseudo).norm_sqr()).sum::<f64>() / (n - 1.0);
    ComplexMoments {
        mean,
        variance,
        variance_stderr: (var_sq / n).sqrt(),
        pseudo,
        pseudo_stderr: (pseudo_var / n).sqrt(),
    }
}

/// Which estimator of term `j` an experiment drives, with fixed λ.
#[derive(Debug, Clone)]
pub struct Target {
    pub model: MeasurementModel,
    pub term: usize,
    pub mode: Mode,
    pub lambda: f64,
    pub average_nodes: AverageNodes,
}

impl Target {
    pub fn from_plan(model: MeasurementModel, plan: &OrderPlan, term: usize, average_nodes: AverageNodes) -> Result<Self> {
        if term == 0 || term > plan.k_beta {
            return Err(Error::config(
                MODULE,
                format!("term {term} is outside the recoverable range 1..={}", plan.k_beta),
            ));
        }
        Ok(Target {
            model,
            term,
            mode: plan.mode(term),
            lambda: plan.lambda(term),
            average_nodes,
        })
    }

    pub fn order(&self) -> f64 {
        self.model.observable.terms()[self.term - 1].order
    }

    pub fn truth(&self) -> Complex64 {
        self.model.truth(self.term)
    }

    pub fn nodes_and_weights(&self, n: f64) -> (Vec<f64>, Vec<f64>) {
        match self.mode {
            Mode::Plain => (vec![n], vec![n.powf(-self.lambda * self.order())]),
            Mode::Averaged => {
                let k = self.average_nodes.resolve(n, self.lambda);
                averaging_nodes(n, k, self.lambda, self.order())
            }
        }
    }

    /// Full estimator at `n`, lower terms removed exactly.
    pub fn setup(&self, n: f64) -> Result<EstimatorSetup> {
        let (nodes, weights) = self.nodes_and_weights(n);
        let subtract = &self.model.observable.terms()[..self.term - 1];
        EstimatorSetup::on_nodes(&self.model, self.term, self.mode, self.lambda, n, nodes, weights, subtract)
    }

    pub fn noise_setup(&self, n: f64) -> Result<EstimatorSetup> {
        let (nodes, weights) = self.nodes_and_weights(n);
        EstimatorSetup::noise_only(&self.model, self.term, self.mode, self.lambda, n, nodes, weights)
    }

    /// Decay rate of the noise standard deviation in `n`.
    pub fn noise_rate(&self) -> f64 {
        let m = self.order();
        let two_beta = 2.0 * self.model.beta;
        match self.mode {
            Mode::Plain => self.lambda * (m - two_beta),
            Mode::Averaged => self.lambda * (m - two_beta + 0.5) - 0.5,
        }
    }

    /// Predicted log-log slope of the noise variance.
    pub fn variance_slope(&self) -> f64 {
        -2.0 * self.noise_rate()
    }
}

fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    derive_seed(master, purpose::TRIAL, &[point as u64, trial as u64])
}

fn check_grid(grid: &[f64], min_points: usize) -> Result<()> {
    if grid.len() < min_points {
        return Err(Error::config(
            MODULE,
            format!("parameter grid needs at least {min_points} points (got {})", grid.len()),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|v| !(v.is_finite() && *v >= 1.0)) {
        return Err(Error::config(MODULE, "parameter grid must be increasing with values >= 1"));
    }
    Ok(())
}

/// Empirical and exact noise variances of an estimator along a grid.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceScaling {
    pub grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub empirical_stderr: Vec<f64>,
    pub exact: Vec<f64>,
    pub fit: SlopeRegression,
    pub exact_fit: SlopeRegression,
    pub predicted_slope: f64,
    pub trials: usize,
}

impl VarianceScaling {
    /// Largest relative gap between Monte Carlo and exact variance.
    pub fn max_relative_gap(&self) -> f64 {
        self.empirical
            .iter()
            .zip(&self.exact)
            .map(|(e, x)| (e / x - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn variance_scaling_experiment(target: &Target, grid: &[f64], trials: usize, seed: u64) -> Result<VarianceScaling> {
    check_grid(grid, 4)?;
    if trials < 1000 {
        return Err(Error::config(MODULE, "variance scaling needs at least 1000 trials"));
    }
    if target.mode == Mode::Averaged {
        let floor = 2f64.powf(1.0 / (target.lambda - 1.0));
        if grid[0] <= floor {
            return Err(Error::config(
                MODULE,
                format!("averaged variance scaling needs T > 2^(1/(λ−1)) = {floor:.3}"),
            ));
        }
    }
    let mut empirical = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut exact = Vec::with_capacity(grid.len());
    for (p, &n) in grid.iter().enumerate() {
        let setup = target.noise_setup(n)?;
        let xs = map_indexed(trials, |i| setup.noise_part(trial_seed(seed, p, i)));
        let m = complex_moments(&xs);
        empirical.push(m.variance);
        stderr.push(m.variance_stderr);
        exact.push(setup.noise_variance());
    }
    Ok(VarianceScaling {
        fit: SlopeRegression::fit_loglog(grid, &empirical)?,
        exact_fit: SlopeRegression::fit_loglog(grid, &exact)?,
        grid: grid.to_vec(),
        empirical,
        empirical_stderr: stderr,
        exact,
        predicted_slope: target.variance_slope(),
        trials,
    })
}

/// `P{|estimate − a_j| > c}` along a grid, with the circular-Gaussian law.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationCurve {
    pub grid: Vec<f64>,
    pub c: f64,
    pub probability: Vec<f64>,
    pub half_width: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `exp(−c²/σ²)` with `σ²` from the kernel.
    pub closed_form: Vec<f64>,
    pub trials: usize,
}

impl DeviationCurve {
    /// Each estimate may drop below its predecessor by at most the sum of
    /// the two half-widths.
    pub fn is_monotone_within_bands(&self) -> bool {
        self.probability
            .windows(2)
            .zip(self.half_width.windows(2))
            .all(|(p, h)| p[1] >= p[0] - (h[0] + h[1]))
    }

    /// Largest `|p̂ − exp(−c²/σ²)|` in units of the half-width.
    pub fn max_band_ratio(&self) -> f64 {
        self.probability
            .iter()
            .zip(&self.closed_form)
            .zip(&self.half_width)
            .map(|((p, q), h)| (p - q).abs() / h)
            .fold(0.0, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.probability.last().unwrap_or(&0.0)
    }
}

/// Number of `trials` draws with `|estimate − truth| > c`; `point` keys the
/// seeds so different grid points use independent draws.
pub fn deviation_count(setup: &EstimatorSetup, truth: Complex64, c: f64, trials: usize, seed: u64, point: usize) -> usize {
    map_indexed(trials, |i| (setup.sample(trial_seed(seed, point, i)) - truth).norm() > c)
        .into_iter()
        .filter(|&h| h)
        .count()
}

pub fn nonconvergence_experiment(target: &Target, grid: &[f64], c: f64, trials: usize, seed: u64) -> Result<DeviationCurve> {
    check_grid(grid, 2)?;
    if !(c > 0.0) {
        return Err(Error::config(MODULE, "threshold c must be positive"));
    }
    if !target.model.noise {
        return Err(Error::config(MODULE, "deviation probabilities need noise switched on"));
    }
    let m = target.order();
    let two_beta = 2.0 * target.model.beta;
    let failing = match target.mode {
        Mode::Plain => m <= two_beta,
        Mode::Averaged => m <= two_beta - 0.5,
    };
    if !failing {
        return Err(Error::config(
            MODULE,
            format!(
                "m = {m} with β = {} is recoverable in {} mode; pick m <= {}",
                target.model.beta,
                target.mode.as_str(),
                if target.mode == Mode::Plain { two_beta } else { two_beta - 0.5 }
            ),
        ));
    }
    let truth = target.truth();
    let mut probability = Vec::new();
    let mut half_width = Vec::new();
    let mut sigma2 = Vec::new();
    let mut closed_form = Vec::new();
    for (p, &n) in grid.iter().enumerate() {
        let setup = target.setup(n)?;
        let hits = deviation_count(&setup, truth, c, trials, seed, p);
        let (_, hw) = wilson(hits, trials, Z95);
        let s2 = setup.noise_variance();
        probability.push(hits as f64 / trials as f64);
        half_width.push(hw);
        sigma2.push(s2);
        closed_form.push((-c * c / s2).exp());
    }
    Ok(DeviationCurve {
        grid: grid.to_vec(),
        c,
        probability,
        half_width,
        sigma2,
        closed_form,
        trials,
    })
}

/// Smallest grid size after which the estimator is `ε`-accurate with
/// probability at least `1 − δ`, for a set of `(ε, δ)`.
#[derive(Debug, Clone, Serialize)]
pub struct RateCertificate {
    pub grid: Vec<f64>,
    pub trials: usize,
    pub entries: Vec<RateEntry>,
    pub fitted_c: f64,
    pub fitted_theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEntry {
    pub epsilon: f64,
    pub delta: f64,
    pub n0: f64,
    /// Success rate at each grid point in the search run.
    pub success: Vec<f64>,
    /// Success rate at each grid point `≥ n0` in an independent run.
    pub verification: Vec<f64>,
}

impl RateCertificate {
    pub fn entry(&self, epsilon: f64, delta: f64) -> Option<&RateEntry> {
        self.entries.iter().find(|e| e.epsilon == epsilon && e.delta == delta)
    }
}

pub fn rate_certificate_experiment(
    target: &Target,
    epsilons: &[f64],
    deltas: &[f64],
    grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<RateCertificate> {
    check_grid(grid, 2)?;
    if epsilons.is_empty() || deltas.is_empty() {
        return Err(Error::config(MODULE, "rate certificate needs at least one epsilon and one delta"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) || deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::config(MODULE, "epsilon must be positive and delta in (0, 1]"));
    }
    let min_delta = deltas.iter().copied().fold(1.0, f64::min);
    if (trials as f64) < 20.0 / min_delta {
        return Err(Error::config(
            MODULE,
            format!("trials = {trials} cannot resolve delta = {min_delta}; need at least {}", (20.0 / min_delta).ceil()),
        ));
    }
    let truth = target.truth();
    let setups = try_map_indexed(grid.len(), |p| target.setup(grid[p]))?;
    let errors = |salt: u64| -> Vec<Vec<f64>> {
        setups
            .iter()
            .enumerate()
            .map(|(p, s)| {
                map_indexed(trials, |i| {
                    let seed = derive_seed(seed, purpose::VERIFY, &[salt, p as u64, i as u64]);
                    (s.sample(seed) - truth).norm()
                })
            })
            .collect()
    };
    let search = errors(0);
    let verify = errors(1);
    let rate = |errs: &[f64], eps: f64| errs.iter().filter(|e| **e <= eps).count();

    let mut entries = Vec::new();
    for &eps in epsilons {
        for &delta in deltas {
            let counts: Vec<usize> = search.iter().map(|e| rate(e, eps)).collect();
            let ok: Vec<bool> = counts.iter().map(|&k| wilson_lower(k, trials, Z95) >= 1.0 - delta).collect();
            let start = (0..grid.len()).rev().take_while(|&p| ok[p]).last().ok_or_else(|| {
                Error::numerical(
                    MODULE,
                    "rate certificate found",
                    format!("no grid size reaches success rate 1 − δ = {} at ε = {eps}", 1.0 - delta),
                )
            })?;
            entries.push(RateEntry {
                epsilon: eps,
                delta,
                n0: grid[start],
                success: counts.iter().map(|&k| k as f64 / trials as f64).collect(),
                verification: verify[start..].iter().map(|e| rate(e, eps) as f64 / trials as f64).collect(),
            });
        }
    }
    let (fitted_c, fitted_theta) = fit_rate_constants(&entries);
    Ok(RateCertificate {
        grid: grid.to_vec(),
        trials,
        entries,
        fitted_c,
        fitted_theta,
    })
}

/// Fits `N₀ = C·max(1/ε, (ln 1/δ)^{1/θ})` in log space by a scan over `θ`.
fn fit_rate_constants(entries: &[RateEntry]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 1.0, 1.0);
    for i in 0..=400 {
        let theta = 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
        let logs: Vec<(f64, f64)> = entries
            .iter()
            .map(|e| {
                let l = (1.0 / e.delta).ln().max(0.0).powf(1.0 / theta);
                (e.n0.ln(), f64::max(1.0 / e.epsilon, l).ln())
            })
            .collect();
        let log_c = logs.iter().map(|(a, b)| a - b).sum::<f64>() / logs.len() as f64;
        let rss: f64 = logs.iter().map(|(a, b)| (a - b - log_c).powi(2)).sum();
        if rss < best.0 - 1e-12 {
            best = (rss, log_c.exp(), theta);
        }
    }
    (best.1, best.2)
}

/// A single noise path followed along an increasing sequence of sizes.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub ns: Vec<f64>,
    pub estimates: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub tube: Vec<f64>,
    pub theta: f64,
    pub burn_in: usize,
    pub passed: bool,
}

/// Tube exponent: half the decay rate of the noise standard deviation, or
/// `1/4` when the noise does not decay.
pub fn default_tube_exponent(target: &Target) -> f64 {
    let r = target.noise_rate();
    if r > 0.0 {
        0.5 * r
    } else {
        0.25
    }
}

/// Checks `|estimate(N) − a_j| ≤ N^{−θ}` beyond the first `burn_in` sizes,
/// with every estimate driven by one joint noise path.
pub fn trajectory_as_convergence_check(
    target: &Target,
    ns: &[f64],
    theta: f64,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_grid(ns, 2)?;
    let setups = try_map_indexed(ns.len(), |i| target.setup(ns[i]))?;
    let values = trajectory_values(target, &setups, seed)?;
    let truth = target.truth();
    let errors: Vec<f64> = values.iter().map(|v| (v - truth).norm()).collect();
    let tube: Vec<f64> = ns.iter().map(|n| n.powf(-theta)).collect();
    let passed = errors.iter().zip(&tube).skip(burn_in).all(|(e, b)| e <= b);
    Ok(Trajectory {
        ns: ns.to_vec(),
        estimates: values,
        errors,
        tube,
        theta,
        burn_in,
        passed,
    })
}

/// Deterministic parts plus one joint draw over the union of all nodes.
pub fn trajectory_values(target: &Target, setups: &[EstimatorSetup], seed: u64) -> Result<Vec<Complex64>> {
    if !target.model.noise {
        return Ok(setups.iter().map(|s| s.deterministic).collect());
    }
    let mut all: Vec<f64> = setups.iter().flat_map(|s| s.nodes.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let kernel = build_kernel(&target.model.family(target.lambda)?, &all, target.model.beta)?;
    let path = sample_path(&kernel, derive_seed(seed, purpose::TRIAL, &[u64::MAX]));
    Ok(setups
        .iter()
        .map(|s| {
            let noise: Complex64 = s
                .nodes
                .iter()
                .zip(&s.weights)
                .map(|(t, w)| {
                    let k = all.partition_point(|v| v < t);
                    path.values[k] * *w
                })
                .sum();
            s.deterministic + noise
        })
        .collect())
}

/// Basis-expansion noise against the kernel on a small node set.
#[derive(Debug, Clone, Serialize)]
pub struct NoiseStats {
    pub nodes: Vec<f64>,
    pub samples: usize,
    pub spacing: f64,
    /// `K(t_i, t_j)` on the oracle's lattice, row-major.
    pub kernel: Vec<Vec<f64>>,
    /// Empirical `E[E_i conj(E_j)]`, real part, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub covariance_stderr: Vec<Vec<f64>>,
    /// `E|E_i|² / ‖f_{t_i}‖_β⁴` per node.
    pub isometry: Vec<f64>,
    pub isometry_stderr: Vec<f64>,
    /// `E E_i²` per node; the standard error is per component.
    pub pseudo: Vec<Complex64>,
    pub pseudo_stderr: Vec<f64>,
}

impl NoiseStats {
    /// Largest `|Ĉ_ij / K_ij − 1|` over entries with `K_ij ≥ floor·max K`.
    pub fn max_relative_covariance_gap(&self, floor: f64) -> f64 {
        let kmax = self.kernel.iter().flatten().copied().fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for (kr, cr) in self.kernel.iter().zip(&self.covariance) {
            for (k, c) in kr.iter().zip(cr) {
                if *k >= floor * kmax {
                    worst = worst.max((c / k - 1.0).abs());
                }
            }
        }
        worst
    }
}

/// Lattice spacing that places every packet window inside the truncated basis.
pub fn oracle_spacing(family: &WavePacketFamily, nodes: &[f64], truncation: usize) -> f64 {
    let reach = nodes
        .iter()
        .map(|&t| {
            let (a, b) = family.support(t);
            a.abs().max(b.abs())
        })
        .fold(0.0, f64::max);
    reach / (truncation as f64 - 1.5).max(0.5)
}

pub fn noise_statistics(
    family: &WavePacketFamily,
    nodes: &[f64],
    beta: f64,
    truncation: usize,
    samples: usize,
    seed: u64,
) -> Result<NoiseStats> {
    if samples < 100 {
        return Err(Error::config(MODULE, "noise statistics need at least 100 samples"));
    }
    if truncation < 2 {
        return Err(Error::config(MODULE, "basis truncation must be at least 2"));
    }
    let spacing = oracle_spacing(family, nodes, truncation);
    let lattice = Lattice::centered(spacing)?;
    let oracle = BasisOracle::new(family, nodes, beta, &lattice, truncation)?;
    let kernel = build_kernel_on(family, nodes, beta, &lattice)?;
    let paths = map_indexed(samples, |i| oracle.sample(trial_seed(seed, 0, i)).values);
    let n = nodes.len();
    let sf = samples as f64;
    let mut covariance = vec![vec![0.0; n]; n];
    let mut covariance_stderr = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let prods: Vec<f64> = paths.iter().map(|v| (v[i] * v[j].conj()).re).collect();
            let mean = prods.iter().sum::<f64>() / sf;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (sf - 1.0);
            covariance[i][j] = mean;
            covariance_stderr[i][j] = (var / sf).sqrt();
        }
    }
    let mut isometry = Vec::with_capacity(n);
    let mut isometry_stderr = Vec::with_capacity(n);
    let mut pseudo = Vec::with_capacity(n);
    let mut pseudo_stderr = Vec::with_capacity(n);
    for i in 0..n {
        let xs: Vec<Complex64> = paths.iter().map(|v| v[i]).collect();
        let second = xs.iter().map(|x| x.norm_sqr()).sum::<f64>() / sf;
        let sq_var = xs.iter().map(|x| (x.norm_sqr() - second).powi(2)).sum::<f64>() / (sf - 1.0);
        let p: Complex64 = xs.iter().map(|x| x * x).sum::<Complex64>() / sf;
        let p_var = xs.iter().map(|x| (x * x - p).norm_sqr()).sum::<f64>() / (sf - 1.0);
        let norm4 = kernel.diag(i);
        isometry.push(second / norm4);
        isometry_stderr.push((sq_var / sf).sqrt() / norm4);
        pseudo.push(p);
        pseudo_stderr.push((p_var / sf / 2.0).sqrt());
    }
    Ok(NoiseStats {
        nodes: nodes.to_vec(),
        samples,
        spacing,
        kernel: kernel.to_dense(),
        covariance,
        covariance_stderr,
        isometry,
        isometry_stderr,
        pseudo,
        pseudo_stderr,
    })
}
