//! Noisy quadratic measurements and the plain and averaged estimators.
//!
//! Every estimator here is a weighted sum over packet scales `t_k`:
//! `Σ w_k [(f_k|P_j f_k) + E_β(f̄_k, f_k)]`, where `P_j` is the observable with
//! the first `j − 1` terms removed. The plain estimator uses the single node
//! `N` with weight `N^{−λm_j}`, the averaged one uses midpoints of `[N, 2N]`
//! with weights `t_k^{−λm_j}/K`. An [`EstimatorSetup`] holds the noise-free
//! part and the joint noise kernel, so repeated draws only cost a sample.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{build_kernel, sample_path, NoiseKernel};
use crate::packets::{PacketProfile, WavePacketFamily};
use crate::parallel::try_map_indexed;
use crate::rng::{derive_seed, purpose};
use crate::spline::ComplexSpline;
use crate::symbols::{
    quadratic_form, Coefficient, HomogeneousTerm, Observable, PhysicalGrid, DEFAULT_GRID_TAIL_MASS,
    DEFAULT_TAIL_TOLERANCE,
};

const MODULE: &str = "measurement_recovery";

pub const DEFAULT_LAMBDA_MARGIN: f64 = 0.5;
pub const MIN_AVERAGE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plain,
    Averaged,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Averaged => "averaged",
        }
    }
}

/// How the λ bounds are turned into concrete values.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRules {
    /// Added to bounds that must be exceeded strictly.
    pub margin: f64,
    /// Also add the margin at `j_β`, where the non-strict bound suffices for
    /// the limit but the rate statement wants it strict.
    pub strict_boundary: bool,
    /// Per-term replacements, checked against the bounds.
    pub overrides: Vec<Option<f64>>,
}

impl Default for LambdaRules {
    fn default() -> Self {
        LambdaRules {
            margin: DEFAULT_LAMBDA_MARGIN,
            strict_boundary: false,
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderPlan {
    pub orders: Vec<f64>,
    pub beta: f64,
    pub j_beta: usize,
    pub k_beta: usize,
    /// `λ_j` for `j = 1..=k_β` (index `j − 1`).
    pub lambdas: Vec<f64>,
    pub modes: Vec<Mode>,
}

impl OrderPlan {
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j - 1]
    }

    pub fn mode(&self, j: usize) -> Mode {
        self.modes[j - 1]
    }

    pub fn recoverable(&self) -> usize {
        self.k_beta
    }
}

/// Splits the orders into plain-recoverable terms `j ≤ j_β`, average-
/// recoverable terms `j_β < j ≤ k_β`, and picks `λ_j`.
pub fn plan_orders(orders: &[f64], beta: f64, rules: &LambdaRules) -> Result<OrderPlan> {
    if orders.is_empty() {
        return Err(Error::config(MODULE, "order list is empty"));
    }
    if !beta.is_finite() || orders.iter().any(|m| !m.is_finite()) {
        return Err(Error::config(MODULE, "orders and beta must be finite"));
    }
    if let Some(w) = orders.windows(2).find(|w| !(w[0] > w[1])) {
        return Err(Error::config(
            MODULE,
            format!("orders must be strictly decreasing (m_j > m_(j+1)), got {} then {}", w[0], w[1]),
        ));
    }
    if !(rules.margin > 0.0 && rules.margin.is_finite()) {
        return Err(Error::config(MODULE, "lambda margin must be positive"));
    }
    let two_beta = 2.0 * beta;
    if orders[0] <= two_beta - 0.5 {
        return Err(Error::config(
            MODULE,
            format!("no recoverable term: m_1 = {} must exceed 2β − 1/2 = {}", orders[0], two_beta - 0.5),
        ));
    }
    // orders[i] is m_{i+1}
    let j_beta = (0..orders.len())
        .find(|&j| orders[j] <= two_beta)
        .ok_or_else(|| reach_error(orders, beta))?;
    let k_beta = (1..orders.len())
        .find(|&j| orders[j] <= two_beta - 0.5)
        .ok_or_else(|| reach_error(orders, beta))?;

    let m = |j: usize| orders[j - 1];
    let mut lambdas = Vec::with_capacity(k_beta);
    let mut modes = Vec::with_capacity(k_beta);
    for j in 1..=k_beta {
        let (bound, strict) = if j < j_beta || (j > j_beta && j < k_beta) {
            (f64::max(1.0 / (m(j) - m(j + 1)), 2.0), false)
        } else if j == j_beta {
            (f64::max(1.0 / (m(j) - two_beta), 2.0), rules.strict_boundary)
        } else {
            (f64::max(1.0 / (m(j) - two_beta + 0.5), 2.0), true)
        };
        let lambda = match rules.overrides.get(j - 1).copied().flatten() {
            Some(l) => {
                let ok = if strict { l > bound } else { l >= bound };
                if !ok || !l.is_finite() {
                    return Err(Error::config(
                        MODULE,
                        format!(
                            "lambda override {l} for term {j} violates its bound {} {bound}",
                            if strict { ">" } else { ">=" }
                        ),
                    ));
                }
                l
            }
            None if strict => bound + rules.margin,
            None => bound,
        };
        lambdas.push(lambda);
        modes.push(if j <= j_beta { Mode::Plain } else { Mode::Averaged });
    }
    Ok(OrderPlan {
        orders: orders.to_vec(),
        beta,
        j_beta,
        k_beta,
        lambdas,
        modes,
    })
}

fn reach_error(orders: &[f64], beta: f64) -> Error {
    Error::config(
        MODULE,
        format!(
            "orders {orders:?} must extend to some m_(j+1) <= 2β − 1/2 = {} with j >= 1",
            2.0 * beta - 0.5
        ),
    )
}

/// Observable plus the packet data of a measurement.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub observable: Observable,
    pub beta: f64,
    pub x0: f64,
    pub xi0: f64,
    pub profile: Arc<PacketProfile>,
    pub noise: bool,
}

impl MeasurementModel {
    pub fn new(observable: Observable, beta: f64, x0: f64, xi0: f64, profile: Arc<PacketProfile>) -> Self {
        MeasurementModel {
            observable,
            beta,
            x0,
            xi0,
            profile,
            noise: true,
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn at(&self, x0: f64, xi0: f64) -> Self {
        MeasurementModel {
            x0,
            xi0,
            ..self.clone()
        }
    }

    pub fn family(&self, lambda: f64) -> Result<WavePacketFamily> {
        WavePacketFamily::new(self.x0, self.xi0, lambda, Arc::clone(&self.profile))
    }

    /// `a_j(x₀, ξ₀)`.
    pub fn truth(&self, j: usize) -> Complex64 {
        self.observable.terms()[j - 1].principal_value(self.x0, self.xi0)
    }
}

/// `(f_t|Pf_t) − Σ (f_t|Q f_t)` over `subtract`, without noise.
pub fn deterministic_measurement(
    model: &MeasurementModel,
    t: f64,
    lambda: f64,
    subtract: &[HomogeneousTerm],
) -> Result<Complex64> {
    let family = model.family(lambda)?;
    let f = family.make_packet(t)?;
    let grid = PhysicalGrid::for_packet(&model.profile, model.x0, t, f.window().half_width(), DEFAULT_GRID_TAIL_MASS)?;
    let p = model.observable.terms();
    let mut terms = Vec::with_capacity(p.len() + subtract.len());
    terms.extend_from_slice(p);
    terms.extend_from_slice(subtract);
    let q = quadratic_form(&f, &terms, &grid, DEFAULT_TAIL_TOLERANCE)?;
    let signal: Complex64 = q.per_term[..p.len()].iter().sum();
    let removed: Complex64 = q.per_term[p.len()..].iter().sum();
    Ok(signal - removed)
}

/// `N_{β,P_j}(f_t, f_t) = (f_t|P_j f_t) + E` for a supplied error value.
pub fn measure(
    model: &MeasurementModel,
    t: f64,
    lambda: f64,
    subtract: &[HomogeneousTerm],
    noise_value: Complex64,
) -> Result<Complex64> {
    Ok(deterministic_measurement(model, t, lambda, subtract)? + noise_value)
}

/// Number of averaging nodes; written as `"auto"` or an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AverageNodesRepr", into = "AverageNodesRepr")]
pub enum AverageNodes {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AverageNodesRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<AverageNodesRepr> for AverageNodes {
    type Error = String;

    fn try_from(r: AverageNodesRepr) -> std::result::Result<Self, String> {
        match r {
            AverageNodesRepr::Count(0) => Err("average_nodes must be positive".into()),
            AverageNodesRepr::Count(k) => Ok(AverageNodes::Fixed(k)),
            AverageNodesRepr::Word(w) if w == "auto" => Ok(AverageNodes::Auto),
            AverageNodesRepr::Word(w) => Err(format!("average_nodes must be \"auto\" or a count (got {w:?})")),
        }
    }
}

impl From<AverageNodes> for AverageNodesRepr {
    fn from(a: AverageNodes) -> Self {
        match a {
            AverageNodes::Auto => AverageNodesRepr::Word("auto".into()),
            AverageNodes::Fixed(k) => AverageNodesRepr::Count(k),
        }
    }
}

impl AverageNodes {
    /// `Auto` resolves packet decorrelation in `t`: at least four nodes per
    /// `t`-interval over which `t^λ` moves by one packet width.
    pub fn resolve(&self, n: f64, lambda: f64) -> usize {
        match self {
            AverageNodes::Fixed(k) => *k,
            AverageNodes::Auto => {
                let k = (4.0 * lambda * n.powf(lambda - 1.0)).ceil() as usize;
                k.max(MIN_AVERAGE_NODES)
            }
        }
    }
}

impl Default for AverageNodes {
    fn default() -> Self {
        AverageNodes::Auto
    }
}

/// Midpoint nodes and weights `t_k^{−λm}/K` on `[N, 2N]`.
pub fn averaging_nodes(n: f64, k: usize, lambda: f64, order: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes: Vec<f64> = (0..k).map(|i| n + (i as f64 + 0.5) * n / k as f64).collect();
    let weights = nodes.iter().map(|t| t.powf(-lambda * order) / k as f64).collect();
    (nodes, weights)
}

/// Noise-free part and noise kernel of one estimator.
#[derive(Debug, Clone)]
pub struct EstimatorSetup {
    pub term: usize,
    pub mode: Mode,
    pub lambda: f64,
    pub n: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub deterministic: Complex64,
    kernel: Option<NoiseKernel>,
}

impl EstimatorSetup {
    /// Builds the estimator for term `j` on explicit nodes and weights.
    #[allow(clippy::too_many_arguments)]
    pub fn on_nodes(
        model: &MeasurementModel,
        term: usize,
        mode: Mode,
        lambda: f64,
        n: f64,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        subtract: &[HomogeneousTerm],
    ) -> Result<Self> {
        let values = try_map_indexed(nodes.len(), |i| deterministic_measurement(model, nodes[i], lambda, subtract))?;
        let deterministic = values.iter().zip(&weights).map(|(v, w)| v * *w).sum();
        let kernel = if model.noise {
            Some(build_kernel(&model.family(lambda)?, &nodes, model.beta)?)
        } else {
            None
        };
        Ok(EstimatorSetup {
            term,
            mode,
            lambda,
            n,
            nodes,
            weights,
            deterministic,
            kernel,
        })
    }

    /// Same nodes and weights with the noise-free part left at zero.
    pub fn noise_only(
        model: &MeasurementModel,
        term: usize,
        mode: Mode,
        lambda: f64,
        n: f64,
        nodes: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let kernel = Some(build_kernel(&model.family(lambda)?, &nodes, model.beta)?);
        Ok(EstimatorSetup {
            term,
            mode,
            lambda,
            n,
            nodes,
            weights,
            deterministic: Complex64::new(0.0, 0.0),
            kernel,
        })
    }

    pub fn kernel(&self) -> Option<&NoiseKernel> {
        self.kernel.as_ref()
    }

    /// `Σ w_k E_k` for the path addressed by `seed`.
    pub fn noise_part(&self, seed: u64) -> Complex64 {
        match &self.kernel {
            None => Complex64::new(0.0, 0.0),
            Some(k) => {
                let path = sample_path(k, seed);
                path.values.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Complex64 {
        self.deterministic + self.noise_part(seed)
    }

    /// Exact variance of the noise part, `wᵀCw`.
    pub fn noise_variance(&self) -> f64 {
        self.kernel.as_ref().map_or(0.0, |k| k.weighted_variance(&self.weights))
    }
}

fn check_term(plan: &OrderPlan, j: usize, want: Mode) -> Result<()> {
    if j == 0 || j > plan.k_beta {
        return Err(Error::config(
            MODULE,
            format!("term {j} is outside the recoverable range 1..={}", plan.k_beta),
        ));
    }
    if plan.mode(j) != want {
        return Err(Error::config(
            MODULE,
            format!(
                "term {j} is planned as {} (j_β = {}, k_β = {}), not {}",
                plan.mode(j).as_str(),
                plan.j_beta,
                plan.k_beta,
                want.as_str()
            ),
        ));
    }
    Ok(())
}

/// `N^{−λ_j m_j} N_{β,P_j}(f_N, f_N)` for `j ≤ j_β`.
pub fn plain_setup(
    model: &MeasurementModel,
    plan: &OrderPlan,
    j: usize,
    n: f64,
    subtract: &[HomogeneousTerm],
) -> Result<EstimatorSetup> {
    check_term(plan, j, Mode::Plain)?;
    let lambda = plan.lambda(j);
    let w = n.powf(-lambda * plan.orders[j - 1]);
    EstimatorSetup::on_nodes(model, j, Mode::Plain, lambda, n, vec![n], vec![w], subtract)
}

/// `(1/N)∫_N^{2N} t^{−λ_j m_j} N_{β,P_j}(f_t, f_t) dt` by the midpoint rule,
/// for `j_β < j ≤ k_β`, with one noise path across all nodes.
pub fn averaged_setup(
    model: &MeasurementModel,
    plan: &OrderPlan,
    j: usize,
    n: f64,
    nodes: AverageNodes,
    subtract: &[HomogeneousTerm],
) -> Result<EstimatorSetup> {
    check_term(plan, j, Mode::Averaged)?;
    let lambda = plan.lambda(j);
    let k = nodes.resolve(n, lambda);
    if k < 2 {
        return Err(Error::config(MODULE, "averaging needs at least two nodes"));
    }
    let (ts, ws) = averaging_nodes(n, k, lambda, plan.orders[j - 1]);
    EstimatorSetup::on_nodes(model, j, Mode::Averaged, lambda, n, ts, ws, subtract)
}

pub fn plain_estimate(
    model: &MeasurementModel,
    plan: &OrderPlan,
    j: usize,
    n: f64,
    seed: u64,
) -> Result<Complex64> {
    let subtract = &model.observable.terms()[..j.saturating_sub(1).min(model.observable.terms().len())];
    Ok(plain_setup(model, plan, j, n, subtract)?.sample(seed))
}

pub fn averaged_estimate(
    model: &MeasurementModel,
    plan: &OrderPlan,
    j: usize,
    n: f64,
    nodes: AverageNodes,
    seed: u64,
) -> Result<Complex64> {
    let subtract = &model.observable.terms()[..j.saturating_sub(1).min(model.observable.terms().len())];
    Ok(averaged_setup(model, plan, j, n, nodes, subtract)?.sample(seed))
}

/// Builds the estimator for term `j` in whichever mode the plan assigns.
pub fn term_setup(
    model: &MeasurementModel,
    plan: &OrderPlan,
    j: usize,
    n: f64,
    nodes: AverageNodes,
    subtract: &[HomogeneousTerm],
) -> Result<EstimatorSetup> {
    if j == 0 || j > plan.k_beta {
        return Err(Error::config(
            MODULE,
            format!("term {j} is outside the recoverable range 1..={}", plan.k_beta),
        ));
    }
    match plan.mode(j) {
        Mode::Plain => plain_setup(model, plan, j, n, subtract),
        Mode::Averaged => averaged_setup(model, plan, j, n, nodes, subtract),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtractMode {
    /// Remove the exact lower-index terms.
    Oracle,
    /// Remove terms rebuilt from earlier estimates.
    #[serde(rename = "self")]
    SelfSubtract,
}

impl SubtractMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubtractMode::Oracle => "oracle",
            SubtractMode::SelfSubtract => "self",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions {
    pub n: f64,
    pub average_nodes: AverageNodes,
    pub subtract: SubtractMode,
    pub alert_threshold: Option<f64>,
    pub seed: u64,
}

/// One recovered value `â_j(x₀, ξ₀)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermEstimate {
    pub term: usize,
    pub x0: f64,
    pub xi0: f64,
    pub value: Complex64,
    pub truth: Complex64,
    pub error: f64,
    pub n: f64,
    pub mode: Mode,
    pub lambda: f64,
    pub nodes: usize,
    pub noise_variance: f64,
    pub seed: u64,
    pub alert: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub plan: OrderPlan,
    pub subtract: SubtractMode,
    pub estimates: Vec<TermEstimate>,
}

impl EstimatorReport {
    pub fn alerts(&self) -> impl Iterator<Item = &TermEstimate> {
        self.estimates.iter().filter(|e| e.alert)
    }

    pub fn max_error(&self, term: usize) -> f64 {
        self.estimates
            .iter()
            .filter(|e| e.term == term)
            .map(|e| e.error)
            .fold(0.0, f64::max)
    }
}

/// Seed of the noise draw for one `(x₀ index, ξ₀, term)` measurement.
pub fn measurement_seed(master: u64, x_index: usize, xi0: f64, term: usize) -> u64 {
    derive_seed(master, purpose::MEASUREMENT, &[x_index as u64, (xi0 > 0.0) as u64, term as u64])
}

/// Term `j`'s symbol rebuilt from estimates on an `x₀` grid: the values at
/// `ξ₀ = ±1` are interpolated in `x` and extended by homogeneity.
pub fn reconstructed_term(
    order: f64,
    x0_grid: &[f64],
    minus: Option<Vec<Complex64>>,
    plus: Option<Vec<Complex64>>,
) -> Result<HomogeneousTerm> {
    let spline = |v: Option<Vec<Complex64>>| v.map(|v| ComplexSpline::new(x0_grid.to_vec(), v)).transpose();
    HomogeneousTerm::new(
        order,
        Coefficient::Tabulated {
            minus: spline(minus)?,
            plus: spline(plus)?,
        },
    )
}

/// Recovers `a_1, …, a_{k_β}` at every `(x₀, ξ₀)`.
pub fn recover_expansion(
    model: &MeasurementModel,
    plan: &OrderPlan,
    x0_grid: &[f64],
    xi0_list: &[f64],
    options: &RecoveryOptions,
) -> Result<EstimatorReport> {
    if x0_grid.is_empty() || xi0_list.is_empty() {
        return Err(Error::config(MODULE, "x0 grid and xi0 list must be non-empty"));
    }
    if options.subtract == SubtractMode::SelfSubtract && x0_grid.len() < 2 {
        return Err(Error::config(MODULE, "self-subtraction needs at least two x0 grid points"));
    }
    if plan.orders.len() != model.observable.terms().len() {
        return Err(Error::config(MODULE, "plan and observable disagree on the number of terms"));
    }
    let terms = model.observable.terms();
    let mut estimates = Vec::new();
    // rebuilt[k] holds term k+1's estimates per sign: (minus, plus)
    let mut rebuilt: Vec<HomogeneousTerm> = Vec::new();
    for j in 1..=plan.k_beta {
        let subtract: Vec<HomogeneousTerm> = match options.subtract {
            SubtractMode::Oracle => terms[..j - 1].to_vec(),
            SubtractMode::SelfSubtract => rebuilt.clone(),
        };
        let cells: Vec<(usize, f64)> = xi0_list
            .iter()
            .flat_map(|&s| (0..x0_grid.len()).map(move |i| (i, s)))
            .collect();
        let row = try_map_indexed(cells.len(), |c| {
            let (i, xi0) = cells[c];
            let m = model.at(x0_grid[i], xi0);
            let setup = term_setup(&m, plan, j, options.n, options.average_nodes, &subtract)?;
            let seed = measurement_seed(options.seed, i, xi0, j);
            let value = setup.sample(seed);
            let truth = m.truth(j);
            let error = (value - truth).norm();
            Ok::<_, Error>(TermEstimate {
                term: j,
                x0: x0_grid[i],
                xi0,
                value,
                truth,
                error,
                n: options.n,
                mode: setup.mode,
                lambda: setup.lambda,
                nodes: setup.nodes.len(),
                noise_variance: setup.noise_variance(),
                seed,
                alert: options.alert_threshold.is_some_and(|a| error > a),
            })
        })?;
        if options.subtract == SubtractMode::SelfSubtract {
            let side = |sign: f64| -> Option<Vec<Complex64>> {
                xi0_list
                    .contains(&sign)
                    .then(|| row.iter().filter(|e| e.xi0 == sign).map(|e| e.value).collect())
            };
            rebuilt.push(reconstructed_term(plan.orders[j - 1], x0_grid, side(-1.0), side(1.0))?
                .with_cutoff(terms[j - 1].cutoff));
        }
        estimates.extend(row);
    }
    Ok(EstimatorReport {
        plan: plan.clone(),
        subtract: options.subtract,
        estimates,
    })
}
