//! Browser bindings: packet shapes, exact noise-variance curves and a small
//! Monte Carlo deviation estimate.

use psdo_recovery::packets::{PacketProfile, WavePacketFamily};
use psdo_recovery::recovery::{AverageNodes, MeasurementModel, Mode};
use psdo_recovery::stats::{deviation_count, wilson, Target, Z95};
use psdo_recovery::symbols::{Coefficient, HomogeneousTerm, Observable, SymbolExpansion};
use wasm_bindgen::prelude::*;

fn js(e: psdo_recovery::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn single_term(order: f64, beta: f64, mode: &str, lambda: f64) -> Result<Target, JsError> {
    let mode = match mode {
        "plain" => Mode::Plain,
        "averaged" => Mode::Averaged,
        other => return Err(JsError::new(&format!("unknown mode {other:?}"))),
    };
    let h = if order == 0.0 { 1.0 } else { -1.0 };
    let term = HomogeneousTerm::new(order, Coefficient::parse("1", h, 1.0).map_err(js)?).map_err(js)?;
    let model = MeasurementModel::new(
        Observable::new(SymbolExpansion::new(vec![term]).map_err(js)?),
        beta,
        0.0,
        1.0,
        PacketProfile::shared(1.0).map_err(js)?,
    );
    Ok(Target {
        model,
        term: 1,
        mode,
        lambda,
        average_nodes: AverageNodes::Auto,
    })
}

/// `[ξ…, |f̂_t(ξ)|…, x…, |f_t(x)|…]`, each block `points` long.
#[wasm_bindgen]
pub fn packet_shape(t: f64, lambda: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let fam = WavePacketFamily::with_default_profile(0.0, 1.0, lambda).map_err(js)?;
    let f = fam.make_packet(t).map_err(js)?;
    let points = points.clamp(16, 2048);
    let (lo, hi) = fam.support(t);
    let half_x = 4.0 * fam.profile().mass_radius(1e-6) / t;
    let mut out = Vec::with_capacity(4 * points);
    let xi: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let xs: Vec<f64> = (0..points).map(|i| -half_x + 2.0 * half_x * i as f64 / (points - 1) as f64).collect();
    out.extend(&xi);
    out.extend(xi.iter().map(|&k| f.interpolate(k).norm()));
    out.extend(&xs);
    out.extend(xs.iter().map(|&x| fam.physical(t, x).norm()));
    Ok(out)
}

/// Exact noise variance of the plain or averaged estimator at each size in `grid`.
#[wasm_bindgen]
pub fn variance_curve(mode: &str, order: f64, beta: f64, lambda: f64, grid: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let target = single_term(order, beta, mode, lambda)?;
    grid.iter()
        .map(|&n| Ok(target.noise_setup(n).map_err(js)?.noise_variance()))
        .collect()
}

/// Predicted log-log slope of [`variance_curve`].
#[wasm_bindgen]
pub fn variance_slope(mode: &str, order: f64, beta: f64, lambda: f64) -> Result<f64, JsError> {
    Ok(single_term(order, beta, mode, lambda)?.variance_slope())
}

/// `[p̂, Wilson half-width, exp(−c²/σ²), σ²]` for `P{|estimate − a| > c}` at size `n`.
#[wasm_bindgen]
pub fn deviation_probability(
    mode: &str,
    order: f64,
    beta: f64,
    lambda: f64,
    n: f64,
    c: f64,
    trials: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    let target = single_term(order, beta, mode, lambda)?;
    let trials = trials.clamp(10, 20_000);
    let setup = target.setup(n).map_err(js)?;
    let hits = deviation_count(&setup, target.truth(), c, trials, seed as u64, 0);
    let (_, hw) = wilson(hits, trials, Z95);
    let s2 = setup.noise_variance();
    Ok(vec![hits as f64 / trials as f64, hw, (-c * c / s2).exp(), s2])
}
