//! Browser bindings for the two-user demo page.
//!
//! Every export returns a JSON string; the page draws it on a canvas.

use macalloc::bounds::bound_sweep;
use macalloc::optimize::PolymatroidOracle;
use macalloc::{
    frank_wolfe, greedy_rate, instantaneous_region, maximize_linear, ChannelState, FadingModel,
    FwOptions, Marginal, PolymatroidRegion, Scenario, StepRule, UserSet, Utility,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Spread scales drawn on the bound plot.
pub const SCALES: [f64; 3] = [1.0, 0.25, 0.0625];
const GRID_POINTS: usize = 20;

fn text(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn two_user_region(powers: &[f64], noise: f64, gains: &[f64]) -> Result<PolymatroidRegion, String> {
    if powers.len() != 2 || gains.len() != 2 {
        return Err("the demo draws two users".into());
    }
    let s = Scenario::new(powers.to_vec(), noise).map_err(text)?;
    instantaneous_region(&s, &ChannelState::new(gains.to_vec()).map_err(text)?).map_err(text)
}

#[derive(Serialize)]
struct RegionView {
    /// Pentagon corners, counterclockwise from the origin.
    polygon: Vec<[f64; 2]>,
    greedy: Vec<f64>,
    linear: Vec<f64>,
    sum_rate: f64,
}

pub fn region_json(
    powers: &[f64],
    noise: f64,
    gains: &[f64],
    weights: &[f64],
    shift: f64,
) -> Result<String, String> {
    let region = two_user_region(powers, noise, gains)?;
    let (a, b, ab) = (
        region.rank(UserSet::singleton(0)),
        region.rank(UserSet::singleton(1)),
        region.sum_rate(),
    );
    let u = Utility::weighted_log(weights.to_vec(), shift).map_err(text)?;
    let s = Scenario::new(powers.to_vec(), noise).map_err(text)?;
    let view = RegionView {
        polygon: vec![[0.0, 0.0], [a, 0.0], [a, ab - a], [ab - b, b], [0.0, b]],
        greedy: greedy_rate(&s, &ChannelState::new(gains.to_vec()).map_err(text)?, &u)
            .map_err(text)?,
        linear: maximize_linear(&region, weights).map_err(text)?,
        sum_rate: ab,
    };
    serde_json::to_string(&view).map_err(text)
}

#[derive(Serialize)]
struct Path {
    iterates: Vec<Iterate>,
    converged: bool,
}

#[derive(Serialize)]
struct Iterate {
    iter: usize,
    utility: f64,
    gap: f64,
    rates: Vec<f64>,
}

pub fn fw_path_json(
    powers: &[f64],
    noise: f64,
    gains: &[f64],
    weights: &[f64],
    shift: f64,
    rule: &str,
    max_iter: usize,
) -> Result<String, String> {
    let region = two_user_region(powers, noise, gains)?;
    let u = Utility::weighted_log(weights.to_vec(), shift).map_err(text)?;
    let rule = match rule {
        "armijo" => StepRule::Armijo,
        "limited-max" => StepRule::LimitedMax,
        other => return Err(format!("unknown step rule {other:?}")),
    };
    let opts = FwOptions {
        rule,
        gap_tol: 1e-9,
        max_iter: max_iter.max(1),
        record: true,
        pairwise: false,
    };
    let rep = frank_wolfe(&mut PolymatroidOracle::new(&region), &u, None, &opts).map_err(text)?;
    let path = Path {
        converged: rep.converged,
        iterates: rep
            .trajectory
            .into_iter()
            .map(|t| Iterate {
                iter: t.iter,
                utility: t.utility,
                gap: t.gap,
                rates: t.rates,
            })
            .collect(),
    };
    serde_json::to_string(&path).map_err(text)
}

#[derive(Serialize)]
struct Curve {
    scale: f64,
    sigma_h: f64,
    epsilon: Vec<f64>,
    bound1: Vec<f64>,
    bound2: Vec<f64>,
    min_bound: Vec<f64>,
    best_epsilon: f64,
    best_bound: f64,
    gap: f64,
}

/// Both gap bounds against ε for uniform fading on `[low, high]`, one curve per spread scale.
#[allow(clippy::too_many_arguments)]
pub fn bound_curves_json(
    powers: &[f64],
    noise: f64,
    low: f64,
    high: f64,
    weights: &[f64],
    shift: f64,
    samples: usize,
    seed: u64,
) -> Result<String, String> {
    let s = Scenario::new(powers.to_vec(), noise).map_err(text)?;
    let fading = FadingModel::independent(vec![Marginal::Uniform { low, high }; powers.len()])
        .map_err(text)?;
    let u = Utility::weighted_log(weights.to_vec(), shift).map_err(text)?;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| 0.01 * 100f64.powf(k as f64 / (GRID_POINTS - 1) as f64))
        .collect();
    let mut curves = Vec::new();
    for scale in SCALES {
        let model = fading.with_scaled_spread(scale).map_err(text)?;
        let rep = bound_sweep(&s, &model, &u, &grid, samples, seed).map_err(text)?;
        curves.push(Curve {
            scale,
            sigma_h: rep.sigma_h,
            epsilon: rep.rows.iter().map(|r| r.epsilon).collect(),
            bound1: rep.rows.iter().map(|r| r.bound1).collect(),
            bound2: rep.rows.iter().map(|r| r.bound2).collect(),
            min_bound: rep.rows.iter().map(|r| r.min_bound).collect(),
            best_epsilon: rep.minimizer.epsilon,
            best_bound: rep.minimizer.value,
            gap: rep.gap,
        });
    }
    serde_json::to_string(&curves).map_err(text)
}

#[wasm_bindgen(js_name = regionView)]
pub fn region_view(
    powers: &[f64],
    noise: f64,
    gains: &[f64],
    weights: &[f64],
    shift: f64,
) -> Result<String, JsError> {
    region_json(powers, noise, gains, weights, shift).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = frankWolfePath)]
pub fn frank_wolfe_path(
    powers: &[f64],
    noise: f64,
    gains: &[f64],
    weights: &[f64],
    shift: f64,
    rule: &str,
    max_iter: usize,
) -> Result<String, JsError> {
    fw_path_json(powers, noise, gains, weights, shift, rule, max_iter).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = boundCurves)]
#[allow(clippy::too_many_arguments)]
pub fn bound_curves(
    powers: &[f64],
    noise: f64,
    low: f64,
    high: f64,
    weights: &[f64],
    shift: f64,
    samples: usize,
    seed: u32,
) -> Result<String, JsError> {
    bound_curves_json(
        powers,
        noise,
        low,
        high,
        weights,
        shift,
        samples,
        u64::from(seed),
    )
    .map_err(|e| JsError::new(&e))
}
