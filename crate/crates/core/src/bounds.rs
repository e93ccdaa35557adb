//! Concentration of the instantaneous region around the averaged one, and the
//! resulting upper bounds on the greedy policy's performance gap.
//!
//! All powers enter through the normalized gains `Γ_i = P_i / N0`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    averaged_region_from_trace, instantaneous_region, subset_capacities, PolymatroidRegion,
    Scenario, UserSet,
};
use crate::error::{domain, ensure_len, Result};
use crate::fading::{FadingModel, FadingTrace, Moments};
use crate::policy::{performance_gap_on_trace, GapReport};
use crate::stats::{derive_seed, mean_and_stderr, substream};
use crate::utility::Utility;

/// Smallest quadratic-growth constant treated as certified.
pub const A_FLOOR: f64 = f64::EPSILON;
/// Feasible comparison points drawn per state when estimating `A`.
pub const DRAWS_PER_STATE: usize = 8;
/// Slack on the event `d_H ≤ δ`.
pub const EVENT_SLACK: f64 = 1e-12;

fn gamma(scenario: &Scenario, set: UserSet) -> Vec<f64> {
    (0..scenario.num_users())
        .map(|i| {
            if set.contains(i) {
                scenario.powers()[i] / scenario.noise()
            } else {
                0.0
            }
        })
        .collect()
}

/// Upper bound on the variance of `Y_S = ½ ln(1 + Γ_S'H)` and whether its
/// bracket had to be clamped at zero.
fn ys_term(scenario: &Scenario, set: UserSet, moments: &Moments) -> (f64, bool) {
    let g = gamma(scenario, set);
    let z_mean = moments.dot_mean(&g);
    let z_var = moments.quad_form(&g).max(0.0);
    let raw = (2.0 * z_mean.ln_1p()).sqrt() - 0.5 * z_var.sqrt();
    let bracket = (1.0 + z_mean) * raw.max(0.0);
    (0.25 * z_var * (1.0 + bracket * bracket), raw < 0.0)
}

fn check_moments(scenario: &Scenario, moments: &Moments) -> Result<()> {
    ensure_len(scenario.num_users(), moments.mean.len())?;
    moments.check_psd()
}

pub fn variance_bound_ys(scenario: &Scenario, set: UserSet, moments: &Moments) -> Result<f64> {
    check_moments(scenario, moments)?;
    if set.is_empty() || set.members().any(|i| i >= scenario.num_users()) {
        return Err(domain!("subset {set} is empty or names unknown users"));
    }
    Ok(ys_term(scenario, set, moments).0)
}

/// `σ_H²`: the sum of the `Y_S` variance bounds over nonempty subsets.
pub fn sigma_h_squared(scenario: &Scenario, moments: &Moments) -> Result<f64> {
    check_moments(scenario, moments)?;
    Ok(UserSet::nonempty(scenario.num_users())
        .map(|s| ys_term(scenario, s, moments).0)
        .sum())
}

/// Subsets whose variance bracket went negative and was clamped at zero.
pub fn clamped_subsets(scenario: &Scenario, moments: &Moments) -> Vec<UserSet> {
    UserSet::nonempty(scenario.num_users())
        .filter(|s| ys_term(scenario, *s, moments).1)
        .collect()
}

/// `min(1, σ_H²/δ²)`, bounding `Pr{d_H(C_g, C_a) > δ}`.
pub fn chebyshev_region_bound(sigma_h2: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(domain!("distance threshold must be positive, got {delta}"));
    }
    if !(sigma_h2 >= 0.0) {
        return Err(domain!("variance must be nonnegative, got {sigma_h2}"));
    }
    Ok((sigma_h2 / (delta * delta)).min(1.0))
}

/// Distance between the maximizers over two regions within `δ` of each other.
pub fn opt_distance_bound(a: f64, b: f64, delta: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !(delta >= 0.0) {
        return Err(domain!(
            "need A > 0, B > 0, δ ≥ 0; got A={a}, B={b}, δ={delta}"
        ));
    }
    Ok(delta.sqrt() * (delta.sqrt() + (b / a).sqrt()))
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(domain!("ε must lie in (0, 1], got {eps}"))
    }
}

/// Gap bound from the Lipschitz and quadratic-growth constants.
pub fn theorem1_bound(eps: f64, u_star: f64, a: f64, b: f64, sigma_h: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if !(u_star >= 0.0) {
        return Err(domain!("optimal utility must be nonnegative, got {u_star}"));
    }
    if eps == 1.0 {
        return Ok(u_star);
    }
    if !(a > 0.0) || !(b >= 0.0) || !(sigma_h >= 0.0) {
        return Err(domain!(
            "need A > 0, B ≥ 0, σ_H ≥ 0; got A={a}, B={b}, σ_H={sigma_h}"
        ));
    }
    let delta = sigma_h / eps.sqrt();
    Ok(eps * u_star + (1.0 - eps) * b * (delta.sqrt() + (b / a).sqrt()) * delta.sqrt())
}

/// Gap bound from the curvature `Ω` within radius `r(ε)` of the optimum.
pub fn theorem2_bound(eps: f64, u_star: f64, r_eps: f64, omega: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if !(u_star >= 0.0) || !(omega >= 0.0) || !(r_eps >= 0.0) {
        return Err(domain!(
            "need u* ≥ 0, r ≥ 0, Ω ≥ 0; got {u_star}, {r_eps}, {omega}"
        ));
    }
    Ok(eps * u_star + 0.5 * (1.0 - eps) * r_eps * r_eps * omega)
}

/// Trace-dependent part of `r(ε)`: the norm of the per-user expected
/// interference penalties `E[½ ln((1+H_iΓ_i)(1+Σ_{j≠i}H_jΓ_j)/(1+Σ_j H_jΓ_j))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceNorm {
    pub value: f64,
    pub std_err: f64,
}

pub fn interference_norm(scenario: &Scenario, trace: &FadingTrace) -> Result<InterferenceNorm> {
    let m = scenario.num_users();
    ensure_len(m, trace.num_users())?;
    if trace.is_empty() {
        return Err(domain!("interference norm needs at least one sample"));
    }
    let full = UserSet::full(m);
    let per_sample: Vec<Vec<f64>> = trace
        .rows()
        .map(|row| {
            let y = subset_capacities(scenario, row);
            (0..m)
                .map(|i| {
                    y[UserSet::singleton(i).0 as usize] + y[full.without(i).0 as usize]
                        - y[full.0 as usize]
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = (0..m)
        .map(|i| mean_and_stderr(&per_sample.iter().map(|x| x[i]).collect::<Vec<_>>()).0)
        .collect();
    let value = means.iter().map(|e| e * e).sum::<f64>().sqrt();
    if value == 0.0 {
        return Ok(InterferenceNorm {
            value,
            std_err: 0.0,
        });
    }
    let influence: Vec<f64> = per_sample
        .iter()
        .map(|x| {
            x.iter()
                .zip(&means)
                .map(|(xi, e)| e / value * (xi - e))
                .sum()
        })
        .collect();
    Ok(InterferenceNorm {
        value,
        std_err: mean_and_stderr(&influence).1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub value: f64,
    pub interference: InterferenceNorm,
}

/// `r(ε) = √M σ_H/√ε + ‖E[penalty]‖` with the expectation over `n` fresh draws.
pub fn r_epsilon(
    scenario: &Scenario,
    fading: &FadingModel,
    eps: f64,
    sigma_h: f64,
    n: usize,
    seed: u64,
) -> Result<RadiusEstimate> {
    check_epsilon(eps)?;
    let interference = interference_norm(scenario, &fading.sample(n, seed)?)?;
    Ok(radius(scenario.num_users(), eps, sigma_h, interference))
}

fn radius(m: usize, eps: f64, sigma_h: f64, interference: InterferenceNorm) -> RadiusEstimate {
    RadiusEstimate {
        value: (m as f64).sqrt() * sigma_h / eps.sqrt() + interference.value,
        interference,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Quadratic-growth constant; `A_FLOOR` when nothing positive was certified.
    pub a: f64,
    /// Gradient-norm bound over the dominant faces of the event regions.
    pub b: f64,
    pub vacuous: bool,
    /// States in the event `d_H ≤ δ`.
    pub event_states: usize,
    pub samples: usize,
}

/// Per-state quantities behind `A(ε)` and `B(ε)`, computed once for a trace
/// against a fixed reference region so that the event sets are nested in δ.
#[derive(Debug, Clone)]
pub struct ConstantEstimator {
    utility: Utility,
    distances: Vec<f64>,
    growth: Vec<f64>,
    face_floors: Vec<Vec<f64>>,
    reference_floor: Vec<f64>,
}

/// Componentwise lower corner of a polymatroid's dominant face:
/// `R_i ≥ f(M) - f(M \ i)`.
fn face_floor(region: &PolymatroidRegion) -> Vec<f64> {
    let full = UserSet::full(region.num_users());
    (0..region.num_users())
        .map(|i| (region.rank(full) - region.rank(full.without(i))).max(0.0))
        .collect()
}

/// Random point of the region: a scaled mixture of random successive-decoding vertices.
fn random_feasible<R: Rng>(rng: &mut R, region: &PolymatroidRegion) -> Vec<f64> {
    let m = region.num_users();
    let mut order: Vec<usize> = (0..m).collect();
    let mut point = vec![0.0; m];
    let mut total = 0.0;
    for _ in 0..3 {
        order.shuffle(rng);
        let w: f64 = rng.random::<f64>() + 1e-3;
        total += w;
        for (p, v) in point.iter_mut().zip(region.vertex_for_order(&order)) {
            *p += w * v;
        }
    }
    let scale = rng.random::<f64>() / total;
    point.iter_mut().for_each(|p| *p *= scale);
    point
}

impl ConstantEstimator {
    /// `greedy` holds the per-state utility maximizers for `trace`.
    pub fn new(
        scenario: &Scenario,
        trace: &FadingTrace,
        reference: &PolymatroidRegion,
        greedy: &[Vec<f64>],
        utility: &Utility,
        seed: u64,
    ) -> Result<Self> {
        let m = scenario.num_users();
        ensure_len(m, trace.num_users())?;
        ensure_len(trace.len(), greedy.len())?;
        ensure_len(m, utility.num_users())?;
        let mut distances = Vec::with_capacity(trace.len());
        let mut growth = Vec::with_capacity(trace.len());
        let mut face_floors = Vec::with_capacity(trace.len());
        for (k, (row, best)) in trace.rows().zip(greedy).enumerate() {
            let region =
                instantaneous_region(scenario, &crate::capacity::ChannelState::new(row.to_vec())?)?;
            distances.push(region.hausdorff_distance(reference)?);
            face_floors.push(face_floor(&region));
            let u_best = utility.value(best)?;
            let mut rng = substream(seed, k as u64);
            let mut ratio = f64::INFINITY;
            for _ in 0..DRAWS_PER_STATE {
                let v = random_feasible(&mut rng, &region);
                let s = 0.01 + 0.99 * rng.random::<f64>();
                let r: Vec<f64> = best.iter().zip(&v).map(|(b, x)| b + s * (x - b)).collect();
                let dist2: f64 = best.iter().zip(&r).map(|(b, x)| (b - x).powi(2)).sum();
                if dist2 > 1e-24 {
                    ratio = ratio.min((u_best - utility.value(&r)?).abs() / dist2);
                }
            }
            growth.push(ratio);
        }
        Ok(ConstantEstimator {
            utility: utility.clone(),
            distances,
            growth,
            face_floors,
            reference_floor: face_floor(reference),
        })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Constants over the first `n` states within distance `delta`.
    pub fn constants_with(&self, delta: f64, n: usize) -> Result<Constants> {
        let n = n.min(self.distances.len());
        let mut floor = self.reference_floor.clone();
        let mut a = f64::INFINITY;
        let mut event_states = 0;
        for k in 0..n {
            if self.distances[k] <= delta + EVENT_SLACK {
                event_states += 1;
                a = a.min(self.growth[k]);
                for (f, g) in floor.iter_mut().zip(&self.face_floors[k]) {
                    *f = f.min(*g);
                }
            }
        }
        let b = self.utility.gradient_norm_bound(&floor)?;
        let vacuous = !(a > A_FLOOR) || !a.is_finite();
        Ok(Constants {
            a: if vacuous { A_FLOOR } else { a },
            b,
            vacuous,
            event_states,
            samples: n,
        })
    }

    pub fn constants(&self, delta: f64) -> Result<Constants> {
        self.constants_with(delta, self.distances.len())
    }
}

/// `A(ε)` and `B(ε)` from `n` fresh draws.
pub fn estimate_constants(
    scenario: &Scenario,
    fading: &FadingModel,
    utility: &Utility,
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<Constants> {
    check_epsilon(eps)?;
    let trace = fading.sample(n, seed)?;
    let averaged = averaged_region_from_trace(scenario, &trace)?;
    let greedy = crate::policy::evaluate_on_trace(
        scenario,
        &trace,
        &crate::policy::RatePolicy::Greedy {
            utility: utility.clone(),
        },
        utility,
    )?;
    let estimator = ConstantEstimator::new(
        scenario,
        &trace,
        &averaged.region,
        &greedy.sample_rates,
        utility,
        derive_seed(seed, 1),
    )?;
    let sigma_h = sigma_h_squared(scenario, fading.moments())?.sqrt();
    estimator.constants(sigma_h / eps.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub epsilon: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub omega: f64,
    pub bound1: f64,
    pub bound2: f64,
    pub min_bound: f64,
    pub vacuous: bool,
    pub event_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub epsilon: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub sigma_h2: f64,
    pub sigma_h: f64,
    /// Subsets whose variance bracket was clamped at zero.
    pub clamped_subsets: Vec<String>,
    /// `u(R*)` shifted to be nonnegative on the orthant.
    pub u_star: f64,
    pub utility_offset: f64,
    pub interference: InterferenceNorm,
    pub rows: Vec<BoundRow>,
    pub minimizer_bound1: Minimizer,
    pub minimizer_bound2: Minimizer,
    pub minimizer: Minimizer,
    pub gap: f64,
    pub gap_se: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn argmin(rows: &[BoundRow], pick: impl Fn(&BoundRow) -> f64) -> Minimizer {
    let best = rows
        .iter()
        .min_by(|a, b| pick(a).total_cmp(&pick(b)))
        .expect("grid is nonempty");
    Minimizer {
        epsilon: best.epsilon,
        value: pick(best),
    }
}

/// Both gap bounds over an ε grid, on a single trace of `n` draws.
pub fn bound_sweep(
    scenario: &Scenario,
    fading: &FadingModel,
    utility: &Utility,
    eps_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<BoundReport> {
    let trace = fading.sample(n, seed)?;
    bound_sweep_on_trace(scenario, fading.moments(), &trace, utility, eps_grid)
}

pub fn bound_sweep_on_trace(
    scenario: &Scenario,
    moments: &Moments,
    trace: &FadingTrace,
    utility: &Utility,
    eps_grid: &[f64],
) -> Result<BoundReport> {
    if eps_grid.is_empty() {
        return Err(domain!("ε grid is empty"));
    }
    for &e in eps_grid {
        check_epsilon(e)?;
    }
    let mut grid = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let sigma_h2 = sigma_h_squared(scenario, moments)?;
    let sigma_h = sigma_h2.sqrt();
    let gap: GapReport = performance_gap_on_trace(scenario, trace, utility)?;
    let averaged = averaged_region_from_trace(scenario, trace)?;
    let estimator = ConstantEstimator::new(
        scenario,
        trace,
        &averaged.region,
        &gap.greedy.sample_rates,
        utility,
        derive_seed(trace.seed(), 1),
    )?;
    let interference = interference_norm(scenario, trace)?;
    let utility_offset = utility.nonnegativity_offset();
    let u_star = gap.optimal_utility + utility_offset;

    let rows = grid
        .iter()
        .map(|&eps| {
            let delta = sigma_h / eps.sqrt();
            let c = estimator.constants(delta)?;
            let r = radius(scenario.num_users(), eps, sigma_h, interference).value;
            let omega = utility.max_neg_hessian_eig(&gap.optimum, r)?.omega;
            let bound1 = theorem1_bound(eps, u_star, c.a, c.b, sigma_h)?;
            let bound2 = theorem2_bound(eps, u_star, r, omega)?;
            Ok(BoundRow {
                epsilon: eps,
                delta,
                a: c.a,
                b: c.b,
                r,
                omega,
                bound1,
                bound2,
                min_bound: bound1.min(bound2),
                vacuous: c.vacuous,
                event_states: c.event_states,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BoundReport {
        sigma_h2,
        sigma_h,
        clamped_subsets: clamped_subsets(scenario, moments)
            .iter()
            .map(|s| s.label())
            .collect(),
        u_star,
        utility_offset,
        interference,
        minimizer_bound1: argmin(&rows, |r| r.bound1),
        minimizer_bound2: argmin(&rows, |r| r.bound2),
        minimizer: argmin(&rows, |r| r.min_bound),
        rows,
        gap: gap.gap,
        gap_se: gap.gap_se,
        n_samples: trace.len(),
        seed: trace.seed(),
    })
}

/// One bound sweep per spread scale (variance multiplier) of the fading law,
/// all on the same seed.
pub fn spread_sweep(
    scenario: &Scenario,
    fading: &FadingModel,
    utility: &Utility,
    eps_grid: &[f64],
    scales: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, BoundReport)>> {
    scales
        .iter()
        .map(|&c| {
            let scaled = fading.with_scaled_spread(c)?;
            Ok((
                c,
                bound_sweep(scenario, &scaled, utility, eps_grid, n, seed)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::Marginal;

    fn scalar() -> (Scenario, Moments) {
        (
            Scenario::new(vec![1.0], 1.0).unwrap(),
            Moments {
                mean: vec![1.0],
                covariance: vec![vec![0.01]],
            },
        )
    }

    #[test]
    fn scalar_sigma() {
        let (s, m) = scalar();
        // independent evaluation: ¼·0.01·(1 + (2(√(2 ln 2) − 0.05))²)
        let want = 0.25 * 0.01 * (1.0 + (2.0 * ((2.0 * 2f64.ln()).sqrt() - 0.05)).powi(2));
        let got = sigma_h_squared(&s, &m).unwrap();
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.015211).abs() < 1e-6);
        assert_eq!(sigma_h_squared(&s, &m.scaled_covariance(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn terms_sum_to_sigma() {
        let s = Scenario::new(vec![1.0, 2.0, 0.5], 0.7).unwrap();
        let m = Moments {
            mean: vec![1.0, 0.8, 1.3],
            covariance: vec![
                vec![0.2, 0.05, 0.0],
                vec![0.05, 0.1, 0.02],
                vec![0.0, 0.02, 0.3],
            ],
        };
        let total: f64 = UserSet::nonempty(3)
            .map(|set| variance_bound_ys(&s, set, &m).unwrap())
            .sum();
        assert!((total - sigma_h_squared(&s, &m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn large_variance_clamps() {
        let s = Scenario::new(vec![1.0], 1.0).unwrap();
        let m = Moments {
            mean: vec![0.1],
            covariance: vec![vec![4.0]],
        };
        assert_eq!(clamped_subsets(&s, &m), vec![UserSet(1)]);
        assert!((sigma_h_squared(&s, &m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bound_arithmetic() {
        assert!((chebyshev_region_bound(0.04, 0.4).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(chebyshev_region_bound(0.04, 0.1).unwrap(), 1.0);
        assert!(chebyshev_region_bound(0.04, 0.0).is_err());
        assert!((opt_distance_bound(1.0, 1.0, 0.04).unwrap() - 0.24).abs() < 1e-15);
        assert_eq!(opt_distance_bound(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(opt_distance_bound(0.0, 1.0, 0.1).is_err());
        let t1 = theorem1_bound(0.04, 1.0, 1.0, 1.0, 0.01).unwrap();
        assert!((t1 - 0.302663).abs() < 1e-6, "{t1}");
        assert_eq!(theorem1_bound(1.0, 0.7, 1.0, 1.0, 0.3).unwrap(), 0.7);
        assert!((theorem1_bound(0.3, 0.7, 1.0, 1.0, 0.0).unwrap() - 0.21).abs() < 1e-15);
        assert!((theorem2_bound(0.2, 1.0, 0.5, 2.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(theorem2_bound(0.0, 1.0, 0.5, 2.0).is_err());
        assert!(theorem1_bound(1.5, 1.0, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn single_user_radius_has_no_interference() {
        let s = Scenario::new(vec![1.0], 1.0).unwrap();
        let fm = FadingModel::independent(vec![Marginal::Uniform {
            low: 0.5,
            high: 1.5,
        }])
        .unwrap();
        let r = r_epsilon(&s, &fm, 0.25, 0.1, 500, 1).unwrap();
        assert_eq!(r.interference.value, 0.0);
        assert!((r.value - 0.2).abs() < 1e-15);
    }

    #[test]
    fn point_mass_radius_is_deterministic() {
        let s = Scenario::new(vec![1.0, 1.0], 1.0).unwrap();
        let fm = FadingModel::independent(vec![Marginal::PointMass { value: 1.0 }; 2]).unwrap();
        let r = r_epsilon(&s, &fm, 1.0, 0.0, 200, 1).unwrap();
        let e = 0.5 * (2.0 * 2.0 / 3.0f64).ln();
        assert!((r.value - (2.0 * e * e).sqrt()).abs() < 1e-14);
        assert!(r.interference.std_err < 1e-15);
    }

    #[test]
    fn linear_b_is_weight_norm() {
        let s = Scenario::new(vec![1.0, 1.0], 1.0).unwrap();
        let fm = FadingModel::independent(vec![
            Marginal::Uniform {
                low: 0.5,
                high: 1.5
            };
            2
        ])
        .unwrap();
        let u = Utility::linear(vec![3.0, 4.0]).unwrap();
        let c = estimate_constants(&s, &fm, &u, 0.5, 300, 2).unwrap();
        assert_eq!(c.b, 5.0);
    }

    #[test]
    fn unit_grid_returns_u_star() {
        let s = Scenario::new(vec![1.0, 1.0], 1.0).unwrap();
        let fm = FadingModel::independent(vec![
            Marginal::Uniform {
                low: 0.5,
                high: 1.5
            };
            2
        ])
        .unwrap();
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.5).unwrap();
        let rep = bound_sweep(&s, &fm, &u, &[1.0], 300, 4).unwrap();
        assert_eq!(rep.rows[0].bound1, rep.u_star);
        assert_eq!(rep.rows[0].bound2, rep.u_star);
        assert_eq!(rep.rows[0].min_bound, rep.u_star);
    }
}
