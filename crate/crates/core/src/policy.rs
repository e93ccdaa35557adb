//! Rate policies without power control and their Monte Carlo evaluation.

use serde::{Deserialize, Serialize};

use crate::capacity::{
    averaged_region_from_trace, instantaneous_region, subset_capacities, ChannelState,
    PolymatroidRegion, Scenario, UserSet,
};
use crate::error::{domain, ensure_len, Error, Result};
use crate::fading::{FadingModel, FadingTrace};
use crate::optimize::{
    frank_wolfe, greedy_order, maximize_linear, maximize_separable, FwOptions, FwReport,
    PolymatroidOracle, StepRule,
};
use crate::stats::mean_and_stderr;
use crate::utility::Utility;

/// Gap tolerance of the per-state utility maximization.
pub const STATE_GAP_TOL: f64 = 1e-8;
/// Gap tolerance when maximizing over the averaged region.
pub const AVERAGED_GAP_TOL: f64 = 1e-10;
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatePolicy {
    /// Per state, maximize the utility over `C_g(P, h)`.
    Greedy { utility: Utility },
    /// Per state, the successive-decoding vertex for fixed weights.
    LinearGreedy { weights: Vec<f64> },
    /// The same rates in every state; must be feasible in each.
    Fixed { rates: Vec<f64> },
    /// Convex mixture of linear-greedy policies: per state the weighted sum
    /// of the vertices for each direction.
    TimeSharing {
        shares: Vec<f64>,
        directions: Vec<Vec<f64>>,
    },
}

impl RatePolicy {
    pub fn num_users(&self) -> usize {
        match self {
            RatePolicy::Greedy { utility } => utility.num_users(),
            RatePolicy::LinearGreedy { weights } => weights.len(),
            RatePolicy::Fixed { rates } => rates.len(),
            RatePolicy::TimeSharing { directions, .. } => directions.first().map_or(0, Vec::len),
        }
    }

    /// Time-sharing policy whose mean over a trace equals the Frank–Wolfe
    /// iterate computed over that trace's averaged region.
    pub fn from_atoms(report: &FwReport) -> Result<Self> {
        let mut shares = Vec::new();
        let mut directions = Vec::new();
        for atom in report.atoms.iter().filter(|a| a.weight > 0.0) {
            let Some(d) = &atom.direction else {
                return Err(domain!(
                    "a caller-supplied start cannot be realized per state"
                ));
            };
            shares.push(atom.weight);
            directions.push(d.clone());
        }
        if shares.is_empty() {
            return Err(domain!("report has no atoms"));
        }
        Ok(RatePolicy::TimeSharing { shares, directions })
    }

    fn validate(&self, m: usize) -> Result<()> {
        ensure_len(m, self.num_users())?;
        match self {
            RatePolicy::Greedy { utility } => utility.validate(),
            RatePolicy::LinearGreedy { weights } => check_direction(weights),
            RatePolicy::Fixed { rates } => {
                if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                    return Err(domain!("fixed rates must be finite and nonnegative"));
                }
                Ok(())
            }
            RatePolicy::TimeSharing { shares, directions } => {
                ensure_len(shares.len(), directions.len())?;
                if shares.iter().any(|s| !(*s >= 0.0))
                    || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(domain!(
                        "time-sharing shares must be nonnegative and sum to one"
                    ));
                }
                for d in directions {
                    ensure_len(m, d.len())?;
                    check_direction(d)?;
                }
                Ok(())
            }
        }
    }

    /// Rates in one state.
    pub fn rates(&self, scenario: &Scenario, state: &ChannelState) -> Result<Vec<f64>> {
        match self {
            RatePolicy::Greedy { utility } => greedy_rate(scenario, state, utility),
            RatePolicy::LinearGreedy { weights } => {
                let region = instantaneous_region(scenario, state)?;
                maximize_linear(&region, weights)
            }
            RatePolicy::Fixed { rates } => {
                let region = instantaneous_region(scenario, state)?;
                if !region.contains(rates, 1e-9)? {
                    return Err(Error::Infeasible(format!(
                        "fixed rates {rates:?} exceed the region in state {:?}",
                        state.gains()
                    )));
                }
                Ok(rates.clone())
            }
            RatePolicy::TimeSharing { shares, directions } => {
                let region = instantaneous_region(scenario, state)?;
                let mut out = vec![0.0; scenario.num_users()];
                for (s, d) in shares.iter().zip(directions) {
                    let v = maximize_linear(&region, d)?;
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += s * x;
                    }
                }
                Ok(out)
            }
        }
    }
}

fn check_direction(d: &[f64]) -> Result<()> {
    if d.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || d.iter().all(|w| *w == 0.0) {
        return Err(domain!(
            "linear weights must be nonnegative and not all zero"
        ));
    }
    Ok(())
}

fn state_options() -> FwOptions {
    FwOptions {
        rule: StepRule::LimitedMax,
        gap_tol: STATE_GAP_TOL,
        max_iter: 100_000,
        record: false,
        pairwise: true,
    }
}

/// Maximizes the utility over `C_g(P, h)`.
pub fn greedy_rate(
    scenario: &Scenario,
    state: &ChannelState,
    utility: &Utility,
) -> Result<Vec<f64>> {
    ensure_len(scenario.num_users(), utility.num_users())?;
    let region = instantaneous_region(scenario, state)?;
    greedy_on_region(&region, utility)
}

fn greedy_on_region(region: &PolymatroidRegion, utility: &Utility) -> Result<Vec<f64>> {
    if region.sum_rate() == 0.0 {
        return Ok(vec![0.0; region.num_users()]);
    }
    if utility.is_linear() {
        return maximize_linear(region, utility.weights());
    }
    // the exact decomposition answer seeds Frank–Wolfe, which certifies the gap
    let start = maximize_separable(region, utility)?;
    let report = frank_wolfe(
        &mut PolymatroidOracle::new(region),
        utility,
        Some(start),
        &state_options(),
    )?;
    if !report.converged {
        return Err(Error::NonConvergence {
            what: "per-state Frank-Wolfe",
            iterations: report.iterations,
            residuals: vec![report.gap],
        });
    }
    Ok(report.rates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub mean_rates: Vec<f64>,
    pub rates_se: Vec<f64>,
    /// `E[u(R(H))]`.
    pub mean_utility: f64,
    pub utility_se: f64,
    /// `u(E[R(H)])`.
    pub utility_of_mean: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub sample_rates: Vec<Vec<f64>>,
    #[serde(skip)]
    pub sample_utility: Vec<f64>,
}

fn map_states<T: Send, F>(trace: &FadingTrace, f: F) -> Result<Vec<T>>
where
    F: Fn(&[f64]) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trace.len())
            .into_par_iter()
            .map(|k| f(trace.row(k)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    trace.rows().map(f).collect()
}

/// Evaluates a policy on every state of a trace, scoring with `utility`.
pub fn evaluate_on_trace(
    scenario: &Scenario,
    trace: &FadingTrace,
    policy: &RatePolicy,
    utility: &Utility,
) -> Result<PolicyEvaluation> {
    let m = scenario.num_users();
    ensure_len(m, trace.num_users())?;
    ensure_len(m, utility.num_users())?;
    policy.validate(m)?;
    if trace.len() < MIN_SAMPLES {
        return Err(domain!(
            "policy evaluation needs at least {MIN_SAMPLES} samples, got {}",
            trace.len()
        ));
    }
    let sample_rates = map_states(trace, |row| {
        policy.rates(scenario, &ChannelState::new(row.to_vec())?)
    })?;
    let sample_utility: Vec<f64> = sample_rates
        .iter()
        .map(|r| utility.value(r))
        .collect::<Result<_>>()?;
    let mut mean_rates = vec![0.0; m];
    let mut rates_se = vec![0.0; m];
    let mut column = Vec::with_capacity(trace.len());
    for i in 0..m {
        column.clear();
        column.extend(sample_rates.iter().map(|r| r[i]));
        (mean_rates[i], rates_se[i]) = mean_and_stderr(&column);
    }
    let (mean_utility, utility_se) = mean_and_stderr(&sample_utility);
    Ok(PolicyEvaluation {
        utility_of_mean: utility.value(&mean_rates)?,
        mean_rates,
        rates_se,
        mean_utility,
        utility_se,
        n_samples: trace.len(),
        seed: trace.seed(),
        sample_rates,
        sample_utility,
    })
}

/// Draws `n` states and evaluates the policy on them.
pub fn evaluate_policy(
    scenario: &Scenario,
    fading: &FadingModel,
    policy: &RatePolicy,
    utility: &Utility,
    n: usize,
    seed: u64,
) -> Result<PolicyEvaluation> {
    if n < MIN_SAMPLES {
        return Err(domain!(
            "policy evaluation needs at least {MIN_SAMPLES} samples, got {n}"
        ));
    }
    let trace = fading.sample(n, seed)?;
    evaluate_on_trace(scenario, &trace, policy, utility)
}

/// Optimal and greedy performance on one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Maximizer of the utility over the averaged region of the trace.
    pub optimum: Vec<f64>,
    /// `u(R*)`.
    pub optimal_utility: f64,
    /// `u(E[R̄(H)])` for the greedy policy.
    pub greedy_utility: f64,
    /// `u(R*) - u(E[R̄(H)])`.
    pub gap: f64,
    /// Standard error of `gap` from the per-sample influence of both terms.
    pub gap_se: f64,
    /// Weights `∇u(R*)` supporting the optimum.
    pub supporting_weights: Vec<f64>,
    pub fw_iterations: usize,
    pub greedy: PolicyEvaluation,
    /// Time-sharing witness whose mean over the trace is `R*`; absent when
    /// the optimum was not reached through oracle vertices.
    pub witness: Option<RatePolicy>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Dual prices of the chain constraints supporting the greedy vertex for
/// `weights`: `y_{S_k} = μ_(k) - μ_(k+1)` along the sorted chain.
fn chain_prices(weights: &[f64]) -> Vec<(UserSet, f64)> {
    let order = greedy_order(weights);
    let mut set = UserSet(0);
    let mut out = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        set = set.with(i);
        let next = order.get(k + 1).map_or(0.0, |&j| weights[j]);
        out.push((set, weights[i] - next));
    }
    out
}

/// Iteration budget for the atom-tracking solve over the averaged region.
pub const AVERAGED_MAX_ITER: usize = 20_000;

/// Maximizes `u` over an averaged region by Frank–Wolfe from the all-ones
/// vertex, so the answer comes with vertex atoms and their directions. If
/// that stalls, the exact decomposition answer is certified instead and
/// the atoms carry no directions.
pub fn optimum_on_region(region: &PolymatroidRegion, utility: &Utility) -> Result<FwReport> {
    let mut opts = FwOptions {
        rule: StepRule::LimitedMax,
        gap_tol: AVERAGED_GAP_TOL,
        max_iter: AVERAGED_MAX_ITER,
        record: false,
        pairwise: true,
    };
    let mut oracle = PolymatroidOracle::new(region);
    let mut report = frank_wolfe(&mut oracle, utility, None, &opts)?;
    if !report.converged {
        opts.max_iter = 100_000;
        let start = maximize_separable(region, utility)?;
        report = frank_wolfe(&mut oracle, utility, Some(start), &opts)?;
    }
    if !report.converged {
        return Err(Error::NonConvergence {
            what: "Frank-Wolfe over the averaged region",
            iterations: report.iterations,
            residuals: vec![report.gap],
        });
    }
    Ok(report)
}

/// `u(R*) - u(E[R̄(H)])` on one trace, with `R*` the utility maximizer over
/// that trace's averaged region.
pub fn performance_gap_on_trace(
    scenario: &Scenario,
    trace: &FadingTrace,
    utility: &Utility,
) -> Result<GapReport> {
    let averaged = averaged_region_from_trace(scenario, trace)?;
    let report = optimum_on_region(&averaged.region, utility)?;
    let optimal_utility = utility.value(&report.rates)?;
    let greedy = evaluate_on_trace(
        scenario,
        trace,
        &RatePolicy::Greedy {
            utility: utility.clone(),
        },
        utility,
    )?;
    let greedy_utility = greedy.utility_of_mean;

    // Linearize both terms in the sample means: u(R*) moves with the ranks
    // through the chain prices at ∇u(R*), u(E R̄) through ∇u(E R̄).
    let supporting_weights = utility.gradient(&report.rates)?;
    let prices = chain_prices(&supporting_weights);
    let grad_mean = utility.gradient(&greedy.mean_rates)?;
    let influence: Vec<f64> = trace
        .rows()
        .zip(&greedy.sample_rates)
        .map(|(row, r)| {
            let y = subset_capacities(scenario, row);
            let rank_part: f64 = prices
                .iter()
                .map(|(s, p)| p * (y[s.0 as usize] - averaged.region.rank(*s)))
                .sum();
            let rate_part: f64 = grad_mean
                .iter()
                .zip(r.iter().zip(&greedy.mean_rates))
                .map(|(g, (x, m))| g * (x - m))
                .sum();
            rank_part - rate_part
        })
        .collect();
    let (_, gap_se) = mean_and_stderr(&influence);

    Ok(GapReport {
        gap: optimal_utility - greedy_utility,
        gap_se,
        optimum: report.rates.clone(),
        optimal_utility,
        greedy_utility,
        supporting_weights,
        fw_iterations: report.iterations,
        witness: RatePolicy::from_atoms(&report).ok(),
        greedy,
        n_samples: trace.len(),
        seed: trace.seed(),
    })
}

pub fn performance_gap(
    scenario: &Scenario,
    fading: &FadingModel,
    utility: &Utility,
    n: usize,
    seed: u64,
) -> Result<GapReport> {
    if n < MIN_SAMPLES {
        return Err(domain!(
            "gap estimation needs at least {MIN_SAMPLES} samples, got {n}"
        ));
    }
    let trace = fading.sample(n, seed)?;
    performance_gap_on_trace(scenario, &trace, utility)
}

/// Mean and standard error of per-sample differences `a_n - b_n`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    ensure_len(a.len(), b.len())?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mean_and_stderr(&d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::Marginal;

    fn symmetric() -> Scenario {
        Scenario::new(vec![1.0, 1.0], 1.0).unwrap()
    }

    #[test]
    fn symmetric_log_state_splits_evenly() {
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.01).unwrap();
        let r = greedy_rate(
            &symmetric(),
            &ChannelState::new(vec![1.0, 1.0]).unwrap(),
            &u,
        )
        .unwrap();
        let half = 0.25 * 3f64.ln();
        assert!(
            (r[0] - half).abs() < 1e-7 && (r[1] - half).abs() < 1e-7,
            "{r:?}"
        );
    }

    #[test]
    fn silent_state_gives_zero() {
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.01).unwrap();
        let r = greedy_rate(
            &symmetric(),
            &ChannelState::new(vec![0.0, 0.0]).unwrap(),
            &u,
        )
        .unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn linear_greedy_matches_vertex() {
        let u = Utility::linear(vec![1.0, 2.0]).unwrap();
        let h = ChannelState::new(vec![0.7, 1.3]).unwrap();
        let region = instantaneous_region(&symmetric(), &h).unwrap();
        assert_eq!(
            greedy_rate(&symmetric(), &h, &u).unwrap(),
            maximize_linear(&region, &[1.0, 2.0]).unwrap()
        );
    }

    #[test]
    fn fixed_policy_is_constant() {
        let fm = FadingModel::independent(vec![
            Marginal::Uniform {
                low: 0.5,
                high: 1.5
            };
            2
        ])
        .unwrap();
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.01).unwrap();
        let rates = vec![0.05, 0.1];
        let eval = evaluate_policy(
            &symmetric(),
            &fm,
            &RatePolicy::Fixed {
                rates: rates.clone(),
            },
            &u,
            200,
            3,
        )
        .unwrap();
        for i in 0..2 {
            assert!((eval.mean_rates[i] - rates[i]).abs() < 1e-15);
        }
        assert!((eval.mean_utility - eval.utility_of_mean).abs() < 1e-13);
        assert!(
            evaluate_policy(&symmetric(), &fm, &RatePolicy::Fixed { rates }, &u, 99, 3).is_err()
        );
    }

    #[test]
    fn infeasible_fixed_policy_is_rejected() {
        let h = ChannelState::new(vec![0.5, 0.5]).unwrap();
        let pol = RatePolicy::Fixed {
            rates: vec![1.0, 1.0],
        };
        assert!(matches!(
            pol.rates(&symmetric(), &h),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn point_mass_gap_vanishes() {
        let fm = FadingModel::independent(vec![Marginal::PointMass { value: 1.0 }; 2]).unwrap();
        let u = Utility::weighted_log(vec![1.0, 2.0], 0.01).unwrap();
        let g = performance_gap(&symmetric(), &fm, &u, 200, 5).unwrap();
        assert!(g.gap.abs() < 1e-8, "{}", g.gap);
    }

    #[test]
    fn witness_mean_is_optimum() {
        let fm = FadingModel::independent(vec![
            Marginal::Uniform {
                low: 0.5,
                high: 1.5
            };
            2
        ])
        .unwrap();
        let u = Utility::weighted_log(vec![1.0, 2.0], 0.1).unwrap();
        let trace = fm.sample(2000, 9).unwrap();
        let g = performance_gap_on_trace(&symmetric(), &trace, &u).unwrap();
        let w = evaluate_on_trace(&symmetric(), &trace, g.witness.as_ref().unwrap(), &u).unwrap();
        for i in 0..2 {
            assert!((w.mean_rates[i] - g.optimum[i]).abs() < 1e-10);
        }
        assert!(g.gap >= -1e-9);
    }

    #[test]
    fn chain_prices_reconstruct_weights() {
        let w = [0.3, 1.2, 0.7];
        let prices = chain_prices(&w);
        for i in 0..3 {
            let total: f64 = prices
                .iter()
                .filter(|(s, _)| s.contains(i))
                .map(|(_, p)| p)
                .sum();
            assert!((total - w[i]).abs() < 1e-15);
        }
    }
}
