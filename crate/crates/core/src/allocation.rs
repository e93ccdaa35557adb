//! Power-controlled allocation: the per-state linear program, the average
//! power multipliers, and the boundary point of the throughput region for a
//! given weight vector.
//!
//! In a fixed state the linear program `max μ'r - λ'p, r ∈ C_g(p, h)` is
//! solved by sweeping the received interference level `z`. At level `z` user
//! `i` would earn `μ_i / (2(N0 + z)) - λ_i / h_i` per unit of received power;
//! the level goes to the best user while that value is positive. With
//! `x = 1/(2(N0 + z))` each user's value is the line `μ_i x - λ_i / h_i`, so
//! the allocation is read off the upper envelope of `M` lines.

use serde::{Deserialize, Serialize};

use crate::capacity::{ChannelState, Scenario};
use crate::error::{domain, ensure_len, Error, Result};
use crate::fading::{FadingModel, FadingTrace, Marginal};
use crate::optimize::LinearOracle;
use crate::quadrature::{bisect, integrate_pieces, Tolerance};
use crate::stats::mean_and_stderr;

/// Per-user long-term average power limits `P̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget(Vec<f64>);

impl PowerBudget {
    pub fn new(limits: Vec<f64>) -> Result<Self> {
        if limits.is_empty() || limits.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(domain!("average power limits must be positive and finite"));
        }
        Ok(PowerBudget(limits))
    }

    pub fn limits(&self) -> &[f64] {
        &self.0
    }
}

/// Lagrange multipliers `λ` pricing each user's power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierVector(Vec<f64>);

impl MultiplierVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(domain!("multipliers must be finite and nonnegative"));
        }
        Ok(MultiplierVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Interference interval `[z_lo, z_hi)` of received power owned by one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub z_lo: f64,
    pub z_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateAllocation {
    pub rates: Vec<f64>,
    pub powers: Vec<f64>,
    /// Interference levels occupied by each user; a user decoded later sees
    /// less interference.
    pub intervals: Vec<Vec<Interval>>,
}

fn check_weights(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(domain!("weights must be positive and finite"));
    }
    Ok(())
}

/// Solves `max μ'r - λ'p` over `r ∈ C_g(p, h)`, `p ≥ 0` in state `h`.
pub fn per_state_allocation(
    scenario: &Scenario,
    state: &ChannelState,
    mu: &[f64],
    lambda: &MultiplierVector,
) -> Result<StateAllocation> {
    let m = scenario.num_users();
    ensure_len(m, state.len())?;
    ensure_len(m, mu.len())?;
    ensure_len(m, lambda.values().len())?;
    check_weights(mu)?;
    let h = state.gains();
    let lam = lambda.values();
    let noise = scenario.noise();
    let x_top = 0.5 / noise;

    // price per unit of received power; users without gain never transmit
    let mut cost = vec![f64::INFINITY; m];
    for i in 0..m {
        if h[i] > 0.0 {
            if lam[i] == 0.0 {
                return Err(Error::Unbounded { user: i + 1 });
            }
            cost[i] = lam[i] / h[i];
        }
    }
    let active: Vec<usize> = (0..m).filter(|&i| cost[i].is_finite()).collect();

    let mut breaks = vec![0.0, x_top];
    for (a, &i) in active.iter().enumerate() {
        breaks.push(cost[i] / mu[i]);
        for &k in &active[a + 1..] {
            if mu[i] != mu[k] {
                breaks.push((cost[i] - cost[k]) / (mu[i] - mu[k]));
            }
        }
    }
    breaks.retain(|x| *x >= 0.0 && *x <= x_top && x.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut rates = vec![0.0; m];
    let mut powers = vec![0.0; m];
    let mut intervals: Vec<Vec<Interval>> = vec![Vec::new(); m];
    // walk x downward from the top, i.e. interference upward from zero
    let mut owner_prev: Option<usize> = None;
    for w in breaks.windows(2).rev() {
        let (x_lo, x_hi) = (w[0], w[1]);
        if x_hi <= x_lo {
            continue;
        }
        let mid = 0.5 * (x_lo + x_hi);
        let mut owner = None;
        let mut best = 0.0;
        for &i in &active {
            let v = mu[i] * mid - cost[i];
            if v > best {
                best = v;
                owner = Some(i);
            }
        }
        let Some(i) = owner else {
            break;
        };
        let z_lo = 0.5 / x_hi - noise;
        let z_hi = 0.5 / x_lo - noise;
        rates[i] += 0.5 * (x_hi / x_lo).ln();
        powers[i] += (z_hi - z_lo) / h[i];
        match intervals[i].last_mut() {
            Some(last) if owner_prev == Some(i) => last.z_hi = z_hi,
            _ => intervals[i].push(Interval { z_lo, z_hi }),
        }
        owner_prev = Some(i);
    }
    Ok(StateAllocation {
        rates,
        powers,
        intervals,
    })
}

/// `μ'r - λ'p`.
pub fn state_objective(alloc: &StateAllocation, mu: &[f64], lambda: &MultiplierVector) -> f64 {
    let gain: f64 = alloc.rates.iter().zip(mu).map(|(r, m)| r * m).sum();
    let price: f64 = alloc
        .powers
        .iter()
        .zip(lambda.values())
        .map(|(p, l)| p * l)
        .sum();
    gain - price
}

/// Quadrature settings for the multiplier and boundary integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Absolute and relative tolerance of the outer (interference) integral.
    pub tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { tol: 1e-8 }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Moment {
    /// `∫ dz / h`: expected power.
    Power,
    /// `∫ dz / (2(N0 + z))`: expected rate.
    Rate,
}

/// Integrand of the expected power / rate of one user under independent fading.
struct UserIntegral<'a> {
    marginals: &'a [Marginal],
    mu: &'a [f64],
    lambda: &'a [f64],
    noise: f64,
    user: usize,
}

impl UserIntegral<'_> {
    /// Probability that every other user prices level `z` above user `i` with gain `h`.
    fn others_yield(&self, h: f64, x: f64) -> f64 {
        let i = self.user;
        let mut prob = 1.0;
        for (k, fk) in self.marginals.iter().enumerate() {
            if k == i {
                continue;
            }
            // user k loses iff λ_k / h_k > λ_i / h + (μ_k - μ_i) x
            let d = self.lambda[i] / h + (self.mu[k] - self.mu[i]) * x;
            if d > 0.0 {
                prob *= fk.cdf(self.lambda[k] / d);
                if prob == 0.0 {
                    break;
                }
            }
        }
        prob
    }

    /// Gains at which the inner integrand has a kink for interference `x`.
    fn inner_breaks(&self, x: f64, h_lo: f64, h_hi: f64) -> Vec<f64> {
        let i = self.user;
        let mut breaks = vec![h_lo, h_hi];
        let own = &self.marginals[i];
        breaks.push(own.support_low());
        for (k, fk) in self.marginals.iter().enumerate() {
            if k == i {
                continue;
            }
            let shift = (self.mu[k] - self.mu[i]) * x;
            for edge in [fk.support_low(), fk.support_high()] {
                if edge > 0.0 {
                    let denom = self.lambda[k] / edge - shift;
                    if denom > 0.0 {
                        breaks.push(self.lambda[i] / denom);
                    }
                }
            }
            if shift < 0.0 {
                breaks.push(self.lambda[i] / -shift);
            }
        }
        breaks.retain(|b| b.is_finite() && *b >= h_lo && *b <= h_hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }

    fn evaluate(&self, moment: Moment, opts: &QuadratureOptions) -> Result<f64> {
        let i = self.user;
        let own = &self.marginals[i];
        let h_max = own.support_high();
        let scale = self.mu[i] / (2.0 * self.lambda[i]);
        // user i can only win level z when h > 2 λ_i (N0 + z) / μ_i
        let z_top = scale * h_max - self.noise;
        if z_top <= 0.0 {
            return Ok(0.0);
        }
        let inner_tol = Tolerance::new(opts.tol * 1e-2, opts.tol * 1e-2);
        let mut failure: Option<Error> = None;
        let outer = |z: f64| -> f64 {
            if failure.is_some() {
                return 0.0;
            }
            let x = 0.5 / (self.noise + z);
            let h_lo = (self.noise + z) / scale;
            if h_lo >= h_max {
                return 0.0;
            }
            let breaks = self.inner_breaks(x, h_lo, h_max);
            let inner = |h: f64| {
                let density = own.pdf(h).unwrap_or(0.0);
                if density == 0.0 {
                    return 0.0;
                }
                let weight = match moment {
                    Moment::Power => 1.0 / h,
                    Moment::Rate => 1.0,
                };
                weight * density * self.others_yield(h, x)
            };
            match integrate_pieces(inner, &breaks, inner_tol) {
                Ok(r) => {
                    let w = match moment {
                        Moment::Power => 1.0,
                        Moment::Rate => x,
                    };
                    w * r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        };
        let mut outer_breaks = vec![0.0, z_top];
        let kink = scale * own.support_low() - self.noise;
        if kink > 0.0 && kink < z_top {
            outer_breaks.insert(1, kink);
        }
        let result = integrate_pieces(outer, &outer_breaks, Tolerance::new(opts.tol, opts.tol));
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(result?.value)
    }
}

fn check_inputs(
    scenario: &Scenario,
    fading: &FadingModel,
    mu: &[f64],
    lambda: &[f64],
) -> Result<()> {
    let m = scenario.num_users();
    ensure_len(m, fading.num_users())?;
    ensure_len(m, mu.len())?;
    ensure_len(m, lambda.len())?;
    check_weights(mu)?;
    fading.require_independent_continuous()?;
    if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(domain!("multipliers must be positive for expectations"));
    }
    Ok(())
}

fn user_moment(
    scenario: &Scenario,
    fading: &FadingModel,
    mu: &[f64],
    lambda: &[f64],
    user: usize,
    moment: Moment,
    opts: &QuadratureOptions,
) -> Result<f64> {
    UserIntegral {
        marginals: fading.marginals(),
        mu,
        lambda,
        noise: scenario.noise(),
        user,
    }
    .evaluate(moment, opts)
}

fn all_users(
    scenario: &Scenario,
    fading: &FadingModel,
    mu: &[f64],
    lambda: &[f64],
    moment: Moment,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>> {
    check_inputs(scenario, fading, mu, lambda)?;
    let m = scenario.num_users();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m)
            .into_par_iter()
            .map(|i| user_moment(scenario, fading, mu, lambda, i, moment, opts))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    (0..m)
        .map(|i| user_moment(scenario, fading, mu, lambda, i, moment, opts))
        .collect()
}

/// Expected power `E[p_i(H)]` spent by the per-state policy, by nested quadrature.
pub fn expected_power(
    scenario: &Scenario,
    fading: &FadingModel,
    mu: &[f64],
    lambda: &MultiplierVector,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>> {
    all_users(scenario, fading, mu, lambda.values(), Moment::Power, opts)
}

/// Boundary point `R*(μ)` of the throughput region: the expected rates of
/// the per-state policy, by nested quadrature.
pub fn boundary_rate(
    scenario: &Scenario,
    fading: &FadingModel,
    mu: &[f64],
    lambda: &MultiplierVector,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>> {
    all_users(scenario, fading, mu, lambda.values(), Moment::Rate, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub quadrature: QuadratureOptions,
    /// Stop once every `|E[p_i] - P̄_i| / P̄_i` is at most this.
    pub rel_tol: f64,
    /// Exponent of the multiplicative fixed-point update.
    pub damping: f64,
    pub max_fixed_point: usize,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            quadrature: QuadratureOptions::default(),
            rel_tol: 1e-4,
            damping: 0.5,
            max_fixed_point: 60,
            max_sweeps: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSolution {
    pub lambda: MultiplierVector,
    pub expected_power: Vec<f64>,
    /// Largest relative power residual.
    pub residual: f64,
    pub evaluations: usize,
}

fn max_rel_residual(power: &[f64], budget: &[f64]) -> f64 {
    power
        .iter()
        .zip(budget)
        .map(|(p, b)| (p - b).abs() / b)
        .fold(0.0, f64::max)
}

/// Multiplier at which a user with no competition spends exactly `limit`:
/// `E[(μ/(2λ) - N0/H)^+] = limit`.
fn single_user_multiplier(
    marginal: &Marginal,
    mu: f64,
    noise: f64,
    limit: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let lone = [*marginal];
    let power = |lam: f64| -> Result<f64> {
        UserIntegral {
            marginals: &lone,
            mu: &[mu],
            lambda: &[lam],
            noise,
            user: 0,
        }
        .evaluate(Moment::Power, opts)
    };
    let hi = mu * marginal.support_high() / (2.0 * noise);
    let mut lo = hi * 0.5;
    while power(lo)? < limit {
        lo *= 0.25;
        if lo < 1e-300 {
            return Err(domain!("cannot bracket the single-user multiplier"));
        }
    }
    let mut failure = None;
    let log_root = bisect(
        |t| match power(t.exp()) {
            Ok(p) => p - limit,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        lo.ln(),
        hi.ln(),
        1e-12,
        300,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(log_root.exp())
}

/// Multipliers `λ` at which the per-state policy meets the average power
/// limits exactly.
///
/// A damped multiplicative update `λ ← λ (E[p]/P̄)^γ` runs first; if it does
/// not settle, coordinate-wise bisection (`E[p_i]` decreases in `λ_i`) takes
/// over from the best point found.
pub fn solve_multipliers(
    scenario: &Scenario,
    fading: &FadingModel,
    budget: &PowerBudget,
    mu: &[f64],
    initial: Option<&MultiplierVector>,
    opts: &SolverOptions,
) -> Result<MultiplierSolution> {
    let m = scenario.num_users();
    ensure_len(m, budget.limits().len())?;
    ensure_len(m, mu.len())?;
    check_weights(mu)?;
    fading.require_independent_continuous()?;
    let limits = budget.limits();
    let q = &opts.quadrature;
    let mut evaluations = 0;

    let mut lambda: Vec<f64> = match initial {
        Some(l) if l.values().len() == m && l.values().iter().all(|v| *v > 0.0) => {
            l.values().to_vec()
        }
        _ => (0..m)
            .map(|i| {
                single_user_multiplier(
                    &fading.marginals()[i],
                    mu[i],
                    scenario.noise(),
                    limits[i],
                    q,
                )
            })
            .collect::<Result<_>>()?,
    };

    let power_at = |lam: &[f64], evals: &mut usize| -> Result<Vec<f64>> {
        *evals += 1;
        all_users(scenario, fading, mu, lam, Moment::Power, q)
    };

    let mut power = power_at(&lambda, &mut evaluations)?;
    let mut residual = max_rel_residual(&power, limits);
    let mut best = (residual, lambda.clone(), power.clone());
    for _ in 0..opts.max_fixed_point {
        if residual <= opts.rel_tol {
            break;
        }
        for i in 0..m {
            lambda[i] *= if power[i] > 0.0 {
                (power[i] / limits[i]).powf(opts.damping).clamp(0.1, 10.0)
            } else {
                0.5
            };
        }
        power = power_at(&lambda, &mut evaluations)?;
        residual = max_rel_residual(&power, limits);
        if residual < best.0 {
            best = (residual, lambda.clone(), power.clone());
        }
    }

    if best.0 > opts.rel_tol {
        let (_, mut lam, _) = best.clone();
        for _ in 0..opts.max_sweeps {
            for i in 0..m {
                let own = |li: f64, evals: &mut usize| -> Result<f64> {
                    *evals += 1;
                    let mut trial = lam.clone();
                    trial[i] = li;
                    user_moment(scenario, fading, mu, &trial, i, Moment::Power, q)
                };
                let hi = mu[i] * fading.marginals()[i].support_high() / (2.0 * scenario.noise());
                let mut lo = lam[i].min(hi * 0.5);
                while own(lo, &mut evaluations)? < limits[i] {
                    lo *= 0.25;
                    if lo < 1e-300 {
                        return Err(domain!("cannot bracket the multiplier of user {}", i + 1));
                    }
                }
                let mut failure = None;
                let t = bisect(
                    |t| match own(t.exp(), &mut evaluations) {
                        Ok(p) => (p - limits[i]) / limits[i],
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    },
                    lo.ln(),
                    hi.ln(),
                    1e-10,
                    300,
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                lam[i] = t.exp();
            }
            let p = power_at(&lam, &mut evaluations)?;
            let r = max_rel_residual(&p, limits);
            if r < best.0 {
                best = (r, lam.clone(), p);
            }
            if r <= opts.rel_tol {
                break;
            }
        }
    }

    let (residual, lambda, power) = best;
    if residual > opts.rel_tol {
        let residuals = power.iter().zip(limits).map(|(p, b)| (p - b) / b).collect();
        return Err(Error::NonConvergence {
            what: "multiplier solve",
            iterations: evaluations,
            residuals,
        });
    }
    Ok(MultiplierSolution {
        lambda: MultiplierVector(lambda),
        expected_power: power,
        residual,
        evaluations,
    })
}

/// Monte Carlo averages of the per-state policy over a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAverages {
    pub rates: Vec<f64>,
    pub rates_se: Vec<f64>,
    pub powers: Vec<f64>,
    pub powers_se: Vec<f64>,
    /// Mean sum rate, `E[C(Σ h_i p_i(h), N0)]`.
    pub sum_rate: f64,
    pub sum_rate_se: f64,
}

pub fn simulate_allocation(
    scenario: &Scenario,
    trace: &FadingTrace,
    mu: &[f64],
    lambda: &MultiplierVector,
) -> Result<PolicyAverages> {
    let m = scenario.num_users();
    ensure_len(m, trace.num_users())?;
    let allocs: Vec<StateAllocation> = trace
        .rows()
        .map(|row| per_state_allocation(scenario, &ChannelState::new(row.to_vec())?, mu, lambda))
        .collect::<Result<_>>()?;
    let column = |f: &dyn Fn(&StateAllocation) -> f64| -> (f64, f64) {
        let v: Vec<f64> = allocs.iter().map(f).collect();
        mean_and_stderr(&v)
    };
    let mut out = PolicyAverages {
        rates: vec![0.0; m],
        rates_se: vec![0.0; m],
        powers: vec![0.0; m],
        powers_se: vec![0.0; m],
        sum_rate: 0.0,
        sum_rate_se: 0.0,
    };
    for i in 0..m {
        (out.rates[i], out.rates_se[i]) = column(&|a| a.rates[i]);
        (out.powers[i], out.powers_se[i]) = column(&|a| a.powers[i]);
    }
    let sums: Vec<f64> = allocs
        .iter()
        .zip(trace.rows())
        .map(|(a, h)| {
            let received: f64 = a.powers.iter().zip(h).map(|(p, g)| p * g).sum();
            0.5 * (received / scenario.noise()).ln_1p()
        })
        .collect();
    (out.sum_rate, out.sum_rate_se) = mean_and_stderr(&sums);
    Ok(out)
}

/// Linear oracle over the power-controlled throughput region `C(P̄)`.
///
/// Each new weight direction re-solves the multipliers (warm-started from
/// the previous direction) and evaluates the boundary point; answers are
/// memoized by unit-norm direction.
#[derive(Debug, Clone)]
pub struct PowerControlOracle {
    scenario: Scenario,
    fading: FadingModel,
    budget: PowerBudget,
    opts: SolverOptions,
    cache: Vec<(Vec<f64>, MultiplierSolution, Vec<f64>)>,
}

impl PowerControlOracle {
    pub fn new(
        scenario: Scenario,
        fading: FadingModel,
        budget: PowerBudget,
        opts: SolverOptions,
    ) -> Result<Self> {
        let m = scenario.num_users();
        ensure_len(m, fading.num_users())?;
        ensure_len(m, budget.limits().len())?;
        fading.require_independent_continuous()?;
        Ok(PowerControlOracle {
            scenario,
            fading,
            budget,
            opts,
            cache: Vec::new(),
        })
    }

    /// Multipliers used for a previously queried direction.
    pub fn multipliers_for(&self, weights: &[f64]) -> Option<&MultiplierSolution> {
        let unit = unit_direction(weights);
        self.cache
            .iter()
            .find(|(d, _, _)| *d == unit)
            .map(|(_, s, _)| s)
    }

    pub fn solve(&mut self, weights: &[f64]) -> Result<(MultiplierSolution, Vec<f64>)> {
        check_weights(weights)?;
        let unit = unit_direction(weights);
        if let Some((_, sol, rates)) = self.cache.iter().find(|(d, _, _)| *d == unit) {
            return Ok((sol.clone(), rates.clone()));
        }
        // λ scales with μ, so the last answer rescaled is a good start
        let warm = self.cache.last().map(|(d, sol, _)| {
            let ratio = unit.iter().zip(d).map(|(a, b)| a / b).sum::<f64>() / unit.len() as f64;
            MultiplierVector(sol.lambda.values().iter().map(|l| l * ratio).collect())
        });
        let sol = solve_multipliers(
            &self.scenario,
            &self.fading,
            &self.budget,
            &unit,
            warm.as_ref(),
            &self.opts,
        )?;
        let rates = boundary_rate(
            &self.scenario,
            &self.fading,
            &unit,
            &sol.lambda,
            &self.opts.quadrature,
        )?;
        self.cache.push((unit, sol.clone(), rates.clone()));
        Ok((sol, rates))
    }
}

fn unit_direction(weights: &[f64]) -> Vec<f64> {
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    weights.iter().map(|w| w / norm).collect()
}

impl LinearOracle for PowerControlOracle {
    fn num_users(&self) -> usize {
        self.scenario.num_users()
    }

    fn maximize(&mut self, weights: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(weights)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_user() -> Scenario {
        Scenario::new(vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn single_user_waterfilling_state() {
        let h = ChannelState::new(vec![1.0]).unwrap();
        let a = per_state_allocation(
            &one_user(),
            &h,
            &[1.0],
            &MultiplierVector::new(vec![0.25]).unwrap(),
        )
        .unwrap();
        assert!((a.powers[0] - 1.0).abs() < 1e-14);
        assert!((a.rates[0] - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(
            a.intervals[0],
            vec![Interval {
                z_lo: 0.0,
                z_hi: 1.0
            }]
        );

        let off = per_state_allocation(
            &one_user(),
            &h,
            &[1.0],
            &MultiplierVector::new(vec![0.6]).unwrap(),
        )
        .unwrap();
        assert_eq!((off.powers[0], off.rates[0]), (0.0, 0.0));
    }

    #[test]
    fn zero_price_is_unbounded() {
        let s = Scenario::new(vec![1.0, 1.0], 1.0).unwrap();
        let h = ChannelState::new(vec![1.0, 0.0]).unwrap();
        let err = per_state_allocation(
            &s,
            &h,
            &[1.0, 1.0],
            &MultiplierVector::new(vec![0.0, 0.0]).unwrap(),
        );
        assert_eq!(err, Err(Error::Unbounded { user: 1 }));
        // a silent user may have zero price
        let ok = per_state_allocation(
            &s,
            &ChannelState::new(vec![0.0, 1.0]).unwrap(),
            &[1.0, 1.0],
            &MultiplierVector::new(vec![0.0, 0.3]).unwrap(),
        )
        .unwrap();
        assert_eq!(ok.powers[0], 0.0);
    }

    #[test]
    fn two_user_intervals_stack() {
        let s = Scenario::new(vec![1.0, 1.0], 1.0).unwrap();
        let h = ChannelState::new(vec![2.0, 1.0]).unwrap();
        let a = per_state_allocation(
            &s,
            &h,
            &[1.0, 2.0],
            &MultiplierVector::new(vec![0.1, 0.4]).unwrap(),
        )
        .unwrap();
        // user 2 (larger weight) is decoded last and takes the bottom level
        assert_eq!(a.intervals[1][0].z_lo, 0.0);
        assert!((a.intervals[0][0].z_lo - a.intervals[1][0].z_hi).abs() < 1e-12);
        let received: f64 = a.powers.iter().zip(h.gains()).map(|(p, g)| p * g).sum();
        let top = a.intervals[0][0].z_hi;
        assert!((received - top).abs() < 1e-12);
        let total_rate: f64 = a.rates.iter().sum();
        assert!((total_rate - 0.5 * (1.0 + top).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_waterfilling_closed_form() {
        let fm = FadingModel::independent(vec![Marginal::Uniform {
            low: 1.0,
            high: 2.0,
        }])
        .unwrap();
        let budget = PowerBudget::new(vec![1.0]).unwrap();
        let sol = solve_multipliers(
            &one_user(),
            &fm,
            &budget,
            &[1.0],
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        let want = 1.0 / (2.0 * (1.0 + 2f64.ln()));
        assert!((sol.lambda.values()[0] - want).abs() / want < 1e-4);
        let r = boundary_rate(
            &one_user(),
            &fm,
            &[1.0],
            &sol.lambda,
            &QuadratureOptions::default(),
        )
        .unwrap();
        let a = 1.0 + 2f64.ln();
        let r_want = 0.5 * (a.ln() + 2.0 * 2f64.ln() - 1.0);
        assert!(
            (r[0] - r_want).abs() / r_want < 1e-4,
            "{} vs {r_want}",
            r[0]
        );
    }

    #[test]
    fn threshold_multiplier_spends_nothing() {
        let fm = FadingModel::independent(vec![Marginal::Uniform {
            low: 0.5,
            high: 3.0,
        }])
        .unwrap();
        let lam = MultiplierVector::new(vec![3.0 / 2.0]).unwrap();
        let p = expected_power(
            &one_user(),
            &fm,
            &[1.0],
            &lam,
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn power_control_rejects_point_mass_and_coupling() {
        let fm = FadingModel::independent(vec![Marginal::PointMass { value: 1.0 }]).unwrap();
        let budget = PowerBudget::new(vec![1.0]).unwrap();
        assert!(matches!(
            solve_multipliers(
                &one_user(),
                &fm,
                &budget,
                &[1.0],
                None,
                &SolverOptions::default()
            ),
            Err(Error::Continuity { .. })
        ));
    }
    fn two_exponential() -> (Scenario, FadingModel, PowerBudget) {
        (
            Scenario::new(vec![1.0, 1.0], 1.0).unwrap(),
            FadingModel::independent(vec![
                Marginal::Exponential { mean: 1.0 },
                Marginal::Exponential { mean: 2.0 },
            ])
            .unwrap(),
            PowerBudget::new(vec![1.0, 0.5]).unwrap(),
        )
    }

    #[test]
    fn exponential_pair_meets_budget_by_simulation() {
        let (s, fm, budget) = two_exponential();
        let mu = [1.0, 1.5];
        let sol =
            solve_multipliers(&s, &fm, &budget, &mu, None, &SolverOptions::default()).unwrap();
        assert!(sol.residual <= 1e-4);
        let rates =
            boundary_rate(&s, &fm, &mu, &sol.lambda, &QuadratureOptions::default()).unwrap();
        let trace = fm.sample(100_000, 11).unwrap();
        let mc = simulate_allocation(&s, &trace, &mu, &sol.lambda).unwrap();
        for i in 0..2 {
            assert!(
                (mc.powers[i] - budget.limits()[i]).abs() <= 3.0 * mc.powers_se[i],
                "{mc:?}"
            );
            assert!(
                (mc.rates[i] - rates[i]).abs() <= 3.0 * mc.rates_se[i],
                "{mc:?} {rates:?}"
            );
        }
    }

    #[test]
    fn boundary_is_scale_free() {
        let (s, fm, budget) = two_exponential();
        let opts = SolverOptions::default();
        let q = QuadratureOptions::default();
        let a = solve_multipliers(&s, &fm, &budget, &[1.0, 2.0], None, &opts).unwrap();
        let b = solve_multipliers(&s, &fm, &budget, &[3.0, 6.0], None, &opts).unwrap();
        let ra = boundary_rate(&s, &fm, &[1.0, 2.0], &a.lambda, &q).unwrap();
        let rb = boundary_rate(&s, &fm, &[3.0, 6.0], &b.lambda, &q).unwrap();
        for i in 0..2 {
            assert!((ra[i] - rb[i]).abs() <= 1e-4 * ra[i]);
            assert!(
                (3.0 * a.lambda.values()[i] - b.lambda.values()[i]).abs()
                    <= 1e-3 * b.lambda.values()[i]
            );
        }
    }
}
