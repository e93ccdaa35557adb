//! Conditional-gradient (Frank–Wolfe) maximization of a concave utility over
//! a capacity region reached only through a linear-maximization oracle.

use serde::{Deserialize, Serialize};

use crate::capacity::{PolymatroidRegion, UserSet};
use crate::error::{domain, ensure_len, Error, Result};
use crate::utility::Utility;

/// Maximizes `μ'R` over a fixed convex region.
pub trait LinearOracle {
    fn num_users(&self) -> usize;

    /// A maximizer of `weights' R` over the region.
    fn maximize(&mut self, weights: &[f64]) -> Result<Vec<f64>>;

    /// Membership test used to vet starting points; `None` when the region
    /// has no cheap membership test.
    fn contains(&self, _rates: &[f64], _slack: f64) -> Option<bool> {
        None
    }
}

/// Greedy vertex maximizing `μ'R` over a polymatroid.
///
/// Users are ranked by weight, largest first (ties go to the lower index),
/// and each receives its marginal rank increment in that order.
pub fn maximize_linear(region: &PolymatroidRegion, weights: &[f64]) -> Result<Vec<f64>> {
    ensure_len(region.num_users(), weights.len())?;
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(domain!("linear weights must be finite and nonnegative"));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(domain!("linear weights must not all be zero"));
    }
    Ok(region.vertex_for_order(&greedy_order(weights)))
}

/// User ordering by descending weight, ascending index on ties.
pub fn greedy_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order
}

/// Exact maximizer of a strictly concave separable utility over a
/// polymatroid, by the decomposition algorithm.
///
/// Marginal utilities are equalized on the full budget `f(M)`; if some set
/// `S` is then overfilled, the optimum saturates the most overfilled set and
/// the problem splits into the restriction to `S` and the contraction by `S`.
pub fn maximize_separable(region: &PolymatroidRegion, utility: &Utility) -> Result<Vec<f64>> {
    let m = region.num_users();
    ensure_len(m, utility.num_users())?;
    if utility.is_linear() {
        return maximize_linear(region, utility.weights());
    }
    let mut out = vec![0.0; m];
    split(region, utility, UserSet::full(m), UserSet(0), &mut out)?;
    Ok(out)
}

/// Solves over the users in `ground` with rank `T ↦ f(T ∪ base) - f(base)`.
fn split(
    region: &PolymatroidRegion,
    utility: &Utility,
    ground: UserSet,
    base: UserSet,
    out: &mut [f64],
) -> Result<()> {
    if ground.is_empty() {
        return Ok(());
    }
    let offset = region.rank(base);
    let rank = |t: UserSet| region.rank(UserSet(t.0 | base.0)) - offset;
    let budget = rank(ground);
    let members: Vec<usize> = ground.members().collect();
    let fill = |price: f64| -> Vec<f64> {
        members
            .iter()
            .map(|&i| {
                utility
                    .marginal_inverse(i, price)
                    .expect("nonlinear utility")
            })
            .collect()
    };
    let total = |price: f64| fill(price).iter().sum::<f64>();
    let x = if budget <= 0.0 {
        vec![0.0; members.len()]
    } else {
        // total fill decreases in the price; bisect in log space
        let top = members
            .iter()
            .map(|&i| utility.marginal(i, 0.0))
            .fold(0.0, f64::max);
        let mut lo = top;
        while total(lo) < budget {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(domain!("cannot bracket the equalizing marginal utility"));
            }
        }
        let (mut a, mut b) = (lo.ln(), top.ln());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if total(mid.exp()) >= budget {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut x = fill(a.exp());
        // absorb the bisection residue so the budget is met exactly
        let sum: f64 = x.iter().sum();
        if sum > 0.0 {
            x.iter_mut().for_each(|v| *v *= budget / sum);
        }
        x
    };

    // most overfilled proper subset; ties go to the smaller mask
    let mut worst = (0.0, UserSet(0));
    for sub in 1..ground.0 {
        if sub & !ground.0 != 0 {
            continue;
        }
        let t = UserSet(sub);
        let load: f64 = members
            .iter()
            .zip(&x)
            .filter(|(i, _)| t.contains(**i))
            .map(|(_, v)| v)
            .sum();
        let excess = load - rank(t);
        if excess > worst.0 + 1e-15 * (1.0 + budget) {
            worst = (excess, t);
        }
    }
    if worst.1.is_empty() {
        for (i, v) in members.iter().zip(x) {
            out[*i] = v;
        }
        return Ok(());
    }
    let tight = worst.1;
    split(region, utility, tight, base, out)?;
    split(
        region,
        utility,
        UserSet(ground.0 & !tight.0),
        UserSet(base.0 | tight.0),
        out,
    )
}

/// Oracle over a polymatroid region (successive-decoding greedy).
#[derive(Debug, Clone, Copy)]
pub struct PolymatroidOracle<'a> {
    region: &'a PolymatroidRegion,
}

impl<'a> PolymatroidOracle<'a> {
    pub fn new(region: &'a PolymatroidRegion) -> Self {
        PolymatroidOracle { region }
    }
}

impl LinearOracle for PolymatroidOracle<'_> {
    fn num_users(&self) -> usize {
        self.region.num_users()
    }

    fn maximize(&mut self, weights: &[f64]) -> Result<Vec<f64>> {
        maximize_linear(self.region, weights)
    }

    fn contains(&self, rates: &[f64], slack: f64) -> Option<bool> {
        self.region.contains(rates, slack).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Backtracking from a full step: factor 0.5, sufficient-increase fraction 0.1.
    Armijo,
    /// Exact maximization of the utility along the step on `[0, 1]`.
    LimitedMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwOptions {
    pub rule: StepRule,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Keep every iterate in the report.
    pub record: bool,
    /// Take pairwise steps that shift weight from the worst vertex in use to
    /// the oracle answer; avoids the zigzag of plain steps on polytopes.
    #[serde(default)]
    pub pairwise: bool,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            rule: StepRule::LimitedMax,
            gap_tol: 1e-6,
            max_iter: 100_000,
            record: true,
            pairwise: false,
        }
    }
}

pub const ARMIJO_CONTRACTION: f64 = 0.5;
pub const ARMIJO_SLOPE: f64 = 0.1;
pub const LINE_SEARCH_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwIterate {
    pub iter: usize,
    pub utility: f64,
    pub gap: f64,
    pub rates: Vec<f64>,
}

/// One oracle answer and its share of the current iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    /// Linear weights that produced the vertex; `None` for a caller-supplied start.
    pub direction: Option<Vec<f64>>,
    pub vertex: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwReport {
    /// Steps taken.
    pub iterations: usize,
    pub oracle_calls: usize,
    pub rates: Vec<f64>,
    pub utility: f64,
    /// `∇u(R)'(R̄ - R)` at the returned iterate.
    pub gap: f64,
    pub converged: bool,
    pub rule: StepRule,
    pub trajectory: Vec<FwIterate>,
    /// The returned iterate as a convex combination of oracle answers.
    pub atoms: Vec<Atom>,
}

fn axpy(x: &[f64], alpha: f64, dir: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dir)
        .map(|(a, d)| (a + alpha * d).max(0.0))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact maximizer of the concave `φ(α) = u(R + α d)` on `[0, 1]`, found by
/// bisecting the slope `φ'(α) = ∇u(R + α d)' d`.
///
/// Working on the slope rather than on values keeps the step accurate well
/// below the `√ε` floor that value comparisons hit on a flat maximum.
fn line_maximize(utility: &Utility, rates: &[f64], dir: &[f64], tol: f64) -> Result<f64> {
    let slope = |a: f64| -> Result<f64> { Ok(dot(&utility.gradient(&axpy(rates, a, dir))?, dir)) };
    if slope(1.0)? >= 0.0 {
        return Ok(1.0);
    }
    if slope(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conditional-gradient ascent `R ← R + α(R̄ - R)` with `R̄` the oracle answer
/// for `∇u(R)`.
///
/// Starts from `start`, or from the oracle's vertex for all-ones weights.
/// Stops once the gap `∇u(R)'(R̄ - R)` is at most `gap_tol`.
pub fn frank_wolfe<O: LinearOracle + ?Sized>(
    oracle: &mut O,
    utility: &Utility,
    start: Option<Vec<f64>>,
    opts: &FwOptions,
) -> Result<FwReport> {
    let m = oracle.num_users();
    ensure_len(m, utility.num_users())?;
    if !(opts.gap_tol > 0.0) {
        return Err(domain!("gap tolerance must be positive"));
    }
    let mut oracle_calls = 0;
    let (mut rates, mut atoms) = match start {
        Some(r0) => {
            ensure_len(m, r0.len())?;
            if oracle.contains(&r0, 1e-9) == Some(false) || r0.iter().any(|r| !(*r >= 0.0)) {
                return Err(Error::Infeasible(format!(
                    "starting point {r0:?} is outside the region"
                )));
            }
            let atom = Atom {
                weight: 1.0,
                direction: None,
                vertex: r0.clone(),
            };
            (r0, vec![atom])
        }
        None => {
            let ones = vec![1.0; m];
            let r0 = oracle.maximize(&ones)?;
            oracle_calls += 1;
            let atom = Atom {
                weight: 1.0,
                direction: Some(ones),
                vertex: r0.clone(),
            };
            (r0, vec![atom])
        }
    };

    let mut value = utility.value(&rates)?;
    let mut trajectory = Vec::new();
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;
    loop {
        let grad = utility.gradient(&rates)?;
        let target = match &last {
            Some((g, t)) if *g == grad => t.clone(),
            _ => {
                let t = oracle.maximize(&grad)?;
                oracle_calls += 1;
                last = Some((grad.clone(), t.clone()));
                t
            }
        };
        let dir: Vec<f64> = target.iter().zip(&rates).map(|(t, r)| t - r).collect();
        gap = dot(&grad, &dir);
        if opts.record {
            trajectory.push(FwIterate {
                iter: iterations,
                utility: value,
                gap,
                rates: rates.clone(),
            });
        }
        if gap <= opts.gap_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        // a pairwise step moves mass from the worst atom in use to the oracle answer
        let away = if opts.pairwise && atoms.len() > 1 {
            let (k, worst) = atoms
                .iter()
                .enumerate()
                .min_by(|x, y| dot(&grad, &x.1.vertex).total_cmp(&dot(&grad, &y.1.vertex)))
                .expect("atoms are nonempty");
            let swap: Vec<f64> = target
                .iter()
                .zip(&worst.vertex)
                .map(|(t, v)| (t - v) * worst.weight)
                .collect();
            let slope = dot(&grad, &swap);
            (worst.vertex != target && slope > 0.0).then_some((k, swap, slope))
        } else {
            None
        };
        let (step_dir, slope0) = match &away {
            Some((_, swap, slope)) => (swap.clone(), *slope),
            None => (dir.clone(), gap),
        };

        let (alpha, next_value) = match opts.rule {
            StepRule::LimitedMax => {
                // a positive slope at zero certifies ascent even when the
                // increase is below the resolution of the utility value
                let alpha = line_maximize(utility, &rates, &step_dir, LINE_SEARCH_TOL)?;
                (alpha, value)
            }
            StepRule::Armijo => {
                let mut alpha = 1.0;
                loop {
                    let v = utility.value(&axpy(&rates, alpha, &step_dir))?;
                    if v >= value + ARMIJO_SLOPE * alpha * slope0 {
                        break (alpha, v);
                    }
                    alpha *= ARMIJO_CONTRACTION;
                    if alpha < 1e-30 {
                        break (0.0, value);
                    }
                }
            }
        };
        if opts.rule == StepRule::Armijo && alpha > 0.0 {
            debug_assert!(next_value >= value + ARMIJO_SLOPE * alpha * slope0);
        }
        if alpha == 0.0 {
            // no ascent possible along the chosen direction at this precision
            break;
        }
        match away {
            Some((k, _, _)) => {
                let moved = alpha * atoms[k].weight;
                if alpha == 1.0 {
                    atoms.remove(k);
                } else {
                    atoms[k].weight -= moved;
                }
                match atoms.iter_mut().find(|a| a.vertex == target) {
                    Some(a) => a.weight += moved,
                    None => atoms.push(Atom {
                        weight: moved,
                        direction: Some(grad.clone()),
                        vertex: target.clone(),
                    }),
                }
            }
            None => {
                for a in atoms.iter_mut() {
                    a.weight *= 1.0 - alpha;
                }
                atoms.retain(|a| a.weight > 0.0);
                match atoms.iter_mut().find(|a| a.vertex == target) {
                    Some(a) => a.weight += alpha,
                    None => atoms.push(Atom {
                        weight: alpha,
                        direction: Some(grad.clone()),
                        vertex: target.clone(),
                    }),
                }
            }
        }
        rates = if opts.pairwise {
            let total: f64 = atoms.iter().map(|a| a.weight).sum();
            (0..m)
                .map(|i| atoms.iter().map(|a| a.weight * a.vertex[i]).sum::<f64>() / total)
                .collect()
        } else if alpha == 1.0 {
            target.clone()
        } else {
            axpy(&rates, alpha, &dir)
        };
        value = utility.value(&rates)?;
        iterations += 1;
    }

    Ok(FwReport {
        iterations,
        oracle_calls,
        utility: value,
        rates,
        gap,
        converged,
        rule: opts.rule,
        trajectory,
        atoms,
    })
}

/// Linear weights `μ* = ∇u(R*)` whose greedy policy realizes `R*`.
pub fn recover_linearization(utility: &Utility, optimum: &[f64]) -> Result<Vec<f64>> {
    utility.gradient(optimum)
}
