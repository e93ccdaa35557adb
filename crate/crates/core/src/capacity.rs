//! Multiple-access capacity regions as polymatroids.
//!
//! A region is stored as its rank function `f(S)` over every subset of users,
//! densely indexed by bitmask. Instantaneous regions come from a single channel
//! state, averaged regions from a Monte Carlo trace of the fading law.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_len, Error, Result};
use crate::fading::{FadingModel, FadingTrace};
use crate::stats::mean_and_stderr;

/// Largest user count for dense rank storage.
pub const MAX_USERS: usize = 16;
/// Largest user count for exhaustive vertex enumeration.
pub const MAX_VERTEX_USERS: usize = 8;

/// `C(P, N) = ½ ln(1 + P/N)` in nats.
pub fn awgn_capacity(power: f64, noise: f64) -> Result<f64> {
    if !(noise > 0.0) || !noise.is_finite() {
        return Err(domain!("noise must be positive, got {noise}"));
    }
    if !(power >= 0.0) {
        return Err(domain!("power must be nonnegative, got {power}"));
    }
    Ok(0.5 * (power / noise).ln_1p())
}

/// Set of users encoded as a bitmask; bit `i` is user `i` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserSet(pub u32);

impl UserSet {
    pub fn full(m: usize) -> Self {
        UserSet(((1u64 << m) - 1) as u32)
    }

    pub fn singleton(i: usize) -> Self {
        UserSet(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        UserSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        UserSet(self.0 & !(1 << i))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// All nonempty subsets of `{0..m}` in bitmask order.
    pub fn nonempty(m: usize) -> impl Iterator<Item = UserSet> {
        (1..(1u32 << m)).map(UserSet)
    }

    /// Comma-joined, ascending, 1-based user indices (`"1,3"`).
    pub fn label(self) -> String {
        let parts: Vec<String> = self.members().map(|i| (i + 1).to_string()).collect();
        parts.join(",")
    }

    pub fn parse_label(label: &str, m: usize) -> Result<Self> {
        let mut set = UserSet(0);
        let mut last = 0usize;
        for part in label.split(',') {
            let idx: usize = part
                .trim()
                .parse()
                .map_err(|_| domain!("bad subset key {label:?}"))?;
            if idx == 0 || idx > m || idx <= last {
                return Err(domain!(
                    "subset key {label:?} must list ascending indices in 1..={m}"
                ));
            }
            last = idx;
            set = set.with(idx - 1);
        }
        Ok(set)
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

/// Users, their fixed transmit powers and the receiver noise power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    powers: Vec<f64>,
    noise: f64,
}

impl Scenario {
    pub fn new(powers: Vec<f64>, noise: f64) -> Result<Self> {
        if powers.is_empty() {
            return Err(domain!("at least one user is required"));
        }
        if powers.len() > MAX_USERS {
            return Err(Error::TooManyUsers {
                users: powers.len(),
                limit: MAX_USERS,
                what: "dense rank storage",
            });
        }
        if let Some(p) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(domain!("powers must be finite and nonnegative, got {p}"));
        }
        if !(noise > 0.0) || !noise.is_finite() {
            return Err(domain!("noise must be positive, got {noise}"));
        }
        Ok(Scenario { powers, noise })
    }

    pub fn num_users(&self) -> usize {
        self.powers.len()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Per-user SNR scale `P_i / N0`.
    pub fn snr_weights(&self) -> Vec<f64> {
        self.powers.iter().map(|p| p / self.noise).collect()
    }

    /// Same users and noise with different powers.
    pub fn with_powers(&self, powers: Vec<f64>) -> Result<Self> {
        ensure_len(self.num_users(), powers.len())?;
        Scenario::new(powers, self.noise)
    }
}

/// One realization of the per-user power gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState(Vec<f64>);

impl ChannelState {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if let Some(g) = gains.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(domain!("gains must be finite and nonnegative, got {g}"));
        }
        Ok(ChannelState(gains))
    }

    pub fn gains(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sum of `weights[i]` over every subset, indexed by bitmask.
pub(crate) fn subset_sums(weights: &[f64]) -> Vec<f64> {
    let m = weights.len();
    let mut sums = vec![0.0; 1 << m];
    for mask in 1usize..(1 << m) {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + weights[low];
    }
    sums
}

/// Polymatroid `{R ≥ 0 : Σ_{i∈S} R_i ≤ f(S)}` given by its rank table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymatroidRegion {
    users: usize,
    // rank[0] = f(∅) = 0
    rank: Vec<f64>,
}

impl PolymatroidRegion {
    /// Builds a region from `f(S)` for every bitmask `S` (entry 0 must be 0).
    pub fn from_ranks(users: usize, rank: Vec<f64>) -> Result<Self> {
        if users == 0 {
            return Err(domain!("at least one user is required"));
        }
        if users > MAX_USERS {
            return Err(Error::TooManyUsers {
                users,
                limit: MAX_USERS,
                what: "dense rank storage",
            });
        }
        ensure_len(1 << users, rank.len())?;
        if rank[0] != 0.0 {
            return Err(domain!("f(∅) must be 0, got {}", rank[0]));
        }
        if let Some(v) = rank.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(domain!(
                "rank values must be finite and nonnegative, got {v}"
            ));
        }
        Ok(PolymatroidRegion { users, rank })
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn rank(&self, set: UserSet) -> f64 {
        self.rank[set.0 as usize]
    }

    /// Full rank table by bitmask, including the empty set at index 0.
    pub fn ranks(&self) -> &[f64] {
        &self.rank
    }

    /// `f(𝓜)`, the sum rate of every dominant-face point.
    pub fn sum_rate(&self) -> f64 {
        self.rank(UserSet::full(self.users))
    }

    /// Checks monotonicity and submodularity up to `tol`.
    ///
    /// Submodularity is checked through the equivalent local condition
    /// `f(S+i) - f(S) ≥ f(S+i+j) - f(S+j)`, which covers every pair of sets.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.users;
        for mask in 0..(1u32 << m) {
            let s = UserSet(mask);
            for i in (0..m).filter(|&i| !s.contains(i)) {
                let gain_i = self.rank(s.with(i)) - self.rank(s);
                if gain_i < -tol {
                    return Err(domain!("rank not monotone: f({}) > f({})", s, s.with(i)));
                }
                for j in (i + 1..m).filter(|&j| !s.contains(j)) {
                    let gain_i_after_j = self.rank(s.with(i).with(j)) - self.rank(s.with(j));
                    if gain_i_after_j > gain_i + tol {
                        return Err(domain!(
                            "rank not submodular at S={s}, i={}, j={}",
                            i + 1,
                            j + 1
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Vertex produced by decoding users in reverse of `order`: user
    /// `order[k]` gets `f(order[..=k]) - f(order[..k])`.
    pub fn vertex_for_order(&self, order: &[usize]) -> Vec<f64> {
        let mut rates = vec![0.0; self.users];
        let mut prefix = UserSet(0);
        for &user in order {
            let next = prefix.with(user);
            rates[user] = (self.rank(next) - self.rank(prefix)).max(0.0);
            prefix = next;
        }
        rates
    }

    /// Membership with an additive slack on every constraint.
    pub fn contains(&self, rates: &[f64], slack: f64) -> Result<bool> {
        ensure_len(self.users, rates.len())?;
        if !(slack >= 0.0) {
            return Err(domain!("slack must be nonnegative, got {slack}"));
        }
        if rates.iter().any(|r| !(*r >= -slack)) {
            return Ok(false);
        }
        let sums = subset_sums(rates);
        Ok(sums
            .iter()
            .zip(&self.rank)
            .skip(1)
            .all(|(sum, f)| *sum <= f + slack))
    }

    /// Every distinct dominant-face vertex, one per user ordering.
    pub fn dominant_face_vertices(&self) -> Result<Vec<Vec<f64>>> {
        if self.users > MAX_VERTEX_USERS {
            return Err(Error::TooManyUsers {
                users: self.users,
                limit: MAX_VERTEX_USERS,
                what: "vertex enumeration",
            });
        }
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for order in permutations(self.users) {
            let v = self.vertex_for_order(&order);
            let duplicate = vertices
                .iter()
                .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-15));
            if !duplicate {
                vertices.push(v);
            }
        }
        Ok(vertices)
    }

    /// Relaxes every constraint by `delta` nats.
    pub fn expand(&self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(domain!("expansion must be nonnegative, got {delta}"));
        }
        let mut rank = self.rank.clone();
        rank.iter_mut().skip(1).for_each(|f| *f += delta);
        Ok(PolymatroidRegion {
            users: self.users,
            rank,
        })
    }

    /// Smallest uniform relaxation making each region contain the other.
    pub fn hausdorff_distance(&self, other: &PolymatroidRegion) -> Result<f64> {
        ensure_len(self.users, other.users)?;
        Ok(self
            .rank
            .iter()
            .zip(&other.rank)
            .skip(1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_table(&self) -> RankTable {
        RankTable {
            users: self.users,
            rank: UserSet::nonempty(self.users)
                .map(|s| (s.label(), self.rank(s)))
                .collect(),
        }
    }

    pub fn from_table(table: &RankTable) -> Result<Self> {
        let m = table.users;
        if m == 0 || m > MAX_USERS {
            return Err(domain!("rank table user count {m} out of range"));
        }
        let mut rank = vec![f64::NAN; 1 << m];
        rank[0] = 0.0;
        for (key, value) in &table.rank {
            let set = UserSet::parse_label(key, m)?;
            rank[set.0 as usize] = *value;
        }
        if let Some(mask) = rank.iter().position(|v| v.is_nan()) {
            return Err(domain!(
                "rank table missing subset {}",
                UserSet(mask as u32)
            ));
        }
        PolymatroidRegion::from_ranks(m, rank)
    }
}

/// JSON form `{"M": n, "rank": {"1": v, "1,2": v, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    #[serde(rename = "M")]
    pub users: usize,
    pub rank: BTreeMap<String, f64>,
}

/// `C_g(P, h)`.
pub fn instantaneous_region(
    scenario: &Scenario,
    state: &ChannelState,
) -> Result<PolymatroidRegion> {
    ensure_len(scenario.num_users(), state.len())?;
    let received: Vec<f64> = state
        .gains()
        .iter()
        .zip(scenario.powers())
        .map(|(h, p)| h * p / scenario.noise())
        .collect();
    let rank = subset_sums(&received)
        .into_iter()
        .map(|snr| 0.5 * snr.ln_1p())
        .collect();
    PolymatroidRegion::from_ranks(scenario.num_users(), rank)
}

/// Monte Carlo estimate of `C_a(P)` with per-subset standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRegion {
    pub region: PolymatroidRegion,
    /// Standard error of each rank estimate, indexed by bitmask.
    pub std_err: Vec<f64>,
    pub n_samples: usize,
}

impl AveragedRegion {
    pub fn std_err_table(&self) -> RankTable {
        RankTable {
            users: self.region.num_users(),
            rank: UserSet::nonempty(self.region.num_users())
                .map(|s| (s.label(), self.std_err[s.0 as usize]))
                .collect(),
        }
    }
}

/// Per-sample `Y_S = ½ ln(1 + Σ_{i∈S} H_i P_i / N0)` for every subset.
pub fn subset_capacities(scenario: &Scenario, gains: &[f64]) -> Vec<f64> {
    let received: Vec<f64> = gains
        .iter()
        .zip(scenario.powers())
        .map(|(h, p)| h * p / scenario.noise())
        .collect();
    subset_sums(&received)
        .into_iter()
        .map(|snr| 0.5 * snr.ln_1p())
        .collect()
}

/// `C_a(P)` averaged over an existing trace.
pub fn averaged_region_from_trace(
    scenario: &Scenario,
    trace: &FadingTrace,
) -> Result<AveragedRegion> {
    let m = scenario.num_users();
    ensure_len(m, trace.num_users())?;
    if trace.len() == 0 {
        return Err(domain!("averaging needs at least one sample"));
    }
    let per_sample: Vec<Vec<f64>> = trace
        .rows()
        .map(|row| subset_capacities(scenario, row))
        .collect();
    let mut rank = vec![0.0; 1 << m];
    let mut std_err = vec![0.0; 1 << m];
    let mut column = Vec::with_capacity(trace.len());
    for mask in 1..(1usize << m) {
        column.clear();
        column.extend(per_sample.iter().map(|y| y[mask]));
        let (mean, se) = mean_and_stderr(&column);
        rank[mask] = mean;
        std_err[mask] = se;
    }
    // sample means of a monotone submodular family stay monotone; clamp rounding
    for mask in 1..(1usize << m) {
        let floor = UserSet(mask as u32)
            .members()
            .map(|i| rank[mask & !(1 << i)])
            .fold(0.0, f64::max);
        if rank[mask] < floor {
            rank[mask] = floor;
        }
    }
    Ok(AveragedRegion {
        region: PolymatroidRegion::from_ranks(m, rank)?,
        std_err,
        n_samples: trace.len(),
    })
}

/// `C_a(P)` from `n_samples` fresh draws of the fading law.
pub fn averaged_region(
    scenario: &Scenario,
    fading: &FadingModel,
    n_samples: usize,
    seed: u64,
) -> Result<AveragedRegion> {
    if n_samples == 0 {
        return Err(domain!("averaging needs at least one sample"));
    }
    let trace = fading.sample(n_samples, seed)?;
    averaged_region_from_trace(scenario, &trace)
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(current.clone());
        // next lexicographic permutation
        let Some(k) = (0..n.saturating_sub(1))
            .rev()
            .find(|&k| current[k] < current[k + 1])
        else {
            break;
        };
        let l = (k + 1..n).rev().find(|&l| current[k] < current[l]).unwrap();
        current.swap(k, l);
        current[k + 1..].reverse();
    }
    out
}
