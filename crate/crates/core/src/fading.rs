//! Stationary fading laws: per-user marginals, optional Gaussian-copula
//! coupling, reproducible sampling and analytic moments.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{domain, ensure_len, Error, Result};
use crate::quadrature::{bisect, gauss_hermite_normal};
use crate::stats::substream;

/// Probability mass left beyond the truncation point of unbounded supports.
pub const TAIL_MASS: f64 = 1e-8;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Marginal law of one user's power gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Marginal {
    /// Rayleigh amplitude fading: exponentially distributed power gain.
    Exponential {
        mean: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `exp(N(mu, sigma²))`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    PointMass {
        value: f64,
    },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            Marginal::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
            Marginal::LogNormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite() && self.variance().is_finite()
            }
            Marginal::PointMass { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(domain!("unsupported fading parameters {self:?}"))
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Marginal::PointMass { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Exponential { mean } => mean,
            Marginal::Uniform { low, high } => 0.5 * (low + high),
            Marginal::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::PointMass { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Exponential { mean } => mean * mean,
            Marginal::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Marginal::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                s2.exp_m1() * (2.0 * mu + s2).exp()
            }
            Marginal::PointMass { .. } => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / mean).exp_m1()
                }
            }
            Marginal::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Marginal::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Marginal::PointMass { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Density; an atom has none.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        Some(match *self {
            Marginal::Exponential { mean } => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x / mean).exp() / mean
                }
            }
            Marginal::Uniform { low, high } => {
                if x < low || x > high {
                    0.0
                } else {
                    1.0 / (high - low)
                }
            }
            Marginal::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
                }
            }
            Marginal::PointMass { .. } => return None,
        })
    }

    /// Lower end of the support.
    pub fn support_low(&self) -> f64 {
        match *self {
            Marginal::Uniform { low, .. } => low,
            Marginal::PointMass { value } => value,
            _ => 0.0,
        }
    }

    /// Upper end of the support, or the `1 - TAIL_MASS` quantile when unbounded.
    pub fn support_high(&self) -> f64 {
        match *self {
            Marginal::Exponential { mean } => -mean * TAIL_MASS.ln(),
            Marginal::Uniform { high, .. } => high,
            Marginal::LogNormal { mu, sigma } => {
                (mu + sigma * normal_quantile(1.0 - TAIL_MASS)).exp()
            }
            Marginal::PointMass { value } => value,
        }
    }

    /// `F⁻¹(Φ(z))`, the copula transform of a standard normal draw.
    pub fn from_normal(&self, z: f64) -> f64 {
        match *self {
            Marginal::Exponential { mean } => -mean * normal_cdf(-z).ln(),
            Marginal::Uniform { low, high } => low + (high - low) * normal_cdf(z),
            Marginal::LogNormal { mu, sigma } => (mu + sigma * z).exp(),
            Marginal::PointMass { value } => value,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Exponential { mean } => {
                let u: f64 = rng.random();
                // 1 - u lies in (0, 1]
                -mean * (1.0 - u).ln()
            }
            Marginal::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Marginal::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            Marginal::PointMass { value } => value,
        }
    }

    /// Same mean, variance multiplied by `scale`.
    pub fn with_scaled_variance(&self, scale: f64) -> Result<Marginal> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(domain!("variance scale must be positive, got {scale}"));
        }
        let out = match *self {
            Marginal::Exponential { .. } => {
                return Err(domain!(
                    "exponential fading has variance tied to its mean; cannot rescale"
                ))
            }
            Marginal::Uniform { low, high } => {
                let center = 0.5 * (low + high);
                let half = 0.5 * (high - low) * scale.sqrt();
                Marginal::Uniform {
                    low: center - half,
                    high: center + half,
                }
            }
            Marginal::LogNormal { sigma, .. } => {
                let mean = self.mean();
                let s2 = (scale * (sigma * sigma).exp_m1()).ln_1p();
                Marginal::LogNormal {
                    mu: mean.ln() - 0.5 * s2,
                    sigma: s2.sqrt(),
                }
            }
            Marginal::PointMass { value } => Marginal::PointMass { value },
        };
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Coupling {
    Independent,
    /// Normal correlation matrix of the copula and its Cholesky factor.
    GaussianCopula {
        correlation: DMatrix<f64>,
        factor: DMatrix<f64>,
        target: Vec<Vec<f64>>,
    },
}

/// Mean vector `H̄` and covariance matrix `K` of the gain vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl Moments {
    pub fn dot_mean(&self, x: &[f64]) -> f64 {
        self.mean.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `x' K x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.covariance
            .iter()
            .zip(x)
            .map(|(row, xi)| xi * row.iter().zip(x).map(|(k, xj)| k * xj).sum::<f64>())
            .sum()
    }

    pub fn scaled_covariance(&self, scale: f64) -> Moments {
        Moments {
            mean: self.mean.clone(),
            covariance: self
                .covariance
                .iter()
                .map(|row| row.iter().map(|k| k * scale).collect())
                .collect(),
        }
    }

    /// Rejects covariance matrices with a negative eigenvalue.
    pub fn check_psd(&self) -> Result<()> {
        let m = self.mean.len();
        ensure_len(m, self.covariance.len())?;
        for row in &self.covariance {
            ensure_len(m, row.len())?;
        }
        let k = DMatrix::from_fn(m, m, |i, j| self.covariance[i][j]);
        if (0..m).any(|i| {
            (0..i).any(|j| (k[(i, j)] - k[(j, i)]).abs() > 1e-12 * (1.0 + k[(i, j)].abs()))
        }) {
            return Err(domain!("covariance matrix is not symmetric"));
        }
        let scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let eig = SymmetricEigen::new(k).eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 * scale.max(1e-300) {
            return Err(domain!("covariance matrix has negative eigenvalue {min}"));
        }
        Ok(())
    }
}

/// Stationary per-user fading law with optional cross-user dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingModel {
    marginals: Vec<Marginal>,
    coupling: Coupling,
    moments: Moments,
}

const HERMITE_NODES: usize = 64;
const COPULA_CHECK_SAMPLES: usize = 20_000;
const COPULA_CHECK_SEED: u64 = 0x5eed_c0_9a1a;

/// `Cov(H_i, H_j)` when the copula normals have correlation `rho`.
fn copula_covariance(a: &Marginal, b: &Marginal, rho: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if let (Marginal::LogNormal { mu: m1, sigma: s1 }, Marginal::LogNormal { mu: m2, sigma: s2 }) =
        (a, b)
    {
        return (m1 + m2 + 0.5 * (s1 * s1 + s2 * s2)).exp() * (rho * s1 * s2).exp_m1();
    }
    let (nodes, weights) = rule;
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    let (ma, mb) = (a.mean(), b.mean());
    let mut acc = 0.0;
    for (x1, w1) in nodes.iter().zip(weights) {
        let ga = a.from_normal(*x1) - ma;
        let inner: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(x2, w2)| w2 * (b.from_normal(rho * x1 + c * x2) - mb))
            .sum();
        acc += w1 * ga * inner;
    }
    acc
}

impl FadingModel {
    /// Users fade independently.
    pub fn independent(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(domain!("at least one user is required"));
        }
        for m in &marginals {
            m.validate()?;
        }
        let m = marginals.len();
        let moments = Moments {
            mean: marginals.iter().map(Marginal::mean).collect(),
            covariance: (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| if i == j { marginals[i].variance() } else { 0.0 })
                        .collect()
                })
                .collect(),
        };
        Ok(FadingModel {
            marginals,
            coupling: Coupling::Independent,
            moments,
        })
    }

    /// Gaussian-copula coupling tuned so the gains have covariance `target`.
    ///
    /// The diagonal of `target` must equal the marginal variances. Each
    /// off-diagonal entry is matched by solving for the normal correlation,
    /// and the result is checked against a Monte Carlo estimate.
    pub fn gaussian_copula(marginals: Vec<Marginal>, target: Vec<Vec<f64>>) -> Result<Self> {
        let base = FadingModel::independent(marginals)?;
        let m = base.num_users();
        let moments = Moments {
            mean: base.moments.mean.clone(),
            covariance: target.clone(),
        };
        moments.check_psd()?;
        for i in 0..m {
            let var = base.marginals[i].variance();
            if (target[i][i] - var).abs() > 1e-6 * var.max(1e-12) {
                return Err(domain!(
                    "covariance diagonal {} for user {} disagrees with marginal variance {var}",
                    target[i][i],
                    i + 1
                ));
            }
        }
        let rule = gauss_hermite_normal(HERMITE_NODES);
        let mut correlation = DMatrix::<f64>::identity(m, m);
        for i in 0..m {
            for j in 0..i {
                let want = target[i][j];
                if want == 0.0 {
                    continue;
                }
                let (a, b) = (&base.marginals[i], &base.marginals[j]);
                if a.variance() == 0.0 || b.variance() == 0.0 {
                    return Err(domain!(
                        "users {} and {} cannot covary: one has a point-mass law",
                        j + 1,
                        i + 1
                    ));
                }
                let edge = 1.0 - 1e-12;
                let lo = copula_covariance(a, b, -edge, &rule);
                let hi = copula_covariance(a, b, edge, &rule);
                if want < lo || want > hi {
                    return Err(domain!(
                        "covariance {want} between users {} and {} is outside the attainable range [{lo}, {hi}]",
                        j + 1,
                        i + 1
                    ));
                }
                let rho = bisect(
                    |r| copula_covariance(a, b, r, &rule) - want,
                    -edge,
                    edge,
                    1e-14,
                    200,
                )?;
                correlation[(i, j)] = rho;
                correlation[(j, i)] = rho;
            }
        }
        let factor = correlation
            .clone()
            .cholesky()
            .ok_or_else(|| domain!("implied copula correlation is not positive definite"))?
            .l();
        let model = FadingModel {
            marginals: base.marginals,
            coupling: Coupling::GaussianCopula {
                correlation,
                factor,
                target,
            },
            moments,
        };
        model.check_covariance_by_sampling(COPULA_CHECK_SAMPLES, COPULA_CHECK_SEED)?;
        Ok(model)
    }

    /// Compares the analytic covariance with a sample estimate (3 standard errors).
    pub fn check_covariance_by_sampling(&self, n: usize, seed: u64) -> Result<()> {
        let trace = self.sample(n, seed)?;
        let m = self.num_users();
        let mean = &self.moments.mean;
        for i in 0..m {
            for j in 0..=i {
                let products: Vec<f64> = trace
                    .rows()
                    .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                    .collect();
                let (est, se) = crate::stats::mean_and_stderr(&products);
                let want = self.moments.covariance[i][j];
                if (est - want).abs() > 3.0 * se + 1e-12 {
                    return Err(domain!(
                        "sampled covariance ({}, {}) = {est} differs from {want} by more than 3 SE ({se})",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.coupling, Coupling::Independent)
    }

    /// Independent users with densities, as the multiplier equations require.
    pub fn require_independent_continuous(&self) -> Result<()> {
        if !self.is_independent() {
            return Err(domain!(
                "power control needs independent fading across users; this model is coupled"
            ));
        }
        for (user, m) in self.marginals.iter().enumerate() {
            if !m.is_continuous() {
                return Err(Error::Continuity {
                    user: user + 1,
                    reason: "point-mass fading has no density".into(),
                });
            }
        }
        Ok(())
    }

    /// Normal correlation of the copula (identity when independent).
    pub fn copula_correlation(&self) -> DMatrix<f64> {
        match &self.coupling {
            Coupling::Independent => DMatrix::identity(self.num_users(), self.num_users()),
            Coupling::GaussianCopula { correlation, .. } => correlation.clone(),
        }
    }

    fn user(&self, user: usize) -> Result<&Marginal> {
        self.marginals
            .get(user)
            .ok_or_else(|| domain!("user index {user} out of range"))
    }

    pub fn marginal_cdf(&self, user: usize, x: f64) -> Result<f64> {
        Ok(self.user(user)?.cdf(x))
    }

    pub fn marginal_pdf(&self, user: usize, x: f64) -> Result<f64> {
        self.user(user)?.pdf(x).ok_or_else(|| Error::Continuity {
            user: user + 1,
            reason: "point-mass fading has no density".into(),
        })
    }

    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    /// Same means, covariance multiplied by `scale`.
    pub fn with_scaled_spread(&self, scale: f64) -> Result<FadingModel> {
        let marginals = self
            .marginals
            .iter()
            .map(|m| m.with_scaled_variance(scale))
            .collect::<Result<Vec<_>>>()?;
        match &self.coupling {
            Coupling::Independent => FadingModel::independent(marginals),
            Coupling::GaussianCopula { target, .. } => {
                let scaled = target
                    .iter()
                    .map(|row| row.iter().map(|k| k * scale).collect())
                    .collect();
                FadingModel::gaussian_copula(marginals, scaled)
            }
        }
    }

    fn draw_into(&self, seed: u64, index: u64, out: &mut [f64]) {
        let mut rng = substream(seed, index);
        match &self.coupling {
            Coupling::Independent => {
                for (slot, m) in out.iter_mut().zip(&self.marginals) {
                    *slot = m.draw(&mut rng);
                }
            }
            Coupling::GaussianCopula { factor, .. } => {
                let m = self.num_users();
                let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..m {
                    let zi: f64 = (0..=i).map(|j| factor[(i, j)] * z[j]).sum();
                    out[i] = self.marginals[i].from_normal(zi);
                }
            }
        }
    }

    /// `n` independent draws of the gain vector. Sample `k` depends only on
    /// `(seed, k)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<FadingTrace> {
        if n == 0 {
            return Err(domain!("sample count must be at least 1"));
        }
        let m = self.num_users();
        let mut gains = vec![0.0; n * m];
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            gains
                .par_chunks_mut(m)
                .enumerate()
                .for_each(|(k, row)| self.draw_into(seed, k as u64, row));
        }
        #[cfg(not(feature = "parallel"))]
        for (k, row) in gains.chunks_mut(m).enumerate() {
            self.draw_into(seed, k as u64, row);
        }
        Ok(FadingTrace {
            users: m,
            gains,
            seed,
        })
    }
}

/// `n × M` matrix of sampled gains.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingTrace {
    users: usize,
    gains: Vec<f64>,
    seed: u64,
}

impl FadingTrace {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let users = rows.first().map_or(0, Vec::len);
        if users == 0 {
            return Err(domain!("trace needs at least one nonempty row"));
        }
        let mut gains = Vec::with_capacity(rows.len() * users);
        for row in rows {
            ensure_len(users, row.len())?;
            if row.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                return Err(domain!("trace gains must be finite and nonnegative"));
            }
            gains.extend_from_slice(row);
        }
        Ok(FadingTrace { users, gains, seed })
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn len(&self) -> usize {
        self.gains.len() / self.users
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.gains[k * self.users..(k + 1) * self.users]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.gains.chunks(self.users)
    }

    /// Column of user `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    /// First `n` samples.
    pub fn prefix(&self, n: usize) -> FadingTrace {
        let n = n.min(self.len());
        FadingTrace {
            users: self.users,
            gains: self.gains[..n * self.users].to_vec(),
            seed: self.seed,
        }
    }

    /// CSV with header `sample_index,h_1,...,h_M`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.users).map(|i| format!("h_{i}")).collect();
        writeln!(out, "sample_index,{}", header.join(","))?;
        for (k, row) in self.rows().enumerate() {
            write!(out, "{k}")?;
            for g in row {
                write!(out, ",{g}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
