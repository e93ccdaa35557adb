//! Concave, componentwise increasing utilities of the average rate vector.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_len, Result};
use crate::stats::substream;

pub const DEFAULT_SHIFT: f64 = 0.01;

fn default_shift() -> f64 {
    DEFAULT_SHIFT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Utility {
    /// `μ'R`.
    Linear {
        #[serde(alias = "mu")]
        weights: Vec<f64>,
    },
    /// `Σ w_i ln(R_i + d)`.
    #[serde(rename = "log", alias = "weighted_log")]
    WeightedLog {
        weights: Vec<f64>,
        #[serde(default = "default_shift")]
        shift: f64,
    },
    /// `Σ w_i ((R_i + d)^{1-α} - d^{1-α}) / (1-α)`, and the weighted log at `α = 1`.
    AlphaFair {
        weights: Vec<f64>,
        alpha: f64,
        #[serde(default = "default_shift")]
        shift: f64,
    },
}

/// How a curvature bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    ClosedForm,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBound {
    pub omega: f64,
    pub method: CurvatureMethod,
}

impl Utility {
    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        let u = Utility::Linear { weights };
        u.validate()?;
        Ok(u)
    }

    pub fn weighted_log(weights: Vec<f64>, shift: f64) -> Result<Self> {
        let u = Utility::WeightedLog { weights, shift };
        u.validate()?;
        Ok(u)
    }

    pub fn alpha_fair(weights: Vec<f64>, alpha: f64, shift: f64) -> Result<Self> {
        let u = Utility::AlphaFair {
            weights,
            alpha,
            shift,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Utility::Linear { weights }
            | Utility::WeightedLog { weights, .. }
            | Utility::AlphaFair { weights, .. } => weights,
        }
    }

    pub fn num_users(&self) -> usize {
        self.weights().len()
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Utility::Linear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.is_empty() {
            return Err(domain!("utility needs at least one weight"));
        }
        if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(domain!("utility weights must be positive and finite"));
        }
        match *self {
            Utility::Linear { .. } => {}
            Utility::WeightedLog { shift, .. } => check_shift(shift)?,
            Utility::AlphaFair { alpha, shift, .. } => {
                check_shift(shift)?;
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(domain!("alpha must be positive, got {alpha}"));
                }
            }
        }
        Ok(())
    }

    fn check_rates(&self, rates: &[f64]) -> Result<()> {
        ensure_len(self.num_users(), rates.len())?;
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0)) {
            return Err(domain!("utility evaluated at negative rate {r}"));
        }
        Ok(())
    }

    fn term(&self, i: usize, x: f64) -> f64 {
        match *self {
            Utility::Linear { ref weights } => weights[i] * x,
            Utility::WeightedLog { ref weights, shift } => weights[i] * (x + shift).ln(),
            Utility::AlphaFair {
                ref weights,
                alpha,
                shift,
            } => {
                if alpha == 1.0 {
                    weights[i] * (x + shift).ln()
                } else {
                    let e = 1.0 - alpha;
                    weights[i] * ((x + shift).powf(e) - shift.powf(e)) / e
                }
            }
        }
    }

    fn slope(&self, i: usize, x: f64) -> f64 {
        match *self {
            Utility::Linear { ref weights } => weights[i],
            Utility::WeightedLog { ref weights, shift } => weights[i] / (x + shift),
            Utility::AlphaFair {
                ref weights,
                alpha,
                shift,
            } => weights[i] * (x + shift).powf(-alpha),
        }
    }

    /// `∂u/∂R_i` at rate `x`.
    pub fn marginal(&self, i: usize, x: f64) -> f64 {
        self.slope(i, x)
    }

    /// Rate at which user `i`'s marginal utility equals `price`, clipped at
    /// zero; `None` for a linear term, whose marginal utility is constant.
    pub fn marginal_inverse(&self, i: usize, price: f64) -> Option<f64> {
        match *self {
            Utility::Linear { .. } => None,
            Utility::WeightedLog { ref weights, shift } => {
                Some((weights[i] / price - shift).max(0.0))
            }
            Utility::AlphaFair {
                ref weights,
                alpha,
                shift,
            } => Some(((weights[i] / price).powf(1.0 / alpha) - shift).max(0.0)),
        }
    }

    /// `-u_i''(x)` of the separable term for user `i`.
    pub fn neg_curvature(&self, i: usize, x: f64) -> f64 {
        match *self {
            Utility::Linear { .. } => 0.0,
            Utility::WeightedLog { ref weights, shift } => weights[i] / (x + shift).powi(2),
            Utility::AlphaFair {
                ref weights,
                alpha,
                shift,
            } => weights[i] * alpha * (x + shift).powf(-alpha - 1.0),
        }
    }

    pub fn value(&self, rates: &[f64]) -> Result<f64> {
        self.check_rates(rates)?;
        Ok(rates
            .iter()
            .enumerate()
            .map(|(i, x)| self.term(i, *x))
            .sum())
    }

    pub fn gradient(&self, rates: &[f64]) -> Result<Vec<f64>> {
        self.check_rates(rates)?;
        Ok(rates
            .iter()
            .enumerate()
            .map(|(i, x)| self.slope(i, *x))
            .collect())
    }

    /// Diagonal of `-∇²u` (every built-in is separable).
    pub fn neg_hessian_diagonal(&self, rates: &[f64]) -> Result<Vec<f64>> {
        self.check_rates(rates)?;
        Ok(rates
            .iter()
            .enumerate()
            .map(|(i, x)| self.neg_curvature(i, *x))
            .collect())
    }

    /// Gradient at the componentwise lower corner `floor`; the largest
    /// gradient norm over any point that dominates it.
    pub fn gradient_norm_bound(&self, floor: &[f64]) -> Result<f64> {
        Ok(self
            .gradient(floor)?
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt())
    }

    /// `u(0)`. Negative for the weighted log with `d < 1`.
    pub fn value_at_origin(&self) -> f64 {
        (0..self.num_users()).map(|i| self.term(i, 0.0)).sum()
    }

    /// Constant that makes `u + offset` nonnegative on the orthant.
    pub fn nonnegativity_offset(&self) -> f64 {
        (-self.value_at_origin()).max(0.0)
    }

    /// Upper bound on `λ_max(-∇²u(ξ))` over `‖ξ - center‖ ≤ radius`, `ξ ≥ 0`.
    ///
    /// The Hessian is diagonal and each `-u_i''` decreases in its argument,
    /// so the bound is attained at the lowest reachable coordinate.
    pub fn max_neg_hessian_eig(&self, center: &[f64], radius: f64) -> Result<CurvatureBound> {
        self.check_rates(center)?;
        if !(radius >= 0.0) {
            return Err(domain!("radius must be nonnegative, got {radius}"));
        }
        let omega = center
            .iter()
            .enumerate()
            .map(|(i, c)| self.neg_curvature(i, (c - radius).max(0.0)))
            .fold(0.0, f64::max);
        Ok(CurvatureBound {
            omega,
            method: CurvatureMethod::ClosedForm,
        })
    }
}

fn check_shift(shift: f64) -> Result<()> {
    if shift > 0.0 && shift.is_finite() {
        Ok(())
    } else {
        Err(domain!("utility shift must be positive, got {shift}"))
    }
}

/// Largest eigenvalue of a finite-difference `-∇²u` at `n` points sampled
/// from the ball around `center` (projected onto the orthant).
///
/// Only an estimate: it can fall below the true supremum.
pub fn sampled_max_neg_hessian_eig(
    u: &Utility,
    center: &[f64],
    radius: f64,
    n: usize,
    seed: u64,
) -> Result<CurvatureBound> {
    let m = u.num_users();
    ensure_len(m, center.len())?;
    let mut best = 0.0f64;
    for k in 0..n {
        let mut rng = substream(seed, k as u64);
        let xi = sample_ball_point(&mut rng, center, radius);
        let hess = finite_difference_neg_hessian(u, &xi)?;
        let top = SymmetricEigen::new(hess)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        best = best.max(top);
    }
    Ok(CurvatureBound {
        omega: best,
        method: CurvatureMethod::Sampled,
    })
}

/// Uniform point in the ball, projected onto the nonnegative orthant.
pub fn sample_ball_point<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let m = center.len();
    let dir: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let len = radius * rng.random::<f64>().powf(1.0 / m as f64);
    center
        .iter()
        .zip(&dir)
        .map(|(c, d)| (c + len * d / norm).max(0.0))
        .collect()
}

fn finite_difference_neg_hessian(u: &Utility, x: &[f64]) -> Result<DMatrix<f64>> {
    let m = x.len();
    let h = 1e-4;
    let f = |p: &[f64]| u.value(p);
    let mut out = DMatrix::zeros(m, m);
    // one-sided near the boundary keeps every evaluation in the orthant
    let base: Vec<f64> = x.iter().map(|v| v.max(2.0 * h)).collect();
    let f0 = f(&base)?;
    for i in 0..m {
        for j in 0..m {
            let mut pp = base.clone();
            let mut pm = base.clone();
            let mut mp = base.clone();
            let mut mm = base.clone();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            let d2 = if i == j {
                let mut p = base.clone();
                let mut q = base.clone();
                p[i] += h;
                q[i] -= h;
                (f(&p)? - 2.0 * f0 + f(&q)?) / (h * h)
            } else {
                (f(&pp)? - f(&pm)? - f(&mp)? + f(&mm)?) / (4.0 * h * h)
            };
            out[(i, j)] = -d2;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<Utility> {
        vec![
            Utility::linear(vec![1.0, 2.0]).unwrap(),
            Utility::weighted_log(vec![1.0, 0.5], 0.1).unwrap(),
            Utility::alpha_fair(vec![2.0, 1.0], 2.0, 0.05).unwrap(),
            Utility::alpha_fair(vec![1.0, 1.0], 0.5, 0.01).unwrap(),
        ]
    }

    #[test]
    fn linear_gradient_is_constant() {
        let u = Utility::linear(vec![1.5, 0.5]).unwrap();
        assert_eq!(u.gradient(&[0.0, 0.0]).unwrap(), vec![1.5, 0.5]);
        assert_eq!(u.gradient(&[3.0, 1.0]).unwrap(), vec![1.5, 0.5]);
        assert_eq!(u.max_neg_hessian_eig(&[1.0, 1.0], 0.5).unwrap().omega, 0.0);
    }

    #[test]
    fn alpha_one_is_weighted_log() {
        let a = Utility::alpha_fair(vec![1.0, 2.0], 1.0, 0.01).unwrap();
        let r = [0.3, 0.7];
        let want = (0.31f64).ln() + 2.0 * (0.71f64).ln();
        assert!((a.value(&r).unwrap() - want).abs() < 1e-15);
        let l = Utility::weighted_log(vec![1.0, 2.0], 0.01).unwrap();
        assert_eq!(a.value(&r).unwrap(), l.value(&r).unwrap());
    }

    #[test]
    fn alpha_fair_is_zero_at_origin() {
        let a = Utility::alpha_fair(vec![1.0, 3.0], 2.0, 0.01).unwrap();
        assert_eq!(a.value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(a.nonnegativity_offset(), 0.0);
        let l = Utility::weighted_log(vec![1.0, 1.0], 0.01).unwrap();
        assert!((l.nonnegativity_offset() + 2.0 * 0.01f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_curvature_example() {
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.1).unwrap();
        let b = u.max_neg_hessian_eig(&[1.0, 1.0], 0.5).unwrap();
        assert!((b.omega - 1.0 / 0.36).abs() < 1e-12);
        assert_eq!(b.method, CurvatureMethod::ClosedForm);
    }

    #[test]
    fn errors() {
        let u = Utility::weighted_log(vec![1.0, 1.0], 0.1).unwrap();
        assert!(u.value(&[-0.1, 0.0]).is_err());
        assert!(u.gradient(&[0.1]).is_err());
        assert!(Utility::weighted_log(vec![1.0], 0.0).is_err());
        assert!(Utility::linear(vec![0.0, 1.0]).is_err());
        assert!(Utility::alpha_fair(vec![1.0], -1.0, 0.1).is_err());
    }

    #[test]
    fn config_syntax() {
        let u: Utility = serde_json::from_str(
            r#"{"type":"alpha_fair","alpha":2.0,"weights":[1,1],"shift":0.01}"#,
        )
        .unwrap();
        assert_eq!(u, Utility::alpha_fair(vec![1.0, 1.0], 2.0, 0.01).unwrap());
        let l: Utility = serde_json::from_str(r#"{"type":"log","weights":[1,1]}"#).unwrap();
        assert_eq!(
            l,
            Utility::weighted_log(vec![1.0, 1.0], DEFAULT_SHIFT).unwrap()
        );
    }

    #[test]
    fn sampled_curvature_never_exceeds_closed_form() {
        for u in samples() {
            let c = [0.4, 0.2];
            let closed = u.max_neg_hessian_eig(&c, 0.3).unwrap().omega;
            let sampled = sampled_max_neg_hessian_eig(&u, &c, 0.3, 200, 4)
                .unwrap()
                .omega;
            assert!(
                sampled <= closed * (1.0 + 1e-3) + 1e-6,
                "{u:?}: {sampled} > {closed}"
            );
        }
    }
}
