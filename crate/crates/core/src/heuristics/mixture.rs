//! Three-component Gaussian mixture over confirmation values.
//!
//! The outer components sit at −1 and +1 with weights given by the number of
//! subsets known to be refuted or entailed; only the middle mean is unknown.

use std::f64::consts::TAU;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{HeuristicsError, OverlapSets};
use crate::coherence::to_f64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Neg/Com: syntactic, no model counting.
    #[default]
    Simpler,
    /// Cntr/Impl: semantic, `|A| + 1` model counts.
    Finer,
}

impl std::str::FromStr for WeightMode {
    type Err = HeuristicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simpler" => Ok(Self::Simpler),
            "finer" => Ok(Self::Finer),
            other => Err(HeuristicsError::UnknownWeightMode(other.to_string())),
        }
    }
}

/// Mixture weights `(w1, w2, w3)` with their exact rational values.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights {
    pub exact: [BigRational; 3],
    pub w: [f64; 3],
}

impl MixtureWeights {
    pub fn from_exact(exact: [BigRational; 3]) -> Self {
        let w = [to_f64(&exact[0]), to_f64(&exact[1]), to_f64(&exact[2])];
        Self { exact, w }
    }

    /// Weights from floats; only for estimator unit inputs.
    pub fn from_f64(w: [f64; 3]) -> Self {
        let exact = w.map(|x| BigRational::from_float(x).expect("finite weight"));
        Self { exact, w }
    }

    /// `w2 = 0`: every subset is already accounted for by the outer components.
    pub fn middle_is_empty(&self) -> bool {
        self.exact[1].is_zero()
    }

    /// `−w1 + w2·μ2 + w3`
    pub fn mean_with(&self, mu2: f64) -> f64 {
        -self.w[0] + self.w[1] * mu2 + self.w[2]
    }
}

fn pow2(exp: usize) -> BigUint {
    BigUint::one() << exp
}

/// `w1 = (2^k − 2^(k−|neg|)) / (2^k − 1)`, `w3 = (2^|com| − 1) / (2^k − 1)`,
/// `w2 = 1 − w1 − w3`, using Cntr/Impl in finer mode.
pub fn mixture_weights(
    k: usize,
    sets: &OverlapSets,
    mode: WeightMode,
) -> Result<MixtureWeights, HeuristicsError> {
    if k == 0 {
        return Err(HeuristicsError::EmptyPosition);
    }
    let (neg, com) = match mode {
        WeightMode::Simpler => (&sets.neg, &sets.com),
        WeightMode::Finer => (
            sets.cntr.as_ref().ok_or(HeuristicsError::MissingFinerSets)?,
            sets.implied.as_ref().ok_or(HeuristicsError::MissingFinerSets)?,
        ),
    };
    if neg.len() + com.len() > k || !neg.is_disjoint(com) {
        return Err(HeuristicsError::Internal(format!(
            "overlap sets of sizes {}/{} are not disjoint within a domain of {k}",
            neg.len(),
            com.len()
        )));
    }
    let all = BigInt::from(pow2(k) - 1u32);
    let w1 = BigRational::new(BigInt::from(pow2(k) - pow2(k - neg.len())), all.clone());
    let w3 = BigRational::new(BigInt::from(pow2(com.len()) - 1u32), all);
    let w2 = BigRational::one() - &w1 - &w3;
    if w2.is_negative() {
        return Err(HeuristicsError::Internal(format!("negative middle weight {w2}")));
    }
    Ok(MixtureWeights::from_exact([w1, w2, w3]))
}

/// Fixed component spreads; they do not affect the mixture mean, only EM
/// responsibilities.
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture3 {
    pub weights: [f64; 3],
    pub means: [f64; 3],
    pub sigmas: [f64; 3],
}

impl GaussianMixture3 {
    pub fn new(weights: [f64; 3], mu2: f64, sigmas: [f64; 3]) -> Self {
        Self {
            weights,
            means: [-1.0, mu2, 1.0],
            sigmas,
        }
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(self.means)
            .map(|(w, m)| w * m)
            .sum()
    }

    /// `ln(w_i · N(x | μ_i, σ_i²))` per component; `-inf` for zero weights.
    fn component_log_densities(&self, x: f64) -> [f64; 3] {
        std::array::from_fn(|i| {
            if self.weights[i] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                let s = self.sigmas[i];
                let z = (x - self.means[i]) / s;
                self.weights[i].ln() - 0.5 * z * z - (s * TAU.sqrt()).ln()
            }
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.component_log_densities(x).iter().map(|l| l.exp()).sum()
    }

    fn log_sum_exp(parts: [f64; 3]) -> f64 {
        let max = parts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + parts.iter().map(|p| (p - max).exp()).sum::<f64>().ln()
    }

    pub fn log_likelihood(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&x| Self::log_sum_exp(self.component_log_densities(x)))
            .sum()
    }

    /// Posterior probability that each value belongs to each component.
    pub fn responsibilities(&self, values: &[f64]) -> Vec<[f64; 3]> {
        values
            .iter()
            .map(|&x| {
                let parts = self.component_log_densities(x);
                let total = Self::log_sum_exp(parts);
                parts.map(|p| if total.is_finite() { (p - total).exp() } else { 0.0 })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub sigmas: [f64; 3],
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iters: 100,
            sigmas: [DEFAULT_SIGMA; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    pub mu2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood at the initial μ2 and after each iteration.
    pub log_likelihoods: Vec<f64>,
}

/// EM over the middle mean only: weights, outer means and all spreads stay
/// fixed. Starts from `mean(values)`.
pub fn fit_mu2(weights: [f64; 3], values: &[f64], config: &EmConfig) -> EmOutcome {
    assert!(!values.is_empty(), "EM needs at least one value");
    let mut mu2 = values.iter().sum::<f64>() / values.len() as f64;
    let mut model = GaussianMixture3::new(weights, mu2, config.sigmas);
    let mut log_likelihoods = vec![model.log_likelihood(values)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        let resp = model.responsibilities(values);
        let mass: f64 = resp.iter().map(|r| r[1]).sum();
        let next = if mass > 0.0 {
            resp.iter().zip(values).map(|(r, v)| r[1] * v).sum::<f64>() / mass
        } else {
            mu2
        }
        .clamp(-1.0, 1.0);
        let delta = (next - mu2).abs();
        mu2 = next;
        model.means[1] = mu2;
        log_likelihoods.push(model.log_likelihood(values));
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }
    EmOutcome {
        mu2,
        iterations,
        converged,
        log_likelihoods,
    }
}
