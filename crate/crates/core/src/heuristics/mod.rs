//! Approximation of one-sided coherence.
//!
//! Confirmation values of the subsets of `A` are modelled as a mixture of three
//! Gaussians at −1, μ2 and +1. The outer weights come from subsets whose
//! confirmation is known without counting (those hitting `Neg`/`Cntr` are
//! refuted, those inside `Com`/`Impl` are entailed); the estimators differ in
//! how they place μ2.

mod mixture;
mod overlap;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coherence::{CoherenceEngine, CoherenceError};
use crate::logic::{Position, Var};

pub use mixture::{
    fit_mu2, mixture_weights, EmConfig, EmOutcome, GaussianMixture3, MixtureWeights, WeightMode,
    DEFAULT_SIGMA,
};
pub use overlap::{overlap_fine, overlap_simple, OverlapSets};
pub use sampling::{requested_samples, sample_subsets, SubsetPool, SubsetSample};

#[derive(Debug, Error)]
pub enum HeuristicsError {
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
    #[error("position must be non-empty")]
    EmptyPosition,
    #[error("position of size {0} is too large for subset masks (max 63)")]
    TooLarge(usize),
    #[error("beta must be a positive finite number, got {0}")]
    InvalidBeta(f64),
    #[error("no admissible subsets to sample")]
    EmptyPool,
    #[error("no sample values")]
    EmptySamples,
    #[error("finer weights need Cntr/Impl sets")]
    MissingFinerSets,
    #[error("unknown method {0:?}; valid methods: {valid}", valid = Method::NAMES.join(", "))]
    UnknownMethod(String),
    #[error("unknown weight mode {0:?}; valid modes: simpler, finer")]
    UnknownWeightMode(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    DirectSlope,
    Average,
    AverageMu2,
    FitMu2,
    FilteredAverageMu2,
    FilteredFitMu2,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Direct,
        Method::DirectSlope,
        Method::Average,
        Method::AverageMu2,
        Method::FitMu2,
        Method::FilteredAverageMu2,
        Method::FilteredFitMu2,
    ];

    pub const NAMES: [&'static str; 7] = [
        "direct",
        "direct-slope",
        "average",
        "average-mu2",
        "fit-mu2",
        "filtered-average-mu2",
        "filtered-fit-mu2",
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    pub fn is_sampled(self) -> bool {
        !matches!(self, Method::Direct | Method::DirectSlope)
    }

    pub fn is_filtered(self) -> bool {
        matches!(self, Method::FilteredAverageMu2 | Method::FilteredFitMu2)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HeuristicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| HeuristicsError::UnknownMethod(s.to_string()))
    }
}

/// Confirmation values of sampled subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub subsets: Vec<Position>,
    pub filtered: bool,
    pub exhausted: bool,
}

impl SampleSet {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            subsets: Vec::new(),
            filtered: false,
            exhausted: false,
        }
    }

    fn mean(&self) -> Result<f64, HeuristicsError> {
        if self.values.is_empty() {
            return Err(HeuristicsError::EmptySamples);
        }
        Ok(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimate: f64,
    pub method: Method,
    pub weights: [f64; 3],
    pub mu2: f64,
    pub samples_used: usize,
    pub counter_calls: u64,
    pub em_iterations: usize,
    pub em_converged: bool,
    /// The admissible pool was smaller than the request and fully used.
    pub pool_exhausted: bool,
    /// Set when the estimate came from direct estimation instead of `method`.
    pub fallback: Option<String>,
}

impl EstimationReport {
    fn mixture(method: Method, weights: &MixtureWeights, mu2: f64) -> Self {
        Self {
            estimate: weights.mean_with(mu2).clamp(-1.0, 1.0),
            method,
            weights: weights.w,
            mu2,
            samples_used: 0,
            counter_calls: 0,
            em_iterations: 0,
            em_converged: true,
            pool_exhausted: false,
            fallback: None,
        }
    }
}

/// μ2 = 0: the unexplained subsets are taken as independent of `B`.
pub fn estimate_direct(weights: &MixtureWeights) -> EstimationReport {
    EstimationReport::mixture(Method::Direct, weights, 0.0)
}

/// Direct estimation with `w3 = |com| / k`, unless that pushes `w1 + w3` past 1.
pub fn estimate_direct_slope(k: usize, sets: &OverlapSets) -> Result<EstimationReport, HeuristicsError> {
    let base = mixture_weights(k, sets, WeightMode::Simpler)?;
    slope_from(k, sets.com.len(), base)
}

fn slope_from(k: usize, com: usize, base: MixtureWeights) -> Result<EstimationReport, HeuristicsError> {
    use num_rational::BigRational;
    use num_traits::One;
    let slope = BigRational::new(com.into(), k.into());
    let weights = if &base.exact[0] + &slope > BigRational::one() {
        base
    } else {
        let w2 = BigRational::one() - &base.exact[0] - &slope;
        MixtureWeights::from_exact([base.exact[0].clone(), w2, slope])
    };
    let mut report = EstimationReport::mixture(Method::DirectSlope, &weights, 0.0);
    report.method = Method::DirectSlope;
    Ok(report)
}

/// Plain sample mean; ignores the weights.
pub fn estimate_average(samples: &SampleSet) -> Result<EstimationReport, HeuristicsError> {
    let mean = samples.mean()?;
    Ok(EstimationReport {
        estimate: mean.clamp(-1.0, 1.0),
        method: Method::Average,
        weights: [0.0, 1.0, 0.0],
        mu2: mean,
        samples_used: samples.values.len(),
        counter_calls: 0,
        em_iterations: 0,
        em_converged: true,
        pool_exhausted: samples.exhausted,
        fallback: None,
    })
}

/// μ2 = mean of the samples.
pub fn estimate_average_mu2(
    weights: &MixtureWeights,
    samples: &SampleSet,
) -> Result<EstimationReport, HeuristicsError> {
    let mean = samples.mean()?;
    let method = if samples.filtered {
        Method::FilteredAverageMu2
    } else {
        Method::AverageMu2
    };
    let mut report = EstimationReport::mixture(method, weights, mean);
    report.samples_used = samples.values.len();
    report.pool_exhausted = samples.exhausted;
    Ok(report)
}

/// μ2 fitted by EM with every other mixture parameter held fixed.
pub fn estimate_fit_mu2(
    weights: &MixtureWeights,
    samples: &SampleSet,
    config: &EmConfig,
) -> Result<EstimationReport, HeuristicsError> {
    let method = if samples.filtered {
        Method::FilteredFitMu2
    } else {
        Method::FitMu2
    };
    if samples.values.is_empty() {
        return Err(HeuristicsError::EmptySamples);
    }
    if weights.middle_is_empty() {
        let mut report = EstimationReport::mixture(method, weights, 0.0);
        report.samples_used = samples.values.len();
        return Ok(report);
    }
    let outcome = fit_mu2(weights.w, &samples.values, config);
    let mut report = EstimationReport::mixture(method, weights, outcome.mu2);
    report.samples_used = samples.values.len();
    report.em_iterations = outcome.iterations;
    report.em_converged = outcome.converged;
    report.pool_exhausted = samples.exhausted;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub method: Method,
    pub beta: f64,
    pub weight_mode: WeightMode,
    pub em: EmConfig,
    pub seed: u64,
}

impl ApproxConfig {
    pub fn new(method: Method, beta: f64, seed: u64) -> Self {
        Self {
            method,
            beta,
            weight_mode: WeightMode::Simpler,
            em: EmConfig::default(),
            seed,
        }
    }
}

fn domain_mask(a: &Position, vars: &std::collections::BTreeSet<Var>) -> u64 {
    a.vars()
        .enumerate()
        .filter(|(_, v)| vars.contains(v))
        .fold(0, |m, (i, _)| m | 1u64 << i)
}

/// Estimates `OneCoh(a, b)` with the configured method.
pub fn approximate_one_coh(
    engine: &CoherenceEngine,
    a: &Position,
    b: &Position,
    config: &ApproxConfig,
) -> Result<EstimationReport, HeuristicsError> {
    let k = a.len();
    if k == 0 {
        return Err(HeuristicsError::EmptyPosition);
    }
    let calls_before = engine.counter().calls();
    let method = config.method;

    let sets = match config.weight_mode {
        WeightMode::Simpler => overlap_simple(a, b),
        WeightMode::Finer => overlap_fine(engine, a, b)?,
    };
    let weights = mixture_weights(k, &sets, config.weight_mode)?;
    let (neg, com) = match config.weight_mode {
        WeightMode::Simpler => (&sets.neg, &sets.com),
        WeightMode::Finer => (
            sets.cntr.as_ref().expect("finer sets"),
            sets.implied.as_ref().expect("finer sets"),
        ),
    };

    let finish = |mut report: EstimationReport| {
        report.counter_calls = engine.counter().calls() - calls_before;
        report
    };

    if weights.middle_is_empty() {
        // every subset is refuted or entailed; the mixture mean is exact
        let mut report = EstimationReport::mixture(method, &weights, 0.0);
        if method == Method::Average {
            report.weights = [0.0, 1.0, 0.0];
        }
        return Ok(finish(report));
    }

    match method {
        Method::Direct => return Ok(finish(estimate_direct(&weights))),
        Method::DirectSlope => return Ok(finish(slope_from(k, com.len(), weights)?)),
        _ => {}
    }

    let pool = if method.is_filtered() {
        SubsetPool::filtered(k, domain_mask(a, neg), domain_mask(a, com))?
    } else {
        SubsetPool::unfiltered(k)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sample = match sample_subsets(&pool, config.beta, &mut rng) {
        Ok(s) => s,
        Err(HeuristicsError::EmptyPool) => {
            let mut report = estimate_direct(&weights);
            report.method = method;
            report.fallback = Some("empty admissible pool; direct estimation used".into());
            return Ok(finish(report));
        }
        Err(e) => return Err(e),
    };

    let base = engine.base_counts(b)?;
    let mut subsets = Vec::with_capacity(sample.masks.len());
    let mut values = Vec::with_capacity(sample.masks.len());
    for &mask in &sample.masks {
        let x = a.subposition(mask);
        values.push(engine.confirmation_with(&x, b, &base)?.value);
        subsets.push(x);
    }
    let samples = SampleSet {
        values,
        subsets,
        filtered: method.is_filtered(),
        exhausted: sample.exhausted,
    };

    let report = match method {
        Method::Average => estimate_average(&samples)?,
        Method::AverageMu2 | Method::FilteredAverageMu2 => estimate_average_mu2(&weights, &samples)?,
        Method::FitMu2 | Method::FilteredFitMu2 => estimate_fit_mu2(&weights, &samples, &config.em)?,
        Method::Direct | Method::DirectSlope => unreachable!("handled above"),
    };
    Ok(finish(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argmap::ArgumentMap;
    use crate::coherence::one_coh;

    fn pos(lits: &[i64]) -> Position {
        Position::from_dimacs(lits).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let err = "best".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("filtered-average-mu2"));
    }

    #[test]
    fn direct_examples() {
        let w = MixtureWeights::from_exact(
            mixture_weights(3, &overlap_simple(&pos(&[1, 2, 3]), &pos(&[-1, 2])), WeightMode::Simpler)
                .unwrap()
                .exact,
        );
        assert!((estimate_direct(&w).estimate - (-3.0 / 7.0)).abs() < 1e-15);
        assert_eq!(estimate_direct(&MixtureWeights::from_f64([0.0, 1.0, 0.0])).estimate, 0.0);
        assert_eq!(estimate_direct(&MixtureWeights::from_f64([0.0, 0.0, 1.0])).estimate, 1.0);
    }

    #[test]
    fn slope_examples() {
        let sets = overlap_simple(&pos(&[1, 2, 3, 4]), &pos(&[1, 2]));
        let r = estimate_direct_slope(4, &sets).unwrap();
        assert_eq!(r.weights, [0.0, 0.5, 0.5]);
        assert_eq!(r.estimate, 0.5);

        let none = overlap_simple(&pos(&[1, 2, 3]), &pos(&[-1]));
        let direct = estimate_direct(&mixture_weights(3, &none, WeightMode::Simpler).unwrap());
        assert_eq!(estimate_direct_slope(3, &none).unwrap().estimate, direct.estimate);

        // k = 3, neg = 2 → w1 = 6/7; com = 1 → w3' = 1/3 > 1/7 remaining
        let over = overlap_simple(&pos(&[1, 2, 3]), &pos(&[-1, -2, 3]));
        let direct = estimate_direct(&mixture_weights(3, &over, WeightMode::Simpler).unwrap());
        assert_eq!(estimate_direct_slope(3, &over).unwrap().estimate, direct.estimate);
    }

    #[test]
    fn average_examples() {
        let r = estimate_average(&SampleSet::from_values(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.estimate, 1.0);
        let r = estimate_average(&SampleSet::from_values(vec![-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(matches!(
            estimate_average(&SampleSet::from_values(vec![])),
            Err(HeuristicsError::EmptySamples)
        ));
    }

    #[test]
    fn average_mu2_examples() {
        let flat = MixtureWeights::from_f64([0.0, 1.0, 0.0]);
        let v = SampleSet::from_values(vec![0.2, -0.4, 0.8]);
        let r = estimate_average_mu2(&flat, &v).unwrap();
        assert!((r.estimate - 0.2).abs() < 1e-15);

        let w = mixture_weights(3, &overlap_simple(&pos(&[1, 2, 3]), &pos(&[-1, 2])), WeightMode::Simpler).unwrap();
        let r = estimate_average_mu2(&w, &SampleSet::from_values(vec![0.5])).unwrap();
        assert!((r.estimate - (-2.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn fit_mu2_examples() {
        let flat = MixtureWeights::from_f64([0.0, 1.0, 0.0]);
        let r = estimate_fit_mu2(&flat, &SampleSet::from_values(vec![0.4; 5]), &EmConfig::default()).unwrap();
        assert!((r.mu2 - 0.4).abs() < 1e-12);

        let outer = MixtureWeights::from_f64([0.25, 0.0, 0.75]);
        let r = estimate_fit_mu2(&outer, &SampleSet::from_values(vec![0.1]), &EmConfig::default()).unwrap();
        assert_eq!(r.estimate, 0.5);
        assert_eq!(r.em_iterations, 0);
    }

    #[test]
    fn pipeline_direct_on_negated_opinions() {
        let map = ArgumentMap::unconstrained(10);
        let b = pos(&[1, -3, 5, 7, -9]);
        let engine = CoherenceEngine::new(&map);
        let r = approximate_one_coh(&engine, &b.negated(), &b, &ApproxConfig::new(Method::Direct, 1.0, 0)).unwrap();
        assert_eq!(r.estimate, -1.0);
        assert_eq!(r.counter_calls, 0);
    }

    #[test]
    fn pipeline_subset_shortcut() {
        let map = ArgumentMap::unconstrained(10);
        let engine = CoherenceEngine::new(&map);
        let a = pos(&[1, -3]);
        let b = pos(&[1, -3, 5]);
        for m in Method::ALL {
            let r = approximate_one_coh(&engine, &a, &b, &ApproxConfig::new(m, 2.0, 1)).unwrap();
            assert_eq!(r.estimate, 1.0, "{m}");
        }
    }

    #[test]
    fn pipeline_filtered_exhaustive_is_exact_without_arguments() {
        let map = ArgumentMap::unconstrained(9);
        let engine = CoherenceEngine::new(&map);
        let a = pos(&[1, 2, -3, 4, 5, -6]);
        let b = pos(&[-1, 2, 3, 7]);
        let exact = one_coh(&map, &a, &b).unwrap().value;
        let r = approximate_one_coh(&engine, &a, &b, &ApproxConfig::new(Method::FilteredAverageMu2, 100.0, 5)).unwrap();
        assert!(r.pool_exhausted);
        assert!((r.estimate - exact).abs() < 1e-12);
    }

    #[test]
    fn pipeline_sample_counts_and_calls() {
        let map = ArgumentMap::unconstrained(12);
        let engine = CoherenceEngine::new(&map);
        let a = pos(&[1, 2, 3, 4, 5]);
        let b = pos(&[-1, 6, 7]);
        let r = approximate_one_coh(&engine, &a, &b, &ApproxConfig::new(Method::FilteredAverageMu2, 3.0, 9)).unwrap();
        assert_eq!(r.samples_used, 15);
        assert_eq!(r.counter_calls, 2 + 2 * 15);

        let mut finer = ApproxConfig::new(Method::Direct, 1.0, 0);
        finer.weight_mode = WeightMode::Finer;
        let r = approximate_one_coh(&engine, &a, &b, &finer).unwrap();
        assert_eq!(r.counter_calls, 6);
    }

    #[test]
    fn pipeline_falls_back_on_empty_pool() {
        let map = ArgumentMap::unconstrained(6);
        let engine = CoherenceEngine::new(&map);
        // every statement of A is negated or shared, but not all shared
        let a = pos(&[1, 2, 3]);
        let b = pos(&[-1, 2, 3]);
        let r = approximate_one_coh(&engine, &a, &b, &ApproxConfig::new(Method::FilteredFitMu2, 1.0, 0)).unwrap();
        // w2 = 0 here, so the exact short-circuit applies before sampling
        assert!(r.fallback.is_none());
        let exact = one_coh(&map, &a, &b).unwrap().value;
        assert!((r.estimate - exact).abs() < 1e-12);
    }
}
