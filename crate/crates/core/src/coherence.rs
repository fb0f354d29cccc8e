//! Exact degree of justification, Kemeny-Oppenheim confirmation, one-sided and
//! mutual coherence.
//!
//! All counting-derived quantities are exact rationals; a confirmation value is
//! converted to `f64` once, at the end.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::argmap::ArgumentMap;
use crate::counter::{Counter, CounterConfig, CounterError, ModelCount};
use crate::logic::Position;

/// Default largest opinion size for exhaustive one-sided coherence.
pub const DEFAULT_SUBSET_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum CoherenceError {
    #[error(transparent)]
    Counter(#[from] CounterError),
    #[error("position {0} is inconsistent with the arguments (no consistent extension)")]
    Inconsistent(Position),
    #[error("one-sided coherence needs a non-empty position")]
    EmptyPosition,
    #[error("position of size {size} exceeds the subset cap {cap} ({subsets} subsets, {calls} model counts)")]
    CapExceeded {
        size: usize,
        cap: usize,
        subsets: u128,
        calls: u128,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// `B` entails `X`: value +1
    Entailed,
    /// `B` entails `¬X`: value −1
    Refuted,
    Graded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmationValue {
    pub value: f64,
    pub exact: BigRational,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceValue {
    pub value: f64,
    pub exact: BigRational,
}

impl CoherenceValue {
    pub fn from_exact(exact: BigRational) -> Self {
        Self {
            value: to_f64(&exact),
            exact,
        }
    }
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

fn rational(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

/// Counts shared by every confirmation query against the same `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseCounts {
    /// σ_⊤: all consistent complete positions
    pub top: ModelCount,
    /// σ_B
    pub b: ModelCount,
}

/// Confirmation from the four counts σ_⊤, σ_B, σ_X, σ_{B,X}.
pub fn confirmation_from_counts(
    top: &BigUint,
    sigma_b: &BigUint,
    sigma_x: &BigUint,
    sigma_bx: &BigUint,
) -> ConfirmationValue {
    debug_assert!(!sigma_b.is_zero());
    if sigma_bx == sigma_b {
        return ConfirmationValue {
            value: 1.0,
            exact: BigRational::one(),
            classification: Classification::Entailed,
        };
    }
    if sigma_bx.is_zero() {
        return ConfirmationValue {
            value: -1.0,
            exact: -BigRational::one(),
            classification: Classification::Refuted,
        };
    }
    // both X and ¬X have witnesses extending B, so both denominators are positive
    let j_plus = rational(sigma_bx, sigma_x);
    let j_minus = rational(&(sigma_b - sigma_bx), &(top - sigma_x));
    let exact = (&j_plus - &j_minus) / (&j_plus + &j_minus);
    ConfirmationValue {
        value: to_f64(&exact),
        exact,
        classification: Classification::Graded,
    }
}

/// Subset masks of a `k`-element domain in Gray-code order, skipping the empty set.
pub fn gray_code_subsets(k: usize) -> impl Iterator<Item = u64> {
    assert!(k < 64, "domain too large for subset masks");
    (1u64..1u64 << k).map(|i| i ^ (i >> 1))
}

/// Exact coherence computations over one argument map.
pub struct CoherenceEngine {
    counter: Counter,
    subset_cap: usize,
}

impl CoherenceEngine {
    pub fn new(map: &ArgumentMap) -> Self {
        Self::with_counter(Counter::new(map.to_cnf()))
    }

    pub fn with_config(map: &ArgumentMap, config: CounterConfig) -> Self {
        Self::with_counter(Counter::with_config(map.to_cnf(), config))
    }

    pub fn with_counter(counter: Counter) -> Self {
        Self {
            counter,
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }

    #[must_use]
    pub fn subset_cap(mut self, cap: usize) -> Self {
        self.subset_cap = cap;
        self
    }

    pub fn counter(&self) -> &Counter {
        &self.counter
    }

    pub fn base_counts(&self, b: &Position) -> Result<BaseCounts, CoherenceError> {
        let top = self.counter.count(&Position::new())?;
        let sigma_b = self.counter.count(b)?;
        if sigma_b.is_zero() {
            return Err(CoherenceError::Inconsistent(b.clone()));
        }
        Ok(BaseCounts { top, b: sigma_b })
    }

    /// σ_{A,B} / σ_B
    pub fn doj(&self, a: &Position, b: &Position) -> Result<BigRational, CoherenceError> {
        let sigma_b = self.counter.count(b)?;
        if sigma_b.is_zero() {
            return Err(CoherenceError::Inconsistent(b.clone()));
        }
        let joint = self.counter.count_joint(a, b)?;
        Ok(rational(joint.value(), sigma_b.value()))
    }

    pub fn confirmation(
        &self,
        x: &Position,
        b: &Position,
    ) -> Result<ConfirmationValue, CoherenceError> {
        let base = self.base_counts(b)?;
        self.confirmation_with(x, b, &base)
    }

    /// Confirmation of `b` by `x` reusing precomputed base counts; costs two
    /// model counts (σ_X and σ_{B,X}).
    pub fn confirmation_with(
        &self,
        x: &Position,
        b: &Position,
        base: &BaseCounts,
    ) -> Result<ConfirmationValue, CoherenceError> {
        let sigma_x = self.counter.count(x)?;
        let sigma_bx = self.counter.count_joint(b, x)?;
        Ok(confirmation_from_counts(
            base.top.value(),
            base.b.value(),
            sigma_x.value(),
            sigma_bx.value(),
        ))
    }

    fn check_size(&self, a: &Position) -> Result<(), CoherenceError> {
        let k = a.len();
        if k == 0 {
            return Err(CoherenceError::EmptyPosition);
        }
        if k > self.subset_cap {
            let subsets = if k >= 127 { u128::MAX } else { (1u128 << k) - 1 };
            return Err(CoherenceError::CapExceeded {
                size: k,
                cap: self.subset_cap,
                subsets,
                calls: subsets.saturating_mul(2).saturating_add(2),
            });
        }
        Ok(())
    }

    /// Mean confirmation of `b` over all non-empty subpositions of `a`; issues
    /// exactly `2·(2^k − 1) + 2` model count queries.
    pub fn one_coh(&self, a: &Position, b: &Position) -> Result<CoherenceValue, CoherenceError> {
        self.check_size(a)?;
        let base = self.base_counts(b)?;
        let k = a.len();
        let mut sum = BigRational::zero();
        for mask in gray_code_subsets(k) {
            let x = a.subposition(mask);
            sum += self.confirmation_with(&x, b, &base)?.exact;
        }
        let subsets = BigRational::from_integer(BigInt::from((1u64 << k) - 1));
        Ok(CoherenceValue::from_exact(sum / subsets))
    }

    /// Every confirmation value of `b` by the non-empty subpositions of `a`,
    /// in Gray-code order, with the subset masks.
    pub fn confirmation_profile(
        &self,
        a: &Position,
        b: &Position,
    ) -> Result<Vec<(u64, ConfirmationValue)>, CoherenceError> {
        self.check_size(a)?;
        let base = self.base_counts(b)?;
        gray_code_subsets(a.len())
            .map(|mask| {
                self.confirmation_with(&a.subposition(mask), b, &base)
                    .map(|c| (mask, c))
            })
            .collect()
    }

    pub fn mut_coh(&self, a: &Position, b: &Position) -> Result<CoherenceValue, CoherenceError> {
        let ab = self.one_coh(a, b)?;
        let ba = self.one_coh(b, a)?;
        Ok(CoherenceValue::from_exact((ab.exact + ba.exact) / BigInt::from(2)))
    }
}

pub fn doj(map: &ArgumentMap, a: &Position, b: &Position) -> Result<BigRational, CoherenceError> {
    CoherenceEngine::new(map).doj(a, b)
}

pub fn confirmation(
    map: &ArgumentMap,
    x: &Position,
    b: &Position,
) -> Result<ConfirmationValue, CoherenceError> {
    CoherenceEngine::new(map).confirmation(x, b)
}

pub fn one_coh(map: &ArgumentMap, a: &Position, b: &Position) -> Result<CoherenceValue, CoherenceError> {
    CoherenceEngine::new(map).one_coh(a, b)
}

pub fn mut_coh(map: &ArgumentMap, a: &Position, b: &Position) -> Result<CoherenceValue, CoherenceError> {
    CoherenceEngine::new(map).mut_coh(a, b)
}
