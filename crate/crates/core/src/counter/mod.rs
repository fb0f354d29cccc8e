//! Exact model counting conditioned on a partial assignment.
//!
//! The internal backend is an exhaustive DPLL counter with unit propagation,
//! connected-component decomposition and a component cache. The external
//! backend shells out to a DIMACS-reading counter and is meant for
//! cross-checking only.

mod external;
mod internal;

use std::cell::{Cell, RefCell};
use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::logic::{CnfFormula, Position, Var};

pub use external::ExternalCommand;
use internal::{ComponentCache, InternalCounter};

#[derive(Debug, Error)]
pub enum CounterError {
    #[error("condition mentions variable {var} but the formula has {max} variables")]
    ConditionOutOfRange { var: Var, max: u32 },
    #[error("model count query exceeded its time budget of {0:?}")]
    Timeout(Duration),
    #[error("external counter failed: {message}\n--- captured output ---\n{output}")]
    Backend { message: String, output: String },
    #[error("external counter I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("command template must contain exactly one `{{input}}` placeholder, found {0}")]
    BadTemplate(usize),
}

/// An exact, arbitrary-precision model count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ModelCount(BigUint);

impl ModelCount {
    pub fn zero() -> Self {
        Self(BigUint::zero())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    /// `2^exp`
    pub fn pow2(exp: u32) -> Self {
        Self(BigUint::one() << exp)
    }
}

impl From<BigUint> for ModelCount {
    fn from(v: BigUint) -> Self {
        Self(v)
    }
}

impl From<u64> for ModelCount {
    fn from(v: u64) -> Self {
        Self(BigUint::from(v))
    }
}

impl PartialEq<u64> for ModelCount {
    fn eq(&self, other: &u64) -> bool {
        self.0 == BigUint::from(*other)
    }
}

impl fmt::Display for ModelCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Default)]
pub enum CounterBackend {
    #[default]
    Internal,
    External(ExternalCommand),
}

impl CounterBackend {
    /// `"internal"` or an external command template containing `{input}`.
    pub fn parse(spec: &str) -> Result<Self, CounterError> {
        let spec = spec.trim();
        if spec.is_empty() || spec == "internal" {
            Ok(Self::Internal)
        } else {
            ExternalCommand::new(spec).map(Self::External)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CounterConfig {
    pub backend: CounterBackend,
    /// Maximum number of cached components before the cache is flushed.
    pub cache_budget: usize,
    /// Per-query time budget.
    pub timeout: Option<Duration>,
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self {
            backend: CounterBackend::Internal,
            cache_budget: 1 << 18,
            timeout: None,
        }
    }
}

/// A model counter bound to one formula.
///
/// The component cache lives behind a `RefCell`, so a `Counter` is `Send` but
/// not `Sync`; concurrent workers each build their own.
pub struct Counter {
    formula: CnfFormula,
    config: CounterConfig,
    engine: InternalCounter,
    cache: RefCell<ComponentCache>,
    calls: Cell<u64>,
    deadline: Cell<Option<Instant>>,
}

impl Counter {
    pub fn new(formula: CnfFormula) -> Self {
        Self::with_config(formula, CounterConfig::default())
    }

    pub fn with_config(formula: CnfFormula, config: CounterConfig) -> Self {
        let engine = InternalCounter::new(&formula);
        let cache = RefCell::new(ComponentCache::new(config.cache_budget));
        Self {
            formula,
            config,
            engine,
            cache,
            calls: Cell::new(0),
            deadline: Cell::new(None),
        }
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    pub fn config(&self) -> &CounterConfig {
        &self.config
    }

    /// Number of conditioned count queries answered so far.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0);
    }

    /// Sets an absolute deadline shared by all following queries, on top of the
    /// per-query timeout.
    pub fn set_deadline(&self, deadline: Option<Instant>) {
        self.deadline.set(deadline);
    }

    fn check_condition(&self, condition: &Position) -> Result<(), CounterError> {
        let max = self.formula.num_variables();
        match condition.max_var() {
            v if v > max => Err(CounterError::ConditionOutOfRange { var: v, max }),
            _ => Ok(()),
        }
    }

    fn query_deadline(&self) -> Option<(Instant, Duration)> {
        let now = Instant::now();
        let per_query = self.config.timeout.map(|t| (now + t, t));
        match (per_query, self.deadline.get()) {
            (Some((a, t)), Some(b)) => Some(if a <= b { (a, t) } else { (b, b - now.min(b)) }),
            (Some(p), None) => Some(p),
            (None, Some(b)) => Some((b, b.saturating_duration_since(now))),
            (None, None) => None,
        }
    }

    /// Number of complete assignments satisfying every clause and agreeing
    /// with `condition` on its domain.
    pub fn count(&self, condition: &Position) -> Result<ModelCount, CounterError> {
        self.check_condition(condition)?;
        self.calls.set(self.calls.get() + 1);
        match &self.config.backend {
            CounterBackend::Internal => {
                let deadline = self.query_deadline();
                let mut cache = self.cache.borrow_mut();
                self.engine
                    .count(condition, &mut cache, deadline)
                    .map(ModelCount)
            }
            CounterBackend::External(cmd) => {
                cmd.count(&self.formula, condition, self.config.timeout)
            }
        }
    }

    /// Models extending both `y` and `x`; zero without search when they conflict.
    pub fn count_joint(&self, y: &Position, x: &Position) -> Result<ModelCount, CounterError> {
        match y.union(x) {
            Ok(joint) => self.count(&joint),
            Err(_) => {
                self.check_condition(y)?;
                self.check_condition(x)?;
                self.calls.set(self.calls.get() + 1);
                Ok(ModelCount::zero())
            }
        }
    }

    /// `(σ_{y∪x}, σ_y − σ_{y∪x})`: models extending `y` that do / do not extend `x`.
    pub fn count_extending_not_extending(
        &self,
        y: &Position,
        x: &Position,
    ) -> Result<(ModelCount, ModelCount), CounterError> {
        let total = self.count(y)?;
        let joint = self.count_joint(y, x)?;
        debug_assert!(joint <= total);
        let rest = ModelCount(total.0 - &joint.0);
        Ok((joint, rest))
    }

    /// Early-exit satisfiability check under `condition` (internal engine only).
    pub fn is_satisfiable(&self, condition: &Position) -> Result<bool, CounterError> {
        self.check_condition(condition)?;
        let deadline = self.query_deadline();
        self.engine.satisfiable(condition, deadline)
    }
}

/// One-shot count with the internal backend.
pub fn count_models(formula: &CnfFormula, condition: &Position) -> Result<ModelCount, CounterError> {
    Counter::new(formula.clone()).count(condition)
}

/// One-shot `(σ_{y∪x}, σ_y − σ_{y∪x})` with the internal backend.
pub fn count_extending_not_extending(
    formula: &CnfFormula,
    y: &Position,
    x: &Position,
) -> Result<(ModelCount, ModelCount), CounterError> {
    Counter::new(formula.clone()).count_extending_not_extending(y, x)
}

/// Whether the formula has at least one model.
pub fn is_satisfiable(formula: &CnfFormula) -> bool {
    InternalCounter::new(formula)
        .satisfiable(&Position::new(), None)
        .expect("no deadline")
}
