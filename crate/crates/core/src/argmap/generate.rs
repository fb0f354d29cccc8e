//! Randomized synthetic argument-map generator.
//!
//! Arguments are added one at a time on top of `k` key statements. The
//! conclusion is drawn among statements already in the map with weight
//! `psi^level`, each premise among all `n` statements with weight
//! `gamma^uses`, and a candidate is kept only if the clause set stays
//! satisfiable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Argument, ArgumentMap, UNREACHABLE};
use crate::counter::Counter;
use crate::logic::{CnfFormula, Literal, Position, Var};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("generation exhausted: {attempts} consecutive rejected candidates after {accepted} accepted arguments")]
    Exhausted { attempts: usize, accepted: usize },
}

/// Probability of each premise count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseDistribution(BTreeMap<usize, f64>);

impl PremiseDistribution {
    pub fn new(probabilities: BTreeMap<usize, f64>) -> Result<Self, GenError> {
        if probabilities.is_empty() {
            return Err(GenError::InvalidParams("premise distribution is empty".into()));
        }
        if let Some((k, p)) = probabilities.iter().find(|(_, p)| !(**p > 0.0)) {
            return Err(GenError::InvalidParams(format!(
                "premise count {k} has non-positive probability {p}"
            )));
        }
        let total: f64 = probabilities.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GenError::InvalidParams(format!(
                "premise probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(probabilities))
    }

    pub(crate) fn from_map_unchecked(probabilities: BTreeMap<usize, f64>) -> Self {
        Self(probabilities)
    }

    /// `{2: 0.19, 3: 0.23, 4: 0.32, 5: 0.26}`, fitted to a real debate map.
    pub fn reference() -> Self {
        Self(BTreeMap::from([(2, 0.19), (3, 0.23), (4, 0.32), (5, 0.26)]))
    }

    pub fn as_map(&self) -> &BTreeMap<usize, f64> {
        &self.0
    }

    pub fn max_count(&self) -> usize {
        self.0.keys().next_back().copied().unwrap_or(0)
    }

    pub fn min_count(&self) -> usize {
        self.0.keys().next().copied().unwrap_or(0)
    }

    /// Total-variation distance to another distribution.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let keys: BTreeSet<usize> = self.0.keys().chain(other.0.keys()).copied().collect();
        0.5 * keys
            .into_iter()
            .map(|k| (self.0.get(&k).unwrap_or(&0.0) - other.0.get(&k).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }
}

impl FromStr for PremiseDistribution {
    type Err = GenError;

    /// Parses `2:0.19,3:0.23,...`.
    fn from_str(s: &str) -> Result<Self, GenError> {
        let bad = |part: &str| GenError::InvalidParams(format!("bad premise entry {part:?}"));
        let mut map = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, p) = part.split_once(':').ok_or_else(|| bad(part))?;
            let k: usize = k.trim().parse().map_err(|_| bad(part))?;
            let p: f64 = p.trim().parse().map_err(|_| bad(part))?;
            if map.insert(k, p).is_some() {
                return Err(bad(part));
            }
        }
        Self::new(map)
    }
}

impl fmt::Display for PremiseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, p)| format!("{k}:{p}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// How a value drawn from the premise distribution maps to a premise count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PremiseConvention {
    /// The drawn value is the number of premises.
    #[default]
    Prose,
    /// The drawn value is the clause width; the argument gets one premise fewer.
    Pseudocode,
}

impl PremiseConvention {
    fn premises_for(self, drawn: usize) -> usize {
        match self {
            Self::Prose => drawn,
            Self::Pseudocode => drawn.saturating_sub(1),
        }
    }
}

impl FromStr for PremiseConvention {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "prose" => Ok(Self::Prose),
            "pseudocode" => Ok(Self::Pseudocode),
            other => Err(GenError::InvalidParams(format!(
                "unknown premise-count convention {other:?} (expected prose|pseudocode)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: u32,
    pub k: u32,
    pub alpha: f64,
    pub psi: f64,
    pub gamma: f64,
    pub d: PremiseDistribution,
    pub max_attempts: usize,
    #[serde(default)]
    pub convention: PremiseConvention,
}

impl GenParams {
    pub fn new(n: u32, k: u32, alpha: f64, psi: f64, gamma: f64, d: PremiseDistribution) -> Self {
        Self {
            n,
            k,
            alpha,
            psi,
            gamma,
            d,
            max_attempts: 1000,
            convention: PremiseConvention::Prose,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let fail = |msg: String| Err(GenError::InvalidParams(msg));
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.k == 0 || self.k > self.n {
            return fail(format!("k must satisfy 1 <= k <= n, got k={}", self.k));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.psi > 0.0 && self.psi <= 1.0) {
            return fail(format!("psi must lie in (0, 1], got {}", self.psi));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be positive".into());
        }
        // re-validate in case the distribution was deserialized
        PremiseDistribution::new(self.d.0.clone())?;
        if self.convention.premises_for(self.d.min_count()) == 0 {
            return fail("premise distribution admits arguments without premises".into());
        }
        let widest = self.convention.premises_for(self.d.max_count());
        if widest + 1 > self.n as usize {
            return fail(format!(
                "{widest} premises plus a conclusion need more than n={} statements",
                self.n
            ));
        }
        Ok(())
    }

    /// `⌈alpha·n⌉`
    pub fn target_arguments(&self) -> usize {
        (self.alpha * f64::from(self.n)).ceil() as usize
    }
}

/// Incrementally maintained generator state.
struct Growth {
    n: u32,
    /// Statements currently in the map, in insertion order.
    vertices: Vec<Var>,
    level: Vec<u32>,
    uses: Vec<u32>,
    premises_of: Vec<Vec<Var>>,
}

impl Growth {
    fn new(n: u32, k: u32) -> Self {
        let mut level = vec![UNREACHABLE; n as usize + 1];
        for s in 1..=k {
            level[s as usize] = 0;
        }
        Self {
            n,
            vertices: (1..=k).collect(),
            level,
            uses: vec![0; n as usize + 1],
            premises_of: vec![Vec::new(); n as usize + 1],
        }
    }

    fn in_map(&self, v: Var) -> bool {
        self.vertices.contains(&v)
    }

    fn accept(&mut self, argument: &Argument) {
        let c = argument.conclusion().var();
        self.uses[c as usize] += 1;
        for p in argument.premises() {
            let v = p.var();
            self.uses[v as usize] += 1;
            if !self.in_map(v) {
                self.vertices.push(v);
            }
            self.premises_of[c as usize].push(v);
        }
        // adding edges only shortens paths: relax from the conclusion
        let mut queue = VecDeque::from([c]);
        while let Some(x) = queue.pop_front() {
            if self.level[x as usize] == UNREACHABLE {
                continue;
            }
            let next = self.level[x as usize] + 1;
            for i in 0..self.premises_of[x as usize].len() {
                let p = self.premises_of[x as usize][i];
                if self.level[p as usize] > next {
                    self.level[p as usize] = next;
                    queue.push_back(p);
                }
            }
        }
    }

    fn levels(&self) -> BTreeMap<Var, u32> {
        let mut vs: Vec<Var> = self.vertices.clone();
        vs.sort_unstable();
        vs.into_iter().map(|v| (v, self.level[v as usize])).collect()
    }
}

fn flip(rng: &mut ChaCha8Rng) -> bool {
    rng.gen::<f64>() > 0.5
}

/// Generates a satisfiable argument map with `⌈alpha·n⌉` arguments.
pub fn generate(params: &GenParams, seed: u64) -> Result<ArgumentMap, GenError> {
    generate_traced(params, seed, |_, _| {})
}

/// As [`generate`], calling `observe(map_so_far, levels)` after every accepted
/// argument with the incrementally maintained statement levels.
pub(crate) fn generate_traced(
    params: &GenParams,
    seed: u64,
    mut observe: impl FnMut(&ArgumentMap, &BTreeMap<Var, u32>),
) -> Result<ArgumentMap, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = params.target_arguments();
    let (counts, probs): (Vec<usize>, Vec<f64>) =
        params.d.as_map().iter().map(|(&k, &p)| (k, p)).unzip();
    let premise_count_dist = WeightedIndex::new(&probs).expect("validated distribution");

    let mut growth = Growth::new(params.n, params.k);
    let mut formula = CnfFormula::new(params.n, Vec::new()).expect("empty formula");
    let mut arguments = Vec::with_capacity(target);
    let keys: BTreeSet<Var> = (1..=params.k).collect();
    let mut rejected = 0usize;

    while arguments.len() < target {
        if rejected >= params.max_attempts {
            return Err(GenError::Exhausted {
                attempts: rejected,
                accepted: arguments.len(),
            });
        }
        let drawn = counts[premise_count_dist.sample(&mut rng)];
        let t = params.convention.premises_for(drawn);

        let weights: Vec<f64> = growth
            .vertices
            .iter()
            .map(|&v| params.psi.powi(growth.level[v as usize].min(i32::MAX as u32) as i32))
            .collect();
        let conclusion_var = growth.vertices[WeightedIndex::new(&weights)
            .expect("positive weights")
            .sample(&mut rng)];
        let conclusion = Literal::new(conclusion_var, !flip(&mut rng)).expect("var >= 1");

        let mut premises: Vec<Literal> = Vec::with_capacity(t);
        let mut taken = vec![false; growth.n as usize + 1];
        taken[conclusion_var as usize] = true;
        for _ in 0..t {
            // drawing among untaken statements is rejection of duplicates
            let weights: Vec<f64> = (1..=growth.n)
                .map(|v| {
                    if taken[v as usize] {
                        0.0
                    } else {
                        params.gamma.powi(growth.uses[v as usize] as i32)
                    }
                })
                .collect();
            let v = WeightedIndex::new(&weights)
                .expect("enough untaken statements")
                .sample(&mut rng) as Var
                + 1;
            taken[v as usize] = true;
            premises.push(Literal::new(v, !flip(&mut rng)).expect("var >= 1"));
        }

        let argument = Argument::new(premises, conclusion).expect("distinct premise variables");
        let mut candidate = formula.clone();
        candidate.push(argument.to_clause());
        let satisfiable = Counter::new(candidate.clone())
            .is_satisfiable(&Position::new())
            .expect("no deadline");
        if !satisfiable {
            rejected += 1;
            continue;
        }
        rejected = 0;
        formula = candidate;
        growth.accept(&argument);
        arguments.push(argument);

        let partial = ArgumentMap::new(params.n, keys.clone(), arguments.clone(), BTreeMap::new())
            .expect("generated within range");
        observe(&partial, &growth.levels());
    }

    Ok(ArgumentMap::new(params.n, keys, arguments, BTreeMap::new()).expect("generated within range"))
}
