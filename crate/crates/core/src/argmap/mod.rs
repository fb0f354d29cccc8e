//! Argument maps: statements linked by arguments (premises → conclusion).
//!
//! Each argument becomes one implication clause `¬p₁ ∨ … ∨ ¬pₜ ∨ c`; the
//! complete consistent positions of a map are exactly the models of its CNF.

mod generate;
mod graph;
mod json;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::counter;
use crate::logic::{Clause, CnfFormula, Literal, Var};

pub use generate::{generate, GenError, GenParams, PremiseConvention, PremiseDistribution};
pub use graph::{AmGraph, EdgeColor, GraphEdge};
pub use json::{load_json, save_json};

/// Level assigned to statements not connected to any key statement.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum ArgMapError {
    #[error("argument has no premises")]
    EmptyPremises,
    #[error("argument cites variable {0} twice among its premises")]
    DuplicatePremise(Var),
    #[error("argument cites its conclusion variable {0} as a premise")]
    ConclusionAsPremise(Var),
    #[error("variable {var} exceeds the statement count {n}")]
    VariableOutOfRange { var: Var, n: u32 },
    #[error("argument map has no statements")]
    NoStatements,
    #[error("argument map is unsatisfiable")]
    Unsatisfiable,
    #[error("argument map has no arguments")]
    NoArguments,
    #[error("invalid literal: {0}")]
    Literal(#[from] crate::logic::LogicError),
    #[error("schema: {0}")]
    Schema(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Argument {
    premises: Vec<Literal>,
    conclusion: Literal,
}

impl Argument {
    pub fn new(premises: Vec<Literal>, conclusion: Literal) -> Result<Self, ArgMapError> {
        if premises.is_empty() {
            return Err(ArgMapError::EmptyPremises);
        }
        let mut seen = BTreeSet::new();
        for p in &premises {
            if p.var() == conclusion.var() {
                return Err(ArgMapError::ConclusionAsPremise(p.var()));
            }
            if !seen.insert(p.var()) {
                return Err(ArgMapError::DuplicatePremise(p.var()));
            }
        }
        Ok(Self {
            premises,
            conclusion,
        })
    }

    pub fn premises(&self) -> &[Literal] {
        &self.premises
    }

    pub fn conclusion(&self) -> Literal {
        self.conclusion
    }

    /// `¬p₁ ∨ … ∨ ¬pₜ ∨ c`
    pub fn to_clause(&self) -> Clause {
        let lits = self
            .premises
            .iter()
            .map(|p| p.negate())
            .chain(std::iter::once(self.conclusion));
        Clause::new(lits).expect("argument variables are distinct")
    }

    fn max_var(&self) -> Var {
        self.premises
            .iter()
            .map(|p| p.var())
            .chain(std::iter::once(self.conclusion.var()))
            .max()
            .unwrap_or(0)
    }
}

/// A simple structured argumentation framework over statements `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentMap {
    num_statements: u32,
    arguments: Vec<Argument>,
    key_statements: BTreeSet<Var>,
    labels: BTreeMap<Var, String>,
}

impl ArgumentMap {
    /// Checks structural invariants; satisfiability is checked separately by
    /// [`ArgumentMap::ensure_satisfiable`].
    pub fn new(
        num_statements: u32,
        key_statements: BTreeSet<Var>,
        arguments: Vec<Argument>,
        labels: BTreeMap<Var, String>,
    ) -> Result<Self, ArgMapError> {
        if num_statements == 0 {
            return Err(ArgMapError::NoStatements);
        }
        let out_of_range = |var: Var| {
            (var == 0 || var > num_statements).then_some(ArgMapError::VariableOutOfRange {
                var,
                n: num_statements,
            })
        };
        let vars = arguments
            .iter()
            .map(Argument::max_var)
            .chain(key_statements.iter().copied())
            .chain(labels.keys().copied());
        if let Some(err) = vars.filter_map(out_of_range).next() {
            return Err(err);
        }
        Ok(Self {
            num_statements,
            arguments,
            key_statements,
            labels,
        })
    }

    /// A map without arguments over `n` statements.
    pub fn unconstrained(n: u32) -> Self {
        Self::new(n, BTreeSet::new(), Vec::new(), BTreeMap::new()).expect("n >= 1")
    }

    pub fn num_statements(&self) -> u32 {
        self.num_statements
    }

    pub fn arguments(&self) -> &[Argument] {
        &self.arguments
    }

    pub fn key_statements(&self) -> &BTreeSet<Var> {
        &self.key_statements
    }

    pub fn labels(&self) -> &BTreeMap<Var, String> {
        &self.labels
    }

    pub fn label(&self, var: Var) -> Option<&str> {
        self.labels.get(&var).map(String::as_str)
    }

    /// Statements that appear in the map: key statements and every statement
    /// used by an argument.
    pub fn statements(&self) -> BTreeSet<Var> {
        let mut s = self.key_statements.clone();
        for a in &self.arguments {
            s.insert(a.conclusion.var());
            s.extend(a.premises.iter().map(|p| p.var()));
        }
        s
    }

    pub fn to_cnf(&self) -> CnfFormula {
        let clauses = self.arguments.iter().map(Argument::to_clause).collect();
        CnfFormula::new(self.num_statements, clauses).expect("variables validated")
    }

    pub fn is_satisfiable(&self) -> bool {
        counter::is_satisfiable(&self.to_cnf())
    }

    pub fn ensure_satisfiable(&self) -> Result<(), ArgMapError> {
        if self.is_satisfiable() {
            Ok(())
        } else {
            Err(ArgMapError::Unsatisfiable)
        }
    }

    pub fn levels(&self) -> BTreeMap<Var, u32> {
        levels(self)
    }

    pub fn graph(&self) -> AmGraph {
        AmGraph::from_map(self)
    }
}

/// Distance of each statement to the nearest key statement, counting one step
/// per argument from a conclusion to its premises. Statements present in the
/// map but not connected to a key statement get [`UNREACHABLE`].
pub fn levels(map: &ArgumentMap) -> BTreeMap<Var, u32> {
    let mut premises_of: BTreeMap<Var, Vec<Var>> = BTreeMap::new();
    for a in &map.arguments {
        premises_of
            .entry(a.conclusion.var())
            .or_default()
            .extend(a.premises.iter().map(|p| p.var()));
    }
    let mut level: BTreeMap<Var, u32> = map.statements().into_iter().map(|s| (s, UNREACHABLE)).collect();
    let mut queue = VecDeque::new();
    for &k in &map.key_statements {
        level.insert(k, 0);
        queue.push_back(k);
    }
    while let Some(c) = queue.pop_front() {
        let next = level[&c] + 1;
        for &p in premises_of.get(&c).map(Vec::as_slice).unwrap_or(&[]) {
            let entry = level.get_mut(&p).expect("premise is a statement");
            if *entry > next {
                *entry = next;
                queue.push_back(p);
            }
        }
    }
    level
}

/// Empirical fraction of arguments per premise count.
pub fn fit_premise_distribution(map: &ArgumentMap) -> Result<PremiseDistribution, ArgMapError> {
    if map.arguments.is_empty() {
        return Err(ArgMapError::NoArguments);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for a in &map.arguments {
        *counts.entry(a.premises.len()).or_default() += 1;
    }
    let total = map.arguments.len() as f64;
    Ok(PremiseDistribution::from_map_unchecked(
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Position;

    fn lit(v: i64) -> Literal {
        Literal::from_dimacs(v).unwrap()
    }

    fn arg(premises: &[i64], conclusion: i64) -> Argument {
        Argument::new(premises.iter().map(|&p| lit(p)).collect(), lit(conclusion)).unwrap()
    }

    fn map(n: u32, keys: &[u32], args: Vec<Argument>) -> ArgumentMap {
        ArgumentMap::new(n, keys.iter().copied().collect(), args, BTreeMap::new()).unwrap()
    }

    #[test]
    fn argument_invariants() {
        assert!(matches!(Argument::new(vec![], lit(1)), Err(ArgMapError::EmptyPremises)));
        assert!(matches!(
            Argument::new(vec![lit(1), lit(-1)], lit(2)),
            Err(ArgMapError::DuplicatePremise(1))
        ));
        assert!(matches!(
            Argument::new(vec![lit(-2)], lit(2)),
            Err(ArgMapError::ConclusionAsPremise(2))
        ));
    }

    #[test]
    fn map_rejects_out_of_range() {
        let err = ArgumentMap::new(2, BTreeSet::new(), vec![arg(&[1], 3)], BTreeMap::new());
        assert!(matches!(err, Err(ArgMapError::VariableOutOfRange { var: 3, n: 2 })));
        let err = ArgumentMap::new(2, [5].into(), vec![], BTreeMap::new());
        assert!(matches!(err, Err(ArgMapError::VariableOutOfRange { var: 5, n: 2 })));
    }

    #[test]
    fn to_cnf_examples() {
        let support = map(2, &[], vec![arg(&[1], 2)]);
        assert_eq!(support.to_cnf().clauses()[0].literals(), &[lit(-1), lit(2)]);

        let attack = map(3, &[], vec![arg(&[1, 2], -3)]);
        assert_eq!(
            attack.to_cnf().clauses()[0].literals(),
            &[lit(-1), lit(-2), lit(-3)]
        );

        let two = map(3, &[], vec![arg(&[1], 2), arg(&[2], 3)]);
        let f = two.to_cnf();
        assert_eq!(f.clauses().len(), 2);
        assert_eq!(f.num_variables(), 3);
    }

    #[test]
    fn level_examples() {
        // 1 is key; 2 premises an argument for 1; 3 premises arguments for 1 and for 4,
        // where 4 sits at level 2 via 5 -> 2 -> 1 chain.
        let m = map(
            5,
            &[1],
            vec![arg(&[2], 1), arg(&[4], -2), arg(&[3], 1), arg(&[3, -5], 4)],
        );
        let lv = m.levels();
        assert_eq!(lv[&1], 0);
        assert_eq!(lv[&2], 1);
        assert_eq!(lv[&4], 2);
        assert_eq!(lv[&3], 1);
        assert_eq!(lv[&5], 3);
    }

    #[test]
    fn unreachable_statements_get_sentinel() {
        let m = map(4, &[1], vec![arg(&[3], 4)]);
        let lv = m.levels();
        assert_eq!(lv[&1], 0);
        assert_eq!(lv[&3], UNREACHABLE);
        assert_eq!(lv[&4], UNREACHABLE);
        assert!(!lv.contains_key(&2));
    }

    #[test]
    fn fit_premise_distribution_examples() {
        let m = map(5, &[1], vec![arg(&[2, 3], 1), arg(&[3, 4], 1), arg(&[2, 3, 4], 5)]);
        let d = fit_premise_distribution(&m).unwrap();
        assert_eq!(d.as_map()[&2], 2.0 / 3.0);
        assert_eq!(d.as_map()[&3], 1.0 / 3.0);

        let single = map(3, &[1], vec![arg(&[2, 3], 1)]);
        assert_eq!(fit_premise_distribution(&single).unwrap().as_map()[&2], 1.0);

        assert!(matches!(
            fit_premise_distribution(&map(2, &[1], vec![])),
            Err(ArgMapError::NoArguments)
        ));
    }

    /// Direct implementation of the two consistency conditions over literal sets.
    fn consistent(m: &ArgumentMap, assignment: &[bool]) -> bool {
        let holds = |l: &Literal| assignment[(l.var() - 1) as usize] == l.is_positive();
        m.arguments()
            .iter()
            .all(|a| !a.premises().iter().all(holds) || holds(&a.conclusion()))
    }

    #[test]
    fn cnf_models_are_consistent_positions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n: u32 = rng.gen_range(2..=12);
            let mut args = Vec::new();
            for _ in 0..rng.gen_range(0..8) {
                let c = rng.gen_range(1..=n);
                let t = rng.gen_range(1..n.min(4) + 1).min(n - 1) as usize;
                let mut prem = Vec::new();
                while prem.len() < t {
                    let v = rng.gen_range(1..=n);
                    if v != c && !prem.iter().any(|l: &Literal| l.var() == v) {
                        prem.push(Literal::new(v, rng.gen()).unwrap());
                    }
                }
                args.push(Argument::new(prem, Literal::new(c, rng.gen()).unwrap()).unwrap());
            }
            let m = map(n, &[], args);
            let f = m.to_cnf();
            for bits in 0u32..1 << n {
                let a: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                assert_eq!(f.satisfied_by(&a), consistent(&m, &a));
            }
            let sigma = counter::count_models(&f, &Position::new()).unwrap();
            assert_eq!(sigma.is_zero(), !m.is_satisfiable());
        }
    }
}
