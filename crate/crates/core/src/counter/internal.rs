use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::CounterError;
use crate::logic::{CnfFormula, Position};

/// DIMACS-style signed literal used inside the search.
type Lit = i32;
type Clauses = Vec<Vec<Lit>>;

const DEADLINE_CHECK_INTERVAL: u64 = 64;

/// Cache of component counts keyed by the canonical serialization of the
/// component's clause set.
pub(crate) struct ComponentCache {
    entries: HashMap<Vec<Lit>, BigUint>,
    budget: usize,
}

impl ComponentCache {
    pub(crate) fn new(budget: usize) -> Self {
        Self {
            entries: HashMap::new(),
            budget,
        }
    }

    fn get(&self, key: &[Lit]) -> Option<&BigUint> {
        self.entries.get(key)
    }

    fn insert(&mut self, key: Vec<Lit>, value: BigUint) {
        if self.budget == 0 {
            return;
        }
        if self.entries.len() >= self.budget {
            self.entries.clear();
        }
        self.entries.insert(key, value);
    }
}

pub(crate) struct InternalCounter {
    num_vars: u32,
    clauses: Clauses,
}

struct Search<'a> {
    cache: &'a mut ComponentCache,
    deadline: Option<(Instant, Duration)>,
    nodes: u64,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), CounterError> {
        self.nodes += 1;
        if let Some((deadline, budget)) = self.deadline {
            if self.nodes % DEADLINE_CHECK_INTERVAL == 1 && Instant::now() >= deadline {
                return Err(CounterError::Timeout(budget));
            }
        }
        Ok(())
    }
}

fn pow2(exp: usize) -> BigUint {
    BigUint::one() << exp
}

fn lit_value(assignment: &HashMap<u32, bool>, lit: Lit) -> Option<bool> {
    assignment
        .get(&lit.unsigned_abs())
        .map(|&v| v == (lit > 0))
}

/// Unit propagation from `assignment` over `clauses`. Returns `None` on
/// conflict, otherwise the residual clauses (satisfied clauses dropped, false
/// literals removed). Newly implied literals are added to `assignment`.
fn propagate(clauses: &[Vec<Lit>], assignment: &mut HashMap<u32, bool>) -> Option<Clauses> {
    let mut current: Clauses = clauses.to_vec();
    loop {
        let mut next = Vec::with_capacity(current.len());
        let mut changed = false;
        for clause in current {
            let mut residual = Vec::with_capacity(clause.len());
            let mut satisfied = false;
            for &lit in &clause {
                match lit_value(assignment, lit) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => residual.push(lit),
                }
            }
            if satisfied {
                continue;
            }
            match residual.len() {
                0 => return None,
                1 => {
                    assignment.insert(residual[0].unsigned_abs(), residual[0] > 0);
                    changed = true;
                }
                _ => next.push(residual),
            }
        }
        current = next;
        if !changed {
            return Some(current);
        }
    }
}

fn vars_of(clauses: &[Vec<Lit>]) -> Vec<u32> {
    let mut vars: Vec<u32> = clauses.iter().flatten().map(|l| l.unsigned_abs()).collect();
    vars.sort_unstable();
    vars.dedup();
    vars
}

/// Splits clauses into variable-connected components.
fn components(clauses: Clauses) -> Vec<Clauses> {
    if clauses.len() <= 1 {
        return vec![clauses];
    }
    let vars = vars_of(&clauses);
    let index: HashMap<u32, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for clause in &clauses {
        let first = index[&clause[0].unsigned_abs()];
        for lit in &clause[1..] {
            let a = find(&mut parent, first);
            let b = find(&mut parent, index[&lit.unsigned_abs()]);
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut groups: HashMap<usize, Clauses> = HashMap::new();
    let mut order = Vec::new();
    for clause in clauses {
        let root = find(&mut parent, index[&clause[0].unsigned_abs()]);
        groups
            .entry(root)
            .or_insert_with(|| {
                order.push(root);
                Vec::new()
            })
            .push(clause);
    }
    order
        .into_iter()
        .map(|r| groups.remove(&r).expect("group"))
        .collect()
}

fn canonical_key(clauses: &[Vec<Lit>]) -> Vec<Lit> {
    let mut sorted: Vec<Vec<Lit>> = clauses
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable_by_key(|l| (l.unsigned_abs(), *l));
            c
        })
        .collect();
    sorted.sort_unstable();
    let mut key = Vec::with_capacity(sorted.iter().map(|c| c.len() + 1).sum());
    for c in sorted {
        key.extend(c);
        key.push(0);
    }
    key
}

/// Most frequent variable, and whether it occurs with a single polarity.
fn branch_variable(clauses: &[Vec<Lit>]) -> (u32, Option<bool>) {
    let mut occurrences: HashMap<u32, (u32, u32)> = HashMap::new();
    for &lit in clauses.iter().flatten() {
        let e = occurrences.entry(lit.unsigned_abs()).or_default();
        if lit > 0 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let (&var, &(pos, neg)) = occurrences
        .iter()
        .max_by_key(|(&v, &(p, n))| (p + n, std::cmp::Reverse(v)))
        .expect("non-empty component");
    let pure = match (pos, neg) {
        (_, 0) => Some(true),
        (0, _) => Some(false),
        _ => None,
    };
    (var, pure)
}

impl InternalCounter {
    pub(crate) fn new(formula: &CnfFormula) -> Self {
        let clauses = formula
            .clauses()
            .iter()
            .map(|c| c.literals().iter().map(|l| l.to_dimacs() as Lit).collect())
            .collect();
        Self {
            num_vars: formula.num_variables(),
            clauses,
        }
    }

    fn condition_residual(&self, condition: &Position) -> Option<(HashMap<u32, bool>, Clauses)> {
        let mut assignment: HashMap<u32, bool> = condition.iter().collect();
        let residual = propagate(&self.clauses, &mut assignment)?;
        Some((assignment, residual))
    }

    pub(crate) fn count(
        &self,
        condition: &Position,
        cache: &mut ComponentCache,
        deadline: Option<(Instant, Duration)>,
    ) -> Result<BigUint, CounterError> {
        let Some((assignment, residual)) = self.condition_residual(condition) else {
            return Ok(BigUint::zero());
        };
        let constrained = vars_of(&residual).len();
        let free = self.num_vars as usize - assignment.len() - constrained;
        let mut search = Search {
            cache,
            deadline,
            nodes: 0,
        };
        let inner = count_formula(residual, &mut search)?;
        Ok(inner << free)
    }

    pub(crate) fn satisfiable(
        &self,
        condition: &Position,
        deadline: Option<(Instant, Duration)>,
    ) -> Result<bool, CounterError> {
        let Some((_, residual)) = self.condition_residual(condition) else {
            return Ok(false);
        };
        let mut cache = ComponentCache::new(0);
        let mut search = Search {
            cache: &mut cache,
            deadline,
            nodes: 0,
        };
        sat_search(residual, &mut search)
    }
}

/// Counts models of `clauses` over exactly the variables they mention.
fn count_formula(clauses: Clauses, search: &mut Search<'_>) -> Result<BigUint, CounterError> {
    if clauses.is_empty() {
        return Ok(BigUint::one());
    }
    let mut total = BigUint::one();
    for component in components(clauses) {
        let c = count_component(component, search)?;
        if c.is_zero() {
            return Ok(c);
        }
        total *= c;
    }
    Ok(total)
}

fn count_component(clauses: Clauses, search: &mut Search<'_>) -> Result<BigUint, CounterError> {
    search.tick()?;
    if clauses.len() == 1 {
        // a lone clause over w distinct variables
        return Ok(pow2(clauses[0].len()) - 1u32);
    }
    let key = canonical_key(&clauses);
    if let Some(hit) = search.cache.get(&key) {
        return Ok(hit.clone());
    }
    let num_vars = vars_of(&clauses).len();
    let (var, pure) = branch_variable(&clauses);
    let mut total = BigUint::zero();
    for value in [true, false] {
        let sub = if pure == Some(value) {
            // satisfying a pure literal only removes clauses; nothing propagates
            let rest: Clauses = clauses
                .iter()
                .filter(|c| !c.iter().any(|l| l.unsigned_abs() == var))
                .cloned()
                .collect();
            let free = num_vars - 1 - vars_of(&rest).len();
            count_formula(rest, search)? << free
        } else {
            let mut assignment = HashMap::from([(var, value)]);
            match propagate(&clauses, &mut assignment) {
                None => BigUint::zero(),
                Some(rest) => {
                    let free = num_vars - assignment.len() - vars_of(&rest).len();
                    count_formula(rest, search)? << free
                }
            }
        };
        total += sub;
    }
    search.cache.insert(key, total.clone());
    Ok(total)
}

fn sat_search(clauses: Clauses, search: &mut Search<'_>) -> Result<bool, CounterError> {
    search.tick()?;
    if clauses.is_empty() {
        return Ok(true);
    }
    let (var, pure) = branch_variable(&clauses);
    let order = match pure {
        Some(false) => [false, true],
        _ => [true, false],
    };
    for value in order {
        let mut assignment = HashMap::from([(var, value)]);
        if let Some(rest) = propagate(&clauses, &mut assignment) {
            if sat_search(rest, search)? {
                return Ok(true);
            }
        }
        if pure.is_some() {
            // the other polarity can only falsify more clauses
            break;
        }
    }
    Ok(false)
}
