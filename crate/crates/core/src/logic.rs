//! Propositional substrate: literals, clauses, CNF formulas, positions and
//! DIMACS serialization.
//!
//! Statements are identified by positive integers `1..=N`. A [`Position`] is a
//! partial truth assignment over those statements; its literal-set view is the
//! set of literals it makes true.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Statement (propositional variable) index, always `>= 1`.
pub type Var = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("variable index 0 is not allowed")]
    ZeroVariable,
    #[error("clause contains both polarities of variable {0}")]
    Tautology(Var),
    #[error("variable {var} exceeds the declared variable count {max}")]
    VariableOutOfRange { var: Var, max: u32 },
    #[error(transparent)]
    Conflict(#[from] PositionConflict),
}

/// Two positions (or a literal list) assign different values to some variables.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("positions disagree on variables {vars:?}")]
pub struct PositionConflict {
    pub vars: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimacsError {
    #[error("line {line}: malformed header {text:?}")]
    MalformedHeader { line: usize, text: String },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("line {line}: duplicate `p cnf` header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: invalid literal {token:?}")]
    InvalidLiteral { line: usize, token: String },
    #[error("line {line}: variable {var} out of range 1..={max}")]
    VariableOutOfRange { line: usize, var: u64, max: u32 },
    #[error("header declares {declared} clauses but {found} were found")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("clause {index}: {source}")]
    InvalidClause { index: usize, source: LogicError },
}

/// A signed occurrence of a statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: Var,
    positive: bool,
}

impl Literal {
    pub fn new(var: Var, positive: bool) -> Result<Self, LogicError> {
        if var == 0 {
            return Err(LogicError::ZeroVariable);
        }
        Ok(Self { var, positive })
    }

    pub fn positive(var: Var) -> Self {
        assert!(var >= 1, "variable index must be >= 1");
        Self { var, positive: true }
    }

    pub fn negative(var: Var) -> Self {
        assert!(var >= 1, "variable index must be >= 1");
        Self { var, positive: false }
    }

    /// Parses a DIMACS-style signed integer (`-3` is the negative literal of 3).
    pub fn from_dimacs(value: i64) -> Result<Self, LogicError> {
        if value == 0 {
            return Err(LogicError::ZeroVariable);
        }
        let var = Var::try_from(value.unsigned_abs()).map_err(|_| LogicError::VariableOutOfRange {
            var: Var::MAX,
            max: Var::MAX,
        })?;
        Self::new(var, value > 0)
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            i64::from(self.var)
        } else {
            -i64::from(self.var)
        }
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    #[must_use]
    pub fn negate(self) -> Self {
        Self {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        self.negate()
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals over distinct variables, kept sorted by variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals. Tautologies are rejected.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, LogicError> {
        let mut literals: Vec<Literal> = literals.into_iter().collect();
        literals.sort();
        literals.dedup();
        if let Some(w) = literals.windows(2).find(|w| w[0].var == w[1].var) {
            return Err(LogicError::Tautology(w[0].var));
        }
        Ok(Self { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn max_var(&self) -> Var {
        self.literals.iter().map(|l| l.var).max().unwrap_or(0)
    }

    /// Whether a total assignment (`assignment[v - 1]` is the value of `v`) satisfies the clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.literals
            .iter()
            .any(|l| assignment[(l.var - 1) as usize] == l.positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    num_variables: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_variables: u32, clauses: Vec<Clause>) -> Result<Self, LogicError> {
        for clause in &clauses {
            let max = clause.max_var();
            if max > num_variables {
                return Err(LogicError::VariableOutOfRange {
                    var: max,
                    max: num_variables,
                });
            }
        }
        Ok(Self {
            num_variables,
            clauses,
        })
    }

    pub fn num_variables(&self) -> u32 {
        self.num_variables
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(assignment))
    }

    /// Appends a clause, extending the variable count when needed.
    pub fn push(&mut self, clause: Clause) {
        self.num_variables = self.num_variables.max(clause.max_var());
        self.clauses.push(clause);
    }
}

/// Parses DIMACS CNF text.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut open = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(DimacsError::DuplicateHeader { line: line_no });
            }
            let malformed = || DimacsError::MalformedHeader {
                line: line_no,
                text: line.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(malformed());
            }
            let vars: u32 = parts[2].parse().map_err(|_| malformed())?;
            let count: usize = parts[3].parse().map_err(|_| malformed())?;
            header = Some((vars, count));
            continue;
        }
        let Some((max, _)) = header else {
            return Err(DimacsError::MissingHeader);
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| DimacsError::InvalidLiteral {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                let clause = Clause::new(current.drain(..)).map_err(|source| {
                    DimacsError::InvalidClause {
                        index: clauses.len(),
                        source,
                    }
                })?;
                clauses.push(clause);
                open = false;
                continue;
            }
            if value.unsigned_abs() > u64::from(max) {
                return Err(DimacsError::VariableOutOfRange {
                    line: line_no,
                    var: value.unsigned_abs(),
                    max,
                });
            }
            current.push(Literal::new(value.unsigned_abs() as Var, value > 0).expect("nonzero"));
            open = true;
        }
    }

    let (num_variables, declared) = header.ok_or(DimacsError::MissingHeader)?;
    if open {
        return Err(DimacsError::UnterminatedClause);
    }
    if clauses.len() != declared {
        return Err(DimacsError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(CnfFormula {
        num_variables,
        clauses,
    })
}

/// Serializes a formula as DIMACS CNF. `parse_dimacs` inverts this exactly.
pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = format!(
        "p cnf {} {}\n",
        formula.num_variables,
        formula.clauses.len()
    );
    for clause in &formula.clauses {
        for lit in clause.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}

/// A partial truth assignment over statements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    assignment: BTreeMap<Var, bool>,
}

impl Position {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a position from the literals it makes true.
    pub fn from_literals(literals: impl IntoIterator<Item = Literal>) -> Result<Self, LogicError> {
        let mut position = Self::new();
        let mut conflicts = Vec::new();
        for lit in literals {
            match position.assignment.insert(lit.var, lit.positive) {
                Some(prev) if prev != lit.positive => conflicts.push(lit.var),
                _ => {}
            }
        }
        if conflicts.is_empty() {
            Ok(position)
        } else {
            conflicts.sort_unstable();
            conflicts.dedup();
            Err(PositionConflict { vars: conflicts }.into())
        }
    }

    pub fn from_dimacs(values: &[i64]) -> Result<Self, LogicError> {
        let literals = values
            .iter()
            .map(|&v| Literal::from_dimacs(v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_literals(literals)
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.assignment.get(&var).copied()
    }

    /// Assigns `var`, returning the previous value if any.
    pub fn set(&mut self, var: Var, value: bool) -> Option<bool> {
        assert!(var >= 1, "variable index must be >= 1");
        self.assignment.insert(var, value)
    }

    pub fn remove(&mut self, var: Var) -> Option<bool> {
        self.assignment.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.assignment.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.assignment.iter().map(|(&v, &b)| (v, b))
    }

    /// The literal-set view: literals made true, sorted by variable.
    pub fn literals(&self) -> Vec<Literal> {
        self.iter()
            .map(|(var, positive)| Literal { var, positive })
            .collect()
    }

    pub fn to_dimacs(&self) -> Vec<i64> {
        self.literals().into_iter().map(Literal::to_dimacs).collect()
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.get(lit.var) == Some(lit.positive)
    }

    pub fn max_var(&self) -> Var {
        self.assignment.keys().next_back().copied().unwrap_or(0)
    }

    /// Whether every assignment of `other` is also made by `self`.
    pub fn extends(&self, other: &Position) -> bool {
        other.iter().all(|(v, b)| self.get(v) == Some(b))
    }

    /// Whether a total assignment agrees with this position on its whole domain.
    pub fn agrees_with(&self, assignment: &[bool]) -> bool {
        self.iter().all(|(v, b)| assignment[(v - 1) as usize] == b)
    }

    /// The union of two positions; disagreements are reported, never resolved.
    pub fn union(&self, other: &Position) -> Result<Position, PositionConflict> {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut merged = big.clone();
        let mut conflicts = Vec::new();
        for (v, b) in small.iter() {
            if let Some(prev) = merged.assignment.insert(v, b) {
                if prev != b {
                    conflicts.push(v);
                }
            }
        }
        if conflicts.is_empty() {
            Ok(merged)
        } else {
            Err(PositionConflict { vars: conflicts })
        }
    }

    /// Restricts the position to the domain elements selected by `mask`, where
    /// bit `i` selects the `i`-th variable in increasing order.
    pub fn subposition(&self, mask: u64) -> Position {
        let assignment = self
            .assignment
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < 64 && mask & (1u64 << i) != 0)
            .map(|(_, (&v, &b))| (v, b))
            .collect();
        Position { assignment }
    }

    /// Flips every truth value.
    #[must_use]
    pub fn negated(&self) -> Position {
        Position {
            assignment: self.iter().map(|(v, b)| (v, !b)).collect(),
        }
    }
}

impl FromIterator<(Var, bool)> for Position {
    fn from_iter<T: IntoIterator<Item = (Var, bool)>>(iter: T) -> Self {
        let mut p = Position::new();
        for (v, b) in iter {
            p.set(v, b);
        }
        p
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_dimacs().iter().map(i64::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `position_union` as a free function.
pub fn position_union(a: &Position, b: &Position) -> Result<Position, PositionConflict> {
    a.union(b)
}
