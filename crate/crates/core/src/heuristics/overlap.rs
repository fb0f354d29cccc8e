use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::coherence::{CoherenceEngine, CoherenceError};
use crate::logic::{Position, Var};

/// Statements of `A` whose confirmation against `B` is known without sampling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverlapSets {
    /// A-literals whose negation is in B
    pub neg: BTreeSet<Var>,
    /// A-literals also in B
    pub com: BTreeSet<Var>,
    /// A-literals whose negation B entails under the arguments
    pub cntr: Option<BTreeSet<Var>>,
    /// A-literals B entails under the arguments
    pub implied: Option<BTreeSet<Var>>,
}

impl OverlapSets {
    /// Whether the semantic sets differ from the syntactic ones.
    pub fn finer_differs(&self) -> bool {
        self.cntr.as_ref().is_some_and(|c| *c != self.neg)
            || self.implied.as_ref().is_some_and(|i| *i != self.com)
    }
}

/// Syntactic overlap by merging the two variable-sorted literal lists.
pub fn overlap_simple(a: &Position, b: &Position) -> OverlapSets {
    let mut sets = OverlapSets::default();
    let mut left = a.iter().peekable();
    let mut right = b.iter().peekable();
    while let (Some(&(va, xa)), Some(&(vb, xb))) = (left.peek(), right.peek()) {
        match va.cmp(&vb) {
            Ordering::Less => {
                left.next();
            }
            Ordering::Greater => {
                right.next();
            }
            Ordering::Equal => {
                if xa == xb {
                    sets.com.insert(va);
                } else {
                    sets.neg.insert(va);
                }
                left.next();
                right.next();
            }
        }
    }
    sets
}

/// Syntactic and semantic overlap; issues `|A| + 1` model counts.
pub fn overlap_fine(
    engine: &CoherenceEngine,
    a: &Position,
    b: &Position,
) -> Result<OverlapSets, CoherenceError> {
    let counter = engine.counter();
    let sigma_b = counter.count(b)?;
    if sigma_b.is_zero() {
        return Err(CoherenceError::Inconsistent(b.clone()));
    }
    let mut sets = overlap_simple(a, b);
    let mut cntr = BTreeSet::new();
    let mut implied = BTreeSet::new();
    for (var, value) in a.iter() {
        let single: Position = [(var, value)].into_iter().collect();
        let joint = counter.count_joint(b, &single)?;
        if joint.is_zero() {
            cntr.insert(var);
        } else if joint == sigma_b {
            implied.insert(var);
        }
    }
    sets.cntr = Some(cntr);
    sets.implied = Some(implied);
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::argmap::{Argument, ArgumentMap};
    use crate::logic::Literal;
    use std::collections::BTreeMap;

    fn pos(lits: &[i64]) -> Position {
        Position::from_dimacs(lits).unwrap()
    }

    #[test]
    fn simple_examples() {
        let s = overlap_simple(&pos(&[1, 2, 3]), &pos(&[-1, 2]));
        assert_eq!(s.neg, BTreeSet::from([1]));
        assert_eq!(s.com, BTreeSet::from([2]));

        let s = overlap_simple(&pos(&[1, 2]), &pos(&[3, -4]));
        assert!(s.neg.is_empty() && s.com.is_empty());

        let a = pos(&[1, -2, 5]);
        let s = overlap_simple(&a, &a);
        assert!(s.neg.is_empty());
        assert_eq!(s.com, a.vars().collect());
    }

    #[test]
    fn fine_equals_simple_without_arguments() {
        let engine = CoherenceEngine::new(&ArgumentMap::unconstrained(5));
        let s = overlap_fine(&engine, &pos(&[1, -2, 3]), &pos(&[-1, -2, 4])).unwrap();
        assert_eq!(s.cntr.as_ref(), Some(&s.neg));
        assert_eq!(s.implied.as_ref(), Some(&s.com));
        assert_eq!(engine.counter().calls(), 4);
    }

    #[test]
    fn fine_sees_entailment_through_arguments() {
        // a → b; statements 1 = a, 2 = b
        let arg = Argument::new(vec![Literal::positive(1)], Literal::positive(2)).unwrap();
        let map = ArgumentMap::new(2, [2].into(), vec![arg], BTreeMap::new()).unwrap();
        let engine = CoherenceEngine::new(&map);

        let s = overlap_fine(&engine, &pos(&[-2]), &pos(&[1])).unwrap();
        assert!(s.neg.is_empty());
        assert_eq!(s.cntr, Some(BTreeSet::from([2])));

        let s = overlap_fine(&engine, &pos(&[2]), &pos(&[1])).unwrap();
        assert!(s.com.is_empty());
        assert_eq!(s.implied, Some(BTreeSet::from([2])));
        assert!(s.finer_differs());
    }
}
