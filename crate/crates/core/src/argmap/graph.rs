use std::collections::BTreeSet;
use std::fmt::Write;

use super::ArgumentMap;
use crate::logic::Var;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeColor {
    /// support
    Green,
    /// attack
    Red,
}

impl EdgeColor {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Green => "green",
            Self::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphEdge {
    /// statement → argument vertex
    Premise { statement: Var, argument: usize, color: EdgeColor },
    /// argument vertex → statement
    Conclusion { argument: usize, statement: Var, color: EdgeColor },
}

/// Bipartite view of a map: one dummy vertex per argument.
///
/// A premise edge is green when the premise is asserted positively (it occurs
/// negated in the clause); a conclusion edge is green when the conclusion is
/// positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmGraph {
    statements: BTreeSet<Var>,
    num_arguments: usize,
    edges: Vec<GraphEdge>,
}

impl AmGraph {
    pub fn from_map(map: &ArgumentMap) -> Self {
        let color = |positive: bool| if positive { EdgeColor::Green } else { EdgeColor::Red };
        let mut edges = Vec::new();
        for (i, a) in map.arguments().iter().enumerate() {
            for p in a.premises() {
                edges.push(GraphEdge::Premise {
                    statement: p.var(),
                    argument: i,
                    color: color(p.is_positive()),
                });
            }
            edges.push(GraphEdge::Conclusion {
                argument: i,
                statement: a.conclusion().var(),
                color: color(a.conclusion().is_positive()),
            });
        }
        Self {
            statements: map.statements(),
            num_arguments: map.arguments().len(),
            edges,
        }
    }

    pub fn statements(&self) -> &BTreeSet<Var> {
        &self.statements
    }

    pub fn num_arguments(&self) -> usize {
        self.num_arguments
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn in_degree(&self, argument: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e, GraphEdge::Premise { argument: a, .. } if *a == argument))
            .count()
    }

    pub fn out_degree(&self, argument: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e, GraphEdge::Conclusion { argument: a, .. } if *a == argument))
            .count()
    }

    /// `source,target,color` lines with statements as `s<id>` and argument
    /// vertices as `a<index>`, for external visualization tools.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::from("source,target,color\n");
        for e in &self.edges {
            let _ = match *e {
                GraphEdge::Premise { statement, argument, color } => {
                    writeln!(out, "s{statement},a{argument},{}", color.as_str())
                }
                GraphEdge::Conclusion { argument, statement, color } => {
                    writeln!(out, "a{argument},s{statement},{}", color.as_str())
                }
            };
        }
        out
    }
}
