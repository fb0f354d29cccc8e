//! Exact and approximate mutual coherence between positions over simple
//! structured argumentation frameworks.

pub mod argmap;
pub mod coherence;
pub mod counter;
pub mod evaluation;
pub mod heuristics;
pub mod logic;
