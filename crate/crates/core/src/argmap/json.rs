use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ArgMapError, Argument, ArgumentMap};
use crate::logic::{Literal, Var};

#[derive(Serialize, Deserialize)]
struct MapFile {
    n: u32,
    key_statements: Vec<Var>,
    arguments: Vec<ArgumentFile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<Var, String>,
}

#[derive(Serialize, Deserialize)]
struct ArgumentFile {
    premises: Vec<i64>,
    conclusion: i64,
}

/// Loads a map, validating its invariants and satisfiability.
pub fn load_json(text: &str) -> Result<ArgumentMap, ArgMapError> {
    let file: MapFile = serde_json::from_str(text)?;
    let arguments = file
        .arguments
        .into_iter()
        .map(|a| {
            let premises = a
                .premises
                .into_iter()
                .map(Literal::from_dimacs)
                .collect::<Result<Vec<_>, _>>()?;
            Argument::new(premises, Literal::from_dimacs(a.conclusion)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let map = ArgumentMap::new(
        file.n,
        file.key_statements.into_iter().collect(),
        arguments,
        file.labels,
    )?;
    map.ensure_satisfiable()?;
    Ok(map)
}

/// Pretty-printed JSON; literals use signed DIMACS integers.
pub fn save_json(map: &ArgumentMap) -> String {
    let file = MapFile {
        n: map.num_statements(),
        key_statements: map.key_statements().iter().copied().collect(),
        arguments: map
            .arguments()
            .iter()
            .map(|a| ArgumentFile {
                premises: a.premises().iter().map(|p| p.to_dimacs()).collect(),
                conclusion: a.conclusion().to_dimacs(),
            })
            .collect(),
        labels: map.labels().clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("serializable");
    text.push('\n');
    text
}
