use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EvalError, EvalRecord};

fn same_beta(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn squared_errors<'a>(
    records: &'a [EvalRecord],
    method: &'a str,
    beta: f64,
) -> impl Iterator<Item = (&'a EvalRecord, f64)> + 'a {
    records
        .iter()
        .filter(move |r| r.method == method && same_beta(r.beta, beta))
        .filter_map(|r| r.squared_error.map(|e| (r, e)))
}

/// Mean squared error over the records matching `pred`; `None` when none do.
pub fn mse_where(
    records: &[EvalRecord],
    method: &str,
    beta: f64,
    pred: impl Fn(&EvalRecord) -> bool,
) -> Option<f64> {
    let (sum, count) = squared_errors(records, method, beta)
        .filter(|(r, _)| pred(r))
        .fold((0.0, 0usize), |(s, c), (_, e)| (s + e, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn mse(records: &[EvalRecord], method: &str, beta: f64) -> Option<f64> {
    mse_where(records, method, beta, |_| true)
}

/// Rows β, columns methods; missing cells stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTable {
    pub methods: Vec<String>,
    pub betas: Vec<f64>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl MseTable {
    pub fn get(&self, method: &str, beta: f64) -> Option<f64> {
        let col = self.methods.iter().position(|m| m == method)?;
        let row = self.betas.iter().position(|b| same_beta(*b, beta))?;
        self.cells[row][col]
    }

    /// Header `beta,<methods...>`; missing cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("beta")
            .chain(self.methods.iter().map(String::as_str))
            .collect();
        w.write_record(&header).expect("in-memory csv");
        for (beta, row) in self.betas.iter().zip(&self.cells) {
            let fields: Vec<String> = std::iter::once(beta.to_string())
                .chain(row.iter().map(|c| c.map_or_else(|| "NA".to_string(), |v| v.to_string())))
                .collect();
            w.write_record(&fields).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

pub fn mse_table(records: &[EvalRecord], methods: &[String], betas: &[f64]) -> MseTable {
    let cells = betas
        .iter()
        .map(|&b| methods.iter().map(|m| mse(records, m, b)).collect())
        .collect();
    MseTable {
        methods: methods.to_vec(),
        betas: betas.to_vec(),
        cells,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorKey {
    /// `|neg|` of the pair
    Neg,
    Beta,
}

/// `exact,estimate,<color>` rows for one method and β.
pub fn scatter_data(records: &[EvalRecord], method: &str, beta: f64, color: ColorKey) -> String {
    let mut out = String::from(match color {
        ColorKey::Neg => "pair,exact,estimate,neg\n",
        ColorKey::Beta => "pair,exact,estimate,beta\n",
    });
    for r in records
        .iter()
        .filter(|r| r.method == method && same_beta(r.beta, beta))
    {
        let Some(est) = r.estimate else { continue };
        let key = match color {
            ColorKey::Neg => r.neg.to_string(),
            ColorKey::Beta => r.beta.to_string(),
        };
        let _ = writeln!(out, "{},{},{},{}", r.pair, r.exact, est, key);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    OpinionSize,
    N,
    Alpha,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            Self::OpinionSize => "opinion_size",
            Self::N => "n",
            Self::Alpha => "alpha",
        }
    }

    fn value(self, r: &EvalRecord) -> String {
        match self {
            Self::OpinionSize => r.size.to_string(),
            Self::N => r.n.to_string(),
            Self::Alpha => r.alpha.to_string(),
        }
    }

    fn sort_value(self, r: &EvalRecord) -> f64 {
        match self {
            Self::OpinionSize => r.size as f64,
            Self::N => f64::from(r.n),
            Self::Alpha => r.alpha,
        }
    }
}

impl FromStr for GroupKey {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opinion_size" | "size" => Ok(Self::OpinionSize),
            "n" => Ok(Self::N),
            "alpha" => Ok(Self::Alpha),
            other => Err(EvalError::UnknownGroupKey(other.to_string())),
        }
    }
}

/// Squared-error distribution of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub key: String,
    pub group: String,
    pub method: String,
    pub beta: f64,
    pub count: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-group summaries in increasing group order.
pub fn robustness_groups(records: &[EvalRecord], key: GroupKey, method: &str, beta: f64) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
    for (r, e) in squared_errors(records, method, beta) {
        // non-negative values, so the bit pattern orders like the value
        groups
            .entry((key.sort_value(r).to_bits(), key.value(r)))
            .or_default()
            .push(e);
    }
    groups
        .into_iter()
        .map(|((_, group), mut errs)| {
            errs.sort_by(f64::total_cmp);
            GroupSummary {
                key: key.name().to_string(),
                group,
                method: method.to_string(),
                beta,
                count: errs.len(),
                min: errs[0],
                q25: quantile(&errs, 0.25),
                median: quantile(&errs, 0.5),
                q75: quantile(&errs, 0.75),
                max: errs[errs.len() - 1],
                mean: errs.iter().sum::<f64>() / errs.len() as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Paired percentile bootstrap of `mean(a) − mean(b)` at the given confidence.
pub fn bootstrap_mean_diff(a: &[f64], b: &[f64], reps: usize, confidence: f64, seed: u64) -> BootstrapInterval {
    assert_eq!(a.len(), b.len(), "paired samples");
    assert!(!a.is_empty() && reps > 0);
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let estimate = diffs.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..reps)
        .map(|_| (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    BootstrapInterval {
        estimate,
        lower: quantile(&means, tail),
        upper: quantile(&means, 1.0 - tail),
    }
}
