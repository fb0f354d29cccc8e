use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, io_err, Corpus, EvalError, BETA_GRID};
use crate::coherence::CoherenceEngine;
use crate::heuristics::{approximate_one_coh, overlap_simple, ApproxConfig, EmConfig, Method, WeightMode};

/// A method under evaluation: exact recomputation or one of the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalMethod {
    Exact,
    Approx(Method),
}

impl EvalMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Approx(m) => m.name(),
        }
    }

    pub fn all() -> Vec<Self> {
        std::iter::once(Self::Exact)
            .chain(Method::ALL.into_iter().map(Self::Approx))
            .collect()
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMethod {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exact" {
            return Ok(Self::Exact);
        }
        s.parse::<Method>()
            .map(Self::Approx)
            .map_err(|_| EvalError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: Vec<EvalMethod>,
    pub betas: Vec<f64>,
    pub weight_mode: WeightMode,
    pub em: EmConfig,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                EvalMethod::Approx(Method::FitMu2),
                EvalMethod::Approx(Method::FilteredFitMu2),
                EvalMethod::Approx(Method::AverageMu2),
                EvalMethod::Approx(Method::FilteredAverageMu2),
                EvalMethod::Approx(Method::Direct),
                EvalMethod::Approx(Method::Average),
                EvalMethod::Approx(Method::DirectSlope),
            ],
            betas: BETA_GRID.to_vec(),
            weight_mode: WeightMode::Simpler,
            em: EmConfig::default(),
            jobs: None,
        }
    }
}

/// One (pair, method, β) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub map: String,
    pub pair: String,
    pub n: u32,
    pub alpha: f64,
    pub size: usize,
    pub neg: usize,
    pub com: usize,
    pub method: String,
    pub beta: f64,
    pub exact: f64,
    pub estimate: Option<f64>,
    pub squared_error: Option<f64>,
    pub counter_calls: u64,
    pub samples_used: usize,
    pub em_iterations: usize,
    pub wall_micros: u64,
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.pair, self.method, self.beta)
    }

    pub fn is_ok(&self) -> bool {
        self.squared_error.is_some()
    }
}

/// Sampling seed of a (pair, β) cell. Methods share it, so filtered and
/// unfiltered runs on the same cell draw from the same random stream.
fn record_seed(corpus_seed: u64, pair_index: usize, beta: f64) -> u64 {
    derive_seed(corpus_seed, &[2, pair_index as u64, beta.to_bits()])
}

fn run_pair(corpus: &Corpus, index: usize, config: &RunConfig) -> Result<Vec<EvalRecord>, EvalError> {
    let pair = &corpus.pairs[index];
    let truth = &corpus.truth[index];
    let map = corpus.map(&pair.map)?;
    let (a, b) = pair.positions()?;
    let engine = CoherenceEngine::new(map);
    let sets = overlap_simple(&a, &b);
    let mut out = Vec::with_capacity(config.methods.len() * config.betas.len());
    for &method in &config.methods {
        for &beta in &config.betas {
            let before = engine.counter().calls();
            let start = Instant::now();
            let result = match method {
                EvalMethod::Exact => engine
                    .one_coh(&a, &b)
                    .map(|v| (v.value, 0, 0))
                    .map_err(|e| e.to_string()),
                EvalMethod::Approx(m) => {
                    let cfg = ApproxConfig {
                        method: m,
                        beta,
                        weight_mode: config.weight_mode,
                        em: config.em.clone(),
                        seed: record_seed(corpus.seed(), index, beta),
                    };
                    approximate_one_coh(&engine, &a, &b, &cfg)
                        .map(|r| (r.estimate, r.samples_used, r.em_iterations))
                        .map_err(|e| e.to_string())
                }
            };
            let wall_micros = start.elapsed().as_micros() as u64;
            let (estimate, samples_used, em_iterations, error) = match result {
                Ok((e, s, i)) => (Some(e), s, i, None),
                Err(e) => (None, 0, 0, Some(e)),
            };
            out.push(EvalRecord {
                map: pair.map.clone(),
                pair: pair.id.clone(),
                n: truth.n,
                alpha: truth.alpha,
                size: pair.size,
                neg: sets.neg.len(),
                com: sets.com.len(),
                method: method.name().to_string(),
                beta,
                exact: truth.exact,
                estimate,
                squared_error: estimate.map(|e| (e - truth.exact).powi(2)),
                counter_calls: engine.counter().calls() - before,
                samples_used,
                em_iterations,
                wall_micros,
                error,
            });
        }
    }
    Ok(out)
}

/// Evaluates every configured (method, β) on every pair. Pairs run in
/// parallel; the output order is pair, method, β regardless of scheduling.
/// A failing estimate is kept as a record with `error` set.
pub fn run_methods(corpus: &Corpus, config: &RunConfig) -> Result<Vec<EvalRecord>, EvalError> {
    let work = || -> Result<Vec<EvalRecord>, EvalError> {
        let per_pair: Vec<Vec<EvalRecord>> = (0..corpus.pairs.len())
            .into_par_iter()
            .map(|i| run_pair(corpus, i, config))
            .collect::<Result<_, _>>()?;
        Ok(per_pair.into_iter().flatten().collect())
    };
    match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()?
            .install(work),
        None => work(),
    }
}

/// Writes one `records/<method>.csv` per method present in `records`.
pub fn write_records(dir: &Path, records: &[EvalRecord]) -> Result<(), EvalError> {
    let records_dir = dir.join("records");
    fs::create_dir_all(&records_dir).map_err(io_err(&records_dir))?;
    let mut by_method: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }
    for (method, rows) in by_method {
        let path = records_dir.join(format!("{method}.csv"));
        let csv_err = |source| EvalError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// Reads every `records/*.csv`, re-deriving each squared error from the stored
/// estimate and exact value.
pub fn load_records(dir: &Path) -> Result<Vec<EvalRecord>, EvalError> {
    let records_dir = dir.join("records");
    let mut paths: Vec<_> = fs::read_dir(&records_dir)
        .map_err(io_err(&records_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let csv_err = |source| EvalError::Csv {
            path: path.clone(),
            source,
        };
        for row in csv::Reader::from_path(&path).map_err(csv_err)?.deserialize() {
            let r: EvalRecord = row.map_err(csv_err)?;
            if let (Some(est), Some(stored)) = (r.estimate, r.squared_error) {
                let recomputed = (est - r.exact).powi(2);
                if recomputed != stored {
                    return Err(EvalError::Checksum {
                        record: r.key(),
                        stored,
                        recomputed,
                    });
                }
            }
            out.push(r);
        }
    }
    Ok(out)
}
