use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{info, warn};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, io_err, EvalError};
use crate::argmap::{generate, load_json, save_json, ArgumentMap, GenParams, PremiseDistribution};
use crate::coherence::{CoherenceEngine, CoherenceError};
use crate::counter::CounterError;
use crate::heuristics::overlap_fine;
use crate::logic::{Position, Var};

/// How the statements of the second opinion relate to the first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    /// Both opinions drawn independently.
    #[default]
    Uncontrolled,
    /// `|neg|` uniform in `0..=size`, then `|com|` uniform in `0..=size-|neg|`;
    /// the rest of B uses statements outside A.
    Stratified,
    /// Each pair is uncontrolled or stratified with probability 1/2.
    Mixed,
}

impl FromStr for OverlapMode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uncontrolled" => Ok(Self::Uncontrolled),
            "stratified" => Ok(Self::Stratified),
            "mixed" => Ok(Self::Mixed),
            other => Err(EvalError::InvalidSpec(format!(
                "unknown overlap mode {other:?} (expected uncontrolled|stratified|mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_values: Vec<u32>,
    pub alpha_values: Vec<f64>,
    pub k_values: Vec<u32>,
    pub psi: f64,
    pub gamma: f64,
    pub d: PremiseDistribution,
    pub opinion_sizes: Vec<usize>,
    pub maps_per_config: usize,
    pub pairs_per_config: usize,
    pub overlap: OverlapMode,
    /// Wall-time budget for one ground-truth computation.
    pub time_budget_secs: f64,
    pub seed: u64,
}

impl CorpusSpec {
    /// n ∈ {30, 50}, α ∈ {0.3, 0.5}, k ∈ {3, 5}, opinion sizes {5, 7}, 3 pairs per
    /// configuration.
    pub fn desk() -> Self {
        Self {
            n_values: vec![30, 50],
            alpha_values: vec![0.3, 0.5],
            k_values: vec![3, 5],
            psi: 0.5,
            gamma: 0.5,
            d: PremiseDistribution::reference(),
            opinion_sizes: vec![5, 7],
            maps_per_config: 1,
            pairs_per_config: 3,
            overlap: OverlapMode::Uncontrolled,
            time_budget_secs: 60.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |m: &str| Err(EvalError::InvalidSpec(m.to_string()));
        if self.n_values.is_empty()
            || self.alpha_values.is_empty()
            || self.k_values.is_empty()
            || self.opinion_sizes.is_empty()
        {
            return fail("every parameter list needs at least one value");
        }
        if self.n_values.contains(&0) || self.k_values.contains(&0) || self.opinion_sizes.contains(&0) {
            return fail("n, k and opinion sizes must be positive");
        }
        if self.alpha_values.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return fail("alpha values must be positive");
        }
        if self.maps_per_config == 0 || self.pairs_per_config == 0 {
            return fail("maps and pairs per configuration must be positive");
        }
        if !(self.time_budget_secs > 0.0) {
            return fail("time budget must be positive");
        }
        let min_n = *self.n_values.iter().min().expect("non-empty") as usize;
        if self.opinion_sizes.iter().any(|&s| s > min_n) {
            return fail("opinion sizes must not exceed the smallest n");
        }
        if self.opinion_sizes.iter().any(|&s| s > 20) {
            return fail("opinion sizes above 20 are beyond exhaustive ground truth");
        }
        if self.overlap != OverlapMode::Uncontrolled && self.opinion_sizes.iter().any(|&s| 2 * s > min_n) {
            return fail("stratified overlap needs n >= 2 * opinion size");
        }
        Ok(())
    }

    fn configs(&self) -> Vec<(u32, f64, u32)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &alpha in &self.alpha_values {
                for &k in &self.k_values {
                    if k <= n {
                        out.push((n, alpha, k));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub id: String,
    pub n: u32,
    pub alpha: f64,
    pub k: u32,
    pub seed: u64,
    pub arguments: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionPair {
    pub id: String,
    pub map: String,
    pub size: usize,
    pub a: Vec<i64>,
    pub b: Vec<i64>,
}

impl OpinionPair {
    pub fn positions(&self) -> Result<(Position, Position), EvalError> {
        let parse = |lits: &[i64]| {
            Position::from_dimacs(lits)
                .map_err(|e| EvalError::Corrupt(format!("pair {}: {e}", self.id)))
        };
        Ok((parse(&self.a)?, parse(&self.b)?))
    }
}

/// Ground truth of one pair, with the overlap statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub pair: String,
    pub map: String,
    pub size: usize,
    pub n: u32,
    pub alpha: f64,
    pub neg: usize,
    pub com: usize,
    pub cntr: usize,
    pub implied: usize,
    pub finer_differs: bool,
    pub exact: f64,
    pub exact_rational: String,
    pub counter_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub map: String,
    pub pair: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: CorpusSpec,
    pub maps: Vec<MapEntry>,
    pub skipped: Vec<Skip>,
}

/// A corpus held in memory; pairs and truth are in manifest map order.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub maps: BTreeMap<String, ArgumentMap>,
    pub pairs: Vec<OpinionPair>,
    pub truth: Vec<TruthRow>,
}

struct MapBuild {
    entry: MapEntry,
    map: ArgumentMap,
    pairs: Vec<OpinionPair>,
    truth: Vec<TruthRow>,
    skipped: Vec<Skip>,
}

const PAIR_ATTEMPTS: usize = 1000;

fn random_position(rng: &mut impl Rng, pool: &[Var], size: usize) -> Position {
    sample(rng, pool.len(), size)
        .into_iter()
        .map(|i| (pool[i], rng.gen::<bool>()))
        .collect()
}

fn draw_pair(
    engine: &CoherenceEngine,
    n: u32,
    size: usize,
    mode: OverlapMode,
    rng: &mut impl Rng,
) -> Result<Option<(Position, Position)>, EvalError> {
    let all: Vec<Var> = (1..=n).collect();
    let consistent = |p: &Position| engine.counter().is_satisfiable(p).map_err(CoherenceError::from);
    let mode = match mode {
        OverlapMode::Mixed if rng.gen::<bool>() => OverlapMode::Stratified,
        OverlapMode::Mixed => OverlapMode::Uncontrolled,
        m => m,
    };
    for _ in 0..PAIR_ATTEMPTS {
        let a = random_position(rng, &all, size);
        if !consistent(&a)? {
            continue;
        }
        let b = match mode {
            OverlapMode::Uncontrolled | OverlapMode::Mixed => random_position(rng, &all, size),
            OverlapMode::Stratified => {
                let neg = rng.gen_range(0..=size);
                let com = rng.gen_range(0..=size - neg);
                let a_vars: Vec<(Var, bool)> = a.iter().collect();
                let shared = sample(rng, size, neg + com).into_vec();
                let outside: Vec<Var> = all.iter().copied().filter(|v| a.get(*v).is_none()).collect();
                let mut b: Position = shared
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| (a_vars[i].0, if j < neg { !a_vars[i].1 } else { a_vars[i].1 }))
                    .collect();
                for (v, x) in random_position(rng, &outside, size - neg - com).iter() {
                    b.set(v, x);
                }
                b
            }
        };
        if consistent(&b)? {
            return Ok(Some((a, b)));
        }
    }
    Ok(None)
}

fn build_map(spec: &CorpusSpec, index: usize, (n, alpha, k): (u32, f64, u32), rep: usize) -> Result<MapBuild, EvalError> {
    let id = format!("m{index:03}");
    let seed = derive_seed(spec.seed, &[index as u64]);
    let params = GenParams::new(n, k, alpha, spec.psi, spec.gamma, spec.d.clone());
    let map = generate(&params, seed)?;
    info!("map {id}: n={n} alpha={alpha} k={k} rep={rep}, {} arguments", map.arguments().len());
    let entry = MapEntry {
        id: id.clone(),
        n,
        alpha,
        k,
        seed,
        arguments: map.arguments().len(),
    };
    let engine = CoherenceEngine::new(&map);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let budget = Duration::from_secs_f64(spec.time_budget_secs);
    let mut pairs = Vec::new();
    let mut truth = Vec::new();
    let mut skipped = Vec::new();
    for &size in &spec.opinion_sizes {
        for p in 0..spec.pairs_per_config {
            let pair_id = format!("{id}-s{size}-p{p:02}");
            let Some((a, b)) = draw_pair(&engine, n, size, spec.overlap, &mut rng)? else {
                let reason = format!("no consistent opinion pair after {PAIR_ATTEMPTS} attempts");
                warn!("skipping {pair_id}: {reason}");
                skipped.push(Skip { map: id.clone(), pair: Some(pair_id), reason });
                continue;
            };
            let before = engine.counter().calls();
            engine.counter().set_deadline(Some(Instant::now() + budget));
            let result = engine.one_coh(&a, &b).and_then(|v| Ok((v, overlap_fine(&engine, &a, &b)?)));
            engine.counter().set_deadline(None);
            let (value, sets) = match result {
                Ok(r) => r,
                Err(CoherenceError::Counter(CounterError::Timeout(_))) => {
                    let reason = format!("ground truth exceeded the {:.1}s budget", spec.time_budget_secs);
                    warn!("skipping {pair_id}: {reason}");
                    skipped.push(Skip { map: id.clone(), pair: Some(pair_id), reason });
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let cntr = sets.cntr.as_ref().expect("fine overlap");
            let implied = sets.implied.as_ref().expect("fine overlap");
            truth.push(TruthRow {
                pair: pair_id.clone(),
                map: id.clone(),
                size,
                n,
                alpha,
                neg: sets.neg.len(),
                com: sets.com.len(),
                cntr: cntr.len(),
                implied: implied.len(),
                finer_differs: sets.finer_differs(),
                exact: value.value,
                exact_rational: value.exact.to_string(),
                counter_calls: engine.counter().calls() - before,
            });
            pairs.push(OpinionPair {
                id: pair_id,
                map: id.clone(),
                size,
                a: a.to_dimacs(),
                b: b.to_dimacs(),
            });
        }
    }
    Ok(MapBuild {
        entry,
        map,
        pairs,
        truth,
        skipped,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), EvalError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| EvalError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| EvalError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<(), EvalError> {
    let csv_err = |source| EvalError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn read_truth(path: &Path) -> Result<Vec<TruthRow>, EvalError> {
    let csv_err = |source| EvalError::Csv {
        path: path.to_path_buf(),
        source,
    };
    csv::Reader::from_path(path)
        .map_err(csv_err)?
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// Generates maps and opinion pairs, computes ground truth and writes
/// `corpus.json`, `maps/*.json`, `pairs/*.json` and `truth/*.csv` under `dir`.
/// The output depends only on the spec, unless a ground-truth computation runs
/// into the time budget.
pub fn build_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Corpus, EvalError> {
    spec.validate()?;
    let jobs: Vec<(usize, (u32, f64, u32), usize)> = spec
        .configs()
        .into_iter()
        .flat_map(|c| (0..spec.maps_per_config).map(move |rep| (c, rep)))
        .enumerate()
        .map(|(i, (c, rep))| (i, c, rep))
        .collect();
    let built: Vec<MapBuild> = jobs
        .par_iter()
        .map(|&(i, c, rep)| build_map(spec, i, c, rep))
        .collect::<Result<_, _>>()?;

    for sub in ["maps", "pairs", "truth", "records"] {
        let path = dir.join(sub);
        fs::create_dir_all(&path).map_err(io_err(&path))?;
    }
    let mut corpus = Corpus {
        dir: dir.to_path_buf(),
        manifest: Manifest {
            spec: spec.clone(),
            maps: Vec::new(),
            skipped: Vec::new(),
        },
        maps: BTreeMap::new(),
        pairs: Vec::new(),
        truth: Vec::new(),
    };
    for b in built {
        let id = &b.entry.id;
        write_file(&dir.join("maps").join(format!("{id}.json")), &save_json(&b.map))?;
        write_json(&dir.join("pairs").join(format!("{id}.json")), &b.pairs)?;
        write_truth(&dir.join("truth").join(format!("{id}.csv")), &b.truth)?;
        corpus.maps.insert(id.clone(), b.map);
        corpus.manifest.maps.push(b.entry);
        corpus.manifest.skipped.extend(b.skipped);
        corpus.pairs.extend(b.pairs);
        corpus.truth.extend(b.truth);
    }
    write_json(&dir.join("corpus.json"), &corpus.manifest)?;
    info!(
        "corpus: {} maps, {} pairs, {} skipped",
        corpus.maps.len(),
        corpus.pairs.len(),
        corpus.manifest.skipped.len()
    );
    Ok(corpus)
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self, EvalError> {
        let manifest: Manifest = read_json(&dir.join("corpus.json"))?;
        let mut maps = BTreeMap::new();
        let mut pairs = Vec::new();
        let mut truth = Vec::new();
        for entry in &manifest.maps {
            let id = &entry.id;
            let path = dir.join("maps").join(format!("{id}.json"));
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            maps.insert(id.clone(), load_json(&text)?);
            let map_pairs: Vec<OpinionPair> = read_json(&dir.join("pairs").join(format!("{id}.json")))?;
            let map_truth = read_truth(&dir.join("truth").join(format!("{id}.csv")))?;
            if map_pairs.len() != map_truth.len()
                || map_pairs.iter().zip(&map_truth).any(|(p, t)| p.id != t.pair)
            {
                return Err(EvalError::Corrupt(format!("pairs and truth of map {id} disagree")));
            }
            pairs.extend(map_pairs);
            truth.extend(map_truth);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            maps,
            pairs,
            truth,
        })
    }

    pub fn seed(&self) -> u64 {
        self.manifest.spec.seed
    }

    pub fn map(&self, id: &str) -> Result<&ArgumentMap, EvalError> {
        self.maps
            .get(id)
            .ok_or_else(|| EvalError::Corrupt(format!("unknown map {id}")))
    }

    /// Fraction of pairs whose semantic overlap sets differ from the syntactic ones.
    pub fn finer_differs_fraction(&self) -> f64 {
        if self.truth.is_empty() {
            return 0.0;
        }
        self.truth.iter().filter(|t| t.finer_differs).count() as f64 / self.truth.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            n_values: vec![12],
            alpha_values: vec![0.5],
            k_values: vec![2],
            opinion_sizes: vec![3, 4],
            pairs_per_config: 2,
            ..CorpusSpec::desk()
        }
    }

    fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        for sub in ["maps", "pairs", "truth"] {
            for e in fs::read_dir(dir.join(sub)).unwrap() {
                let p = e.unwrap().path();
                out.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), fs::read(&p).unwrap());
            }
        }
        out.insert("corpus.json".into(), fs::read(dir.join("corpus.json")).unwrap());
        out
    }

    #[test]
    fn corpus_is_deterministic_and_reloadable() {
        let spec = small_spec();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let c1 = build_corpus(&spec, d1.path()).unwrap();
        build_corpus(&spec, d2.path()).unwrap();
        assert_eq!(read_tree(d1.path()), read_tree(d2.path()));
        assert_eq!(c1.pairs.len(), 4);

        let loaded = Corpus::load(d1.path()).unwrap();
        assert_eq!(loaded.pairs, c1.pairs);
        assert_eq!(loaded.truth, c1.truth);
        assert_eq!(loaded.manifest, c1.manifest);
    }

    #[test]
    fn truth_costs_and_values() {
        let d = tempfile::tempdir().unwrap();
        let c = build_corpus(&small_spec(), d.path()).unwrap();
        for (p, t) in c.pairs.iter().zip(&c.truth) {
            let k = p.size as u64;
            // one_coh: 2 base counts + 2 per subset; fine overlap: 1 + k
            assert_eq!(t.counter_calls, 2 * ((1 << k) - 1) + 2 + k + 1);
            assert!((-1.0..=1.0).contains(&t.exact));
            let (a, b) = p.positions().unwrap();
            assert_eq!(a.len(), p.size);
            assert_eq!(b.len(), p.size);
        }
    }

    #[test]
    fn stratified_pairs_cover_overlap_strata() {
        let spec = CorpusSpec {
            n_values: vec![20],
            opinion_sizes: vec![5],
            pairs_per_config: 30,
            overlap: OverlapMode::Stratified,
            ..small_spec()
        };
        let d = tempfile::tempdir().unwrap();
        let c = build_corpus(&spec, d.path()).unwrap();
        let negs: BTreeSet<usize> = c.truth.iter().map(|t| t.neg).collect();
        assert!(negs.len() >= 4, "{negs:?}");
        assert!(c.truth.iter().all(|t| t.neg + t.com <= t.size));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small_spec();
        s.opinion_sizes = vec![13];
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.alpha_values = vec![];
        assert!(s.validate().is_err());
        assert!("sideways".parse::<OverlapMode>().is_err());
    }
}
