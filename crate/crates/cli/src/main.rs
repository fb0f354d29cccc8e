use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use num_rational::BigRational;
use serde_json::{json, Value};

use mutcoh::argmap::{
    fit_premise_distribution, generate, load_json, save_json, ArgumentMap, GenParams,
    PremiseConvention, PremiseDistribution,
};
use mutcoh::coherence::{CoherenceEngine, CoherenceValue, DEFAULT_SUBSET_CAP};
use mutcoh::counter::{Counter, CounterBackend, CounterConfig};
use mutcoh::evaluation::{
    build_corpus, load_records, mse_table, robustness_groups, run_methods, scatter_data,
    write_records, ColorKey, Corpus, CorpusSpec, EvalMethod, GroupKey, OverlapMode, RunConfig,
    BETA_GRID,
};
use mutcoh::heuristics::{approximate_one_coh, ApproxConfig, EmConfig, Method, WeightMode};
use mutcoh::logic::{parse_dimacs, Position};

#[derive(Parser)]
#[command(name = "mutcoh", version, about = "Mutual coherence of opinions over argument maps")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Counter backend: "internal" or a command template containing {input}
    #[arg(long, global = true, env = "MUTCOH_COUNTER", default_value = "internal")]
    counter: String,
    /// Per-query counter timeout in seconds
    #[arg(long, global = true)]
    counter_timeout: Option<f64>,
    /// Write the primary output here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Log progress to stderr
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic argument map (JSON)
    Generate(GenerateArgs),
    /// Exact one-sided and mutual coherence
    Exact(ExactArgs),
    /// Approximate one-sided coherence
    Approx(ApproxArgs),
    /// Build or reuse an evaluation corpus and write error tables
    Eval(EvalArgs),
    /// Fit the premise-count distribution of a map
    FitD(FitArgs),
    /// Raw conditioned model count
    Count(CountArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    psi: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Premise-count distribution, e.g. 2:0.19,3:0.23,4:0.32,5:0.26
    #[arg(long, default_value = "2:0.19,3:0.23,4:0.32,5:0.26")]
    d: PremiseDistribution,
    #[arg(long, default_value_t = 1000)]
    max_attempts: usize,
    /// prose (drawn count = premises) or pseudocode (drawn count includes the conclusion)
    #[arg(long, default_value = "prose")]
    convention: PremiseConvention,
    /// Also write the map's edge list (CSV) here
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args)]
struct PairArgs {
    /// Argument map JSON
    #[arg(long)]
    map: PathBuf,
    /// Opinion A as signed integers, e.g. 1,-4,9
    #[arg(long, allow_hyphen_values = true, value_parser = parse_position)]
    a: Position,
    /// Opinion B as signed integers
    #[arg(long, allow_hyphen_values = true, value_parser = parse_position)]
    b: Position,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Largest opinion size computed without --force
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    cap: usize,
    /// Ignore the size cap
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ApproxArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, default_value = "filtered-average-mu2")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// simpler (syntactic overlap) or finer (entailment under the arguments)
    #[arg(long, default_value = "simpler")]
    weights: WeightMode,
    /// Spread of all three mixture components
    #[arg(long, default_value_t = mutcoh::heuristics::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    em_tolerance: f64,
    #[arg(long, default_value_t = 100)]
    em_max_iters: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus directory; an existing corpus is reused unless --rebuild
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    rebuild: bool,
    #[arg(long, value_delimiter = ',', default_value = "30,50")]
    n_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5")]
    alpha_values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "3,5")]
    k_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "5,7")]
    opinion_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    psi: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value = "2:0.19,3:0.23,4:0.32,5:0.26")]
    d: PremiseDistribution,
    #[arg(long, default_value_t = 1)]
    maps_per_config: usize,
    #[arg(long, default_value_t = 3)]
    pairs_per_config: usize,
    /// uncontrolled, stratified or mixed
    #[arg(long, default_value = "uncontrolled")]
    overlap: OverlapMode,
    /// Ground-truth time budget per pair, in seconds
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    /// Methods to evaluate ("exact" or estimator names)
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fit-mu2,filtered-fit-mu2,average-mu2,filtered-average-mu2,direct,average,direct-slope"
    )]
    methods: Vec<EvalMethod>,
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long, default_value = "simpler")]
    weights: WeightMode,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    map: PathBuf,
}

#[derive(Args)]
struct CountArgs {
    /// DIMACS CNF file
    #[arg(long, conflicts_with = "map", required_unless_present = "map")]
    cnf: Option<PathBuf>,
    /// Argument map JSON
    #[arg(long)]
    map: Option<PathBuf>,
    /// Condition as signed integers
    #[arg(long, allow_hyphen_values = true, value_parser = parse_position)]
    condition: Option<Position>,
}

fn parse_position(s: &str) -> Result<Position, String> {
    let lits = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Position::from_dimacs(&lits).map_err(|e| e.to_string())
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json(output: &Option<PathBuf>, value: &Value) -> Result<()> {
    emit(output, &format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn counter_config(global: &Global) -> Result<CounterConfig> {
    let backend = CounterBackend::parse(&global.counter).context("invalid --counter")?;
    let timeout = match global.counter_timeout {
        Some(t) if !(t > 0.0) || !t.is_finite() => bail!("--counter-timeout must be positive"),
        Some(t) => Some(Duration::from_secs_f64(t)),
        None => None,
    };
    Ok(CounterConfig {
        backend,
        timeout,
        ..CounterConfig::default()
    })
}

fn read_map(path: &Path) -> Result<ArgumentMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_json(&text).with_context(|| format!("loading map {}", path.display()))
}

fn coherence_json(v: &CoherenceValue) -> Value {
    json!({ "value": v.value, "exact": v.exact.to_string() })
}

fn cmd_generate(global: &Global, args: &GenerateArgs) -> Result<()> {
    let params = GenParams {
        max_attempts: args.max_attempts,
        convention: args.convention,
        ..GenParams::new(args.n, args.k, args.alpha, args.psi, args.gamma, args.d.clone())
    };
    let map = generate(&params, global.seed).context("generation failed")?;
    info!("generated {} arguments", map.arguments().len());
    if let Some(path) = &args.edges {
        fs::write(path, map.graph().to_edge_list())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&global.output, &save_json(&map))
}

fn cmd_exact(global: &Global, args: &ExactArgs) -> Result<()> {
    let map = read_map(&args.pair.map)?;
    let cap = if args.force { usize::MAX } else { args.cap };
    let engine = CoherenceEngine::with_config(&map, counter_config(global)?).subset_cap(cap);
    let (a, b) = (&args.pair.a, &args.pair.b);
    let ab = engine.one_coh(a, b)?;
    let ba = engine.one_coh(b, a)?;
    let mutual = CoherenceValue::from_exact((&ab.exact + &ba.exact) / BigRational::from_integer(2.into()));
    emit_json(
        &global.output,
        &json!({
            "a": a.to_dimacs(),
            "b": b.to_dimacs(),
            "one_coh_ab": coherence_json(&ab),
            "one_coh_ba": coherence_json(&ba),
            "mut_coh": coherence_json(&mutual),
            "counter_calls": engine.counter().calls(),
        }),
    )
}

fn cmd_approx(global: &Global, args: &ApproxArgs) -> Result<()> {
    if !(args.sigma > 0.0) || !args.sigma.is_finite() {
        bail!("--sigma must be positive");
    }
    let map = read_map(&args.pair.map)?;
    let engine = CoherenceEngine::with_config(&map, counter_config(global)?);
    let config = ApproxConfig {
        method: args.method,
        beta: args.beta,
        weight_mode: args.weights,
        em: EmConfig {
            tolerance: args.em_tolerance,
            max_iters: args.em_max_iters,
            sigmas: [args.sigma; 3],
        },
        seed: global.seed,
    };
    let report = approximate_one_coh(&engine, &args.pair.a, &args.pair.b, &config)?;
    emit_json(&global.output, &serde_json::to_value(report)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_eval(global: &Global, args: &EvalArgs) -> Result<()> {
    if global.counter.trim() != "internal" {
        warn!("eval always uses the internal counter");
    }
    let dir = &args.corpus;
    let corpus = if dir.join("corpus.json").exists() && !args.rebuild {
        info!("reusing corpus in {}", dir.display());
        Corpus::load(dir)?
    } else {
        let spec = CorpusSpec {
            n_values: args.n_values.clone(),
            alpha_values: args.alpha_values.clone(),
            k_values: args.k_values.clone(),
            psi: args.psi,
            gamma: args.gamma,
            d: args.d.clone(),
            opinion_sizes: args.opinion_sizes.clone(),
            maps_per_config: args.maps_per_config,
            pairs_per_config: args.pairs_per_config,
            overlap: args.overlap,
            time_budget_secs: args.time_budget,
            seed: global.seed,
        };
        build_corpus(&spec, dir)?
    };
    let betas = args.betas.clone().unwrap_or_else(|| BETA_GRID.to_vec());
    if betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        bail!("betas must be positive");
    }
    let config = RunConfig {
        methods: args.methods.clone(),
        betas: betas.clone(),
        weight_mode: args.weights,
        jobs: args.jobs,
        ..RunConfig::default()
    };
    let records = run_methods(&corpus, &config)?;
    write_records(dir, &records)?;
    // re-read to verify the stored checksums
    let stored = load_records(dir)?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        warn!("{failures} records failed; see the error column");
    }

    let names: Vec<String> = args.methods.iter().map(|m| m.name().to_string()).collect();
    let table = mse_table(&stored, &names, &betas);
    write_text(&dir.join("mse.csv"), &table.to_csv())?;

    let scatter = dir.join("scatter");
    fs::create_dir_all(&scatter).with_context(|| format!("creating {}", scatter.display()))?;
    let robustness = dir.join("robustness");
    fs::create_dir_all(&robustness).with_context(|| format!("creating {}", robustness.display()))?;
    for key in [GroupKey::OpinionSize, GroupKey::N, GroupKey::Alpha] {
        let mut w = csv::Writer::from_writer(Vec::new());
        for m in &names {
            for &beta in &betas {
                for row in robustness_groups(&stored, key, m, beta) {
                    w.serialize(row)?;
                }
            }
        }
        write_text(&robustness.join(format!("{}.csv", key.name())), &String::from_utf8(w.into_inner()?)?)?;
    }
    for (m, method) in names.iter().zip(&args.methods) {
        let color = match method {
            EvalMethod::Approx(x) if x.is_sampled() => ColorKey::Beta,
            _ => ColorKey::Neg,
        };
        for &beta in &betas {
            let text = scatter_data(&stored, m, beta, color);
            write_text(&scatter.join(format!("{m}_beta{beta}.csv")), &text)?;
        }
    }

    let mse: serde_json::Map<String, Value> = names
        .iter()
        .map(|m| {
            let per_beta: serde_json::Map<String, Value> = betas
                .iter()
                .map(|&b| (b.to_string(), table.get(m, b).map_or(Value::Null, Value::from)))
                .collect();
            (m.clone(), Value::Object(per_beta))
        })
        .collect();
    emit_json(
        &global.output,
        &json!({
            "corpus": dir,
            "maps": corpus.maps.len(),
            "pairs": corpus.pairs.len(),
            "skipped": corpus.manifest.skipped.len(),
            "finer_differs_fraction": corpus.finer_differs_fraction(),
            "records": records.len(),
            "failed_records": failures,
            "mse": mse,
        }),
    )
}

fn cmd_fit_d(global: &Global, args: &FitArgs) -> Result<()> {
    let map = read_map(&args.map)?;
    let d = fit_premise_distribution(&map)?;
    emit_json(
        &global.output,
        &json!({
            "arguments": map.arguments().len(),
            "distribution": d.to_string(),
            "probabilities": d.as_map(),
        }),
    )
}

fn cmd_count(global: &Global, args: &CountArgs) -> Result<()> {
    let formula = match (&args.cnf, &args.map) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(path)) => read_map(path)?.to_cnf(),
        (None, None) => bail!("one of --cnf or --map is required"),
    };
    let counter = Counter::with_config(formula, counter_config(global)?);
    let condition = args.condition.clone().unwrap_or_default();
    let count = counter.count(&condition)?;
    emit(&global.output, &format!("s mc {count}\n"))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(&cli.global, a),
        Command::Exact(a) => cmd_exact(&cli.global, a),
        Command::Approx(a) => cmd_approx(&cli.global, a),
        Command::Eval(a) => cmd_eval(&cli.global, a),
        Command::FitD(a) => cmd_fit_d(&cli.global, a),
        Command::Count(a) => cmd_count(&cli.global, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
