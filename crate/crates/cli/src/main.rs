use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use assqd_core::bench::{self, ExperimentResult, ExperimentSpec, Method, ResultRow};
use assqd_core::driver::{IterationRecord, RunConfig, RunTrace};
use assqd_core::exact::{exact_lowest_with, EigenpairSet, OracleMethod, OracleOptions};
use assqd_core::models::{ModelKind, ModelMetadata, ModelSpec};
use assqd_core::pauli::PauliHamiltonian;
use assqd_core::sampler::{self, contaminated_distribution, sample_counts, CountsMultiset};

#[derive(Parser)]
#[command(name = "assqd", version, about = "Active-sampling subspace diagonalization from measurement counts")]
struct Cli {
    /// Base seed for disorder, sampling and random baselines.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark Hamiltonian and its metadata sidecar.
    Model(ModelArgs),
    /// Reference eigenpairs of a Hamiltonian.
    Oracle(OracleArgs),
    /// Sample contaminated measurement counts from reference eigenstates.
    Sample(SampleArgs),
    /// Run one method on a counts file.
    Run(RunArgs),
    /// Method comparison sweep over sizes and disorder seeds.
    Bench(SweepArgs),
    /// Acquisition-score ablation sweep.
    Ablate(SweepArgs),
    /// 1-hop versus 2-hop candidate pools.
    Hops(SweepArgs),
    /// Run AS-SQD on an externally produced counts file.
    Ingest(RunArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: ModelKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    coupling: Option<f64>,
    /// Transverse field (TFIM only).
    #[arg(long)]
    field: Option<f64>,
    #[arg(long)]
    disorder_std: Option<f64>,
    /// Metadata path; defaults to `<out>.meta.json`, or stderr without --out.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct HamiltonianSource {
    /// Hamiltonian text file (`coefficient word` per line).
    #[arg(long, conflicts_with_all = ["model", "n"])]
    hamiltonian: Option<PathBuf>,
    /// Generate a preset model instead, with disorder seed --seed.
    #[arg(long, value_parser = parse_kind, requires = "n")]
    model: Option<ModelKind>,
    #[arg(long, requires = "model")]
    n: Option<usize>,
}

impl HamiltonianSource {
    fn load(&self, seed: u64) -> Result<PauliHamiltonian> {
        match (&self.hamiltonian, self.model, self.n) {
            (Some(path), _, _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(PauliHamiltonian::parse(&text).with_context(|| format!("parsing {}", path.display()))?)
            }
            (None, Some(kind), Some(n)) => Ok(ModelSpec::preset(kind, n, seed).build()?.0),
            _ => bail!("give either --hamiltonian or --model with --n"),
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: HamiltonianSource,
    #[arg(long, default_value_t = 2)]
    count: usize,
    #[arg(long, value_enum, default_value_t = OracleChoice::Auto)]
    method: OracleChoice,
    #[arg(long, default_value_t = bench::ORACLE_TOL)]
    tol: f64,
    /// Include eigenvectors in the output.
    #[arg(long)]
    vectors: bool,
    /// Directory caching results by Hamiltonian hash.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleChoice {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: HamiltonianSource,
    #[arg(long, default_value_t = 2000)]
    shots: u64,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Sampling seed; defaults to --seed.
    #[arg(long)]
    sample_seed: Option<u64>,
    /// Counts file; overrides --out.
    #[arg(long)]
    counts_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct LoopArgs {
    #[arg(short = 'K', long = "k", default_value_t = 50)]
    k: usize,
    #[arg(short = 'B', long = "b", default_value_t = 20)]
    b: usize,
    #[arg(short = 'T', long = "t", default_value_t = 10)]
    t: usize,
    #[arg(long, default_value_t = assqd_core::subspace::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = assqd_core::acquisition::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    hops: u8,
}

impl LoopArgs {
    fn config(&self, seed: u64, timing: bool) -> RunConfig {
        RunConfig {
            k: self.k,
            b: self.b,
            t: self.t,
            tau: self.tau,
            eps: self.eps,
            hops: self.hops,
            seed,
            timing,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: HamiltonianSource,
    /// Counts JSON (`n`, optional `bit_order`, `counts`).
    #[arg(long, alias = "counts-in")]
    counts: PathBuf,
    /// standard, random, en, coupling_only, denom_only or diag_only.
    #[arg(long, default_value = "en", value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    params: LoopArgs,
    /// Also compute reference energies and report the error.
    #[arg(long)]
    reference: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_kind, default_value = "heisenberg")]
    model: ModelKind,
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Number of disorder seeds, starting at --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Shots per instance (default: 2000 up to n = 10, 3000 above).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0.2)]
    eta: f64,
    /// Comma-separated methods (bench and ablate only).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[command(flatten)]
    params: LoopArgs,
    /// Write per-run traces as JSON to this path.
    #[arg(long)]
    traces: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: assqd_core::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: assqd_core::Error| e.to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn hamiltonian_hash(h: &PauliHamiltonian) -> String {
    hex::encode(Sha256::digest(h.to_text().as_bytes()))
}

#[derive(Serialize, serde::Deserialize)]
struct OracleReport {
    hamiltonian_sha256: String,
    n: usize,
    energies: Vec<f64>,
    residuals: Vec<f64>,
    degenerate_ground: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    vectors: Option<Vec<assqd_core::exact::StateVector>>,
}

fn oracle(cli: &Cli, args: &OracleArgs) -> Result<()> {
    let h = args.source.load(cli.seed)?;
    let hash = hamiltonian_hash(&h);
    let cached = args
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{hash}-{}{}.json", args.count, if args.vectors { "v" } else { "" })));
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        log::info!("oracle cache hit {}", path.display());
        let report: OracleReport = serde_json::from_reader(File::open(path)?)?;
        return write_json(cli.out.as_deref(), &report);
    }
    let opts = OracleOptions {
        method: match args.method {
            OracleChoice::Auto => OracleMethod::Auto,
            OracleChoice::Dense => OracleMethod::Dense,
            OracleChoice::Lanczos => OracleMethod::Lanczos,
        },
        tol: args.tol,
        ..OracleOptions::default()
    };
    let set = exact_lowest_with(&h, args.count, &opts)?;
    let report = OracleReport {
        hamiltonian_sha256: hash,
        n: h.n(),
        energies: set.energies,
        residuals: set.residuals,
        degenerate_ground: set.degenerate_ground,
        vectors: args.vectors.then_some(set.vectors),
    };
    if let Some(path) = &cached {
        std::fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
        write_json(Some(path), &report)?;
    }
    write_json(cli.out.as_deref(), &report)
}

fn model(cli: &Cli, args: &ModelArgs) -> Result<()> {
    let mut spec = ModelSpec::preset(args.kind, args.n, cli.seed);
    if let Some(j) = args.coupling {
        spec.coupling = j;
    }
    if let Some(f) = args.field {
        spec.transverse_field = f;
    }
    if let Some(s) = args.disorder_std {
        spec.disorder_std = s;
    }
    let (h, fields) = spec.build()?;
    let meta = ModelMetadata::new(&spec, &fields, &h);
    let mut w = open_output(cli.out.as_deref())?;
    w.write_all(h.to_text().as_bytes())?;
    w.flush()?;
    let meta_path = args.meta.clone().or_else(|| {
        cli.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    });
    match meta_path {
        Some(p) => write_json(Some(&p), &meta),
        None => {
            eprintln!("{}", serde_json::to_string_pretty(&meta)?);
            Ok(())
        }
    }
}

fn sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let h = args.source.load(cli.seed)?;
    let set = exact_lowest_with(&h, 2, &OracleOptions::default())?;
    if set.degenerate_ground {
        log::warn!("degenerate ground level; contaminated distribution depends on the solver's basis choice");
    }
    let dist = contaminated_distribution(&set.vectors[0], &set.vectors[1], args.eta)?;
    let counts = sample_counts(&dist, args.shots, args.sample_seed.unwrap_or(cli.seed))?;
    let mut w = open_output(args.counts_out.as_deref().or(cli.out.as_deref()))?;
    sampler::save_counts(&counts, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Reference {
    #[serde(rename = "E0")]
    e0: f64,
    #[serde(rename = "E1")]
    e1: f64,
    err: f64,
    degenerate_ground: bool,
}

#[derive(Serialize)]
struct RunReport<'a> {
    hamiltonian_sha256: String,
    shots: u64,
    trace: &'a RunTrace,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<Reference>,
}

#[derive(Serialize)]
struct RecordRow<'a> {
    method: &'a str,
    iteration: usize,
    energy: f64,
    subspace_size: usize,
    candidate_pool: usize,
    added: usize,
    wall_ms: f64,
    err: Option<f64>,
}

impl<'a> RecordRow<'a> {
    fn new(method: &'a str, r: &IterationRecord, e0: Option<f64>) -> Self {
        Self {
            method,
            iteration: r.iteration,
            energy: r.energy,
            subspace_size: r.subspace_size,
            candidate_pool: r.candidate_pool,
            added: r.added,
            wall_ms: r.wall_ms,
            err: e0.map(|e0| (r.energy - e0).abs()),
        }
    }
}

fn run(cli: &Cli, args: &RunArgs, method: Method) -> Result<()> {
    let h = args.source.load(cli.seed)?;
    let counts: CountsMultiset =
        sampler::load_counts_path(&args.counts).with_context(|| format!("loading {}", args.counts.display()))?;
    if counts.n() != h.n() {
        bail!("counts are for {} qubits, Hamiltonian has {}", counts.n(), h.n());
    }
    let config = args.params.config(cli.seed, cli.timing);
    let trace = match method.run(&h, &counts, &config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.trace)?);
            return Err(e).context("run failed");
        }
    };
    let set: Option<EigenpairSet> = if args.reference {
        Some(exact_lowest_with(&h, 2, &OracleOptions::default())?)
    } else {
        None
    };
    let reference = set.as_ref().map(|s| Reference {
        e0: s.ground_energy(),
        e1: s.first_excited_energy(),
        err: (trace.final_energy - s.ground_energy()).abs(),
        degenerate_ground: s.degenerate_ground,
    });
    if let Some(r) = &reference {
        log::info!("{method}: E = {:.12}, E0 = {:.12}, err = {:.3e}", trace.final_energy, r.e0, r.err);
    }
    match cli.format {
        Format::Json => write_json(
            cli.out.as_deref(),
            &RunReport {
                hamiltonian_sha256: hamiltonian_hash(&h),
                shots: counts.total_shots(),
                trace: &trace,
                reference,
            },
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(open_output(cli.out.as_deref())?);
            let e0 = set.as_ref().map(|s| s.ground_energy());
            for record in &trace.records {
                w.serialize(RecordRow::new(method.as_str(), record, e0))?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn sweep_spec(cli: &Cli, args: &SweepArgs, default_sizes: &[usize], default_methods: &[Method]) -> ExperimentSpec {
    ExperimentSpec {
        model: args.model,
        sizes: args.sizes.clone().unwrap_or_else(|| default_sizes.to_vec()),
        seeds: (cli.seed..cli.seed + args.seeds).collect(),
        shots: args.shots,
        eta: args.eta,
        methods: args.methods.clone().unwrap_or_else(|| default_methods.to_vec()),
        config: args.params.config(cli.seed, cli.timing),
    }
}

fn emit_table(cli: &Cli, rows: &[ResultRow]) -> Result<()> {
    let mut w = open_output(cli.out.as_deref())?;
    match cli.format {
        Format::Csv => bench::write_csv(rows, &mut w)?,
        Format::Json => {
            bench::write_json(rows, &mut w)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn report_medians(result: &ExperimentResult) {
    for m in &result.medians {
        let med = m.median_err.map_or("n/a".to_string(), |e| format!("{e:.3e}"));
        eprintln!(
            "{} n={:<3} {:<14} hops={} median_err={} ({} runs, {} failed)",
            m.model, m.n, m.method, m.hops, med, m.runs, m.failures
        );
    }
}

fn sweep(cli: &Cli, args: &SweepArgs, command: &Command) -> Result<()> {
    let (result, hops) = match command {
        Command::Bench(_) => (
            bench::experiment_scaling(&sweep_spec(cli, args, &[8, 10, 12], &Method::SCALING))?,
            None,
        ),
        Command::Ablate(_) => (
            bench::experiment_ablation(&sweep_spec(cli, args, &[12], &Method::ABLATION))?,
            None,
        ),
        Command::Hops(_) => {
            let h = bench::experiment_hops(&sweep_spec(cli, args, &[12], &[Method::En]))?;
            (h.result.clone(), Some(h))
        }
        _ => unreachable!("not a sweep command"),
    };
    report_medians(&result);
    if let Some(h) = &hops {
        for s in &h.stats {
            eprintln!(
                "n={} seed={} iterations to 1e-6: 1-hop {} 2-hop {} (pools {} / {}, superset {})",
                s.n, s.seed, s.iters_one_hop, s.iters_two_hop, s.pool_one_hop, s.pool_two_hop, s.pool_superset
            );
        }
        eprintln!(
            "median iterations to 1e-6: 1-hop {} 2-hop {}",
            h.median_iters_one_hop, h.median_iters_two_hop
        );
    }
    if let Some(path) = &args.traces {
        write_json(Some(path), &result.traces)?;
    }
    emit_table(cli, &result.rows)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Model(a) => model(&cli, a),
        Command::Oracle(a) => oracle(&cli, a),
        Command::Sample(a) => sample(&cli, a),
        Command::Run(a) => run(&cli, a, a.method),
        Command::Ingest(a) => run(&cli, a, a.method),
        c @ (Command::Bench(a) | Command::Ablate(a) | Command::Hops(a)) => sweep(&cli, a, c),
    }
}
