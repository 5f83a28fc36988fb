//! Experiment sweeps over disorder instances: method comparison, acquisition
//! ablations and the 1-hop/2-hop horizon study.
//!
//! Every method at a given `(model, n, seed)` runs on the same sampled counts.
//! Instances are evaluated in parallel; output order depends only on the spec.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{generate_candidates, AcquisitionKind};
use crate::driver::{run_as_sqd, run_standard_sqd_with, RunConfig, RunResult, RunTrace};
use crate::error::{Error, Result};
use crate::exact::{exact_lowest, EigenpairSet, ORACLE_MAX_QUBITS};
use crate::models::{ModelKind, ModelSpec};
use crate::pauli::PauliHamiltonian;
use crate::sampler::{contaminated_distribution, sample_counts, top_k, CountsMultiset};
use crate::subspace::{build_restricted, dominant_support, lowest_eigenpair, Subspace};

/// Residual tolerance for reference eigenpairs.
pub const ORACLE_TOL: f64 = 1e-9;

/// `Err` threshold for the iterations-to-threshold statistic.
pub const HOPS_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Random,
    En,
    CouplingOnly,
    DenomOnly,
    DiagOnly,
}

impl Method {
    pub const SCALING: [Method; 3] = [Method::Standard, Method::Random, Method::En];
    pub const ABLATION: [Method; 4] = [Method::En, Method::CouplingOnly, Method::DenomOnly, Method::DiagOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Random => "random",
            Method::En => "en",
            Method::CouplingOnly => "coupling_only",
            Method::DenomOnly => "denom_only",
            Method::DiagOnly => "diag_only",
        }
    }

    /// Acquisition used by the expansion loop; `None` for standard SQD.
    pub fn acquisition(self) -> Option<AcquisitionKind> {
        match self {
            Method::Standard => None,
            Method::Random => Some(AcquisitionKind::Random),
            Method::En => Some(AcquisitionKind::En),
            Method::CouplingOnly => Some(AcquisitionKind::CouplingOnly),
            Method::DenomOnly => Some(AcquisitionKind::DenomOnly),
            Method::DiagOnly => Some(AcquisitionKind::DiagOnly),
        }
    }

    pub fn run(self, h: &PauliHamiltonian, counts: &CountsMultiset, config: &RunConfig) -> RunResult {
        match self.acquisition() {
            None => run_standard_sqd_with(h, counts, config),
            Some(kind) => run_as_sqd(h, counts, &RunConfig { kind, ..config.clone() }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "standard" => Ok(Method::Standard),
            "random" => Ok(Method::Random),
            "en" | "as_sqd" => Ok(Method::En),
            "coupling_only" | "coupling" => Ok(Method::CouplingOnly),
            "denom_only" => Ok(Method::DenomOnly),
            "diag_only" => Ok(Method::DiagOnly),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Default shot budget: 2000 up to ten qubits, 3000 beyond.
pub fn default_shots(n: usize) -> u64 {
    if n <= 10 {
        2000
    } else {
        3000
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// `None` selects [`default_shots`] per size.
    pub shots: Option<u64>,
    pub eta: f64,
    pub methods: Vec<Method>,
    /// Shared loop parameters; `kind` and `hops` are set per method and arm.
    pub config: RunConfig,
}

impl ExperimentSpec {
    pub fn scaling(model: ModelKind, sizes: Vec<usize>) -> Self {
        Self {
            model,
            sizes,
            seeds: (0..5).collect(),
            shots: None,
            eta: 0.2,
            methods: Method::SCALING.to_vec(),
            config: RunConfig::default(),
        }
    }

    pub fn ablation(model: ModelKind, sizes: Vec<usize>) -> Self {
        Self {
            methods: Method::ABLATION.to_vec(),
            ..Self::scaling(model, sizes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sizes and seeds must be nonempty".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| !(2..=ORACLE_MAX_QUBITS).contains(&n)) {
            return Err(Error::Config(format!("size {n} outside 2..={ORACLE_MAX_QUBITS}")));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::ContaminationRate(self.eta));
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be positive".into()));
        }
        self.config.validate()
    }

    pub fn shots_for(&self, n: usize) -> u64 {
        self.shots.unwrap_or_else(|| default_shots(n))
    }

    fn cells(&self) -> Vec<(usize, u64)> {
        self.sizes.iter().flat_map(|&n| self.seeds.iter().map(move |&s| (n, s))).collect()
    }
}

/// One benchmark instance: Hamiltonian, reference eigenpairs and sampled counts.
#[derive(Clone, Debug)]
pub struct Instance {
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    pub hamiltonian: PauliHamiltonian,
    pub oracle: EigenpairSet,
    pub counts: CountsMultiset,
    pub shots: u64,
    pub eta: f64,
    /// Seed for the random-expansion baseline.
    pub run_seed: u64,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derived seed for stream `stream` of instance `(model, n, seed)`.
pub fn derive_seed(model: ModelKind, n: usize, seed: u64, stream: u64) -> u64 {
    let tag = match model {
        ModelKind::Heisenberg => 1,
        ModelKind::Tfim => 2,
    };
    mix(mix(mix(mix(seed) ^ n as u64) ^ tag) ^ stream)
}

/// Builds the Hamiltonian, solves for `E_0, E_1` and samples contaminated counts.
pub fn prepare_instance(model: ModelKind, n: usize, seed: u64, shots: u64, eta: f64) -> Result<Instance> {
    let (hamiltonian, _) = ModelSpec::preset(model, n, seed).build()?;
    let oracle = exact_lowest(&hamiltonian, 2, ORACLE_TOL)?;
    if oracle.degenerate_ground {
        log::warn!("{model} n={n} seed={seed}: degenerate ground level, contamination is ambiguous");
    }
    let dist = contaminated_distribution(&oracle.vectors[0], &oracle.vectors[1], eta)?;
    let counts = sample_counts(&dist, shots, derive_seed(model, n, seed, 0))?;
    Ok(Instance {
        model,
        n,
        seed,
        hamiltonian,
        oracle,
        counts,
        shots,
        eta,
        run_seed: derive_seed(model, n, seed, 1),
    })
}

/// One table line. Failed cells leave `E_est`/`err` empty and describe the
/// error in `terminated`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub hops: u8,
    pub shots: u64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub tau: f64,
    pub eps: f64,
    #[serde(rename = "E_est")]
    pub e_est: Option<f64>,
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    #[serde(rename = "E1")]
    pub e1: Option<f64>,
    pub err: Option<f64>,
    pub iters: usize,
    pub subspace_size: usize,
    pub wall_ms: f64,
    pub terminated: String,
}

/// A run trace tagged with its cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTrace {
    pub model: ModelKind,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub hops: u8,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    pub degenerate_ground: bool,
    pub trace: RunTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub model: ModelKind,
    pub n: usize,
    pub method: Method,
    pub hops: u8,
    pub median_err: Option<f64>,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub medians: Vec<MedianRow>,
    pub traces: Vec<CellTrace>,
}

impl ExperimentResult {
    /// Median error for `(n, method, hops)`, if any run succeeded.
    pub fn median(&self, n: usize, method: Method, hops: u8) -> Option<f64> {
        self.medians
            .iter()
            .find(|m| m.n == n && m.method == method && m.hops == hops)
            .and_then(|m| m.median_err)
    }
}

/// Standard median; even lengths average the two central values.
pub fn median_abs_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn cell_row(inst: &Instance, method: Method, config: &RunConfig, outcome: &RunResult) -> ResultRow {
    let e0 = inst.oracle.ground_energy();
    let (trace, terminated) = match outcome {
        Ok(t) => (t, t.termination.as_str().to_string()),
        Err(e) => (e.trace.as_ref(), format!("error: {}", e.source)),
    };
    let e_est = outcome.as_ref().ok().map(|t| t.final_energy);
    let hops = if method == Method::Standard { 0 } else { config.hops };
    ResultRow {
        model: inst.model,
        n: inst.n,
        seed: inst.seed,
        method,
        hops,
        shots: inst.shots,
        eta: inst.eta,
        k: config.k,
        b: config.b,
        t: config.t,
        tau: config.tau,
        eps: config.eps,
        e_est,
        e0: Some(e0),
        e1: Some(inst.oracle.first_excited_energy()),
        err: e_est.map(|e| (e - e0).abs()),
        iters: trace.iterations,
        subspace_size: trace.final_subspace.len(),
        wall_ms: trace.wall_ms,
        terminated,
    }
}

fn run_cell(inst: &Instance, method: Method, config: &RunConfig) -> (ResultRow, Option<CellTrace>) {
    let config = RunConfig {
        seed: inst.run_seed,
        ..config.clone()
    };
    let outcome = method.run(&inst.hamiltonian, &inst.counts, &config);
    let row = cell_row(inst, method, &config, &outcome);
    if let Err(e) = &outcome {
        log::warn!("{} n={} seed={} {}: {}", inst.model, inst.n, inst.seed, method, e.source);
    }
    let trace = match outcome {
        Ok(t) => Some(t),
        Err(e) => Some(*e.trace),
    };
    let trace = trace.map(|trace| CellTrace {
        model: inst.model,
        n: inst.n,
        seed: inst.seed,
        method,
        hops: row.hops,
        e0: inst.oracle.ground_energy(),
        e1: inst.oracle.first_excited_energy(),
        degenerate_ground: inst.oracle.degenerate_ground,
        trace,
    });
    (row, trace)
}

fn failed_row(spec: &ExperimentSpec, n: usize, seed: u64, method: Method, hops: u8, err: &Error) -> ResultRow {
    ResultRow {
        model: spec.model,
        n,
        seed,
        method,
        hops,
        shots: spec.shots_for(n),
        eta: spec.eta,
        k: spec.config.k,
        b: spec.config.b,
        t: spec.config.t,
        tau: spec.config.tau,
        eps: spec.config.eps,
        e_est: None,
        e0: None,
        e1: None,
        err: None,
        iters: 0,
        subspace_size: 0,
        wall_ms: 0.0,
        terminated: format!("error: {err}"),
    }
}

/// Medians over seeds for every `(n, method, hops)` present in `rows`.
pub fn summarize(rows: &[ResultRow]) -> Vec<MedianRow> {
    let mut keys: Vec<(ModelKind, usize, Method, u8)> = rows.iter().map(|r| (r.model, r.n, r.method, r.hops)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(model, n, method, hops)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.model == model && r.n == n && r.method == method && r.hops == hops)
                .collect();
            let errs: Vec<f64> = cell.iter().filter_map(|r| r.err).collect();
            MedianRow {
                model,
                n,
                method,
                hops,
                median_err: median_abs_error(&errs).ok(),
                runs: cell.len(),
                failures: cell.len() - errs.len(),
            }
        })
        .collect()
}

type CellOutput = Vec<(ResultRow, Option<CellTrace>)>;

fn sweep<F>(spec: &ExperimentSpec, arms: &[(Method, u8)], per_instance: F) -> Result<ExperimentResult>
where
    F: Fn(&Instance) + Sync,
{
    spec.validate()?;
    let cells = spec.cells();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(n, seed)| match prepare_instance(spec.model, n, seed, spec.shots_for(n), spec.eta) {
            Ok(inst) => {
                per_instance(&inst);
                arms.iter()
                    .map(|&(method, hops)| run_cell(&inst, method, &RunConfig { hops, ..spec.config.clone() }))
                    .collect()
            }
            Err(e) => {
                log::warn!("{} n={n} seed={seed}: instance failed: {e}", spec.model);
                arms.iter()
                    .map(|&(method, hops)| (failed_row(spec, n, seed, method, hops, &e), None))
                    .collect()
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (row, trace) in outputs.into_iter().flatten() {
        rows.push(row);
        traces.extend(trace);
    }
    Ok(ExperimentResult {
        medians: summarize(&rows),
        rows,
        traces,
    })
}

/// Every configured method on identical counts per `(n, seed)`.
pub fn experiment_scaling(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let arms: Vec<(Method, u8)> = spec.methods.iter().map(|&m| (m, spec.config.hops)).collect();
    sweep(spec, &arms, |_| {})
}

/// Acquisition variants; restricted to expansion methods.
pub fn experiment_ablation(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.methods.contains(&Method::Standard) {
        return Err(Error::Config("ablation compares acquisition variants; standard SQD has none".into()));
    }
    experiment_scaling(spec)
}

/// Paired 1-hop/2-hop statistics for one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopStats {
    pub n: usize,
    pub seed: u64,
    /// First iteration with `Err <= HOPS_THRESHOLD`; `T + 1` if never reached.
    pub iters_one_hop: usize,
    pub iters_two_hop: usize,
    pub pool_one_hop: usize,
    pub pool_two_hop: usize,
    /// The 2-hop pool from the initial solve contains the 1-hop pool.
    pub pool_superset: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopsResult {
    pub result: ExperimentResult,
    pub stats: Vec<HopStats>,
    pub median_iters_one_hop: f64,
    pub median_iters_two_hop: f64,
}

/// Iterations until `|E_t - E_0| <= threshold`, or `T + 1` (censored).
pub fn iterations_to_threshold(trace: &RunTrace, e0: f64, threshold: f64) -> usize {
    trace
        .records
        .iter()
        .find(|r| (r.energy - e0).abs() <= threshold)
        .map_or(trace.config.t + 1, |r| r.iteration)
}

fn initial_pools(inst: &Instance, config: &RunConfig) -> Result<(Vec<u64>, Vec<u64>)> {
    let s0 = Subspace::new(top_k(&inst.counts, config.k));
    let sol = lowest_eigenpair(&build_restricted(&inst.hamiltonian, &s0)?)?;
    let support = dominant_support(&sol, config.tau)?;
    let pool = |hops| -> Result<Vec<u64>> {
        let mut v: Vec<u64> = generate_candidates(&inst.hamiltonian, &support, &sol.subspace, hops)?
            .states()
            .into_iter()
            .map(|b| b.0)
            .collect();
        v.sort_unstable();
        Ok(v)
    };
    Ok((pool(1)?, pool(2)?))
}

/// AS-SQD with 1-hop and 2-hop candidate pools under the same `B` and `T`.
pub fn experiment_hops(spec: &ExperimentSpec) -> Result<HopsResult> {
    let arms = [(Method::En, 1u8), (Method::En, 2u8)];
    let pools = std::sync::Mutex::new(Vec::new());
    let result = sweep(spec, &arms, |inst| {
        let entry = initial_pools(inst, &spec.config).ok();
        pools.lock().expect("pool lock").push(((inst.n, inst.seed), entry));
    })?;
    let pools = pools.into_inner().expect("pool lock");

    let mut stats = Vec::new();
    for (n, seed) in spec.cells() {
        let find = |hops: u8| {
            result
                .traces
                .iter()
                .find(|c| c.n == n && c.seed == seed && c.hops == hops)
                .map(|c| iterations_to_threshold(&c.trace, c.e0, HOPS_THRESHOLD))
                .unwrap_or(spec.config.t + 1)
        };
        let (one, two) = pools
            .iter()
            .find(|(key, _)| *key == (n, seed))
            .and_then(|(_, p)| p.clone())
            .unwrap_or_default();
        let superset = one.iter().all(|b| two.binary_search(b).is_ok());
        stats.push(HopStats {
            n,
            seed,
            iters_one_hop: find(1),
            iters_two_hop: find(2),
            pool_one_hop: one.len(),
            pool_two_hop: two.len(),
            pool_superset: superset,
        });
    }
    let med = |f: fn(&HopStats) -> usize| {
        median_abs_error(&stats.iter().map(|s| f(s) as f64).collect::<Vec<_>>()).unwrap_or(f64::NAN)
    };
    Ok(HopsResult {
        median_iters_one_hop: med(|s| s.iters_one_hop),
        median_iters_two_hop: med(|s| s.iters_two_hop),
        stats,
        result,
    })
}

pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

/// JSON table with medians; traces are written separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub medians: Vec<MedianRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self {
            medians: summarize(&rows),
            rows,
        }
    }
}

pub fn write_json<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &ResultTable::new(rows.to_vec()))?;
    Ok(())
}

pub fn read_json<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let table: ResultTable = serde_json::from_reader(reader)?;
    Ok(table.rows)
}
