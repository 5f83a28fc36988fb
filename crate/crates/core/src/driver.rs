//! End-to-end runs: standard SQD, active-sampling SQD and its random-expansion
//! baseline.
//!
//! An expansion run solves on the top-K states, then repeats up to `T` times:
//! take the dominant support, generate and score candidates, add the best `B`,
//! and re-solve. The restricted matrix grows in place, so each iteration only
//! evaluates the new rows. Record `t` of the trace holds the solve after `t`
//! expansions; record 0 is the standard-SQD energy on the same counts.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{generate_candidates, score_candidates, select_top_b, AcquisitionKind, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::pauli::{BasisState, PauliHamiltonian};
use crate::sampler::{top_k, CountsMultiset};
use crate::subspace::{build_restricted, dominant_support, lowest_eigenpair, RestrictedSolution, Subspace, DEFAULT_TAU};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Initial subspace size (top-K measured states).
    #[serde(rename = "K")]
    pub k: usize,
    /// States added per iteration.
    #[serde(rename = "B")]
    pub b: usize,
    /// Iteration budget.
    #[serde(rename = "T")]
    pub t: usize,
    pub tau: f64,
    pub eps: f64,
    pub kind: AcquisitionKind,
    pub hops: u8,
    pub seed: u64,
    /// Record wall-clock time per iteration. Off by default so traces are
    /// byte-for-byte reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 50,
            b: 20,
            t: 10,
            tau: DEFAULT_TAU,
            eps: DEFAULT_EPS,
            kind: AcquisitionKind::En,
            hops: 1,
            seed: 0,
            timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.b == 0 || self.t == 0 {
            return Err(Error::Config("K, B and T must all be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1)", self.tau)));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.hops != 1 && self.hops != 2 {
            return Err(Error::Config(format!("hops must be 1 or 2, got {}", self.hops)));
        }
        Ok(())
    }

    /// Upper bound on the final subspace size, `K + T * B`.
    pub fn budget(&self) -> usize {
        self.k + self.t * self.b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// All `T` iterations ran (or no expansion was requested).
    Budget,
    /// The candidate pool was empty.
    EmptyCandidates,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Budget => "budget",
            Termination::EmptyCandidates => "empty-candidates",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Expansions performed before this solve.
    pub iteration: usize,
    pub energy: f64,
    pub subspace_size: usize,
    /// Candidates proposed from this solve; 0 for the final record.
    pub candidate_pool: usize,
    /// States added from this solve's pool.
    pub added: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub config: RunConfig,
    pub records: Vec<IterationRecord>,
    /// Energy of the last successful solve (NaN if none succeeded).
    pub final_energy: f64,
    pub final_subspace: Vec<BasisState>,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_ms: f64,
}

impl RunTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    pub fn initial_subspace(&self) -> &[BasisState] {
        let k = self.records.first().map_or(0, |r| r.subspace_size);
        &self.final_subspace[..k.min(self.final_subspace.len())]
    }
}

/// A failed run, with the trace up to the failing iteration.
#[derive(Debug, thiserror::Error)]
#[error("run failed after {} records: {source}", trace.records.len())]
pub struct RunError {
    pub trace: Box<RunTrace>,
    #[source]
    pub source: Error,
}

pub type RunResult = std::result::Result<RunTrace, RunError>;

struct Clock {
    enabled: bool,
    start: Instant,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            start: Instant::now(),
        }
    }

    fn lap_ms(&mut self) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let now = Instant::now();
        let ms = now.duration_since(self.start).as_secs_f64() * 1e3;
        self.start = now;
        ms
    }
}

fn method_name(cfg: &RunConfig) -> String {
    match cfg.kind {
        AcquisitionKind::Random => "random".to_string(),
        kind => kind.as_str().to_string(),
    }
}

/// Single restricted solve on the top-K measured states.
pub fn run_standard_sqd(h: &PauliHamiltonian, counts: &CountsMultiset, k: usize) -> RunResult {
    run_standard_sqd_with(
        h,
        counts,
        &RunConfig {
            k,
            ..RunConfig::default()
        },
    )
}

/// [`run_standard_sqd`] reading `k` and `timing` from `config`; the
/// expansion parameters are only recorded.
pub fn run_standard_sqd_with(h: &PauliHamiltonian, counts: &CountsMultiset, config: &RunConfig) -> RunResult {
    let cfg = config.clone();
    let k = cfg.k;
    let mut trace = RunTrace {
        method: "standard".into(),
        config: cfg.clone(),
        records: Vec::new(),
        final_energy: f64::NAN,
        final_subspace: Vec::new(),
        iterations: 0,
        termination: Termination::Budget,
        wall_ms: 0.0,
    };
    let fail = |trace: RunTrace, source: Error| RunError {
        trace: Box::new(trace),
        source,
    };
    if let Err(e) = check_inputs(h, counts, k) {
        return Err(fail(trace, e));
    }
    let mut clock = Clock::new(cfg.timing);
    let subspace = Subspace::new(top_k(counts, k));
    let sol = match build_restricted(h, &subspace).and_then(|m| lowest_eigenpair(&m)) {
        Ok(s) => s,
        Err(e) => return Err(fail(trace, e)),
    };
    let wall = clock.lap_ms();
    trace.records.push(IterationRecord {
        iteration: 0,
        energy: sol.energy,
        subspace_size: subspace.len(),
        candidate_pool: 0,
        added: 0,
        wall_ms: wall,
    });
    trace.final_energy = sol.energy;
    trace.final_subspace = subspace.states().to_vec();
    trace.wall_ms = wall;
    Ok(trace)
}

fn check_inputs(h: &PauliHamiltonian, counts: &CountsMultiset, k: usize) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::Config("counts are empty".into()));
    }
    if counts.n() != h.n() {
        return Err(Error::Dimension {
            expected: h.n(),
            got: counts.n(),
        });
    }
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    Ok(())
}

/// Expansion run driven by `config.kind`.
pub fn run_as_sqd(h: &PauliHamiltonian, counts: &CountsMultiset, config: &RunConfig) -> RunResult {
    let mut trace = RunTrace {
        method: method_name(config),
        config: config.clone(),
        records: Vec::new(),
        final_energy: f64::NAN,
        final_subspace: Vec::new(),
        iterations: 0,
        termination: Termination::Budget,
        wall_ms: 0.0,
    };
    match expand(h, counts, config, &mut trace) {
        Ok(()) => Ok(trace),
        Err(source) => Err(RunError {
            trace: Box::new(trace),
            source,
        }),
    }
}

/// Expansion with seeded uniform scores in place of the acquisition function.
pub fn run_random_sqd(h: &PauliHamiltonian, counts: &CountsMultiset, config: &RunConfig) -> RunResult {
    let cfg = RunConfig {
        kind: AcquisitionKind::Random,
        ..config.clone()
    };
    run_as_sqd(h, counts, &cfg)
}

fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    // splitmix64 finalizer over (seed, iteration)
    let mut z = seed ^ (iteration as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn expand(h: &PauliHamiltonian, counts: &CountsMultiset, cfg: &RunConfig, trace: &mut RunTrace) -> Result<()> {
    cfg.validate()?;
    check_inputs(h, counts, cfg.k)?;
    let mut clock = Clock::new(cfg.timing);
    let start = Instant::now();

    let initial = Subspace::new(top_k(counts, cfg.k));
    let mut matrix = build_restricted(h, &initial)?;
    let mut sol: RestrictedSolution = lowest_eigenpair(&matrix)?;
    let mut record = IterationRecord {
        iteration: 0,
        energy: sol.energy,
        subspace_size: matrix.dim(),
        candidate_pool: 0,
        added: 0,
        wall_ms: 0.0,
    };
    trace.final_energy = sol.energy;
    trace.final_subspace = sol.subspace.states().to_vec();

    for t in 1..=cfg.t {
        let support = dominant_support(&sol, cfg.tau)?;
        let pool = generate_candidates(h, &support, &sol.subspace, cfg.hops)?;
        record.candidate_pool = pool.len();
        if pool.is_empty() {
            record.wall_ms = clock.lap_ms();
            trace.records.push(record);
            trace.termination = Termination::EmptyCandidates;
            trace.wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            return Ok(());
        }
        let scored = score_candidates(cfg.kind, h, &sol, &support, &pool, cfg.eps, iteration_seed(cfg.seed, t))?;
        let chosen = select_top_b(&scored, cfg.b);
        record.added = matrix.extend(h, &chosen);
        record.wall_ms = clock.lap_ms();
        trace.records.push(record);

        sol = lowest_eigenpair(&matrix)?;
        trace.iterations = t;
        trace.final_energy = sol.energy;
        trace.final_subspace = sol.subspace.states().to_vec();
        record = IterationRecord {
            iteration: t,
            energy: sol.energy,
            subspace_size: matrix.dim(),
            candidate_pool: 0,
            added: 0,
            wall_ms: 0.0,
        };
    }
    record.wall_ms = clock.lap_ms();
    trace.records.push(record);
    trace.termination = Termination::Budget;
    trace.wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    Ok(())
}
