//! Candidate generation and scoring.
//!
//! Candidates are basis states outside the subspace that the Hamiltonian
//! connects to its dominant support. The default score is the Epstein-Nesbet
//! magnitude `|nu_k|^2 / max(|E_S - H_kk|, eps)` with
//! `nu_k = sum_{s in D} c_s <k|H|s>`; the ablation variants keep one factor
//! of that ratio, and `random` replaces it with seeded uniform draws.
//!
//! With `hops = 2` the pool also contains states two connections away. Those
//! have no direct coupling to `psi_S`, so under `en` they get a chained score:
//! the one-hop candidates carry first-order amplitudes
//! `a_m = nu_m / (E_S - H_mm)`, and a two-hop state is scored like a one-hop
//! one with `nu_k = sum_m <k|H|m> a_m`. That surrogate is this crate's own
//! choice of a two-step score.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{BasisState, PauliHamiltonian};
use crate::subspace::{DominantSupport, RestrictedSolution, Subspace};

/// Default denominator floor `eps`.
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    #[default]
    En,
    CouplingOnly,
    DenomOnly,
    DiagOnly,
    Random,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] = [
        AcquisitionKind::En,
        AcquisitionKind::CouplingOnly,
        AcquisitionKind::DenomOnly,
        AcquisitionKind::DiagOnly,
        AcquisitionKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AcquisitionKind::En => "en",
            AcquisitionKind::CouplingOnly => "coupling_only",
            AcquisitionKind::DenomOnly => "denom_only",
            AcquisitionKind::DiagOnly => "diag_only",
            AcquisitionKind::Random => "random",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "coupling" && *k == Self::CouplingOnly))
            .ok_or_else(|| Error::Config(format!("unknown acquisition kind {s:?}")))
    }
}

/// A candidate with the quantities its score was built from.
///
/// `score` is the ranking key. It is nonnegative for every kind except
/// `diag_only`, whose key `-H_kk` can take either sign.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub state: BasisState,
    pub diagonal: f64,
    pub coupling: Complex64,
    pub score: f64,
    /// 1 for direct neighbours of the dominant support, 2 otherwise.
    pub hops: u8,
}

impl ScoredCandidate {
    /// Signed second-order estimate `|nu_k|^2 / (E_S - H_kk)`.
    pub fn signed_correction(&self, energy: f64) -> f64 {
        self.coupling.norm_sqr() / (energy - self.diagonal)
    }
}

/// Candidate pool, split by distance from the dominant support. Both lists ascend.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidatePool {
    pub one_hop: Vec<BasisState>,
    pub two_hop: Vec<BasisState>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.one_hop.len() + self.two_hop.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every candidate, ascending.
    pub fn states(&self) -> Vec<BasisState> {
        let mut all: Vec<BasisState> = self.one_hop.iter().chain(&self.two_hop).copied().collect();
        all.sort_unstable();
        all
    }
}

/// `(U_{s in D} N(s)) \ S`, plus the next shell when `hops == 2`.
pub fn generate_candidates(
    h: &PauliHamiltonian,
    support: &DominantSupport,
    subspace: &Subspace,
    hops: u8,
) -> Result<CandidatePool> {
    if hops != 1 && hops != 2 {
        return Err(Error::Config(format!("hops must be 1 or 2, got {hops}")));
    }
    let one: BTreeSet<BasisState> = support
        .states
        .iter()
        .flat_map(|&(s, _)| h.connections(s).map(|(k, _)| k))
        .filter(|k| !subspace.contains(*k))
        .collect();
    let two: BTreeSet<BasisState> = if hops == 2 {
        one.iter()
            .flat_map(|&m| h.connections(m).map(|(k, _)| k))
            .filter(|k| !subspace.contains(*k) && !one.contains(k))
            .collect()
    } else {
        BTreeSet::new()
    };
    Ok(CandidatePool {
        one_hop: one.into_iter().collect(),
        two_hop: two.into_iter().collect(),
    })
}

/// `nu_k = sum_{s in D} c_s <k|H|s>`.
pub fn coupling(h: &PauliHamiltonian, support: &DominantSupport, k: BasisState) -> Complex64 {
    support
        .states
        .iter()
        .map(|&(s, c)| c * h.matrix_element(k, s))
        .sum()
}

/// `|nu|^2 / max(|E_S - H_kk|, eps)`.
pub fn en_score(energy: f64, diagonal: f64, nu: Complex64, eps: f64) -> f64 {
    nu.norm_sqr() / (energy - diagonal).abs().max(eps)
}

fn batched_couplings(h: &PauliHamiltonian, support: &DominantSupport, subspace: &Subspace) -> HashMap<BasisState, Complex64> {
    let mut nu: HashMap<BasisState, Complex64> = HashMap::new();
    for &(s, c) in &support.states {
        for (k, amp) in h.connections(s) {
            if !subspace.contains(k) {
                *nu.entry(k).or_default() += c * amp;
            }
        }
    }
    nu
}

/// Scores every candidate in `pool`, in ascending state order.
pub fn score_candidates(
    kind: AcquisitionKind,
    h: &PauliHamiltonian,
    sol: &RestrictedSolution,
    support: &DominantSupport,
    pool: &CandidatePool,
    eps: f64,
    rng_seed: u64,
) -> Result<Vec<ScoredCandidate>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let energy = sol.energy;
    let nu = batched_couplings(h, support, &sol.subspace);
    let denom = |d: f64| (energy - d).abs().max(eps);

    let mut scored: Vec<ScoredCandidate> = Vec::with_capacity(pool.len());
    for &k in &pool.one_hop {
        let diagonal = h.diagonal_element(k);
        let coupling = nu.get(&k).copied().unwrap_or_default();
        let score = match kind {
            AcquisitionKind::En => coupling.norm_sqr() / denom(diagonal),
            AcquisitionKind::CouplingOnly => coupling.norm_sqr(),
            AcquisitionKind::DenomOnly => 1.0 / denom(diagonal),
            AcquisitionKind::DiagOnly => -diagonal,
            AcquisitionKind::Random => 0.0,
        };
        scored.push(ScoredCandidate {
            state: k,
            diagonal,
            coupling,
            score,
            hops: 1,
        });
    }

    if !pool.two_hop.is_empty() {
        let second: HashMap<BasisState, f64> = pool.two_hop.iter().map(|&k| (k, h.diagonal_element(k))).collect();
        let mut chained: HashMap<BasisState, Complex64> = HashMap::new();
        if kind == AcquisitionKind::En {
            for (m, m_entry) in pool.one_hop.iter().zip(&scored) {
                if m_entry.coupling == Complex64::default() {
                    continue;
                }
                let gap = energy - m_entry.diagonal;
                let gap = if gap.abs() < eps { eps.copysign(gap) } else { gap };
                let amplitude = m_entry.coupling / gap;
                for (k, amp) in h.connections(*m) {
                    if second.contains_key(&k) {
                        *chained.entry(k).or_default() += amp * amplitude;
                    }
                }
            }
        }
        for &k in &pool.two_hop {
            let diagonal = second[&k];
            let score = match kind {
                AcquisitionKind::En => chained.get(&k).map_or(0.0, |nu| nu.norm_sqr() / denom(diagonal)),
                AcquisitionKind::CouplingOnly => 0.0,
                AcquisitionKind::DenomOnly => 1.0 / denom(diagonal),
                AcquisitionKind::DiagOnly => -diagonal,
                AcquisitionKind::Random => 0.0,
            };
            scored.push(ScoredCandidate {
                state: k,
                diagonal,
                coupling: Complex64::default(),
                score,
                hops: 2,
            });
        }
        scored.sort_by_key(|c| c.state);
    }

    if kind == AcquisitionKind::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for c in scored.iter_mut() {
            c.score = rng.random::<f64>();
        }
    }
    Ok(scored)
}

/// The `b` highest ranking keys; ties go to the smaller state value.
pub fn select_top_b(scored: &[ScoredCandidate], b: usize) -> Vec<BasisState> {
    let mut order: Vec<&ScoredCandidate> = scored.iter().collect();
    order.sort_by(|x, y| y.score.total_cmp(&x.score).then(x.state.cmp(&y.state)));
    order.into_iter().take(b).map(|c| c.state).collect()
}
