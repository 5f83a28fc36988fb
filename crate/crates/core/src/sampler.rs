//! Finite-shot measurement data: the contaminated preparation model, seeded
//! multinomial sampling, the counts JSON wire format, and top-K selection.
//!
//! Counts files look like
//!
//! ```json
//! {"n": 2, "bit_order": "qubit0_first", "counts": {"00": 500, "11": 300, "01": 200}}
//! ```
//!
//! With `qubit0_first` (the default) character `i` of a key is qubit `i`;
//! `qubit0_last` reverses that, matching most cloud-backend exports.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::StateVector;
use crate::pauli::{check_qubits, BasisState};

const NORMALIZATION_TOL: f64 = 1e-10;

/// Outcome distribution `p(b)` over all `2^n` basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityModel {
    pub n: usize,
    pub probs: Vec<f64>,
    pub eta: f64,
}

impl ProbabilityModel {
    pub fn new(n: usize, probs: Vec<f64>, eta: f64) -> Result<Self> {
        check_qubits(n)?;
        if probs.len() != 1usize << n {
            return Err(Error::Dimension {
                expected: 1usize << n,
                got: probs.len(),
            });
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Config("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { n, probs, eta })
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// `p(b) = (1 - eta) |<b|psi0>|^2 + eta |<b|psi1>|^2`.
pub fn contaminated_distribution(psi0: &StateVector, psi1: &StateVector, eta: f64) -> Result<ProbabilityModel> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::ContaminationRate(eta));
    }
    if psi0.n != psi1.n {
        return Err(Error::Dimension {
            expected: psi0.dim(),
            got: psi1.dim(),
        });
    }
    let probs = psi0
        .amplitudes
        .iter()
        .zip(&psi1.amplitudes)
        .map(|(a, b)| (1.0 - eta) * a.norm_sqr() + eta * b.norm_sqr())
        .collect();
    ProbabilityModel::new(psi0.n, probs, eta)
}

/// A multiset of measured basis states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountsMultiset {
    n: usize,
    counts: BTreeMap<BasisState, u64>,
    total_shots: u64,
}

impl CountsMultiset {
    /// Zero counts are dropped; states must fit in `n` qubits.
    pub fn new<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisState, u64)>,
    {
        check_qubits(n)?;
        let mut counts = BTreeMap::new();
        let mut total_shots = 0u64;
        for (b, c) in entries {
            BasisState::new(b.0, n)?;
            if c == 0 {
                continue;
            }
            *counts.entry(b).or_insert(0) += c;
            total_shots += c;
        }
        Ok(Self { n, counts, total_shots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, b: BasisState) -> u64 {
        self.counts.get(&b).copied().unwrap_or(0)
    }

    /// Entries in ascending state order.
    pub fn iter(&self) -> impl Iterator<Item = (BasisState, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b, c))
    }

    /// Total-variation distance between the empirical distribution and `model`.
    pub fn tv_distance(&self, model: &ProbabilityModel) -> f64 {
        let shots = self.total_shots as f64;
        let mut dist = 0.0;
        for (i, &p) in model.probs.iter().enumerate() {
            let q = self.get(BasisState(i as u64)) as f64 / shots;
            dist += (p - q).abs();
        }
        0.5 * dist
    }

    /// Merges two multisets over the same register.
    pub fn merged(&self, other: &CountsMultiset) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Self::new(self.n, self.iter().chain(other.iter()))
    }
}

/// Draws `shots` outcomes from `model` by inverse CDF over its nonzero support.
pub fn sample_counts(model: &ProbabilityModel, shots: u64, seed: u64) -> Result<CountsMultiset> {
    if shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    let support: Vec<(u64, f64)> = model
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i as u64, p))
        .collect();
    let mut cdf = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for &(_, p) in &support {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = vec![0u64; support.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let idx = cdf.partition_point(|&c| c <= u).min(support.len() - 1);
        tally[idx] += 1;
    }
    CountsMultiset::new(
        model.n,
        support.iter().zip(tally).map(|(&(b, _), c)| (BasisState(b), c)),
    )
}

/// The `k` most frequent states; ties go to the smaller state value.
pub fn top_k(counts: &CountsMultiset, k: usize) -> Vec<BasisState> {
    let mut entries: Vec<(BasisState, u64)> = counts.iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.into_iter().take(k).map(|(b, _)| b).collect()
}

/// Key convention of a counts file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    /// Character `i` is qubit `i`.
    #[default]
    Qubit0First,
    /// Character `n-1-i` is qubit `i`.
    Qubit0Last,
}

#[derive(Serialize, Deserialize)]
struct CountsFile {
    n: usize,
    #[serde(default)]
    bit_order: BitOrder,
    counts: BTreeMap<String, serde_json::Value>,
}

fn parse_key(key: &str, n: usize, order: BitOrder) -> Result<BasisState> {
    let bad = |reason: String| Error::CountsKey {
        key: key.to_string(),
        reason,
    };
    let len = key.chars().count();
    if len != n {
        return Err(bad(format!("length {len}, expected {n}")));
    }
    let mut value = 0u64;
    for (pos, ch) in key.chars().enumerate() {
        let qubit = match order {
            BitOrder::Qubit0First => pos,
            BitOrder::Qubit0Last => n - 1 - pos,
        };
        match ch {
            '0' => {}
            '1' => value |= 1 << qubit,
            other => return Err(bad(format!("non-binary character {other:?}"))),
        }
    }
    Ok(BasisState(value))
}

pub fn load_counts<R: Read>(reader: R) -> Result<CountsMultiset> {
    let file: CountsFile = serde_json::from_reader(reader)?;
    check_qubits(file.n)?;
    let mut entries = Vec::with_capacity(file.counts.len());
    for (key, value) in &file.counts {
        let state = parse_key(key, file.n, file.bit_order)?;
        let count = match value.as_i64() {
            Some(c) if c < 0 => {
                return Err(Error::CountsKey {
                    key: key.clone(),
                    reason: format!("negative count {c}"),
                })
            }
            Some(c) => c as u64,
            None => match value.as_u64() {
                Some(c) => c,
                None => {
                    return Err(Error::CountsKey {
                        key: key.clone(),
                        reason: format!("count {value} is not an integer"),
                    })
                }
            },
        };
        entries.push((state, count));
    }
    CountsMultiset::new(file.n, entries)
}

pub fn load_counts_path(path: impl AsRef<Path>) -> Result<CountsMultiset> {
    load_counts(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes `qubit0_first` JSON with keys in lexicographic order.
pub fn save_counts<W: Write>(counts: &CountsMultiset, mut writer: W) -> Result<()> {
    let file = CountsFile {
        n: counts.n,
        bit_order: BitOrder::Qubit0First,
        counts: counts
            .iter()
            .map(|(b, c)| (b.to_bitstring(counts.n), serde_json::Value::from(c)))
            .collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn save_counts_path(counts: &CountsMultiset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    save_counts(counts, &mut w)?;
    w.flush()?;
    Ok(())
}
