//! Disordered spin-chain benchmarks: the periodic Heisenberg chain with random
//! longitudinal fields and the transverse-field Ising chain with longitudinal
//! disorder.
//!
//! Disorder is drawn from a ChaCha8 stream seeded with `seed_from_u64(seed)`
//! and mapped through `rand_distr::StandardNormal` (ziggurat), then scaled by
//! the standard deviation. Values are reproducible for a given build and
//! dependency set; they are not promised to match other implementations.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliHamiltonian, PauliTerm};

/// Name recorded in metadata for the disorder generator.
pub const DISORDER_GENERATOR: &str = "chacha8(seed_from_u64) + standard-normal(ziggurat) * std";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heisenberg,
    Tfim,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Heisenberg => "heisenberg",
            ModelKind::Tfim => "tfim",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heisenberg" => Ok(ModelKind::Heisenberg),
            "tfim" => Ok(ModelKind::Tfim),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Everything needed to regenerate a benchmark Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    /// Bond coupling `J`.
    pub coupling: f64,
    /// Uniform transverse field `h_x`; ignored for Heisenberg.
    pub transverse_field: f64,
    /// Standard deviation of the random longitudinal fields.
    pub disorder_std: f64,
    pub seed: u64,
}

impl ModelSpec {
    /// `J = 1`, `h = 0.5`.
    pub fn heisenberg(n: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Heisenberg,
            n,
            coupling: 1.0,
            transverse_field: 0.0,
            disorder_std: 0.5,
            seed,
        }
    }

    /// `J = 1`, `h_x = 1`, `g_i ~ N(0, 0.5^2)`.
    pub fn tfim(n: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Tfim,
            n,
            coupling: 1.0,
            transverse_field: 1.0,
            disorder_std: 0.5,
            seed,
        }
    }

    pub fn preset(kind: ModelKind, n: usize, seed: u64) -> Self {
        match kind {
            ModelKind::Heisenberg => Self::heisenberg(n, seed),
            ModelKind::Tfim => Self::tfim(n, seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > crate::pauli::MAX_QUBITS {
            return Err(Error::Config(format!("chain length {} outside 2..=63", self.n)));
        }
        if !self.coupling.is_finite() || !self.transverse_field.is_finite() {
            return Err(Error::Config("non-finite coupling or field".into()));
        }
        if !(self.disorder_std >= 0.0 && self.disorder_std.is_finite()) {
            return Err(Error::Config(format!("disorder std {} must be finite and >= 0", self.disorder_std)));
        }
        Ok(())
    }

    /// Draws the disorder and assembles the Hamiltonian.
    pub fn build(&self) -> Result<(PauliHamiltonian, DisorderInstance)> {
        self.validate()?;
        let fields = draw_disorder(self.n, self.disorder_std, self.seed)?;
        let h = match self.kind {
            ModelKind::Heisenberg => heisenberg_chain(self.n, self.coupling, &fields)?,
            ModelKind::Tfim => tfim_chain(self.n, self.coupling, self.transverse_field, &fields)?,
        };
        Ok((h, fields))
    }
}

/// One draw of site fields (`h_i` or `g_i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderInstance {
    pub fields: Vec<f64>,
    pub seed: u64,
}

/// Sidecar record written next to a generated Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub spec: ModelSpec,
    pub fields: Vec<f64>,
    pub generator: String,
    pub terms: usize,
}

impl ModelMetadata {
    pub fn new(spec: &ModelSpec, fields: &DisorderInstance, h: &PauliHamiltonian) -> Self {
        Self {
            spec: spec.clone(),
            fields: fields.fields.clone(),
            generator: DISORDER_GENERATOR.to_string(),
            terms: h.len(),
        }
    }
}

pub fn draw_disorder(n: usize, std: f64, seed: u64) -> Result<DisorderInstance> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::Config(format!("disorder std {std} must be finite and >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        })
        .collect();
    Ok(DisorderInstance { fields, seed })
}

fn check_fields(n: usize, fields: &DisorderInstance) -> Result<()> {
    if fields.fields.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: fields.fields.len(),
        });
    }
    Ok(())
}

/// `J sum_i (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}) + sum_i h_i Z_i`, periodic.
///
/// Bonds are `(i, (i+1) mod n)` for every `i`, so `n = 2` yields the bond
/// twice and merges it into a doubled coupling.
pub fn heisenberg_chain(n: usize, coupling: f64, fields: &DisorderInstance) -> Result<PauliHamiltonian> {
    check_fields(n, fields)?;
    let bonds = (0..n).flat_map(|i| {
        let j = (i + 1) % n;
        ['X', 'Y', 'Z'].map(|l| PauliTerm::pair(l, i, j, coupling))
    });
    let onsite = fields.fields.iter().enumerate().map(|(i, &h)| PauliTerm::z(i, h));
    PauliHamiltonian::new(n, bonds.chain(onsite))
}

/// `-J sum_i Z_i Z_{i+1} - h_x sum_i X_i + sum_i g_i Z_i`, periodic.
pub fn tfim_chain(n: usize, coupling: f64, transverse: f64, fields: &DisorderInstance) -> Result<PauliHamiltonian> {
    check_fields(n, fields)?;
    let bonds = (0..n).map(|i| PauliTerm::pair('Z', i, (i + 1) % n, -coupling));
    let transverse = (0..n).map(|i| PauliTerm::x(i, -transverse));
    let onsite = fields.fields.iter().enumerate().map(|(i, &g)| PauliTerm::z(i, g));
    PauliHamiltonian::new(n, bonds.chain(transverse).chain(onsite))
}
