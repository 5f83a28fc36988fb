//! Reference eigenpairs of the full Hamiltonian, for benchmark generation and
//! error measurement only. The solver itself never sees these.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Eigenpair, KrylovOptions};
use crate::pauli::{BasisState, PauliHamiltonian};

/// Largest register the oracle accepts.
pub const ORACLE_MAX_QUBITS: usize = 20;

/// Registers up to this size are diagonalized densely under [`OracleMethod::Auto`].
pub const DENSE_ORACLE_MAX_QUBITS: usize = 10;

/// `E_1 - E_0` below this marks the ground level as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// A full `2^n` amplitude vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        crate::pauli::check_qubits(n)?;
        if n > ORACLE_MAX_QUBITS || amplitudes.len() != 1usize << n {
            return Err(Error::Dimension {
                expected: 1usize << n.min(ORACLE_MAX_QUBITS),
                got: amplitudes.len(),
            });
        }
        Ok(Self { n, amplitudes })
    }

    /// The product state `|b>`.
    pub fn basis(n: usize, b: BasisState) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
        let b = BasisState::new(b.0, n)?;
        amps[b.index()] = Complex64::new(1.0, 0.0);
        Self::new(n, amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        linalg::dot(&self.amplitudes, &other.amplitudes)
    }

    /// `|<b|psi>|^2` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Lowest eigenpairs, ascending.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenpairSet {
    pub energies: Vec<f64>,
    pub vectors: Vec<StateVector>,
    pub residuals: Vec<f64>,
    pub degenerate_ground: bool,
}

impl EigenpairSet {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn first_excited_energy(&self) -> f64 {
        self.energies[1]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    /// Dense for `n <= DENSE_ORACLE_MAX_QUBITS`, Krylov above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub method: OracleMethod,
    pub tol: f64,
    pub krylov: KrylovOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            method: OracleMethod::Auto,
            tol: 1e-9,
            krylov: KrylovOptions {
                max_basis: 80,
                keep: 16,
                ..KrylovOptions::default()
            },
        }
    }
}

fn apply_into(h: &PauliHamiltonian, x: &[Complex64], y: &mut [Complex64]) {
    // Gather form: y[i] = sum_g <i|H|i^x_g> x[i^x_g]. Each output entry is
    // owned by one index, so the loop is schedule-independent.
    let masks: Vec<u64> = h.x_masks().collect();
    let terms = h.terms();
    let mut bounds = Vec::with_capacity(masks.len() + 1);
    let mut start = 0;
    for &m in &masks {
        bounds.push(start);
        start += terms[start..].iter().take_while(|t| t.x_mask == m).count();
    }
    bounds.push(terms.len());
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (g, &mask) in masks.iter().enumerate() {
            let j = i as u64 ^ mask;
            let xj = x[j as usize];
            if xj.re == 0.0 && xj.im == 0.0 {
                continue;
            }
            let amp: Complex64 = terms[bounds[g]..bounds[g + 1]]
                .iter()
                .map(|t| t.phase(j) * t.coefficient)
                .sum();
            acc += amp * xj;
        }
        *yi = acc;
    }
}

/// Matrix-free `H v`, linear in `L * 2^n`.
pub fn apply_hamiltonian(h: &PauliHamiltonian, v: &StateVector) -> Result<StateVector> {
    if v.n != h.n() {
        return Err(Error::Dimension {
            expected: h.dim(),
            got: v.dim(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); v.dim()];
    apply_into(h, &v.amplitudes, &mut out);
    StateVector::new(v.n, out)
}

/// `<v|H|v> / <v|v>`.
pub fn rayleigh_quotient(h: &PauliHamiltonian, v: &StateVector) -> Result<f64> {
    let hv = apply_hamiltonian(h, v)?;
    Ok(v.inner(&hv).re / v.inner(v).re)
}

/// `||H psi - E psi||`.
pub fn residual(h: &PauliHamiltonian, energy: f64, psi: &StateVector) -> Result<f64> {
    let hv = apply_hamiltonian(h, psi)?;
    Ok(hv
        .amplitudes
        .iter()
        .zip(&psi.amplitudes)
        .map(|(a, b)| (a - b * energy).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// The `count` lowest eigenpairs with residuals at most `tol`.
pub fn exact_lowest(h: &PauliHamiltonian, count: usize, tol: f64) -> Result<EigenpairSet> {
    exact_lowest_with(
        h,
        count,
        &OracleOptions {
            tol,
            ..OracleOptions::default()
        },
    )
}

pub fn exact_lowest_with(h: &PauliHamiltonian, count: usize, opts: &OracleOptions) -> Result<EigenpairSet> {
    let n = h.n();
    if n > ORACLE_MAX_QUBITS {
        return Err(Error::OracleTooLarge(n));
    }
    if !(2..=8).contains(&count) {
        return Err(Error::Config(format!("eigenpair count {count} outside 2..=8")));
    }
    let dim = h.dim();
    if count > dim {
        return Err(Error::Config(format!("{count} eigenpairs requested from a {dim}-dimensional space")));
    }
    let dense = match opts.method {
        OracleMethod::Dense => true,
        OracleMethod::Lanczos => false,
        OracleMethod::Auto => n <= DENSE_ORACLE_MAX_QUBITS,
    };
    let pairs: Vec<Eigenpair> = if dense {
        linalg::dense_lowest(&h.dense_matrix()?, count)
    } else {
        let kopts = KrylovOptions {
            tol: opts.tol * 0.1,
            ..opts.krylov.clone()
        };
        linalg::krylov_lowest(|x, y| apply_into(h, x, y), dim, count, &kopts)?
    };

    let mut energies = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for p in pairs {
        let v = StateVector::new(n, p.vector)?;
        let r = residual(h, p.value, &v)?;
        if r > opts.tol {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: r,
            });
        }
        energies.push(p.value);
        vectors.push(v);
        residuals.push(r);
    }
    let degenerate_ground = energies[1] - energies[0] < DEGENERACY_GAP;
    if degenerate_ground {
        log::warn!("degenerate ground level (gap {:e}); contamination model is ambiguous", energies[1] - energies[0]);
    }
    Ok(EigenpairSet {
        energies,
        vectors,
        residuals,
        degenerate_ground,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliTerm;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_qubit_products() {
        let z = PauliHamiltonian::new(1, [PauliTerm::z(0, 1.0)]).unwrap();
        let v = StateVector::new(1, vec![c(1.0), c(0.0)]).unwrap();
        assert_eq!(apply_hamiltonian(&z, &v).unwrap().amplitudes, vec![c(1.0), c(0.0)]);
        let x = PauliHamiltonian::new(1, [PauliTerm::x(0, 1.0)]).unwrap();
        assert_eq!(apply_hamiltonian(&x, &v).unwrap().amplitudes, vec![c(0.0), c(1.0)]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let z = PauliHamiltonian::new(2, [PauliTerm::z(0, 1.0)]).unwrap();
        let v = StateVector::new(1, vec![c(1.0), c(0.0)]).unwrap();
        assert!(matches!(apply_hamiltonian(&z, &v), Err(Error::Dimension { .. })));
        assert!(StateVector::new(2, vec![c(1.0)]).is_err());
    }

    #[test]
    fn diagonal_hamiltonian_ground_state() {
        for n in 1..=5 {
            let h = PauliHamiltonian::new(n, (0..n).map(|q| PauliTerm::z(q, 1.0))).unwrap();
            let eig = exact_lowest(&h, 2, 1e-9).unwrap();
            assert_abs_diff_eq!(eig.ground_energy(), -(n as f64), epsilon = 1e-12);
            let all_ones = (1usize << n) - 1;
            assert_abs_diff_eq!(eig.vectors[0].amplitudes[all_ones].re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn count_and_size_limits() {
        let h = PauliHamiltonian::new(21, [PauliTerm::z(0, 1.0)]).unwrap();
        assert!(matches!(exact_lowest(&h, 2, 1e-9), Err(Error::OracleTooLarge(21))));
        let h = PauliHamiltonian::new(2, [PauliTerm::z(0, 1.0)]).unwrap();
        assert!(exact_lowest(&h, 1, 1e-9).is_err());
        assert!(exact_lowest(&h, 9, 1e-9).is_err());
    }

    #[test]
    fn lanczos_and_dense_agree_on_complex_hamiltonian() {
        let h = PauliHamiltonian::parse("0.7 XYZI\n-0.4 YIXZ\n0.3 ZZII\n1.1 IXIY\n-0.2 IIIZ\n0.5 YYXX\n").unwrap();
        assert!(!h.is_real());
        let dense = exact_lowest_with(&h, 3, &OracleOptions { method: OracleMethod::Dense, ..Default::default() }).unwrap();
        let lanczos = exact_lowest_with(&h, 3, &OracleOptions { method: OracleMethod::Lanczos, ..Default::default() }).unwrap();
        for (a, b) in dense.energies.iter().zip(&lanczos.energies) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
