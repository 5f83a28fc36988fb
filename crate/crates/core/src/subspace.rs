//! The Hamiltonian restricted to a set of basis states, and its lowest eigenpair.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, KrylovOptions};
use crate::pauli::{BasisState, PauliHamiltonian};

/// Subspaces up to this size are solved densely; larger ones iteratively.
pub const DENSE_SUBSPACE_MAX: usize = 256;

/// Default dominant-support threshold `tau`.
pub const DEFAULT_TAU: f64 = 1e-4;

/// Ordered set of distinct basis states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Subspace {
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl Subspace {
    /// Keeps the first occurrence of repeated states.
    pub fn new<I: IntoIterator<Item = BasisState>>(states: I) -> Self {
        let mut s = Self::default();
        s.extend(states);
        s
    }

    /// Appends unseen states, returning how many were added.
    pub fn extend<I: IntoIterator<Item = BasisState>>(&mut self, states: I) -> usize {
        let before = self.states.len();
        for b in states {
            if let std::collections::hash_map::Entry::Vacant(e) = self.index.entry(b) {
                e.insert(self.states.len());
                self.states.push(b);
            }
        }
        self.states.len() - before
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, b: BasisState) -> bool {
        self.index.contains_key(&b)
    }

    pub fn position(&self, b: BasisState) -> Option<usize> {
        self.index.get(&b).copied()
    }
}

/// `H_S[i][j] = <s_i|H|s_j>`, stored by rows with sorted column indices.
///
/// Only pairs differing by one of the Hamiltonian's `x_mask`s can be nonzero,
/// so each row holds at most one entry per mask.
#[derive(Clone, Debug)]
pub struct RestrictedMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
    basis: Subspace,
}

impl RestrictedMatrix {
    fn empty() -> Self {
        Self {
            rows: Vec::new(),
            basis: Subspace::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> &Subspace {
        &self.basis
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(p) => row[p].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_real(&self) -> bool {
        self.rows.iter().flatten().all(|(_, z)| z.im == 0.0)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, z) in row {
                out[(i, j)] = z;
            }
        }
        out
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (yi, row) in y.iter_mut().zip(&self.rows) {
            *yi = row.iter().map(|&(j, z)| z * x[j]).sum();
        }
    }

    /// `<c|H_S|c>` for a unit vector `c`.
    pub fn expectation(&self, c: &[Complex64]) -> f64 {
        let mut y = vec![Complex64::new(0.0, 0.0); c.len()];
        self.apply(c, &mut y);
        linalg::dot(c, &y).re
    }

    /// Appends new basis states, evaluating only the new rows and columns.
    /// Returns the number of states actually added.
    pub fn extend(&mut self, h: &PauliHamiltonian, states: &[BasisState]) -> usize {
        let mut added = 0;
        for &t in states {
            if self.basis.contains(t) {
                continue;
            }
            let p = self.basis.len();
            self.basis.extend([t]);
            let mut row = vec![(p, Complex64::new(h.diagonal_element(t), 0.0))];
            for (k, amp) in h.connections(t) {
                // amp = <k|H|t>: column p of row q, and its conjugate in row p.
                if let Some(q) = self.basis.position(k) {
                    self.rows[q].push((p, amp));
                    row.push((q, amp.conj()));
                }
            }
            row.sort_by_key(|&(c, _)| c);
            self.rows.push(row);
            added += 1;
        }
        added
    }
}

/// Assembles `H_S` for a nonempty subspace.
pub fn build_restricted(h: &PauliHamiltonian, subspace: &Subspace) -> Result<RestrictedMatrix> {
    if subspace.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let mut m = RestrictedMatrix::empty();
    m.extend(h, subspace.states());
    Ok(m)
}

/// Lowest eigenpair of `H_S`; `psi_S = sum_s c_s |s>`.
#[derive(Clone, Debug)]
pub struct RestrictedSolution {
    pub energy: f64,
    pub coefficients: Vec<Complex64>,
    pub subspace: Subspace,
}

impl RestrictedSolution {
    pub fn coefficient(&self, b: BasisState) -> Option<Complex64> {
        self.subspace.position(b).map(|i| self.coefficients[i])
    }
}

pub fn lowest_eigenpair(m: &RestrictedMatrix) -> Result<RestrictedSolution> {
    let dim = m.dim();
    if dim == 0 {
        return Err(Error::EmptySubspace);
    }
    let pair = if dim <= DENSE_SUBSPACE_MAX {
        linalg::dense_lowest(&m.to_dense(), 1).remove(0)
    } else {
        let opts = KrylovOptions {
            tol: 1e-10,
            max_basis: 80,
            keep: 16,
            ..KrylovOptions::default()
        };
        linalg::krylov_lowest(|x, y| m.apply(x, y), dim, 1, &opts)?.remove(0)
    };
    Ok(RestrictedSolution {
        energy: pair.value,
        coefficients: pair.vector,
        subspace: m.basis.clone(),
    })
}

/// `D = { s in S : |c_s|^2 > tau }`, with coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DominantSupport {
    pub states: Vec<(BasisState, Complex64)>,
    pub threshold: f64,
}

impl DominantSupport {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, b: BasisState) -> bool {
        self.states.iter().any(|&(s, _)| s == b)
    }
}

/// States of `sol` with weight above `tau`. Falls back to the single heaviest
/// state when none clears the threshold, so expansion never stalls.
pub fn dominant_support(sol: &RestrictedSolution, tau: f64) -> Result<DominantSupport> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!("tau {tau} outside [0, 1)")));
    }
    let states = sol.subspace.states();
    let mut picked: Vec<(BasisState, Complex64)> = states
        .iter()
        .zip(&sol.coefficients)
        .filter(|(_, c)| c.norm_sqr() > tau)
        .map(|(&s, &c)| (s, c))
        .collect();
    if picked.is_empty() {
        let heaviest = sol
            .coefficients
            .iter()
            .enumerate()
            .fold(0, |best, (i, c)| if c.norm_sqr() > sol.coefficients[best].norm_sqr() { i } else { best });
        picked.push((states[heaviest], sol.coefficients[heaviest]));
    }
    Ok(DominantSupport {
        states: picked,
        threshold: tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliTerm;
    use approx::assert_abs_diff_eq;

    fn bond() -> PauliHamiltonian {
        PauliHamiltonian::new(2, ['X', 'Y', 'Z'].map(|l| PauliTerm::pair(l, 0, 1, 1.0))).unwrap()
    }

    fn solution(coefficients: Vec<f64>) -> RestrictedSolution {
        let m = coefficients.len() as u64;
        RestrictedSolution {
            energy: 0.0,
            coefficients: coefficients.into_iter().map(|c| Complex64::new(c, 0.0)).collect(),
            subspace: Subspace::new((0..m).map(BasisState)),
        }
    }

    #[test]
    fn subspace_dedups() {
        let mut s = Subspace::new([BasisState(3), BasisState(1), BasisState(3)]);
        assert_eq!(s.states(), &[BasisState(3), BasisState(1)]);
        assert_eq!(s.extend([BasisState(1), BasisState(7)]), 1);
        assert_eq!(s.position(BasisState(7)), Some(2));
    }

    #[test]
    fn flip_flop_block() {
        let s = Subspace::new([BasisState(2), BasisState(1)]);
        let m = build_restricted(&bond(), &s).unwrap();
        let d = m.to_dense();
        assert_eq!(d[(0, 0)].re, -1.0);
        assert_eq!(d[(1, 1)].re, -1.0);
        assert_eq!(d[(0, 1)].re, 2.0);
        assert_eq!(d[(1, 0)].re, 2.0);

        let sol = lowest_eigenpair(&m).unwrap();
        assert_abs_diff_eq!(sol.energy, -3.0, epsilon = 1e-12);
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(sol.coefficients[0].re, s2, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.coefficients[1].re, -s2, epsilon = 1e-12);
    }

    #[test]
    fn single_state_block() {
        let h = bond();
        let m = build_restricted(&h, &Subspace::new([BasisState(0)])).unwrap();
        assert_eq!(m.dim(), 1);
        let sol = lowest_eigenpair(&m).unwrap();
        assert_eq!(sol.energy, 1.0);
        assert_eq!(sol.coefficients[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn diagonal_block() {
        let h = PauliHamiltonian::parse("1 ZI\n-4 IZ\n").unwrap();
        // Diagonal values by state: 0 -> -3, 1 -> -5, 2 -> 5, 3 -> 3.
        let s = Subspace::new([BasisState(0), BasisState(1), BasisState(3)]);
        let sol = lowest_eigenpair(&build_restricted(&h, &s).unwrap()).unwrap();
        assert_eq!(sol.energy, -5.0);
        let weights: Vec<f64> = sol.coefficients.iter().map(|c| c.norm()).collect();
        assert_eq!(weights, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_subspace_rejected() {
        assert!(matches!(build_restricted(&bond(), &Subspace::default()), Err(Error::EmptySubspace)));
    }

    #[test]
    fn incremental_extension_matches_fresh_build() {
        let h = PauliHamiltonian::parse("0.3 XYZ\n-0.7 XXI\n0.4 IYY\n1.0 ZIZ\n0.2 IIX\n").unwrap();
        let all: Vec<BasisState> = [5u64, 0, 3, 6, 1, 7, 2].into_iter().map(BasisState).collect();
        let fresh = build_restricted(&h, &Subspace::new(all.clone())).unwrap();
        let mut grown = build_restricted(&h, &Subspace::new(all[..3].to_vec())).unwrap();
        assert_eq!(grown.extend(&h, &all[3..]), 4);
        assert_eq!(grown.extend(&h, &all[..2]), 0);
        assert_eq!(grown.to_dense(), fresh.to_dense());
    }

    #[test]
    fn dominant_support_cases() {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(dominant_support(&solution(vec![s2, -s2]), 0.25).unwrap().len(), 2);

        let d = dominant_support(&solution(vec![0.9999, 0.0141]), 0.1).unwrap();
        assert_eq!(d.states.len(), 1);
        assert_eq!(d.states[0].0, BasisState(0));

        let d = dominant_support(&solution(vec![0.6, 0.0, 0.8]), 0.0).unwrap();
        assert_eq!(d.states.iter().map(|s| s.0).collect::<Vec<_>>(), vec![BasisState(0), BasisState(2)]);

        // Nothing clears tau: the heaviest state is kept.
        let d = dominant_support(&solution(vec![0.5, 0.5, 0.5, 0.5]), 0.5).unwrap();
        assert_eq!(d.states.len(), 1);
        assert!(dominant_support(&solution(vec![1.0]), 1.0).is_err());
    }
}
