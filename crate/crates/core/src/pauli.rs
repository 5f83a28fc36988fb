//! Pauli-string Hamiltonians in symplectic bitmask form.
//!
//! A term is stored as an `(x_mask, z_mask, coefficient)` triple: bit `q` of
//! `x_mask` is set when the term acts with X or Y on qubit `q`, bit `q` of
//! `z_mask` when it acts with Z or Y. Qubit 0 is the least-significant bit of
//! a basis-state label.
//!
//! Acting on a computational basis state `|b>` a term produces exactly one
//! basis state, `|b ^ x_mask>`, with phase `i^{#Y} * (-1)^{popcount(b & z_mask)}`
//! (so `Y|0> = i|1>` and `Y|1> = -i|0>`). Everything here is built on that
//! identity; the full `2^n x 2^n` matrix is only formed by [`PauliHamiltonian::dense_matrix`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex amplitude of a matrix element. Y factors make these non-real.
pub type Amplitude = Complex64;

/// Largest supported register; one basis label fits in a machine word.
pub const MAX_QUBITS: usize = 63;

/// Merged coefficients below this magnitude are dropped.
pub const COEFFICIENT_CUTOFF: f64 = 1e-15;

/// Register size above which [`PauliHamiltonian::dense_matrix`] refuses to allocate.
pub const DENSE_MAX_QUBITS: usize = 12;

// Summed group amplitudes below this fraction of the group's total weight
// count as structural cancellation (e.g. XX + YY acting on |00>).
const CANCELLATION_TOL: f64 = 1e-12;

/// A computational basis state. Bit `q` holds the measurement outcome of qubit `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisState(pub u64);

impl BasisState {
    /// Checked constructor: `value` must fit in `n` qubits.
    pub fn new(value: u64, n: usize) -> Result<Self> {
        check_qubits(n)?;
        if value >> n != 0 {
            return Err(Error::StateOutOfRange { value, n });
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn bit(self, qubit: usize) -> bool {
        (self.0 >> qubit) & 1 == 1
    }

    #[inline]
    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bitstring with character `i` giving qubit `i`.
    pub fn to_bitstring(self, n: usize) -> String {
        (0..n).map(|q| if self.bit(q) { '1' } else { '0' }).collect()
    }

    /// Parses a bitstring whose character `i` addresses qubit `i`.
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let n = bits.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let mut value = 0u64;
        for (q, ch) in bits.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => value |= 1 << q,
                _ => {
                    return Err(Error::CountsKey {
                        key: bits.to_string(),
                        reason: format!("non-binary character {ch:?}"),
                    })
                }
            }
        }
        Ok(Self(value))
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for BasisState {
    fn from(value: u64) -> Self {
        Self(value)
    }
}

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        Err(Error::QubitCount(n))
    } else {
        Ok(())
    }
}

#[inline]
fn i_power(k: u32) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A weighted Pauli string `c * P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub x_mask: u64,
    pub z_mask: u64,
    pub coefficient: f64,
}

impl PauliTerm {
    pub fn new(x_mask: u64, z_mask: u64, coefficient: f64) -> Self {
        Self {
            x_mask,
            z_mask,
            coefficient,
        }
    }

    pub fn x(qubit: usize, coefficient: f64) -> Self {
        Self::new(1 << qubit, 0, coefficient)
    }

    pub fn y(qubit: usize, coefficient: f64) -> Self {
        Self::new(1 << qubit, 1 << qubit, coefficient)
    }

    pub fn z(qubit: usize, coefficient: f64) -> Self {
        Self::new(0, 1 << qubit, coefficient)
    }

    /// Two-qubit string `P_a P_b` with the same Pauli letter on both sites.
    pub fn pair(letter: char, a: usize, b: usize, coefficient: f64) -> Self {
        let mask = (1u64 << a) | (1u64 << b);
        match letter {
            'X' => Self::new(mask, 0, coefficient),
            'Y' => Self::new(mask, mask, coefficient),
            'Z' => Self::new(0, mask, coefficient),
            _ => Self::new(0, 0, coefficient),
        }
    }

    /// Parses a word over `{I, X, Y, Z}`; character `i` addresses qubit `i`.
    /// Returns the term and the word length.
    pub fn from_word(coefficient: f64, word: &str) -> Result<(Self, usize)> {
        let n = word.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::PauliWord {
                word: word.to_string(),
                reason: format!("length {n} outside 1..=63"),
            });
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (q, ch) in word.chars().enumerate() {
            match ch.to_ascii_uppercase() {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                'Z' => z |= 1 << q,
                other => {
                    return Err(Error::PauliWord {
                        word: word.to_string(),
                        reason: format!("unexpected character {other:?}"),
                    })
                }
            }
        }
        Ok((Self::new(x, z, coefficient), n))
    }

    pub fn word(&self, n: usize) -> String {
        (0..n)
            .map(|q| {
                let bit = 1u64 << q;
                match (self.x_mask & bit != 0, self.z_mask & bit != 0) {
                    (false, false) => 'I',
                    (true, false) => 'X',
                    (true, true) => 'Y',
                    (false, true) => 'Z',
                }
            })
            .collect()
    }

    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    /// Unit phase picked up when the bare string acts on `b`.
    #[inline]
    pub fn phase(&self, b: u64) -> Complex64 {
        let ph = i_power(self.y_count());
        if (b & self.z_mask).count_ones() & 1 == 1 {
            -ph
        } else {
            ph
        }
    }

    /// `c * P |b> = amplitude * |b ^ x_mask>`.
    #[inline]
    pub fn apply(&self, b: BasisState) -> (BasisState, Amplitude) {
        (
            BasisState(b.0 ^ self.x_mask),
            self.phase(b.0) * self.coefficient,
        )
    }
}

/// Applies one term to a basis state. See [`PauliTerm::apply`].
pub fn apply_term(term: &PauliTerm, b: BasisState) -> (BasisState, Amplitude) {
    term.apply(b)
}

#[derive(Clone, Debug, PartialEq)]
struct XGroup {
    x_mask: u64,
    start: usize,
    end: usize,
    weight: f64,
}

/// `H = sum_l c_l P_l` over `n` qubits with real coefficients.
///
/// Terms are kept in canonical order (sorted by `(x_mask, z_mask)`), duplicates
/// merged, and near-zero coefficients dropped. Terms sharing an `x_mask` form a
/// group: they all connect `|j>` to the same `|j ^ x_mask>`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliHamiltonian {
    n: usize,
    terms: Vec<PauliTerm>,
    groups: Vec<XGroup>,
}

impl PauliHamiltonian {
    pub fn new<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = PauliTerm>,
    {
        check_qubits(n)?;
        let limit = (1u64 << n) - 1;
        let mut merged: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for term in terms {
            if (term.x_mask | term.z_mask) & !limit != 0 {
                return Err(Error::PauliWord {
                    word: format!("x={:#x} z={:#x}", term.x_mask, term.z_mask),
                    reason: format!("acts outside {n} qubits"),
                });
            }
            if !term.coefficient.is_finite() {
                return Err(Error::Config(format!(
                    "non-finite coefficient {} on {}",
                    term.coefficient,
                    term.word(n)
                )));
            }
            *merged.entry((term.x_mask, term.z_mask)).or_insert(0.0) += term.coefficient;
        }
        let terms: Vec<PauliTerm> = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= COEFFICIENT_CUTOFF)
            .map(|((x, z), c)| PauliTerm::new(x, z, c))
            .collect();

        let mut groups: Vec<XGroup> = Vec::new();
        for (i, t) in terms.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.x_mask == t.x_mask => {
                    g.end = i + 1;
                    g.weight += t.coefficient.abs();
                }
                _ => groups.push(XGroup {
                    x_mask: t.x_mask,
                    start: i,
                    end: i + 1,
                    weight: t.coefficient.abs(),
                }),
            }
        }
        Ok(Self { n, terms, groups })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Distinct `x_mask` values, ascending. `0` (the diagonal group) comes first if present.
    pub fn x_masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.groups.iter().map(|g| g.x_mask)
    }

    /// True when every matrix element is real (each term carries an even number of Y).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.y_count() % 2 == 0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.groups.iter().all(|g| g.x_mask == 0)
    }

    /// Sum of `|c_l|`, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    fn group_terms(&self, g: &XGroup) -> &[PauliTerm] {
        &self.terms[g.start..g.end]
    }

    fn find_group(&self, x_mask: u64) -> Option<&XGroup> {
        self.groups
            .binary_search_by_key(&x_mask, |g| g.x_mask)
            .ok()
            .map(|i| &self.groups[i])
    }

    #[inline]
    fn group_amplitude(&self, g: &XGroup, j: u64) -> Amplitude {
        self.group_terms(g)
            .iter()
            .map(|t| t.phase(j) * t.coefficient)
            .sum()
    }

    /// `<k|H|j>`: only terms with `x_mask == k ^ j` contribute.
    pub fn matrix_element(&self, k: BasisState, j: BasisState) -> Amplitude {
        match self.find_group(k.0 ^ j.0) {
            Some(g) => self.group_amplitude(g, j.0),
            None => Amplitude::new(0.0, 0.0),
        }
    }

    /// `<k|H|k>`, the sum of signed Z-only terms.
    pub fn diagonal_element(&self, k: BasisState) -> f64 {
        match self.groups.first() {
            Some(g) if g.x_mask == 0 => self
                .group_terms(g)
                .iter()
                .map(|t| {
                    if (k.0 & t.z_mask).count_ones() & 1 == 1 {
                        -t.coefficient
                    } else {
                        t.coefficient
                    }
                })
                .sum(),
            _ => 0.0,
        }
    }

    /// Off-diagonal column of `s`: every `(k, <k|H|s>)` with `k != s` and a
    /// nonzero element, in ascending `x_mask` order.
    pub fn connections(&self, s: BasisState) -> impl Iterator<Item = (BasisState, Amplitude)> + '_ {
        self.groups
            .iter()
            .filter(|g| g.x_mask != 0)
            .filter_map(move |g| {
                let amp = self.group_amplitude(g, s.0);
                (amp.norm() > CANCELLATION_TOL * g.weight).then_some((BasisState(s.0 ^ g.x_mask), amp))
            })
    }

    /// States connected to `s` by a nonzero matrix element, ascending.
    pub fn neighbors(&self, s: BasisState) -> Vec<BasisState> {
        let mut out: Vec<BasisState> = self.connections(s).map(|(k, _)| k).collect();
        out.sort_unstable();
        out
    }

    /// Whether `amp`, an element of the column of `s` with mask `k ^ s`, is a
    /// real connection rather than a cancellation. Mirrors [`Self::connections`].
    pub fn is_connection(&self, k: BasisState, s: BasisState) -> bool {
        if k == s {
            return false;
        }
        match self.find_group(k.0 ^ s.0) {
            Some(g) => self.group_amplitude(g, s.0).norm() > CANCELLATION_TOL * g.weight,
            None => false,
        }
    }

    /// Materializes `H` as a dense `2^n x 2^n` matrix. Test oracle only.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > DENSE_MAX_QUBITS {
            return Err(Error::DenseTooLarge(self.n));
        }
        let dim = self.dim();
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for j in 0..dim as u64 {
            for g in &self.groups {
                let k = (j ^ g.x_mask) as usize;
                m[(k, j as usize)] += self.group_amplitude(g, j);
            }
        }
        Ok(m)
    }

    /// Same Hamiltonian with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n,
            self.terms
                .iter()
                .map(|t| PauliTerm::new(t.x_mask, t.z_mask, t.coefficient * factor)),
        )
    }

    /// Relabels qubits: qubit `q` becomes `perm[q]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: perm.len(),
            });
        }
        let map = |mask: u64| {
            (0..self.n)
                .filter(|&q| mask >> q & 1 == 1)
                .fold(0u64, |acc, q| acc | 1 << perm[q])
        };
        Self::new(
            self.n,
            self.terms
                .iter()
                .map(|t| PauliTerm::new(map(t.x_mask), map(t.z_mask), t.coefficient)),
        )
    }

    /// Parses the line format `<coefficient> <pauli-word>`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(coef), Some(word), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    reason: "expected `<coefficient> <pauli-word>`".into(),
                });
            };
            let coefficient: f64 = coef.parse().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("bad coefficient {coef:?}"),
            })?;
            let (term, len) = PauliTerm::from_word(coefficient, word).map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            match n {
                None => n = Some(len),
                Some(expected) if expected != len => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("word has {len} qubits, previous lines had {expected}"),
                    })
                }
                _ => {}
            }
            terms.push(term);
        }
        let n = n.ok_or(Error::EmptyInput)?;
        Self::new(n, terms)
    }

    /// Emits the line format read by [`Self::parse`]. Coefficients use the
    /// shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{} {}\n", t.coefficient, t.word(self.n)));
        }
        out
    }
}

impl FromStr for PauliHamiltonian {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bond(letters: &str, a: usize, b: usize, n: usize) -> PauliHamiltonian {
        PauliHamiltonian::new(n, letters.chars().map(|l| PauliTerm::pair(l, a, b, 1.0))).unwrap()
    }

    #[test]
    fn single_qubit_actions() {
        assert_eq!(PauliTerm::x(0, 0.5).apply(BasisState(0)), (BasisState(1), c(0.5, 0.0)));
        assert_eq!(PauliTerm::y(0, 0.5).apply(BasisState(0)), (BasisState(1), c(0.0, 0.5)));
        assert_eq!(PauliTerm::y(0, 1.0).apply(BasisState(1)), (BasisState(0), c(0.0, -1.0)));
        assert_eq!(PauliTerm::z(0, 1.0).apply(BasisState(1)), (BasisState(1), c(-1.0, 0.0)));
    }

    #[test]
    fn flip_flop_element() {
        // |10> in qubit-0-first notation is value 1, |01> is value 2.
        let h = bond("XY", 0, 1, 2);
        assert_eq!(h.matrix_element(BasisState(1), BasisState(2)), c(2.0, 0.0));
        // XX + YY annihilates |00> -> |11>.
        assert_eq!(h.matrix_element(BasisState(3), BasisState(0)), c(0.0, 0.0));
    }

    #[test]
    fn diagonal_elements() {
        let zz = bond("Z", 0, 1, 2);
        assert_eq!(zz.diagonal_element(BasisState(2)), -1.0);
        let heis = bond("XYZ", 0, 1, 2);
        assert_eq!(heis.diagonal_element(BasisState(2)), -1.0);
        let fields = PauliHamiltonian::new(2, [PauliTerm::z(0, 1.0), PauliTerm::z(1, 1.0)]).unwrap();
        assert_eq!(fields.diagonal_element(BasisState(3)), -2.0);
        assert_eq!(fields.matrix_element(BasisState(0), BasisState(0)), c(2.0, 0.0));
        assert_eq!(fields.matrix_element(BasisState(1), BasisState(2)), c(0.0, 0.0));
    }

    #[test]
    fn neighbors_follow_nonzero_elements() {
        let x = PauliHamiltonian::new(1, [PauliTerm::x(0, 1.0)]).unwrap();
        assert_eq!(x.neighbors(BasisState(0)), vec![BasisState(1)]);

        let z = PauliHamiltonian::new(3, (0..3).map(|q| PauliTerm::z(q, 1.0))).unwrap();
        assert!(z.neighbors(BasisState(5)).is_empty());

        // Periodic 3-site exchange ring: flip-flops cannot act on the fully
        // polarized state, and a single up spin hops to either neighbour.
        let mut terms = Vec::new();
        for i in 0..3 {
            for l in ['X', 'Y', 'Z'] {
                terms.push(PauliTerm::pair(l, i, (i + 1) % 3, 1.0));
            }
        }
        let ring = PauliHamiltonian::new(3, terms).unwrap();
        assert!(ring.neighbors(BasisState(0)).is_empty());
        assert_eq!(ring.neighbors(BasisState(1)), vec![BasisState(2), BasisState(4)]);
        assert_eq!(ring.neighbors(BasisState(3)), vec![BasisState(5), BasisState(6)]);
    }

    #[test]
    fn dense_matrix_small_cases() {
        let z = PauliHamiltonian::new(1, [PauliTerm::z(0, 1.0)]).unwrap();
        let m = z.dense_matrix().unwrap();
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(1, 1)], c(-1.0, 0.0));

        let heis = bond("XYZ", 0, 1, 2).dense_matrix().unwrap();
        let diag: Vec<f64> = (0..4).map(|i| heis[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(heis[(1, 2)], c(2.0, 0.0));
        assert_eq!(heis[(2, 1)], c(2.0, 0.0));
        assert_eq!(heis[(0, 3)], c(0.0, 0.0));
    }

    #[test]
    fn dense_matrix_rejects_large_registers() {
        let h = PauliHamiltonian::new(13, [PauliTerm::z(0, 1.0)]).unwrap();
        assert!(matches!(h.dense_matrix(), Err(Error::DenseTooLarge(13))));
    }

    #[test]
    fn duplicates_merge_and_cancel() {
        let h = PauliHamiltonian::new(
            2,
            [
                PauliTerm::pair('X', 0, 1, 1.0),
                PauliTerm::pair('X', 1, 0, 1.0),
                PauliTerm::z(0, 0.5),
                PauliTerm::z(0, -0.5),
            ],
        )
        .unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.terms()[0].coefficient, 2.0);
    }

    #[test]
    fn text_format_round_trip() {
        let text = "# two-site exchange\n0.5 XXI\n0.5 YYI\n-1.25 IZZ\n0.1 ZII\n";
        let h = PauliHamiltonian::parse(text).unwrap();
        assert_eq!(h.n(), 3);
        assert_eq!(h.len(), 4);
        let again = PauliHamiltonian::parse(&h.to_text()).unwrap();
        assert_eq!(h, again);
        assert_abs_diff_eq!(h.diagonal_element(BasisState(0)), -1.15, epsilon = 1e-15);
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!(PauliHamiltonian::parse("1.0 XQ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            PauliHamiltonian::parse("1.0 XX\n2.0 XXX"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(PauliHamiltonian::parse("abc XX"), Err(Error::Parse { .. })));
        assert!(matches!(PauliHamiltonian::parse("# nothing"), Err(Error::EmptyInput)));
    }

    #[test]
    fn basis_state_bounds() {
        assert!(BasisState::new(4, 2).is_err());
        assert!(BasisState::new(3, 2).is_ok());
        assert!(BasisState::new(0, 64).is_err());
        assert_eq!(BasisState::from_bitstring("110").unwrap(), BasisState(3));
        assert_eq!(BasisState(3).to_bitstring(3), "110");
    }

    #[test]
    fn relabeling_moves_masks() {
        let h = PauliHamiltonian::parse("1 XZI\n").unwrap();
        let r = h.relabeled(&[2, 0, 1]).unwrap();
        assert_eq!(r.terms()[0].word(3), "ZIX");
    }
}
