use assqd_core::acquisition::{coupling, generate_candidates, score_candidates, select_top_b, AcquisitionKind};
use assqd_core::exact::{apply_hamiltonian, StateVector};
use assqd_core::linalg::dense_lowest;
use assqd_core::pauli::{Amplitude, BasisState, PauliHamiltonian, PauliTerm};
use assqd_core::sampler::{load_counts, save_counts, top_k, CountsMultiset};
use assqd_core::subspace::{build_restricted, dominant_support, lowest_eigenpair, Subspace};
use proptest::prelude::*;

fn term(n: usize) -> impl Strategy<Value = PauliTerm> {
    let full = (1u64 << n) - 1;
    (0..=full, 0..=full, -2.0f64..2.0).prop_map(|(x, z, c)| PauliTerm::new(x, z, c))
}

fn hamiltonian(max_n: usize) -> impl Strategy<Value = PauliHamiltonian> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(term(n), 1..12).prop_map(move |terms| PauliHamiltonian::new(n, terms).unwrap())
    })
}

fn with_subset(max_n: usize) -> impl Strategy<Value = (PauliHamiltonian, Vec<BasisState>)> {
    hamiltonian(max_n).prop_flat_map(|h| {
        let dim = h.dim() as u64;
        (Just(h), prop::collection::btree_set(0..dim, 1..=(dim as usize).min(12)))
            .prop_map(|(h, set)| (h, set.into_iter().map(BasisState).collect()))
    })
}

/// Reference `<k|P|j>` from single-qubit 2x2 matrices, qubit 0 least significant.
fn kron_element(t: &PauliTerm, k: u64, j: u64, n: usize) -> Amplitude {
    let i = Amplitude::new(0.0, 1.0);
    let one = Amplitude::new(1.0, 0.0);
    let zero = Amplitude::new(0.0, 0.0);
    let mut acc = Amplitude::new(t.coefficient, 0.0);
    for q in 0..n {
        let (x, z) = ((t.x_mask >> q) & 1, (t.z_mask >> q) & 1);
        let (r, c) = ((k >> q) & 1, (j >> q) & 1);
        let m = match (x, z) {
            (0, 0) => [[one, zero], [zero, one]],
            (1, 0) => [[zero, one], [one, zero]],
            (0, 1) => [[one, zero], [zero, -one]],
            _ => [[zero, -i], [i, zero]],
        };
        acc *= m[r as usize][c as usize];
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_elements_match_kronecker_products(h in hamiltonian(4)) {
        let n = h.n();
        for k in 0..h.dim() as u64 {
            for j in 0..h.dim() as u64 {
                let expect: Amplitude = h.terms().iter().map(|t| kron_element(t, k, j, n)).sum();
                let got = h.matrix_element(BasisState(k), BasisState(j));
                prop_assert!((got - expect).norm() <= 1e-12, "<{k}|H|{j}> = {got}, expected {expect}");
            }
        }
    }

    #[test]
    fn dense_matrix_is_hermitian(h in hamiltonian(5)) {
        let m = h.dense_matrix().unwrap();
        prop_assert!((m.adjoint() - &m).norm() <= 1e-12);
    }

    #[test]
    fn neighbors_match_brute_force(h in hamiltonian(6), s in any::<u64>()) {
        let s = BasisState(s % h.dim() as u64);
        let brute: Vec<BasisState> = (0..h.dim() as u64)
            .map(BasisState)
            .filter(|&k| k != s && h.matrix_element(k, s).norm() > 1e-12)
            .collect();
        prop_assert_eq!(h.neighbors(s), brute);
    }

    #[test]
    fn hamiltonian_text_round_trips(h in hamiltonian(6)) {
        let back = PauliHamiltonian::parse(&h.to_text()).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn matvec_matches_dense((h, parts) in hamiltonian(5).prop_flat_map(|h| {
        let dim = h.dim();
        (Just(h), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim))
    })) {
        let dim = h.dim();
        let amps: Vec<Amplitude> = parts.into_iter().map(|(re, im)| Amplitude::new(re, im)).collect();
        let v = StateVector::new(h.n(), amps.clone()).unwrap();
        let hv = apply_hamiltonian(&h, &v).unwrap();
        let m = h.dense_matrix().unwrap();
        for r in 0..dim {
            let expect: Amplitude = (0..dim).map(|c| m[(r, c)] * amps[c]).sum();
            prop_assert!((hv.amplitudes[r] - expect).norm() <= 1e-10);
        }
    }

    #[test]
    fn restricted_energy_is_variational((h, states) in with_subset(5)) {
        let e0 = dense_lowest(&h.dense_matrix().unwrap(), 1)[0].value;
        let sol = lowest_eigenpair(&build_restricted(&h, &Subspace::new(states)).unwrap()).unwrap();
        prop_assert!(sol.energy >= e0 - 1e-9);
    }

    #[test]
    fn growing_the_subspace_never_raises_the_energy((h, states) in with_subset(5), extra in any::<u64>()) {
        let mut m = build_restricted(&h, &Subspace::new(states)).unwrap();
        let before = lowest_eigenpair(&m).unwrap().energy;
        m.extend(&h, &[BasisState(extra % h.dim() as u64)]);
        let after = lowest_eigenpair(&m).unwrap().energy;
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn restricted_matrix_is_a_principal_submatrix((h, states) in with_subset(5)) {
        let dense = h.dense_matrix().unwrap();
        let m = build_restricted(&h, &Subspace::new(states.clone())).unwrap();
        for (a, sa) in states.iter().enumerate() {
            for (b, sb) in states.iter().enumerate() {
                prop_assert!((m.get(a, b) - dense[(sa.index(), sb.index())]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn full_support_coupling_is_residual_of_h_psi((h, states) in with_subset(5)) {
        // With D = S, nu_k = (H psi_S)_k for every k outside S.
        let sol = lowest_eigenpair(&build_restricted(&h, &Subspace::new(states)).unwrap()).unwrap();
        let d = dominant_support(&sol, 0.0).unwrap();
        let mut full = vec![Amplitude::new(0.0, 0.0); h.dim()];
        for (s, c) in sol.subspace.states().iter().zip(&sol.coefficients) {
            full[s.index()] = *c;
        }
        let hv = apply_hamiltonian(&h, &StateVector::new(h.n(), full).unwrap()).unwrap();
        for k in (0..h.dim() as u64).map(BasisState).filter(|k| !sol.subspace.contains(*k)) {
            prop_assert!((coupling(&h, &d, k) - hv.amplitudes[k.index()]).norm() <= 1e-10);
        }
    }

    #[test]
    fn en_scores_scale_with_the_hamiltonian((h, states) in with_subset(4), f in 0.1f64..10.0) {
        // Scaling H by f scales both nu^2 and the denominator, so EN scores scale by f.
        let m = build_restricted(&h, &Subspace::new(states.clone())).unwrap();
        if m.dim() > 1 {
            let low = dense_lowest(&m.to_dense(), 2);
            prop_assume!(low[1].value - low[0].value > 1e-6);
        }
        let run = |h: &PauliHamiltonian| {
            let sol = lowest_eigenpair(&build_restricted(h, &Subspace::new(states.clone())).unwrap()).unwrap();
            let d = dominant_support(&sol, 1e-4).unwrap();
            let pool = generate_candidates(h, &d, &sol.subspace, 1).unwrap();
            (sol.energy, score_candidates(AcquisitionKind::En, h, &sol, &d, &pool, 1e-12, 0).unwrap())
        };
        let (e, base) = run(&h);
        let (es, scaled) = run(&h.scaled(f).unwrap());
        prop_assert!((es - f * e).abs() <= 1e-9 * (1.0 + e.abs() * f));
        prop_assert_eq!(base.len(), scaled.len());
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a.state, b.state);
            if (e - a.diagonal).abs() > 1e-6 {
                prop_assert!((b.score - f * a.score).abs() <= 1e-8 * (1.0 + f * a.score));
            }
        }
    }

    #[test]
    fn candidates_are_neighbors_outside_s((h, states) in with_subset(6)) {
        let sol = lowest_eigenpair(&build_restricted(&h, &Subspace::new(states)).unwrap()).unwrap();
        let d = dominant_support(&sol, 1e-4).unwrap();
        let pool = generate_candidates(&h, &d, &sol.subspace, 1).unwrap();
        let mut brute: Vec<BasisState> = d.states.iter().flat_map(|(s, _)| h.neighbors(*s)).collect();
        brute.sort();
        brute.dedup();
        brute.retain(|k| !sol.subspace.contains(*k));
        prop_assert_eq!(pool.one_hop, brute);
    }

    #[test]
    fn top_b_is_sorted_and_bounded((h, states) in with_subset(6), b in 1usize..8) {
        let sol = lowest_eigenpair(&build_restricted(&h, &Subspace::new(states)).unwrap()).unwrap();
        let d = dominant_support(&sol, 1e-4).unwrap();
        let pool = generate_candidates(&h, &d, &sol.subspace, 1).unwrap();
        let scored = score_candidates(AcquisitionKind::En, &h, &sol, &d, &pool, 1e-8, 0).unwrap();
        let picked = select_top_b(&scored, b);
        prop_assert_eq!(picked.len(), b.min(scored.len()));
        let score = |s: &BasisState| scored.iter().find(|c| c.state == *s).unwrap().score;
        for w in picked.windows(2) {
            prop_assert!(score(&w[0]) >= score(&w[1]));
        }
        if let Some(last) = picked.last() {
            prop_assert!(scored.iter().filter(|c| !picked.contains(&c.state)).all(|c| c.score <= score(last)));
        }
    }

    #[test]
    fn top_k_orders_by_count_then_value(entries in prop::collection::btree_map(0u64..64, 1u64..50, 1..30), k in 1usize..40) {
        let counts = CountsMultiset::new(6, entries.iter().map(|(&b, &c)| (BasisState(b), c))).unwrap();
        let top = top_k(&counts, k);
        prop_assert_eq!(top.len(), k.min(entries.len()));
        for w in top.windows(2) {
            let (a, b) = (counts.get(w[0]), counts.get(w[1]));
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
    }

    #[test]
    fn counts_json_round_trips(entries in prop::collection::btree_map(0u64..1024, 1u64..1000, 1..40)) {
        let counts = CountsMultiset::new(10, entries.iter().map(|(&b, &c)| (BasisState(b), c))).unwrap();
        let mut buf = Vec::new();
        save_counts(&counts, &mut buf).unwrap();
        prop_assert_eq!(load_counts(buf.as_slice()).unwrap(), counts);
    }
}
