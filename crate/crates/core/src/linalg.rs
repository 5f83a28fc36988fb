//! Hermitian eigensolvers shared by the exact oracle and the subspace solver.
//!
//! Two routes: a dense solve through nalgebra (real symmetric when the matrix
//! has no imaginary part) and a matrix-free thick-restart Krylov method with
//! full reorthogonalization. The Krylov route finds eigenpairs one at a time,
//! each in the orthogonal complement of those already locked, so degenerate
//! levels are recovered with their multiplicity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An eigenvalue with its unit eigenvector.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<Complex64>,
}

/// Makes the largest-magnitude component real and positive.
///
/// Components within a relative `1e-10` of the maximum count as tied and the
/// lowest index wins, so roundoff does not decide the phase.
pub fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let Some(pivot) = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-10)) else {
        return;
    };
    let rot = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [Complex64], s: f64) {
    for z in v.iter_mut() {
        *z *= s;
    }
}

/// The `count` algebraically lowest eigenpairs of a dense Hermitian matrix,
/// ascending, phase-fixed.
pub fn dense_lowest(m: &DMatrix<Complex64>, count: usize) -> Vec<Eigenpair> {
    let dim = m.nrows();
    let count = count.min(dim);
    let real = m.iter().all(|z| z.im == 0.0);
    let (values, vectors): (Vec<f64>, Vec<Vec<Complex64>>) = if real {
        let re = m.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        let order = ascending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .take(count)
            .map(|i| {
                let col = eig.eigenvectors.column(i);
                (
                    eig.eigenvalues[i],
                    col.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                )
            })
            .unzip()
    } else {
        let eig = SymmetricEigen::new(m.clone());
        let order = ascending(eig.eigenvalues.as_slice());
        order
            .into_iter()
            .take(count)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .unzip()
    };
    values
        .into_iter()
        .zip(vectors)
        .map(|(value, mut vector)| {
            let nrm = norm(&vector);
            scale(&mut vector, 1.0 / nrm);
            fix_phase(&mut vector);
            Eigenpair { value, vector }
        })
        .collect()
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Tuning knobs for [`krylov_lowest`].
#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// Residual bound `||A y - theta y||` each returned pair must meet.
    pub tol: f64,
    /// Basis size at which the method restarts.
    pub max_basis: usize,
    /// Ritz vectors carried over a restart.
    pub keep: usize,
    /// Cap on operator applications per eigenpair.
    pub max_matvecs: usize,
    /// Seed for the pseudorandom start vectors.
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_basis: 64,
            keep: 12,
            max_matvecs: 20_000,
            seed: 0x5eed_1a2c,
        }
    }
}

/// The `count` lowest eigenpairs of the Hermitian operator `apply`
/// (`apply(x, y)` must write `A x` into `y`), ascending and phase-fixed.
pub fn krylov_lowest<F>(apply: F, dim: usize, count: usize, opts: &KrylovOptions) -> Result<Vec<Eigenpair>>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let count = count.min(dim);
    let mut locked: Vec<Eigenpair> = Vec::with_capacity(count);
    for round in 0..count {
        let pair = lowest_in_complement(&apply, dim, &locked, opts, round as u64)?;
        locked.push(pair);
    }
    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    for p in locked.iter_mut() {
        fix_phase(&mut p.vector);
    }
    Ok(locked)
}

fn project_out(v: &mut [Complex64], basis: &[&[Complex64]]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
    (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn lowest_in_complement<F>(
    apply: &F,
    dim: usize,
    locked: &[Eigenpair],
    opts: &KrylovOptions,
    round: u64,
) -> Result<Eigenpair>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let locked_vecs: Vec<&[Complex64]> = locked.iter().map(|p| p.vector.as_slice()).collect();
    let room = dim - locked.len();
    let max_basis = opts.max_basis.max(2).min(room);
    let keep = opts.keep.clamp(1, max_basis.saturating_sub(1).max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15));

    // Orthonormal basis, its images under the deflated operator, and the
    // projected matrix T = V^H A V (column-major, Hermitian).
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vec<Complex64>> = Vec::with_capacity(max_basis);
    let mut proj = DMatrix::<Complex64>::zeros(max_basis, max_basis);

    let fresh_direction = |rng: &mut ChaCha8Rng, basis: &[Vec<Complex64>]| -> Option<Vec<Complex64>> {
        for _ in 0..8 {
            let mut v = random_vector(rng, dim);
            let mut against: Vec<&[Complex64]> = locked_vecs.clone();
            against.extend(basis.iter().map(|b| b.as_slice()));
            project_out(&mut v, &against);
            let nv = norm(&v);
            if nv > 1e-8 {
                scale(&mut v, 1.0 / nv);
                return Some(v);
            }
        }
        None
    };

    let start = fresh_direction(&mut rng, &basis).ok_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::NAN,
    })?;
    let mut pending: Option<Vec<Complex64>> = Some(start);
    let mut matvecs = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];

    loop {
        // Grow the basis until it is full, the complement is exhausted, or a
        // convergence check succeeds.
        while let Some(v) = pending.take() {
            apply(&v, &mut scratch);
            matvecs += 1;
            let mut w = scratch.clone();
            project_out(&mut w, &locked_vecs);
            let j = basis.len();
            for (i, b) in basis.iter().enumerate() {
                let t = dot(b, &w);
                proj[(i, j)] = t;
                proj[(j, i)] = t.conj();
            }
            proj[(j, j)] = Complex64::new(dot(&v, &w).re, 0.0);
            basis.push(v);
            images.push(w);

            let exhausted = basis.len() >= room;
            if basis.len() >= max_basis || exhausted || basis.len().is_multiple_of(8) {
                break;
            }
            let mut r = images[j].clone();
            let mut against: Vec<&[Complex64]> = locked_vecs.clone();
            against.extend(basis.iter().map(|b| b.as_slice()));
            project_out(&mut r, &against);
            let nr = norm(&r);
            if nr > 1e-10 * norm(&images[j]).max(1e-300) {
                scale(&mut r, 1.0 / nr);
                pending = Some(r);
            } else {
                pending = fresh_direction(&mut rng, &basis);
            }
        }

        // Rayleigh-Ritz on the current basis.
        let k = basis.len();
        let t = proj.view((0, 0), (k, k)).into_owned();
        let eig = SymmetricEigen::new(t);
        let order = ascending(eig.eigenvalues.as_slice());
        let lowest = order[0];
        let theta = eig.eigenvalues[lowest];
        let u = eig.eigenvectors.column(lowest).into_owned();
        let (y, ay) = combine(&basis, &images, &u, dim);
        let mut resid = ay.clone();
        axpy(Complex64::new(-theta, 0.0), &y, &mut resid);
        let res_norm = norm(&resid);
        best_residual = best_residual.min(res_norm);

        let exhausted = k >= room;
        if res_norm <= opts.tol || exhausted {
            if res_norm > opts.tol {
                return Err(Error::NoConvergence {
                    iterations: matvecs,
                    residual: res_norm,
                });
            }
            let mut y = y;
            let ny = norm(&y);
            scale(&mut y, 1.0 / ny);
            return Ok(Eigenpair { value: theta, vector: y });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                residual: best_residual,
            });
        }

        if k < max_basis {
            // Periodic check failed; continue growing from the last image.
            let mut r = images[k - 1].clone();
            let mut against: Vec<&[Complex64]> = locked_vecs.clone();
            against.extend(basis.iter().map(|b| b.as_slice()));
            project_out(&mut r, &against);
            let nr = norm(&r);
            pending = if nr > 1e-10 * norm(&images[k - 1]).max(1e-300) {
                scale(&mut r, 1.0 / nr);
                Some(r)
            } else {
                fresh_direction(&mut rng, &basis)
            };
            if pending.is_none() {
                return Err(Error::NoConvergence {
                    iterations: matvecs,
                    residual: best_residual,
                });
            }
            continue;
        }

        // Thick restart: keep the lowest Ritz vectors, continue from the
        // residual of the lowest one.
        let kept: Vec<usize> = order.iter().copied().take(keep).collect();
        let mut new_basis = Vec::with_capacity(max_basis);
        let mut new_images = Vec::with_capacity(max_basis);
        proj.fill(Complex64::new(0.0, 0.0));
        for (slot, &col) in kept.iter().enumerate() {
            let uc = eig.eigenvectors.column(col).into_owned();
            let (yc, ayc) = combine(&basis, &images, &uc, dim);
            new_basis.push(yc);
            new_images.push(ayc);
            proj[(slot, slot)] = Complex64::new(eig.eigenvalues[col], 0.0);
        }
        // Re-orthonormalize the kept block against drift.
        for i in 0..new_basis.len() {
            let (done, rest) = new_basis.split_at_mut(i);
            let v = &mut rest[0];
            let refs: Vec<&[Complex64]> = done.iter().map(|b| b.as_slice()).collect();
            project_out(v, &refs);
            let nv = norm(v);
            scale(v, 1.0 / nv);
        }
        for i in 0..new_basis.len() {
            for j in i..new_basis.len() {
                let t = dot(&new_basis[i], &new_images[j]);
                proj[(i, j)] = t;
                proj[(j, i)] = t.conj();
            }
            proj[(i, i)] = Complex64::new(proj[(i, i)].re, 0.0);
        }
        basis = new_basis;
        images = new_images;
        let mut r = resid;
        let mut against: Vec<&[Complex64]> = locked_vecs.clone();
        against.extend(basis.iter().map(|b| b.as_slice()));
        project_out(&mut r, &against);
        let nr = norm(&r);
        pending = if nr > 1e-14 {
            scale(&mut r, 1.0 / nr);
            Some(r)
        } else {
            fresh_direction(&mut rng, &basis)
        };
        if pending.is_none() {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                residual: best_residual,
            });
        }
    }
}

fn combine(
    basis: &[Vec<Complex64>],
    images: &[Vec<Complex64>],
    u: &DVector<Complex64>,
    dim: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut y = vec![Complex64::new(0.0, 0.0); dim];
    let mut ay = vec![Complex64::new(0.0, 0.0); dim];
    for (i, (b, w)) in basis.iter().zip(images).enumerate() {
        axpy(u[i], b, &mut y);
        axpy(u[i], w, &mut ay);
    }
    (y, ay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dense_apply(m: &DMatrix<Complex64>) -> impl Fn(&[Complex64], &mut [Complex64]) + '_ {
        move |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[c(-1.0), c(2.0), c(2.0), c(-1.0)]);
        let pairs = dense_lowest(&m, 2);
        assert_abs_diff_eq!(pairs[0].value, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[1].value, 1.0, epsilon = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(pairs[0].vector[0].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[0].vector[1].re, -s, epsilon = 1e-12);
    }

    #[test]
    fn phase_fix_prefers_first_of_tied() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![Complex64::new(0.0, -s), Complex64::new(0.0, s)];
        fix_phase(&mut v);
        assert_abs_diff_eq!(v[0].re, s, epsilon = 1e-15);
        assert_eq!(v[0].im, 0.0);
        assert_abs_diff_eq!(v[1].re, -s, epsilon = 1e-15);
    }

    #[test]
    fn krylov_matches_dense_on_random_hermitian() {
        let dim = 90;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = c(rng.random::<f64>() * 4.0 - 2.0);
            for j in 0..i {
                let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let dense = dense_lowest(&m, 3);
        let opts = KrylovOptions {
            max_basis: 30,
            keep: 6,
            ..Default::default()
        };
        let kry = krylov_lowest(dense_apply(&m), dim, 3, &opts).unwrap();
        for (d, k) in dense.iter().zip(&kry) {
            assert_abs_diff_eq!(d.value, k.value, epsilon = 1e-9);
            assert_abs_diff_eq!(dot(&d.vector, &k.vector).norm(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn krylov_recovers_degenerate_levels() {
        let diag = [-2.0, -2.0, -2.0, 1.0, 3.0, 5.0];
        let m = DMatrix::from_fn(6, 6, |i, j| if i == j { c(diag[i]) } else { c(0.0) });
        let pairs = krylov_lowest(dense_apply(&m), 6, 4, &KrylovOptions::default()).unwrap();
        let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        for (v, e) in values.iter().zip([-2.0, -2.0, -2.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn krylov_on_tiny_operator() {
        let m = DMatrix::from_row_slice(1, 1, &[c(4.5)]);
        let pairs = krylov_lowest(dense_apply(&m), 1, 1, &KrylovOptions::default()).unwrap();
        assert_abs_diff_eq!(pairs[0].value, 4.5, epsilon = 1e-14);
    }
}
