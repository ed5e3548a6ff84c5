//! Thick-restart Arnoldi in real arithmetic.
//!
//! Each cycle expands an orthonormal basis to `m` vectors, extracts Ritz pairs
//! of the Rayleigh quotient with a dense eigensolver, and restarts from an
//! orthonormal real basis of the wanted Ritz vectors. Because that basis spans
//! an invariant subspace of the Rayleigh quotient, the Krylov relation
//! `op V = V H + f b^T` is preserved across restarts.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{dense_eigen, normalize_phase, Sorted};

pub struct RitzPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
}

pub struct ArnoldiOutcome {
    pub pairs: Vec<RitzPair>,
    pub converged: bool,
    pub restarts: usize,
    pub applications: usize,
}

pub struct ArnoldiParams {
    pub nev: usize,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `w` against `basis` twice; returns the coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coef.iter_mut().zip(basis) {
            let p = dot(v, w);
            *c += p;
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= p * b);
        }
    }
    coef
}

fn random_unit_orthogonal(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(basis, &mut w);
        let nw = norm(&w);
        if nw > 1e-8 {
            w.iter_mut().for_each(|x| *x /= nw);
            return w;
        }
    }
}

/// Finds the `nev` Ritz pairs of largest modulus of `op`.
///
/// `accept` receives the current wanted Ritz pairs (value and full-length
/// vector) and decides convergence; it is called once per cycle.
pub fn arnoldi(
    n: usize,
    op: &mut dyn FnMut(&[f64], &mut [f64]),
    params: &ArnoldiParams,
    accept: &mut dyn FnMut(&[RitzPair]) -> bool,
) -> ArnoldiOutcome {
    let m = params.krylov_dim.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // slightly perturbed constant start vector: positive for stochastic problems
    let mut v0: Vec<f64> = (0..n)
        .map(|_| 1.0 + 0.1 * rng.gen_range(-1.0..1.0))
        .collect();
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    // (m+1) x m Hessenberg-like projection, row-major
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut start = 0;
    let mut applications = 0;
    let mut w = vec![0.0; n];
    let mut last_pairs = Vec::new();
    for restart in 0..=params.max_restarts {
        for j in start..m {
            op(&basis[j], &mut w);
            applications += 1;
            let coef = orthogonalize(&basis, &mut w);
            for (i, c) in coef.into_iter().enumerate() {
                h[i][j] = c;
            }
            let beta = norm(&w);
            let scale = h
                .iter()
                .take(j + 1)
                .map(|r| r[j].abs())
                .fold(beta, f64::max);
            if beta <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                // invariant subspace: continue with a fresh direction
                h[j + 1][j] = 0.0;
                let fresh = if basis.len() < n {
                    random_unit_orthogonal(n, &basis, &mut rng)
                } else {
                    vec![0.0; n]
                };
                basis.push(fresh);
            } else {
                h[j + 1][j] = beta;
                basis.push(w.iter().map(|x| x / beta).collect());
            }
        }
        let hm: Vec<Vec<f64>> = h[..m].iter().map(|r| r[..m].to_vec()).collect();
        let Some(eig) = dense_eigen(&hm, Sorted::LargestModulus) else {
            log::warn!("dense eigensolver failed on the projected matrix");
            return ArnoldiOutcome {
                pairs: last_pairs,
                converged: false,
                restarts: restart,
                applications,
            };
        };
        let mut nev = params.nev.min(eig.len());
        // never split a conjugate pair
        if nev < eig.len() && eig[nev - 1].0.im != 0.0 && eig[nev].0 == eig[nev - 1].0.conj() {
            nev += 1;
        }
        let pairs: Vec<RitzPair> = eig[..nev]
            .iter()
            .map(|(value, y)| {
                let mut x = vec![Complex64::new(0.0, 0.0); n];
                for (yk, vk) in y.iter().zip(&basis) {
                    for (xi, vi) in x.iter_mut().zip(vk) {
                        *xi += yk * vi;
                    }
                }
                normalize_phase(&mut x);
                RitzPair {
                    value: *value,
                    vector: x,
                }
            })
            .collect();
        let ok = accept(&pairs);
        if ok || nev >= m || restart == params.max_restarts {
            return ArnoldiOutcome {
                pairs,
                converged: ok,
                restarts: restart,
                applications,
            };
        }

        // real orthonormal basis of the wanted Ritz vectors of H
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(nev);
        for (value, y) in &eig[..nev] {
            if value.im > 0.0 {
                cols.push(y.iter().map(|c| c.re).collect());
                cols.push(y.iter().map(|c| c.im).collect());
            } else if value.im == 0.0 {
                cols.push(y.iter().map(|c| c.re).collect());
            }
        }
        let mut wcols: Vec<Vec<f64>> = Vec::new();
        for mut c in cols {
            orthogonalize(&wcols, &mut c);
            let nc = norm(&c);
            if nc > 1e-10 {
                c.iter_mut().for_each(|x| *x /= nc);
                wcols.push(c);
            }
        }
        let k = wcols.len();
        if k == 0 || k >= m {
            return ArnoldiOutcome {
                pairs,
                converged: false,
                restarts: restart,
                applications,
            };
        }
        // new basis V W, T = W^T H W, coupling row h_{m,m-1} W[m-1, :]
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        for c in &wcols {
            let mut v = vec![0.0; n];
            for (ck, vk) in c.iter().zip(&basis[..m]) {
                v.iter_mut().zip(vk).for_each(|(a, b)| *a += ck * b);
            }
            new_basis.push(v);
        }
        let hw: Vec<Vec<f64>> = wcols
            .iter()
            .map(|c| {
                (0..m)
                    .map(|i| (0..m).map(|j| hm[i][j] * c[j]).sum())
                    .collect()
            })
            .collect();
        let coupling = h[m][m - 1];
        let mut new_h = vec![vec![0.0; m]; m + 1];
        for a in 0..k {
            for b in 0..k {
                new_h[a][b] = dot(&wcols[a], &hw[b]);
            }
        }
        for b in 0..k {
            new_h[k][b] = coupling * wcols[b][m - 1];
        }
        new_basis.push(basis[m].clone());
        basis = new_basis;
        h = new_h;
        start = k;
        last_pairs = pairs;
    }
    ArnoldiOutcome {
        pairs: last_pairs,
        converged: false,
        restarts: params.max_restarts,
        applications,
    }
}
