//! Inner linear solvers for shift-invert: sparse LU or ILU(0)-preconditioned GMRES.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest system factorized directly.
pub const DIRECT_LIMIT: usize = 200_000;

const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 20_000;
const GMRES_TOL: f64 = 1e-12;
const GMRES_ACCEPT: f64 = 1e-8;

pub enum ShiftedSolver {
    Direct(Lu<usize, f64>),
    Iterative { a: CsrMatrix, ilu: Ilu0 },
}

/// `L - sigma I` with every diagonal position present.
pub fn shifted(l: &CsrMatrix, sigma: f64) -> CsrMatrix {
    let rows = (0..l.nrows())
        .map(|i| {
            let mut r: Vec<(usize, f64)> = l.row(i).collect();
            r.push((i, -sigma));
            r
        })
        .collect();
    CsrMatrix::from_rows(l.ncols(), rows)
}

impl ShiftedSolver {
    pub fn new(l: &CsrMatrix, sigma: f64) -> Result<Self> {
        let a = shifted(l, sigma);
        let solver = if a.nrows() <= DIRECT_LIMIT {
            let mut triplets = Vec::with_capacity(a.nnz());
            for i in 0..a.nrows() {
                for (j, v) in a.row(i) {
                    triplets.push(Triplet::new(i, j, v));
                }
            }
            let m =
                SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
                    .map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
            let lu = m.sp_lu().map_err(|_| Error::SingularShift(sigma))?;
            ShiftedSolver::Direct(lu)
        } else {
            let ilu = Ilu0::new(&a);
            ShiftedSolver::Iterative { a, ilu }
        };
        // probe for numerical singularity
        let probe = vec![1.0; l.nrows()];
        let mut out = vec![0.0; l.nrows()];
        match solver.solve(&probe, &mut out) {
            Ok(()) if out.iter().all(|v| v.is_finite()) => Ok(solver),
            _ => Err(Error::SingularShift(sigma)),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, ShiftedSolver::Direct(_))
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        match self {
            ShiftedSolver::Direct(lu) => {
                let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                lu.solve_in_place(rhs.as_mut());
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = rhs[(i, 0)];
                }
                Ok(())
            }
            ShiftedSolver::Iterative { a, ilu } => gmres(a, ilu, b, x),
        }
    }
}

/// Incomplete LU with the sparsity pattern of `A` (unit lower factor implicit).
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.nrows();
        let indptr = a.indptr().to_vec();
        let indices = a.indices().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in indptr[i]..indptr[i + 1] {
                if indices[p] == i {
                    diag_pos[i] = p;
                }
            }
            assert!(
                diag_pos[i] != usize::MAX,
                "ILU(0) needs every diagonal entry"
            );
        }
        let floor = 1e-14 * a.norm_inf().max(f64::MIN_POSITIVE);
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for p in indptr[i]..indptr[i + 1] {
                marker[indices[p]] = p;
            }
            for p in indptr[i]..indptr[i + 1] {
                let k = indices[p];
                if k >= i {
                    break;
                }
                let mut pivot = vals[diag_pos[k]];
                if pivot.abs() < floor {
                    pivot = floor.copysign(pivot);
                }
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag_pos[k] + 1..indptr[k + 1] {
                    let j = indices[q];
                    let slot = marker[j];
                    if slot != usize::MAX {
                        vals[slot] -= lik * vals[q];
                    }
                }
            }
            for p in indptr[i]..indptr[i + 1] {
                marker[indices[p]] = usize::MAX;
            }
        }
        let rows = (0..n)
            .map(|i| {
                (indptr[i]..indptr[i + 1])
                    .map(|p| (indices[p], vals[p]))
                    .collect()
            })
            .collect();
        Self {
            lu: CsrMatrix::from_rows(a.ncols(), rows),
            diag_pos,
        }
    }

    /// `x = (LU)^{-1} b`.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let n = b.len();
        let (ip, ix, v) = (self.lu.indptr(), self.lu.indices(), self.lu.values());
        x.copy_from_slice(b);
        for i in 0..n {
            let mut s = x[i];
            for p in ip[i]..self.diag_pos[i] {
                s -= v[p] * x[ix[p]];
            }
            x[i] = s;
        }
        let floor = f64::MIN_POSITIVE;
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag_pos[i] + 1..ip[i + 1] {
                s -= v[p] * x[ix[p]];
            }
            let d = v[self.diag_pos[i]];
            x[i] = s / if d.abs() < floor { floor } else { d };
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES.
pub fn gmres(a: &CsrMatrix, m: &Ilu0, b: &[f64], x: &mut [f64]) -> Result<()> {
    let n = b.len();
    let bnorm = norm(b);
    x.iter_mut().for_each(|v| *v = 0.0);
    if bnorm == 0.0 {
        return Ok(());
    }
    let mut r = b.to_vec();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iters = 0;
    let mut rel = 1.0;
    while iters < GMRES_MAX_ITERS {
        // r = b - A x
        a.mul_vec(x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= GMRES_TOL {
            return Ok(());
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; GMRES_RESTART]; GMRES_RESTART + 1];
        let (mut cs, mut sn) = (vec![0.0; GMRES_RESTART], vec![0.0; GMRES_RESTART]);
        let mut g = vec![0.0; GMRES_RESTART + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..GMRES_RESTART {
            m.apply(&v[j], &mut z);
            a.mul_vec(&z, &mut w);
            for pass in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c: f64 = vi.iter().zip(&w).map(|(p, q)| p * q).sum();
                    if pass == 0 {
                        h[i][j] = c;
                    } else {
                        h[i][j] += c;
                    }
                    w.iter_mut().zip(vi).for_each(|(p, q)| *p -= c * q);
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let rho = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if rho == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / rho;
            sn[j] = h[j + 1][j] / rho;
            h[j][j] = rho;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            iters += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= GMRES_TOL || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // back substitution and update x += M^{-1} V y
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut dx = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            dx.iter_mut().zip(vi).for_each(|(d, q)| *d += yi * q);
        }
        m.apply(&dx, &mut z);
        x.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
        if rel <= GMRES_TOL {
            a.mul_vec(x, &mut w);
            let true_rel = norm(&b.iter().zip(&w).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
            if true_rel <= 10.0 * GMRES_TOL {
                return Ok(());
            }
        }
    }
    if rel <= GMRES_ACCEPT {
        log::warn!("GMRES stopped at relative residual {rel:.3e}");
        return Ok(());
    }
    Err(Error::LinearSolver(format!(
        "GMRES did not converge (relative residual {rel:.3e})"
    )))
}
