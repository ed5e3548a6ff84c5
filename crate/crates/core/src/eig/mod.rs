//! Eigenpairs of discretized transfer operators and generators.
//!
//! All solvers work on the matrix `L` whose right eigenvectors are densities:
//! `L = A^T` for box matrices (rows are source boxes), `L = A` for collocation
//! operators. Residuals are always recomputed by direct multiplication.

pub mod arnoldi;
pub mod dense;
pub mod linear;

use std::borrow::Cow;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::genulam::GeneratorMatrix;
use crate::sparse::CsrMatrix;
use crate::spectral::SpectralOperator;
use crate::ulam::UlamMatrix;

use arnoldi::{arnoldi, ArnoldiParams, RitzPair};
use dense::{dense_eigen, sort_pairs, Sorted};
use linear::ShiftedSolver;

pub use dense::normalize_phase;

/// Anything with an associated density-acting matrix.
pub trait DensityOperator {
    /// The matrix whose right eigenvectors are densities.
    fn density_matrix(&self) -> Cow<'_, CsrMatrix>;
}

/// A bare CSR matrix follows the box convention: densities are left vectors.
impl DensityOperator for CsrMatrix {
    fn density_matrix(&self) -> Cow<'_, CsrMatrix> {
        Cow::Owned(self.transpose())
    }
}

impl DensityOperator for GeneratorMatrix {
    fn density_matrix(&self) -> Cow<'_, CsrMatrix> {
        Cow::Owned(self.matrix().transpose())
    }
}

impl DensityOperator for UlamMatrix {
    fn density_matrix(&self) -> Cow<'_, CsrMatrix> {
        Cow::Owned(self.matrix().transpose())
    }
}

impl DensityOperator for SpectralOperator {
    fn density_matrix(&self) -> Cow<'_, CsrMatrix> {
        Cow::Borrowed(self.matrix())
    }
}

/// A matrix whose right eigenvectors are wanted as is.
pub struct RightVectors<'a>(pub &'a CsrMatrix);

impl DensityOperator for RightVectors<'_> {
    fn density_matrix(&self) -> Cow<'_, CsrMatrix> {
        Cow::Borrowed(self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigOptions {
    /// Relative residual tolerance; the absolute threshold is `tol * max(1, ||L||_inf)`.
    pub tol: f64,
    /// Krylov dimension; defaults to `max(4 * wanted, wanted + 16)`.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
    /// Problems up to this size use a dense eigendecomposition.
    pub dense_threshold: usize,
    /// Additional pairs computed by shift-invert before selecting by real part.
    pub extra: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            krylov_dim: None,
            max_restarts: 500,
            dense_threshold: 600,
            extra: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shift {
    /// `sigma = 1e-6 * max_i |A_ii|`.
    Auto,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Dense,
    Arnoldi,
    ShiftInvertDirect,
    ShiftInvertIterative,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Dense => "dense",
            SolveMethod::Arnoldi => "arnoldi",
            SolveMethod::ShiftInvertDirect => "shift-invert/sparse-lu",
            SolveMethod::ShiftInvertIterative => "shift-invert/gmres-ilu0",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub eigenvalues: Vec<Complex64>,
    /// Density-side eigenvectors, unit 2-norm, largest entry real positive.
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Absolute residual threshold that was applied.
    pub threshold: f64,
    pub method: SolveMethod,
    pub shift: Option<f64>,
    pub restarts: usize,
    pub applications: usize,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Real part of eigenvector `i`.
    pub fn real_vector(&self, i: usize) -> Vec<f64> {
        self.vectors[i].iter().map(|c| c.re).collect()
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `||L x - lambda x||_2 / ||x||_2`.
pub fn operator_residual(l: &CsrMatrix, lambda: Complex64, x: &[Complex64]) -> f64 {
    let n = x.len();
    let re: Vec<f64> = x.iter().map(|c| c.re).collect();
    let im: Vec<f64> = x.iter().map(|c| c.im).collect();
    let mut lre = vec![0.0; n];
    let mut lim = vec![0.0; n];
    l.mul_vec(&re, &mut lre);
    l.mul_vec(&im, &mut lim);
    let r: f64 = (0..n)
        .map(|i| (Complex64::new(lre[i], lim[i]) - lambda * x[i]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    r / norm2(x)
}

/// Left residual `||v A - lambda v||_2 / ||v||_2`.
pub fn residual(a: &CsrMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    operator_residual(&a.transpose(), lambda, v)
}

fn threshold(l: &CsrMatrix, tol: f64) -> f64 {
    tol * l.norm_inf().max(1.0)
}

/// First `k` entries, extended by one if that would split a conjugate pair.
fn take_closed<T>(mut pairs: Vec<(Complex64, T)>, k: usize) -> Vec<(Complex64, T)> {
    let mut k = k.min(pairs.len());
    if k > 0 && k < pairs.len() && pairs[k - 1].0.im != 0.0 && pairs[k].0 == pairs[k - 1].0.conj() {
        k += 1;
    }
    pairs.truncate(k);
    pairs
}

/// The `k` eigenvalues nearest `sigma` (conjugate pairs kept whole), reported
/// by descending real part. Real parts closer than `resolution` count as equal
/// and are then ordered by modulus, so a roundoff-sized real part cannot put an
/// oscillatory mode ahead of the null vector.
fn select_near_shift<T>(
    mut pairs: Vec<(Complex64, T)>,
    sigma: f64,
    k: usize,
    resolution: f64,
) -> Vec<(Complex64, T)> {
    let s = Complex64::new(sigma, 0.0);
    pairs.sort_by(|a, b| {
        (a.0 - s)
            .norm()
            .total_cmp(&(b.0 - s).norm())
            .then(a.0.im.total_cmp(&b.0.im))
    });
    let mut pairs = take_closed(pairs, k);
    let q = resolution.max(f64::MIN_POSITIVE);
    pairs.sort_by(|a, b| {
        // adding 0.0 folds -0.0 into +0.0
        let (ra, rb) = ((a.0.re / q).round() + 0.0, (b.0.re / q).round() + 0.0);
        rb.total_cmp(&ra)
            .then(a.0.norm().total_cmp(&b.0.norm()))
            .then(a.0.im.total_cmp(&b.0.im))
    });
    pairs
}

fn validate(n: usize, k: usize, tol: f64) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

fn dense_solution(
    l: &CsrMatrix,
    k: usize,
    order: Sorted,
    opts: &EigOptions,
) -> Result<EigenSolution> {
    let pairs = dense_eigen(&l.to_dense(), order).ok_or_else(|| Error::NotConverged {
        converged: 0,
        requested: k,
        iterations: 0,
    })?;
    let pairs = take_closed(pairs, k);
    finish(l, pairs, SolveMethod::Dense, None, 0, 0, opts)
}

fn finish(
    l: &CsrMatrix,
    pairs: Vec<(Complex64, Vec<Complex64>)>,
    method: SolveMethod,
    shift: Option<f64>,
    restarts: usize,
    applications: usize,
    opts: &EigOptions,
) -> Result<EigenSolution> {
    let thr = threshold(l, opts.tol);
    let residuals: Vec<f64> = pairs
        .iter()
        .map(|(lam, v)| operator_residual(l, *lam, v))
        .collect();
    let converged = residuals.iter().all(|&r| r <= thr);
    let (eigenvalues, vectors) = pairs.into_iter().unzip();
    Ok(EigenSolution {
        eigenvalues,
        vectors,
        residuals,
        converged,
        threshold: thr,
        method,
        shift,
        restarts,
        applications,
    })
}

fn krylov_dim(opts: &EigOptions, wanted: usize, n: usize) -> usize {
    opts.krylov_dim
        .unwrap_or((4 * wanted).max(wanted + 16))
        .min(n)
}

/// The `k` eigenpairs of largest modulus, descending.
pub fn eigs_largest_modulus<O: DensityOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &EigOptions,
) -> Result<EigenSolution> {
    let l = op.density_matrix();
    let l: &CsrMatrix = &l;
    let n = l.nrows();
    validate(n, k, opts.tol)?;
    let m = krylov_dim(opts, k, n);
    if n <= opts.dense_threshold || m >= n {
        return dense_solution(l, k, Sorted::LargestModulus, opts);
    }
    let thr = threshold(l, opts.tol);
    let mut apply = |x: &[f64], y: &mut [f64]| l.mul_vec(x, y);
    let mut accept = |pairs: &[RitzPair]| {
        pairs.len() >= k.min(n)
            && pairs
                .iter()
                .all(|p| operator_residual(l, p.value, &p.vector) <= thr)
    };
    let params = ArnoldiParams {
        nev: k,
        krylov_dim: m,
        max_restarts: opts.max_restarts,
        seed: opts.seed,
    };
    let out = arnoldi(n, &mut apply, &params, &mut accept);
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> =
        out.pairs.into_iter().map(|p| (p.value, p.vector)).collect();
    sort_pairs(&mut pairs, Sorted::LargestModulus);
    let pairs = take_closed(pairs, k);
    finish(
        l,
        pairs,
        SolveMethod::Arnoldi,
        None,
        out.restarts,
        out.applications,
        opts,
    )
}

/// Default shift for shift-invert.
pub fn auto_shift(l: &CsrMatrix) -> f64 {
    let d = l.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d > 0.0 {
        1e-6 * d
    } else {
        1e-6 * l.norm_inf().max(1.0)
    }
}

/// The `k` eigenpairs of largest real part, via Arnoldi on `(L - sigma I)^{-1}`.
pub fn eigs_near_zero<O: DensityOperator + ?Sized>(
    op: &O,
    k: usize,
    opts: &EigOptions,
    shift: Shift,
) -> Result<EigenSolution> {
    let l = op.density_matrix();
    let l: &CsrMatrix = &l;
    let n = l.nrows();
    validate(n, k, opts.tol)?;
    let nev = (k + opts.extra).min(n);
    let m = krylov_dim(opts, nev, n);
    let mut sigma = match shift {
        Shift::Auto => auto_shift(l),
        Shift::Value(s) => s,
    };
    let thr = threshold(l, opts.tol);
    if n <= opts.dense_threshold || m >= n {
        let pairs = dense_eigen(&l.to_dense(), Sorted::LargestReal).ok_or(Error::NotConverged {
            converged: 0,
            requested: k,
            iterations: 0,
        })?;
        let pairs = select_near_shift(pairs, sigma, k, thr);
        return finish(l, pairs, SolveMethod::Dense, None, 0, 0, opts);
    }
    let mut attempt = 0;
    let solver = loop {
        match ShiftedSolver::new(l, sigma) {
            Ok(s) => break s,
            Err(Error::SingularShift(_)) if attempt < 5 => {
                attempt += 1;
                let bumped = sigma * (1.0 + 0.37 * attempt as f64) + 1e-12;
                log::warn!("shifted system singular at sigma={sigma:e}; retrying with {bumped:e}");
                sigma = bumped;
            }
            Err(e) => return Err(e),
        }
    };
    let method = if solver.is_direct() {
        SolveMethod::ShiftInvertDirect
    } else {
        SolveMethod::ShiftInvertIterative
    };
    log::debug!(
        "shift-invert with sigma={sigma:e}, method {}",
        method.as_str()
    );
    let mut failure: Option<Error> = None;
    let mut apply = |x: &[f64], y: &mut [f64]| {
        if failure.is_some() {
            y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        if let Err(e) = solver.solve(x, y) {
            failure = Some(e);
            y.iter_mut().for_each(|v| *v = 0.0);
        }
    };
    let to_lambda = |theta: Complex64| Complex64::new(sigma, 0.0) + theta.inv();
    let mut accept = |pairs: &[RitzPair]| {
        let mapped: Vec<(Complex64, &Vec<Complex64>)> = pairs
            .iter()
            .filter(|p| p.value.norm() > 0.0)
            .map(|p| (to_lambda(p.value), &p.vector))
            .collect();
        let wanted = select_near_shift(mapped, sigma, k, thr);
        wanted.len() >= k
            && wanted
                .iter()
                .all(|(lam, v)| operator_residual(l, *lam, v) <= thr)
    };
    let params = ArnoldiParams {
        nev,
        krylov_dim: m,
        max_restarts: opts.max_restarts,
        seed: opts.seed,
    };
    let out = arnoldi(n, &mut apply, &params, &mut accept);
    if let Some(e) = failure {
        return Err(e);
    }
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = out
        .pairs
        .into_iter()
        .filter(|p| p.value.norm() > 0.0)
        .map(|p| (to_lambda(p.value), p.vector))
        .collect();
    // conjugate Ritz values map to conjugate eigenvalues; make the pairing exact
    for i in 0..pairs.len() {
        if pairs[i].0.im > 0.0 {
            if let Some(j) = (0..pairs.len()).find(|&j| {
                j != i && (pairs[j].0 - pairs[i].0.conj()).norm() <= 1e-9 * pairs[i].0.norm()
            }) {
                let conj_vec: Vec<Complex64> = pairs[i].1.iter().map(|c| c.conj()).collect();
                pairs[j] = (pairs[i].0.conj(), conj_vec);
            }
        } else if pairs[i].0.im == 0.0 || pairs[i].0.im.abs() <= 1e-14 * pairs[i].0.norm() {
            pairs[i].0.im = 0.0;
        }
    }
    let pairs = select_near_shift(pairs, sigma, k, thr);
    finish(
        l,
        pairs,
        method,
        Some(sigma),
        out.restarts,
        out.applications,
        opts,
    )
}

/// Nonnegative stationary density of a generator, normalized so `sum v_i m(B_i) = 1`.
pub fn stationary_left_vector(a: &GeneratorMatrix) -> Result<Vec<f64>> {
    stationary_left_vector_with(a, &EigOptions::default())
}

pub fn stationary_left_vector_with(a: &GeneratorMatrix, opts: &EigOptions) -> Result<Vec<f64>> {
    let n = a.len();
    let m = a.grid().box_measure();
    if n == 1 {
        return Ok(vec![1.0 / m]);
    }
    let sol = eigs_near_zero(a, 4.min(n), opts, Shift::Auto)?;
    stationary_from_solution(a, &sol)
}

/// Stationary density from an existing near-zero solve of `a`, so callers
/// that need the other eigenpairs (or a custom shift) solve only once.
pub fn stationary_from_solution(a: &GeneratorMatrix, sol: &EigenSolution) -> Result<Vec<f64>> {
    let m = a.grid().box_measure();
    if a.len() == 1 {
        return Ok(vec![1.0 / m]);
    }
    if sol.eigenvalues.is_empty() {
        return Err(Error::NotConverged {
            converged: 0,
            requested: 1,
            iterations: sol.restarts,
        });
    }
    if !sol.converged {
        let good = sol
            .residuals
            .iter()
            .filter(|&&r| r <= sol.threshold)
            .count();
        return Err(Error::NotConverged {
            converged: good,
            requested: sol.eigenvalues.len(),
            iterations: sol.restarts,
        });
    }
    let scale = a.matrix().norm_inf().max(f64::MIN_POSITIVE);
    let null_tol = 1e-8 * scale;
    let dimension = sol
        .eigenvalues
        .iter()
        .filter(|l| l.norm() <= null_tol)
        .count();
    let mut v = sol.real_vector(0);
    let vmax = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut negative = false;
    for x in v.iter_mut() {
        if *x < 0.0 {
            if *x > -CLAMP * vmax {
                *x = 0.0;
            } else {
                negative = true;
            }
        }
    }
    if dimension > 1 || negative || sol.eigenvalues[0].norm() > null_tol {
        let representative = power_stationary(a);
        return Err(Error::MultipleNullSpace {
            dimension: dimension.max(1),
            representative,
        });
    }
    let mass: f64 = v.iter().sum::<f64>() * m;
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    v.iter_mut().for_each(|x| *x /= mass);
    Ok(v)
}

/// Stationary node values of a collocation operator, normalized to unit quadrature mass.
///
/// With an even Fourier node count and no diffusion, a zero first derivative
/// of the Nyquist mode adds a spurious null vector (the alternating mode
/// divided by `F`). When the numerical null space is larger than one, the
/// combination whose flux `F_k v` has the least Nyquist content on every even
/// Fourier axis is returned.
pub fn stationary_collocation_vector(op: &SpectralOperator, opts: &EigOptions) -> Result<Vec<f64>> {
    let grid = op.grid();
    let n = grid.len();
    let k = 4.min(n);
    let sol = eigs_near_zero(op, k, opts, Shift::Auto)?;
    let null_tol = 1e-8 * op.matrix().norm_inf().max(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (i, lam) in sol.eigenvalues.iter().enumerate() {
        if lam.norm() > null_tol || lam.im < 0.0 {
            continue;
        }
        basis.push(sol.vectors[i].iter().map(|c| c.re).collect());
        if lam.im > 0.0 {
            basis.push(sol.vectors[i].iter().map(|c| c.im).collect());
        }
    }
    let mut v = if basis.len() <= 1 {
        sol.real_vector(0)
    } else {
        let rows = nyquist_content(op, &basis);
        let r = basis.len();
        let gram: Vec<Vec<f64>> = (0..r)
            .map(|a| {
                (0..r)
                    .map(|b| rows.iter().map(|row| row[a] * row[b]).sum())
                    .collect()
            })
            .collect();
        let eig = dense_eigen(&gram, Sorted::LargestReal).ok_or_else(|| {
            Error::LinearSolver("eigendecomposition of the Nyquist Gram matrix failed".into())
        })?;
        let c = &eig[r - 1].1;
        log::info!("collocation null space has dimension {r}; removing Nyquist content");
        (0..n)
            .map(|i| basis.iter().zip(c).map(|(b, ck)| b[i] * ck.re).sum())
            .collect()
    };
    let w = grid.quadrature_weights();
    let mass: f64 = v.iter().zip(&w).map(|(x, w)| x * w).sum();
    if mass == 0.0 {
        return Err(Error::ZeroMass);
    }
    v.iter_mut().for_each(|x| *x /= mass);
    Ok(v)
}

/// Alternating sums of `F_k v` along every line of each even Fourier axis `k`;
/// one row per line, one column per basis vector.
fn nyquist_content(op: &SpectralOperator, basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let grid = op.grid();
    let counts = grid.counts();
    let d = counts.len();
    let mut rows = Vec::new();
    for axis in 0..d {
        if grid.bases()[axis] != crate::spectral::Basis::Fourier || counts[axis] % 2 == 1 {
            continue;
        }
        let stride: usize = counts[axis + 1..].iter().product();
        let mut lines = vec![vec![0.0; basis.len()]; grid.len() / counts[axis]];
        for i in 0..grid.len() {
            let ik = (i / stride) % counts[axis];
            let line = (i / (stride * counts[axis])) * stride + i % stride;
            let sign = if ik % 2 == 0 { 1.0 } else { -1.0 } * op.node_field()[i][axis];
            for (slot, b) in lines[line].iter_mut().zip(basis) {
                *slot += sign * b[i];
            }
        }
        rows.extend(lines);
    }
    rows
}

/// Entries above `-CLAMP * ||v||_inf` count as rounding noise.
const CLAMP: f64 = 1e-12;

/// Stationary vector of the uniformized chain `I + A/c`, started from the uniform density.
fn power_stationary(a: &GeneratorMatrix) -> Vec<f64> {
    let n = a.len();
    let m = a.grid().box_measure();
    let c = 1.01
        * a.matrix()
            .diagonal()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let lt = a.matrix().transpose();
    let mut x = vec![1.0 / (n as f64 * m); n];
    let mut y = vec![0.0; n];
    for _ in 0..200_000 {
        lt.mul_vec(&x, &mut y);
        let mut change = 0.0;
        for i in 0..n {
            let next = x[i] + y[i] / c;
            change += (next - x[i]).abs();
            y[i] = next.max(0.0);
        }
        std::mem::swap(&mut x, &mut y);
        if change * m < 1e-13 {
            break;
        }
    }
    let mass: f64 = x.iter().sum::<f64>() * m;
    x.iter_mut().for_each(|v| *v /= mass);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_builtin_field;
    use crate::genulam::assemble_generator;
    use crate::grid::make_grid;
    use crate::ulam::assemble_ulam;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn even_fourier_collocation_drops_the_nyquist_null_vector() {
        let f = make_builtin_field("sine_flow", &[]).unwrap();
        for n in [16, 17] {
            let g = crate::spectral::SpectralGrid::new(f.domain(), &[n]).unwrap();
            let op = crate::spectral::assemble_fpe(&g, &f, 0.0).unwrap();
            let v = stationary_collocation_vector(&op, &EigOptions::default()).unwrap();
            let flux: Vec<f64> = (0..n)
                .map(|i| v[i] * f.eval(&g.node(i)).unwrap()[0])
                .collect();
            for p in &flux {
                assert!((p / flux[0] - 1.0).abs() < 1e-10, "n={n}: {flux:?}");
            }
        }
    }

    fn sparse_opts() -> EigOptions {
        EigOptions {
            dense_threshold: 0,
            ..EigOptions::default()
        }
    }

    fn sine_gen(n: usize) -> GeneratorMatrix {
        let f = make_builtin_field("sine_flow", &[]).unwrap();
        assemble_generator(&make_grid(f.domain(), &[n]).unwrap(), &f, 1).unwrap()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let id = CsrMatrix::identity(5);
        let s = eigs_largest_modulus(&id, 3, &EigOptions::default()).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l == c(1.0, 0.0)));
        let id = CsrMatrix::identity(200);
        let s = eigs_largest_modulus(&id, 3, &sparse_opts()).unwrap();
        assert!(s.converged);
        assert!(s
            .eigenvalues
            .iter()
            .all(|&l| (l - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn two_state_chain() {
        let p = CsrMatrix::from_dense(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        let s = eigs_largest_modulus(&p, 2, &EigOptions::default()).unwrap();
        assert!((s.eigenvalues[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(0.8, 0.0)).norm() < 1e-14);
        let a = CsrMatrix::from_dense(&[vec![-2.2, 2.2], vec![2.2, -2.2]]);
        let s = eigs_near_zero(&a, 2, &EigOptions::default(), Shift::Auto).unwrap();
        assert!(s.eigenvalues[0].norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(-4.4, 0.0)).norm() < 1e-13);
        let z = CsrMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let s = eigs_near_zero(&z, 1, &EigOptions::default(), Shift::Auto).unwrap();
        assert_eq!(s.eigenvalues, vec![c(0.0, 0.0)]);
    }

    #[test]
    fn residual_examples() {
        let a = CsrMatrix::from_dense(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        let exact = [c(1.0, 0.0), c(-1.0, 0.0)];
        assert!(residual(&a, c(0.8, 0.0), &exact) < 1e-14);
        let noisy = [c(1.0 + 1e-6, 0.0), c(-1.0 + 3e-7, 0.0)];
        let r = residual(&a, c(0.8, 0.0), &noisy);
        assert!(r > 1e-8 && r < 1e-4, "{r}");
        let g = sine_gen(16);
        let v: Vec<Complex64> = (0..16)
            .map(|i| c(((i * 7919) % 13) as f64 + 1.0, 0.0))
            .collect();
        assert!(residual(g.matrix(), c(0.0, 0.0), &v) > 1e-2);
    }

    #[test]
    fn sine_generator_spectrum_dense_and_sparse_agree() {
        let g = sine_gen(640);
        let d = eigs_near_zero(
            &g,
            3,
            &EigOptions {
                dense_threshold: 1000,
                ..EigOptions::default()
            },
            Shift::Auto,
        )
        .unwrap();
        let s = eigs_near_zero(&g, 3, &sparse_opts(), Shift::Auto).unwrap();
        assert!(d.converged && s.converged);
        assert_eq!(s.method, SolveMethod::ShiftInvertDirect);
        assert!(s.eigenvalues[0].norm() < 1e-10);
        assert!(s.eigenvalues[1].re < 0.0);
        assert_eq!(s.eigenvalues[1], s.eigenvalues[2].conj());
        for i in 0..3 {
            assert!(
                (d.eigenvalues[i] - s.eigenvalues[i]).norm() < 1e-7,
                "{} vs {}",
                d.eigenvalues[i],
                s.eigenvalues[i]
            );
            assert!(s.residuals[i] <= s.threshold);
        }
        assert!(s.eigenvalues[1].im < s.eigenvalues[2].im);
    }

    #[test]
    fn sine_generator_at_sixty_four_boxes() {
        let g = sine_gen(64);
        let s = eigs_near_zero(&g, 3, &EigOptions::default(), Shift::Auto).unwrap();
        assert!(s.eigenvalues[0].norm() < 1e-10);
        assert!(s.eigenvalues[1].re < 0.0);
    }

    #[test]
    fn arnoldi_matches_dense_on_ulam_matrix() {
        let f = make_builtin_field("sine_flow", &[]).unwrap();
        let g = make_grid(f.domain(), &[128]).unwrap();
        let p = assemble_ulam(&g, &f, 1.0 / 16.0, 16, 0.0, 1).unwrap();
        let d = eigs_largest_modulus(&p, 4, &EigOptions::default()).unwrap();
        let s = eigs_largest_modulus(&p, 4, &sparse_opts()).unwrap();
        assert!(s.converged, "{:?}", s.residuals);
        for i in 0..d.len().min(s.len()) {
            assert!((d.eigenvalues[i].norm() - s.eigenvalues[i].norm()).abs() < 1e-8);
        }
        assert!((s.eigenvalues[0] - c(1.0, 0.0)).norm() < 1e-10);
        assert!(s.vectors[0].iter().all(|v| v.re >= -1e-12));
    }

    #[test]
    fn stationary_vector_of_sine_flow_is_inverse_field() {
        for n in [8, 32, 700] {
            let g = sine_gen(n);
            let v = stationary_left_vector(&g).unwrap();
            let f = make_builtin_field("sine_flow", &[]).unwrap();
            let grid = g.grid();
            let prod: Vec<f64> = (0..n)
                .map(|i| {
                    v[i] * f
                        .eval(&[grid.lower_corner(i)[0] + grid.widths()[0]])
                        .unwrap()[0]
                })
                .collect();
            let mean = prod.iter().sum::<f64>() / n as f64;
            assert!(prod.iter().all(|p| (p / mean - 1.0).abs() < 1e-9), "n={n}");
            let mass: f64 = v.iter().sum::<f64>() * grid.box_measure();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_drift_has_uniform_stationary_vector() {
        let f = make_builtin_field("constant", &[1.0, 0.0]).unwrap();
        let g = assemble_generator(&make_grid(f.domain(), &[8, 8]).unwrap(), &f, 3).unwrap();
        // a drift along one axis leaves every row of boxes invariant
        match stationary_left_vector(&g) {
            Err(Error::MultipleNullSpace {
                dimension,
                representative,
            }) => {
                assert!(dimension > 1);
                assert!(representative.iter().all(|&x| (x - 1.0).abs() < 1e-9));
            }
            other => panic!("expected a multiple null space, got {other:?}"),
        }
        let f = make_builtin_field("constant", &[1.0, 0.7]).unwrap();
        let g = assemble_generator(&make_grid(f.domain(), &[7, 7]).unwrap(), &f, 3).unwrap();
        let v = stationary_left_vector(&g).unwrap();
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-9));
    }
}
