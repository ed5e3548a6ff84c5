//! Dense real eigendecomposition with exact conjugate pairing.

use faer::linalg::solvers::Eigen;
use faer::Mat;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sorted {
    /// Descending modulus, ties by ascending imaginary part.
    LargestModulus,
    /// Descending real part, ties by ascending imaginary part.
    LargestReal,
}

/// Unit 2-norm, and the first entry of largest modulus made real positive.
pub fn normalize_phase(x: &mut [Complex64]) {
    let nrm = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return;
    }
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, c) in x.iter().enumerate() {
        let a = c.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    let phase = x[best].conj() / (best_abs * nrm);
    x.iter_mut().for_each(|c| *c *= phase);
    x[best].im = 0.0;
}

pub fn sort_pairs<T>(pairs: &mut [(Complex64, T)], order: Sorted) {
    pairs.sort_by(|a, b| {
        let primary = match order {
            Sorted::LargestModulus => b.0.norm().total_cmp(&a.0.norm()),
            Sorted::LargestReal => b.0.re.total_cmp(&a.0.re),
        };
        primary.then(a.0.im.total_cmp(&b.0.im))
    });
}

/// All eigenpairs of a real square matrix, sorted. Eigenvalues of conjugate
/// pairs are exact conjugates and so are their vectors. `None` if the dense
/// solver fails.
pub fn dense_eigen(a: &[Vec<f64>], order: Sorted) -> Option<Vec<(Complex64, Vec<Complex64>)>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let e = Eigen::new_from_real(m.as_ref()).ok()?;
    let s = e.S().column_vector();
    let u = e.U();
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let lam = s[i];
        if lam.im < 0.0 {
            continue;
        }
        let mut v: Vec<Complex64> = (0..n).map(|r| u[(r, i)]).collect();
        normalize_phase(&mut v);
        if lam.im == 0.0 {
            v.iter_mut().for_each(|c| c.im = 0.0);
            pairs.push((lam, v));
        } else {
            let conj: Vec<Complex64> = v.iter().map(|c| c.conj()).collect();
            pairs.push((lam.conj(), conj));
            pairs.push((lam, v));
        }
    }
    if pairs
        .iter()
        .any(|p| !p.0.re.is_finite() || !p.0.im.is_finite())
    {
        return None;
    }
    sort_pairs(&mut pairs, order);
    Some(pairs)
}
