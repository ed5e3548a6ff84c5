//! Post-processing of densities and eigenvectors: normalization, almost-invariant
//! splits, invariance ratios, generator rates, escape rates and attractor support.
//!
//! A density vector `v` on a box grid stands for the measure with box masses
//! `v_i m(B_i)`; every ratio and rate below uses that convention.

use num_complex::Complex64;
use serde::Serialize;

use crate::eig::{eigs_largest_modulus, EigOptions, EigenSolution};
use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::quadrature::{adaptive_integrate, gauss_legendre_on};
use crate::sparse::CsrMatrix;
use crate::spectral::{eval_spectral_density, SpectralGrid};

#[derive(Clone, Debug, PartialEq)]
pub enum Discretization {
    Boxes(BoxGrid),
    Spectral(SpectralGrid),
}

impl Discretization {
    pub fn len(&self) -> usize {
        match self {
            Discretization::Boxes(g) => g.len(),
            Discretization::Spectral(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mass weight of each entry: box measure, or node quadrature weight.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Discretization::Boxes(g) => vec![g.box_measure(); g.len()],
            Discretization::Spectral(g) => g.quadrature_weights(),
        }
    }

    /// Representative point of each entry: box center or collocation node.
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Discretization::Boxes(g) => (0..g.len()).map(|i| g.center(i)).collect(),
            Discretization::Spectral(g) => (0..g.len()).map(|i| g.node(i)).collect(),
        }
    }

    /// L1 norm of the function represented by `v`.
    pub fn l1_norm(&self, v: &[f64]) -> f64 {
        match self {
            Discretization::Boxes(g) => v.iter().map(|x| x.abs()).sum::<f64>() * g.box_measure(),
            Discretization::Spectral(g) if g.dim() == 1 => {
                let iv = g.axis(0).interval;
                adaptive_integrate(
                    |x| eval_spectral_density(g, v, &[x]).abs(),
                    iv.lower,
                    iv.upper,
                    1e-14,
                )
            }
            Discretization::Spectral(g) => g
                .quadrature_weights()
                .iter()
                .zip(v)
                .map(|(w, x)| w * x.abs())
                .sum(),
        }
    }
}

/// A density together with its discretization and normalization record.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub discretization: Discretization,
    /// Factor the input vector was multiplied by.
    pub scale: f64,
}

impl DensityField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Integral of the density over the index set.
    pub fn mass_of(&self, set: &[usize]) -> f64 {
        let w = self.discretization.weights();
        set.iter().map(|&i| self.values[i] * w[i]).sum()
    }

    /// L1 distance to an exact density `g`.
    ///
    /// One-dimensional representations integrate adaptively (box by box for
    /// piecewise constants); higher dimensions use a 4-point Gauss rule per box
    /// or the node quadrature of the collocation grid.
    pub fn l1_error(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        match &self.discretization {
            Discretization::Boxes(grid) if grid.dim() == 1 => (0..grid.len())
                .map(|i| {
                    let lo = grid.lower_corner(i)[0];
                    let v = self.values[i];
                    adaptive_integrate(|x| (v - g(&[x])).abs(), lo, lo + grid.widths()[0], 1e-15)
                })
                .sum(),
            Discretization::Boxes(grid) => {
                let d = grid.dim();
                (0..grid.len())
                    .map(|i| {
                        let lo = grid.lower_corner(i);
                        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
                            .map(|k| gauss_legendre_on(4, lo[k], lo[k] + grid.widths()[k]))
                            .collect();
                        let mut sum = 0.0;
                        let mut x = vec![0.0; d];
                        for flat in 0..4usize.pow(d as u32) {
                            let mut rem = flat;
                            let mut w = 1.0;
                            for k in (0..d).rev() {
                                let q = rem % 4;
                                rem /= 4;
                                x[k] = rules[k].0[q];
                                w *= rules[k].1[q];
                            }
                            sum += w * (self.values[i] - g(&x)).abs();
                        }
                        sum
                    })
                    .sum()
            }
            Discretization::Spectral(grid) if grid.dim() == 1 => {
                let iv = grid.axis(0).interval;
                adaptive_integrate(
                    |x| (eval_spectral_density(grid, &self.values, &[x]) - g(&[x])).abs(),
                    iv.lower,
                    iv.upper,
                    1e-15,
                )
            }
            Discretization::Spectral(grid) => grid
                .quadrature_weights()
                .iter()
                .enumerate()
                .map(|(i, w)| w * (self.values[i] - g(&grid.node(i))).abs())
                .sum(),
        }
    }
}

/// Sign-fixes `v` (largest-magnitude entry positive) and scales it to unit L1 norm.
pub fn normalize_density(v: &[f64], discretization: &Discretization) -> Result<DensityField> {
    if v.len() != discretization.len() {
        return Err(Error::ShapeMismatch {
            expected: discretization.len(),
            found: v.len(),
        });
    }
    let mut imax = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[imax].abs() {
            imax = i;
        }
    }
    let peak = v.get(imax).copied().unwrap_or(0.0);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::ZeroVector);
    }
    if peak > 0.0 && (discretization.l1_norm(v) - 1.0).abs() <= 4.0 * f64::EPSILON {
        return Ok(DensityField {
            values: v.to_vec(),
            discretization: discretization.clone(),
            scale: 1.0,
        });
    }
    // divide by the signed peak first so power-of-two rescalings land on the same vector
    let mut values: Vec<f64> = v.iter().map(|x| x / peak).collect();
    let norm = discretization.l1_norm(&values);
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut scale = 1.0 / peak;
    if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
        values.iter_mut().for_each(|x| *x /= norm);
        scale /= norm;
    }
    Ok(DensityField {
        values,
        discretization: discretization.clone(),
        scale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlmostInvariantSplit {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    /// Whether the real part of a complex eigenvector was used.
    pub used_real_part: bool,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    /// One of the two sets is empty.
    pub degenerate: bool,
    pub t: Option<f64>,
    pub ratio_plus: Option<f64>,
    pub ratio_minus: Option<f64>,
    /// `-t Re(lambda)`.
    pub bound: Option<f64>,
    /// Escape rates per unit time, to compare against `-Re(lambda)`.
    pub escape_plus: Option<f64>,
    pub escape_minus: Option<f64>,
}

/// `A+ = {i : Re f_i >= 0}`, `A-` the complement.
pub fn split_almost_invariant(f: &[Complex64], lambda: Complex64) -> AlmostInvariantSplit {
    let (plus, minus): (Vec<usize>, Vec<usize>) = (0..f.len()).partition(|&i| f[i].re >= 0.0);
    AlmostInvariantSplit {
        eigenvalue_re: lambda.re,
        eigenvalue_im: lambda.im,
        used_real_part: lambda.im != 0.0 || f.iter().any(|c| c.im != 0.0),
        degenerate: plus.is_empty() || minus.is_empty(),
        plus,
        minus,
        t: None,
        ratio_plus: None,
        ratio_minus: None,
        bound: None,
        escape_plus: None,
        escape_minus: None,
    }
}

impl AlmostInvariantSplit {
    /// Attaches invariance ratios (weighted by `nu`), escape rates and the bound for a transition matrix at time `t`.
    pub fn with_transition(mut self, p: &CsrMatrix, t: f64, nu: &DensityField) -> Result<Self> {
        self.t = Some(t);
        self.bound = Some(-t * self.eigenvalue_re);
        if !self.plus.is_empty() {
            self.ratio_plus = Some(invariance_ratio(p, &self.plus, nu)?);
            self.escape_plus = Some(escape_rate(p, &self.plus, t)?);
        }
        if !self.minus.is_empty() {
            self.ratio_minus = Some(invariance_ratio(p, &self.minus, nu)?);
            self.escape_minus = Some(escape_rate(p, &self.minus, t)?);
        }
        Ok(self)
    }

    /// Membership label per index: `1` for A+, `-1` for A-.
    pub fn labels(&self, n: usize) -> Vec<i8> {
        let mut out = vec![-1; n];
        for &i in &self.plus {
            out[i] = 1;
        }
        out
    }
}

/// `sum_{i,j in A} nu_i m_i P_ij / sum_{i in A} nu_i m_i`.
pub fn invariance_ratio(p: &CsrMatrix, set: &[usize], nu: &DensityField) -> Result<f64> {
    let w = nu.discretization.weights();
    let mut member = vec![false; p.nrows()];
    set.iter().for_each(|&i| member[i] = true);
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in set {
        let mass = nu.values[i] * w[i];
        den += mass;
        let stay: f64 = p.row(i).filter(|(j, _)| member[*j]).map(|e| e.1).sum();
        num += mass * stay;
    }
    if den == 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(num / den)
}

/// `sum_{j in S} (f_S A)_j m_j` with `f_S` the restriction of `f` normalized on `S`.
pub fn generator_rate(a: &CsrMatrix, f: &DensityField, set: &[usize]) -> Result<f64> {
    let w = f.discretization.weights();
    let mass: f64 = set.iter().map(|&i| f.values[i] * w[i]).sum();
    if mass == 0.0 {
        return Err(Error::ZeroMass);
    }
    let mut member = vec![false; a.nrows()];
    set.iter().for_each(|&i| member[i] = true);
    let mut rate = 0.0;
    for &i in set {
        let fi = f.values[i] / mass;
        for (j, v) in a.row(i) {
            if member[j] {
                rate += fi * v * w[j];
            }
        }
    }
    Ok(rate)
}

/// `-(1/t) log rho(P_AA)`; `+inf` when the restricted spectral radius is 0.
pub fn escape_rate(p: &CsrMatrix, set: &[usize], t: f64) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("escape rate of an empty set".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "flow time must be positive, got {t}"
        )));
    }
    let sub = p.submatrix(set);
    if sub.values().iter().all(|&v| v == 0.0) {
        return Ok(f64::INFINITY);
    }
    let sol = eigs_largest_modulus(&sub, 1, &EigOptions::default())?;
    let rho = sol.eigenvalues[0].norm();
    if rho == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-rho.ln() / t)
}

/// Entries with `f_i > c`, and the mass they carry.
pub fn attractor_support(f: &DensityField, c: f64) -> (Vec<usize>, f64) {
    let w = f.discretization.weights();
    let set: Vec<usize> = (0..f.len()).filter(|&i| f.values[i] > c).collect();
    let mass = set.iter().map(|&i| f.values[i] * w[i]).sum();
    (set, mass)
}

/// Largest threshold whose support carries at least `fraction` of the mass.
pub fn threshold_for_mass(f: &DensityField, fraction: f64) -> f64 {
    let w = f.discretization.weights();
    let mut order: Vec<usize> = (0..f.len()).filter(|&i| f.values[i] > 0.0).collect();
    order.sort_by(|&a, &b| f.values[b].total_cmp(&f.values[a]));
    let total: f64 = order.iter().map(|&i| f.values[i] * w[i]).sum();
    let mut acc = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        acc += f.values[i] * w[i];
        if acc >= fraction * total {
            // next smaller value, so that `> c` keeps exactly the prefix
            let next = order.get(rank + 1).map_or(0.0, |&j| f.values[j]);
            return if next < f.values[i] {
                next
            } else {
                0.5 * f.values[i]
            };
        }
    }
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappingRow {
    pub index: usize,
    pub generator_re: f64,
    pub generator_im: f64,
    pub ulam_log_re: f64,
    pub ulam_log_im: f64,
    pub difference: f64,
}

impl MappingRow {
    pub fn generator(&self) -> Complex64 {
        Complex64::new(self.generator_re, self.generator_im)
    }

    pub fn ulam_log(&self) -> Complex64 {
        Complex64::new(self.ulam_log_re, self.ulam_log_im)
    }

    /// `|difference| / |lambda_gen|`, infinite when the generator eigenvalue is 0 and they differ.
    pub fn relative(&self) -> f64 {
        let g = self.generator().norm();
        if g == 0.0 {
            if self.difference == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.difference / g
        }
    }
}

/// Row `i` compares `lambda_gen,i` with the principal `log(lambda_ulam,i) / t`.
pub fn spectral_mapping_table(
    gen: &EigenSolution,
    ulam: &EigenSolution,
    t: f64,
) -> Result<Vec<MappingRow>> {
    spectral_mapping_rows(&gen.eigenvalues, &ulam.eigenvalues, t)
}

/// [`spectral_mapping_table`] on bare eigenvalue lists, e.g. read back from files.
pub fn spectral_mapping_rows(
    gen: &[Complex64],
    ulam: &[Complex64],
    t: f64,
) -> Result<Vec<MappingRow>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "flow time must be positive, got {t}"
        )));
    }
    gen.iter()
        .zip(ulam)
        .enumerate()
        .map(|(index, (&g, &u))| {
            if u.norm() == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "Ulam eigenvalue {index} is zero"
                )));
            }
            let l = u.ln() / t;
            Ok(MappingRow {
                index,
                generator_re: g.re,
                generator_im: g.im,
                ulam_log_re: l.re,
                ulam_log_im: l.im,
                difference: (l - g).norm(),
            })
        })
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Matrix exponential by scaling and squaring of a degree-18 Taylor polynomial.
pub fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let x: Vec<Vec<f64>> = a
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    // Horner: I + X(I + X/2(I + X/3(...)))
    let mut e = vec![vec![0.0; n]; n];
    for (i, row) in e.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for k in (1..=18).rev() {
        let mut next = matmul(&x, &e);
        for (i, row) in next.iter_mut().enumerate() {
            row.iter_mut().for_each(|v| *v /= k as f64);
            row[i] += 1.0;
        }
        e = next;
    }
    for _ in 0..s {
        e = matmul(&e, &e);
    }
    e
}
