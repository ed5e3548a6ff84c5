//! Spectral collocation of `A_eps f = (eps^2/2) Lap f - div(f F)` on tensor grids.
//!
//! Periodic axes use Fourier (equispaced) nodes, closed axes Chebyshev
//! Gauss–Lobatto nodes. The operator acts on vectors of node values, so an
//! invariant density is a right null vector. Each row couples a node only to
//! the nodes on its axis lines, so the operator is stored in CSR form; a dense
//! copy is available on demand for small grids.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Boundary, DomainSpec, Interval, VectorField};
use crate::sparse::CsrMatrix;

/// Node count above which [`SpectralOperator::to_dense`] refuses to materialize.
pub const DENSE_LIMIT: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Fourier,
    Chebyshev,
}

/// Row-major square matrix as nested rows.
pub type DenseMatrix = Vec<Vec<f64>>;

/// Nodes of one axis, ascending.
pub fn axis_nodes(basis: Basis, count: usize, iv: Interval) -> Vec<f64> {
    match basis {
        Basis::Fourier => (0..count)
            .map(|j| iv.lower + iv.width() * j as f64 / count as f64)
            .collect(),
        Basis::Chebyshev => {
            let n = (count - 1) as f64;
            (0..count)
                .map(|j| {
                    let s = -(PI * j as f64 / n).cos();
                    // pin the end nodes to the interval end points exactly
                    if j == 0 {
                        iv.lower
                    } else if j == count - 1 {
                        iv.upper
                    } else {
                        iv.lower + 0.5 * (s + 1.0) * iv.width()
                    }
                })
                .collect()
        }
    }
}

/// First and second differentiation matrices on `count` nodes of `interval`.
pub fn diff_matrix(
    basis: Basis,
    count: usize,
    interval: (f64, f64),
) -> Result<(DenseMatrix, DenseMatrix)> {
    if count < 4 {
        return Err(Error::InvalidArgument(format!(
            "spectral axes need at least 4 nodes, got {count}"
        )));
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::InvalidDomain(format!("empty interval [{lo}, {hi}]")));
    }
    let n = count;
    Ok(match basis {
        Basis::Fourier => {
            let h = 2.0 * PI / n as f64;
            let scale = 2.0 * PI / (hi - lo);
            let mut d1 = vec![vec![0.0; n]; n];
            let mut d2 = vec![vec![0.0; n]; n];
            let even = n % 2 == 0;
            let diag2 = if even {
                -PI * PI / (3.0 * h * h) - 1.0 / 6.0
            } else {
                -PI * PI / (3.0 * h * h) + 1.0 / 12.0
            };
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        d2[i][j] = diag2 * scale * scale;
                        continue;
                    }
                    let k = i as isize - j as isize;
                    let sgn = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    let half = 0.5 * k as f64 * h;
                    let (s, c) = half.sin_cos();
                    if even {
                        d1[i][j] = 0.5 * sgn * c / s * scale;
                        d2[i][j] = -0.5 * sgn / (s * s) * scale * scale;
                    } else {
                        d1[i][j] = 0.5 * sgn / s * scale;
                        d2[i][j] = -0.5 * sgn * c / (s * s) * scale * scale;
                    }
                }
            }
            (d1, d2)
        }
        Basis::Chebyshev => {
            let x = axis_nodes(
                basis,
                n,
                Interval {
                    lower: -1.0,
                    upper: 1.0,
                },
            );
            let scale = 2.0 / (hi - lo);
            let c = |j: usize| if j == 0 || j == n - 1 { 2.0 } else { 1.0 };
            let mut d1 = vec![vec![0.0; n]; n];
            for i in 0..n {
                let mut sum = 0.0;
                for j in 0..n {
                    if i != j {
                        let sgn = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        let v = c(i) / c(j) * sgn / (x[i] - x[j]);
                        d1[i][j] = v;
                        sum += v;
                    }
                }
                // negative-sum trick keeps rows annihilating constants
                d1[i][i] = -sum;
            }
            let mut d2 = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    d2[i][j] = (0..n).map(|k| d1[i][k] * d1[k][j]).sum::<f64>();
                }
            }
            for row in d1.iter_mut() {
                row.iter_mut().for_each(|v| *v *= scale);
            }
            for row in d2.iter_mut() {
                row.iter_mut().for_each(|v| *v *= scale * scale);
            }
            (d1, d2)
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralAxis {
    pub basis: Basis,
    pub interval: Interval,
    pub nodes: Vec<f64>,
    pub d1: DenseMatrix,
    pub d2: DenseMatrix,
}

impl SpectralAxis {
    pub fn new(basis: Basis, count: usize, interval: Interval) -> Result<Self> {
        let (d1, d2) = diff_matrix(basis, count, (interval.lower, interval.upper))?;
        Ok(Self {
            basis,
            interval,
            nodes: axis_nodes(basis, count, interval),
            d1,
            d2,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cardinal-function values `l_j(x)` for all nodes `j`.
    pub fn cardinal_weights(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![0.0; n];
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            w[j] = 1.0;
            return w;
        }
        match self.basis {
            Basis::Fourier => {
                let scale = 2.0 * PI / self.interval.width();
                let even = n % 2 == 0;
                for (j, wj) in w.iter_mut().enumerate() {
                    let theta = scale * (x - self.nodes[j]);
                    let s = (0.5 * theta).sin();
                    if s.abs() < 1e-15 {
                        *wj = 1.0;
                        continue;
                    }
                    let num = (0.5 * n as f64 * theta).sin();
                    *wj = if even {
                        num * (0.5 * theta).cos() / (n as f64 * s)
                    } else {
                        num / (n as f64 * s)
                    };
                }
            }
            Basis::Chebyshev => {
                let mut total = 0.0;
                for (j, wj) in w.iter_mut().enumerate() {
                    let mut b = if j % 2 == 0 { 1.0 } else { -1.0 };
                    if j == 0 || j == n - 1 {
                        b *= 0.5;
                    }
                    *wj = b / (x - self.nodes[j]);
                    total += *wj;
                }
                w.iter_mut().for_each(|v| *v /= total);
            }
        }
        w
    }

    /// Trapezoid weights on Fourier axes, Clenshaw–Curtis on Chebyshev axes.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.len();
        let width = self.interval.width();
        match self.basis {
            Basis::Fourier => vec![width / n as f64; n],
            Basis::Chebyshev => {
                let big_n = n - 1;
                let nf = big_n as f64;
                let mut w = vec![0.0; n];
                let mut v = vec![1.0; big_n.saturating_sub(1)];
                let theta = |i: usize| PI * i as f64 / nf;
                if big_n % 2 == 0 {
                    w[0] = 1.0 / (nf * nf - 1.0);
                    for k in 1..big_n / 2 {
                        let kf = k as f64;
                        for (i, vi) in v.iter_mut().enumerate() {
                            *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
                        }
                    }
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi -= (nf * theta(i + 1)).cos() / (nf * nf - 1.0);
                    }
                } else {
                    w[0] = 1.0 / (nf * nf);
                    for k in 1..=(big_n - 1) / 2 {
                        let kf = k as f64;
                        for (i, vi) in v.iter_mut().enumerate() {
                            *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
                        }
                    }
                }
                w[big_n] = w[0];
                for (i, vi) in v.iter().enumerate() {
                    w[i + 1] = 2.0 * vi / nf;
                }
                w.iter().map(|x| x * 0.5 * width).collect()
            }
        }
    }
}

/// Tensor-product collocation grid; nodes numbered row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    axes: Vec<SpectralAxis>,
    strides: Vec<usize>,
    boundaries: Vec<Boundary>,
}

impl SpectralGrid {
    /// Fourier on periodic axes, Chebyshev on closed axes.
    pub fn new(domain: &DomainSpec, counts: &[usize]) -> Result<Self> {
        let bases: Vec<Basis> = domain
            .boundaries()
            .iter()
            .map(|b| match b {
                Boundary::Periodic => Basis::Fourier,
                Boundary::Closed => Basis::Chebyshev,
            })
            .collect();
        Self::with_bases(domain, &bases, counts)
    }

    pub fn with_bases(domain: &DomainSpec, bases: &[Basis], counts: &[usize]) -> Result<Self> {
        let d = domain.dim();
        if counts.len() != d || bases.len() != d {
            return Err(Error::InvalidArgument(format!(
                "expected {d} node counts and bases, got {} counts and {} bases",
                counts.len(),
                bases.len()
            )));
        }
        let axes = (0..d)
            .map(|k| SpectralAxis::new(bases[k], counts[k], domain.interval(k)))
            .collect::<Result<Vec<_>>>()?;
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Self {
            axes,
            strides,
            boundaries: domain.boundaries().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[SpectralAxis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &SpectralAxis {
        &self.axes[k]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(SpectralAxis::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(SpectralAxis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bases(&self) -> Vec<Basis> {
        self.axes.iter().map(|a| a.basis).collect()
    }

    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| index / self.strides[k] % self.axes[k].len())
            .collect()
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.nodes[i])
            .collect()
    }

    /// Tensor-product quadrature weights at the nodes.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(SpectralAxis::quadrature_weights)
            .collect();
        (0..self.len())
            .map(|i| {
                self.multi_index(i)
                    .iter()
                    .zip(&per_axis)
                    .map(|(&q, w)| w[q])
                    .product()
            })
            .collect()
    }

    fn reduce(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.axes)
            .zip(&self.boundaries)
            .map(|((&v, a), b)| match b {
                Boundary::Periodic => {
                    let w = a.interval.width();
                    let r = a.interval.lower + (v - a.interval.lower).rem_euclid(w);
                    if r >= a.interval.upper {
                        a.interval.lower
                    } else {
                        r
                    }
                }
                Boundary::Closed => v.clamp(a.interval.lower, a.interval.upper),
            })
            .collect()
    }
}

/// Evaluates the interpolant of `values` at `x`: trigonometric on Fourier
/// axes, barycentric Lagrange on Chebyshev axes.
pub fn eval_spectral_density(grid: &SpectralGrid, values: &[f64], x: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.len(), "one value per node");
    let x = grid.reduce(x);
    let weights: Vec<Vec<f64>> = grid
        .axes
        .iter()
        .zip(&x)
        .map(|(a, &v)| a.cardinal_weights(v))
        .collect();
    // contract the last axis first
    let mut current = values.to_vec();
    for k in (0..grid.dim()).rev() {
        let n = grid.axes[k].len();
        current = current
            .chunks(n)
            .map(|line| line.iter().zip(&weights[k]).map(|(v, w)| v * w).sum())
            .collect();
    }
    current[0]
}

#[derive(Clone, Debug)]
pub struct SpectralOperator {
    matrix: CsrMatrix,
    grid: SpectralGrid,
    eps: f64,
    neumann_rows: Vec<usize>,
    field_evaluations: u64,
    node_field: Vec<Vec<f64>>,
}

impl SpectralOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Rows replaced by boundary conditions, ascending.
    pub fn neumann_rows(&self) -> &[usize] {
        &self.neumann_rows
    }

    pub fn field_evaluations(&self) -> u64 {
        self.field_evaluations
    }

    /// Field values at the nodes, `node_field()[i][k]` = `F_k(x_i)`.
    pub fn node_field(&self) -> &[Vec<f64>] {
        &self.node_field
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; f.len()];
        self.matrix.mul_vec(f, &mut y);
        y
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.len() > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "{} nodes exceed the dense limit {DENSE_LIMIT}",
                self.len()
            )));
        }
        Ok(self.matrix.to_dense())
    }
}

/// Collocation matrix of the Fokker–Planck operator in conservative form,
/// `(eps^2/2) sum_k D2_k - sum_k D1_k diag(F_k)`, followed by Neumann rows on
/// Chebyshev boundaries.
pub fn assemble_fpe(
    grid: &SpectralGrid,
    field: &VectorField,
    eps: f64,
) -> Result<SpectralOperator> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    let d = grid.dim();
    if field.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "grid is {d}-dimensional but the field is {}-dimensional",
            field.dim()
        )));
    }
    let values: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| field.eval(&grid.node(i)))
        .collect::<Result<_>>()?;
    let diffusion = 0.5 * eps * eps;
    let rows: Vec<Vec<(usize, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mi = grid.multi_index(i);
            let mut row = Vec::new();
            for (k, axis) in grid.axes.iter().enumerate() {
                let base = i - mi[k] * grid.strides[k];
                for j in 0..axis.len() {
                    let col = base + j * grid.strides[k];
                    let v = diffusion * axis.d2[mi[k]][j] - axis.d1[mi[k]][j] * values[col][k];
                    row.push((col, v));
                }
            }
            row
        })
        .collect();
    let op = SpectralOperator {
        matrix: CsrMatrix::from_rows(grid.len(), rows),
        grid: grid.clone(),
        eps,
        neumann_rows: Vec::new(),
        field_evaluations: grid.len() as u64,
        node_field: values,
    };
    if grid.axes.iter().any(|a| a.basis == Basis::Chebyshev) {
        Ok(apply_neumann(op))
    } else {
        Ok(op)
    }
}

/// Replaces every Chebyshev-boundary row by the derivative row along the
/// lowest-numbered Chebyshev axis on whose boundary the node lies.
pub fn apply_neumann(op: SpectralOperator) -> SpectralOperator {
    let grid = &op.grid;
    if grid.axes.iter().all(|a| a.basis == Basis::Fourier) {
        log::warn!("apply_neumann on an all-periodic grid has no effect");
        return op;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = (0..op.matrix.nrows())
        .map(|i| op.matrix.row(i).collect())
        .collect();
    let mut replaced = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        let mi = grid.multi_index(i);
        let axis =
            grid.axes.iter().enumerate().position(|(k, a)| {
                a.basis == Basis::Chebyshev && (mi[k] == 0 || mi[k] == a.len() - 1)
            });
        let Some(k) = axis else { continue };
        let a = &grid.axes[k];
        let base = i - mi[k] * grid.strides[k];
        *row = (0..a.len())
            .map(|j| (base + j * grid.strides[k], a.d1[mi[k]][j]))
            .collect();
        replaced.push(i);
    }
    SpectralOperator {
        matrix: CsrMatrix::from_rows(op.matrix.ncols(), rows),
        neumann_rows: replaced,
        ..op
    }
}
