//! Ulam-type discretization of the generator from face fluxes.
//!
//! For an oriented face `i -> j` with outward normal `n_ij` the entry is
//! `A_ij = (1/m(B_j)) * sum_q w_q max(F(x_q) . n_ij, 0)`, the rate at which mass
//! leaves `B_i` through that face. This is the first-order upwind finite
//! volume scheme; no trajectories are integrated.

use rayon::prelude::*;

use crate::error::Result;
use crate::fields::VectorField;
use crate::grid::{face_quadrature, BoxGrid};
use crate::sparse::CsrMatrix;

/// Face Gauss order used when the caller has no preference.
pub fn default_quad_order(dim: usize) -> usize {
    match dim {
        1 => 1,
        2 => 3,
        _ => 5,
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    matrix: CsrMatrix,
    grid: BoxGrid,
    quad_order: usize,
    field_evaluations: u64,
}

impl GeneratorMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn field_evaluations(&self) -> u64 {
        self.field_evaluations
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Off-diagonals nonnegative and `|row sum| <= tol * max|A_ii|`.
    pub fn is_q_matrix(&self, tol: f64) -> bool {
        let a = &self.matrix;
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..a.nrows()).all(|i| {
            let mut sum = 0.0;
            for (j, v) in a.row(i) {
                if j != i && v < 0.0 {
                    return false;
                }
                sum += v;
            }
            sum.abs() <= tol * scale.max(f64::MIN_POSITIVE)
        })
    }
}

/// Assembles the generator matrix. Closed-boundary faces carry no flux.
pub fn assemble_generator(
    grid: &BoxGrid,
    field: &VectorField,
    quad_order: usize,
) -> Result<GeneratorMatrix> {
    let quad_order = quad_order.max(1);
    let d = grid.dim();
    let m = grid.box_measure();
    let rows: Vec<Result<(Vec<(usize, f64)>, u64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 1);
            let mut evals = 0u64;
            let mut v = [0.0; 3];
            for face in grid.box_faces(i) {
                let Some(j) = face.neighbor else { continue };
                if j == i {
                    // a single box along a periodic axis: outflow re-enters the same box
                    continue;
                }
                let mut flux = 0.0;
                for (x, w) in face_quadrature(grid, &face, quad_order) {
                    field.eval_into(&x, &mut v[..d])?;
                    evals += 1;
                    flux += w * (v[face.axis] * face.sign).max(0.0);
                }
                row.push((j, flux / m));
            }
            // uniform boxes: m(B_j)/m(B_i) = 1, so the diagonal balances the row exactly
            let out: f64 = row.iter().map(|e| e.1).sum();
            row.push((i, -out));
            Ok((row, evals))
        })
        .collect();
    let mut csr_rows = Vec::with_capacity(rows.len());
    let mut field_evaluations = 0;
    for r in rows {
        let (row, e) = r?;
        csr_rows.push(row);
        field_evaluations += e;
    }
    let matrix = CsrMatrix::from_rows(grid.len(), csr_rows);
    Ok(GeneratorMatrix {
        matrix,
        grid: grid.clone(),
        quad_order,
        field_evaluations,
    })
}

/// Per-box `max_k |F_k(center)| h_k / 2`, the effective `eps^2/2` of the upwind scheme.
pub fn numerical_diffusion_estimate(grid: &BoxGrid, field: &VectorField) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let v = field.eval(&grid.center(i))?;
            Ok(v.iter()
                .zip(grid.widths())
                .map(|(f, h)| 0.5 * f.abs() * h)
                .fold(0.0, f64::max))
        })
        .collect()
}
