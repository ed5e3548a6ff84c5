//! Classical Ulam discretization from short trajectories.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::grid::BoxGrid;
use crate::sparse::CsrMatrix;

/// RK4 steps per flow time when the caller does not choose.
pub const DEFAULT_RK4_STEPS: usize = 20;

/// One RK4 trajectory over time `t`, with optional additive noise.
///
/// After every step `sqrt(h) * eps * xi` is added (`xi` standard normal per
/// coordinate) and the state is projected back into the domain. Stage points
/// are projected too, so sampled fields are never queried outside closed axes.
pub fn integrate_flow<R: Rng + ?Sized>(
    field: &VectorField,
    x0: &[f64],
    t: f64,
    steps: usize,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if steps == 0 || !(t > 0.0) || !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integration needs steps >= 1, t > 0, eps >= 0 (got {steps}, {t}, {eps})"
        )));
    }
    let d = field.dim();
    let dom = field.domain();
    let h = t / steps as f64;
    let noise = h.sqrt() * eps;
    let mut x = x0.to_vec();
    dom.project(&mut x);
    let (mut k1, mut k2, mut k3, mut k4) = ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
    let mut y = [0.0; 3];
    let stage = |x: &[f64], k: &[f64], c: f64, y: &mut [f64]| {
        for i in 0..d {
            y[i] = x[i] + c * k[i];
        }
        dom.project(y);
    };
    for _ in 0..steps {
        field.eval_into(&x, &mut k1[..d])?;
        stage(&x, &k1, 0.5 * h, &mut y[..d]);
        field.eval_into(&y[..d], &mut k2[..d])?;
        stage(&x, &k2, 0.5 * h, &mut y[..d]);
        field.eval_into(&y[..d], &mut k3[..d])?;
        stage(&x, &k3, h, &mut y[..d]);
        field.eval_into(&y[..d], &mut k4[..d])?;
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if noise > 0.0 {
            for xi in x.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *xi += noise * g;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        dom.project(&mut x);
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UlamOptions {
    pub t: f64,
    /// Requested samples per box; the sub-lattice uses the nearest `m^d`.
    pub samples_per_box: usize,
    pub eps: f64,
    pub seed: u64,
    pub steps: usize,
}

impl UlamOptions {
    pub fn new(t: f64, samples_per_box: usize) -> Self {
        Self {
            t,
            samples_per_box,
            eps: 0.0,
            seed: 0,
            steps: DEFAULT_RK4_STEPS,
        }
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }
}

#[derive(Clone, Debug)]
pub struct UlamMatrix {
    matrix: CsrMatrix,
    grid: BoxGrid,
    options: UlamOptions,
    lattice: usize,
    field_evaluations: u64,
}

impl UlamMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.options.t
    }

    pub fn eps(&self) -> f64 {
        self.options.eps
    }

    pub fn seed(&self) -> u64 {
        self.options.seed
    }

    pub fn options(&self) -> &UlamOptions {
        &self.options
    }

    /// Samples actually used per box (`lattice^d`).
    pub fn samples_per_box(&self) -> usize {
        self.lattice.pow(self.grid.dim() as u32)
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
}

/// Points per axis of the sub-lattice closest to `samples` points in `d` dimensions.
pub fn lattice_side(samples: usize, d: usize) -> usize {
    let m = (samples as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
    // guard against powf rounding, e.g. 1000^(1/3) = 9.999..
    [m.saturating_sub(1), m, m + 1]
        .into_iter()
        .filter(|&c| c >= 1)
        .min_by_key(|&c| c.pow(d as u32).abs_diff(samples))
        .unwrap()
}

/// Convenience wrapper with the default RK4 step count.
pub fn assemble_ulam(
    grid: &BoxGrid,
    field: &VectorField,
    t: f64,
    samples_per_box: usize,
    eps: f64,
    seed: u64,
) -> Result<UlamMatrix> {
    assemble_ulam_with(
        grid,
        field,
        &UlamOptions::new(t, samples_per_box).eps(eps).seed(seed),
    )
}

/// Row `i` counts where the sub-lattice samples of box `i` land after time `t`.
///
/// Sample `s` of box `i` draws its noise from the ChaCha stream `(seed, i)` at
/// word offset `s << 32`, so the matrix does not depend on the worker count.
pub fn assemble_ulam_with(
    grid: &BoxGrid,
    field: &VectorField,
    opts: &UlamOptions,
) -> Result<UlamMatrix> {
    if opts.samples_per_box == 0 {
        return Err(Error::InvalidArgument(
            "samples_per_box must be at least 1".into(),
        ));
    }
    let d = grid.dim();
    let lattice = lattice_side(opts.samples_per_box, d);
    if lattice.pow(d as u32) != opts.samples_per_box {
        log::warn!(
            "{} samples per box is not a {d}-th power; using a {lattice}^{d} lattice",
            opts.samples_per_box
        );
    }
    let total = lattice.pow(d as u32);
    let weight = 1.0 / total as f64;
    let widths = grid.widths().to_vec();
    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let corner = grid.lower_corner(i);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let mut hits: Vec<usize> = Vec::with_capacity(total);
            let mut x0 = vec![0.0; d];
            for s in 0..total {
                let mut rem = s;
                for k in (0..d).rev() {
                    let q = rem % lattice;
                    rem /= lattice;
                    x0[k] = corner[k] + widths[k] * (q as f64 + 0.5) / lattice as f64;
                }
                if opts.eps > 0.0 {
                    rng.set_word_pos((s as u128) << 32);
                }
                let x = integrate_flow(field, &x0, opts.t, opts.steps, opts.eps, &mut rng)?;
                hits.push(grid.locate_box(&x));
            }
            hits.sort_unstable();
            let mut row = Vec::new();
            for chunk in hits.chunk_by(|a, b| a == b) {
                row.push((chunk[0], chunk.len() as f64 * weight));
            }
            Ok(row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let field_evaluations = (grid.len() * total * opts.steps * 4) as u64;
    Ok(UlamMatrix {
        matrix: CsrMatrix::from_rows(grid.len(), rows),
        grid: grid.clone(),
        options: opts.clone(),
        lattice,
        field_evaluations,
    })
}
