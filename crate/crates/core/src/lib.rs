//! Discretizations of transfer operators and their infinitesimal generators.
//!
//! Densities are row vectors throughout: for the box-based matrices (Ulam and
//! the Ulam-type generator) rows index source boxes and invariant densities are
//! left eigenvectors. Collocation operators act on node values from the left,
//! so their densities are ordinary (right) null vectors. The [`eig`] module
//! hides this difference behind [`eig::DensityOperator`].

pub mod analysis;
pub mod eig;
pub mod error;
pub mod fields;
pub mod genulam;
pub mod grid;
pub mod io;
pub mod quadrature;
pub mod sparse;
pub mod spectral;
pub mod ulam;

pub use num_complex::Complex64;

pub use analysis::{
    attractor_support, escape_rate, expm, generator_rate, invariance_ratio, normalize_density,
    spectral_mapping_table, split_almost_invariant, AlmostInvariantSplit, DensityField,
    Discretization, MappingRow,
};
pub use eig::{
    eigs_largest_modulus, eigs_near_zero, residual, stationary_collocation_vector,
    stationary_from_solution, stationary_left_vector, DensityOperator, EigOptions, EigenSolution,
    Shift,
};
pub use error::{Error, Result};
pub use fields::{
    load_sampled_field, make_builtin_field, Boundary, DomainSpec, FieldSource, VectorField,
};
pub use genulam::{assemble_generator, numerical_diffusion_estimate, GeneratorMatrix};
pub use grid::{face_quadrature, make_grid, BoxGrid, Face};
pub use sparse::CsrMatrix;
pub use spectral::{
    apply_neumann, assemble_fpe, diff_matrix, eval_spectral_density, Basis, SpectralGrid,
    SpectralOperator,
};
pub use ulam::{assemble_ulam, integrate_flow, UlamMatrix, UlamOptions};
