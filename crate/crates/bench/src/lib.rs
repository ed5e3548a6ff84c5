//! Shared fixtures for the benchmarks.

use genflow_core::{assemble_generator, make_builtin_field, make_grid, GeneratorMatrix};

/// Upwind generator of a built-in flow on a uniform grid with `n` boxes per axis.
pub fn generator(field: &str, n: usize, quad_order: usize) -> GeneratorMatrix {
    let f = make_builtin_field(field, &[]).expect("built-in field");
    let counts = vec![n; f.domain().dim()];
    let grid = make_grid(f.domain(), &counts).expect("grid");
    assemble_generator(&grid, &f, quad_order).expect("assembly")
}
