//! End-to-end runs through the public API: field, assembly, eigensolve,
//! analysis and files.

use genflow_core::io::{
    read_density_csv, read_eigenvalues_csv, write_density_csv, write_eigenvalues_csv,
};
use genflow_core::{
    assemble_generator, assemble_ulam, attractor_support, eigs_largest_modulus, eigs_near_zero,
    escape_rate, generator_rate, invariance_ratio, load_sampled_field, make_builtin_field,
    make_grid, normalize_density, split_almost_invariant, stationary_from_solution,
    stationary_left_vector, CsrMatrix, Discretization, EigOptions, Shift,
};

fn sine_density(x: f64) -> f64 {
    0.21f64.sqrt() / (1.1 + (4.0 * std::f64::consts::PI * x).sin())
}

#[test]
fn sine_generator_density_and_split() {
    let f = make_builtin_field("sine_flow", &[]).unwrap();
    let g = make_grid(f.domain(), &[64]).unwrap();
    let a = assemble_generator(&g, &f, 1).unwrap();
    let disc = Discretization::Boxes(g.clone());

    let sol = eigs_near_zero(&a, 3, &EigOptions::default(), Shift::Auto).unwrap();
    assert!(sol.converged);
    let v = stationary_from_solution(&a, &sol).unwrap();
    let separate = stationary_left_vector(&a).unwrap();
    for (x, y) in v.iter().zip(&separate) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }
    let dens = normalize_density(&v, &disc).unwrap();
    assert!(dens.is_nonnegative());
    // first order: h/2 times the total variation of C/F
    let err = dens.l1_error(|x| sine_density(x[0]));
    assert!(err < 0.15, "L1 error {err}");

    let split = split_almost_invariant(&sol.vectors[1], sol.eigenvalues[1]);
    assert!(!split.plus.is_empty() && !split.minus.is_empty());
    assert_eq!(split.plus.len() + split.minus.len(), g.len());
    let all: Vec<usize> = (0..g.len()).collect();
    // mass is conserved, so the whole circle has zero net rate
    assert!(generator_rate(a.matrix(), &dens, &all).unwrap().abs() < 1e-9);
    let (support, mass) = attractor_support(&dens, 0.0);
    assert_eq!(support.len(), g.len());
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn ulam_matrix_is_a_markov_chain_on_the_density() {
    let f = make_builtin_field("sine_flow", &[]).unwrap();
    let g = make_grid(f.domain(), &[32]).unwrap();
    let p = assemble_ulam(&g, &f, 0.0625, 64, 0.0, 3).unwrap();
    assert!(p
        .matrix()
        .row_sums()
        .iter()
        .all(|s| (s - 1.0).abs() < 1e-12));
    let sol = eigs_largest_modulus(&p, 3, &EigOptions::default()).unwrap();
    assert!((sol.eigenvalues[0].re - 1.0).abs() < 1e-10);
    let disc = Discretization::Boxes(g.clone());
    let nu = normalize_density(&sol.real_vector(0), &disc).unwrap();
    let all: Vec<usize> = (0..g.len()).collect();
    assert!((invariance_ratio(p.matrix(), &all, &nu).unwrap() - 1.0).abs() < 1e-12);
    let half: Vec<usize> = (0..16).collect();
    let rho = invariance_ratio(p.matrix(), &half, &nu).unwrap();
    assert!((0.0..=1.0).contains(&rho));
    assert!(escape_rate(p.matrix(), &half, 0.0625).unwrap() >= 0.0);
}

#[test]
fn sampled_field_reproduces_the_built_in_generator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sine.csv");
    let f = make_builtin_field("sine_flow", &[]).unwrap();
    genflow_core::fields::write_sampled_field(&path, &f, &[512]).unwrap();
    let sampled = load_sampled_field(&path, f.domain()).unwrap();
    let g = make_grid(f.domain(), &[32]).unwrap();
    let exact = assemble_generator(&g, &f, 1).unwrap();
    let interp = assemble_generator(&g, &sampled, 1).unwrap();
    let scale = exact.matrix().norm_inf();
    for i in 0..g.len() {
        let a: Vec<(usize, f64)> = exact.matrix().row(i).collect();
        let b: Vec<(usize, f64)> = interp.matrix().row(i).collect();
        assert_eq!(a.len(), b.len());
        for ((ja, va), (jb, vb)) in a.iter().zip(&b) {
            assert_eq!(ja, jb);
            // linear interpolation error ~ h² |F''| / 8 on the sample grid
            assert!((va - vb).abs() <= 1e-3 * scale);
        }
    }
}

#[test]
fn outputs_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = make_builtin_field("sine_flow", &[]).unwrap();
    let g = make_grid(f.domain(), &[16]).unwrap();
    let a = assemble_generator(&g, &f, 1).unwrap();
    let sol = eigs_near_zero(&a, 3, &EigOptions::default(), Shift::Auto).unwrap();

    let mtx = dir.path().join("a.mtx");
    a.matrix().write_matrix_market(&mtx).unwrap();
    let back = CsrMatrix::read_matrix_market(&mtx).unwrap();
    assert_eq!(back.to_dense(), a.matrix().to_dense());

    let ev = dir.path().join("ev.csv");
    write_eigenvalues_csv(&ev, &sol.eigenvalues).unwrap();
    assert_eq!(read_eigenvalues_csv(&ev).unwrap(), sol.eigenvalues);

    let v = stationary_left_vector(&a).unwrap();
    let dc = dir.path().join("density.csv");
    let points: Vec<Vec<f64>> = (0..g.len()).map(|i| g.center(i)).collect();
    write_density_csv(&dc, &points, &v).unwrap();
    assert_eq!(read_density_csv(&dc).unwrap(), v);
}
