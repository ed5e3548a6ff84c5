//! Field, discretization, eigensolve, analysis and file output for one run.

use std::fs;
use std::path::Path;
use std::time::Instant;

use genflow_core::analysis::threshold_for_mass;
use genflow_core::eig::stationary_from_solution;
use genflow_core::fields::load_sampled_field_with_sidecar_domain;
use genflow_core::genulam::default_quad_order;
use genflow_core::io::{
    write_density_csv, write_eigenvalues_csv, write_eigenvectors_csv, write_json,
};
use genflow_core::ulam::{assemble_ulam_with, DEFAULT_RK4_STEPS};
use genflow_core::{
    assemble_fpe, assemble_generator, attractor_support, eigs_largest_modulus, eigs_near_zero,
    generator_rate, make_builtin_field, make_grid, normalize_density, split_almost_invariant,
    stationary_collocation_vector, AlmostInvariantSplit, Complex64, CsrMatrix, DensityField,
    Discretization, EigOptions, Error, FieldSource, GeneratorMatrix, Shift, SpectralGrid,
    SpectralOperator, UlamMatrix, UlamOptions, VectorField,
};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::CliError;

pub const SUPPORT_MASS: f64 = 0.9;

pub fn build_field(cfg: &RunConfig) -> Result<VectorField, CliError> {
    if cfg.field.ends_with(".csv") {
        if !cfg.params.is_empty() {
            return Err(CliError::Config("sampled fields take no --params".into()));
        }
        return Ok(load_sampled_field_with_sidecar_domain(Path::new(
            &cfg.field,
        ))?);
    }
    Ok(make_builtin_field(&cfg.field, &cfg.params)?)
}

/// Per-axis counts, with a single value repeated over every axis.
pub fn axis_counts(cfg: &RunConfig, dim: usize) -> Result<Vec<usize>, CliError> {
    match cfg.counts.len() {
        1 => Ok(vec![cfg.counts[0]; dim]),
        len if len == dim => Ok(cfg.counts.clone()),
        len => Err(CliError::Config(format!(
            "--n lists {len} counts but the domain has {dim} axes"
        ))),
    }
}

pub fn discretization(cfg: &RunConfig, field: &VectorField) -> Result<Discretization, CliError> {
    let counts = axis_counts(cfg, field.dim())?;
    Ok(match cfg.method {
        Method::Collocation => {
            Discretization::Spectral(SpectralGrid::new(field.domain(), &counts)?)
        }
        _ => Discretization::Boxes(make_grid(field.domain(), &counts)?),
    })
}

/// Exact invariant density where one is known in closed form.
/// Closed-form invariant density, when one is known for this field and noise level.
/// Divergence-free and constant flows keep the uniform density under noise;
/// the sine-flow formula holds only without noise.
pub fn reference_density(field: &VectorField, eps: f64) -> Option<Box<dyn Fn(&[f64]) -> f64>> {
    match field.source() {
        FieldSource::SineFlow { offset } if *offset > 1.0 && eps == 0.0 => {
            let (c, o) = ((offset * offset - 1.0).sqrt(), *offset);
            Some(Box::new(move |x: &[f64]| {
                c / (o + (4.0 * std::f64::consts::PI * x[0]).sin())
            }))
        }
        FieldSource::Abc { .. } | FieldSource::Constant(_) => {
            let v = 1.0 / field.domain().volume();
            Some(Box::new(move |_: &[f64]| v))
        }
        _ => None,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensitySummary {
    pub l1_norm: f64,
    pub min: f64,
    pub max: f64,
    pub nonnegative: bool,
    /// L1 distance to the closed-form invariant density, when one exists.
    pub reference_l1_error: Option<f64>,
    /// Dimension of the numerical null space when it exceeded one.
    pub null_space_dimension: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SupportSummary {
    pub target_mass: f64,
    pub threshold: f64,
    pub entries: usize,
    pub fraction_of_entries: f64,
    pub mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RateSummary {
    pub plus: Option<f64>,
    pub minus: Option<f64>,
    pub sum: f64,
    pub eigenvalue_re: f64,
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub density: DensitySummary,
    pub support: SupportSummary,
    pub pair: Option<usize>,
    pub split: Option<AlmostInvariantSplit>,
    /// Generator rates of the two halves of the split.
    pub rates: Option<RateSummary>,
}

pub fn summarize_density(
    field: &VectorField,
    eps: f64,
    density: &DensityField,
    null_dim: Option<usize>,
) -> DensitySummary {
    let v = &density.values;
    DensitySummary {
        l1_norm: density.discretization.l1_norm(v),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        nonnegative: density.is_nonnegative(),
        reference_l1_error: reference_density(field, eps).map(|g| density.l1_error(g)),
        null_space_dimension: null_dim,
    }
}

/// Density summary, attractor support and the almost-invariant split of eigenpair `pair`.
#[allow(clippy::too_many_arguments)]
pub fn analyze(
    cfg: &RunConfig,
    field: &VectorField,
    matrix: &CsrMatrix,
    eigenvalues: &[Complex64],
    vectors: &[Vec<Complex64>],
    density: &DensityField,
    null_dim: Option<usize>,
    pair: usize,
    mass: f64,
) -> Result<AnalysisReport, CliError> {
    let threshold = threshold_for_mass(density, mass);
    let (set, support_mass) = attractor_support(density, threshold);
    let support = SupportSummary {
        target_mass: mass,
        threshold,
        entries: set.len(),
        fraction_of_entries: set.len() as f64 / density.len() as f64,
        mass: support_mass,
    };
    let mut report = AnalysisReport {
        density: summarize_density(field, cfg.eps, density, null_dim),
        support,
        pair: None,
        split: None,
        rates: None,
    };
    if pair >= eigenvalues.len() {
        if pair > 0 {
            log::warn!("eigenpair {pair} not available; skipping the split");
        }
        return Ok(report);
    }
    let lambda = eigenvalues[pair];
    let mut split = split_almost_invariant(&vectors[pair], lambda);
    match cfg.method {
        Method::Ulam => {
            let t = cfg
                .t
                .ok_or_else(|| CliError::Config("ulam run without a flow time".into()))?;
            if !split.degenerate {
                split = split.with_transition(matrix, t, density)?;
            }
        }
        Method::Generator => {
            let abs: Vec<f64> = vectors[pair].iter().map(|c| c.re.abs()).collect();
            let f = normalize_density(&abs, &density.discretization)?;
            let rate = |s: &[usize]| -> Result<Option<f64>, Error> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    generator_rate(matrix, &f, s).map(Some)
                }
            };
            let (plus, minus) = (rate(&split.plus)?, rate(&split.minus)?);
            report.rates = Some(RateSummary {
                plus,
                minus,
                sum: plus.unwrap_or(0.0) + minus.unwrap_or(0.0),
                eigenvalue_re: lambda.re,
            });
        }
        Method::Collocation => {}
    }
    report.pair = Some(pair);
    report.split = Some(split);
    Ok(report)
}

pub fn write_membership_csv(
    path: &Path,
    split: &AlmostInvariantSplit,
    n: usize,
) -> Result<(), CliError> {
    let mut text = String::from("index,set\n");
    for (i, label) in split.labels(n).into_iter().enumerate() {
        text.push_str(&format!(
            "{i},{}\n",
            if label > 0 { "plus" } else { "minus" }
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Timings {
    pub assembly_seconds: f64,
    pub eigensolve_seconds: f64,
    pub analysis_seconds: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolverSummary {
    pub method: String,
    pub converged: bool,
    pub restarts: usize,
    pub applications: usize,
    pub shift: Option<f64>,
    pub threshold: f64,
    pub max_residual: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config: RunConfig,
    pub threads: usize,
    pub counts: Vec<usize>,
    pub entries: usize,
    pub matrix_nnz: usize,
    pub field_evaluations: u64,
    /// Samples per box actually used (nearest lattice size).
    pub samples_per_box: Option<usize>,
    pub timings: Timings,
    pub eigensolver: SolverSummary,
}

pub struct RunOutcome {
    pub metadata: Metadata,
    pub report: AnalysisReport,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let field = build_field(cfg)?;
    let disc = discretization(cfg, &field)?;
    let opts = EigOptions {
        tol: cfg.tol,
        seed: cfg.seed,
        ..EigOptions::default()
    };
    if cfg.k == 0 || cfg.k >= disc.len() {
        return Err(CliError::Config(format!(
            "--k must lie in 1..{}",
            disc.len()
        )));
    }
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;

    let started = Instant::now();
    let assembled = match &disc {
        Discretization::Boxes(grid) if cfg.method == Method::Ulam => {
            let o = UlamOptions::new(cfg.t.unwrap_or_default(), cfg.samples.unwrap_or(1))
                .eps(cfg.eps)
                .seed(cfg.seed)
                .steps(cfg.steps.unwrap_or(DEFAULT_RK4_STEPS));
            Assembled::Ulam(assemble_ulam_with(grid, &field, &o)?)
        }
        Discretization::Boxes(grid) => {
            let q = cfg
                .quad_order
                .unwrap_or_else(|| default_quad_order(grid.dim()));
            Assembled::Generator(assemble_generator(grid, &field, q)?)
        }
        Discretization::Spectral(grid) => {
            Assembled::Collocation(assemble_fpe(grid, &field, cfg.eps)?)
        }
    };
    let assembly_seconds = started.elapsed().as_secs_f64();
    let matrix = assembled.matrix();

    let started = Instant::now();
    let mut null_dim = None;
    let shift = cfg.shift.map_or(Shift::Auto, Shift::Value);
    let (sol, density) = match &assembled {
        Assembled::Ulam(p) => {
            let sol = eigs_largest_modulus(p, cfg.k, &opts)?;
            let d = normalize_density(&sol.real_vector(0), &disc)?;
            (sol, d)
        }
        Assembled::Generator(a) => {
            // at least two pairs so a degenerate null space is detected
            let sol = eigs_near_zero(a, cfg.k.max(2), &opts, shift)?;
            let v = match stationary_from_solution(a, &sol) {
                Ok(v) => v,
                Err(Error::MultipleNullSpace {
                    dimension,
                    representative,
                }) => {
                    log::warn!("generator null space has dimension {dimension}; using a nonnegative representative");
                    null_dim = Some(dimension);
                    representative
                }
                Err(e) => return Err(e.into()),
            };
            (sol, normalize_density(&v, &disc)?)
        }
        Assembled::Collocation(op) => {
            let sol = eigs_near_zero(op, cfg.k, &opts, shift)?;
            let v = stationary_collocation_vector(op, &opts)?;
            (sol, normalize_density(&v, &disc)?)
        }
    };
    let eigensolve_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let report = analyze(
        cfg,
        &field,
        &matrix,
        &sol.eigenvalues,
        &sol.vectors,
        &density,
        null_dim,
        1,
        SUPPORT_MASS,
    )?;
    let analysis_seconds = started.elapsed().as_secs_f64();

    let out = &cfg.out;
    matrix.write_matrix_market(&out.join("matrix.mtx"))?;
    write_eigenvalues_csv(&out.join("eigenvalues.csv"), &sol.eigenvalues)?;
    write_eigenvectors_csv(&out.join("eigenvectors.csv"), &sol.vectors)?;
    write_density_csv(&out.join("density.csv"), &disc.points(), &density.values)?;
    write_json(&out.join("analysis.json"), &report)?;
    if let Some(split) = &report.split {
        write_membership_csv(&out.join("membership.csv"), split, disc.len())?;
    }
    let metadata = Metadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        counts: axis_counts(cfg, field.dim())?,
        entries: disc.len(),
        matrix_nnz: matrix.nnz(),
        field_evaluations: assembled.field_evaluations(),
        samples_per_box: match &assembled {
            Assembled::Ulam(p) => Some(p.samples_per_box()),
            _ => None,
        },
        timings: Timings {
            assembly_seconds,
            eigensolve_seconds,
            analysis_seconds,
        },
        eigensolver: SolverSummary {
            method: sol.method.as_str().to_string(),
            converged: sol.converged,
            restarts: sol.restarts,
            applications: sol.applications,
            shift: sol.shift,
            threshold: sol.threshold,
            max_residual: sol.residuals.iter().copied().fold(0.0, f64::max),
        },
    };
    write_json(&out.join("metadata.json"), &metadata)?;
    if !sol.converged {
        return Err(CliError::Solver(format!(
            "largest residual {:.3e} exceeds {:.3e}; outputs were written to {}",
            metadata.eigensolver.max_residual,
            sol.threshold,
            out.display()
        )));
    }
    Ok(RunOutcome { metadata, report })
}

enum Assembled {
    Ulam(UlamMatrix),
    Generator(GeneratorMatrix),
    Collocation(SpectralOperator),
}

impl Assembled {
    fn matrix(&self) -> &CsrMatrix {
        match self {
            Assembled::Ulam(p) => p.matrix(),
            Assembled::Generator(a) => a.matrix(),
            Assembled::Collocation(op) => op.matrix(),
        }
    }

    fn field_evaluations(&self) -> u64 {
        match self {
            Assembled::Ulam(p) => p.field_evaluations(),
            Assembled::Generator(a) => a.field_evaluations(),
            Assembled::Collocation(op) => op.field_evaluations(),
        }
    }
}
