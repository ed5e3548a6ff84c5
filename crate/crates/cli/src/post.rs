//! `analyze` and `compare`: work on the files of finished runs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use genflow_core::analysis::spectral_mapping_rows;
use genflow_core::io::{
    fmt_f64, read_density_csv, read_eigenvalues_csv, read_eigenvectors_csv, write_json,
};
use genflow_core::{normalize_density, CsrMatrix, MappingRow};

use crate::config::Method;
use crate::error::CliError;
use crate::pipeline::{
    analyze, build_field, discretization, write_membership_csv, AnalysisReport, Metadata,
    SUPPORT_MASS,
};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Directory written by a previous ulam, generator or collocation run.
    #[arg(long)]
    pub run: PathBuf,

    /// Eigenpair used for the almost-invariant split (0 is the density).
    #[arg(long, default_value_t = 1)]
    pub pair: usize,

    /// Mass fraction captured by the reported support.
    #[arg(long, default_value_t = SUPPORT_MASS)]
    pub mass: f64,

    /// Where to write analysis.json and membership.csv; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Run directory of a generator or collocation run.
    #[arg(long)]
    pub generator: PathBuf,

    /// Run directory of an ulam run.
    #[arg(long)]
    pub ulam: PathBuf,

    /// Where to write mapping.csv and mapping.json; defaults to the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn read_metadata(dir: &Path) -> Result<Metadata, CliError> {
    let path = dir.join("metadata.json");
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn run_analyze(args: &AnalyzeArgs) -> Result<AnalysisReport, CliError> {
    if !(args.mass > 0.0 && args.mass <= 1.0) {
        return Err(CliError::Config(format!(
            "--mass must lie in (0, 1], got {}",
            args.mass
        )));
    }
    let meta = read_metadata(&args.run)?;
    let cfg = meta.config;
    let field = build_field(&cfg)?;
    let disc = discretization(&cfg, &field)?;
    let matrix = CsrMatrix::read_matrix_market(&args.run.join("matrix.mtx"))?;
    let eigenvalues = read_eigenvalues_csv(&args.run.join("eigenvalues.csv"))?;
    let vectors = read_eigenvectors_csv(&args.run.join("eigenvectors.csv"))?;
    let values = read_density_csv(&args.run.join("density.csv"))?;
    if values.len() != disc.len() || vectors.iter().any(|v| v.len() != disc.len()) {
        return Err(CliError::Config(format!(
            "stored vectors do not match the {} grid entries",
            disc.len()
        )));
    }
    let density = normalize_density(&values, &disc)?;
    let report = analyze(
        &cfg,
        &field,
        &matrix,
        &eigenvalues,
        &vectors,
        &density,
        None,
        args.pair,
        args.mass,
    )?;
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&out)?;
    write_json(&out.join("analysis.json"), &report)?;
    if let Some(split) = &report.split {
        write_membership_csv(&out.join("membership.csv"), split, disc.len())?;
    }
    Ok(report)
}

pub fn run_compare(args: &CompareArgs) -> Result<Vec<MappingRow>, CliError> {
    let gen_meta = read_metadata(&args.generator)?;
    let ulam_meta = read_metadata(&args.ulam)?;
    if gen_meta.config.method == Method::Ulam {
        return Err(CliError::Config(
            "--generator must point at a generator or collocation run".into(),
        ));
    }
    if ulam_meta.config.method != Method::Ulam {
        return Err(CliError::Config("--ulam must point at an ulam run".into()));
    }
    let t = ulam_meta
        .config
        .t
        .ok_or_else(|| CliError::Config("ulam run without a flow time".into()))?;
    let gen = read_eigenvalues_csv(&args.generator.join("eigenvalues.csv"))?;
    let ulam = read_eigenvalues_csv(&args.ulam.join("eigenvalues.csv"))?;
    let rows = spectral_mapping_rows(&gen, &ulam, t)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let mut text = String::from(
        "index,generator_re,generator_im,ulam_log_re,ulam_log_im,difference,relative\n",
    );
    for r in &rows {
        let cols = [
            r.generator_re,
            r.generator_im,
            r.ulam_log_re,
            r.ulam_log_im,
            r.difference,
            r.relative(),
        ];
        let cols: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
        text.push_str(&format!("{},{}\n", r.index, cols.join(",")));
    }
    fs::write(out.join("mapping.csv"), text)?;
    write_json(&out.join("mapping.json"), &rows)?;
    Ok(rows)
}
