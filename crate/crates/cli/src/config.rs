use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ulam,
    Generator,
    Collocation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ulam => "ulam",
            Method::Generator => "generator",
            Method::Collocation => "collocation",
        }
    }
}

/// Flags shared by the three discretization subcommands. Every flag is
/// optional here so that a config file can fill it in.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Built-in field name (sine_flow, abc, lorenz, constant) or a sampled-field CSV.
    #[arg(long)]
    pub field: Option<String>,

    /// Field parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,

    /// Boxes (or nodes) per axis; one value is used for every axis.
    #[arg(long, visible_alias = "nodes", value_delimiter = ',')]
    pub n: Option<Vec<usize>>,

    /// Flow time (ulam only).
    #[arg(long)]
    pub t: Option<f64>,

    /// Noise level (ulam and collocation).
    #[arg(long)]
    pub eps: Option<f64>,

    /// Samples per box (ulam only).
    #[arg(long)]
    pub samples: Option<usize>,

    /// RK4 steps per trajectory (ulam only).
    #[arg(long)]
    pub steps: Option<usize>,

    /// Gauss points per face axis (generator only).
    #[arg(long)]
    pub quad_order: Option<usize>,

    /// Number of eigenpairs.
    #[arg(long)]
    pub k: Option<usize>,

    /// Eigensolver residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Shift-invert shift (generator, collocation); defaults to 1e-6 max |A_ii|.
    /// A shift nearer the wanted eigenvalues' scale speeds up iterative solves.
    #[arg(long)]
    pub shift: Option<f64>,

    /// Seed of the per-box sample streams (ulam) and the Arnoldi start vector.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub field: String,
    pub params: Vec<f64>,
    pub counts: Vec<usize>,
    pub t: Option<f64>,
    pub eps: f64,
    pub samples: Option<usize>,
    pub steps: Option<usize>,
    pub quad_order: Option<usize>,
    pub k: usize,
    pub tol: f64,
    #[serde(default)]
    pub shift: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
}

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_TOL: f64 = 1e-10;

fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                n + 1
            )));
        };
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

impl RunArgs {
    /// Fills unset flags from the config file, if one was given.
    fn merged(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        for (key, value) in parse_file(&path)? {
            let v = value.as_str();
            match key.as_str() {
                "field" => self.field = self.field.or(Some(value.clone())),
                "params" => self.params = self.params.or(Some(parse_list(&key, v)?)),
                "n" | "nodes" => self.n = self.n.or(Some(parse_list(&key, v)?)),
                "t" => self.t = self.t.or(Some(parse_value(&key, v)?)),
                "eps" => self.eps = self.eps.or(Some(parse_value(&key, v)?)),
                "samples" => self.samples = self.samples.or(Some(parse_value(&key, v)?)),
                "steps" => self.steps = self.steps.or(Some(parse_value(&key, v)?)),
                "quad_order" => self.quad_order = self.quad_order.or(Some(parse_value(&key, v)?)),
                "k" => self.k = self.k.or(Some(parse_value(&key, v)?)),
                "tol" => self.tol = self.tol.or(Some(parse_value(&key, v)?)),
                "shift" => self.shift = self.shift.or(Some(parse_value(&key, v)?)),
                "seed" => self.seed = self.seed.or(Some(parse_value(&key, v)?)),
                "out" => self.out = self.out.or(Some(PathBuf::from(v))),
                other => return Err(CliError::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(self)
    }

    pub fn resolve(self, method: Method) -> Result<RunConfig, CliError> {
        let a = self.merged()?;
        let reject = |present: bool, what: &str| {
            if present {
                Err(CliError::Config(format!(
                    "--{what} is not accepted by the {} method",
                    method.as_str()
                )))
            } else {
                Ok(())
            }
        };
        match method {
            Method::Ulam => {
                reject(a.quad_order.is_some(), "quad-order")?;
                reject(a.shift.is_some(), "shift")?;
                if a.t.is_none() || a.samples.is_none() {
                    return Err(CliError::Config(
                        "the ulam method needs --t and --samples".into(),
                    ));
                }
            }
            Method::Generator => {
                reject(a.eps.is_some(), "eps")?;
                reject(a.t.is_some(), "t")?;
                reject(a.samples.is_some(), "samples")?;
                reject(a.steps.is_some(), "steps")?;
            }
            Method::Collocation => {
                reject(a.t.is_some(), "t")?;
                reject(a.samples.is_some(), "samples")?;
                reject(a.steps.is_some(), "steps")?;
                reject(a.quad_order.is_some(), "quad-order")?;
            }
        }
        let field = a
            .field
            .ok_or_else(|| CliError::Config("--field is required".into()))?;
        let counts =
            a.n.ok_or_else(|| CliError::Config("--n is required".into()))?;
        if counts.is_empty() || counts.contains(&0) {
            return Err(CliError::Config("--n must list positive counts".into()));
        }
        Ok(RunConfig {
            method,
            field,
            params: a.params.unwrap_or_default(),
            counts,
            t: a.t,
            eps: a.eps.unwrap_or(0.0),
            samples: a.samples,
            steps: a.steps,
            quad_order: a.quad_order,
            k: a.k.unwrap_or(DEFAULT_K),
            tol: a.tol.unwrap_or(DEFAULT_TOL),
            shift: a.shift,
            seed: a.seed.unwrap_or(0),
            out: a.out.unwrap_or_else(|| PathBuf::from("genflow-out")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs {
            field: Some("sine_flow".into()),
            n: Some(vec![32]),
            ..RunArgs::default()
        }
    }

    #[test]
    fn generator_rejects_noise() {
        let a = RunArgs {
            eps: Some(0.1),
            ..args()
        };
        assert!(matches!(
            a.resolve(Method::Generator),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn ulam_requires_time_and_samples() {
        assert!(args().resolve(Method::Ulam).is_err());
        let a = RunArgs {
            t: Some(0.1),
            samples: Some(4),
            ..args()
        };
        assert_eq!(a.resolve(Method::Ulam).unwrap().samples, Some(4));
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# sine flow\nfield = abc\nn = 8, 8, 8\nk = 5\nquad-order = 3\n",
        )
        .unwrap();
        let a = RunArgs {
            config: Some(path),
            field: Some("sine_flow".into()),
            ..RunArgs::default()
        };
        let cfg = a.resolve(Method::Generator).unwrap();
        assert_eq!(cfg.field, "sine_flow");
        assert_eq!(cfg.counts, vec![8, 8, 8]);
        assert_eq!((cfg.k, cfg.quad_order), (5, Some(3)));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "colour = blue\n").unwrap();
        let a = RunArgs {
            config: Some(path),
            ..args()
        };
        assert!(matches!(
            a.resolve(Method::Generator),
            Err(CliError::Config(_))
        ));
    }
}
