//! Vector fields on box domains: the analytic flows used throughout the crate
//! and sampled fields read from disk with multilinear interpolation.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance outside a closed axis that is still clamped instead of rejected.
pub const CLAMP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Axis-aligned box `M` with a boundary kind per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    intervals: Vec<Interval>,
    boundaries: Vec<Boundary>,
}

impl DomainSpec {
    pub fn new(intervals: &[(f64, f64)], boundaries: &[Boundary]) -> Result<Self> {
        let d = intervals.len();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1, 2 or 3, got {d}"
            )));
        }
        if boundaries.len() != d {
            return Err(Error::InvalidDomain(format!(
                "{d} intervals but {} boundary kinds",
                boundaries.len()
            )));
        }
        for (axis, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            intervals: intervals
                .iter()
                .map(|&(lower, upper)| Interval { lower, upper })
                .collect(),
            boundaries: boundaries.to_vec(),
        })
    }

    /// `[0,1)^d` with periodic boundaries on every axis.
    pub fn unit_torus(d: usize) -> Result<Self> {
        Self::new(&vec![(0.0, 1.0); d], &vec![Boundary::Periodic; d])
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn interval(&self, axis: usize) -> Interval {
        self.intervals[axis]
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn boundary(&self, axis: usize) -> Boundary {
        self.boundaries[axis]
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::width).product()
    }

    pub fn all_periodic(&self) -> bool {
        self.boundaries.iter().all(|&b| b == Boundary::Periodic)
    }

    /// Reduces periodic coordinates into `[lower, upper)`.
    pub fn wrap_periodic(&self, x: &mut [f64]) {
        for (axis, xi) in x.iter_mut().enumerate() {
            if self.boundaries[axis] == Boundary::Periodic {
                *xi = wrap(*xi, self.intervals[axis]);
            }
        }
    }

    /// Wraps periodic coordinates and clamps closed ones into the domain.
    pub fn project(&self, x: &mut [f64]) {
        for (axis, xi) in x.iter_mut().enumerate() {
            let iv = self.intervals[axis];
            *xi = match self.boundaries[axis] {
                Boundary::Periodic => wrap(*xi, iv),
                Boundary::Closed => xi.clamp(iv.lower, iv.upper),
            };
        }
    }
}

fn wrap(x: f64, iv: Interval) -> f64 {
    if (iv.lower..iv.upper).contains(&x) {
        return x;
    }
    let w = iv.width();
    let y = iv.lower + (x - iv.lower).rem_euclid(w);
    if y >= iv.upper {
        iv.lower
    } else {
        y
    }
}

/// Rectilinear node grid with `d` velocity components per node.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    /// Node coordinates per axis, strictly increasing.
    pub axes: Vec<Vec<f64>>,
    /// Row-major (last axis fastest) velocity samples, `d` values per node.
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let d = axes.len();
        for (axis, nodes) in axes.iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::MalformedField(format!("axis {axis} has no nodes")));
            }
            if nodes.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::MalformedField(format!(
                    "axis {axis} node coordinates are not strictly increasing"
                )));
            }
        }
        let nodes: usize = axes.iter().map(Vec::len).product();
        if values.len() != nodes * d {
            return Err(Error::ShapeMismatch {
                expected: nodes,
                found: values.len() / d.max(1),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedField(format!(
                "non-finite velocity sample at node {}",
                bad / d
            )));
        }
        Ok(Self { axes, values })
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    /// `sin(4 pi x) + offset` on the circle.
    SineFlow {
        offset: f64,
    },
    Abc {
        a: f64,
        b: f64,
        c: f64,
    },
    Lorenz {
        sigma: f64,
        rho: f64,
        beta: f64,
    },
    Constant(Vec<f64>),
    Sampled(SampledField),
}

/// A velocity field `F: M -> R^d` together with its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    domain: DomainSpec,
    source: FieldSource,
}

/// Builds one of the built-in analytic fields on its default domain.
///
/// Empty `params` selects the default parameters (`a=sqrt3, b=sqrt2, c=1` for
/// ABC, `sigma=10, rho=28, beta=8/3` for Lorenz, offset 1.1 for the sine flow).
/// The constant field takes its velocity as parameters and lives on the unit
/// torus of matching dimension.
pub fn make_builtin_field(name: &str, params: &[f64]) -> Result<VectorField> {
    let arity = |expected: &str| Error::FieldArity {
        name: name.to_string(),
        expected: expected.to_string(),
        got: params.len(),
    };
    let (domain, source) = match name {
        "sine_flow" => {
            let offset = match params {
                [] => 1.1,
                [c] => *c,
                _ => return Err(arity("0 or 1")),
            };
            (DomainSpec::unit_torus(1)?, FieldSource::SineFlow { offset })
        }
        "abc" => {
            let (a, b, c) = match params {
                [] => (3f64.sqrt(), 2f64.sqrt(), 1.0),
                [a, b, c] => (*a, *b, *c),
                _ => return Err(arity("0 or 3")),
            };
            (DomainSpec::unit_torus(3)?, FieldSource::Abc { a, b, c })
        }
        "lorenz" => {
            let (sigma, rho, beta) = match params {
                [] => (10.0, 28.0, 8.0 / 3.0),
                [s, r, b] => (*s, *r, *b),
                _ => return Err(arity("0 or 3")),
            };
            let domain = DomainSpec::new(
                &[(-30.0, 30.0), (-30.0, 30.0), (-10.0, 70.0)],
                &[Boundary::Closed; 3],
            )?;
            (domain, FieldSource::Lorenz { sigma, rho, beta })
        }
        "constant" => {
            if !(1..=3).contains(&params.len()) {
                return Err(arity("1 to 3"));
            }
            (
                DomainSpec::unit_torus(params.len())?,
                FieldSource::Constant(params.to_vec()),
            )
        }
        other => return Err(Error::UnknownField(other.to_string())),
    };
    Ok(VectorField { domain, source })
}

impl VectorField {
    pub fn new(domain: DomainSpec, source: FieldSource) -> Result<Self> {
        let d = domain.dim();
        let source_dim = match &source {
            FieldSource::SineFlow { .. } => 1,
            FieldSource::Abc { .. } | FieldSource::Lorenz { .. } => 3,
            FieldSource::Constant(v) => v.len(),
            FieldSource::Sampled(s) => s.axes.len(),
        };
        if source_dim != d {
            return Err(Error::InvalidDomain(format!(
                "field has dimension {source_dim} but domain has dimension {d}"
            )));
        }
        Ok(Self { domain, source })
    }

    /// Same field on a different domain of equal dimension.
    pub fn with_domain(self, domain: DomainSpec) -> Result<Self> {
        Self::new(domain, self.source)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Short human-readable name for reports.
    pub fn name(&self) -> &'static str {
        match self.source {
            FieldSource::SineFlow { .. } => "sine_flow",
            FieldSource::Abc { .. } => "abc",
            FieldSource::Lorenz { .. } => "lorenz",
            FieldSource::Constant(_) => "constant",
            FieldSource::Sampled(_) => "sampled",
        }
    }

    /// Evaluates `F(x)` into `out`. Periodic coordinates are reduced first.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(x);
        self.domain.wrap_periodic(&mut p[..d]);
        match &self.source {
            FieldSource::SineFlow { offset } => out[0] = (4.0 * PI * p[0]).sin() + offset,
            FieldSource::Abc { a, b, c } => {
                let (sx, cx) = (2.0 * PI * p[0]).sin_cos();
                let (sy, cy) = (2.0 * PI * p[1]).sin_cos();
                let (sz, cz) = (2.0 * PI * p[2]).sin_cos();
                out[0] = a * sz + c * cy;
                out[1] = b * sx + a * cz;
                out[2] = c * sy + b * cx;
            }
            FieldSource::Lorenz { sigma, rho, beta } => {
                let (x, y, z) = (p[0], p[1], p[2]);
                out[0] = sigma * (y - x);
                out[1] = x * (rho - z) - y;
                out[2] = x * y - beta * z;
            }
            FieldSource::Constant(v) => out[..d].copy_from_slice(v),
            FieldSource::Sampled(s) => self.interpolate(s, &mut p[..d], out)?,
        }
        if out[..d].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField(x.to_vec()));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    fn interpolate(&self, s: &SampledField, p: &mut [f64], out: &mut [f64]) -> Result<()> {
        let d = p.len();
        // per axis: (lower node, upper node, weight of upper node)
        let mut stencil = [(0usize, 0usize, 0.0f64); 3];
        for axis in 0..d {
            let iv = self.domain.interval(axis);
            let nodes = &s.axes[axis];
            let n = nodes.len();
            stencil[axis] = match self.domain.boundary(axis) {
                Boundary::Closed => {
                    if p[axis] < iv.lower - CLAMP_SLACK || p[axis] > iv.upper + CLAMP_SLACK {
                        return Err(Error::OutsideDomain {
                            point: p.to_vec(),
                            axis,
                        });
                    }
                    let x = p[axis].clamp(nodes[0], nodes[n - 1]);
                    if n == 1 {
                        (0, 0, 0.0)
                    } else {
                        let k = nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
                        let w = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
                        (k, k + 1, w)
                    }
                }
                Boundary::Periodic => {
                    let x = p[axis];
                    let period = iv.width();
                    let k = nodes.partition_point(|&v| v <= x);
                    if k == 0 {
                        // between the last node (shifted down one period) and the first
                        let left = nodes[n - 1] - period;
                        let w = (x - left) / (nodes[0] - left);
                        (n - 1, 0, w)
                    } else if k == n {
                        let right = nodes[0] + period;
                        let w = (x - nodes[n - 1]) / (right - nodes[n - 1]);
                        (n - 1, 0, w)
                    } else {
                        let w = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
                        (k - 1, k, w)
                    }
                }
            };
        }
        let counts = s.counts();
        out[..d].iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut node = 0;
            for axis in 0..d {
                let (lo, hi, w) = stencil[axis];
                let upper = corner >> axis & 1 == 1;
                weight *= if upper { w } else { 1.0 - w };
                node = node * counts[axis] + if upper { hi } else { lo };
            }
            if weight == 0.0 {
                continue;
            }
            let v = &s.values[node * d..(node + 1) * d];
            for c in 0..d {
                out[c] += weight * v[c];
            }
        }
        Ok(())
    }
}

/// Sidecar metadata accompanying a sampled-field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFieldMeta {
    pub counts: Vec<usize>,
    pub domain: Vec<[f64; 2]>,
    pub boundary: Vec<Boundary>,
}

impl SampledFieldMeta {
    pub fn domain_spec(&self) -> Result<DomainSpec> {
        let iv: Vec<(f64, f64)> = self.domain.iter().map(|r| (r[0], r[1])).collect();
        DomainSpec::new(&iv, &self.boundary)
    }
}

/// `field.csv` -> `field.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Reads a sampled field: CSV `x1,..,xd,F1,..,Fd` in row-major node order
/// plus the JSON sidecar next to it declaring the node counts.
pub fn load_sampled_field(path: &Path, domain: &DomainSpec) -> Result<VectorField> {
    let meta: SampledFieldMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::MalformedField(format!("sidecar: {e}")))?;
    let d = domain.dim();
    if meta.counts.len() != d || meta.boundary.len() != d || meta.domain.len() != d {
        return Err(Error::MalformedField(format!(
            "sidecar describes a {}-dimensional grid, domain is {d}-dimensional",
            meta.counts.len()
        )));
    }
    let text = fs::read_to_string(path)?;
    parse_sampled_csv(&text, &meta.counts, domain).map(|s| VectorField {
        domain: domain.clone(),
        source: FieldSource::Sampled(s),
    })
}

/// Like [`load_sampled_field`] but takes the domain from the sidecar.
pub fn load_sampled_field_with_sidecar_domain(path: &Path) -> Result<VectorField> {
    let meta: SampledFieldMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::MalformedField(format!("sidecar: {e}")))?;
    load_sampled_field(path, &meta.domain_spec()?)
}

fn parse_sampled_csv(text: &str, counts: &[usize], domain: &DomainSpec) -> Result<SampledField> {
    let d = counts.len();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedField("empty file".into()))?;
    let expected: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain((1..=d).map(|i| format!("F{i}")))
        .collect();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != expected {
        return Err(Error::MalformedField(format!(
            "header `{header}` does not match `{}`",
            expected.join(",")
        )));
    }
    let total: usize = counts.iter().product();
    let mut coords = Vec::with_capacity(total * d);
    let mut values = Vec::with_capacity(total * d);
    let mut rows = 0usize;
    for (lineno, line) in lines.enumerate() {
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = parsed.map_err(|e| Error::MalformedField(format!("row {}: {e}", lineno + 2)))?;
        if row.len() != 2 * d {
            return Err(Error::MalformedField(format!(
                "row {} has {} columns, expected {}",
                lineno + 2,
                row.len(),
                2 * d
            )));
        }
        coords.extend_from_slice(&row[..d]);
        values.extend_from_slice(&row[d..]);
        rows += 1;
    }
    if rows != total {
        return Err(Error::ShapeMismatch {
            expected: total,
            found: rows,
        });
    }
    // recover per-axis coordinates from the row-major layout and check rectilinearity
    let mut strides = vec![1usize; d];
    for axis in (0..d.saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * counts[axis + 1];
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|axis| {
            (0..counts[axis])
                .map(|k| coords[k * strides[axis] * d + axis])
                .collect()
        })
        .collect();
    for node in 0..total {
        for axis in 0..d {
            let k = node / strides[axis] % counts[axis];
            if coords[node * d + axis] != axes[axis][k] {
                return Err(Error::MalformedField(format!(
                    "node {node} is not on the declared rectilinear grid"
                )));
            }
        }
    }
    for (axis, nodes) in axes.iter().enumerate() {
        let iv = domain.interval(axis);
        if nodes[0] < iv.lower - CLAMP_SLACK || nodes[nodes.len() - 1] > iv.upper + CLAMP_SLACK {
            return Err(Error::MalformedField(format!(
                "axis {axis} nodes leave the domain"
            )));
        }
        if domain.boundary(axis) == Boundary::Periodic
            && nodes[nodes.len() - 1] >= iv.upper - CLAMP_SLACK
        {
            return Err(Error::MalformedField(format!(
                "periodic axis {axis} must not repeat the upper endpoint"
            )));
        }
    }
    SampledField::new(axes, values)
}

/// Samples `field` on a rectilinear node grid and writes the CSV + sidecar pair.
pub fn write_sampled_field(path: &Path, field: &VectorField, counts: &[usize]) -> Result<()> {
    use std::fmt::Write as _;
    let domain = field.domain();
    let d = domain.dim();
    if counts.len() != d || counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidArgument(
            "one positive count per axis required".into(),
        ));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|axis| {
            let iv = domain.interval(axis);
            let n = counts[axis];
            match domain.boundary(axis) {
                Boundary::Periodic => (0..n)
                    .map(|k| iv.lower + iv.width() * k as f64 / n as f64)
                    .collect(),
                Boundary::Closed if n == 1 => vec![0.5 * (iv.lower + iv.upper)],
                Boundary::Closed => (0..n)
                    .map(|k| iv.lower + iv.width() * k as f64 / (n - 1) as f64)
                    .collect(),
            }
        })
        .collect();
    let mut out = String::new();
    let header: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain((1..=d).map(|i| format!("F{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let total: usize = counts.iter().product();
    let mut x = vec![0.0; d];
    let mut v = vec![0.0; d];
    for node in 0..total {
        let mut rem = node;
        for axis in (0..d).rev() {
            x[axis] = axes[axis][rem % counts[axis]];
            rem /= counts[axis];
        }
        field.eval_into(&x, &mut v)?;
        let row: Vec<String> = x
            .iter()
            .chain(v.iter())
            .map(|t| format!("{t:.17e}"))
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    fs::write(path, out)?;
    let meta = SampledFieldMeta {
        counts: counts.to_vec(),
        domain: domain
            .intervals()
            .iter()
            .map(|iv| [iv.lower, iv.upper])
            .collect(),
        boundary: domain.boundaries().to_vec(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sine_flow_values() {
        let f = make_builtin_field("sine_flow", &[]).unwrap();
        assert_abs_diff_eq!(f.eval(&[0.0]).unwrap()[0], 1.1, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(&[0.125]).unwrap()[0], 2.1, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(&[1.125]).unwrap()[0], 2.1, epsilon = 1e-15);
    }

    #[test]
    fn abc_values() {
        let f = make_builtin_field("abc", &[3f64.sqrt(), 2f64.sqrt(), 1.0]).unwrap();
        let v = f.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 2f64.sqrt(), epsilon = 1e-15);

        let f = make_builtin_field("abc", &[]).unwrap();
        let v = f.eval(&[0.25, 0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(v[0], 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lorenz_origin_is_fixed() {
        let f = make_builtin_field("lorenz", &[10.0, 28.0, 8.0 / 3.0]).unwrap();
        assert_eq!(f.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(
            f.domain().interval(2),
            Interval {
                lower: -10.0,
                upper: 70.0
            }
        );
        assert_eq!(f.domain().boundary(0), Boundary::Closed);
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(
            make_builtin_field("duffing", &[]),
            Err(Error::UnknownField(_))
        ));
        assert!(matches!(
            make_builtin_field("abc", &[1.0]),
            Err(Error::FieldArity { .. })
        ));
        assert!(matches!(
            make_builtin_field("lorenz", &[1.0, 2.0]),
            Err(Error::FieldArity { .. })
        ));
        assert!(matches!(
            make_builtin_field("constant", &[]),
            Err(Error::FieldArity { .. })
        ));
    }

    #[test]
    fn domain_validation() {
        assert!(DomainSpec::new(&[(1.0, 1.0)], &[Boundary::Closed]).is_err());
        assert!(DomainSpec::new(&[(0.0, 1.0); 4], &[Boundary::Closed; 4]).is_err());
        assert!(DomainSpec::new(&[(0.0, 1.0)], &[Boundary::Closed; 2]).is_err());
    }

    #[test]
    fn abc_is_divergence_free() {
        let f = make_builtin_field("abc", &[]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = 1e-4;
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let mut div = 0.0;
            for k in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                div += (f.eval(&xp).unwrap()[k] - f.eval(&xm).unwrap()[k]) / (2.0 * h);
            }
            assert!(div.abs() < 1e-6, "div = {div}");
        }
    }

    fn sampled(domain: DomainSpec, axes: Vec<Vec<f64>>, values: Vec<f64>) -> VectorField {
        VectorField::new(
            domain,
            FieldSource::Sampled(SampledField::new(axes, values).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn constant_samples_interpolate_to_constant() {
        let domain = DomainSpec::new(
            &[(0.0, 1.0), (0.0, 2.0)],
            &[Boundary::Periodic, Boundary::Closed],
        )
        .unwrap();
        let axes = vec![vec![0.0, 0.25, 0.5, 0.75], vec![0.0, 1.0, 2.0]];
        let values: Vec<f64> = (0..12).flat_map(|_| [2.0, 0.0]).collect();
        let f = sampled(domain, axes, values);
        for x in [[0.1, 0.3], [0.9, 1.7], [0.99, 2.0], [0.0, 0.0]] {
            let v = f.eval(&x).unwrap();
            assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_samples_give_midpoint_average() {
        let domain = DomainSpec::new(&[(0.0, 1.0)], &[Boundary::Closed]).unwrap();
        let f = sampled(domain.clone(), vec![vec![0.0, 1.0]], vec![3.0, 5.0]);
        assert_abs_diff_eq!(f.eval(&[0.5]).unwrap()[0], 4.0, epsilon = 1e-15);
        // marginal overshoot is clamped, anything further is rejected
        assert_abs_diff_eq!(f.eval(&[1.0 + 1e-13]).unwrap()[0], 5.0, epsilon = 1e-15);
        assert!(matches!(
            f.eval(&[1.1]),
            Err(Error::OutsideDomain { axis: 0, .. })
        ));
    }

    #[test]
    fn periodic_stencil_wraps() {
        let domain = DomainSpec::unit_torus(1).unwrap();
        let f = sampled(domain, vec![vec![0.0, 0.5]], vec![1.0, 3.0]);
        // between node 0.5 (value 3) and node 1.0 == 0.0 (value 1)
        assert_abs_diff_eq!(f.eval(&[0.75]).unwrap()[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(&[-0.25]).unwrap()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sampled_sine_flow_accuracy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.csv");
        let analytic = make_builtin_field("sine_flow", &[]).unwrap();
        write_sampled_field(&path, &analytic, &[256]).unwrap();
        let f = load_sampled_field(&path, analytic.domain()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0f64;
        for _ in 0..1000 {
            let x = rng.gen::<f64>();
            worst = worst.max((f.eval(&[x]).unwrap()[0] - analytic.eval(&[x]).unwrap()[0]).abs());
        }
        assert!(worst < 1e-3, "max error {worst}");
        // exact at nodes
        for k in 0..256 {
            let x = k as f64 / 256.0;
            assert_eq!(f.eval(&[x]).unwrap()[0], analytic.eval(&[x]).unwrap()[0]);
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let domain = DomainSpec::new(&[(0.0, 1.0)], &[Boundary::Closed]).unwrap();
        let meta = r#"{"counts":[3],"domain":[[0,1]],"boundary":["closed"]}"#;
        fs::write(sidecar_path(&path), meta).unwrap();

        fs::write(&path, "x1,F1\n0,1\n0.5,1\n").unwrap();
        assert!(matches!(
            load_sampled_field(&path, &domain),
            Err(Error::ShapeMismatch { .. })
        ));

        fs::write(&path, "x,F\n0,1\n0.5,1\n1,1\n").unwrap();
        assert!(matches!(
            load_sampled_field(&path, &domain),
            Err(Error::MalformedField(_))
        ));

        fs::write(&path, "x1,F1\n0,1\n0.5,abc\n1,1\n").unwrap();
        assert!(matches!(
            load_sampled_field(&path, &domain),
            Err(Error::MalformedField(_))
        ));

        fs::write(&path, "x1,F1\n0,1\n0.5,2\n1,3\n").unwrap();
        let f = load_sampled_field(&path, &domain).unwrap();
        assert_abs_diff_eq!(f.eval(&[0.75]).unwrap()[0], 2.5, epsilon = 1e-15);
    }

    #[test]
    fn two_dimensional_round_trip_is_exact_at_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc2.csv");
        let domain = DomainSpec::new(
            &[(0.0, 1.0), (0.0, 2.0)],
            &[Boundary::Periodic, Boundary::Closed],
        )
        .unwrap();
        let axes = vec![vec![0.0, 0.5], vec![0.0, 1.0, 2.0]];
        let values: Vec<f64> = (0..6).flat_map(|n| [n as f64, -(n as f64)]).collect();
        let src = sampled(domain.clone(), axes, values);
        write_sampled_field(&path, &src, &[2, 3]).unwrap();
        let back = load_sampled_field_with_sidecar_domain(&path).unwrap();
        assert_eq!(back, src);
    }

    proptest! {
        #[test]
        fn periodic_reduction_is_exact(k in 0u32..(1 << 20), shift in 1i32..4) {
            let x = k as f64 / (1u64 << 20) as f64;
            let f = make_builtin_field("sine_flow", &[]).unwrap();
            let a = f.eval(&[x]).unwrap();
            let b = f.eval(&[x + shift as f64]).unwrap();
            prop_assert_eq!(a, b);
            let g = make_builtin_field("abc", &[]).unwrap();
            let a = g.eval(&[x, 0.5 * x, 0.25]).unwrap();
            let b = g.eval(&[x - shift as f64, 0.5 * x + 1.0, 0.25 + shift as f64]).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
