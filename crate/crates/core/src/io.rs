//! Plain-text writers and readers for eigenvalues, eigenvectors and densities.
//!
//! Floats are written with 17 significant digits so values survive a round trip.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| {
        Error::InvalidArgument(format!(
            "line {line}: cannot parse `{}` as a number",
            s.trim()
        ))
    })
}

/// `index,re,im` per eigenvalue.
pub fn write_eigenvalues_csv(path: &Path, values: &[Complex64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "index,re,im")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(v.re), fmt_f64(v.im))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigenvalues_csv(path: &Path) -> Result<Vec<Complex64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected index,re,im",
                n + 1
            )));
        }
        out.push(Complex64::new(
            parse_f64(cols[1], n + 1)?,
            parse_f64(cols[2], n + 1)?,
        ));
    }
    Ok(out)
}

/// One row per grid entry: `index,v0_re,v0_im,v1_re,...`.
pub fn write_eigenvectors_csv(path: &Path, vectors: &[Vec<Complex64>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let n = vectors.first().map_or(0, Vec::len);
    let mut header = String::from("index");
    for k in 0..vectors.len() {
        header.push_str(&format!(",v{k}_re,v{k}_im"));
    }
    writeln!(w, "{header}")?;
    for i in 0..n {
        write!(w, "{i}")?;
        for v in vectors {
            write!(w, ",{},{}", fmt_f64(v[i].re), fmt_f64(v[i].im))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigenvectors_csv(path: &Path) -> Result<Vec<Vec<Complex64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|l| l.1).unwrap_or("");
    let k = header.split(',').count().saturating_sub(1) / 2;
    let mut out = vec![Vec::new(); k];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 * k + 1 {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected {} columns",
                n + 1,
                2 * k + 1
            )));
        }
        for (j, v) in out.iter_mut().enumerate() {
            v.push(Complex64::new(
                parse_f64(cols[1 + 2 * j], n + 1)?,
                parse_f64(cols[2 + 2 * j], n + 1)?,
            ));
        }
    }
    Ok(out)
}

/// `x0,...,x{d-1},value` per entry, at box centers or collocation nodes.
pub fn write_density_csv(path: &Path, points: &[Vec<f64>], values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let d = points.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..d)
        .map(|k| format!("x{k}"))
        .chain(["density".to_string()])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (p, v) in points.iter().zip(values) {
        let row: Vec<String> = p.iter().chain([v]).map(|x| fmt_f64(*x)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the last column of a density file.
pub fn read_density_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_f64(l.rsplit(',').next().unwrap_or(""), n + 1))
        .collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
