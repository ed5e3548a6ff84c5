//! Compressed sparse row matrices and Matrix Market I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row count above which matrix-vector products fan out over rayon.
const PAR_ROWS: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are summed
    /// and columns sorted. Explicit zeros are kept.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        Self::from_rows(
            ncols,
            rows.iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(c, &v)| (c, v))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|e| e.1).sum())
            .collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| -> f64 {
            let r = self.indptr[i]..self.indptr[i + 1];
            self.indices[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(|(&c, &v)| v * x[c])
                .sum()
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    /// `y = x A` (row vector times matrix), computed through the transpose
    /// so the result does not depend on the worker count.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        let t = self.transpose();
        let mut y = vec![0.0; self.ncols];
        t.mul_vec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let k = next[c];
                indices[k] = i;
                values[k] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Principal sub-matrix on the (sorted or unsorted) index set `keep`.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let rows = keep
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter(|(c, _)| map[*c] != usize::MAX)
                    .map(|(c, v)| (map[c], v))
                    .collect()
            })
            .collect();
        Self::from_rows(keep.len(), rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] += v;
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|e| e.1.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix Market coordinate format, 1-based indices, 17 significant digits.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.16e}", i + 1, c + 1, v);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_matrix_market())?;
        Ok(())
    }

    pub fn parse_matrix_market(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("matrix market: {m}"));
        let mut lines = text.lines();
        let banner = lines.next().ok_or_else(|| bad("empty input"))?;
        let banner_lc = banner.to_ascii_lowercase();
        if !banner_lc.starts_with("%%matrixmarket matrix coordinate real general") {
            return Err(bad("unsupported banner"));
        }
        let mut lines = lines.filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let size: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing size line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size line")))
            .collect::<Result<_>>()?;
        let [nrows, ncols, nnz] = size[..] else {
            return Err(bad("size line needs three integers"));
        };
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad("entry line needs three fields"));
            }
            let r: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
            let c: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
            if r == 0 || c == 0 || r > nrows || c > ncols {
                return Err(bad("index out of range"));
            }
            triplets.push((r - 1, c - 1, v));
        }
        if triplets.len() != nnz {
            return Err(bad("entry count does not match header"));
        }
        Ok(Self::from_triplets(nrows, ncols, &triplets))
    }

    pub fn read_matrix_market(path: &Path) -> Result<Self> {
        Self::parse_matrix_market(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_are_summed() {
        let a =
            CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 4.0), (0, 0, -3.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.row_sums(), vec![0.0, 4.0]);
        assert_eq!(a.vec_mul(&[1.0, 1.0]), vec![1.0, 3.0]);
        assert_eq!(a.submatrix(&[1]).to_dense(), vec![vec![0.0]]);
    }

    #[test]
    fn matrix_market_format() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 2.5], vec![-1.0, 0.0]]);
        let text = a.to_matrix_market();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 "));
        assert!(CsrMatrix::parse_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn matrix_market_round_trip(entries in proptest::collection::vec((0usize..7, 0usize..5, -1e6f64..1e6), 0..40)) {
            let a = CsrMatrix::from_triplets(7, 5, &entries);
            let b = CsrMatrix::parse_matrix_market(&a.to_matrix_market()).unwrap();
            prop_assert_eq!(a.clone(), b);
            prop_assert_eq!(a.transpose().transpose(), a);
        }
    }
}
