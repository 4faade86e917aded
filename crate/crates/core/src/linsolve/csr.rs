use rayon::prelude::*;

use crate::par::Reduction;
use crate::{Error, Result};

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns in a
    /// row are summed; a diagonal entry is always stored.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (r, mut row) in rows.into_iter().enumerate() {
            row.push((r, 0.0));
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if c >= n {
                    return Err(Error::InvalidArgument(format!("column {c} out of range in row {r}")));
                }
                if cols.len() > start && cols[cols.len() - 1] == c {
                    *vals.last_mut().expect("nonempty") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(CsrMatrix { n, row_ptr, cols, vals })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { n, row_ptr: (0..=n).collect(), cols: (0..n).collect(), vals: vec![1.0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let s = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[s.clone()], &self.vals[s])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|i| vals[i]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Whether row `r` has no stored nonzero off the diagonal.
    pub fn is_diagonal_row(&self, r: usize) -> bool {
        let (cols, vals) = self.row(r);
        cols.iter().zip(vals).all(|(&c, &v)| c == r || v == 0.0)
    }

    /// `y = A x`, parallel over rows. Each row is summed in column order, so
    /// the result does not depend on the worker count.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(r, yr)| {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        });
    }

    /// `b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        self.spmv(x, &mut r);
        r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        r
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64], red: Reduction) -> f64 {
        red.norm2(&self.residual(x, b))
    }

    /// Coordinate-format text, one `row col value` triplet per line with 17
    /// significant digits.
    /// Matrix Market coordinate text, 1-based indices.
    pub fn to_coo_string(&self) -> String {
        use std::fmt::Write;
        let mut s = format!("%%MatrixMarket matrix coordinate real general\n{} {} {}\n", self.n, self.n, self.nnz());
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let _ = writeln!(s, "{} {} {v:.16e}", r + 1, c + 1);
            }
        }
        s
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                row[*c] = *v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_diagonal_stored() {
        let m = CsrMatrix::from_rows(vec![vec![(1, 2.0), (1, 3.0)], vec![(1, 4.0)]]).unwrap();
        assert_eq!(m.row(0), (&[0usize, 1][..], &[0.0, 5.0][..]));
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert!(!m.is_diagonal_row(0));
        assert!(m.is_diagonal_row(1));
    }

    #[test]
    fn spmv_and_coo() {
        let m = CsrMatrix::from_rows(vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0)]]).unwrap();
        let mut y = vec![0.0; 2];
        m.spmv(&[1.0, 2.0], &mut y);
        assert_eq!(y, vec![0.0, 3.0]);
        let coo = m.to_coo_string();
        assert!(coo.starts_with("%%MatrixMarket"));
        assert!(coo.contains("\n1 2 -1.0000000000000000e0\n"));
        assert_eq!(coo.lines().count(), 2 + 4);
    }

    #[test]
    fn out_of_range_column_is_rejected() {
        assert!(CsrMatrix::from_rows(vec![vec![(3, 1.0)]]).is_err());
    }
}
