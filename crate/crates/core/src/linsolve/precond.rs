use super::CsrMatrix;
use crate::{Error, Result};

/// Applies `z = M^{-1} r`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .iter()
            .enumerate()
            .map(|(r, &d)| {
                if d != 0.0 && d.is_finite() {
                    Ok(1.0 / d)
                } else {
                    Err(Error::InvalidArgument(format!("zero diagonal in row {r}")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Jacobi { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
pub struct Ilu0 {
    lu: CsrMatrix,
    vals: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let row_ptr = a.row_ptr();
        let cols = a.cols();
        let mut vals = a.vals().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in row_ptr[r]..row_ptr[r + 1] {
                if cols[k] == r {
                    diag_pos[r] = k;
                }
            }
            if diag_pos[r] == usize::MAX {
                return Err(Error::InvalidArgument(format!("missing diagonal in row {r}")));
            }
        }
        // Position of each column within the current row, for the update loop.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[cols[k]] = k;
            }
            for k in row_ptr[i]..diag_pos[i] {
                let j = cols[k];
                let d = vals[diag_pos[j]];
                if d == 0.0 {
                    return Err(Error::InvalidArgument(format!("zero pivot in row {j}")));
                }
                let l = vals[k] / d;
                vals[k] = l;
                for kk in diag_pos[j] + 1..row_ptr[j + 1] {
                    let p = pos[cols[kk]];
                    if p != usize::MAX {
                        vals[p] -= l * vals[kk];
                    }
                }
            }
            for k in row_ptr[i]..row_ptr[i + 1] {
                pos[cols[k]] = usize::MAX;
            }
            if vals[diag_pos[i]] == 0.0 || !vals[diag_pos[i]].is_finite() {
                return Err(Error::InvalidArgument(format!("zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu: a.clone(), vals, diag_pos })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n();
        let row_ptr = self.lu.row_ptr();
        let cols = self.lu.cols();
        for i in 0..n {
            let mut s = r[i];
            for k in row_ptr[i]..self.diag_pos[i] {
                s -= self.vals[k] * z[cols[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..row_ptr[i + 1] {
                s -= self.vals[k] * z[cols[k]];
            }
            z[i] = s / self.vals[self.diag_pos[i]];
        }
    }
}
