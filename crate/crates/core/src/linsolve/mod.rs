//! Sparse linear algebra: CSR storage, Krylov solvers and preconditioners.
//!
//! The assembled operators are nonsymmetric (the upwind advection part), so
//! only nonsymmetric Krylov methods are offered. All inner products go
//! through [`Reduction`] so that repro runs are bit-identical regardless of
//! the worker count.

mod csr;
mod precond;

pub use csr::CsrMatrix;
pub use precond::{Identity, Ilu0, Jacobi, Preconditioner};

use serde::{Deserialize, Serialize};

use crate::par::Reduction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Bicgstab,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    None,
    Jacobi,
    #[default]
    Ilu0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub preconditioner: PrecondKind,
    /// Stop when `|b - A x|_2 <= rel_tol * |b|_2`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means `10 * sqrt(N) + 200`.
    pub max_iter: Option<usize>,
    /// GMRES restart length.
    pub restart: usize,
    #[serde(skip)]
    pub reduction: Reduction,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Bicgstab,
            preconditioner: PrecondKind::Ilu0,
            rel_tol: 1e-12,
            max_iter: None,
            restart: 60,
            reduction: Reduction::Deterministic,
        }
    }
}

impl SolverConfig {
    pub fn max_iterations(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (10.0 * (n as f64).sqrt()) as usize + 200)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

/// Solves `A x = b` starting from `x`, which holds the result on return.
///
/// Rows with only a diagonal entry are satisfied exactly afterwards.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<SolveStats> {
    let n = a.n();
    if b.len() != n || x.len() != n {
        return Err(Error::InvalidArgument(format!("system of size {n} with rhs {} and guess {}", b.len(), x.len())));
    }
    let diag_rows: Vec<usize> = (0..n).filter(|&r| a.is_diagonal_row(r)).collect();
    for &r in &diag_rows {
        x[r] = b[r] / a.get(r, r);
    }
    let pc: Box<dyn Preconditioner> = match cfg.preconditioner {
        PrecondKind::None => Box::new(Identity),
        PrecondKind::Jacobi => Box::new(Jacobi::new(a)?),
        PrecondKind::Ilu0 => Box::new(Ilu0::new(a)?),
    };
    let max_iter = cfg.max_iterations(n);
    let red = cfg.reduction;
    let bnorm = red.norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let tol = cfg.rel_tol * bnorm;
    let iterations = match cfg.method {
        Method::Bicgstab => bicgstab(a, b, x, pc.as_ref(), tol, max_iter, red),
        Method::Gmres => gmres(a, b, x, pc.as_ref(), tol, max_iter, cfg.restart.max(1), red),
    };
    for &r in &diag_rows {
        x[r] = b[r] / a.get(r, r);
    }
    let residual = a.residual_norm(x, b, red) / bnorm;
    if !(residual <= cfg.rel_tol) {
        return Err(Error::LinearSolver { iterations, residual });
    }
    Ok(SolveStats { iterations, residual })
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Right-preconditioned BiCGSTAB. Restarts from the true residual on
/// breakdown and before declaring convergence.
fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    red: Reduction,
) -> usize {
    let n = a.n();
    let mut it = 0;
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    'restart: while it < max_iter {
        let mut r = a.residual(x, b);
        if red.norm2(&r) <= tol {
            break;
        }
        let r0 = r.clone();
        let mut p = vec![0.0; n];
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        while it < max_iter {
            it += 1;
            let rho_new = red.dot(&r0, &r);
            if rho_new == 0.0 || omega == 0.0 {
                continue 'restart;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pc.apply(&p, &mut p_hat);
            a.spmv(&p_hat, &mut v);
            let r0v = red.dot(&r0, &v);
            if r0v == 0.0 || !r0v.is_finite() {
                continue 'restart;
            }
            alpha = rho / r0v;
            axpy(&mut r, -alpha, &v);
            if red.norm2(&r) <= tol {
                axpy(x, alpha, &p_hat);
                continue 'restart;
            }
            pc.apply(&r, &mut s_hat);
            a.spmv(&s_hat, &mut t);
            let tt = red.dot(&t, &t);
            omega = if tt > 0.0 { red.dot(&t, &r) / tt } else { 0.0 };
            axpy(x, alpha, &p_hat);
            axpy(x, omega, &s_hat);
            axpy(&mut r, -omega, &t);
            if !omega.is_finite() {
                continue 'restart;
            }
            if red.norm2(&r) <= tol {
                continue 'restart;
            }
        }
    }
    it
}

/// Restarted right-preconditioned GMRES with modified Gram-Schmidt.
#[allow(clippy::too_many_arguments)]
fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    m: usize,
    red: Reduction,
) -> usize {
    let n = a.n();
    let mut it = 0;
    let mut z = vec![0.0; n];
    while it < max_iter {
        let r = a.residual(x, b);
        let beta = red.norm2(&r);
        if beta <= tol || !beta.is_finite() {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && it < max_iter {
            it += 1;
            pc.apply(&basis[k], &mut z);
            let mut w = vec![0.0; n];
            a.spmv(&z, &mut w);
            for (i, vi) in basis.iter().enumerate() {
                h[i][k] = red.dot(&w, vi);
                axpy(&mut w, -h[i][k], vi);
            }
            let wn = red.norm2(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if g[k].abs() <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            axpy(&mut u, *yi, vi);
        }
        pc.apply(&u, &mut z);
        axpy(x, 1.0, &z);
        if k == 0 {
            break;
        }
    }
    it
}

/// Mean absolute residual `mean |A u - f|` over all rows.
pub fn outer_residual(a: &CsrMatrix, f: &[f64], u: &[f64], red: Reduction) -> f64 {
    let mut au = vec![0.0; a.n()];
    a.spmv(u, &mut au);
    red.sum(au.len(), |i| (au[i] - f[i]).abs()) / a.n().max(1) as f64
}
