//! Gradient reconstructions: constrained weighted least squares at cell
//! centers, face gradients `β_f` on triangles, and the inflow-based gradient.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::mesh::{Neighbor, PolyMesh};
use crate::Vec3;

/// Relative Tikhonov weight added to rank-deficient normal matrices.
pub const TIKHONOV: f64 = 1e-10;

/// Cell gradients together with the cells whose stencil needed regularizing.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradients {
    pub grads: Vec<Vec3>,
    pub regularized: Vec<usize>,
}

/// Minimizes `y^T m y - 2 b^T y` over `|y| <= 1` for symmetric positive
/// definite `m`.
///
/// When the unconstrained minimizer leaves the unit ball, the multiplier
/// `λ > 0` with `|(m + λI)^{-1} b| = 1` is found by Newton's method on
/// `1/|y(λ)| - 1`, safeguarded by bisection.
pub fn constrained_minimizer(m: &Matrix3<f64>, b: &Vec3) -> Vec3 {
    let eig = SymmetricEigen::new(*m);
    let sigma = eig.eigenvalues;
    let c = eig.eigenvectors.transpose() * b;
    let y_of = |lambda: f64| -> Vec3 { Vec3::from_fn(|i, _| c[i] / (sigma[i] + lambda)) };
    let y0 = y_of(0.0);
    if y0.norm() <= 1.0 {
        return eig.eigenvectors * y0;
    }
    // |y(λ)| <= |b| / λ, so λ = |b| is feasible.
    let (mut lo, mut hi) = (0.0, b.norm().max(f64::MIN_POSITIVE));
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = y_of(lambda);
        let n = y.norm();
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            break;
        }
        if n > 1.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        // d|y|/dλ = -Σ c_i² / (σ_i+λ)³ / |y|
        let dn = -(0..3).map(|i| c[i] * c[i] / (sigma[i] + lambda).powi(3)).sum::<f64>() / n;
        // ψ = 1/n - 1, ψ' = -dn / n²
        let step = (1.0 / n - 1.0) / (-dn / (n * n));
        let next = lambda - step;
        lambda = if next > lo && next < hi && next.is_finite() { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let y = eig.eigenvectors * y_of(lambda);
    let n = y.norm();
    if n > 1.0 {
        y / n
    } else {
        y
    }
}

/// Radial projection onto the closed unit ball.
pub fn clip_unit(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 1.0 {
        v / n
    } else {
        v
    }
}

/// Constrained WLS gradient of one cell. Returns the gradient and whether
/// the normal matrix was regularized.
pub fn cell_gradient(mesh: &PolyMesh, u: &[f64], boundary: &[Option<f64>], p: usize) -> (Vec3, bool) {
    let xp = mesh.cell_center(p);
    let mut m = Matrix3::zeros();
    let mut b = Vec3::zeros();
    let mut count = 0usize;
    let mut add = |d: Vec3, du: f64| {
        let w = 1.0 / d.norm_squared();
        m += w * d * d.transpose();
        b += w * du * d;
        count += 1;
    };
    for cf in mesh.cell_faces(p) {
        match cf.other {
            Some(q) => add(mesh.cell_center(q) - xp, u[q] - u[p]),
            None => {
                for t in mesh.face_tris(cf.face) {
                    if let Some(ub) = boundary[t] {
                        add(mesh.tris()[t].center - xp, ub - u[p]);
                    }
                }
            }
        }
    }
    if count == 0 {
        return (Vec3::zeros(), true);
    }
    let tr = m.trace();
    let eig = m.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let deficient = count < 3 || lo <= 1e-12 * hi;
    if deficient {
        m += Matrix3::identity() * (TIKHONOV * tr);
    }
    (constrained_minimizer(&m, &b), deficient)
}

/// Constrained WLS gradients of all cells.
///
/// `boundary[t]` carries the Dirichlet value of boundary triangle `t` if it
/// belongs to 𝓑_D; such triangles join the stencil of their cell.
pub fn cell_gradient_wls(mesh: &PolyMesh, u: &[f64], boundary: &[Option<f64>]) -> CellGradients {
    let res: Vec<(Vec3, bool)> =
        (0..mesh.n_cells()).into_par_iter().map(|p| cell_gradient(mesh, u, boundary, p)).collect();
    let regularized = res.iter().enumerate().filter(|(_, r)| r.1).map(|(p, _)| p).collect();
    CellGradients { grads: res.into_iter().map(|r| r.0).collect(), regularized }
}

/// Face gradient `β` on every triangle: the inverse-distance blend of the
/// two adjacent cell gradients clipped to the unit ball, or the clipped
/// owner gradient on boundary triangles.
pub fn face_gradient_beta(mesh: &PolyMesh, grads: &[Vec3]) -> Vec<Vec3> {
    mesh.tris()
        .par_iter()
        .map(|t| {
            let face = mesh.face(t.face);
            let p = face.owner;
            match face.neighbor {
                Neighbor::Cell(q) => {
                    let wp = 1.0 / (t.center - mesh.cell_center(p)).norm();
                    let wq = 1.0 / (t.center - mesh.cell_center(q)).norm();
                    clip_unit((wp * grads[p] + wq * grads[q]) / (wp + wq))
                }
                Neighbor::Boundary(_) => clip_unit(grads[p]),
            }
        })
        .collect()
}

/// Inflow-based gradient `𝒟_p u`: inverse-distance average of `β` over the
/// inflow triangles of `p` (`μ_pf < 0`), counting boundary triangles only if
/// they carry Dirichlet data. Zero if there are none.
///
/// `mu[t]` is the flux of triangle `t` seen from the owner of its face.
pub fn inflow_gradient(mesh: &PolyMesh, beta: &[Vec3], mu: &[f64], boundary: &[Option<f64>], p: usize) -> Vec3 {
    let xp = mesh.cell_center(p);
    let mut num = Vec3::zeros();
    let mut den = 0.0;
    for cf in mesh.cell_faces(p) {
        for t in mesh.face_tris(cf.face) {
            let mu_p = cf.sign * mu[t];
            if mu_p >= 0.0 || (cf.other.is_none() && boundary[t].is_none()) {
                continue;
            }
            let w = 1.0 / (mesh.tris()[t].center - xp).norm();
            num += w * beta[t];
            den += w;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        Vec3::zeros()
    }
}

/// [`inflow_gradient`] for every cell.
pub fn inflow_gradients(mesh: &PolyMesh, beta: &[Vec3], mu: &[f64], boundary: &[Option<f64>]) -> Vec<Vec3> {
    (0..mesh.n_cells()).into_par_iter().map(|p| inflow_gradient(mesh, beta, mu, boundary, p)).collect()
}
