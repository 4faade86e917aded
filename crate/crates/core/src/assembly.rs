//! Sparse system of one deferred-correction iteration.
//!
//! Row `p` discretizes `-eps * (II) + (I) = |Ω_p|`, where (II) is the
//! flux-balanced diffusion with skewness correction and (I) the upwind
//! advection along the frozen normal fluxes. Terms in the unknowns `u_p`,
//! `u_q` go to the matrix; everything built from the previous iterate
//! (gradients, inflow gradients, boundary data, source) goes to the rhs.
//!
//! Boundary triangles are split three ways: Dirichlet triangles (𝓑_D),
//! outflow triangles `μ >= 0` outside 𝓑_D, which keep the explicit normal
//! derivative, and inflow triangles `μ < 0` outside 𝓑_D, which contribute
//! nothing so that the Soner condition is not violated.

use std::path::Path;

use rayon::prelude::*;

use crate::gamma::DirichletData;
use crate::linsolve::CsrMatrix;
use crate::mesh::PolyMesh;
use crate::{Error, Result, Vec3, SIGMA};

/// Normal fluxes `μ` on every triangle, seen from the owner of its face.
/// The neighbor side sees `-μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub mu: Vec<f64>,
}

impl FluxField {
    pub fn zeros(n_tris: usize) -> Self {
        FluxField { mu: vec![0.0; n_tris] }
    }

    /// Flux of triangle `t` out of the cell whose face orientation is `sign`.
    pub fn side(&self, t: usize, sign: f64) -> f64 {
        sign * self.mu[t]
    }
}

/// `μ_t = β_t / |β_t|_σ · n_t` on every triangle.
pub fn compute_fluxes(mesh: &PolyMesh, beta: &[Vec3]) -> FluxField {
    let mu = mesh
        .tris()
        .par_iter()
        .zip(beta)
        .map(|(t, b)| b.dot(&t.normal) / (b.norm_squared() + SIGMA * SIGMA).sqrt())
        .collect();
    FluxField { mu }
}

/// Role of one triangle in the row of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriRole {
    /// Internal, `μ < 0` (ℱ⁻).
    Inflow,
    /// Internal, `μ >= 0` (ℱ⁺).
    Outflow,
    /// Boundary, `μ >= 0` (ℬ⁺).
    BoundaryOut { dirichlet: bool },
    /// Boundary, `μ < 0` (ℬ⁻).
    BoundaryIn { dirichlet: bool },
}

/// Per-cell partition of the surrounding triangles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellSplit {
    pub inflow: Vec<usize>,
    pub outflow: Vec<usize>,
    pub boundary_out: Vec<usize>,
    pub boundary_in: Vec<usize>,
    pub dirichlet: Vec<usize>,
}

fn role(mu_p: f64, internal: bool, dirichlet: bool) -> TriRole {
    match (internal, mu_p < 0.0) {
        (true, true) => TriRole::Inflow,
        (true, false) => TriRole::Outflow,
        (false, true) => TriRole::BoundaryIn { dirichlet },
        (false, false) => TriRole::BoundaryOut { dirichlet },
    }
}

/// Splits the triangles of every cell by flux sign and Dirichlet membership.
/// Zero flux counts as outflow.
pub fn split_sets(mesh: &PolyMesh, flux: &FluxField, boundary: &[Option<f64>]) -> Vec<CellSplit> {
    (0..mesh.n_cells())
        .map(|p| {
            let mut s = CellSplit::default();
            for cf in mesh.cell_faces(p) {
                for t in mesh.face_tris(cf.face) {
                    let d = boundary[t].is_some();
                    match role(flux.side(t, cf.sign), cf.other.is_some(), d) {
                        TriRole::Inflow => s.inflow.push(t),
                        TriRole::Outflow => s.outflow.push(t),
                        TriRole::BoundaryOut { .. } => s.boundary_out.push(t),
                        TriRole::BoundaryIn { .. } => s.boundary_in.push(t),
                    }
                    if d {
                        s.dirichlet.push(t);
                    }
                }
            }
            s
        })
        .collect()
}

/// Non-orthogonality data of one internal face, with `p` the owner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skew {
    /// `x_p' - x_p`, orthogonal to the face normal.
    pub d_pp: Vec3,
    /// `x_q' - x_q`, orthogonal to the face normal.
    pub d_qq: Vec3,
    /// `|x_q' - x_p'|`.
    pub dist: f64,
}

/// Projects `d` onto the plane orthogonal to the unit vector `n`.
fn tangential(d: Vec3, n: &Vec3) -> Vec3 {
    d - n.dot(&d) * n
}

/// Skewness points of internal face `g`.
pub fn skewness_points(mesh: &PolyMesh, g: usize) -> Result<Skew> {
    let face = mesh.face(g);
    let q = match face.neighbor {
        crate::mesh::Neighbor::Cell(q) => q,
        crate::mesh::Neighbor::Boundary(_) => {
            return Err(Error::InvalidArgument(format!("face {g} is a boundary face")));
        }
    };
    let p = face.owner;
    let n = mesh.face_vector(g);
    let area = n.norm();
    if area == 0.0 {
        return Err(Error::DegenerateFace { face: g });
    }
    let n = n / area;
    let xg = mesh.face_center(g);
    let (xp, xq) = (mesh.cell_center(p), mesh.cell_center(q));
    let d_pp = tangential(xg - xp, &n);
    let d_qq = tangential(xg - xq, &n);
    let dist = ((xq + d_qq) - (xp + d_pp)).norm();
    if dist < 1e-12 * mesh.h() {
        return Err(Error::CoincidentProjectedCenters { face: g });
    }
    Ok(Skew { d_pp, d_qq, dist })
}

/// Geometry reused by every assembly on one mesh.
#[derive(Debug, Clone)]
pub struct AssemblyGeometry {
    /// Indexed by face; `None` on boundary faces.
    skew: Vec<Option<Skew>>,
    /// Indexed by triangle; for boundary triangles `(d_pp', |d_p'b|)`.
    boundary: Vec<Option<(Vec3, f64)>>,
}

impl AssemblyGeometry {
    pub fn new(mesh: &PolyMesh) -> Result<Self> {
        let skew = (0..mesh.n_faces())
            .into_par_iter()
            .map(|g| if mesh.face(g).is_boundary() { Ok(None) } else { skewness_points(mesh, g).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        let mut boundary = vec![None; mesh.n_tris()];
        for g in mesh.boundary_faces() {
            let xp = mesh.cell_center(mesh.face(g).owner);
            for t in mesh.face_tris(g) {
                let tri = &mesh.tris()[t];
                let n = tri.normal / tri.area();
                let d = tri.center - xp;
                let dist = n.dot(&d).abs();
                if dist < 1e-12 * mesh.h() {
                    return Err(Error::CoincidentProjectedCenters { face: g });
                }
                boundary[t] = Some((tangential(d, &n), dist));
            }
        }
        Ok(AssemblyGeometry { skew, boundary })
    }

    pub fn skew(&self, g: usize) -> Option<&Skew> {
        self.skew[g].as_ref()
    }
}

/// Matrix and right-hand side of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    /// Writes the matrix in Matrix Market coordinate format.
    pub fn dump_matrix(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.matrix.to_coo_string()).map_err(|e| Error::io(path, e))
    }
}

/// Skewness vector of cell `p` on internal face `g`, whichever side it is.
fn skew_sides(s: &Skew, sign: f64) -> (Vec3, Vec3) {
    if sign > 0.0 {
        (s.d_pp, s.d_qq)
    } else {
        (s.d_qq, s.d_pp)
    }
}

/// Matrix of `-eps * (II) + (I)` with frozen fluxes. Rows of pinned cells
/// are identity rows.
pub fn assemble_matrix(
    mesh: &PolyMesh,
    geom: &AssemblyGeometry,
    dirichlet: &DirichletData,
    eps: f64,
    flux: &FluxField,
) -> Result<CsrMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("regularization parameter {eps} must be positive")));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|p| {
            if dirichlet.seeds.is_pinned(p) {
                return vec![(p, 1.0)];
            }
            let mut diag = 0.0;
            let mut row = Vec::with_capacity(8);
            for cf in mesh.cell_faces(p) {
                match cf.other {
                    Some(q) => {
                        let s = geom.skew[cf.face].as_ref().expect("internal face");
                        let c = eps * mesh.face_vector(cf.face).norm() / s.dist;
                        diag += c;
                        let mut off = -c;
                        for t in mesh.face_tris(cf.face) {
                            let mu = flux.side(t, cf.sign);
                            if mu < 0.0 {
                                diag -= mu;
                                off += mu;
                            }
                        }
                        row.push((q, off));
                    }
                    None => {
                        for t in mesh.face_tris(cf.face) {
                            if dirichlet.boundary[t].is_none() {
                                continue;
                            }
                            let (_, dist) = geom.boundary[t].expect("boundary triangle");
                            diag += eps * mesh.tris()[t].area() / dist;
                            let mu = flux.side(t, cf.sign);
                            if mu < 0.0 {
                                diag -= mu;
                            }
                        }
                    }
                }
            }
            row.push((p, diag));
            row
        })
        .collect();
    let matrix = CsrMatrix::from_rows(rows)?;
    check_sparsity(mesh, &matrix)?;
    Ok(matrix)
}

/// Right-hand side for the previous iterate's cell gradients `grads` and
/// inflow gradients `inflow`.
pub fn assemble_rhs(
    mesh: &PolyMesh,
    geom: &AssemblyGeometry,
    dirichlet: &DirichletData,
    eps: f64,
    flux: &FluxField,
    grads: &[Vec3],
    inflow: &[Vec3],
) -> Vec<f64> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|p| {
            if let Some(v) = dirichlet.seeds.value(p) {
                return v;
            }
            let xp = mesh.cell_center(p);
            let mut f = mesh.cell_volume(p);
            for cf in mesh.cell_faces(p) {
                match cf.other {
                    Some(q) => {
                        let s = geom.skew[cf.face].as_ref().expect("internal face");
                        let (d_pp, d_qq) = skew_sides(s, cf.sign);
                        let c = eps * mesh.face_vector(cf.face).norm() / s.dist;
                        f += c * (grads[q].dot(&d_qq) - grads[p].dot(&d_pp));
                        let xq = mesh.cell_center(q);
                        for t in mesh.face_tris(cf.face) {
                            let mu = flux.side(t, cf.sign);
                            let xf = mesh.tris()[t].center;
                            if mu < 0.0 {
                                f -= inflow[q].dot(&(xf - xq)) * mu;
                            } else {
                                f -= inflow[p].dot(&(xf - xp)) * mu;
                            }
                        }
                    }
                    None => {
                        for t in mesh.face_tris(cf.face) {
                            let tri = &mesh.tris()[t];
                            let mu = flux.side(t, cf.sign);
                            match dirichlet.boundary[t] {
                                Some(ub) => {
                                    let (d_pp, dist) = geom.boundary[t].expect("boundary triangle");
                                    f += eps * tri.area() / dist * (ub - grads[p].dot(&d_pp));
                                    if mu < 0.0 {
                                        f -= mu * ub;
                                    } else {
                                        f -= inflow[p].dot(&(tri.center - xp)) * mu;
                                    }
                                }
                                None => {
                                    if mu >= 0.0 {
                                        f += eps * grads[p].dot(&(cf.sign * tri.normal));
                                        f -= inflow[p].dot(&(tri.center - xp)) * mu;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            f
        })
        .collect()
}

/// Full system of one iteration.
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    mesh: &PolyMesh,
    geom: &AssemblyGeometry,
    dirichlet: &DirichletData,
    eps: f64,
    flux: &FluxField,
    grads: &[Vec3],
    inflow: &[Vec3],
) -> Result<SparseSystem> {
    let matrix = assemble_matrix(mesh, geom, dirichlet, eps, flux)?;
    let rhs = assemble_rhs(mesh, geom, dirichlet, eps, flux, grads, inflow);
    Ok(SparseSystem { matrix, rhs })
}

/// Fails unless every stored nonzero of row `p` sits on the diagonal or at a
/// face neighbor of `p`.
pub fn check_sparsity(mesh: &PolyMesh, matrix: &CsrMatrix) -> Result<()> {
    for p in 0..matrix.n() {
        let (cols, vals) = matrix.row(p);
        for (&c, &v) in cols.iter().zip(vals) {
            if c != p && v != 0.0 && !mesh.neighbors(p).any(|q| q == c) {
                return Err(Error::SparsityViolation { row: p, col: c });
            }
        }
    }
    Ok(())
}
