//! Polyhedral mesh model with precomputed finite-volume geometry.
//!
//! Faces are stored once, with a vertex loop oriented outward from the
//! owner cell. The neighbor cell sees the same triangles with negated
//! normals, so `n_qf = -n_pf` holds by construction.

mod generate;
pub mod geometry;
pub mod io;
pub mod locate;

use std::ops::Range;

use rayon::prelude::*;

pub use generate::{generate_box_hex_mesh, perturb_mesh, perturb_mesh_with, Aabb, Domain};
pub use geometry::{face_vector, tessellate_face, FaceTessellation, Triangle};
pub use locate::CellLocator;

use crate::{Error, Result, Vec3};

/// Relative tolerance of the closed-surface check `|sum n_pf| <= tol * sum |n_pf|`.
pub const WATERTIGHT_TOL: f64 = 1e-12;

/// What lies on the other side of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    /// Boundary face with a user tag (e.g. which wall of a box it belongs to).
    Boundary(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Vertex loop, oriented outward from `owner`.
    pub vertices: Vec<usize>,
    pub owner: usize,
    pub neighbor: Neighbor,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.neighbor, Neighbor::Boundary(_))
    }
}

/// One face as seen from a particular cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFace {
    pub face: usize,
    /// `+1` if the cell owns the face, `-1` otherwise.
    pub sign: f64,
    /// The cell across the face, `None` on the boundary.
    pub other: Option<usize>,
}

/// A triangle of the face tessellation, tied to its parent face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tri {
    pub face: usize,
    pub points: [Vec3; 3],
    pub center: Vec3,
    /// Area-scaled normal, outward from the owner of `face`.
    pub normal: Vec3,
}

impl Tri {
    pub fn area(&self) -> f64 {
        self.normal.norm()
    }
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    vertices: Vec<Vec3>,
    faces: Vec<Face>,
    cells: Vec<Vec<usize>>,
    tris: Vec<Tri>,
    face_tris: Vec<Range<usize>>,
    face_centers: Vec<Vec3>,
    face_vectors: Vec<Vec3>,
    cell_faces: Vec<Vec<CellFace>>,
    cell_centers: Vec<Vec3>,
    cell_volumes: Vec<f64>,
    cell_bbox_volumes: Vec<f64>,
    h: f64,
    scale: f64,
}

impl PolyMesh {
    /// Builds a mesh and all derived geometry.
    ///
    /// `cells[p]` lists the faces of cell `p`; it must agree with the
    /// owner/neighbor fields of the faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<Face>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let n_cells = cells.len();

        for (g, face) in faces.iter().enumerate() {
            if face.vertices.len() < 3 {
                return Err(Error::InvalidMesh(format!("face {g} has fewer than 3 vertices")));
            }
            if let Some(&v) = face.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("face {g} references vertex {v}")));
            }
            if face.owner >= n_cells {
                return Err(Error::InvalidMesh(format!("face {g} has owner {}", face.owner)));
            }
            if let Neighbor::Cell(q) = face.neighbor {
                if q >= n_cells || q == face.owner {
                    return Err(Error::InvalidMesh(format!("face {g} has neighbor {q}")));
                }
            }
            let r = face.vertices.len();
            for i in 0..r {
                if face.vertices[i] == face.vertices[(i + 1) % r] {
                    return Err(Error::InvalidMesh(format!("face {g} repeats a vertex")));
                }
            }
        }

        // Cross-check cell->face lists against owner/neighbor.
        let mut seen = vec![0u8; faces.len()];
        let mut cell_faces = Vec::with_capacity(n_cells);
        for (p, list) in cells.iter().enumerate() {
            if list.len() < 4 {
                return Err(Error::InvalidMesh(format!("cell {p} has {} faces", list.len())));
            }
            let mut cf = Vec::with_capacity(list.len());
            for &g in list {
                let face = faces.get(g).ok_or_else(|| Error::InvalidMesh(format!("cell {p} references face {g}")))?;
                let entry = if face.owner == p {
                    let other = match face.neighbor {
                        Neighbor::Cell(q) => Some(q),
                        Neighbor::Boundary(_) => None,
                    };
                    CellFace { face: g, sign: 1.0, other }
                } else if face.neighbor == Neighbor::Cell(p) {
                    CellFace { face: g, sign: -1.0, other: Some(face.owner) }
                } else {
                    return Err(Error::InvalidMesh(format!("cell {p} lists face {g} it does not bound")));
                };
                seen[g] += 1;
                cf.push(entry);
            }
            cell_faces.push(cf);
        }
        for (g, face) in faces.iter().enumerate() {
            let expected = if face.is_boundary() { 1 } else { 2 };
            if seen[g] != expected {
                return Err(Error::InvalidMesh(format!(
                    "face {g} is listed by {} cells, expected {expected}",
                    seen[g]
                )));
            }
        }

        let scale = {
            let mut bb = Aabb::empty();
            for v in &vertices {
                bb.include(v);
            }
            bb.diagonal().max(f64::MIN_POSITIVE)
        };

        let tess: Vec<(FaceTessellation, Vec3)> = faces
            .par_iter()
            .enumerate()
            .map(|(g, face)| {
                let pts: Vec<Vec3> = face.vertices.iter().map(|&v| vertices[v]).collect();
                let t = tessellate_face(&pts, scale).map_err(|e| match e {
                    Error::DegenerateFace { .. } => Error::DegenerateFace { face: g },
                    other => other,
                })?;
                Ok((t, face_vector(&pts)))
            })
            .collect::<Result<_>>()?;

        let mut tris = Vec::new();
        let mut face_tris = Vec::with_capacity(faces.len());
        let mut face_centers = Vec::with_capacity(faces.len());
        let mut face_vectors = Vec::with_capacity(faces.len());
        for (g, (t, n)) in tess.into_iter().enumerate() {
            let start = tris.len();
            tris.extend(t.triangles.iter().map(|tri| Tri {
                face: g,
                points: tri.points,
                center: tri.center,
                normal: tri.normal,
            }));
            face_tris.push(start..tris.len());
            face_centers.push(t.center);
            face_vectors.push(n);
        }

        let per_cell: Vec<(Vec3, f64, f64)> = (0..n_cells)
            .into_par_iter()
            .map(|p| {
                let cf = &cell_faces[p];
                let mut normal_sum = Vec3::zeros();
                let mut area = 0.0;
                let mut bb = Aabb::empty();
                let mut reference = Vec3::zeros();
                for f in cf {
                    for v in &faces[f.face].vertices {
                        bb.include(&vertices[*v]);
                    }
                    reference += face_centers[f.face];
                    for t in &tris[face_tris[f.face].clone()] {
                        normal_sum += f.sign * t.normal;
                        area += t.area();
                    }
                }
                reference /= cf.len() as f64;
                if normal_sum.norm() > WATERTIGHT_TOL * area {
                    return Err(Error::NotWatertight { cell: p, residual: normal_sum.norm(), area });
                }
                let tri_iter = cf.iter().flat_map(|f| {
                    tris[face_tris[f.face].clone()].iter().map(move |t| (t.points, t.center, f.sign * t.normal))
                });
                let (center, volume) = geometry::closed_surface_geometry(tri_iter, reference);
                if volume <= 0.0 || !volume.is_finite() {
                    return Err(Error::NonPositiveVolume { cell: p, volume });
                }
                Ok((center, volume, bb.volume()))
            })
            .collect::<Result<_>>()?;

        let cell_centers = per_cell.iter().map(|c| c.0).collect();
        let cell_volumes = per_cell.iter().map(|c| c.1).collect();
        let cell_bbox_volumes: Vec<f64> = per_cell.iter().map(|c| c.2).collect();
        let h = cell_bbox_volumes.iter().map(|v| v.cbrt()).sum::<f64>() / n_cells as f64;

        Ok(PolyMesh {
            vertices,
            faces,
            cells,
            tris,
            face_tris,
            face_centers,
            face_vectors,
            cell_faces,
            cell_centers,
            cell_volumes,
            cell_bbox_volumes,
            h,
            scale,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_tris(&self) -> usize {
        self.tris.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, g: usize) -> &Face {
        &self.faces[g]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn tris(&self) -> &[Tri] {
        &self.tris
    }

    /// Indices of the triangles tessellating face `g`.
    pub fn face_tris(&self, g: usize) -> Range<usize> {
        self.face_tris[g].clone()
    }

    pub fn face_center(&self, g: usize) -> Vec3 {
        self.face_centers[g]
    }

    /// Area vector `n_g` of face `g`, outward from its owner.
    pub fn face_vector(&self, g: usize) -> Vec3 {
        self.face_vectors[g]
    }

    pub fn cell_faces(&self, p: usize) -> &[CellFace] {
        &self.cell_faces[p]
    }

    pub fn cell_center(&self, p: usize) -> Vec3 {
        self.cell_centers[p]
    }

    pub fn cell_centers(&self) -> &[Vec3] {
        &self.cell_centers
    }

    pub fn cell_volume(&self, p: usize) -> f64 {
        self.cell_volumes[p]
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    /// Volume of the axis-aligned bounding box of the vertices of cell `p`.
    pub fn cell_bbox_volume(&self, p: usize) -> f64 {
        self.cell_bbox_volumes[p]
    }

    /// Characteristic length: mean cube root of the cell bounding-box volumes.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Diagonal of the bounding box of all vertices.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Face-neighbor cells of `p`.
    pub fn neighbors(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[p].iter().filter_map(|f| f.other)
    }

    pub fn is_boundary_cell(&self, p: usize) -> bool {
        self.cell_faces[p].iter().any(|f| f.other.is_none())
    }

    /// Distinct vertex indices of cell `p`, sorted.
    pub fn cell_vertices(&self, p: usize) -> Vec<usize> {
        let mut vs: Vec<usize> =
            self.cell_faces[p].iter().flat_map(|f| self.faces[f.face].vertices.iter().copied()).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Bounding box of the vertices of cell `p`.
    pub fn cell_bbox(&self, p: usize) -> Aabb {
        let mut bb = Aabb::empty();
        for f in &self.cell_faces[p] {
            for v in &self.faces[f.face].vertices {
                bb.include(&self.vertices[*v]);
            }
        }
        bb
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    /// Indices of boundary faces.
    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_boundary()).map(|(g, _)| g)
    }

    /// Boolean mask of vertices lying on boundary faces.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for face in self.faces.iter().filter(|f| f.is_boundary()) {
            for &v in &face.vertices {
                mask[v] = true;
            }
        }
        mask
    }

    /// Largest distance of a vertex of `p` from the plane through its face
    /// center with normal `n_g`, over all faces of `p`.
    pub fn max_face_nonplanarity(&self) -> f64 {
        (0..self.faces.len())
            .map(|g| {
                let n = self.face_vectors[g].normalize();
                let c = self.face_centers[g];
                self.faces[g].vertices.iter().map(|&v| (self.vertices[v] - c).dot(&n).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn into_parts(self) -> (Vec<Vec3>, Vec<Face>, Vec<Vec<usize>>) {
        (self.vertices, self.faces, self.cells)
    }
}
