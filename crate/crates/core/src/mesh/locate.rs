//! Uniform-bin spatial index over cell bounding boxes.

use super::{Aabb, PolyMesh};
use crate::Vec3;

/// Buckets cells by the bins their bounding boxes overlap.
#[derive(Debug, Clone)]
pub struct CellLocator {
    bounds: Aabb,
    dims: [usize; 3],
    bin_size: Vec3,
    bins: Vec<Vec<u32>>,
}

impl CellLocator {
    /// Builds an index with roughly `cells_per_bin` cells per bin.
    pub fn new(mesh: &PolyMesh, cells_per_bin: usize) -> Self {
        let mut bounds = Aabb::empty();
        for v in mesh.vertices() {
            bounds.include(v);
        }
        let ext = bounds.extent();
        let n = mesh.n_cells().max(1) as f64 / cells_per_bin.max(1) as f64;
        let vol = ext.x.max(1e-300) * ext.y.max(1e-300) * ext.z.max(1e-300);
        let side = (vol / n).cbrt();
        let dims = [0, 1, 2].map(|i| ((ext[i] / side).ceil() as usize).clamp(1, 512));
        let bin_size = Vec3::from_fn(|i, _| (ext[i] / dims[i] as f64).max(1e-300));
        let mut loc = CellLocator { bounds, dims, bin_size, bins: vec![Vec::new(); dims[0] * dims[1] * dims[2]] };
        for p in 0..mesh.n_cells() {
            let bb = mesh.cell_bbox(p);
            let (lo, hi) = (loc.bin_of(&bb.min), loc.bin_of(&bb.max));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let b = loc.flat([i, j, k]);
                        loc.bins[b].push(p as u32);
                    }
                }
            }
        }
        loc
    }

    fn bin_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|i| {
            let t = ((p[i] - self.bounds.min[i]) / self.bin_size[i]).floor();
            (t.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn flat(&self, b: [usize; 3]) -> usize {
        b[0] + self.dims[0] * (b[1] + self.dims[1] * b[2])
    }

    /// Cells whose bounding boxes may overlap `region`, sorted and unique.
    pub fn candidates(&self, region: &Aabb) -> Vec<usize> {
        let clipped = region.intersection(&self.bounds);
        if (0..3).any(|i| clipped.min[i] > clipped.max[i]) {
            return Vec::new();
        }
        let (lo, hi) = (self.bin_of(&clipped.min), self.bin_of(&clipped.max));
        let mut out = Vec::new();
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    out.extend(self.bins[self.flat([i, j, k])].iter().map(|&c| c as usize));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// A cell containing `x`, if any. Ties on shared faces go to the lowest index.
    pub fn locate(&self, mesh: &PolyMesh, x: &Vec3) -> Option<usize> {
        let tol = 1e-10 * mesh.scale();
        let region = Aabb::new(x - Vec3::repeat(tol), x + Vec3::repeat(tol));
        self.candidates(&region).into_iter().find(|&p| cell_contains(mesh, p, x, 1e-10))
    }
}

/// Point-in-cell test via the tetrahedra spanned by the cell center and each
/// triangle of the face tessellation. `tol` is relative barycentric slack.
pub fn cell_contains(mesh: &PolyMesh, p: usize, x: &Vec3, tol: f64) -> bool {
    let c = mesh.cell_center(p);
    mesh.cell_faces(p).iter().any(|cf| {
        mesh.face_tris(cf.face).any(|t| {
            let pts = mesh.tris()[t].points;
            point_in_tet(x, &c, &pts[0], &pts[1], &pts[2], tol)
        })
    })
}

fn point_in_tet(x: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3, tol: f64) -> bool {
    let m = nalgebra::Matrix3::from_columns(&[b - a, c - a, d - a]);
    let Some(inv) = m.try_inverse() else { return false };
    let l = inv * (x - a);
    let l0 = 1.0 - l.x - l.y - l.z;
    l.iter().all(|&v| v >= -tol) && l0 >= -tol
}
