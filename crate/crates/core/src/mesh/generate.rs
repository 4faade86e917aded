//! Structured hex mesh generators on boxes and box-minus-box domains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Face, Neighbor, PolyMesh};
use crate::{Error, Result, Vec3};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn cube(lo: f64, hi: f64) -> Self {
        Aabb { min: Vec3::repeat(lo), max: Vec3::repeat(hi) }
    }

    pub fn empty() -> Self {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn include(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    /// Strictly inside, at least `margin` away from every wall.
    pub fn contains_strictly(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|i| p[i] > self.min[i] + margin && p[i] < self.max[i] - margin)
    }

    pub fn intersection(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.sup(&other.min), max: self.max.inf(&other.max) }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] >= self.max[i])
    }

    /// Euclidean distance from `p` to the closed box (zero inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = Vec3::from_fn(|i, _| (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0));
        d.norm()
    }

    /// Distance from an inside point to the nearest wall.
    pub fn distance_to_walls_inside(&self, p: &Vec3) -> f64 {
        (0..3).map(|i| (p[i] - self.min[i]).min(self.max[i] - p[i])).fold(f64::INFINITY, f64::min).max(0.0)
    }

    /// Whether segment `a -> b` passes through the open interior of the box.
    pub fn segment_hits_interior(&self, a: &Vec3, b: &Vec3, tol: f64) -> bool {
        // Slab clipping against the box shrunk by `tol`.
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        let d = b - a;
        for i in 0..3 {
            let lo = self.min[i] + tol;
            let hi = self.max[i] - tol;
            if lo >= hi {
                return false;
            }
            if d[i].abs() < 1e-300 {
                if a[i] <= lo || a[i] >= hi {
                    return false;
                }
            } else {
                let mut ta = (lo - a[i]) / d[i];
                let mut tb = (hi - a[i]) / d[i];
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 >= t1 {
                    return false;
                }
            }
        }
        t0 < t1
    }
}

/// Analytic description of a meshed domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box(Aabb),
    /// `outer` with the open box `cut` removed.
    BoxMinusBox {
        outer: Aabb,
        cut: Aabb,
    },
}

impl Domain {
    pub fn outer(&self) -> Aabb {
        match *self {
            Domain::Box(bounds) => bounds,
            Domain::BoxMinusBox { outer, .. } => outer,
        }
    }

    /// The removed box clipped to the outer box, if any.
    pub fn cut(&self) -> Option<Aabb> {
        match *self {
            Domain::Box(_) => None,
            Domain::BoxMinusBox { outer, cut } => Some(cut.intersection(&outer)),
        }
    }

    /// The removed box, pushed past every outer wall it reaches so that no
    /// zero-thickness sliver of the outer boundary survives over the cut.
    pub fn cut_solid(&self) -> Option<Aabb> {
        let outer = self.outer();
        let mut c = self.cut().filter(|c| !c.is_empty())?;
        let tol = 1e-12 * outer.diagonal();
        for i in 0..3 {
            let ext = outer.extent()[i];
            if c.min[i] <= outer.min[i] + tol {
                c.min[i] = outer.min[i] - ext;
            }
            if c.max[i] >= outer.max[i] - tol {
                c.max[i] = outer.max[i] + ext;
            }
        }
        Some(c)
    }

    pub fn is_convex(&self) -> bool {
        self.cut().is_none_or(|c| c.is_empty())
    }

    pub fn volume(&self) -> f64 {
        let outer = self.outer().volume();
        match self.cut() {
            Some(c) if !c.is_empty() => outer - c.volume(),
            _ => outer,
        }
    }

    /// Membership in the closed domain.
    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        if !self.outer().contains(p, tol) {
            return false;
        }
        match self.cut_solid() {
            Some(c) => !c.contains_strictly(p, tol),
            None => true,
        }
    }

    /// Whether the straight segment stays inside the closed domain.
    pub fn segment_inside(&self, a: &Vec3, b: &Vec3, tol: f64) -> bool {
        if !self.contains(a, tol) || !self.contains(b, tol) {
            return false;
        }
        match self.cut_solid() {
            Some(c) => !c.segment_hits_interior(a, b, tol),
            None => true,
        }
    }

    /// Distance from a point of the domain to its boundary.
    pub fn distance_to_boundary(&self, p: &Vec3) -> f64 {
        let d = self.outer().distance_to_walls_inside(p);
        match self.cut_solid() {
            Some(c) => d.min(c.distance(p)),
            None => d,
        }
    }

    /// Whether `p` lies on the boundary of the domain within `tol`.
    pub fn on_boundary(&self, p: &Vec3, tol: f64) -> bool {
        self.contains(p, tol) && self.distance_to_boundary(p) <= tol
    }
}

/// Generates a hex mesh with `divisions` cells along x, y and z of the outer
/// box. For a box-minus-box domain the cut must lie on grid planes; cells
/// inside it are dropped and the exposed faces become boundary faces.
///
/// Boundary tags: `0..6` for the outer walls `-x,+x,-y,+y,-z,+z`, `6..12`
/// for the walls of the cut in the same order (named by their outward normal
/// as seen from the domain, i.e. `-x` faces of the cut region have tag 7).
pub fn generate_box_hex_mesh(domain: &Domain, divisions: [usize; 3]) -> Result<PolyMesh> {
    if divisions.contains(&0) {
        return Err(Error::InvalidArgument(format!("divisions {divisions:?} must be positive")));
    }
    let outer = domain.outer();
    if outer.is_empty() {
        return Err(Error::InvalidArgument("empty outer box".into()));
    }
    let [nx, ny, nz] = divisions;
    let spacing = Vec3::new(outer.extent().x / nx as f64, outer.extent().y / ny as f64, outer.extent().z / nz as f64);

    // Cut region in grid index space, half-open [lo, hi).
    let cut_idx = match domain.cut() {
        Some(c) if !c.is_empty() => {
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for i in 0..3 {
                let a = (c.min[i] - outer.min[i]) / spacing[i];
                let b = (c.max[i] - outer.min[i]) / spacing[i];
                let (ra, rb) = (a.round(), b.round());
                if (a - ra).abs() > 1e-9 || (b - rb).abs() > 1e-9 {
                    return Err(Error::CutNotAligned(format!(
                        "axis {i}: cut [{}, {}] vs spacing {}",
                        c.min[i], c.max[i], spacing[i]
                    )));
                }
                lo[i] = ra as usize;
                hi[i] = rb as usize;
            }
            Some((lo, hi))
        }
        _ => None,
    };
    let removed = |i: usize, j: usize, k: usize| -> bool {
        cut_idx.is_some_and(|(lo, hi)| i >= lo[0] && i < hi[0] && j >= lo[1] && j < hi[1] && k >= lo[2] && k < hi[2])
    };

    // Cell numbering over kept cells, x fastest.
    let mut cell_id = vec![usize::MAX; nx * ny * nz];
    let lin = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut n_cells = 0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !removed(i, j, k) {
                    cell_id[lin(i, j, k)] = n_cells;
                    n_cells += 1;
                }
            }
        }
    }
    if n_cells == 0 {
        return Err(Error::InvalidArgument("cut removes every cell".into()));
    }

    // Vertex numbering over lattice points used by kept cells.
    let vlin = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut vert_id = vec![usize::MAX; (nx + 1) * (ny + 1) * (nz + 1)];
    let mut vertices = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let used = (k.saturating_sub(1)..(k + 1).min(nz)).any(|kk| {
                    (j.saturating_sub(1)..(j + 1).min(ny))
                        .any(|jj| (i.saturating_sub(1)..(i + 1).min(nx)).any(|ii| !removed(ii, jj, kk)))
                });
                if used {
                    vert_id[vlin(i, j, k)] = vertices.len();
                    let x = |n: usize, d: usize, axis: usize| {
                        if n == d {
                            outer.max[axis]
                        } else {
                            outer.min[axis] + n as f64 * spacing[axis]
                        }
                    };
                    vertices.push(Vec3::new(x(i, nx, 0), x(j, ny, 1), x(k, nz, 2)));
                }
            }
        }
    }

    // Outward quad loops of the six faces of cell (i,j,k), in the order
    // -x,+x,-y,+y,-z,+z.
    let quad = |i: usize, j: usize, k: usize, side: usize| -> [usize; 4] {
        let v = |a: usize, b: usize, c: usize| vert_id[vlin(i + a, j + b, k + c)];
        match side {
            0 => [v(0, 0, 0), v(0, 0, 1), v(0, 1, 1), v(0, 1, 0)],
            1 => [v(1, 0, 0), v(1, 1, 0), v(1, 1, 1), v(1, 0, 1)],
            2 => [v(0, 0, 0), v(1, 0, 0), v(1, 0, 1), v(0, 0, 1)],
            3 => [v(0, 1, 0), v(0, 1, 1), v(1, 1, 1), v(1, 1, 0)],
            4 => [v(0, 0, 0), v(0, 1, 0), v(1, 1, 0), v(1, 0, 0)],
            _ => [v(0, 0, 1), v(1, 0, 1), v(1, 1, 1), v(0, 1, 1)],
        }
    };

    let mut faces = Vec::new();
    let mut cells: Vec<Vec<usize>> = vec![Vec::with_capacity(6); n_cells];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = cell_id[lin(i, j, k)];
                if p == usize::MAX {
                    continue;
                }
                for side in 0..6 {
                    let axis = side / 2;
                    let plus = side % 2 == 1;
                    let idx = [i, j, k];
                    let dims = [nx, ny, nz];
                    let at_wall = if plus { idx[axis] + 1 == dims[axis] } else { idx[axis] == 0 };
                    let neighbor = if at_wall {
                        Some(Neighbor::Boundary(side as u32))
                    } else {
                        let mut n = idx;
                        if plus {
                            n[axis] += 1
                        } else {
                            n[axis] -= 1
                        }
                        let q = cell_id[lin(n[0], n[1], n[2])];
                        if q == usize::MAX {
                            Some(Neighbor::Boundary(6 + side as u32))
                        } else if plus {
                            Some(Neighbor::Cell(q))
                        } else {
                            // Created by the lower neighbor.
                            None
                        }
                    };
                    if let Some(neighbor) = neighbor {
                        let g = faces.len();
                        faces.push(Face { vertices: quad(i, j, k, side).to_vec(), owner: p, neighbor });
                        cells[p].push(g);
                        if let Neighbor::Cell(q) = neighbor {
                            cells[q].push(g);
                        }
                    }
                }
            }
        }
    }
    for list in &mut cells {
        list.sort_unstable();
    }
    PolyMesh::new(vertices, faces, cells)
}

/// Randomly displaces interior vertices by up to `amplitude` times the
/// shortest incident edge, keeping boundary vertices fixed.
pub fn perturb_mesh(mesh: &PolyMesh, amplitude: f64, seed: u64) -> Result<PolyMesh> {
    perturb_mesh_with(mesh, amplitude, seed, |_, _| false)
}

/// Like [`perturb_mesh`], additionally freezing every vertex for which
/// `frozen(index, position)` returns true.
pub fn perturb_mesh_with<F>(mesh: &PolyMesh, amplitude: f64, seed: u64, frozen: F) -> Result<PolyMesh>
where
    F: Fn(usize, &Vec3) -> bool,
{
    if !(0.0..=0.3).contains(&amplitude) {
        return Err(Error::InvalidArgument(format!("perturbation amplitude {amplitude} not in [0, 0.3]")));
    }
    let boundary = mesh.boundary_vertex_mask();
    let verts = mesh.vertices();
    let mut min_edge = vec![f64::INFINITY; verts.len()];
    for face in mesh.faces() {
        let r = face.vertices.len();
        for i in 0..r {
            let (a, b) = (face.vertices[i], face.vertices[(i + 1) % r]);
            let len = (verts[a] - verts[b]).norm();
            min_edge[a] = min_edge[a].min(len);
            min_edge[b] = min_edge[b].min(len);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moved = verts.to_vec();
    for (v, x) in moved.iter_mut().enumerate() {
        // Draw for every vertex so the stream does not depend on the mask.
        let dir = loop {
            let d = Vec3::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            let n = d.norm();
            if n > 1e-3 && n <= 1.0 {
                break d / n;
            }
        };
        let radius: f64 = rng.random_range(0.0..=1.0);
        if amplitude == 0.0 || boundary[v] || frozen(v, x) {
            continue;
        }
        *x += dir * (radius * amplitude * min_edge[v]);
    }
    let (_, faces, cells) = mesh.clone().into_parts();
    PolyMesh::new(moved, faces, cells)
}
