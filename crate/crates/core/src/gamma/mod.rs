//! Source sets Γ, cell classification, seeded Dirichlet data, and distance
//! oracles.

pub mod geodesic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{Aabb, CellLocator, Domain, PolyMesh};
use crate::{Error, Result, Vec3};

pub use geodesic::{GeodesicOracle, OracleMode};

/// Coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    /// The two remaining axes in increasing order.
    pub fn others(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }
}

/// Axis-aligned rectangle in the plane `x[axis] = offset`. `lo`/`hi` bound the
/// two remaining coordinates, taken in increasing axis order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePatch {
    pub axis: Axis,
    pub offset: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareSpec {
    pub center: [f64; 3],
    pub side: f64,
    pub normal: [f64; 3],
}

/// Declarative description of Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSpec {
    Sphere { center: [f64; 3], radius: f64 },
    PlanePatch(PlanePatch),
    PatchUnion { patches: Vec<PlanePatch> },
    Circle { center: [f64; 3], radius: f64, normal: [f64; 3] },
    Disk { center: [f64; 3], radius: f64, normal: [f64; 3] },
    Square(SquareSpec),
    SquarePair { squares: [SquareSpec; 2] },
    WholeBoundary,
}

/// Where Γ sits relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Γ ⊆ ∂Ω; cells touching it form ℐ¹.
    Boundary,
    /// Γ strictly inside Ω; cells touching it form ℐ².
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    center: Vec3,
    e1: Vec3,
    e2: Vec3,
    n: Vec3,
}

impl Frame {
    fn new(center: Vec3, normal: Vec3) -> Result<Self> {
        let nn = normal.norm();
        if !(nn > 0.0) || !nn.is_finite() {
            return Err(Error::InvalidArgument("Γ normal must be nonzero".into()));
        }
        let n = normal / nn;
        let i = (0..3).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap_or(2);
        let (e1, e2) = if (n[i].abs() - 1.0).abs() < 1e-14 {
            // axis-aligned plane: use the coordinate axes, keeping order
            let [a, b] = [0, 1, 2].into_iter().filter(|&k| k != i).collect::<Vec<_>>()[..] else { unreachable!() };
            (Vec3::ith(a, 1.0), Vec3::ith(b, 1.0))
        } else {
            let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let e1 = n.cross(&helper).normalize();
            (e1, n.cross(&e1))
        };
        Ok(Frame { center, e1, e2, n })
    }

    fn local(&self, x: &Vec3) -> (f64, f64, f64) {
        let d = x - self.center;
        (d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.n))
    }

    fn point(&self, a: f64, b: f64) -> Vec3 {
        self.center + a * self.e1 + b * self.e2
    }

    fn in_plane_extent(&self, h1: f64, h2: f64) -> Vec3 {
        Vec3::from_fn(|i, _| self.e1[i].abs() * h1 + self.e2[i].abs() * h2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Circle { frame: Frame, radius: f64 },
    Disk { frame: Frame, radius: f64 },
    Rect { frame: Frame, half: [f64; 2] },
}

impl Shape {
    fn closest_point(&self, x: &Vec3) -> Vec3 {
        match *self {
            Shape::Sphere { center, radius } => {
                let d = x - center;
                let n = d.norm();
                let dir = if n > 0.0 { d / n } else { Vec3::x() };
                center + radius * dir
            }
            Shape::Circle { frame, radius } | Shape::Disk { frame, radius } => {
                let (a, b, _) = frame.local(x);
                let rho = a.hypot(b);
                if matches!(self, Shape::Disk { .. }) && rho <= radius {
                    return frame.point(a, b);
                }
                let (ca, cb) = if rho > 0.0 { (a / rho, b / rho) } else { (1.0, 0.0) };
                frame.point(radius * ca, radius * cb)
            }
            Shape::Rect { frame, half } => {
                let (a, b, _) = frame.local(x);
                frame.point(a.clamp(-half[0], half[0]), b.clamp(-half[1], half[1]))
            }
        }
    }

    fn distance(&self, x: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => ((x - center).norm() - radius).abs(),
            Shape::Circle { frame, radius } => {
                let (a, b, c) = frame.local(x);
                (a.hypot(b) - radius).hypot(c)
            }
            Shape::Disk { frame, radius } => {
                let (a, b, c) = frame.local(x);
                (a.hypot(b) - radius).max(0.0).hypot(c)
            }
            Shape::Rect { frame, half } => {
                let (a, b, c) = frame.local(x);
                let da = (a.abs() - half[0]).max(0.0);
                let db = (b.abs() - half[1]).max(0.0);
                (da * da + db * db + c * c).sqrt()
            }
        }
    }

    fn aabb(&self) -> Aabb {
        let (c, e) = match *self {
            Shape::Sphere { center, radius } => (center, Vec3::repeat(radius)),
            Shape::Circle { frame, radius } | Shape::Disk { frame, radius } => {
                (frame.center, Vec3::from_fn(|i, _| radius * (1.0 - frame.n[i] * frame.n[i]).max(0.0).sqrt()))
            }
            Shape::Rect { frame, half } => (frame.center, frame.in_plane_extent(half[0], half[1])),
        };
        Aabb::new(c - e, c + e)
    }

    /// Points on the shape used to decide its placement.
    fn samples(&self) -> Vec<Vec3> {
        const K: usize = 24;
        let mut out = Vec::new();
        match *self {
            Shape::Sphere { center, radius } => {
                // Fibonacci sphere plus the six poles
                let n = 4 * K * K;
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                for i in 0..n {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    out.push(center + radius * Vec3::new(r * t.cos(), r * t.sin(), z));
                }
                for i in 0..3 {
                    out.push(center + radius * Vec3::ith(i, 1.0));
                    out.push(center - radius * Vec3::ith(i, 1.0));
                }
            }
            Shape::Circle { frame, radius } | Shape::Disk { frame, radius } => {
                let disk = matches!(self, Shape::Disk { .. });
                let rings = if disk { K } else { 1 };
                if disk {
                    out.push(frame.center);
                }
                for r in 1..=rings {
                    let rr = radius * r as f64 / rings as f64;
                    for j in 0..4 * K {
                        let t = std::f64::consts::TAU * j as f64 / (4 * K) as f64;
                        out.push(frame.point(rr * t.cos(), rr * t.sin()));
                    }
                }
            }
            Shape::Rect { frame, half } => {
                for i in 0..=K {
                    for j in 0..=K {
                        let a = -half[0] + 2.0 * half[0] * i as f64 / K as f64;
                        let b = -half[1] + 2.0 * half[1] * j as f64 / K as f64;
                        out.push(frame.point(a, b));
                    }
                }
            }
        }
        out
    }
}

fn patch_shape(p: &PlanePatch) -> Result<Shape> {
    let [a, b] = p.axis.others();
    if !(p.hi[0] > p.lo[0] && p.hi[1] > p.lo[1]) {
        return Err(Error::InvalidArgument(format!("empty plane patch {p:?}")));
    }
    let mut center = Vec3::zeros();
    center[p.axis.index()] = p.offset;
    center[a] = 0.5 * (p.lo[0] + p.hi[0]);
    center[b] = 0.5 * (p.lo[1] + p.hi[1]);
    let frame = Frame { center, e1: Vec3::ith(a, 1.0), e2: Vec3::ith(b, 1.0), n: Vec3::ith(p.axis.index(), 1.0) };
    Ok(Shape::Rect { frame, half: [0.5 * (p.hi[0] - p.lo[0]), 0.5 * (p.hi[1] - p.lo[1])] })
}

fn square_shape(s: &SquareSpec) -> Result<Shape> {
    if !(s.side > 0.0) {
        return Err(Error::InvalidArgument(format!("square side {} must be positive", s.side)));
    }
    let frame = Frame::new(Vec3::from(s.center), Vec3::from(s.normal))?;
    Ok(Shape::Rect { frame, half: [0.5 * s.side; 2] })
}

fn positive(r: f64, what: &str) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} radius {r} must be positive")))
    }
}

/// Γ bound to a domain, with its placement validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    spec: GammaSpec,
    domain: Domain,
    shapes: Vec<Shape>,
    placement: Placement,
}

impl Gamma {
    pub fn new(spec: GammaSpec, domain: Domain) -> Result<Self> {
        let shapes = match &spec {
            GammaSpec::Sphere { center, radius } => {
                positive(*radius, "sphere")?;
                vec![Shape::Sphere { center: Vec3::from(*center), radius: *radius }]
            }
            GammaSpec::PlanePatch(p) => vec![patch_shape(p)?],
            GammaSpec::PatchUnion { patches } => {
                if patches.is_empty() {
                    return Err(Error::InvalidArgument("empty patch union".into()));
                }
                patches.iter().map(patch_shape).collect::<Result<_>>()?
            }
            GammaSpec::Circle { center, radius, normal } => {
                positive(*radius, "circle")?;
                vec![Shape::Circle { frame: Frame::new(Vec3::from(*center), Vec3::from(*normal))?, radius: *radius }]
            }
            GammaSpec::Disk { center, radius, normal } => {
                positive(*radius, "disk")?;
                vec![Shape::Disk { frame: Frame::new(Vec3::from(*center), Vec3::from(*normal))?, radius: *radius }]
            }
            GammaSpec::Square(s) => vec![square_shape(s)?],
            GammaSpec::SquarePair { squares } => squares.iter().map(square_shape).collect::<Result<_>>()?,
            GammaSpec::WholeBoundary => Vec::new(),
        };
        let placement = if shapes.is_empty() { Placement::Boundary } else { placement_of(&shapes, &domain)? };
        Ok(Gamma { spec, domain, shapes, placement })
    }

    pub fn spec(&self) -> &GammaSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    /// Euclidean distance from `x` to Γ.
    pub fn distance(&self, x: &Vec3) -> f64 {
        if self.shapes.is_empty() {
            return self.domain.distance_to_boundary(x);
        }
        self.shapes.iter().map(|s| s.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// A nearest point of Γ to `x`.
    pub fn closest_point(&self, x: &Vec3) -> Vec3 {
        if self.shapes.is_empty() {
            return closest_boundary_point(&self.domain, x);
        }
        let mut best = (f64::INFINITY, *x);
        for s in &self.shapes {
            let c = s.closest_point(x);
            let d = (c - x).norm();
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }

    /// Bounding box of Γ.
    pub fn aabb(&self) -> Aabb {
        if self.shapes.is_empty() {
            return self.domain.outer();
        }
        let mut bb = Aabb::empty();
        for s in &self.shapes {
            let b = s.aabb();
            bb.include(&b.min);
            bb.include(&b.max);
        }
        bb
    }
}

fn closest_boundary_point(domain: &Domain, x: &Vec3) -> Vec3 {
    let outer = domain.outer();
    let mut best_d = f64::INFINITY;
    let mut best = *x;
    for i in 0..3 {
        for (wall, d) in [(outer.min[i], x[i] - outer.min[i]), (outer.max[i], outer.max[i] - x[i])] {
            let d = d.abs();
            if d < best_d {
                best_d = d;
                best = *x;
                best[i] = wall;
            }
        }
    }
    if let Some(c) = domain.cut_solid() {
        let p = Vec3::from_fn(|i, _| x[i].clamp(c.min[i], c.max[i]));
        if (p - x).norm() < best_d {
            best = p;
        }
    }
    best
}

fn placement_of(shapes: &[Shape], domain: &Domain) -> Result<Placement> {
    let tol = 1e-9 * domain.outer().diagonal();
    let samples: Vec<Vec3> = shapes.iter().flat_map(Shape::samples).collect();
    if samples.iter().any(|p| !domain.contains(p, tol)) {
        return Err(Error::GammaOutsideDomain(format!("Γ leaves the domain {domain:?}")));
    }
    if samples.iter().all(|p| domain.on_boundary(p, tol)) {
        return Ok(Placement::Boundary);
    }
    let mut bb = Aabb::empty();
    for s in shapes {
        let b = s.aabb();
        bb.include(&b.min);
        bb.include(&b.max);
    }
    let inside_outer = domain.outer().contains_strictly(&bb.min, tol) && domain.outer().contains_strictly(&bb.max, tol);
    let clear_of_cut = match domain.cut().filter(|c| !c.is_empty()) {
        None => true,
        Some(c) => {
            let grown = Aabb::new(c.min - Vec3::repeat(tol), c.max + Vec3::repeat(tol));
            grown.intersection(&bb).is_empty()
        }
    };
    if inside_outer && clear_of_cut {
        Ok(Placement::Interior)
    } else {
        Err(Error::MixedGamma)
    }
}

/// Whether the closed tetrahedron meets the zero set of the 1-Lipschitz
/// function `f`, decided by recursive subdivision with a ball exclusion test.
/// At the depth limit the answer is `true` unless excluded, so the test never
/// misses an intersection.
fn tet_touches<F: Fn(&Vec3) -> f64>(f: &F, t: [Vec3; 4], tol: f64, depth: u32) -> bool {
    let c = (t[0] + t[1] + t[2] + t[3]) / 4.0;
    let r = t.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
    if f(&c) > r + tol {
        return false;
    }
    if t.iter().any(|v| f(v) <= tol) {
        return true;
    }
    if depth == 0 {
        return true;
    }
    let m = |a: usize, b: usize| 0.5 * (t[a] + t[b]);
    let (m01, m02, m03, m12, m13, m23) = (m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3));
    let children = [
        [t[0], m01, m02, m03],
        [m01, t[1], m12, m13],
        [m02, m12, t[2], m23],
        [m03, m13, m23, t[3]],
        [m01, m02, m03, m13],
        [m01, m02, m12, m13],
        [m02, m03, m13, m23],
        [m02, m12, m13, m23],
    ];
    children.into_iter().any(|ch| tet_touches(f, ch, tol, depth - 1))
}

const SUBDIVISION_DEPTH: u32 = 4;

/// Whether the closure of cell `p` meets Γ.
pub fn cell_touches(mesh: &PolyMesh, gamma: &Gamma, p: usize) -> bool {
    let tol = 1e-9 * mesh.h();
    let f = |x: &Vec3| gamma.distance(x);
    let c = mesh.cell_center(p);
    let verts = mesh.cell_vertices(p);
    let r = verts.iter().map(|&v| (mesh.vertices()[v] - c).norm()).fold(0.0, f64::max);
    if f(&c) > r + tol {
        return false;
    }
    if verts.iter().any(|&v| f(&mesh.vertices()[v]) <= tol) {
        return true;
    }
    mesh.cell_faces(p).iter().any(|cf| {
        mesh.face_tris(cf.face).any(|t| {
            let [a, b, d] = mesh.tris()[t].points;
            tet_touches(&f, [c, a, b, d], tol, SUBDIVISION_DEPTH)
        })
    })
}

/// Returns `(ℐ¹, ℐ²)`: cells whose closure meets Γ, split by placement.
pub fn classify_cells(mesh: &PolyMesh, gamma: &Gamma) -> Result<(Vec<usize>, Vec<usize>)> {
    let locator = CellLocator::new(mesh, 8);
    classify_with(mesh, gamma, &locator)
}

fn classify_with(mesh: &PolyMesh, gamma: &Gamma, locator: &CellLocator) -> Result<(Vec<usize>, Vec<usize>)> {
    let bb = gamma.aabb();
    let pad = Vec3::repeat(1e-9 * mesh.h());
    let candidates = locator.candidates(&Aabb::new(bb.min - pad, bb.max + pad));
    let touching: Vec<usize> = candidates.into_par_iter().filter(|&p| cell_touches(mesh, gamma, p)).collect();
    if touching.is_empty() {
        return Err(Error::GammaOutsideDomain("no cell touches Γ".into()));
    }
    Ok(match gamma.placement() {
        Placement::Boundary => (touching, Vec::new()),
        Placement::Interior => (Vec::new(), touching),
    })
}

/// `K` plus all face neighbors of its members, sorted.
pub fn dilate(mesh: &PolyMesh, k: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; mesh.n_cells()];
    for &p in k {
        mark[p] = true;
        for q in mesh.neighbors(p) {
            mark[q] = true;
        }
    }
    (0..mesh.n_cells()).filter(|&p| mark[p]).collect()
}

/// Which index set produced a seed entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedOrigin {
    pub set: Placement,
    /// 0 for cells touching Γ, otherwise the dilation ring.
    pub ring: u8,
}

/// Cells of Γ⁰ with their pinned exact distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    values: Vec<Option<f64>>,
    origins: Vec<Option<SeedOrigin>>,
    cells: Vec<usize>,
}

impl SeedSet {
    pub fn from_values(n_cells: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut values = vec![None; n_cells];
        let mut origins = vec![None; n_cells];
        for (p, v) in entries {
            values[p] = Some(v);
            origins[p] = Some(SeedOrigin { set: Placement::Interior, ring: 0 });
        }
        let cells = (0..n_cells).filter(|&p| values[p].is_some()).collect();
        SeedSet { values, origins, cells }
    }

    pub fn is_pinned(&self, p: usize) -> bool {
        self.values[p].is_some()
    }

    pub fn value(&self, p: usize) -> Option<f64> {
        self.values[p]
    }

    pub fn origin(&self, p: usize) -> Option<SeedOrigin> {
        self.origins[p]
    }

    /// Pinned cell indices, sorted.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cells.iter().map(|&p| (p, self.values[p].unwrap_or_default()))
    }
}

/// Builds Γ⁰ = 𝓕(𝓕(ℐ²)) ∪ 𝓕(ℐ¹) with exact distances at cell centers.
pub fn build_seed_set(mesh: &PolyMesh, gamma: &Gamma) -> Result<SeedSet> {
    let (i1, i2) = classify_cells(mesh, gamma)?;
    Ok(seed_from_sets(mesh, gamma, &i1, &i2))
}

fn seed_from_sets(mesh: &PolyMesh, gamma: &Gamma, i1: &[usize], i2: &[usize]) -> SeedSet {
    let n = mesh.n_cells();
    let mut ring: Vec<Option<u8>> = vec![None; n];
    let (base, rings, set) = if i1.is_empty() { (i2, 2, Placement::Interior) } else { (i1, 1, Placement::Boundary) };
    for &p in base {
        ring[p] = Some(0);
    }
    let mut current = base.to_vec();
    for r in 1..=rings {
        current = dilate(mesh, &current);
        for &p in &current {
            ring[p].get_or_insert(r);
        }
    }
    let values: Vec<Option<f64>> =
        (0..n).into_par_iter().map(|p| ring[p].map(|_| gamma.distance(&mesh.cell_center(p)))).collect();
    let origins = ring.iter().map(|r| r.map(|ring| SeedOrigin { set, ring })).collect();
    let cells = (0..n).filter(|&p| values[p].is_some()).collect();
    SeedSet { values, origins, cells }
}

/// Dirichlet data of one problem: pinned cells and 𝓑_D boundary triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub seeds: SeedSet,
    /// Per mesh triangle: `Some(u_b)` if the triangle belongs to 𝓑_D.
    pub boundary: Vec<Option<f64>>,
}

impl DirichletData {
    pub fn n_boundary_dirichlet(&self) -> usize {
        self.boundary.iter().filter(|v| v.is_some()).count()
    }
}

/// Marks the boundary triangles whose centroid lies on Γ.
pub fn boundary_dirichlet(mesh: &PolyMesh, gamma: &Gamma) -> Vec<Option<f64>> {
    let mut out = vec![None; mesh.n_tris()];
    if gamma.placement() != Placement::Boundary {
        return out;
    }
    let tol = 1e-9 * mesh.h();
    for g in mesh.boundary_faces() {
        for t in mesh.face_tris(g) {
            let d = gamma.distance(&mesh.tris()[t].center);
            if d <= tol {
                out[t] = Some(d);
            }
        }
    }
    out
}

/// Seeds and boundary Dirichlet triangles for `gamma` on `mesh`.
pub fn build_dirichlet(mesh: &PolyMesh, gamma: &Gamma) -> Result<DirichletData> {
    let seeds = build_seed_set(mesh, gamma)?;
    Ok(DirichletData { seeds, boundary: boundary_dirichlet(mesh, gamma) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_hex_mesh;
    use approx::assert_relative_eq;

    fn cube(lo: f64, hi: f64) -> Domain {
        Domain::Box(Aabb::cube(lo, hi))
    }

    #[test]
    fn whole_boundary_on_4_cube_touches_56_cells() {
        let m = generate_box_hex_mesh(&cube(0.0, 1.0), [4, 4, 4]).unwrap();
        let g = Gamma::new(GammaSpec::WholeBoundary, cube(0.0, 1.0)).unwrap();
        let (i1, i2) = classify_cells(&m, &g).unwrap();
        assert_eq!(i1.len(), 64 - 8);
        assert!(i2.is_empty());
        let expected: Vec<usize> = (0..64).filter(|&p| m.is_boundary_cell(p)).collect();
        assert_eq!(i1, expected);
    }

    #[test]
    fn interior_sphere_goes_to_i2() {
        let d = cube(-1.25, 1.25);
        let m = generate_box_hex_mesh(&d, [10, 10, 10]).unwrap();
        let g = Gamma::new(GammaSpec::Sphere { center: [0.0; 3], radius: 0.6 }, d).unwrap();
        assert_eq!(g.placement(), Placement::Interior);
        let (i1, i2) = classify_cells(&m, &g).unwrap();
        assert!(i1.is_empty());
        assert!(!i2.is_empty());
    }

    #[test]
    fn disk_in_midplane_selects_both_layers() {
        let d = cube(-1.0, 1.0);
        let m = generate_box_hex_mesh(&d, [4, 4, 4]).unwrap();
        let g = Gamma::new(GammaSpec::Disk { center: [0.0; 3], radius: 0.6, normal: [0.0, 0.0, 1.0] }, d).unwrap();
        let (_, i2) = classify_cells(&m, &g).unwrap();
        // A cell touches the disk iff its z-range contains 0 and its xy
        // rectangle comes within the radius of the axis.
        let mut expected = Vec::new();
        for k in 1..3 {
            for j in 0..4 {
                for i in 0..4 {
                    let gap = |a: usize| {
                        let (lo, hi) = (-1.0 + 0.5 * a as f64, -0.5 + 0.5 * a as f64);
                        if lo > 0.0 {
                            lo
                        } else if hi < 0.0 {
                            -hi
                        } else {
                            0.0
                        }
                    };
                    if gap(i).hypot(gap(j)) <= 0.6 {
                        expected.push(i + 4 * (j + 4 * k));
                    }
                }
            }
        }
        assert_eq!(expected.len(), 24);
        assert_eq!(i2, expected);
    }

    #[test]
    fn mixed_gamma_is_rejected() {
        let d = cube(-1.0, 1.0);
        let s = GammaSpec::Sphere { center: [0.9, 0.0, 0.0], radius: 0.5 };
        assert!(matches!(Gamma::new(s, d), Err(Error::GammaOutsideDomain(_)) | Err(Error::MixedGamma)));
        let disk = GammaSpec::Disk { center: [0.0, 0.0, 0.0], radius: 1.0, normal: [0.0, 0.0, 1.0] };
        assert!(matches!(Gamma::new(disk, d), Err(Error::MixedGamma)));
    }

    #[test]
    fn dilation_counts() {
        let m = generate_box_hex_mesh(&cube(0.0, 3.0), [3, 3, 3]).unwrap();
        assert_eq!(dilate(&m, &[13]).len(), 7);
        assert_eq!(dilate(&m, &[0]).len(), 4);
        assert!(dilate(&m, &[]).is_empty());
    }

    #[test]
    fn exact_distances() {
        let d = cube(-5.0, 5.0);
        let s = Gamma::new(GammaSpec::Sphere { center: [0.0; 3], radius: 0.6 }, d).unwrap();
        assert_relative_eq!(s.distance(&Vec3::new(1.0, 0.0, 0.0)), 0.4, epsilon = 1e-15);
        assert_relative_eq!(s.distance(&Vec3::new(0.7, 0.0, 0.0)), 0.1, epsilon = 1e-15);
        let c = Gamma::new(GammaSpec::Circle { center: [0.0; 3], radius: 0.6, normal: [0.0, 0.0, 1.0] }, d).unwrap();
        assert_relative_eq!(c.distance(&Vec3::new(0.0, 0.0, 1.0)), (0.36f64 + 1.0).sqrt(), epsilon = 1e-15);
        let k = Gamma::new(GammaSpec::Disk { center: [0.0; 3], radius: 0.6, normal: [0.0, 0.0, 1.0] }, d).unwrap();
        assert_relative_eq!(k.distance(&Vec3::new(0.0, 0.0, 1.0)), 1.0, epsilon = 1e-15);
        assert_eq!(k.distance(&Vec3::new(0.3, 0.2, 0.0)), 0.0);
        let w = Gamma::new(GammaSpec::WholeBoundary, d).unwrap();
        assert_relative_eq!(w.distance(&Vec3::new(4.95, 0.0, 1.0)), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn square_pair_takes_min_distance() {
        let d = cube(-10.0, 10.0);
        let sq = |z: f64| SquareSpec { center: [0.0, 0.0, z], side: 2.0, normal: [0.0, 0.0, 1.0] };
        let g = Gamma::new(GammaSpec::SquarePair { squares: [sq(1.0), sq(-1.0)] }, d).unwrap();
        let x = Vec3::new(3.0, 0.5, 0.0);
        // hand evaluation: in-plane excess (2, 0), normal offset 1 to either square
        assert_relative_eq!(g.distance(&x), 5f64.sqrt(), epsilon = 1e-15);
        let y = Vec3::new(0.0, 0.0, 0.25);
        assert_relative_eq!(g.distance(&y), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn seed_set_is_double_dilation_for_interior_gamma() {
        let d = cube(-1.25, 1.25);
        let m = generate_box_hex_mesh(&d, [10, 10, 10]).unwrap();
        let g = Gamma::new(GammaSpec::Sphere { center: [0.0; 3], radius: 0.6 }, d).unwrap();
        let (_, i2) = classify_cells(&m, &g).unwrap();
        let seeds = build_seed_set(&m, &g).unwrap();
        assert_eq!(seeds.cells(), dilate(&m, &dilate(&m, &i2)).as_slice());
        for (p, v) in seeds.iter() {
            assert_eq!(v, g.distance(&m.cell_center(p)));
            assert!(v >= 0.0);
            if seeds.origin(p).unwrap().ring == 0 {
                assert!(v <= m.cell_bbox(p).diagonal());
            }
        }
    }

    #[test]
    fn boundary_patch_marks_dirichlet_triangles() {
        let d = cube(0.0, 1.0);
        let m = generate_box_hex_mesh(&d, [4, 4, 4]).unwrap();
        let patch = PlanePatch { axis: Axis::X, offset: 1.0, lo: [0.0, 0.0], hi: [0.5, 1.0] };
        let g = Gamma::new(GammaSpec::PlanePatch(patch), d).unwrap();
        assert_eq!(g.placement(), Placement::Boundary);
        let b = boundary_dirichlet(&m, &g);
        // 2 x 4 quads on the +x wall, 4 triangles each
        assert_eq!(b.iter().filter(|v| v.is_some()).count(), 32);
        let seeds = build_seed_set(&m, &g).unwrap();
        let (i1, _) = classify_cells(&m, &g).unwrap();
        assert_eq!(seeds.cells(), dilate(&m, &i1).as_slice());
    }
}
