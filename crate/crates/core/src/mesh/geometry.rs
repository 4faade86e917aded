//! Face tessellation, face vectors and cell volume/centroid.

use crate::{Error, Result, Vec3};

/// Relative area threshold below which a face is considered degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// A flat triangle of a tessellated face.
///
/// `normal` is area-scaled and follows the orientation of the parent vertex
/// loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub points: [Vec3; 3],
    pub center: Vec3,
    pub normal: Vec3,
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Triangle { points: [a, b, c], center: (a + b + c) / 3.0, normal: 0.5 * (b - a).cross(&(c - a)) }
    }

    pub fn area(&self) -> f64 {
        self.normal.norm()
    }
}

/// Result of [`tessellate_face`].
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTessellation {
    pub triangles: Vec<Triangle>,
    /// Area-weighted face center `x_g`.
    pub center: Vec3,
}

/// Splits a polygonal face into triangles.
///
/// The face center is the area-weighted mean of the centroids of the fan
/// triangles `(v_i, v_{i+1}, x_0)`, where `x_0` is the vertex average. The
/// returned triangles `(v_i, v_{i+1}, x_g)` share the face center as their
/// common vertex. Triangular faces are returned unchanged.
///
/// `scale` is a length representative of the whole mesh; faces whose total
/// area is below `1e-14 * scale^2` are rejected.
pub fn tessellate_face(points: &[Vec3], scale: f64) -> Result<FaceTessellation> {
    let r = points.len();
    if r < 3 {
        return Err(Error::InvalidArgument(format!("face with {r} vertices")));
    }
    let min_area = DEGENERATE_AREA * scale * scale;
    if r == 3 {
        let tri = Triangle::new(points[0], points[1], points[2]);
        if tri.area() < min_area {
            return Err(Error::DegenerateFace { face: usize::MAX });
        }
        return Ok(FaceTessellation { center: tri.center, triangles: vec![tri] });
    }

    let x0 = points.iter().sum::<Vec3>() / r as f64;
    let mut weighted = Vec3::zeros();
    let mut total = 0.0;
    for i in 0..r {
        let a = points[i];
        let b = points[(i + 1) % r];
        let area = 0.5 * (b - a).cross(&(x0 - a)).norm();
        weighted += area * (a + b + x0) / 3.0;
        total += area;
    }
    if total < min_area {
        return Err(Error::DegenerateFace { face: usize::MAX });
    }
    let center = weighted / total;
    let triangles = (0..r).map(|i| Triangle::new(points[i], points[(i + 1) % r], center)).collect();
    Ok(FaceTessellation { triangles, center })
}

/// Area vector of a polygon, `1/2 * sum_{i=2}^{r-1} d(v1,vi) x d(v1,v(i+1))`.
///
/// Equals the sum of the tessellated triangle normals for any apex, and the
/// polygon area times its unit normal for planar faces.
pub fn face_vector(points: &[Vec3]) -> Vec3 {
    let v1 = points[0];
    let mut n = Vec3::zeros();
    for i in 1..points.len().saturating_sub(1) {
        n += (points[i] - v1).cross(&(points[i + 1] - v1));
    }
    0.5 * n
}

/// Volume and centroid of a closed surface made of triangles, returned as
/// `(centroid, volume)`.
///
/// Each item is `(vertices, center, normal)` with the area-scaled normal
/// already pointing outward. The volume follows from the divergence theorem,
/// `1/3 * sum x_f . n_f`. The centroid is the volume-weighted mean of the
/// tetrahedra spanned by each triangle and `reference`.
pub fn closed_surface_geometry<I>(triangles: I, reference: Vec3) -> (Vec3, f64)
where
    I: IntoIterator<Item = ([Vec3; 3], Vec3, Vec3)>,
{
    let mut div_volume = 0.0;
    let mut tet_volume = 0.0;
    let mut moment = Vec3::zeros();
    for ([a, b, c], center, n) in triangles {
        div_volume += center.dot(&n) / 3.0;
        // signed volume of tet (reference, a, b, c)
        let v = (center - reference).dot(&n) / 3.0;
        tet_volume += v;
        moment += v * (reference + a + b + c) / 4.0;
    }
    let centroid = if tet_volume != 0.0 { moment / tet_volume } else { reference };
    (centroid, div_volume)
}
