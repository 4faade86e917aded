//! Legacy VTK unstructured-grid output with per-cell scalar fields, and a
//! reader for the same subset.
//!
//! Hexahedral cells are written as `HEXAHEDRON` (type 12); every other cell
//! as `POLYHEDRON` (type 42) with outward-oriented face loops.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::mesh::PolyMesh;
use crate::{Error, Result, Vec3};

pub const VTK_HEXAHEDRON: u8 = 12;
pub const VTK_POLYHEDRON: u8 = 42;

/// Contents of a legacy VTK unstructured grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<Vec3>,
    /// Raw connectivity per cell, without the leading entry count.
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub scalars: Vec<(String, Vec<f64>)>,
}

/// Outward face loops of cell `p`.
fn outward_loops(mesh: &PolyMesh, p: usize) -> Vec<Vec<usize>> {
    mesh.cell_faces(p)
        .iter()
        .map(|cf| {
            let mut l = mesh.face(cf.face).vertices.clone();
            if cf.sign < 0.0 {
                l.reverse();
            }
            l
        })
        .collect()
}

/// VTK hexahedron ordering for a cell with six quads and eight vertices.
fn hex_ordering(loops: &[Vec<usize>]) -> Option<[usize; 8]> {
    if loops.len() != 6 || loops.iter().any(|l| l.len() != 4) {
        return None;
    }
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for l in loops {
        for i in 0..4 {
            let (a, b) = (l[i], l[(i + 1) % 4]);
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
    }
    if adj.len() != 8 {
        return None;
    }
    // Bottom loop must circulate so that its normal points into the cell.
    let bottom: Vec<usize> = loops[0].iter().rev().copied().collect();
    let mut order = [0usize; 8];
    for i in 0..4 {
        order[i] = bottom[i];
        let mut up = adj[&bottom[i]].iter().filter(|v| !bottom.contains(v));
        let top = *up.next()?;
        if up.any(|&v| v != top) {
            return None;
        }
        order[4 + i] = top;
    }
    let mut seen = order.to_vec();
    seen.sort_unstable();
    seen.dedup();
    (seen.len() == 8).then_some(order)
}

fn fmt_f64(out: &mut String, x: f64) {
    // 17 significant digits round-trip every finite double.
    let _ = write!(out, "{x:.16e}");
}

/// Writes the mesh with cell-centered scalar fields.
pub fn write_vtk(mesh: &PolyMesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    for (name, data) in fields {
        if data.len() != mesh.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "field '{name}' has {} values for {} cells",
                data.len(),
                mesh.n_cells()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad field name '{name}'")));
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\neikonal-fv\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices().len());
    for v in mesh.vertices() {
        fmt_f64(&mut out, v.x);
        out.push(' ');
        fmt_f64(&mut out, v.y);
        out.push(' ');
        fmt_f64(&mut out, v.z);
        out.push('\n');
    }

    let mut conn: Vec<Vec<usize>> = Vec::with_capacity(mesh.n_cells());
    let mut types = Vec::with_capacity(mesh.n_cells());
    for p in 0..mesh.n_cells() {
        let loops = outward_loops(mesh, p);
        match hex_ordering(&loops) {
            Some(o) => {
                conn.push(o.to_vec());
                types.push(VTK_HEXAHEDRON);
            }
            None => {
                let mut c = vec![loops.len()];
                for l in &loops {
                    c.push(l.len());
                    c.extend_from_slice(l);
                }
                conn.push(c);
                types.push(VTK_POLYHEDRON);
            }
        }
    }
    let size: usize = conn.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {}", conn.len(), size);
    for c in &conn {
        let _ = write!(out, "{}", c.len());
        for i in c {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", types.len());
    for t in &types {
        let _ = writeln!(out, "{t}");
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "CELL_DATA {}", mesh.n_cells());
        for (name, data) in fields {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for &x in *data {
                fmt_f64(&mut out, x);
                out.push('\n');
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a legacy ASCII unstructured grid as produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    parse_vtk(&text, &ctx)
}

fn parse_vtk(text: &str, ctx: &str) -> Result<VtkGrid> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::parse(ctx, "missing vtk header"));
    }
    lines.next();
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(Error::parse(ctx, "only ASCII files are supported"));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut next =
        |what: &str| tokens.next().ok_or_else(|| Error::parse(ctx, format!("unexpected end, expected {what}")));
    fn num<T: std::str::FromStr>(t: &str, ctx: &str) -> Result<T> {
        t.parse().map_err(|_| Error::parse(ctx, format!("bad number '{t}'")))
    }

    let mut grid = VtkGrid { points: vec![], cells: vec![], cell_types: vec![], scalars: vec![] };
    let mut n_cell_data = None;
    while let Ok(kw) = next("keyword") {
        match kw {
            "DATASET" => {
                let kind = next("dataset type")?;
                if kind != "UNSTRUCTURED_GRID" {
                    return Err(Error::parse(ctx, format!("unsupported dataset {kind}")));
                }
            }
            "POINTS" => {
                let n: usize = num(next("point count")?, ctx)?;
                next("point type")?;
                for _ in 0..n {
                    let x = num(next("x")?, ctx)?;
                    let y = num(next("y")?, ctx)?;
                    let z = num(next("z")?, ctx)?;
                    grid.points.push(Vec3::new(x, y, z));
                }
            }
            "CELLS" => {
                let n: usize = num(next("cell count")?, ctx)?;
                let size: usize = num(next("cell size")?, ctx)?;
                let mut read = 0;
                for _ in 0..n {
                    let k: usize = num(next("entry count")?, ctx)?;
                    let c = (0..k).map(|_| num(next("index")?, ctx)).collect::<Result<Vec<usize>>>()?;
                    read += k + 1;
                    grid.cells.push(c);
                }
                if read != size {
                    return Err(Error::parse(ctx, format!("CELLS size {size} but read {read}")));
                }
            }
            "CELL_TYPES" => {
                let n: usize = num(next("type count")?, ctx)?;
                for _ in 0..n {
                    grid.cell_types.push(num(next("type")?, ctx)?);
                }
            }
            "CELL_DATA" => n_cell_data = Some(num::<usize>(next("cell data count")?, ctx)?),
            "SCALARS" => {
                let n = n_cell_data.ok_or_else(|| Error::parse(ctx, "SCALARS before CELL_DATA"))?;
                let name = next("scalar name")?.to_owned();
                next("scalar type")?;
                let mut t = next("component count or LOOKUP_TABLE")?;
                if t != "LOOKUP_TABLE" {
                    t = next("LOOKUP_TABLE")?;
                }
                if t != "LOOKUP_TABLE" {
                    return Err(Error::parse(ctx, "expected LOOKUP_TABLE"));
                }
                next("table name")?;
                let data = (0..n).map(|_| num(next("value")?, ctx)).collect::<Result<Vec<f64>>>()?;
                grid.scalars.push((name, data));
            }
            other => return Err(Error::parse(ctx, format!("unsupported keyword {other}"))),
        }
    }
    if grid.cells.len() != grid.cell_types.len() {
        return Err(Error::parse(ctx, "cell and type counts differ"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_hex_mesh, perturb_mesh, Aabb, Domain, Face, Neighbor};

    #[test]
    fn hex_round_trip_is_bitwise() {
        let m = generate_box_hex_mesh(&Domain::Box(Aabb::cube(-1.0, 1.0)), [3, 2, 2]).unwrap();
        let m = perturb_mesh(&m, 0.25, 3).unwrap();
        let u: Vec<f64> = m.cell_centers().iter().map(|c| c.norm() / 3.0 + 1e-17).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.vtk");
        write_vtk(&m, &[("u", &u)], &path).unwrap();
        let g = read_vtk(&path).unwrap();
        assert_eq!(g.points, m.vertices());
        assert!(g.cell_types.iter().all(|&t| t == VTK_HEXAHEDRON));
        assert_eq!(g.scalars.len(), 1);
        assert_eq!(g.scalars[0].0, "u");
        for (a, b) in g.scalars[0].1.iter().zip(&u) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn hex_ordering_has_positive_orientation() {
        let m = generate_box_hex_mesh(&Domain::Box(Aabb::cube(0.0, 1.0)), [1, 1, 1]).unwrap();
        let o = hex_ordering(&outward_loops(&m, 0)).unwrap();
        let v = |i: usize| m.vertices()[o[i]];
        // Bottom loop normal points toward the top vertices.
        let n = (v(1) - v(0)).cross(&(v(3) - v(0)));
        assert!(n.dot(&(v(4) - v(0))) > 0.0);
        for i in 0..4 {
            assert!(((v(4 + i) - v(i)).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn prism_is_written_as_polyhedron() {
        let vertices = vec![
            Vec3::new(0., 0., 0.),
            Vec3::new(1., 0., 0.),
            Vec3::new(0., 1., 0.),
            Vec3::new(0., 0., 1.),
            Vec3::new(1., 0., 1.),
            Vec3::new(0., 1., 1.),
        ];
        let b = |v: Vec<usize>, t| Face { vertices: v, owner: 0, neighbor: Neighbor::Boundary(t) };
        let faces = vec![
            b(vec![0, 2, 1], 0),
            b(vec![3, 4, 5], 1),
            b(vec![0, 1, 4, 3], 2),
            b(vec![1, 2, 5, 4], 3),
            b(vec![0, 3, 5, 2], 4),
        ];
        let m = PolyMesh::new(vertices, faces, vec![vec![0, 1, 2, 3, 4]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.vtk");
        write_vtk(&m, &[("a", &[0.5]), ("b", &[-2.0])], &path).unwrap();
        let g = read_vtk(&path).unwrap();
        assert_eq!(g.cell_types, vec![VTK_POLYHEDRON]);
        assert_eq!(g.cells[0][0], 5);
        assert_eq!(g.cells[0].len(), 1 + 5 + 2 * 3 + 3 * 4);
        assert_eq!(g.scalars[1], ("b".to_string(), vec![-2.0]));
    }

    #[test]
    fn field_length_mismatch_is_rejected() {
        let m = generate_box_hex_mesh(&Domain::Box(Aabb::cube(0.0, 1.0)), [2, 1, 1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(write_vtk(&m, &[("u", &[1.0])], &dir.path().join("x.vtk")).is_err());
    }
}
