//! Poly-mesh file format.
//!
//! ASCII layout (one record per line, `#` starts a comment):
//!
//! ```text
//! polymesh 1 ascii
//! vertices <n>
//! <x> <y> <z>
//! faces <m>
//! <owner> c <neighbor> | b <tag>  <k> <v0> ... <vk-1>
//! cells <c>
//! <k> <f0> ... <fk-1>
//! ```
//!
//! Binary layout, little-endian: magic `PMSH`, `u32` version, then `u64`
//! counts of vertices, faces and cells; vertices as `3 x f64`; faces as
//! `u64 owner`, `i64 neighbor` (`>= 0` cell index, `< 0` boundary tag
//! encoded as `-1 - tag`), `u32 k`, `k x u64` vertex indices; cells as
//! `u32 k`, `k x u64` face indices.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Face, Neighbor, PolyMesh};
use crate::{Error, Result, Vec3};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PMSH";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

pub fn write_polymesh(mesh: &PolyMesh, path: &Path, encoding: Encoding) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match encoding {
        Encoding::Ascii => write_ascii(mesh, &mut w),
        Encoding::Binary => write_binary(mesh, &mut w),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_polymesh(path: &Path) -> Result<PolyMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes, &ctx)
    } else {
        read_ascii(BufReader::new(&bytes[..]), &ctx)
    }
}

fn write_ascii<W: Write>(mesh: &PolyMesh, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "polymesh {FORMAT_VERSION} ascii")?;
    writeln!(w, "vertices {}", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    writeln!(w, "faces {}", mesh.n_faces())?;
    for f in mesh.faces() {
        match f.neighbor {
            Neighbor::Cell(q) => write!(w, "{} c {} {}", f.owner, q, f.vertices.len())?,
            Neighbor::Boundary(t) => write!(w, "{} b {} {}", f.owner, t, f.vertices.len())?,
        }
        for v in &f.vertices {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "cells {}", mesh.n_cells())?;
    for c in mesh.cells() {
        write!(w, "{}", c.len())?;
        for g in c {
            write!(w, " {g}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_ascii<R: BufRead>(r: R, ctx: &str) -> Result<PolyMesh> {
    let mut lines =
        r.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| {
            l.as_ref().map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#')).unwrap_or(true)
        });
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) =
            lines.next().ok_or_else(|| Error::parse(ctx, format!("unexpected end of file, expected {what}")))?;
        let line = line.map_err(|e| Error::parse(ctx, e.to_string()))?;
        Ok((no, line.split_whitespace().map(str::to_owned).collect()))
    };
    fn num<T: std::str::FromStr>(tok: Option<&String>, ctx: &str, line: usize) -> Result<T> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::parse(ctx, format!("line {line}: bad or missing number")))
    }

    let (no, header) = next("header")?;
    if header.len() != 3 || header[0] != "polymesh" || header[2] != "ascii" {
        return Err(Error::parse(ctx, format!("line {no}: bad header")));
    }
    let version: u32 = num(header.get(1), ctx, no)?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(ctx, format!("unsupported version {version}")));
    }

    let section = |toks: &[String], name: &str, no: usize| -> Result<usize> {
        if toks.first().map(String::as_str) != Some(name) {
            return Err(Error::parse(ctx, format!("line {no}: expected '{name} <count>'")));
        }
        num(toks.get(1), ctx, no)
    };

    let (no, t) = next("vertices")?;
    let nv = section(&t, "vertices", no)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, t) = next("vertex")?;
        vertices.push(Vec3::new(num(t.first(), ctx, no)?, num(t.get(1), ctx, no)?, num(t.get(2), ctx, no)?));
    }

    let (no, t) = next("faces")?;
    let nf = section(&t, "faces", no)?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, t) = next("face")?;
        let owner: usize = num(t.first(), ctx, no)?;
        let neighbor = match t.get(1).map(String::as_str) {
            Some("c") => Neighbor::Cell(num(t.get(2), ctx, no)?),
            Some("b") => Neighbor::Boundary(num(t.get(2), ctx, no)?),
            _ => return Err(Error::parse(ctx, format!("line {no}: expected 'c' or 'b'"))),
        };
        let k: usize = num(t.get(3), ctx, no)?;
        if t.len() != 4 + k {
            return Err(Error::parse(ctx, format!("line {no}: expected {k} vertex indices")));
        }
        let verts = (0..k).map(|i| num(t.get(4 + i), ctx, no)).collect::<Result<_>>()?;
        faces.push(Face { vertices: verts, owner, neighbor });
    }

    let (no, t) = next("cells")?;
    let nc = section(&t, "cells", no)?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (no, t) = next("cell")?;
        let k: usize = num(t.first(), ctx, no)?;
        if t.len() != 1 + k {
            return Err(Error::parse(ctx, format!("line {no}: expected {k} face indices")));
        }
        cells.push((0..k).map(|i| num(t.get(1 + i), ctx, no)).collect::<Result<_>>()?);
    }
    PolyMesh::new(vertices, faces, cells)
}

fn write_binary<W: Write>(mesh: &PolyMesh, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for n in [mesh.vertices().len(), mesh.n_faces(), mesh.n_cells()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in mesh.vertices() {
        for c in v.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for f in mesh.faces() {
        w.write_all(&(f.owner as u64).to_le_bytes())?;
        let nb: i64 = match f.neighbor {
            Neighbor::Cell(q) => q as i64,
            Neighbor::Boundary(t) => -1 - t as i64,
        };
        w.write_all(&nb.to_le_bytes())?;
        w.write_all(&(f.vertices.len() as u32).to_le_bytes())?;
        for &v in &f.vertices {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
    }
    for c in mesh.cells() {
        w.write_all(&(c.len() as u32).to_le_bytes())?;
        for &g in c {
            w.write_all(&(g as u64).to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    ctx: &'a str,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.data.read_exact(&mut buf).map_err(|_| Error::parse(self.ctx, "truncated binary mesh"))?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn index(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::parse(self.ctx, "index overflow"))
    }
}

fn read_binary(bytes: &[u8], ctx: &str) -> Result<PolyMesh> {
    let mut c = Cursor { data: &bytes[MAGIC.len()..], ctx };
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(ctx, format!("unsupported version {version}")));
    }
    let (nv, nf, nc) = (c.index()?, c.index()?, c.index()?);
    // Guard against absurd counts before allocating.
    if nv.saturating_mul(24) > bytes.len() || nf > bytes.len() || nc > bytes.len() {
        return Err(Error::parse(ctx, "counts exceed file size"));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(Vec3::new(c.f64()?, c.f64()?, c.f64()?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let owner = c.index()?;
        let nb = c.i64()?;
        let neighbor = if nb >= 0 {
            Neighbor::Cell(nb as usize)
        } else {
            Neighbor::Boundary(u32::try_from(-1 - nb).map_err(|_| Error::parse(ctx, "bad boundary tag"))?)
        };
        let k = c.u32()? as usize;
        let verts = (0..k).map(|_| c.index()).collect::<Result<_>>()?;
        faces.push(Face { vertices: verts, owner, neighbor });
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k = c.u32()? as usize;
        cells.push((0..k).map(|_| c.index()).collect::<Result<_>>()?);
    }
    if !c.data.is_empty() {
        return Err(Error::parse(ctx, "trailing bytes after cell table"));
    }
    PolyMesh::new(vertices, faces, cells)
}
