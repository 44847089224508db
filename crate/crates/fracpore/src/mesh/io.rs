//! Plain-text mesh exchange format and a legacy-VTK dump for inspection.
//!
//! Text format (whitespace-separated, `#` starts a comment line):
//!
//! ```text
//! fracpore-mesh 1
//! vertices <N>
//! <x> <y>            (N lines)
//! cells <M>
//! <v0> <v1> <v2>     (M lines, counterclockwise)
//! fracture_edges <F>
//! <va> <vb>          (F lines, each pair must be a mesh edge)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{assemble_mesh, Mesh, Point};
use crate::error::{FracporeError, Result};

pub fn write_mesh_text(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "fracpore-mesh 1");
    let _ = writeln!(s, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {}", v[0], v[1]);
    }
    let _ = writeln!(s, "cells {}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "{} {} {}", c.v[0], c.v[1], c.v[2]);
    }
    let _ = writeln!(s, "fracture_edges {}", mesh.fracture_edges.len());
    for fe in &mesh.fracture_edges {
        let e = &mesh.edges[fe.edge];
        let _ = writeln!(s, "{} {}", e.v[0], e.v[1]);
    }
    crate::output::write_atomic(path, s.as_bytes())
}

pub fn read_mesh_text(path: &Path) -> Result<Mesh> {
    let content = std::fs::read_to_string(path)?;
    let mut tokens = content
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let mut next = |what: &str| -> Result<String> {
        tokens
            .next()
            .map(|t| t.to_string())
            .ok_or_else(|| FracporeError::Parse(format!("mesh file truncated, expected {what}")))
    };
    let magic = next("magic")?;
    let version = next("version")?;
    if magic != "fracpore-mesh" || version != "1" {
        return Err(FracporeError::Parse(format!(
            "not a fracpore-mesh v1 file (got '{magic} {version}')"
        )));
    }
    let parse_usize = |t: String| -> Result<usize> {
        t.parse()
            .map_err(|_| FracporeError::Parse(format!("bad integer '{t}' in mesh file")))
    };
    let parse_f64 = |t: String| -> Result<f64> {
        t.parse()
            .map_err(|_| FracporeError::Parse(format!("bad number '{t}' in mesh file")))
    };

    if next("'vertices'")? != "vertices" {
        return Err(FracporeError::Parse("expected 'vertices'".into()));
    }
    let nv = parse_usize(next("vertex count")?)?;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(next("x")?)?;
        let y = parse_f64(next("y")?)?;
        vertices.push([x, y]);
    }
    if next("'cells'")? != "cells" {
        return Err(FracporeError::Parse("expected 'cells'".into()));
    }
    let nc = parse_usize(next("cell count")?)?;
    let mut tris = Vec::with_capacity(nc);
    for _ in 0..nc {
        let a = parse_usize(next("v0")?)?;
        let b = parse_usize(next("v1")?)?;
        let c = parse_usize(next("v2")?)?;
        tris.push([a, b, c]);
    }
    if next("'fracture_edges'")? != "fracture_edges" {
        return Err(FracporeError::Parse("expected 'fracture_edges'".into()));
    }
    let nf = parse_usize(next("fracture edge count")?)?;
    let mut pairs = Vec::with_capacity(nf);
    for _ in 0..nf {
        let a = parse_usize(next("va")?)?;
        let b = parse_usize(next("vb")?)?;
        pairs.push([a, b]);
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in &vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    assemble_mesh(vertices, tris, &pairs, [lo, hi])
}

/// Legacy ASCII VTK dump of the mesh: triangles plus fracture polylines in a
/// single unstructured grid (cell types 5 and 3).
pub fn write_mesh_vtk(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "fracpore mesh");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", v[0], v[1]);
    }
    let n_tri = mesh.cells.len();
    let n_line = mesh.fracture_edges.len();
    let _ = writeln!(s, "CELLS {} {}", n_tri + n_line, 4 * n_tri + 3 * n_line);
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c.v[0], c.v[1], c.v[2]);
    }
    for fe in &mesh.fracture_edges {
        let e = &mesh.edges[fe.edge];
        let _ = writeln!(s, "2 {} {}", e.v[0], e.v[1]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", n_tri + n_line);
    for _ in 0..n_tri {
        let _ = writeln!(s, "5");
    }
    for _ in 0..n_line {
        let _ = writeln!(s, "3");
    }
    crate::output::write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Geometry};

    #[test]
    fn text_round_trip() {
        let geom = Geometry::rectangle(0.0, 0.0, 2.0, 2.0).with_fracture(vec![[1.0, 0.0], [1.0, 2.0]]);
        let mesh = build_mesh(&geom, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        write_mesh_text(&mesh, &path).unwrap();
        let back = read_mesh_text(&path).unwrap();
        assert_eq!(back.n_cells(), mesh.n_cells());
        assert_eq!(back.n_vertices(), mesh.n_vertices());
        assert_eq!(back.fracture_edges.len(), mesh.fracture_edges.len());
        assert_eq!(back.fracture_nodes.len(), mesh.fracture_nodes.len());
        for (a, b) in mesh.vertices.iter().zip(back.vertices.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn vtk_dump_has_expected_counts() {
        let geom = Geometry::rectangle(0.0, 0.0, 2.0, 2.0).with_fracture(vec![[1.0, 0.0], [1.0, 2.0]]);
        let mesh = build_mesh(&geom, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.vtk");
        write_mesh_vtk(&mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains(&format!("CELLS {} ", mesh.n_cells() + mesh.fracture_edges.len())));
    }
}
