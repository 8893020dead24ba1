//! Mesh serialization: the native `trimesh2` text format and legacy ASCII
//! VTK output for visualization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, Region, TriMesh};

/// Named nodal field attached to a VTK snapshot.
pub enum VtkField<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [[f64; 2]]),
}

/// Writes a legacy VTK 2.0 ASCII unstructured grid with the region label
/// as cell data and the given nodal fields as point data. 2D vectors are
/// padded with a zero z component.
pub fn save_vtk(mesh: &TriMesh, fields: &[VtkField], path: &Path) -> Result<()> {
    for field in fields {
        let len = match field {
            VtkField::Scalar(_, v) => v.len(),
            VtkField::Vector(_, v) => v.len(),
        };
        if len != mesh.num_vertices() {
            return Err(Error::Mismatch(format!(
                "vtk field has {len} values for {} vertices",
                mesh.num_vertices()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "shapeopt mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for tri in &mesh.triangles {
        writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for r in &mesh.region {
        writeln!(w, "{}", r.label())?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.num_vertices())?;
        for field in fields {
            match field {
                VtkField::Scalar(name, values) => {
                    writeln!(w, "SCALARS {name} double 1")?;
                    writeln!(w, "LOOKUP_TABLE default")?;
                    for v in *values {
                        writeln!(w, "{v}")?;
                    }
                }
                VtkField::Vector(name, values) => {
                    writeln!(w, "VECTORS {name} double")?;
                    for v in *values {
                        writeln!(w, "{} {} 0", v[0], v[1])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the native format: header `trimesh2 <nv> <nt> <nbe>`, vertex
/// lines `x y`, triangle lines `i j k region`, boundary-edge lines
/// `a b tag`.
pub fn save_t2m(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "trimesh2 {} {} {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges.len()
    )?;
    for p in &mesh.vertices {
        writeln!(w, "{} {}", p[0], p[1])?;
    }
    for (tri, region) in mesh.triangles.iter().zip(&mesh.region) {
        writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], region.label())?;
    }
    for be in &mesh.boundary_edges {
        writeln!(w, "{} {} {}", be.vertices[0], be.vertices[1], be.tag.name())?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, what: &str) -> Error {
    Error::InvalidMesh(format!("trimesh2 parse error at line {line}: {what}"))
}

/// Loads a `trimesh2` file and revalidates every mesh invariant. The
/// interface loop is reconstructed from the interface-tagged edges and
/// oriented counter-clockwise.
pub fn load_t2m(path: &Path) -> Result<TriMesh> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let mut it = header.split_whitespace();
    if it.next() != Some("trimesh2") {
        return Err(parse_err(1, "missing trimesh2 magic"));
    }
    let counts: Vec<usize> = it
        .map(|t| t.parse().map_err(|_| parse_err(1, "bad count")))
        .collect::<Result<_>>()?;
    let [nv, nt, nbe] = counts[..] else {
        return Err(parse_err(1, "expected three counts"));
    };

    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, &format!("unexpected end of file, wanted {expect}")))?;
        Ok((idx + 1, line?))
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = next_line("vertex")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [x, y] = parts[..] else {
            return Err(parse_err(ln, "vertex needs x y"));
        };
        let x: f64 = x.parse().map_err(|_| parse_err(ln, "bad x"))?;
        let y: f64 = y.parse().map_err(|_| parse_err(ln, "bad y"))?;
        vertices.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut region = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = next_line("triangle")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, k, r] = parts[..] else {
            return Err(parse_err(ln, "triangle needs i j k region"));
        };
        let tri: [usize; 3] = [
            i.parse().map_err(|_| parse_err(ln, "bad index"))?,
            j.parse().map_err(|_| parse_err(ln, "bad index"))?,
            k.parse().map_err(|_| parse_err(ln, "bad index"))?,
        ];
        triangles.push(tri);
        region.push(Region::from_label(r.parse().map_err(|_| parse_err(ln, "bad region"))?)?);
    }
    let mut boundary_edges = Vec::with_capacity(nbe);
    for _ in 0..nbe {
        let (ln, line) = next_line("boundary edge")?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [a, b, tag] = parts[..] else {
            return Err(parse_err(ln, "edge needs a b tag"));
        };
        boundary_edges.push(BoundaryEdge {
            vertices: [
                a.parse().map_err(|_| parse_err(ln, "bad index"))?,
                b.parse().map_err(|_| parse_err(ln, "bad index"))?,
            ],
            tag: BoundaryTag::from_name(tag)?,
        });
    }

    let interface_loop = rebuild_loop(&vertices, &boundary_edges)?;
    TriMesh::new(vertices, triangles, region, boundary_edges, interface_loop)
}

/// Chains the interface-tagged edges into a single closed loop, oriented
/// counter-clockwise by signed area.
fn rebuild_loop(vertices: &[[f64; 2]], boundary_edges: &[BoundaryEdge]) -> Result<Vec<usize>> {
    use std::collections::HashMap;
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut count = 0usize;
    for be in boundary_edges {
        if be.tag == BoundaryTag::Interface {
            adjacency.entry(be.vertices[0]).or_default().push(be.vertices[1]);
            adjacency.entry(be.vertices[1]).or_default().push(be.vertices[0]);
            count += 1;
        }
    }
    if count < 3 {
        return Err(Error::InvalidMesh("fewer than 3 interface edges".into()));
    }
    for (v, nbrs) in &adjacency {
        if nbrs.len() != 2 {
            return Err(Error::InvalidMesh(format!(
                "interface vertex {v} has {} interface neighbors",
                nbrs.len()
            )));
        }
    }
    let start = *adjacency.keys().min().unwrap();
    let mut cycle = vec![start];
    let mut prev = start;
    let mut cur = adjacency[&start][0];
    while cur != start {
        cycle.push(cur);
        let nbrs = &adjacency[&cur];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = cur;
        cur = next;
        if cycle.len() > count {
            return Err(Error::InvalidMesh("interface edges do not form one loop".into()));
        }
    }
    if cycle.len() != count {
        return Err(Error::InvalidMesh("interface edges form more than one loop".into()));
    }
    let area: f64 = (0..cycle.len())
        .map(|i| {
            let a = vertices[cycle[i]];
            let b = vertices[cycle[(i + 1) % cycle.len()]];
            0.5 * (a[0] * b[1] - b[0] * a[1])
        })
        .sum();
    if area < 0.0 {
        cycle.reverse();
    }
    Ok(cycle)
}
