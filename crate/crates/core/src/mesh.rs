//! Simplicial meshes with face topology.
//!
//! A [`Mesh`] holds triangles (2D) or tetrahedra (3D) together with the list of
//! faces (edges in 2D). Every face carries a fixed unit normal, the cells on
//! either side and the face meshsize
//!
//! ```text
//! h_E = min(|T+|, |T-|) / |E|      interior faces
//! h_E = |T+| / |E|                 boundary faces
//! ```
//!
//! The normal points away from `T+`, so that the one-sided trace `v+` is the
//! limit of `v(x - εn)` and `v-` the limit of `v(x + εn)`. On the boundary it is
//! the exterior normal. `T+` is always the adjacent cell with the lower index.
//!
//! Coordinates are stored as `[f64; 3]`; in 2D the third component is zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tag for faces carrying a Dirichlet (clamped) condition.
pub const DIRICHLET: &str = "dirichlet";
/// Tag for traction-free boundary faces.
pub const FREE: &str = "free";

pub type Point = [f64; 3];

/// One side of a face: the adjacent cell and the local facet index
/// (the local vertex of the cell opposite to the face).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceSide {
    pub cell: usize,
    pub local_facet: usize,
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Face vertices in the order they appear in the plus cell.
    pub vertices: Vec<usize>,
    /// Length in 2D, area in 3D.
    pub measure: f64,
    pub normal: Point,
    pub plus: FaceSide,
    /// `None` for boundary faces.
    pub minus: Option<FaceSide>,
    /// Face meshsize `h_E`.
    pub h: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    cell_measures: Vec<f64>,
    faces: Vec<Face>,
    /// Faces of each cell, indexed by local facet.
    cell_faces: Vec<Vec<usize>>,
    boundary_tags: BTreeMap<usize, String>,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let n = points.len() as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Signed simplex measure (area/volume) from the standard determinant formula.
pub fn signed_simplex_measure(dim: usize, points: &[Point]) -> f64 {
    match dim {
        2 => {
            let a = sub(&points[1], &points[0]);
            let b = sub(&points[2], &points[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(&points[1], &points[0]);
            let b = sub(&points[2], &points[0]);
            let c = sub(&points[3], &points[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        _ => f64::NAN,
    }
}

/// Measure of a (dim-1)-simplex embedded in `dim` dimensions.
pub fn facet_measure(dim: usize, points: &[Point]) -> f64 {
    match dim {
        2 => norm(&sub(&points[1], &points[0])),
        3 => {
            0.5 * norm(&cross(
                &sub(&points[1], &points[0]),
                &sub(&points[2], &points[0]),
            ))
        }
        _ => f64::NAN,
    }
}

fn longest_edge(points: &[Point]) -> f64 {
    let mut l: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            l = l.max(norm(&sub(&points[i], &points[j])));
        }
    }
    l
}

impl Mesh {
    /// Builds a mesh from vertices and cells and computes the face topology.
    ///
    /// Cells with negative orientation are reordered. All boundary faces are
    /// tagged [`DIRICHLET`]; use [`Mesh::tag_boundary`] to change that.
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let mut cells = cells;
        let mut cell_measures = Vec::with_capacity(cells.len());
        for (index, cell) in cells.iter_mut().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::InvalidMesh(format!(
                    "cell {index} has {} vertices, expected {}",
                    cell.len(),
                    dim + 1
                )));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {index} references missing vertex {v}"
                )));
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let signed = signed_simplex_measure(dim, &pts);
            let scale = longest_edge(&pts).powi(dim as i32);
            if !(signed.abs() > 1e-14 * scale) {
                return Err(Error::DegenerateSimplex {
                    index,
                    measure: signed.abs(),
                });
            }
            if signed < 0.0 {
                cell.swap(0, 1);
            }
            cell_measures.push(signed.abs());
        }
        let mut mesh = Mesh {
            dim,
            vertices,
            cells,
            cell_measures,
            faces: Vec::new(),
            cell_faces: Vec::new(),
            boundary_tags: BTreeMap::new(),
        };
        mesh.build_face_topology()?;
        Ok(mesh)
    }

    /// Recomputes faces, normals, adjacency and meshsizes from the cells.
    ///
    /// Faces are numbered in order of first appearance; the first cell to
    /// reach a face becomes `T+`.
    pub fn build_face_topology(&mut self) -> Result<()> {
        let d = self.dim;
        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut sides: Vec<Vec<FaceSide>> = Vec::new();
        let mut cell_faces = vec![vec![usize::MAX; d + 1]; self.cells.len()];

        for (c, cell) in self.cells.iter().enumerate() {
            for local in 0..=d {
                let fverts: Vec<usize> = (0..=d).filter(|&i| i != local).map(|i| cell[i]).collect();
                let mut key = fverts.clone();
                key.sort_unstable();
                let side = FaceSide {
                    cell: c,
                    local_facet: local,
                };
                let idx = *lookup.entry(key).or_insert_with(|| {
                    faces.push(Face {
                        vertices: fverts,
                        measure: 0.0,
                        normal: [0.0; 3],
                        plus: side,
                        minus: None,
                        h: 0.0,
                    });
                    sides.push(Vec::new());
                    faces.len() - 1
                });
                sides[idx].push(side);
                cell_faces[c][local] = idx;
            }
        }

        for (idx, face) in faces.iter_mut().enumerate() {
            let s = &sides[idx];
            if s.len() > 2 {
                let mut v = face.vertices.clone();
                v.sort_unstable();
                return Err(Error::NonConforming {
                    vertices: v,
                    count: s.len(),
                });
            }
            face.plus = s[0];
            face.minus = s.get(1).copied();

            let pts: Vec<Point> = face.vertices.iter().map(|&v| self.vertices[v]).collect();
            face.measure = facet_measure(d, &pts);
            let mut n = if d == 2 {
                let t = sub(&pts[1], &pts[0]);
                [t[1], -t[0], 0.0]
            } else {
                cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]))
            };
            let len = norm(&n);
            n = [n[0] / len, n[1] / len, n[2] / len];
            let plus_pts: Vec<Point> = self.cells[face.plus.cell]
                .iter()
                .map(|&v| self.vertices[v])
                .collect();
            let outward = sub(&centroid(&pts), &centroid(&plus_pts));
            if dot(&n, &outward) < 0.0 {
                n = [-n[0], -n[1], -n[2]];
            }
            face.normal = n;

            let tp = self.cell_measures[face.plus.cell];
            face.h = match face.minus {
                Some(m) => tp.min(self.cell_measures[m.cell]) / face.measure,
                None => tp / face.measure,
            };
        }

        self.boundary_tags = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(i, _)| (i, DIRICHLET.to_string()))
            .collect();
        self.faces = faces;
        self.cell_faces = cell_faces;
        Ok(())
    }

    /// Retags boundary faces. `tagger` receives the face centroid and outward
    /// normal and returns the new tag.
    pub fn tag_boundary<F>(&mut self, mut tagger: F)
    where
        F: FnMut(&Point, &Point) -> String,
    {
        let faces = &self.faces;
        let vertices = &self.vertices;
        for (&f, tag) in self.boundary_tags.iter_mut() {
            let face = &faces[f];
            let pts: Vec<Point> = face.vertices.iter().map(|&v| vertices[v]).collect();
            *tag = tagger(&centroid(&pts), &face.normal);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Faces of `cell`, indexed by local facet.
    pub fn cell_faces(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    pub fn boundary_tags(&self) -> &BTreeMap<usize, String> {
        &self.boundary_tags
    }

    pub fn boundary_tag(&self, face: usize) -> Option<&str> {
        self.boundary_tags.get(&face).map(String::as_str)
    }

    pub fn is_dirichlet(&self, face: usize) -> bool {
        self.boundary_tag(face) == Some(DIRICHLET)
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        centroid(&self.cell_points(cell))
    }

    pub fn face_centroid(&self, face: &Face) -> Point {
        let pts: Vec<Point> = face.vertices.iter().map(|&v| self.vertices[v]).collect();
        centroid(&pts)
    }

    /// Cell measure `|T|`.
    pub fn cell_measure(&self, cell: usize) -> Result<f64> {
        self.cell_measures
            .get(cell)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("cell index {cell} out of range")))
    }

    /// Face measure `|E|`.
    pub fn face_measure(&self, face: usize) -> Result<f64> {
        self.faces
            .get(face)
            .map(|f| f.measure)
            .ok_or_else(|| Error::InvalidParameter(format!("face index {face} out of range")))
    }

    pub fn total_measure(&self) -> f64 {
        self.cell_measures.iter().sum()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_boundary())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
    }

    /// Parses the ASCII mesh format described in the crate README.
    ///
    /// ```text
    /// dim 2
    /// vertices 3
    /// 0 0
    /// 1 0
    /// 0 1
    /// cells 1
    /// 0 1 2
    /// tags 1
    /// 0 1 free
    /// ```
    ///
    /// The `tags` section is optional; boundary faces it does not mention keep
    /// the default [`DIRICHLET`] tag. `#` starts a comment.
    pub fn parse_ascii(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        fn header<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            key: &str,
        ) -> Result<(usize, usize)> {
            let (line, text) = lines.next().ok_or(Error::MeshParse {
                line: 0,
                message: format!("missing `{key}` header"),
            })?;
            let mut it = text.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::MeshParse {
                    line,
                    message: format!("expected `{key} <count>`"),
                });
            }
            let count = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::MeshParse {
                    line,
                    message: format!("`{key}` needs a non-negative integer"),
                })?;
            Ok((line, count))
        }

        let (_, dim) = header(&mut lines, "dim")?;
        if dim != 2 && dim != 3 {
            return Err(Error::MeshParse {
                line: 1,
                message: format!("dim must be 2 or 3, got {dim}"),
            });
        }
        let (_, nv) = header(&mut lines, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, text) = lines.next().ok_or(Error::MeshParse {
                line: 0,
                message: "truncated vertex list".into(),
            })?;
            let coords: Vec<f64> = text
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse {
                    line,
                    message: format!("bad coordinate: {e}"),
                })?;
            if coords.len() != dim {
                return Err(Error::MeshParse {
                    line,
                    message: format!("expected {dim} coordinates"),
                });
            }
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&coords);
            vertices.push(p);
        }
        let (_, nc) = header(&mut lines, "cells")?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (line, text) = lines.next().ok_or(Error::MeshParse {
                line: 0,
                message: "truncated cell list".into(),
            })?;
            let ids: Vec<usize> = text
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse {
                    line,
                    message: format!("bad vertex index: {e}"),
                })?;
            if ids.len() != dim + 1 {
                return Err(Error::MeshParse {
                    line,
                    message: format!("expected {} vertex indices", dim + 1),
                });
            }
            cells.push(ids);
        }
        let mut tags: HashMap<Vec<usize>, String> = HashMap::new();
        if let Some((line, text)) = lines.next() {
            let mut it = text.split_whitespace();
            let count: usize = match (it.next(), it.next().and_then(|s| s.parse().ok())) {
                (Some("tags"), Some(n)) => n,
                _ => {
                    return Err(Error::MeshParse {
                        line,
                        message: "expected `tags <count>` or end of file".into(),
                    })
                }
            };
            for _ in 0..count {
                let (line, text) = lines.next().ok_or(Error::MeshParse {
                    line: 0,
                    message: "truncated tag list".into(),
                })?;
                let parts: Vec<&str> = text.split_whitespace().collect();
                if parts.len() != dim + 1 {
                    return Err(Error::MeshParse {
                        line,
                        message: format!("expected {dim} vertex indices and a tag"),
                    });
                }
                let mut key: Vec<usize> = parts[..dim]
                    .iter()
                    .map(|s| s.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::MeshParse {
                        line,
                        message: format!("bad vertex index: {e}"),
                    })?;
                key.sort_unstable();
                tags.insert(key, parts[dim].to_string());
            }
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::MeshParse {
                line,
                message: "unexpected trailing content".into(),
            });
        }

        let mut mesh = Mesh::new(dim, vertices, cells)?;
        for (key, tag) in tags {
            let found = mesh.boundary_tags.iter_mut().find(|(&f, _)| {
                let mut v = mesh.faces[f].vertices.clone();
                v.sort_unstable();
                v == key
            });
            match found {
                Some((_, t)) => *t = tag,
                None => {
                    return Err(Error::MeshParse {
                        line: 0,
                        message: format!("tagged face {key:?} is not a boundary face"),
                    })
                }
            }
        }
        Ok(mesh)
    }

    /// Serializes to the ASCII format read by [`Mesh::parse_ascii`].
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for p in &self.vertices {
            let coords: Vec<String> = p[..self.dim].iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(s, "{}", coords.join(" "));
        }
        let _ = writeln!(s, "cells {}", self.cells.len());
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", ids.join(" "));
        }
        let _ = writeln!(s, "tags {}", self.boundary_tags.len());
        for (&f, tag) in &self.boundary_tags {
            let ids: Vec<String> = self.faces[f]
                .vertices
                .iter()
                .map(|v| v.to_string())
                .collect();
            let _ = writeln!(s, "{} {}", ids.join(" "), tag);
        }
        s
    }
}

/// Structured mesh of the unit square with `2 n²` triangles.
///
/// Every square is split along its `(0,0)-(1,1)` diagonal, which makes the
/// mesh symmetric under the reflection `x <-> y`. All boundary faces are
/// tagged [`DIRICHLET`].
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "unit_square_mesh needs n >= 1".into(),
        ));
    }
    box_mesh(&[1.0, 1.0], &[n, n])
}

fn box_mesh_impl(lengths: &[f64], divisions: &[usize], mirror: bool) -> Result<Mesh> {
    let dim = lengths.len();
    if (dim != 2 && dim != 3) || divisions.len() != dim {
        return Err(Error::InvalidParameter(
            "box mesh needs matching 2- or 3-vectors of lengths and divisions".into(),
        ));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) || divisions.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "box mesh lengths and divisions must be positive, got {lengths:?} / {divisions:?}"
        )));
    }
    let np: Vec<usize> = divisions.iter().map(|d| d + 1).collect();
    let vid = |idx: &[usize]| -> usize {
        let mut id = 0;
        for k in (0..dim).rev() {
            id = id * np[k] + idx[k];
        }
        id
    };
    let total: usize = np.iter().product();
    let mut vertices = Vec::with_capacity(total);
    for id in 0..total {
        let mut rem = id;
        let mut p = [0.0; 3];
        for k in 0..dim {
            p[k] = lengths[k] * (rem % np[k]) as f64 / divisions[k] as f64;
            rem /= np[k];
        }
        vertices.push(p);
    }

    // Kuhn subdivision: one simplex per permutation of the axes.
    let perms: Vec<Vec<usize>> = if dim == 2 {
        vec![vec![0, 1], vec![1, 0]]
    } else {
        vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ]
    };
    let ncells: usize = divisions.iter().product();
    let mut cells = Vec::with_capacity(ncells * perms.len());
    for cid in 0..ncells {
        let mut rem = cid;
        let mut base = vec![0; dim];
        for k in 0..dim {
            base[k] = rem % divisions[k];
            rem /= divisions[k];
        }
        // Mirrored cells keep the triangulation symmetric about the midplanes.
        let flip: Vec<bool> = (0..dim)
            .map(|k| mirror && 2 * base[k] >= divisions[k])
            .collect();
        for perm in &perms {
            let mut bits = vec![0usize; dim];
            let mut simplex = Vec::with_capacity(dim + 1);
            for step in 0..=dim {
                if step > 0 {
                    bits[perm[step - 1]] = 1;
                }
                let idx: Vec<usize> = (0..dim)
                    .map(|k| base[k] + if flip[k] { 1 - bits[k] } else { bits[k] })
                    .collect();
                simplex.push(vid(&idx));
            }
            cells.push(simplex);
        }
    }
    let mut mesh = Mesh::new(dim, vertices, cells)?;
    if dim == 3 {
        let tol = 1e-12 * lengths[0];
        mesh.tag_boundary(|c, _| {
            if c[0].abs() < tol {
                DIRICHLET.into()
            } else {
                FREE.into()
            }
        });
    }
    Ok(mesh)
}

/// Kuhn-subdivided box `(0,L1)×…×(0,Ld)`.
///
/// In 3D the faces at `X = 0` are tagged [`DIRICHLET`] and all other boundary
/// faces [`FREE`]. In 2D all boundary faces are [`DIRICHLET`].
pub fn box_mesh(lengths: &[f64], divisions: &[usize]) -> Result<Mesh> {
    box_mesh_impl(lengths, divisions, false)
}

/// Like [`box_mesh`], but the hex cells in the upper half of every axis are
/// mirrored, so the mesh is invariant under the reflections about the
/// midplanes (exactly so when every division count is even).
pub fn symmetric_box_mesh(lengths: &[f64], divisions: &[usize]) -> Result<Mesh> {
    box_mesh_impl(lengths, divisions, true)
}
