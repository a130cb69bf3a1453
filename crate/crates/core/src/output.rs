//! VTK legacy ASCII writer.
//!
//! Files follow the version 3.0 legacy format with an `UNSTRUCTURED_GRID`
//! dataset. Triangles are written with cell type 5, tetrahedra with 10.
//! Scalar fields become `SCALARS`, fields with two or three components become
//! `VECTORS` (two-component data is padded with a zero). Numbers use Rust's
//! shortest round-trip formatting, so identical data gives identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::FunctionSpace;
use crate::mesh::{Mesh, Point};
use crate::verification::vertex_values;

#[derive(Debug, Clone, PartialEq)]
struct Field {
    name: String,
    components: usize,
    data: Vec<f64>,
}

/// A mesh with point and cell fields, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkDataset {
    title: String,
    dim: usize,
    points: Vec<Point>,
    cells: Vec<Vec<usize>>,
    /// Source cell of each exploded point, `None` for a plain dataset.
    exploded_from: Option<Vec<(usize, usize)>>,
    point_fields: Vec<Field>,
    cell_fields: Vec<Field>,
}

impl VtkDataset {
    /// The mesh itself: one point per vertex.
    pub fn new(mesh: &Mesh, title: &str) -> Self {
        VtkDataset {
            title: title.to_string(),
            dim: mesh.dim(),
            points: mesh.vertices().to_vec(),
            cells: mesh.cells().to_vec(),
            exploded_from: None,
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
        }
    }

    /// Every cell gets its own copies of its vertices, so discontinuous
    /// fields can be written as point data without averaging.
    pub fn exploded(mesh: &Mesh, title: &str) -> Self {
        let mut points = Vec::new();
        let mut cells = Vec::new();
        let mut from = Vec::new();
        for (c, verts) in mesh.cells().iter().enumerate() {
            let start = points.len();
            for (a, &v) in verts.iter().enumerate() {
                points.push(mesh.vertices()[v]);
                from.push((c, a));
            }
            cells.push((start..start + verts.len()).collect());
        }
        VtkDataset {
            title: title.to_string(),
            dim: mesh.dim(),
            points,
            cells,
            exploded_from: Some(from),
            point_fields: Vec::new(),
            cell_fields: Vec::new(),
        }
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn check_name(name: &str) -> Result<()> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!(
                "VTK field name `{name}` must be a non-empty word"
            )));
        }
        Ok(())
    }

    fn check_components(components: usize) -> Result<()> {
        if !(1..=3).contains(&components) {
            return Err(Error::InvalidParameter(format!(
                "fields need 1 to 3 components, got {components}"
            )));
        }
        Ok(())
    }

    /// Adds point data, `components` values per point.
    pub fn point_field(
        &mut self,
        name: &str,
        components: usize,
        data: Vec<f64>,
    ) -> Result<&mut Self> {
        Self::check_name(name)?;
        Self::check_components(components)?;
        if data.len() != components * self.points.len() {
            return Err(Error::SizeMismatch(format!(
                "point field `{name}` has {} values, expected {}",
                data.len(),
                components * self.points.len()
            )));
        }
        self.point_fields.push(Field {
            name: name.to_string(),
            components,
            data,
        });
        Ok(self)
    }

    /// Adds cell data, `components` values per cell.
    pub fn cell_field(
        &mut self,
        name: &str,
        components: usize,
        data: Vec<f64>,
    ) -> Result<&mut Self> {
        Self::check_name(name)?;
        Self::check_components(components)?;
        if data.len() != components * self.cells.len() {
            return Err(Error::SizeMismatch(format!(
                "cell field `{name}` has {} values, expected {}",
                data.len(),
                components * self.cells.len()
            )));
        }
        self.cell_fields.push(Field {
            name: name.to_string(),
            components,
            data,
        });
        Ok(self)
    }

    /// Adds a P1 field of `space`. On a plain dataset continuous fields become
    /// point data and discontinuous ones cell data (per-cell averages of the
    /// nodal values); on an exploded dataset both become point data.
    pub fn p1_field(&mut self, name: &str, space: &FunctionSpace, u: &[f64]) -> Result<&mut Self> {
        if space.degree != 1 {
            return Err(Error::UnsupportedDegree(space.degree));
        }
        if u.len() != space.total_dofs() {
            return Err(Error::SizeMismatch(format!(
                "field `{name}` does not match its space"
            )));
        }
        let vd = space.value_dim;
        if let Some(from) = &self.exploded_from {
            let data = from
                .iter()
                .flat_map(|&(c, a)| (0..vd).map(move |k| u[space.cell_dofs(c)[a * vd + k]]))
                .collect();
            return self.point_field(name, vd, data);
        }
        match space.kind {
            crate::fem::SpaceKind::Continuous => {
                let data = u.to_vec();
                self.point_field(name, vd, data)
            }
            crate::fem::SpaceKind::Discontinuous => {
                let n = space.nodes_per_cell as f64;
                let data = (0..self.cells.len())
                    .flat_map(|c| {
                        (0..vd).map(move |k| {
                            (0..space.nodes_per_cell)
                                .map(|a| u[space.cell_dofs(c)[a * vd + k]])
                                .sum::<f64>()
                                / n
                        })
                    })
                    .collect();
                self.cell_field(name, vd, data)
            }
        }
    }

    /// Moves the points by a displacement field of `space` (vertex-averaged
    /// for discontinuous fields on a plain dataset).
    pub fn displace(&mut self, mesh: &Mesh, space: &FunctionSpace, u: &[f64]) -> Result<&mut Self> {
        let vd = space.value_dim;
        if vd != mesh.dim() || u.len() != space.total_dofs() {
            return Err(Error::SizeMismatch(
                "displacement does not match the mesh".into(),
            ));
        }
        let values: Vec<f64> = match &self.exploded_from {
            Some(from) => from
                .iter()
                .flat_map(|&(c, a)| (0..vd).map(move |k| u[space.cell_dofs(c)[a * vd + k]]))
                .collect(),
            None => vertex_values(mesh, space, u),
        };
        for (p, d) in self.points.iter_mut().zip(values.chunks(vd)) {
            for k in 0..vd {
                p[k] += d[k];
            }
        }
        Ok(self)
    }

    fn write_fields(out: &mut String, fields: &[Field]) {
        for f in fields {
            if f.components == 1 {
                writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name)
                    .expect("string write");
                for v in &f.data {
                    writeln!(out, "{v:?}").expect("string write");
                }
            } else {
                writeln!(out, "VECTORS {} double", f.name).expect("string write");
                for c in f.data.chunks(f.components) {
                    let z = if f.components == 3 { c[2] } else { 0.0 };
                    writeln!(out, "{:?} {:?} {:?}", c[0], c[1], z).expect("string write");
                }
            }
        }
    }

    pub fn to_vtk_string(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "# vtk DataFile Version 3.0").expect("string write");
        writeln!(w, "{}", self.title.lines().next().unwrap_or("")).expect("string write");
        writeln!(w, "ASCII\nDATASET UNSTRUCTURED_GRID").expect("string write");
        writeln!(w, "POINTS {} double", self.points.len()).expect("string write");
        for p in &self.points {
            writeln!(w, "{:?} {:?} {:?}", p[0], p[1], p[2]).expect("string write");
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        writeln!(w, "CELLS {} {size}", self.cells.len()).expect("string write");
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{} {}", c.len(), ids.join(" ")).expect("string write");
        }
        let cell_type = if self.dim == 2 { 5 } else { 10 };
        writeln!(w, "CELL_TYPES {}", self.cells.len()).expect("string write");
        for _ in &self.cells {
            writeln!(w, "{cell_type}").expect("string write");
        }
        if !self.point_fields.is_empty() {
            writeln!(w, "POINT_DATA {}", self.points.len()).expect("string write");
            Self::write_fields(w, &self.point_fields);
        }
        if !self.cell_fields.is_empty() {
            writeln!(w, "CELL_DATA {}", self.cells.len()).expect("string write");
            Self::write_fields(w, &self.cell_fields);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_vtk_string())?;
        Ok(())
    }
}
