//! Reference-element machinery: Lagrange bases on simplices, quadrature and
//! degree-of-freedom maps for discontinuous and continuous spaces.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Measure of the reference simplex in `dim` dimensions.
pub fn reference_measure(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 1.0,
        2 => 0.5,
        3 => 1.0 / 6.0,
        _ => f64::NAN,
    }
}

/// Quadrature rule on the reference simplex. Points are barycentric
/// (`dim + 1` coordinates); weights sum to [`reference_measure`].
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn gauss_legendre_01(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (Vec<f64>, Vec<f64>) = match m {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        _ => {
            let a = 0.339_981_043_584_856_26;
            let b = 0.861_136_311_594_052_6;
            let wa = 0.652_145_154_862_546_1;
            let wb = 0.347_854_845_137_453_9;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
    };
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|t| 0.5 * t).collect(),
    )
}

fn symmetric_triangle_orbit(a: f64) -> Vec<Vec<f64>> {
    let b = 1.0 - 2.0 * a;
    vec![vec![a, a, b], vec![a, b, a], vec![b, a, a]]
}

/// Quadrature rule of the given exactness degree (1 to 4) on the reference
/// segment (`dim = 1`), triangle or tetrahedron.
pub fn quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if !(1..=4).contains(&degree) || !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedQuadrature { dim, degree });
    }
    let (points, weights) = match (dim, degree) {
        (1, _) => {
            let (x, w) = gauss_legendre_01(degree / 2 + 1);
            (x.iter().map(|&t| vec![1.0 - t, t]).collect(), w)
        }
        (2, 1) => (vec![vec![1.0 / 3.0; 3]], vec![0.5]),
        (2, 2) => (symmetric_triangle_orbit(1.0 / 6.0), vec![1.0 / 6.0; 3]),
        (2, _) => {
            // Six-point rule exact for degree 4.
            let mut pts = symmetric_triangle_orbit(0.445_948_490_915_964_9);
            pts.extend(symmetric_triangle_orbit(0.091_576_213_509_770_74));
            let w1 = 0.223_381_589_678_011_47 * 0.5;
            let w2 = 0.109_951_743_655_321_87 * 0.5;
            (pts, vec![w1, w1, w1, w2, w2, w2])
        }
        (3, 1) => (vec![vec![0.25; 4]], vec![1.0 / 6.0]),
        (3, 2) => {
            let b = (5.0 - 5f64.sqrt()) / 20.0;
            let a = 1.0 - 3.0 * b;
            let pts = (0..4)
                .map(|k| (0..4).map(|i| if i == k { a } else { b }).collect())
                .collect();
            (pts, vec![1.0 / 24.0; 4])
        }
        (3, _) => {
            // Collapsed (Duffy) tensor-product Gauss rule.
            let m = (degree + 4) / 2;
            let (x, w) = gauss_legendre_01(m);
            let mut pts = Vec::with_capacity(m * m * m);
            let mut wts = Vec::with_capacity(m * m * m);
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    for (t, wt) in x.iter().zip(&w) {
                        let px = u * (1.0 - v) * (1.0 - t);
                        let py = v * (1.0 - t);
                        let pz = *t;
                        pts.push(vec![1.0 - px - py - pz, px, py, pz]);
                        wts.push(wu * wv * wt * (1.0 - v) * (1.0 - t) * (1.0 - t));
                    }
                }
            }
            (pts, wts)
        }
        _ => unreachable!(),
    };
    Ok(QuadratureRule {
        dim,
        degree,
        points,
        weights,
    })
}

/// Affine geometry of a simplex cell: vertices, measure and the constant
/// gradients of the barycentric coordinates.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub measure: f64,
    pub grad_lambda: Vec<Point>,
    inv_jac: Matrix3<f64>,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Self {
        let dim = mesh.dim();
        let vertices = mesh.cell_points(cell);
        let v0 = vertices[0];
        let mut inv_jac = Matrix3::identity();
        if dim == 2 {
            let j = Matrix2::new(
                vertices[1][0] - v0[0],
                vertices[2][0] - v0[0],
                vertices[1][1] - v0[1],
                vertices[2][1] - v0[1],
            );
            let inv = j.try_inverse().expect("mesh cells are non-degenerate");
            inv_jac.fixed_view_mut::<2, 2>(0, 0).copy_from(&inv);
            inv_jac[(2, 2)] = 0.0;
        } else {
            let j = Matrix3::from_fn(|r, c| vertices[c + 1][r] - v0[r]);
            inv_jac = j.try_inverse().expect("mesh cells are non-degenerate");
        }
        let mut grad_lambda = vec![[0.0; 3]; dim + 1];
        for i in 0..dim {
            for k in 0..dim {
                grad_lambda[i + 1][k] = inv_jac[(i, k)];
                grad_lambda[0][k] -= inv_jac[(i, k)];
            }
        }
        CellGeometry {
            dim,
            measure: mesh.cell_measure(cell).expect("valid cell index"),
            vertices,
            grad_lambda,
            inv_jac,
        }
    }

    pub fn to_physical(&self, bary: &[f64]) -> Point {
        let mut x = [0.0; 3];
        for (l, v) in bary.iter().zip(&self.vertices) {
            for k in 0..3 {
                x[k] += l * v[k];
            }
        }
        x
    }

    pub fn to_barycentric(&self, x: &Point) -> Vec<f64> {
        let d = self.dim;
        let v0 = self.vertices[0];
        let mut bary = vec![0.0; d + 1];
        if d == 2 {
            let r = Vector2::new(x[0] - v0[0], x[1] - v0[1]);
            let inv = self.inv_jac.fixed_view::<2, 2>(0, 0);
            let l = inv * r;
            bary[1] = l[0];
            bary[2] = l[1];
        } else {
            let r = Vector3::new(x[0] - v0[0], x[1] - v0[1], x[2] - v0[2]);
            let l = self.inv_jac * r;
            bary[1] = l[0];
            bary[2] = l[1];
            bary[3] = l[2];
        }
        bary[0] = 1.0 - bary[1..].iter().sum::<f64>();
        bary
    }

    /// Quadrature points of `rule` mapped to the cell: `(barycentric, x, weight)`.
    pub fn quadrature_points(&self, rule: &QuadratureRule) -> Vec<(Vec<f64>, Point, f64)> {
        let scale = self.measure / reference_measure(self.dim);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| (p.clone(), self.to_physical(p), w * scale))
            .collect()
    }
}

/// Quadrature points on face `face`: physical point and weight.
pub fn face_quadrature(mesh: &Mesh, face: usize, rule: &QuadratureRule) -> Vec<(Point, f64)> {
    let f = &mesh.faces()[face];
    let pts: Vec<Point> = f.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
    let scale = f.measure / reference_measure(mesh.dim() - 1);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(b, w)| {
            let mut x = [0.0; 3];
            for (l, p) in b.iter().zip(&pts) {
                for k in 0..3 {
                    x[k] += l * p[k];
                }
            }
            (x, w * scale)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Piecewise polynomials with no inter-element continuity.
    Discontinuous,
    /// Conforming, vertex-continuous P1.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Scalar shape-function values and physical gradients at one point.
#[derive(Debug, Clone, Default)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

/// Number of scalar Lagrange nodes of degree `degree` on a `dim`-simplex.
pub fn local_node_count(dim: usize, degree: usize) -> usize {
    match (dim, degree) {
        (_, 1) => dim + 1,
        (2, 2) => 6,
        (3, 2) => 10,
        _ => 0,
    }
}

fn edge_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..=dim {
        for j in i + 1..=dim {
            e.push((i, j));
        }
    }
    e
}

/// Evaluates the Lagrange basis of degree 1 or 2 on a cell at barycentric point `bary`.
pub fn lagrange_basis(geom: &CellGeometry, degree: usize, bary: &[f64]) -> ShapeValues {
    let d = geom.dim;
    let gl = &geom.grad_lambda;
    match degree {
        1 => ShapeValues {
            values: bary.to_vec(),
            grads: gl.clone(),
        },
        _ => {
            let mut values = Vec::with_capacity(local_node_count(d, 2));
            let mut grads = Vec::with_capacity(local_node_count(d, 2));
            for i in 0..=d {
                values.push(bary[i] * (2.0 * bary[i] - 1.0));
                let s = 4.0 * bary[i] - 1.0;
                grads.push([s * gl[i][0], s * gl[i][1], s * gl[i][2]]);
            }
            for (i, j) in edge_pairs(d) {
                values.push(4.0 * bary[i] * bary[j]);
                let g = [
                    4.0 * (bary[i] * gl[j][0] + bary[j] * gl[i][0]),
                    4.0 * (bary[i] * gl[j][1] + bary[j] * gl[i][1]),
                    4.0 * (bary[i] * gl[j][2] + bary[j] * gl[i][2]),
                ];
                grads.push(g);
            }
            ShapeValues { values, grads }
        }
    }
}

/// Barycentric coordinates of the local Lagrange nodes.
pub fn lagrange_nodes(dim: usize, degree: usize) -> Vec<Vec<f64>> {
    let mut nodes: Vec<Vec<f64>> = (0..=dim)
        .map(|i| (0..=dim).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
        .collect();
    if degree == 2 {
        for (i, j) in edge_pairs(dim) {
            nodes.push(
                (0..=dim)
                    .map(|k| if k == i || k == j { 0.5 } else { 0.0 })
                    .collect(),
            );
        }
    }
    nodes
}

/// A scalar or vector Lagrange space on a mesh.
///
/// Vector spaces stack `value_dim` scalar spaces with interleaved ordering:
/// local DOF `a * value_dim + c` is component `c` of node `a`.
#[derive(Debug, Clone)]
pub struct FunctionSpace {
    pub kind: SpaceKind,
    pub degree: usize,
    pub value_dim: usize,
    pub nodes_per_cell: usize,
    dof_map: Vec<Vec<usize>>,
    total_dofs: usize,
}

impl FunctionSpace {
    pub fn new(mesh: &Mesh, kind: SpaceKind, degree: usize, value_dim: usize) -> Result<Self> {
        if value_dim == 0 {
            return Err(Error::InvalidParameter("value_dim must be positive".into()));
        }
        let d = mesh.dim();
        let ok = match kind {
            SpaceKind::Discontinuous => degree == 1 || degree == 2,
            SpaceKind::Continuous => degree == 1,
        };
        if !ok {
            return Err(Error::UnsupportedDegree(degree));
        }
        let nodes = local_node_count(d, degree);
        let ldofs = nodes * value_dim;
        let (dof_map, total_dofs) = match kind {
            SpaceKind::Discontinuous => (
                (0..mesh.num_cells())
                    .map(|c| (0..ldofs).map(|l| c * ldofs + l).collect())
                    .collect(),
                mesh.num_cells() * ldofs,
            ),
            SpaceKind::Continuous => (
                mesh.cells()
                    .iter()
                    .map(|cell| {
                        let mut m = Vec::with_capacity(ldofs);
                        for &v in cell {
                            for c in 0..value_dim {
                                m.push(v * value_dim + c);
                            }
                        }
                        m
                    })
                    .collect(),
                mesh.num_vertices() * value_dim,
            ),
        };
        Ok(FunctionSpace {
            kind,
            degree,
            value_dim,
            nodes_per_cell: nodes,
            dof_map,
            total_dofs,
        })
    }

    pub fn dg(mesh: &Mesh, value_dim: usize) -> Self {
        Self::new(mesh, SpaceKind::Discontinuous, 1, value_dim).expect("P1 is supported")
    }

    pub fn cg(mesh: &Mesh, value_dim: usize) -> Self {
        Self::new(mesh, SpaceKind::Continuous, 1, value_dim).expect("P1 is supported")
    }

    pub fn total_dofs(&self) -> usize {
        self.total_dofs
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.dof_map[cell]
    }

    pub fn local_dofs(&self) -> usize {
        self.nodes_per_cell * self.value_dim
    }

    /// Interpolates `f` at the Lagrange nodes.
    pub fn interpolate<F>(&self, mesh: &Mesh, f: F) -> Vec<f64>
    where
        F: Fn(&Point) -> Vec<f64>,
    {
        let mut u = vec![0.0; self.total_dofs];
        let nodes = lagrange_nodes(mesh.dim(), self.degree);
        for cell in 0..mesh.num_cells() {
            let geom = CellGeometry::new(mesh, cell);
            let dofs = self.cell_dofs(cell);
            for (a, node) in nodes.iter().enumerate() {
                let val = f(&geom.to_physical(node));
                for c in 0..self.value_dim {
                    u[dofs[a * self.value_dim + c]] = val[c];
                }
            }
        }
        u
    }

    /// Value and gradient of component `comp` of field `u` from shape values.
    pub fn eval_component(
        &self,
        u: &[f64],
        cell: usize,
        shape: &ShapeValues,
        comp: usize,
    ) -> (f64, Point) {
        let dofs = self.cell_dofs(cell);
        let mut val = 0.0;
        let mut grad = [0.0; 3];
        for (a, (phi, g)) in shape.values.iter().zip(&shape.grads).enumerate() {
            let coef = u[dofs[a * self.value_dim + comp]];
            val += coef * phi;
            for k in 0..3 {
                grad[k] += coef * g[k];
            }
        }
        (val, grad)
    }

    /// Displacement gradient `H_{iJ} = ∂u_i/∂X_J` of a vector field.
    pub fn eval_gradient_tensor(
        &self,
        u: &[f64],
        cell: usize,
        shape: &ShapeValues,
    ) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        for i in 0..self.value_dim.min(3) {
            let (_, g) = self.eval_component(u, cell, shape, i);
            for j in 0..3 {
                h[(i, j)] = g[j];
            }
        }
        h
    }
}

/// Shape values of `space` on cell `cell` at barycentric point `bary`.
pub fn basis_eval(space: &FunctionSpace, mesh: &Mesh, cell: usize, bary: &[f64]) -> ShapeValues {
    let geom = CellGeometry::new(mesh, cell);
    lagrange_basis(&geom, space.degree, bary)
}

/// One-sided trace of the basis of the cell on `side` of `face` at physical
/// point `x` on the face. Returns the adjacent cell and its shape values.
pub fn trace_eval(
    space: &FunctionSpace,
    mesh: &Mesh,
    face: usize,
    side: Side,
    x: &Point,
) -> Result<(usize, ShapeValues)> {
    let f = &mesh.faces()[face];
    let cell = match side {
        Side::Plus => f.plus.cell,
        Side::Minus => f.minus.ok_or(Error::NoMinusTrace(face))?.cell,
    };
    let geom = CellGeometry::new(mesh, cell);
    let bary = geom.to_barycentric(x);
    Ok((cell, lagrange_basis(&geom, space.degree, &bary)))
}

/// Jump `v+ - v-`; on boundary faces `v+`.
pub fn jump(plus: f64, minus: Option<f64>) -> f64 {
    match minus {
        Some(m) => plus - m,
        None => plus,
    }
}

/// Average `(v+ + v-)/2`; on boundary faces `v+`.
pub fn average(plus: f64, minus: Option<f64>) -> f64 {
    match minus {
        Some(m) => 0.5 * (plus + m),
        None => plus,
    }
}
