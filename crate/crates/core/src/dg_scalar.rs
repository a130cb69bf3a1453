//! Scalar Nitsche–Newton assembly in 2D.
//!
//! Three forms are provided:
//!
//! * [`assemble_nitsche_linear`]: the linear Nitsche form for `σ = k∇u`,
//!   assembled directly from `k` (boundary terms only on a continuous space,
//!   boundary and interior faces on a discontinuous one);
//! * [`assemble_dg_classical`]: the linearized DG form with averaged
//!   tractions on every face of `ℰ = ℰ_I ∪ ℰ_D`;
//! * [`assemble_dg_hybrid`]: the per-element form using `v - ⟨v⟩` on `∂T`
//!   and element-owned tractions.
//!
//! The right-hand sides are the negative residuals, so a Newton update solves
//! `K ū = b`. Dirichlet data enters through the boundary branch of the jump,
//! `⟦u_n⟧ = u_n⁺ - g`. Local matrices are evaluated on their upper triangle
//! and mirrored, which keeps the assembled tangent exactly symmetric whenever
//! the material tangent is.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;

use crate::assembly::{gather, Local};
use crate::error::{Error, Result};
use crate::fem::{
    face_quadrature, lagrange_basis, quadrature, CellGeometry, FunctionSpace, QuadratureRule,
    ShapeValues, SpaceKind,
};
use crate::materials::ScalarMaterial;
use crate::mesh::{Mesh, Point};
use crate::solver::{NonlinearProblem, SparseSymmetricSystem};

/// Which traction enters the face terms of the classical scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TractionAveraging {
    /// `σ(⟨∇u_n⟩)` and `σ'(⟨∇u_n⟩)`.
    #[default]
    StressOfMean,
    /// `⟨σ(∇u_n)⟩` and `⟨σ'(∇u_n)⟩`.
    MeanOfStress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalarScheme {
    #[default]
    Classical,
    Hybrid,
}

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// A scalar problem `-∇·σ(∇u) = f` in `Ω`, `u = g` on faces tagged
/// `dirichlet`.
#[derive(Clone)]
pub struct ScalarDGProblem {
    pub mesh: Arc<Mesh>,
    pub space: FunctionSpace,
    pub material: Arc<dyn ScalarMaterial>,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub gamma0: f64,
    pub averaging: TractionAveraging,
    pub scheme: ScalarScheme,
    cell_rule: QuadratureRule,
    face_rule: QuadratureRule,
}

impl std::fmt::Debug for ScalarDGProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarDGProblem")
            .field("cells", &self.mesh.num_cells())
            .field("dofs", &self.space.total_dofs())
            .field("gamma0", &self.gamma0)
            .field("averaging", &self.averaging)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl ScalarDGProblem {
    /// Problem on a P1 discontinuous space with zero source and data.
    pub fn new(mesh: Arc<Mesh>, material: Arc<dyn ScalarMaterial>, gamma0: f64) -> Result<Self> {
        let space = FunctionSpace::dg(&mesh, 1);
        Self::with_space(mesh, space, material, gamma0)
    }

    pub fn with_space(
        mesh: Arc<Mesh>,
        space: FunctionSpace,
        material: Arc<dyn ScalarMaterial>,
        gamma0: f64,
    ) -> Result<Self> {
        if mesh.dim() != 2 {
            return Err(Error::InvalidParameter(
                "scalar problems are two-dimensional".into(),
            ));
        }
        if space.value_dim != 1 {
            return Err(Error::InvalidParameter(
                "scalar problems need a scalar space".into(),
            ));
        }
        if !(gamma0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {gamma0}"
            )));
        }
        let q = 2 * space.degree;
        Ok(ScalarDGProblem {
            mesh,
            space,
            material,
            source: Arc::new(|_| 0.0),
            dirichlet: Arc::new(|_| 0.0),
            gamma0,
            averaging: TractionAveraging::default(),
            scheme: ScalarScheme::default(),
            cell_rule: quadrature(2, q.max(2))?,
            face_rule: quadrature(1, q.max(2))?,
        })
    }

    pub fn with_source(mut self, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    pub fn with_dirichlet(mut self, g: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    pub fn with_scheme(mut self, scheme: ScalarScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_averaging(mut self, averaging: TractionAveraging) -> Self {
        self.averaging = averaging;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        Ok(())
    }

    /// Faces that carry DG terms: interior faces of a discontinuous space and
    /// Dirichlet boundary faces.
    fn active_faces(&self) -> Vec<usize> {
        let dg = self.space.kind == SpaceKind::Discontinuous;
        self.mesh
            .faces()
            .iter()
            .enumerate()
            .filter(|(i, f)| {
                if f.is_boundary() {
                    self.mesh.is_dirichlet(*i)
                } else {
                    dg
                }
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cell_rule(&self) -> &QuadratureRule {
        &self.cell_rule
    }
}

impl NonlinearProblem for ScalarDGProblem {
    fn num_dofs(&self) -> usize {
        self.space.total_dofs()
    }

    fn assemble(&self, u: &[f64], load_factor: f64) -> Result<SparseSymmetricSystem> {
        match self.scheme {
            ScalarScheme::Classical => assemble_dg_classical_scaled(self, u, load_factor),
            ScalarScheme::Hybrid => assemble_dg_hybrid_scaled(self, u, load_factor),
        }
    }
}

fn v2(g: &Point) -> Vector2<f64> {
    Vector2::new(g[0], g[1])
}

fn n2(n: &Point) -> Vector2<f64> {
    Vector2::new(n[0], n[1])
}

/// Cell terms `(σ'_n ∇ū, ∇v)_T` and `(f, v)_T - (σ_n, ∇v)_T`.
fn cell_local(p: &ScalarDGProblem, u: &[f64], load: f64, cell: usize) -> Local {
    let geom = CellGeometry::new(&p.mesh, cell);
    let mut local = Local::new(p.space.cell_dofs(cell).to_vec());
    for (bary, x, w) in geom.quadrature_points(&p.cell_rule) {
        let sh = lagrange_basis(&geom, p.space.degree, &bary);
        let (_, g) = p.space.eval_component(u, cell, &sh, 0);
        let g = v2(&g);
        let sigma = p.material.stress(&g);
        let tangent = p.material.tangent(&g);
        let f = load * (p.source)(&x);
        let grads: Vec<Vector2<f64>> = sh.grads.iter().map(v2).collect();
        let tg: Vec<Vector2<f64>> = grads.iter().map(|gq| tangent * gq).collect();
        local.add_upper(|a, b| w * grads[a].dot(&tg[b]));
        for (a, phi) in sh.values.iter().enumerate() {
            local.rhs[a] += w * (f * phi - sigma.dot(&grads[a]));
        }
    }
    local.mirror();
    local
}

/// Trace data of one side at a face point.
struct SideTrace {
    shape: ShapeValues,
    value: f64,
    grad: Vector2<f64>,
}

fn side_trace(p: &ScalarDGProblem, u: &[f64], cell: usize, x: &Point) -> SideTrace {
    let geom = CellGeometry::new(&p.mesh, cell);
    let bary = geom.to_barycentric(x);
    let shape = lagrange_basis(&geom, p.space.degree, &bary);
    let (value, grad) = p.space.eval_component(u, cell, &shape, 0);
    SideTrace {
        shape,
        value,
        grad: v2(&grad),
    }
}

/// Shared face-point coefficients: for every local DOF `p`, the test jump
/// `j_p` and the linearized traction `t_p = n·σ'⟨∇φ_p⟩`.
fn face_local(p: &ScalarDGProblem, u: &[f64], load: f64, face: usize) -> Local {
    let mesh = &p.mesh;
    let f = &mesh.faces()[face];
    let n = n2(&f.normal);
    let penalty = p.gamma0 / f.h;
    let plus_dofs = p.space.cell_dofs(f.plus.cell);
    let mut dofs = plus_dofs.to_vec();
    if let Some(m) = f.minus {
        dofs.extend_from_slice(p.space.cell_dofs(m.cell));
    }
    let np = plus_dofs.len();
    let mut local = Local::new(dofs);
    let m = local.dofs.len();
    let mut jumps = vec![0.0; m];
    let mut tractions = vec![0.0; m];

    for (x, w) in face_quadrature(mesh, face, &p.face_rule) {
        let plus = side_trace(p, u, f.plus.cell, &x);
        let minus = f.minus.map(|s| side_trace(p, u, s.cell, &x));
        let (half, jump_un) = match &minus {
            Some(mi) => (0.5, plus.value - mi.value),
            None => (1.0, plus.value - load * (p.dirichlet)(&x)),
        };

        // Traction of u_n and the tangents acting on each side's gradients.
        let (traction_un, t_plus, t_minus) = match (p.averaging, &minus) {
            (TractionAveraging::StressOfMean, Some(mi)) => {
                let gbar = (plus.grad + mi.grad) * 0.5;
                let t = p.material.tangent(&gbar);
                (n.dot(&p.material.stress(&gbar)), t, t)
            }
            (TractionAveraging::MeanOfStress, Some(mi)) => {
                let s = (p.material.stress(&plus.grad) + p.material.stress(&mi.grad)) * 0.5;
                (
                    n.dot(&s),
                    p.material.tangent(&plus.grad),
                    p.material.tangent(&mi.grad),
                )
            }
            (_, None) => {
                let t = p.material.tangent(&plus.grad);
                (n.dot(&p.material.stress(&plus.grad)), t, Matrix2::zeros())
            }
        };

        let nt_plus = t_plus.transpose() * n;
        for a in 0..np {
            jumps[a] = plus.shape.values[a];
            tractions[a] = half * nt_plus.dot(&v2(&plus.shape.grads[a]));
        }
        if let Some(mi) = &minus {
            let nt_minus = t_minus.transpose() * n;
            for a in 0..m - np {
                jumps[np + a] = -mi.shape.values[a];
                tractions[np + a] = half * nt_minus.dot(&v2(&mi.shape.grads[a]));
            }
        }
        local.add_upper(|a, b| {
            w * (penalty * jumps[a] * jumps[b]
                - (jumps[a] * tractions[b] + jumps[b] * tractions[a]))
        });
        for a in 0..m {
            local.rhs[a] +=
                w * (traction_un * jumps[a] - jump_un * (penalty * jumps[a] - tractions[a]));
        }
    }
    local.mirror();
    local
}

fn assemble_dg_classical_scaled(
    p: &ScalarDGProblem,
    u: &[f64],
    load: f64,
) -> Result<SparseSymmetricSystem> {
    p.check()?;
    check_len(p, u)?;
    let cells: Vec<Local> = (0..p.mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_local(p, u, load, c))
        .collect();
    let faces: Vec<Local> = p
        .active_faces()
        .into_par_iter()
        .map(|f| face_local(p, u, load, f))
        .collect();
    let mut all = cells;
    all.extend(faces);
    Ok(gather(p.space.total_dofs(), all))
}

fn check_len(p: &ScalarDGProblem, u: &[f64]) -> Result<()> {
    if u.len() != p.space.total_dofs() {
        return Err(Error::SizeMismatch(format!(
            "field has {} entries, space has {} DOFs",
            u.len(),
            p.space.total_dofs()
        )));
    }
    Ok(())
}

/// Tangent `A_h^n` and right-hand side of the classical DG Nitsche–Newton
/// step at `u_n`.
pub fn assemble_dg_classical(
    problem: &ScalarDGProblem,
    u_n: &[f64],
) -> Result<SparseSymmetricSystem> {
    assemble_dg_classical_scaled(problem, u_n, 1.0)
}

/// Per-element contributions of cell `cell`'s boundary, face `face`.
fn hybrid_face_local(p: &ScalarDGProblem, u: &[f64], load: f64, cell: usize, face: usize) -> Local {
    let mesh = &p.mesh;
    let f = &mesh.faces()[face];
    let is_plus = f.plus.cell == cell;
    let neighbor = if is_plus {
        f.minus.map(|s| s.cell)
    } else {
        Some(f.plus.cell)
    };
    let n_t = if is_plus {
        n2(&f.normal)
    } else {
        -n2(&f.normal)
    };
    let h_t = mesh.cell_measure(cell).expect("valid cell") / f.measure;
    let penalty = p.gamma0 / h_t;

    let own_dofs = p.space.cell_dofs(cell);
    let no = own_dofs.len();
    let mut dofs = own_dofs.to_vec();
    if let Some(nb) = neighbor {
        dofs.extend_from_slice(p.space.cell_dofs(nb));
    }
    let mut local = Local::new(dofs);
    let m = local.dofs.len();
    let mut d = vec![0.0; m];
    let mut t = vec![0.0; m];

    for (x, w) in face_quadrature(mesh, face, &p.face_rule) {
        let own = side_trace(p, u, cell, &x);
        let other = neighbor.map(|nb| side_trace(p, u, nb, &x));
        // u_n - ⟨u_n⟩; on the Dirichlet boundary ⟨u⟩ is the data g.
        let (own_weight, diff_un) = match &other {
            Some(o) => (0.5, 0.5 * (own.value - o.value)),
            None => (1.0, own.value - load * (p.dirichlet)(&x)),
        };
        let tangent = p.material.tangent(&own.grad);
        let traction_un = n_t.dot(&p.material.stress(&own.grad));
        let nt = tangent.transpose() * n_t;
        for a in 0..no {
            d[a] = own_weight * own.shape.values[a];
            t[a] = nt.dot(&v2(&own.shape.grads[a]));
        }
        if let Some(o) = &other {
            for a in 0..m - no {
                d[no + a] = -0.5 * o.shape.values[a];
                t[no + a] = 0.0;
            }
        }
        local.add_upper(|a, b| w * (penalty * d[a] * d[b] - (t[a] * d[b] + t[b] * d[a])));
        for a in 0..m {
            local.rhs[a] += w * (traction_un * d[a] - diff_un * (penalty * d[a] - t[a]));
        }
    }
    local.mirror();
    local
}

fn assemble_dg_hybrid_scaled(
    p: &ScalarDGProblem,
    u: &[f64],
    load: f64,
) -> Result<SparseSymmetricSystem> {
    p.check()?;
    check_len(p, u)?;
    let mesh = &p.mesh;
    let pairs: Vec<(usize, usize)> = (0..mesh.num_cells())
        .flat_map(|c| {
            mesh.cell_faces(c)
                .iter()
                .copied()
                .filter(|&fi| !mesh.faces()[fi].is_boundary() || mesh.is_dirichlet(fi))
                .map(move |fi| (c, fi))
                .collect::<Vec<_>>()
        })
        .collect();
    let cells: Vec<Local> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_local(p, u, load, c))
        .collect();
    let faces: Vec<Local> = pairs
        .into_par_iter()
        .map(|(c, fi)| hybrid_face_local(p, u, load, c, fi))
        .collect();
    let mut all = cells;
    all.extend(faces);
    Ok(gather(p.space.total_dofs(), all))
}

/// Tangent `Â_h^n` and right-hand side of the hybridized DG step at `u_n`.
pub fn assemble_dg_hybrid(problem: &ScalarDGProblem, u_n: &[f64]) -> Result<SparseSymmetricSystem> {
    assemble_dg_hybrid_scaled(problem, u_n, 1.0)
}

/// Linear Nitsche system for `σ = k∇u`, assembled directly from `k`:
///
/// ```text
/// (k∇u,∇v) - (k n·∇u, v)_E - (u, k n·∇v)_E + (γ0/h u, v)_E = (f,v) + (g, γ0/h v - k n·∇v)_∂Ω
/// ```
///
/// with jumps and averages on interior faces of a discontinuous space.
pub fn assemble_nitsche_linear(problem: &ScalarDGProblem) -> Result<SparseSymmetricSystem> {
    problem.check()?;
    if !problem.material.is_linear() {
        return Err(Error::InvalidParameter(
            "linear Nitsche assembly needs a linear material".into(),
        ));
    }
    let k = problem.material.stiffness_scale();
    let p = problem;
    let mesh = &p.mesh;
    let degree = p.space.degree;

    let cells: Vec<Local> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let geom = CellGeometry::new(mesh, cell);
            let mut local = Local::new(p.space.cell_dofs(cell).to_vec());
            for (bary, x, w) in geom.quadrature_points(&p.cell_rule) {
                let sh = lagrange_basis(&geom, degree, &bary);
                let f = (p.source)(&x);
                local.add_upper(|a, b| w * k * v2(&sh.grads[a]).dot(&v2(&sh.grads[b])));
                for (a, phi) in sh.values.iter().enumerate() {
                    local.rhs[a] += w * f * phi;
                }
            }
            local.mirror();
            local
        })
        .collect();

    let faces: Vec<Local> = p
        .active_faces()
        .into_par_iter()
        .map(|face| {
            let f = &mesh.faces()[face];
            let n = n2(&f.normal);
            let penalty = p.gamma0 / f.h;
            let mut dofs = p.space.cell_dofs(f.plus.cell).to_vec();
            let np = dofs.len();
            if let Some(s) = f.minus {
                dofs.extend_from_slice(p.space.cell_dofs(s.cell));
            }
            let mut local = Local::new(dofs);
            let m = local.dofs.len();
            for (x, w) in face_quadrature(mesh, face, &p.face_rule) {
                let gp = CellGeometry::new(mesh, f.plus.cell);
                let sp = lagrange_basis(&gp, degree, &gp.to_barycentric(&x));
                let mut jump = vec![0.0; m];
                let mut flux = vec![0.0; m];
                match f.minus {
                    Some(s) => {
                        let gm = CellGeometry::new(mesh, s.cell);
                        let sm = lagrange_basis(&gm, degree, &gm.to_barycentric(&x));
                        for a in 0..np {
                            jump[a] = sp.values[a];
                            flux[a] = 0.5 * k * n.dot(&v2(&sp.grads[a]));
                            jump[np + a] = -sm.values[a];
                            flux[np + a] = 0.5 * k * n.dot(&v2(&sm.grads[a]));
                        }
                    }
                    None => {
                        let g = (p.dirichlet)(&x);
                        for a in 0..np {
                            jump[a] = sp.values[a];
                            flux[a] = k * n.dot(&v2(&sp.grads[a]));
                            local.rhs[a] += w * g * (penalty * jump[a] - flux[a]);
                        }
                    }
                }
                local.add_upper(|a, b| {
                    w * (penalty * jump[a] * jump[b] - (flux[a] * jump[b] + flux[b] * jump[a]))
                });
            }
            local.mirror();
            local
        })
        .collect();

    let mut all = cells;
    all.extend(faces);
    Ok(gather(p.space.total_dofs(), all))
}

/// Which faces enter the inverse inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseFaces {
    /// Dirichlet boundary faces only (conforming Nitsche).
    Dirichlet,
    /// Interior and Dirichlet faces (DG).
    All,
}

/// Per-element inverse-inequality constant: the smallest `C` with
/// `(h σ' ∇v, ∇v)_{∂T ∩ ℰ} <= C (σ' ∇v, ∇v)_T` for all `v` in the local
/// polynomial space, from a dense generalized eigenproblem.
///
/// `tangents[cell]` is the material tangent `σ'_n` of each cell. Elements whose
/// stiffness is singular on a direction the face form sees get `f64::INFINITY`.
pub fn estimate_inverse_constant(
    mesh: &Mesh,
    space: &FunctionSpace,
    tangents: &[Matrix2<f64>],
    faces: InverseFaces,
) -> Result<Vec<f64>> {
    if space.value_dim != 1 || mesh.dim() != 2 {
        return Err(Error::InvalidParameter(
            "inverse constants need a scalar 2D space".into(),
        ));
    }
    if tangents.len() != mesh.num_cells() {
        return Err(Error::SizeMismatch("one tangent per cell required".into()));
    }
    let q = 2 * space.degree;
    let cell_rule = quadrature(2, q.max(1))?;
    let face_rule = quadrature(1, q.max(1))?;
    let nloc = space.nodes_per_cell;

    (0..mesh.num_cells())
        .map(|cell| {
            let geom = CellGeometry::new(mesh, cell);
            let s = &tangents[cell];
            let form = |sh: &ShapeValues, w: f64, m: &mut DMatrix<f64>| {
                for a in 0..nloc {
                    for b in 0..nloc {
                        m[(a, b)] += w * v2(&sh.grads[a]).dot(&(s * v2(&sh.grads[b])));
                    }
                }
            };
            let mut a_mat = DMatrix::zeros(nloc, nloc);
            for (bary, _, w) in geom.quadrature_points(&cell_rule) {
                form(&lagrange_basis(&geom, space.degree, &bary), w, &mut a_mat);
            }
            let mut b_mat = DMatrix::zeros(nloc, nloc);
            for &fi in mesh.cell_faces(cell) {
                let f = &mesh.faces()[fi];
                let include = match faces {
                    InverseFaces::Dirichlet => f.is_boundary() && mesh.is_dirichlet(fi),
                    InverseFaces::All => !f.is_boundary() || mesh.is_dirichlet(fi),
                };
                if !include {
                    continue;
                }
                for (x, w) in face_quadrature(mesh, fi, &face_rule) {
                    form(
                        &lagrange_basis(&geom, space.degree, &geom.to_barycentric(&x)),
                        w * f.h,
                        &mut b_mat,
                    );
                }
            }
            Ok(generalized_max_eigenvalue(&a_mat, &b_mat))
        })
        .collect()
}

/// Largest `λ` with `B x = λ A x`, `x ⟂ ker A`; infinite if `B` does not
/// vanish on `ker A`.
fn generalized_max_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let bscale = b.abs().max();
    if bscale == 0.0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(0.5 * (a + a.transpose()));
    let amax = eig.eigenvalues.abs().max();
    let tol = 1e-10 * amax.max(f64::MIN_POSITIVE);
    let n = a.nrows();
    let range: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    for &i in &null {
        let v = eig.eigenvectors.column(i);
        if (v.transpose() * b * v)[(0, 0)].abs() > 1e-10 * bscale {
            return f64::INFINITY;
        }
    }
    let r = range.len();
    let mut m = DMatrix::zeros(r, r);
    for (ii, &i) in range.iter().enumerate() {
        for (jj, &j) in range.iter().enumerate() {
            let vi = eig.eigenvectors.column(i);
            let vj = eig.eigenvectors.column(j);
            m[(ii, jj)] = (vi.transpose() * b * vj)[(0, 0)]
                / (eig.eigenvalues[i] * eig.eigenvalues[j]).sqrt();
        }
    }
    SymmetricEigen::new(0.5 * (&m + m.transpose()))
        .eigenvalues
        .max()
}

/// Lower bound on `γ0` for coercivity: `max_T C_{I,T} · λ_max(σ'_T)`.
pub fn penalty_threshold(constants: &[f64], tangents: &[Matrix2<f64>]) -> f64 {
    constants
        .iter()
        .zip(tangents)
        .map(|(c, t)| {
            if *c == 0.0 {
                0.0
            } else {
                c * SymmetricEigen::new(*t).eigenvalues.max()
            }
        })
        .fold(0.0, f64::max)
}

/// Cellwise tangents `σ'(∇u_n)` at the cell centroids.
pub fn cell_tangents(problem: &ScalarDGProblem, u: &[f64]) -> Vec<Matrix2<f64>> {
    let d = problem.mesh.dim();
    let bary = vec![1.0 / (d + 1) as f64; d + 1];
    (0..problem.mesh.num_cells())
        .map(|cell| {
            let geom = CellGeometry::new(&problem.mesh, cell);
            let sh = lagrange_basis(&geom, problem.space.degree, &bary);
            let (_, g) = problem.space.eval_component(u, cell, &sh, 0);
            problem.material.tangent(&v2(&g))
        })
        .collect()
}
