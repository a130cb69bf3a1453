//! Finite elasticity in 3D: symmetric DG Nitsche–Newton and a conforming
//! reference discretization.
//!
//! The unknown is the displacement `u`, `F = I + u⊗∇`. The DG tangent at
//! `u_n` is
//!
//! ```text
//! Σ_T ∫ (v⊗∇):𝕃(F_n):(ū⊗∇)
//!   - Σ_E ∫ (⟦v⟧⊗N):𝕃(⟨F⟩):⟨ū⊗∇⟩ - Σ_E ∫ (⟦ū⟧⊗N):𝕃(⟨F⟩):⟨v⊗∇⟩
//!   + Σ_E ∫ γ0/h (⟦v⟧⊗N):𝕃(⟨F⟩):(⟦ū⟧⊗N)
//! ```
//!
//! over the interior and clamped faces. Free boundary faces carry no face
//! terms. The penalty is weighted by `𝕃` itself, so `γ0` is dimensionless.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix3, SMatrix};
use rayon::prelude::*;

use crate::assembly::{gather_constrained, Local};
use crate::error::{Error, Result};
use crate::fem::{
    face_quadrature, lagrange_basis, quadrature, CellGeometry, FunctionSpace, QuadratureRule,
    ShapeValues, SpaceKind,
};
use crate::materials::{flatten, MooneyRivlinMaterial};
use crate::mesh::{symmetric_box_mesh, Mesh, Point};
use crate::solver::{CsrMatrix, NonlinearProblem, SparseSymmetricSystem};

type Vec9 = SMatrix<f64, 9, 1>;

/// Dimensionless penalty used by the shipped cases.
pub const DEFAULT_GAMMA0: f64 = 100.0;

pub type VectorFn = Arc<dyn Fn(&Point) -> [f64; 3] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    Dg,
    Cg,
}

impl Discretization {
    pub fn name(self) -> &'static str {
        match self {
            Discretization::Dg => "dg",
            Discretization::Cg => "cg",
        }
    }
}

impl FromStr for Discretization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dg" => Ok(Discretization::Dg),
            "cg" => Ok(Discretization::Cg),
            other => Err(Error::InvalidParameter(format!(
                "unknown discretization `{other}`"
            ))),
        }
    }
}

/// The shipped hyperelastic benchmarks. All clamp `X = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadCase {
    /// Unit cube, `f = (0, 200 - 400Z, 400Y - 200)`.
    Twist,
    /// Unit cube, `f = (250, 0, 0)`.
    Stretch,
    /// Beam `(0,1/2)×(0,1/10)×(0,1/10)`, `f = (0, 0, -15)`.
    Bend,
}

impl LoadCase {
    pub const ALL: [LoadCase; 3] = [LoadCase::Twist, LoadCase::Stretch, LoadCase::Bend];

    pub fn name(self) -> &'static str {
        match self {
            LoadCase::Twist => "twist",
            LoadCase::Stretch => "stretch",
            LoadCase::Bend => "bend",
        }
    }

    pub fn body_force(self, x: &Point) -> [f64; 3] {
        match self {
            LoadCase::Twist => [0.0, 200.0 - 400.0 * x[2], 400.0 * x[1] - 200.0],
            LoadCase::Stretch => [250.0, 0.0, 0.0],
            LoadCase::Bend => [0.0, 0.0, -15.0],
        }
    }

    pub fn lengths(self) -> [f64; 3] {
        match self {
            LoadCase::Twist | LoadCase::Stretch => [1.0, 1.0, 1.0],
            LoadCase::Bend => [0.5, 0.1, 0.1],
        }
    }

    /// Divisions for refinement parameter `n`: `n³` for the cube, `5n×n×n`
    /// for the beam.
    pub fn divisions(self, n: usize) -> [usize; 3] {
        match self {
            LoadCase::Twist | LoadCase::Stretch => [n, n, n],
            LoadCase::Bend => [5 * n, n, n],
        }
    }

    /// Refinement parameter of the shipped meshes.
    pub fn default_n(self) -> usize {
        match self {
            LoadCase::Twist | LoadCase::Stretch => 4,
            LoadCase::Bend => 1,
        }
    }

    pub fn mesh(self, n: usize) -> Result<Mesh> {
        symmetric_box_mesh(&self.lengths(), &self.divisions(n))
    }
}

impl FromStr for LoadCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LoadCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown load case `{s}`")))
    }
}

/// Hyperelastic problem: minimize `Ψ(u) - l(u)` with `u = 0` on faces tagged
/// `dirichlet`.
#[derive(Clone)]
pub struct ElasticityProblem {
    pub mesh: Arc<Mesh>,
    pub space: FunctionSpace,
    pub material: MooneyRivlinMaterial,
    pub body_force: VectorFn,
    pub gamma0: f64,
    clamped: Vec<bool>,
    cell_rule: QuadratureRule,
    face_rule: QuadratureRule,
}

impl std::fmt::Debug for ElasticityProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ElasticityProblem")
            .field("cells", &self.mesh.num_cells())
            .field("kind", &self.space.kind)
            .field("dofs", &self.space.total_dofs())
            .field("material", &self.material)
            .field("gamma0", &self.gamma0)
            .finish()
    }
}

impl ElasticityProblem {
    pub fn new(
        mesh: Arc<Mesh>,
        discretization: Discretization,
        material: MooneyRivlinMaterial,
        gamma0: f64,
    ) -> Result<Self> {
        if mesh.dim() != 3 {
            return Err(Error::InvalidParameter(
                "elasticity problems are three-dimensional".into(),
            ));
        }
        if !(gamma0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {gamma0}"
            )));
        }
        let space = match discretization {
            Discretization::Dg => FunctionSpace::dg(&mesh, 3),
            Discretization::Cg => FunctionSpace::cg(&mesh, 3),
        };
        let mut clamped = vec![false; space.total_dofs()];
        if discretization == Discretization::Cg {
            for (fi, f) in mesh.boundary_faces() {
                if mesh.is_dirichlet(fi) {
                    for &v in &f.vertices {
                        clamped[3 * v..3 * v + 3].iter_mut().for_each(|c| *c = true);
                    }
                }
            }
        }
        Ok(ElasticityProblem {
            mesh,
            space,
            material,
            body_force: Arc::new(|_| [0.0; 3]),
            gamma0,
            clamped,
            cell_rule: quadrature(3, 2)?,
            face_rule: quadrature(2, 2)?,
        })
    }

    pub fn with_body_force(
        mut self,
        f: impl Fn(&Point) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        self.body_force = Arc::new(f);
        self
    }

    pub fn discretization(&self) -> Discretization {
        match self.space.kind {
            SpaceKind::Discontinuous => Discretization::Dg,
            SpaceKind::Continuous => Discretization::Cg,
        }
    }

    /// DOFs eliminated by the conforming discretization.
    pub fn clamped_dofs(&self) -> &[bool] {
        &self.clamped
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if !(self.gamma0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        if u.len() != self.space.total_dofs() {
            return Err(Error::SizeMismatch(format!(
                "field has {} entries, space has {} DOFs",
                u.len(),
                self.space.total_dofs()
            )));
        }
        Ok(())
    }
}

/// One of the shipped benchmarks on its default mesh, with `E = 200`,
/// `ν = 0.33` and `γ0 = 100`.
pub fn load_case(case: LoadCase, discretization: Discretization) -> Result<ElasticityProblem> {
    load_case_on(case, discretization, case.default_n())
}

/// Like [`load_case`] with refinement parameter `n`.
pub fn load_case_on(
    case: LoadCase,
    discretization: Discretization,
    n: usize,
) -> Result<ElasticityProblem> {
    let mesh = Arc::new(case.mesh(n)?);
    let material = MooneyRivlinMaterial::new(200.0, 0.33)?;
    Ok(
        ElasticityProblem::new(mesh, discretization, material, DEFAULT_GAMMA0)?
            .with_body_force(move |x| case.body_force(x)),
    )
}

fn gradient_tensor(
    space: &FunctionSpace,
    u: &[f64],
    cell: usize,
    sh: &ShapeValues,
) -> Matrix3<f64> {
    space.eval_gradient_tensor(u, cell, sh)
}

fn value(space: &FunctionSpace, u: &[f64], cell: usize, sh: &ShapeValues) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = space.eval_component(u, cell, sh, c).0;
    }
    out
}

/// `e_c ⊗ g`, flattened.
fn unit_outer(c: usize, g: &Point, scale: f64) -> Vec9 {
    let mut v = Vec9::zeros();
    for j in 0..3 {
        v[3 * c + j] = scale * g[j];
    }
    v
}

fn cell_local(
    p: &ElasticityProblem,
    u: &[f64],
    load: f64,
    cell: usize,
    tangent: bool,
) -> Result<Local> {
    let geom = CellGeometry::new(&p.mesh, cell);
    let mut local = Local::new(p.space.cell_dofs(cell).to_vec());
    let m = local.dofs.len();
    for (bary, x, w) in geom.quadrature_points(&p.cell_rule) {
        let sh = lagrange_basis(&geom, p.space.degree, &bary);
        let f = Matrix3::identity() + gradient_tensor(&p.space, u, cell, &sh);
        let stress = p.material.stress(&f).map_err(|e| e.at_cell(cell))?;
        let body = (p.body_force)(&x);
        let grads: Vec<Vec9> = (0..m)
            .map(|q| unit_outer(q % 3, &sh.grads[q / 3], 1.0))
            .collect();
        if tangent {
            let l = p.material.tangent(&f).map_err(|e| e.at_cell(cell))?.0;
            let lg: Vec<Vec9> = grads.iter().map(|g| l * g).collect();
            local.add_upper(|a, b| w * grads[a].dot(&lg[b]));
        }
        let pf = flatten(&stress);
        for a in 0..m {
            local.rhs[a] += w * (load * body[a % 3] * sh.values[a / 3] - pf.dot(&grads[a]));
        }
    }
    local.mirror();
    Ok(local)
}

fn face_local(p: &ElasticityProblem, u: &[f64], face: usize, tangent: bool) -> Result<Local> {
    let mesh = &p.mesh;
    let f = &mesh.faces()[face];
    let normal = f.normal;
    let penalty = p.gamma0 / f.h;
    let plus = f.plus.cell;
    let minus = f.minus.map(|s| s.cell);
    let mut dofs = p.space.cell_dofs(plus).to_vec();
    let np = dofs.len();
    if let Some(mc) = minus {
        dofs.extend_from_slice(p.space.cell_dofs(mc));
    }
    let mut local = Local::new(dofs);
    let m = local.dofs.len();
    let half = if minus.is_some() { 0.5 } else { 1.0 };
    let gp = CellGeometry::new(mesh, plus);
    let gm = minus.map(|c| CellGeometry::new(mesh, c));

    for (x, w) in face_quadrature(mesh, face, &p.face_rule) {
        let sp = lagrange_basis(&gp, p.space.degree, &gp.to_barycentric(&x));
        let sm = gm
            .as_ref()
            .map(|g| lagrange_basis(g, p.space.degree, &g.to_barycentric(&x)));
        let mut fbar = Matrix3::identity() + gradient_tensor(&p.space, u, plus, &sp);
        let mut jump = value(&p.space, u, plus, &sp);
        if let (Some(mc), Some(sm)) = (minus, &sm) {
            let fm = Matrix3::identity() + gradient_tensor(&p.space, u, mc, sm);
            fbar = 0.5 * (fbar + fm);
            let um = value(&p.space, u, mc, sm);
            for c in 0..3 {
                jump[c] -= um[c];
            }
        }
        let stress = flatten(&p.material.stress(&fbar).map_err(|e| e.at_cell(plus))?);
        let moduli = p.material.tangent(&fbar).map_err(|e| e.at_cell(plus))?.0;

        // Jump tensors (±φ e_c ⊗ N) and averaged gradients (½ e_c ⊗ ∇φ).
        let mut jt = Vec::with_capacity(m);
        let mut gt = Vec::with_capacity(m);
        for a in 0..np {
            jt.push(unit_outer(a % 3, &normal, sp.values[a / 3]));
            gt.push(unit_outer(a % 3, &sp.grads[a / 3], half));
        }
        if let Some(sm) = &sm {
            for a in 0..m - np {
                jt.push(unit_outer(a % 3, &normal, -sm.values[a / 3]));
                gt.push(unit_outer(a % 3, &sm.grads[a / 3], half));
            }
        }
        let mjt: Vec<Vec9> = jt.iter().map(|j| moduli * j).collect();
        if tangent {
            local.add_upper(|a, b| {
                w * (penalty * jt[a].dot(&mjt[b]) - gt[b].dot(&mjt[a]) - gt[a].dot(&mjt[b]))
            });
        }
        let mju = moduli * unit_outer_vec(&jump, &normal);
        for a in 0..m {
            local.rhs[a] += w * (stress.dot(&jt[a]) - penalty * mju.dot(&jt[a]) + mju.dot(&gt[a]));
        }
    }
    local.mirror();
    Ok(local)
}

/// `a ⊗ n`, flattened.
fn unit_outer_vec(a: &[f64; 3], n: &Point) -> Vec9 {
    let mut v = Vec9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            v[3 * i + j] = a[i] * n[j];
        }
    }
    v
}

fn assemble(
    p: &ElasticityProblem,
    u: &[f64],
    load: f64,
    tangent: bool,
) -> Result<SparseSymmetricSystem> {
    p.check(u)?;
    let mesh = &p.mesh;
    let mut locals: Vec<Local> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_local(p, u, load, c, tangent))
        .collect::<Result<_>>()?;
    if p.space.kind == SpaceKind::Discontinuous {
        let faces: Vec<usize> = (0..mesh.faces().len())
            .filter(|&fi| !mesh.faces()[fi].is_boundary() || mesh.is_dirichlet(fi))
            .collect();
        let face_locals: Vec<Local> = faces
            .into_par_iter()
            .map(|fi| face_local(p, u, fi, tangent))
            .collect::<Result<_>>()?;
        locals.extend(face_locals);
    }
    Ok(gather_constrained(p.space.total_dofs(), locals, &p.clamped))
}

/// Conforming tangent and residual at `u_n`, clamped DOFs eliminated.
pub fn assemble_cg(problem: &ElasticityProblem, u_n: &[f64]) -> Result<SparseSymmetricSystem> {
    if problem.space.kind != SpaceKind::Continuous {
        return Err(Error::InvalidParameter(
            "assemble_cg needs a continuous space".into(),
        ));
    }
    assemble(problem, u_n, 1.0, true)
}

/// DG tangent `A_h^n` at `u_n`.
pub fn assemble_dg_tangent(problem: &ElasticityProblem, u_n: &[f64]) -> Result<CsrMatrix> {
    Ok(assemble_dg_system(problem, u_n, 1.0)?.matrix)
}

/// DG Newton right-hand side (the negative residual) at `u_n`.
pub fn assemble_dg_residual(problem: &ElasticityProblem, u_n: &[f64]) -> Result<Vec<f64>> {
    if problem.space.kind != SpaceKind::Discontinuous {
        return Err(Error::InvalidParameter(
            "DG assembly needs a discontinuous space".into(),
        ));
    }
    Ok(assemble(problem, u_n, 1.0, false)?.rhs)
}

/// DG tangent and right-hand side at `u_n` with the body force scaled by
/// `load_factor`.
pub fn assemble_dg_system(
    problem: &ElasticityProblem,
    u_n: &[f64],
    load_factor: f64,
) -> Result<SparseSymmetricSystem> {
    if problem.space.kind != SpaceKind::Discontinuous {
        return Err(Error::InvalidParameter(
            "DG assembly needs a discontinuous space".into(),
        ));
    }
    assemble(problem, u_n, load_factor, true)
}

impl NonlinearProblem for ElasticityProblem {
    fn num_dofs(&self) -> usize {
        self.space.total_dofs()
    }

    fn assemble(&self, u: &[f64], load_factor: f64) -> Result<SparseSymmetricSystem> {
        assemble(self, u, load_factor, true)
    }
}
