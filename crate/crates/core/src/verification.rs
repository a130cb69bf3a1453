//! Manufactured-solution studies and the benchmark problems.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Vector2;

use crate::dg_elasticity::{load_case_on, Discretization, ElasticityProblem, LoadCase};
use crate::dg_scalar::{assemble_nitsche_linear, ScalarDGProblem, ScalarScheme};
use crate::error::{Error, Result};
use crate::fem::{lagrange_basis, quadrature, CellGeometry, FunctionSpace};
use crate::materials::{AntiplaneShearMaterial, ScalarLinearMaterial};
use crate::mesh::{unit_square_mesh, Mesh, Point};
use crate::solver::{linear_solve_with, newton_solve, NewtonConfig, NewtonSolution};

/// Errors of a refinement study and the observed rates `log₂(e_h / e_{h/2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub levels: Vec<usize>,
    pub l2_errors: Vec<f64>,
    pub h1_errors: Vec<f64>,
    /// Relative linear residual `‖Ku - b‖ / ‖b‖` per level.
    pub residuals: Vec<f64>,
    /// Tangent symmetry defect per level.
    pub symmetry_defects: Vec<f64>,
}

impl ConvergenceStudy {
    fn rates(levels: &[usize], errors: &[f64]) -> Vec<f64> {
        levels
            .windows(2)
            .zip(errors.windows(2))
            .map(|(n, e)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
            .collect()
    }

    pub fn l2_rates(&self) -> Vec<f64> {
        Self::rates(&self.levels, &self.l2_errors)
    }

    pub fn h1_rates(&self) -> Vec<f64> {
        Self::rates(&self.levels, &self.h1_errors)
    }

    /// One row per level; rates refer to the previous level and are empty on
    /// the first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,l2_error,h1_error,l2_rate,h1_rate\n");
        let (l2r, h1r) = (self.l2_rates(), self.h1_rates());
        for (i, n) in self.levels.iter().enumerate() {
            let rate = |r: &[f64]| {
                if i == 0 {
                    String::new()
                } else {
                    format!("{:.6}", r[i - 1])
                }
            };
            writeln!(
                out,
                "{n},{:.6e},{:.6e},{:.6e},{},{}",
                1.0 / *n as f64,
                self.l2_errors[i],
                self.h1_errors[i],
                rate(&l2r),
                rate(&h1r)
            )
            .expect("writing to a string");
        }
        out
    }
}

/// L² and broken H¹-seminorm errors of a scalar field against `exact` and its
/// gradient.
pub fn scalar_errors(
    mesh: &Mesh,
    space: &FunctionSpace,
    u: &[f64],
    exact: impl Fn(&Point) -> f64,
    exact_grad: impl Fn(&Point) -> [f64; 2],
) -> Result<(f64, f64)> {
    let rule = quadrature(mesh.dim(), 4)?;
    let (mut l2, mut h1) = (0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (bary, x, w) in geom.quadrature_points(&rule) {
            let sh = lagrange_basis(&geom, space.degree, &bary);
            let (v, g) = space.eval_component(u, cell, &sh, 0);
            let ge = exact_grad(&x);
            l2 += w * (v - exact(&x)).powi(2);
            h1 += w * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Penalty used by the Poisson studies.
pub const POISSON_GAMMA0: f64 = 100.0;

/// P1 DG Poisson solve for `u = sin πx sin πy`, `k = 1`, `g = 0` on the
/// levels `n` (`unit_square_mesh(n)`).
pub fn poisson_mms(levels: &[usize]) -> Result<ConvergenceStudy> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) || levels.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "levels must be positive and strictly increasing, got {levels:?}"
        )));
    }
    let mut study = ConvergenceStudy {
        levels: levels.to_vec(),
        l2_errors: vec![],
        h1_errors: vec![],
        residuals: vec![],
        symmetry_defects: vec![],
    };
    for &n in levels {
        let mesh = Arc::new(unit_square_mesh(n)?);
        let problem = ScalarDGProblem::new(
            mesh.clone(),
            Arc::new(ScalarLinearMaterial::new(1.0)?),
            POISSON_GAMMA0,
        )?
        .with_source(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin());
        let system = assemble_nitsche_linear(&problem)?;
        let u = linear_solve_with(&system, &Default::default())?;
        let r: f64 = system
            .matrix
            .matvec(&u)
            .iter()
            .zip(&system.rhs)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        study.residuals.push(r.sqrt() / system.residual_norm());
        study.symmetry_defects.push(system.symmetry_defect());
        let (l2, h1) = scalar_errors(
            &mesh,
            &problem.space,
            &u,
            |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            },
        )?;
        study.l2_errors.push(l2);
        study.h1_errors.push(h1);
    }
    Ok(study)
}

/// Largest nodal error of the DG solution for `u = x` (`g = x`, `f = 0`).
pub fn poisson_patch_test(n: usize, scheme: ScalarScheme) -> Result<f64> {
    let mesh = Arc::new(unit_square_mesh(n)?);
    let problem = ScalarDGProblem::new(
        mesh.clone(),
        Arc::new(ScalarLinearMaterial::new(1.0)?),
        POISSON_GAMMA0,
    )?
    .with_dirichlet(|x| x[0])
    .with_scheme(scheme);
    let sol = newton_solve(&problem, &NewtonConfig::default())?;
    let exact = problem.space.interpolate(&mesh, |x| vec![x[0]]);
    Ok(sol
        .u
        .iter()
        .zip(&exact)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Vertex values of a P1 field; DG values are averaged over the cells sharing
/// each vertex. Returns `num_vertices × value_dim` row-major.
pub fn vertex_values(mesh: &Mesh, space: &FunctionSpace, u: &[f64]) -> Vec<f64> {
    let vd = space.value_dim;
    let mut sum = vec![0.0; mesh.num_vertices() * vd];
    let mut count = vec![0usize; mesh.num_vertices()];
    for (cell, verts) in mesh.cells().iter().enumerate() {
        let dofs = space.cell_dofs(cell);
        for (a, &v) in verts.iter().enumerate() {
            count[v] += 1;
            for c in 0..vd {
                sum[v * vd + c] += u[dofs[a * vd + c]];
            }
        }
    }
    for (v, &k) in count.iter().enumerate() {
        if k > 0 {
            for c in 0..vd {
                sum[v * vd + c] /= k as f64;
            }
        }
    }
    sum
}

/// Lumped-mass L² projection of a cellwise field onto continuous P1:
/// `value(cell, bary)` is sampled at the cell quadrature points.
pub fn lumped_projection<const N: usize>(
    mesh: &Mesh,
    degree: usize,
    value: impl Fn(usize, &[f64]) -> [f64; N],
) -> Result<Vec<[f64; N]>> {
    let rule = quadrature(mesh.dim(), degree.max(1))?;
    let mut rhs = vec![[0.0; N]; mesh.num_vertices()];
    let mut mass = vec![0.0; mesh.num_vertices()];
    for (cell, verts) in mesh.cells().iter().enumerate() {
        let geom = CellGeometry::new(mesh, cell);
        for (bary, _, w) in geom.quadrature_points(&rule) {
            let val = value(cell, &bary);
            for (a, &v) in verts.iter().enumerate() {
                mass[v] += w * bary[a];
                for c in 0..N {
                    rhs[v][c] += w * bary[a] * val[c];
                }
            }
        }
    }
    Ok(rhs
        .into_iter()
        .zip(mass)
        .map(|(r, m)| r.map(|x| x / m))
        .collect())
}

/// Inputs of the antiplane plasticity benchmark: `σ_Y = 1`, `G = 1`,
/// `f = 7.5 sin πx sin πy`, `u = 0` on `∂Ω`.
pub const PLASTICITY_YIELD: f64 = 1.0;
pub const PLASTICITY_SHEAR: f64 = 1.0;
pub const PLASTICITY_GAMMA0: f64 = 100.0;

pub fn plasticity_problem(n: usize, scheme: ScalarScheme) -> Result<ScalarDGProblem> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mesh = Arc::new(unit_square_mesh(n)?);
    let material = Arc::new(AntiplaneShearMaterial::new(
        PLASTICITY_SHEAR,
        PLASTICITY_YIELD,
    )?);
    Ok(
        ScalarDGProblem::new(mesh, material, PLASTICITY_GAMMA0 * PLASTICITY_SHEAR)?
            .with_source(|x| 7.5 * (PI * x[0]).sin() * (PI * x[1]).sin())
            .with_scheme(scheme),
    )
}

/// Derived fields of a scalar solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFields {
    /// `|∇u|` per cell (at the centroid).
    pub grad_norm: Vec<f64>,
    /// Stress per cell (at the centroid).
    pub stress: Vec<[f64; 2]>,
    /// Stress projected onto continuous P1, per vertex.
    pub projected_stress: Vec<[f64; 2]>,
    /// 1 where the cell centroid is beyond the elastic range, else 0.
    pub plastic: Vec<f64>,
    /// Largest `|σ|` over all cell quadrature points.
    pub max_stress: f64,
}

pub fn scalar_fields(problem: &ScalarDGProblem, u: &[f64]) -> Result<ScalarFields> {
    let mesh = &problem.mesh;
    let space = &problem.space;
    if u.len() != space.total_dofs() {
        return Err(Error::SizeMismatch(
            "field does not match the problem space".into(),
        ));
    }
    let gradient = |cell: usize, bary: &[f64]| {
        let geom = CellGeometry::new(mesh, cell);
        let sh = lagrange_basis(&geom, space.degree, bary);
        let g = space.eval_component(u, cell, &sh, 0).1;
        Vector2::new(g[0], g[1])
    };
    let centroid = [1.0 / 3.0; 3];
    let mut fields = ScalarFields {
        grad_norm: Vec::with_capacity(mesh.num_cells()),
        stress: Vec::with_capacity(mesh.num_cells()),
        projected_stress: Vec::new(),
        plastic: Vec::with_capacity(mesh.num_cells()),
        max_stress: 0.0,
    };
    for cell in 0..mesh.num_cells() {
        let g = gradient(cell, &centroid);
        let s = problem.material.stress(&g);
        fields.grad_norm.push(g.norm());
        fields.stress.push([s[0], s[1]]);
        fields.plastic.push(if problem.material.is_yielded(&g) {
            1.0
        } else {
            0.0
        });
        let geom = CellGeometry::new(mesh, cell);
        for (bary, _, _) in geom.quadrature_points(problem.cell_rule()) {
            fields.max_stress = fields
                .max_stress
                .max(problem.material.stress(&gradient(cell, &bary)).norm());
        }
    }
    fields.projected_stress = lumped_projection(mesh, 2, |cell, bary| {
        let s = problem.material.stress(&gradient(cell, bary));
        [s[0], s[1]]
    })?;
    Ok(fields)
}

/// Converged plasticity run and derived fields.
#[derive(Debug, Clone)]
pub struct PlasticityResult {
    pub problem: ScalarDGProblem,
    pub solution: NewtonSolution,
    pub fields: ScalarFields,
    /// Largest nodal deviation from `u(x, y) = u(y, x)`.
    pub symmetry_defect: f64,
}

pub fn plasticity_case(
    n: usize,
    scheme: ScalarScheme,
    config: &NewtonConfig,
) -> Result<PlasticityResult> {
    let problem = plasticity_problem(n, scheme)?;
    let solution = newton_solve(&problem, config)?;
    let fields = scalar_fields(&problem, &solution.u)?;
    let symmetry_defect = swap_defect(&problem, &solution.u)?;
    Ok(PlasticityResult {
        problem,
        solution,
        fields,
        symmetry_defect,
    })
}

/// Largest nodal deviation of a scalar field from `u(x, y) = u(y, x)`.
pub fn swap_defect(problem: &ScalarDGProblem, u: &[f64]) -> Result<f64> {
    reflection_defect(
        &problem.mesh,
        &problem.space,
        u,
        |x| [x[1], x[0], x[2]],
        |v| v.to_vec(),
    )
}

/// Largest deviation between the nodal values of a P1 field and its image
/// under the mesh symmetry `map`, `u(map(x)) = transform(u(x))`.
pub fn reflection_defect(
    mesh: &Mesh,
    space: &FunctionSpace,
    u: &[f64],
    map: impl Fn(&Point) -> Point,
    transform: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<f64> {
    let key = |p: &Point| p.map(|c| (c * 1e9).round() as i64);
    let index: HashMap<[i64; 3], usize> = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| (key(p), i))
        .collect();
    let image = |v: usize| -> Result<usize> {
        index
            .get(&key(&map(&mesh.vertices()[v])))
            .copied()
            .ok_or_else(|| Error::InvalidMesh("mesh is not invariant under the symmetry".into()))
    };
    let mut cells: HashMap<Vec<usize>, usize> = HashMap::new();
    for (c, verts) in mesh.cells().iter().enumerate() {
        let mut s = verts.clone();
        s.sort_unstable();
        cells.insert(s, c);
    }
    let vd = space.value_dim;
    let mut defect: f64 = 0.0;
    for (c, verts) in mesh.cells().iter().enumerate() {
        let mapped: Vec<usize> = verts.iter().map(|&v| image(v)).collect::<Result<_>>()?;
        let mut sorted = mapped.clone();
        sorted.sort_unstable();
        let &mc = cells
            .get(&sorted)
            .ok_or_else(|| Error::InvalidMesh("mesh is not invariant under the symmetry".into()))?;
        for (a, &mv) in mapped.iter().enumerate() {
            let b = mesh.cells()[mc]
                .iter()
                .position(|&w| w == mv)
                .expect("vertex of mapped cell");
            let here: Vec<f64> = (0..vd).map(|k| u[space.cell_dofs(c)[a * vd + k]]).collect();
            let there: Vec<f64> = (0..vd)
                .map(|k| u[space.cell_dofs(mc)[b * vd + k]])
                .collect();
            for (x, y) in transform(&here).iter().zip(&there) {
                defect = defect.max((x - y).abs());
            }
        }
    }
    Ok(defect)
}

/// Relative L² difference `‖u_a - u_b‖ / ‖u_b‖` of two vector P1 fields on
/// the same mesh.
pub fn relative_l2_difference(
    mesh: &Mesh,
    space_a: &FunctionSpace,
    u_a: &[f64],
    space_b: &FunctionSpace,
    u_b: &[f64],
) -> Result<f64> {
    if space_a.value_dim != space_b.value_dim {
        return Err(Error::SizeMismatch(
            "fields have different value dimensions".into(),
        ));
    }
    let rule = quadrature(mesh.dim(), 2)?;
    let (mut diff, mut base) = (0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let geom = CellGeometry::new(mesh, cell);
        for (bary, _, w) in geom.quadrature_points(&rule) {
            let sa = lagrange_basis(&geom, space_a.degree, &bary);
            let sb = lagrange_basis(&geom, space_b.degree, &bary);
            for c in 0..space_a.value_dim {
                let a = space_a.eval_component(u_a, cell, &sa, c).0;
                let b = space_b.eval_component(u_b, cell, &sb, c).0;
                diff += w * (a - b).powi(2);
                base += w * b * b;
            }
        }
    }
    if base == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((diff / base).sqrt())
}

/// Which discretizations a hyperelastic run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Dg,
    Cg,
    Both,
}

impl std::str::FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dg" => Ok(MethodChoice::Dg),
            "cg" => Ok(MethodChoice::Cg),
            "both" => Ok(MethodChoice::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (expected dg, cg or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElasticityRun {
    pub problem: ElasticityProblem,
    pub solution: NewtonSolution,
}

#[derive(Debug, Clone)]
pub struct HyperelasticResult {
    pub case: LoadCase,
    pub n: usize,
    pub runs: Vec<ElasticityRun>,
    /// `‖u_dg - u_cg‖ / ‖u_cg‖` when both were run.
    pub dg_cg_l2_diff: Option<f64>,
    /// Twist only: largest transverse displacement on the line
    /// `Y = Z = 0.5`, relative to the largest displacement.
    pub axis_defect: Option<f64>,
}

impl HyperelasticResult {
    pub fn run(&self, d: Discretization) -> Option<&ElasticityRun> {
        self.runs.iter().find(|r| r.problem.discretization() == d)
    }
}

pub fn hyperelastic_case(
    case: LoadCase,
    method: MethodChoice,
    n: usize,
    config: &NewtonConfig,
) -> Result<HyperelasticResult> {
    let kinds: &[Discretization] = match method {
        MethodChoice::Dg => &[Discretization::Dg],
        MethodChoice::Cg => &[Discretization::Cg],
        MethodChoice::Both => &[Discretization::Cg, Discretization::Dg],
    };
    let mut runs = Vec::new();
    for &d in kinds {
        let problem = load_case_on(case, d, n)?;
        let solution = newton_solve(&problem, config)?;
        runs.push(ElasticityRun { problem, solution });
    }
    let mut result = HyperelasticResult {
        case,
        n,
        runs,
        dg_cg_l2_diff: None,
        axis_defect: None,
    };
    if let (Some(dg), Some(cg)) = (
        result.run(Discretization::Dg),
        result.run(Discretization::Cg),
    ) {
        result.dg_cg_l2_diff = Some(relative_l2_difference(
            &dg.problem.mesh,
            &dg.problem.space,
            &dg.solution.u,
            &cg.problem.space,
            &cg.solution.u,
        )?);
    }
    if case == LoadCase::Twist {
        let defect = result
            .runs
            .iter()
            .map(|r| twist_axis_defect(&r.problem.mesh, &r.problem.space, &r.solution.u))
            .fold(0.0, f64::max);
        result.axis_defect = Some(defect);
    }
    Ok(result)
}

/// Largest vertex-averaged displacement transverse to `(1, 0, 0)` on the line
/// `Y = Z = 0.5`, relative to the largest vertex displacement.
pub fn twist_axis_defect(mesh: &Mesh, space: &FunctionSpace, u: &[f64]) -> f64 {
    let values = vertex_values(mesh, space, u);
    let scale = values
        .chunks(3)
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    mesh.vertices()
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[1] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12)
        .map(|(v, _)| (values[3 * v + 1].powi(2) + values[3 * v + 2].powi(2)).sqrt() / scale)
        .fold(0.0, f64::max)
}
