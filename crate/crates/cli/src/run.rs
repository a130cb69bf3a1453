//! Problem setup, solves and output files shared by the subcommands.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use dgnewton::dg_elasticity::{Discretization, ElasticityProblem, LoadCase, DEFAULT_GAMMA0};
use dgnewton::dg_scalar::{assemble_nitsche_linear, ScalarDGProblem, ScalarScheme};
use dgnewton::fem::{FunctionSpace, SpaceKind};
use dgnewton::materials::{
    AntiplaneShearMaterial, MooneyRivlinMaterial, ScalarLinearMaterial, ScalarMaterial,
};
use dgnewton::mesh::{unit_square_mesh, Mesh};
use dgnewton::output::VtkDataset;
use dgnewton::solver::{linear_solve, newton_solve, NewtonConfig, NewtonTrace};
use dgnewton::verification::{
    relative_l2_difference, scalar_errors, scalar_fields, swap_defect, twist_axis_defect,
    vertex_values, ConvergenceStudy,
};
use dgnewton::Error;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: config, arguments, mesh files, output paths. Exit code 2.
    Config(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub final_residual: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub symmetry_defect: f64,
    pub outputs: Vec<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub levels: Vec<usize>,
    pub l2_errors: Vec<f64>,
    pub h1_errors: Vec<f64>,
    pub l2_rates: Vec<f64>,
    pub h1_rates: Vec<f64>,
}

impl From<&ConvergenceStudy> for StudySummary {
    fn from(s: &ConvergenceStudy) -> Self {
        StudySummary {
            levels: s.levels.clone(),
            l2_errors: s.l2_errors.clone(),
            h1_errors: s.h1_errors.clone(),
            l2_rates: s.l2_rates(),
            h1_rates: s.h1_rates(),
        }
    }
}

/// The JSON document every command writes.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub case: String,
    pub n: usize,
    pub status: String,
    pub final_residual: f64,
    pub iterations: usize,
    pub symmetry_defect: f64,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dg_cg_l2_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySummary>,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    /// Collects the runs and fills the aggregate fields (largest residual and
    /// defect, total iterations).
    pub fn from_runs(command: &str, case: &str, n: usize, runs: Vec<RunSummary>) -> Self {
        let status = if runs.iter().all(RunSummary::converged) {
            "converged"
        } else {
            "non-convergence"
        };
        Summary {
            command: command.to_string(),
            case: case.to_string(),
            n,
            status: status.to_string(),
            final_residual: runs.iter().map(|r| r.final_residual).fold(0.0, f64::max),
            iterations: runs.iter().map(|r| r.iterations).sum(),
            symmetry_defect: runs.iter().map(|r| r.symmetry_defect).fold(0.0, f64::max),
            outputs: runs.iter().flat_map(|r| r.outputs.clone()).collect(),
            dg_cg_l2_diff: None,
            study: None,
            runs,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == "converged"
    }

    /// Writes the summary next to the other outputs and returns its JSON.
    pub fn write(&mut self, dir: &Path, stem: &str) -> Result<String, CliError> {
        let path = dir.join(format!("{stem}_summary.json"));
        self.outputs.push(path.display().to_string());
        let text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))? + "\n";
        write_file(&path, &text)?;
        Ok(text)
    }
}

pub struct OutputSettings {
    pub dir: PathBuf,
    pub exploded: bool,
}

impl OutputSettings {
    pub fn prepare(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                self.dir.display()
            ))
        })
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_vtk(ds: &VtkDataset, path: &Path, outputs: &mut Vec<String>) -> Result<(), CliError> {
    ds.write(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    outputs.push(path.display().to_string());
    Ok(())
}

/// Result of one solve: its summary and, when it converged, the field.
pub struct RunOutcome {
    pub summary: RunSummary,
    pub solution: Option<Vec<f64>>,
}

fn trace_summary(method: &str, trace: &NewtonTrace) -> RunSummary {
    RunSummary {
        method: method.to_string(),
        status: if trace.converged() {
            "converged"
        } else {
            "non-convergence"
        }
        .to_string(),
        message: None,
        final_residual: trace.final_residual(),
        iterations: trace.total_iterations(),
        accepted_steps: trace.accepted_steps,
        rejected_steps: trace.rejected_steps,
        symmetry_defect: trace.max_symmetry_defect(),
        outputs: Vec::new(),
        diagnostics: BTreeMap::new(),
    }
}

fn failed_summary(method: &str, message: String) -> RunSummary {
    RunSummary {
        method: method.to_string(),
        status: "non-convergence".to_string(),
        message: Some(message),
        final_residual: f64::NAN,
        iterations: 0,
        accepted_steps: 0,
        rejected_steps: 0,
        symmetry_defect: f64::NAN,
        outputs: Vec::new(),
        diagnostics: BTreeMap::new(),
    }
}

/// Runs Newton, writing the trace CSV whether or not it converges.
fn solve_newton<P: dgnewton::solver::NonlinearProblem>(
    problem: &P,
    config: &NewtonConfig,
    method: &str,
    stem: &str,
    out: &OutputSettings,
) -> Result<(RunSummary, Option<Vec<f64>>), CliError> {
    let trace_path = out.dir.join(format!("{stem}_trace.csv"));
    match newton_solve(problem, config) {
        Ok(sol) => {
            let mut summary = trace_summary(method, &sol.trace);
            write_file(&trace_path, &sol.trace.to_csv())?;
            summary.outputs.push(trace_path.display().to_string());
            Ok((summary, Some(sol.u)))
        }
        Err(Error::NonConvergence { reason, trace }) => {
            let mut summary = trace_summary(method, &trace);
            summary.message = Some(reason);
            write_file(&trace_path, &trace.to_csv())?;
            summary.outputs.push(trace_path.display().to_string());
            Ok((summary, None))
        }
        Err(e @ Error::InvalidParameter(_)) => Err(e.into()),
        Err(e) => Ok((failed_summary(method, e.to_string()), None)),
    }
}

/// Which scalar problem and how to solve it.
pub struct ScalarSetup {
    pub case: String,
    pub method: String,
    pub n: usize,
    pub problem: ScalarDGProblem,
    pub newton: NewtonConfig,
    /// Solve the linear Nitsche system directly instead of running Newton.
    pub direct: bool,
    /// Exact solution for error reporting.
    pub exact: Option<Exact>,
}

pub struct Exact {
    pub value: fn(&[f64; 3]) -> f64,
    pub grad: fn(&[f64; 3]) -> [f64; 2],
}

pub fn stem(case: &str, method: &str, n: usize) -> String {
    format!("{case}_{method}_n{n}")
}

pub fn run_scalar(setup: &ScalarSetup, out: &OutputSettings) -> Result<RunOutcome, CliError> {
    let stem = stem(&setup.case, &setup.method, setup.n);
    let p = &setup.problem;
    let (mut summary, solution) = if setup.direct {
        let system = assemble_nitsche_linear(p)?;
        match linear_solve(&system) {
            Ok(u) => {
                let r = system.matrix.matvec(&u);
                let res = r
                    .iter()
                    .zip(&system.rhs)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let summary = RunSummary {
                    method: setup.method.clone(),
                    status: "converged".into(),
                    message: None,
                    final_residual: res,
                    iterations: 1,
                    accepted_steps: 1,
                    rejected_steps: 0,
                    symmetry_defect: system.symmetry_defect(),
                    outputs: Vec::new(),
                    diagnostics: BTreeMap::new(),
                };
                (summary, Some(u))
            }
            Err(e) => (failed_summary(&setup.method, e.to_string()), None),
        }
    } else {
        solve_newton(p, &setup.newton, &setup.method, &stem, out)?
    };

    if let Some(u) = &solution {
        let fields = scalar_fields(p, u)?;
        let d = &mut summary.diagnostics;
        d.insert("max_stress".into(), fields.max_stress);
        d.insert("plastic_cells".into(), fields.plastic.iter().sum());
        if let Ok(s) = swap_defect(p, u) {
            d.insert("symmetry_defect_xy".into(), s);
        }
        if let Some(exact) = &setup.exact {
            let (l2, h1) = scalar_errors(&p.mesh, &p.space, u, exact.value, exact.grad)?;
            d.insert("l2_error".into(), l2);
            d.insert("h1_error".into(), h1);
        }
        let mut ds = VtkDataset::new(&p.mesh, &format!("{} {} u", setup.case, setup.method));
        ds.p1_field("u", &p.space, u)?;
        ds.cell_field("grad_norm", 1, fields.grad_norm.clone())?;
        ds.cell_field(
            "stress",
            2,
            fields.stress.iter().flatten().copied().collect(),
        )?;
        ds.cell_field("plastic", 1, fields.plastic.clone())?;
        ds.point_field(
            "stress_p1",
            2,
            fields.projected_stress.iter().flatten().copied().collect(),
        )?;
        write_vtk(
            &ds,
            &out.dir.join(format!("{stem}.vtk")),
            &mut summary.outputs,
        )?;
        if out.exploded && p.space.kind == SpaceKind::Discontinuous {
            let mut ex = VtkDataset::exploded(
                &p.mesh,
                &format!("{} {} u exploded", setup.case, setup.method),
            );
            ex.p1_field("u", &p.space, u)?;
            write_vtk(
                &ex,
                &out.dir.join(format!("{stem}_exploded.vtk")),
                &mut summary.outputs,
            )?;
        }
    }
    Ok(RunOutcome { summary, solution })
}

pub struct ElasticSetup {
    pub case: String,
    pub load_case: Option<LoadCase>,
    pub method: String,
    pub n: usize,
    pub problem: ElasticityProblem,
    pub newton: NewtonConfig,
}

pub fn run_elastic(setup: &ElasticSetup, out: &OutputSettings) -> Result<RunOutcome, CliError> {
    let stem = stem(&setup.case, &setup.method, setup.n);
    let p = &setup.problem;
    let (mut summary, solution) = solve_newton(p, &setup.newton, &setup.method, &stem, out)?;
    if let Some(u) = &solution {
        let values = vertex_values(&p.mesh, &p.space, u);
        let max = values
            .chunks(3)
            .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
            .fold(0.0, f64::max);
        summary.diagnostics.insert("max_displacement".into(), max);
        if setup.load_case == Some(LoadCase::Twist) {
            summary.diagnostics.insert(
                "twist_axis_defect".into(),
                twist_axis_defect(&p.mesh, &p.space, u),
            );
        }
        let mut ds = VtkDataset::new(
            &p.mesh,
            &format!("{} {} displaced", setup.case, setup.method),
        );
        ds.p1_field("displacement", &p.space, u)?;
        if p.space.kind == SpaceKind::Discontinuous {
            ds.point_field("displacement_vertex_avg", 3, values.clone())?;
        }
        ds.displace(&p.mesh, &p.space, u)?;
        write_vtk(
            &ds,
            &out.dir.join(format!("{stem}.vtk")),
            &mut summary.outputs,
        )?;
        if out.exploded && p.space.kind == SpaceKind::Discontinuous {
            let mut ex = VtkDataset::exploded(
                &p.mesh,
                &format!("{} {} displaced exploded", setup.case, setup.method),
            );
            ex.p1_field("displacement", &p.space, u)?;
            ex.displace(&p.mesh, &p.space, u)?;
            write_vtk(
                &ex,
                &out.dir.join(format!("{stem}_exploded.vtk")),
                &mut summary.outputs,
            )?;
        }
    }
    Ok(RunOutcome { summary, solution })
}

/// Relative L² difference between a DG and a CG run on the same mesh.
pub fn dg_cg_difference(
    mesh: &Mesh,
    dg: (&FunctionSpace, &[f64]),
    cg: (&FunctionSpace, &[f64]),
) -> Result<f64, CliError> {
    Ok(relative_l2_difference(mesh, dg.0, dg.1, cg.0, cg.1)?)
}

pub fn mms_exact() -> Exact {
    Exact {
        value: |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
        grad: |x| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        },
    }
}

/// Scalar problem on `mesh` with the given scheme and material.
pub fn scalar_problem(
    mesh: Arc<Mesh>,
    scheme: crate::config::Scheme,
    material: Arc<dyn ScalarMaterial>,
    gamma0: f64,
) -> Result<ScalarDGProblem, CliError> {
    use crate::config::Scheme;
    let space = match scheme {
        Scheme::Nitsche | Scheme::Cg => FunctionSpace::cg(&mesh, 1),
        Scheme::DgClassical | Scheme::DgHybrid => FunctionSpace::dg(&mesh, 1),
    };
    let kind = if scheme == Scheme::DgHybrid {
        ScalarScheme::Hybrid
    } else {
        ScalarScheme::Classical
    };
    Ok(ScalarDGProblem::with_space(mesh, space, material, gamma0)?.with_scheme(kind))
}

pub fn plasticity_material(
    shear: f64,
    yield_stress: f64,
    eps_reg: Option<f64>,
) -> Result<AntiplaneShearMaterial, CliError> {
    Ok(match eps_reg {
        Some(e) => AntiplaneShearMaterial::with_regularization(
            shear,
            yield_stress,
            e,
            AntiplaneShearMaterial::DEFAULT_EPS_GRAD,
        )?,
        None => AntiplaneShearMaterial::new(shear, yield_stress)?,
    })
}

pub fn poisson_material(k: f64) -> Result<ScalarLinearMaterial, CliError> {
    Ok(ScalarLinearMaterial::new(k)?)
}

pub fn square_mesh(n: usize) -> Result<Arc<Mesh>, CliError> {
    Ok(Arc::new(unit_square_mesh(n)?))
}

pub fn elastic_problem(
    mesh: Arc<Mesh>,
    discretization: Discretization,
    material: MooneyRivlinMaterial,
    gamma0: Option<f64>,
    case: Option<LoadCase>,
) -> Result<ElasticityProblem, CliError> {
    let p = ElasticityProblem::new(
        mesh,
        discretization,
        material,
        gamma0.unwrap_or(DEFAULT_GAMMA0),
    )?;
    Ok(match case {
        Some(c) => p.with_body_force(move |x| c.body_force(x)),
        None => p,
    })
}

pub fn read_mesh(path: &Path) -> Result<Arc<Mesh>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read mesh {}: {e}", path.display())))?;
    Mesh::parse_ascii(&text)
        .map(Arc::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
