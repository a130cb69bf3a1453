//! `dgnewton` command-line driver.
//!
//! Exit status: 0 on success, 1 when a solve does not converge, 2 on
//! configuration or input errors.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use dgnewton::dg_elasticity::{Discretization, LoadCase};
use dgnewton::dg_scalar::ScalarScheme;
use dgnewton::materials::MooneyRivlinMaterial;
use dgnewton::solver::{set_deterministic, NewtonConfig};
use dgnewton::verification::{plasticity_problem, poisson_mms};

use config::{ProblemKind, RunConfig, Scheme};
use run::{CliError, ElasticSetup, OutputSettings, ScalarSetup, Summary};

#[derive(Parser)]
#[command(
    name = "dgnewton",
    version,
    about = "Symmetric Nitsche–Newton DG solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem described by a JSON config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Poisson manufactured-solution convergence study.
    Mms {
        /// Comma-separated mesh levels, e.g. 4,8,16.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, default_value = "output")]
        output_dir: PathBuf,
    },
    /// Run one of the shipped benchmark cases.
    Case {
        name: CaseName,
        #[arg(long, value_enum, default_value = "dg")]
        method: Method,
        /// Refinement parameter (default: 4 for the cube, 1 for the beam, 16
        /// for plasticity).
        #[arg(long)]
        n: Option<usize>,
        /// DG scheme of the plasticity case.
        #[arg(long, value_enum, default_value = "hybrid")]
        scheme: PlasticityScheme,
        #[arg(long)]
        load_steps: Option<usize>,
        #[arg(long, default_value = "output")]
        output_dir: PathBuf,
        /// Skip the exploded-mesh VTK files.
        #[arg(long)]
        no_exploded: bool,
        /// Single-threaded sparse factorization.
        #[arg(long)]
        deterministic: bool,
    },
    /// Print version, cases and parallelism as JSON.
    Info,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseName {
    Twist,
    Stretch,
    Bend,
    Plasticity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Dg,
    Cg,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlasticityScheme {
    Classical,
    Hybrid,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("DGNEWTON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "DGNEWTON_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure {n} threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Solve { config } => solve(&config),
        Command::Mms { levels, output_dir } => mms(&levels, output_dir),
        Command::Case {
            name,
            method,
            n,
            scheme,
            load_steps,
            output_dir,
            no_exploded,
            deterministic,
        } => {
            set_deterministic(deterministic);
            let out = OutputSettings {
                dir: output_dir,
                exploded: !no_exploded,
            };
            case(name, method, n, scheme, load_steps, &out)
        }
        Command::Info => info(),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Writes and prints the summary; returns whether every run converged.
fn finish(mut summary: Summary, out: &OutputSettings, stem: &str) -> Result<bool, CliError> {
    let text = summary.write(&out.dir, stem)?;
    print!("{text}");
    for r in summary.runs.iter().filter(|r| !r.converged()) {
        eprintln!(
            "{}: {}",
            r.method,
            r.message.as_deref().unwrap_or("did not converge")
        );
    }
    Ok(summary.converged())
}

fn solve(path: &std::path::Path) -> Result<bool, CliError> {
    let cfg = RunConfig::load(path)?;
    set_deterministic(cfg.deterministic);
    let out = OutputSettings {
        dir: cfg.output_dir.clone(),
        exploded: cfg.exploded,
    };
    out.prepare()?;
    let m = &cfg.material;
    let mesh_2d = |default_n: usize| -> Result<(Arc<dgnewton::mesh::Mesh>, usize), CliError> {
        match &cfg.mesh.file {
            Some(f) => {
                let mesh = run::read_mesh(f)?;
                if mesh.dim() != 2 {
                    return Err(CliError::Config(format!(
                        "{}: scalar problems need a 2D mesh",
                        f.display()
                    )));
                }
                let cells = mesh.num_cells();
                Ok((mesh, cells))
            }
            None => {
                let n = cfg.mesh.n.unwrap_or(default_n);
                Ok((run::square_mesh(n)?, n))
            }
        }
    };
    let problem_name = cfg.problem.name();
    match cfg.problem {
        ProblemKind::Poisson | ProblemKind::Plasticity => {
            let (mesh, n) = mesh_2d(16)?;
            let (problem, newton, exact) = if cfg.problem == ProblemKind::Poisson {
                let k = m.k.unwrap_or(1.0);
                let material = Arc::new(run::poisson_material(k)?);
                let p = run::scalar_problem(
                    mesh,
                    cfg.scheme,
                    material,
                    cfg.gamma0.unwrap_or(100.0 * k),
                )?
                .with_source(move |x| {
                    2.0 * std::f64::consts::PI.powi(2)
                        * k
                        * (std::f64::consts::PI * x[0]).sin()
                        * (std::f64::consts::PI * x[1]).sin()
                });
                (
                    p,
                    cfg.newton.apply(NewtonConfig::default()),
                    Some(run::mms_exact()),
                )
            } else {
                let g = m.shear_modulus.unwrap_or(1.0);
                let material = Arc::new(run::plasticity_material(
                    g,
                    m.yield_stress.unwrap_or(1.0),
                    m.eps_reg,
                )?);
                let p = run::scalar_problem(
                    mesh,
                    cfg.scheme,
                    material,
                    cfg.gamma0.unwrap_or(100.0 * g),
                )?
                .with_source(|x| {
                    7.5 * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
                });
                (p, cfg.newton.apply(NewtonConfig::default()), None)
            };
            let setup = ScalarSetup {
                case: problem_name.into(),
                method: cfg.scheme.name().into(),
                n,
                problem: problem.with_averaging(cfg.averaging.into()),
                newton,
                direct: cfg.scheme == Scheme::Nitsche,
                exact,
            };
            let outcome = run::run_scalar(&setup, &out)?;
            let summary = Summary::from_runs("solve", problem_name, n, vec![outcome.summary]);
            finish(
                summary,
                &out,
                &run::stem(problem_name, cfg.scheme.name(), n),
            )
        }
        ProblemKind::Hyperelastic => {
            let case = cfg.load_case()?.expect("validated");
            let (mesh, n) = match &cfg.mesh.file {
                Some(f) => {
                    let mesh = run::read_mesh(f)?;
                    if mesh.dim() != 3 {
                        return Err(CliError::Config(format!(
                            "{}: hyperelastic problems need a 3D mesh",
                            f.display()
                        )));
                    }
                    let cells = mesh.num_cells();
                    (mesh, cells)
                }
                None => {
                    let n = cfg.mesh.n.unwrap_or(case.default_n());
                    (Arc::new(case.mesh(n)?), n)
                }
            };
            let material = MooneyRivlinMaterial::new(
                m.youngs_modulus.unwrap_or(200.0),
                m.poisson_ratio.unwrap_or(0.33),
            )?;
            let d = if cfg.scheme == Scheme::Cg {
                Discretization::Cg
            } else {
                Discretization::Dg
            };
            let setup = ElasticSetup {
                case: case.name().into(),
                load_case: Some(case),
                method: cfg.scheme.name().into(),
                n,
                problem: run::elastic_problem(mesh, d, material, cfg.gamma0, Some(case))?,
                newton: cfg.newton.apply(NewtonConfig::elasticity()),
            };
            let outcome = run::run_elastic(&setup, &out)?;
            let summary = Summary::from_runs("solve", case.name(), n, vec![outcome.summary]);
            finish(summary, &out, &run::stem(case.name(), cfg.scheme.name(), n))
        }
    }
}

fn mms(levels: &[usize], output_dir: PathBuf) -> Result<bool, CliError> {
    let out = OutputSettings {
        dir: output_dir,
        exploded: false,
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) || levels.contains(&0) {
        return Err(CliError::Config(format!(
            "--levels must be positive and strictly increasing, got {levels:?}"
        )));
    }
    out.prepare()?;
    let study = poisson_mms(levels)?;
    let csv = out.dir.join("mms.csv");
    run::write_file(&csv, &study.to_csv())?;
    let runs = study
        .levels
        .iter()
        .enumerate()
        .map(|(i, n)| run::RunSummary {
            method: format!("dg-classical n{n}"),
            status: "converged".into(),
            message: None,
            final_residual: study.residuals[i],
            iterations: 1,
            accepted_steps: 1,
            rejected_steps: 0,
            symmetry_defect: study.symmetry_defects[i],
            outputs: Vec::new(),
            diagnostics: [
                ("l2_error".to_string(), study.l2_errors[i]),
                ("h1_error".to_string(), study.h1_errors[i]),
            ]
            .into(),
        })
        .collect();
    let mut summary =
        Summary::from_runs("mms", "poisson", *levels.last().expect("non-empty"), runs);
    summary.outputs.insert(0, csv.display().to_string());
    summary.study = Some((&study).into());
    finish(summary, &out, "mms")
}

fn case(
    name: CaseName,
    method: Method,
    n: Option<usize>,
    scheme: PlasticityScheme,
    load_steps: Option<usize>,
    out: &OutputSettings,
) -> Result<bool, CliError> {
    out.prepare()?;
    let methods: &[(Scheme, &str)] = match method {
        Method::Dg => &[(Scheme::DgClassical, "dg")],
        Method::Cg => &[(Scheme::Cg, "cg")],
        Method::Both => &[(Scheme::Cg, "cg"), (Scheme::DgClassical, "dg")],
    };
    let method_name = match method {
        Method::Dg => "dg",
        Method::Cg => "cg",
        Method::Both => "both",
    };
    let mut runs = Vec::new();
    let mut fields = Vec::new();
    let (case_name, n) = match name {
        CaseName::Plasticity => {
            let n = n.unwrap_or(16);
            if n == 0 {
                return Err(CliError::Config("--n must be positive".into()));
            }
            for &(s, label) in methods {
                let dg_scheme = match (s, scheme) {
                    (Scheme::Cg, _) => Scheme::Cg,
                    (_, PlasticityScheme::Classical) => Scheme::DgClassical,
                    (_, PlasticityScheme::Hybrid) => Scheme::DgHybrid,
                };
                let base = plasticity_problem(n, ScalarScheme::Classical)?;
                let problem = run::scalar_problem(
                    base.mesh.clone(),
                    dg_scheme,
                    base.material.clone(),
                    base.gamma0,
                )?
                .with_source(move |x| (base.source)(x));
                let mut newton = NewtonConfig::default();
                if let Some(k) = load_steps {
                    newton.load_steps = k;
                }
                let setup = ScalarSetup {
                    case: "plasticity".into(),
                    method: label.into(),
                    n,
                    problem,
                    newton,
                    direct: false,
                    exact: None,
                };
                let outcome = run::run_scalar(&setup, out)?;
                fields.push((
                    setup.problem.mesh.clone(),
                    setup.problem.space.clone(),
                    outcome.solution,
                ));
                runs.push(outcome.summary);
            }
            ("plasticity", n)
        }
        other => {
            let case = match other {
                CaseName::Twist => LoadCase::Twist,
                CaseName::Stretch => LoadCase::Stretch,
                _ => LoadCase::Bend,
            };
            let n = n.unwrap_or(case.default_n());
            if n == 0 {
                return Err(CliError::Config("--n must be positive".into()));
            }
            let mesh = Arc::new(case.mesh(n)?);
            for &(s, label) in methods {
                let d = if s == Scheme::Cg {
                    Discretization::Cg
                } else {
                    Discretization::Dg
                };
                let material = MooneyRivlinMaterial::new(200.0, 0.33)?;
                let mut newton = NewtonConfig::elasticity();
                if let Some(k) = load_steps {
                    newton.load_steps = k;
                }
                let setup = ElasticSetup {
                    case: case.name().into(),
                    load_case: Some(case),
                    method: label.into(),
                    n,
                    problem: run::elastic_problem(mesh.clone(), d, material, None, Some(case))?,
                    newton,
                };
                let outcome = run::run_elastic(&setup, out)?;
                fields.push((mesh.clone(), setup.problem.space.clone(), outcome.solution));
                runs.push(outcome.summary);
            }
            (case.name(), n)
        }
    };
    let mut summary = Summary::from_runs("case", case_name, n, runs);
    if let [(mesh, cg_space, Some(cg)), (_, dg_space, Some(dg))] = fields.as_slice() {
        summary.dg_cg_l2_diff = Some(run::dg_cg_difference(mesh, (dg_space, dg), (cg_space, cg))?);
    }
    finish(summary, out, &run::stem(case_name, method_name, n))
}

fn info() -> Result<bool, CliError> {
    let info = serde_json::json!({
        "command": "info",
        "name": "dgnewton",
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "problems": ["poisson", "plasticity", "hyperelastic"],
        "schemes": ["nitsche", "dg-classical", "dg-hybrid", "cg"],
        "cases": ["twist", "stretch", "bend", "plasticity"],
        "methods": ["dg", "cg", "both"],
        "subcommands": ["solve", "mms", "case", "info"],
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&info).expect("static JSON")
    );
    Ok(true)
}
