//! Acceptance criteria. Every test prints one `PASS` or `FAIL` line.
//! The hyperelastic and plasticity runs are cached and shared between tests.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Matrix2, Matrix3, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgnewton::dg_elasticity::{Discretization, LoadCase};
use dgnewton::dg_scalar::{
    assemble_dg_classical, assemble_nitsche_linear, cell_tangents, estimate_inverse_constant,
    penalty_threshold, InverseFaces, ScalarDGProblem, ScalarScheme,
};
use dgnewton::materials::{
    AntiplaneShearMaterial, MooneyRivlinMaterial, ScalarLinearMaterial, ScalarMaterial,
};
use dgnewton::mesh::unit_square_mesh;
use dgnewton::solver::{linear_solve, set_deterministic, NewtonConfig, SparseSymmetricSystem};
use dgnewton::verification::{
    hyperelastic_case, plasticity_case, poisson_mms, poisson_patch_test, HyperelasticResult,
    MethodChoice, PlasticityResult, PLASTICITY_YIELD,
};
use dgnewton::Error;

fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "{} [{id}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn hyperelastic() -> &'static [Result<HyperelasticResult, String>] {
    static RUNS: OnceLock<Vec<Result<HyperelasticResult, String>>> = OnceLock::new();
    RUNS.get_or_init(|| {
        set_deterministic(true);
        LoadCase::ALL
            .iter()
            .map(|&c| {
                hyperelastic_case(
                    c,
                    MethodChoice::Both,
                    c.default_n(),
                    &NewtonConfig::elasticity(),
                )
                .map_err(|e| e.to_string())
            })
            .collect()
    })
}

fn plasticity(scheme: ScalarScheme) -> &'static PlasticityResult {
    static HYBRID: OnceLock<PlasticityResult> = OnceLock::new();
    static CLASSICAL: OnceLock<PlasticityResult> = OnceLock::new();
    let cell = if scheme == ScalarScheme::Hybrid {
        &HYBRID
    } else {
        &CLASSICAL
    };
    cell.get_or_init(|| {
        set_deterministic(true);
        plasticity_case(16, scheme, &NewtonConfig::default()).expect("plasticity run")
    })
}

fn poisson(n: usize, gamma0: f64) -> ScalarDGProblem {
    let mesh = Arc::new(unit_square_mesh(n).unwrap());
    ScalarDGProblem::new(
        mesh,
        Arc::new(ScalarLinearMaterial::new(1.0).unwrap()),
        gamma0,
    )
    .unwrap()
    .with_source(|x| (3.0 * x[0]).sin() + x[1])
    .with_dirichlet(|x| x[0] * x[1])
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn c1_symmetric_tangents() {
    let tol = 1e-12;
    let mut rows = vec![
        (
            "nitsche".to_string(),
            assemble_nitsche_linear(&poisson(16, 100.0))
                .unwrap()
                .symmetry_defect(),
        ),
        (
            "dg-classical".to_string(),
            plasticity(ScalarScheme::Classical)
                .solution
                .trace
                .max_symmetry_defect(),
        ),
        (
            "dg-hybrid".to_string(),
            plasticity(ScalarScheme::Hybrid)
                .solution
                .trace
                .max_symmetry_defect(),
        ),
    ];
    let mut all = true;
    for (case, r) in LoadCase::ALL.iter().zip(hyperelastic()) {
        match r {
            Ok(r) => {
                for run in &r.runs {
                    let name = if run.problem.discretization() == Discretization::Cg {
                        "cg"
                    } else {
                        "dg"
                    };
                    rows.push((
                        format!("{} {name}", case.name()),
                        run.solution.trace.max_symmetry_defect(),
                    ));
                }
            }
            Err(e) => {
                all = report(1, &format!("symmetry {}", case.name()), false, e);
            }
        }
    }
    for (name, defect) in rows {
        all &= report(
            1,
            &format!("symmetry {name}"),
            defect < tol,
            &format!("max defect {defect:.2e} (tol {tol:e})"),
        );
    }
    assert!(all);
}

#[test]
fn c2_linear_step_equals_nitsche() {
    let p = poisson(8, 100.0);
    let direct = linear_solve(&assemble_nitsche_linear(&p).unwrap()).unwrap();
    let step = linear_solve(&assemble_dg_classical(&p, &vec![0.0; direct.len()]).unwrap()).unwrap();
    let diff = direct
        .iter()
        .zip(&step)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let tol = 1e-12 * max_abs(&direct).max(1.0);
    assert!(report(
        2,
        "classical step equals Nitsche solve",
        diff <= tol,
        &format!("max diff {diff:.2e} (tol {tol:.1e})")
    ));
}

fn fd_stress(m: &MooneyRivlinMaterial, f: &Matrix3<f64>, h: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let (mut fp, mut fm) = (*f, *f);
        fp[(i, j)] += h;
        fm[(i, j)] -= h;
        (m.energy(&fp).unwrap() - m.energy(&fm).unwrap()) / (2.0 * h)
    })
}

#[test]
fn c3_constitutive_laws() {
    let m = MooneyRivlinMaterial::new(200.0, 0.33).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut stress_err, mut tangent_err) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let f = loop {
            let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.3..0.3));
            if f.determinant() > 0.2 {
                break f;
            }
        };
        let p = m.stress(&f).unwrap();
        stress_err = stress_err.max((p - fd_stress(&m, &f, 1e-5)).norm() / p.norm());
        let l = m.tangent(&f).unwrap();
        let h = 1e-6;
        let mut num = 0.0;
        for r in 0..9 {
            let (mut fp, mut fm) = (f, f);
            fp[(r / 3, r % 3)] += h;
            fm[(r / 3, r % 3)] -= h;
            let d = (m.stress(&fp).unwrap() - m.stress(&fm).unwrap()) / (2.0 * h);
            for q in 0..9 {
                num += (l.0[(q, r)] - d[(q / 3, q % 3)]).powi(2);
            }
        }
        tangent_err = tangent_err.max(num.sqrt() / l.0.norm());
    }
    let p0 = m.stress(&Matrix3::identity()).unwrap().abs().max();

    let plastic = AntiplaneShearMaterial::with_regularization(1.0, 1.0, 0.0, 1e-12).unwrap();
    let g = Vector2::new(3.0, 4.0);
    let s = plastic.stress(&g);
    let t = plastic.tangent(&g);
    let t_exact = Matrix2::new(16.0, -12.0, -12.0, 9.0) / 25.0;
    let elastic_g = Vector2::new(0.3, 0.4);
    let antiplane_ok = s == Vector2::new(0.6, 0.8)
        && (t - t_exact).abs().max() <= 1e-15
        && plastic.stress(&elastic_g) == elastic_g
        && plastic.tangent(&elastic_g) == Matrix2::identity()
        && (t * g).norm() <= 1e-15;

    let mut all = report(
        3,
        "Mooney-Rivlin stress vs FD of energy",
        stress_err <= 1e-6,
        &format!("max rel err {stress_err:.2e} (tol 1e-6)"),
    );
    all &= report(
        3,
        "Mooney-Rivlin tangent vs FD of stress",
        tangent_err <= 1e-4,
        &format!("max rel err {tangent_err:.2e} (tol 1e-4)"),
    );
    all &= report(
        3,
        "P(I) = 0",
        p0 <= 1e-12 * m.shear_modulus,
        &format!("max |P(I)| {p0:.2e} (tol {:.1e})", 1e-12 * m.shear_modulus),
    );
    all &= report(
        3,
        "antiplane branches",
        antiplane_ok,
        &format!(
            "σ(3,4) = ({}, {}), plastic tangent err {:.1e}",
            s[0],
            s[1],
            (t - t_exact).abs().max()
        ),
    );
    assert!(all);
}

#[test]
fn c4_manufactured_solution() {
    let study = poisson_mms(&[8, 16, 32]).unwrap();
    let l2 = study.l2_rates();
    let h1 = study.h1_rates();
    let l2_ok = l2.iter().all(|r| (r - 2.0).abs() <= 0.15);
    let h1_ok = h1.iter().all(|r| (r - 1.0).abs() <= 0.15);
    let patch =
        [ScalarScheme::Classical, ScalarScheme::Hybrid].map(|s| poisson_patch_test(4, s).unwrap());
    let mut all = report(4, "L2 rate", l2_ok, &format!("rates {l2:.3?} (2 ± 0.15)"));
    all &= report(
        4,
        "broken H1 rate",
        h1_ok,
        &format!("rates {h1:.3?} (1 ± 0.15)"),
    );
    all &= report(
        4,
        "linear patch test",
        patch.iter().all(|&e| e <= 1e-10),
        &format!(
            "max nodal error classical {:.1e}, hybrid {:.1e} (tol 1e-10)",
            patch[0], patch[1]
        ),
    );
    assert!(all);
}

#[test]
fn c5_plasticity_benchmark() {
    let r = plasticity(ScalarScheme::Hybrid);
    let iters = r.solution.trace.max_iterations_per_step();
    let converged = r.solution.trace.converged();
    let mut all = report(
        5,
        "hybrid converges on n=16",
        converged && iters <= 30,
        &format!("{iters} iterations per load step (max 30)"),
    );
    all &= report(
        5,
        "stress cap",
        r.fields.max_stress <= PLASTICITY_YIELD + 1e-8,
        &format!("max |σ| {:.16} (cap σ_Y + 1e-8)", r.fields.max_stress),
    );
    all &= report(
        5,
        "x1 <-> x2 symmetry",
        r.symmetry_defect <= 1e-8,
        &format!("max nodal defect {:.2e} (tol 1e-8)", r.symmetry_defect),
    );
    assert!(all);
}

#[test]
fn c6_hyperelastic_cases() {
    let mut all = true;
    for (case, r) in LoadCase::ALL.iter().zip(hyperelastic()) {
        match r {
            Ok(r) => {
                let diff = r.dg_cg_l2_diff.expect("both methods ran");
                let iters: Vec<usize> = r
                    .runs
                    .iter()
                    .map(|run| run.solution.trace.total_iterations())
                    .collect();
                all &= report(
                    6,
                    &format!("{} CG and DG converge", case.name()),
                    r.runs.iter().all(|run| run.solution.trace.converged()),
                    &format!(
                        "n = {}, Newton iterations cg {} dg {}",
                        r.n, iters[0], iters[1]
                    ),
                );
                all &= report(
                    6,
                    &format!("{} DG vs CG", case.name()),
                    diff < 0.05,
                    &format!("relative L2 difference {:.2}% (tol 5%)", 100.0 * diff),
                );
            }
            Err(e) => all = report(6, &format!("{} CG and DG converge", case.name()), false, e),
        }
    }
    assert!(all);
}

fn smallest_eigenvalue(s: &SparseSymmetricSystem) -> (usize, f64) {
    let n = s.matrix.n();
    let dense = DMatrix::from_row_slice(n, n, &s.matrix.to_dense());
    (n, SymmetricEigen::new(dense).eigenvalues.min())
}

#[test]
fn c7_coercivity_guard() {
    let base = poisson(4, 1.0);
    let tangents = cell_tangents(&base, &vec![0.0; base.space.total_dofs()]);
    let constants =
        estimate_inverse_constant(&base.mesh, &base.space, &tangents, InverseFaces::All).unwrap();
    let threshold = penalty_threshold(&constants, &tangents);

    let low = assemble_nitsche_linear(&poisson(4, threshold / 10.0)).unwrap();
    let low_result = linear_solve(&low);
    let rejected = matches!(low_result, Err(Error::NotPositiveDefinite(_)));
    let (_, low_eig) = smallest_eigenvalue(&low);

    let high = assemble_nitsche_linear(&poisson(4, 100.0)).unwrap();
    let (n, high_eig) = smallest_eigenvalue(&high);

    let detail = match &low_result {
        Err(e) => e.to_string(),
        Ok(_) => "factorization succeeded".into(),
    };
    let mut all = report(
        7,
        "γ0 = C_I k / 10 rejected",
        rejected,
        &format!("threshold {threshold:.3}, smallest eigenvalue {low_eig:.3e}: {detail}"),
    );
    all &= report(
        7,
        "γ0 = 100 k positive definite",
        n <= 200 && high_eig > 0.0,
        &format!("{n} DOFs, smallest eigenvalue {high_eig:.3e}"),
    );
    assert!(all);
}

#[test]
fn c8_deterministic_traces() {
    set_deterministic(true);
    let first = plasticity(ScalarScheme::Hybrid).solution.trace.to_csv();
    let second = plasticity_case(16, ScalarScheme::Hybrid, &NewtonConfig::default())
        .unwrap()
        .solution
        .trace
        .to_csv();
    let mut all = report(
        8,
        "plasticity trace CSV",
        first == second,
        &format!("{} bytes", first.len()),
    );

    let twist = hyperelastic()[0].as_ref().expect("twist run");
    let again = hyperelastic_case(
        LoadCase::Twist,
        MethodChoice::Both,
        twist.n,
        &NewtonConfig::elasticity(),
    )
    .unwrap();
    let same = twist
        .runs
        .iter()
        .zip(&again.runs)
        .all(|(a, b)| a.solution.trace.to_csv() == b.solution.trace.to_csv());
    all &= report(8, "twist trace CSV", same, "cg and dg traces compared");
    assert!(all);
}
