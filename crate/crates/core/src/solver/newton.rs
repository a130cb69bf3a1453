use std::fmt::Write as _;

use super::sparse::{linear_solve_with, norm, LinearSolverOptions, SparseSymmetricSystem};
use crate::error::{Error, Result};

/// A discretized nonlinear problem seen by the Newton driver.
pub trait NonlinearProblem {
    fn num_dofs(&self) -> usize;

    /// Tangent `K` and right-hand side `b = -R(u)` at the iterate `u`, with
    /// the external loads scaled by `load_factor`.
    fn assemble(&self, u: &[f64], load_factor: f64) -> Result<SparseSymmetricSystem>;
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
    pub load_steps: usize,
    /// Maximum number of times one load increment may be halved.
    pub max_halvings: usize,
    pub linear: LinearSolverOptions,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_rel: 1e-8,
            tol_abs: 1e-10,
            max_iter: 30,
            load_steps: 1,
            max_halvings: 6,
            linear: LinearSolverOptions::default(),
        }
    }
}

impl NewtonConfig {
    /// Defaults for finite elasticity (ten load steps).
    pub fn elasticity() -> Self {
        NewtonConfig {
            load_steps: 10,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0)
            || !(self.tol_abs > 0.0)
            || self.max_iter == 0
            || self.load_steps == 0
        {
            return Err(Error::InvalidParameter(format!(
                "Newton tolerances must be positive and max_iter, load_steps >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Load-step attempt, counting rejected attempts.
    pub step: usize,
    pub iter: usize,
    pub load_factor: f64,
    pub residual_norm: f64,
    /// Norm of the update solved from this iterate; zero when the iterate was accepted.
    pub increment_norm: f64,
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonTrace {
    pub records: Vec<IterationRecord>,
    pub status: NewtonStatus,
    /// Number of accepted load steps.
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl NewtonTrace {
    fn new() -> Self {
        NewtonTrace {
            records: Vec::new(),
            status: NewtonStatus::Failed("not started".into()),
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }

    /// Total number of linear solves (Newton updates).
    pub fn total_iterations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.increment_norm > 0.0)
            .count()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.residual_norm)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0, |m, r| m.max(r.symmetry_defect))
    }

    /// Records of one load-step attempt.
    pub fn step_records(&self, step: usize) -> Vec<&IterationRecord> {
        self.records.iter().filter(|r| r.step == step).collect()
    }

    /// Largest number of Newton updates spent in one accepted step.
    pub fn max_iterations_per_step(&self) -> usize {
        let mut steps: Vec<usize> = self.records.iter().map(|r| r.step).collect();
        steps.dedup();
        steps
            .into_iter()
            .map(|s| {
                self.step_records(s)
                    .iter()
                    .filter(|r| r.increment_norm > 0.0)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    /// CSV with columns `step,iter,load_factor,residual_norm,increment_norm,symmetry_defect`.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("step,iter,load_factor,residual_norm,increment_norm,symmetry_defect\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e}",
                r.step, r.iter, r.load_factor, r.residual_norm, r.increment_norm, r.symmetry_defect
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub u: Vec<f64>,
    pub trace: NewtonTrace,
}

enum StepOutcome {
    Converged,
    Rejected(String),
}

/// Newton's method with load stepping.
///
/// Load factors `k/N` are visited in turn starting from `u = 0`, each step
/// warm-started from the previous one. A step converges when
/// `‖b‖ <= tol_abs + tol_rel ‖b₀‖`, with `b₀` the right-hand side at the
/// start of the step. An inverted element, a failed linear solve, residual
/// growth over three consecutive iterations or running out of iterations
/// rejects the step; the increment is then halved, at most `max_halvings`
/// times per step.
pub fn newton_solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    config: &NewtonConfig,
) -> Result<NewtonSolution> {
    config.validate()?;
    let n = problem.num_dofs();
    let mut u = vec![0.0; n];
    let mut trace = NewtonTrace::new();
    let mut attempt = 0;
    let mut converged_load = 0.0;
    let base = 1.0 / config.load_steps as f64;

    for k in 1..=config.load_steps {
        let target = if k == config.load_steps {
            1.0
        } else {
            k as f64 * base
        };
        let mut halvings = 0;
        let mut increment = target - converged_load;
        while converged_load < target {
            let load = if converged_load + increment >= target * (1.0 - 1e-14) {
                target
            } else {
                converged_load + increment
            };
            let mut trial = u.clone();
            match newton_step(problem, config, &mut trial, load, attempt, &mut trace)? {
                StepOutcome::Converged => {
                    u = trial;
                    converged_load = load;
                    trace.accepted_steps += 1;
                }
                StepOutcome::Rejected(reason) => {
                    trace.rejected_steps += 1;
                    halvings += 1;
                    if halvings > config.max_halvings {
                        let reason =
                            format!("load factor {load}: {reason}; step-halving limit reached");
                        trace.status = NewtonStatus::Failed(reason.clone());
                        return Err(Error::NonConvergence {
                            reason,
                            trace: Box::new(trace),
                        });
                    }
                    increment *= 0.5;
                }
            }
            attempt += 1;
        }
    }
    trace.status = NewtonStatus::Converged;
    Ok(NewtonSolution { u, trace })
}

fn newton_step<P: NonlinearProblem + ?Sized>(
    problem: &P,
    config: &NewtonConfig,
    u: &mut [f64],
    load: f64,
    step: usize,
    trace: &mut NewtonTrace,
) -> Result<StepOutcome> {
    let mut r0 = None;
    let mut previous = f64::INFINITY;
    let mut growth = 0;
    for iter in 0..=config.max_iter {
        let system = match problem.assemble(u, load) {
            Ok(s) => s,
            Err(Error::InvertedElement { cell, det }) => {
                return Ok(StepOutcome::Rejected(format!(
                    "inverted element {cell} (det F = {det:e})"
                )))
            }
            Err(e) => return Err(e),
        };
        let rnorm = system.residual_norm();
        let defect = system.symmetry_defect();
        let mut record = IterationRecord {
            step,
            iter,
            load_factor: load,
            residual_norm: rnorm,
            increment_norm: 0.0,
            symmetry_defect: defect,
        };
        let r0v = *r0.get_or_insert(rnorm);
        if !rnorm.is_finite() {
            trace.records.push(record);
            return Ok(StepOutcome::Rejected("non-finite residual".into()));
        }
        if rnorm <= config.tol_abs + config.tol_rel * r0v {
            trace.records.push(record);
            return Ok(StepOutcome::Converged);
        }
        if rnorm > previous {
            growth += 1;
            if growth >= 3 {
                trace.records.push(record);
                return Ok(StepOutcome::Rejected(
                    "residual grew over 3 iterations".into(),
                ));
            }
        } else {
            growth = 0;
        }
        previous = rnorm;
        if iter == config.max_iter {
            trace.records.push(record);
            break;
        }
        let du = match linear_solve_with(&system, &config.linear) {
            Ok(du) => du,
            Err(e @ (Error::NotPositiveDefinite(_) | Error::LinearSolveFailed { .. })) => {
                trace.records.push(record);
                return Ok(StepOutcome::Rejected(e.to_string()));
            }
            Err(e) => return Err(e),
        };
        record.increment_norm = norm(&du);
        trace.records.push(record);
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += di;
        }
    }
    Ok(StepOutcome::Rejected(format!(
        "no convergence in {} iterations",
        config.max_iter
    )))
}
