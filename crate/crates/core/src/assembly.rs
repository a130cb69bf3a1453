//! Dense local blocks and their scatter into a global system.

use crate::solver::{SparseSymmetricSystem, TripletBuilder};

/// Dense local contribution: `matrix` is row-major `dofs.len()²`.
pub struct Local {
    pub dofs: Vec<usize>,
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl Local {
    pub fn new(dofs: Vec<usize>) -> Self {
        let m = dofs.len();
        Local {
            dofs,
            matrix: vec![0.0; m * m],
            rhs: vec![0.0; m],
        }
    }

    /// Adds `value(p, q)` to the upper triangle.
    pub fn add_upper(&mut self, mut value: impl FnMut(usize, usize) -> f64) {
        let m = self.dofs.len();
        for p in 0..m {
            for q in p..m {
                self.matrix[p * m + q] += value(p, q);
            }
        }
    }

    pub fn mirror(&mut self) {
        let m = self.dofs.len();
        for p in 0..m {
            for q in p + 1..m {
                self.matrix[q * m + p] = self.matrix[p * m + q];
            }
        }
    }
}

pub fn gather(n: usize, locals: Vec<Local>) -> SparseSymmetricSystem {
    gather_constrained(n, locals, &[])
}

/// Scatters `locals`, replacing the rows and columns of `fixed` DOFs by the
/// identity and a zero right-hand side.
pub fn gather_constrained(n: usize, locals: Vec<Local>, fixed: &[bool]) -> SparseSymmetricSystem {
    let cap = locals.iter().map(|l| l.matrix.len()).sum();
    let mut t = TripletBuilder::with_capacity(n, cap);
    let mut rhs = vec![0.0; n];
    for l in &locals {
        t.add_block(&l.dofs, &l.matrix);
        for (d, r) in l.dofs.iter().zip(&l.rhs) {
            rhs[*d] += r;
        }
    }
    if !fixed.is_empty() {
        t.constrain(fixed);
    }
    for (r, &f) in rhs.iter_mut().zip(fixed) {
        if f {
            *r = 0.0;
        }
    }
    SparseSymmetricSystem {
        matrix: t.build(),
        rhs,
    }
}
