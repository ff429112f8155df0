//! Small dense linear programs: a two-phase primal simplex, an independent
//! vertex-enumeration oracle, and builders for the allocation LPs.

mod build;
pub mod oracle;
mod simplex;

pub use build::{
    allocation_lp, benchmark_jd, build_optimistic_lp, build_param_lp, optimistic_coefficients,
    AllocationIndex, AllocationPlan,
};
pub use simplex::solve;

use serde::{Deserialize, Serialize};

/// Feasibility tolerance on constraint residuals of an optimal solution.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `maximize objective . x` subject to `rows[k] . x (sense) rhs[k]`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(coeffs);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn is_well_formed(&self) -> bool {
        let n = self.num_vars();
        self.rows.len() == self.senses.len()
            && self.rows.len() == self.rhs.len()
            && self.rows.iter().all(|r| r.len() == n)
            && self.objective.iter().all(|c| c.is_finite())
            && self.rows.iter().flatten().all(|c| c.is_finite())
            && self.rhs.iter().all(|b| b.is_finite())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint violation of `x`, including nonnegativity.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for ((row, sense), b) in self.rows.iter().zip(&self.senses).zip(&self.rhs) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match sense {
                Sense::Le => lhs - b,
                Sense::Ge => b - lhs,
                Sense::Eq => (lhs - b).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub(crate) fn failed(status: LpStatus, n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            objective_value: match status {
                LpStatus::Unbounded => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            status,
        }
    }
}
