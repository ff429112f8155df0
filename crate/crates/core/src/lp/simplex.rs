//! Dense two-phase primal simplex with Bland's pivoting rule.
//!
//! The tableau keeps `B^-1 A` and `B^-1 b` explicitly. Phase one minimises the
//! sum of artificial variables; phase two maximises the original objective
//! over the non-artificial columns. Bland's rule (lowest-index entering column,
//! lowest-index leaving basic variable on ratio ties) rules out cycling, so
//! the result depends only on the input.

use super::{LinearProgram, LpSolution, LpStatus, Sense};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const PHASE_ONE_TOL: f64 = 1e-9;

struct Tableau {
    /// `m` rows of `width + 1` entries; the last entry is the rhs.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.cells[r][self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.cells[row].clone();
        for (r, cells) in self.cells.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = cells[col];
            if factor != 0.0 {
                for (v, pv) in cells.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                cells[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Maximises `cost . x` over columns `0..allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> bool {
        loop {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &b)| cost[b] * self.cells[r][j])
                        .sum::<f64>();
                reduced > COST_EPS
            });
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.cells.len() {
                let a = self.cells[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_EPS
                                || (ratio <= lratio + PIVOT_EPS && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Solves `lp`. Infeasibility and unboundedness are reported through
/// [`LpSolution::status`].
pub fn solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.num_rows();

    // Normalise to nonnegative right-hand sides.
    let mut rows = lp.rows.clone();
    let mut rhs = lp.rhs.clone();
    let mut senses = lp.senses.clone();
    for k in 0..m {
        if rhs[k] < 0.0 {
            rhs[k] = -rhs[k];
            rows[k].iter_mut().for_each(|a| *a = -*a);
            senses[k] = match senses[k] {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    // Column layout: originals | slack/surplus | artificials.
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let art_start = n + n_slack;
    let width = art_start + n_art;

    let mut cells = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0; m];
    let mut next_slack = n;
    let mut next_art = art_start;
    for k in 0..m {
        cells[k][..n].copy_from_slice(&rows[k]);
        cells[k][width] = rhs[k];
        match senses[k] {
            Sense::Le => {
                cells[k][next_slack] = 1.0;
                basis[k] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                cells[k][next_slack] = -1.0;
                next_slack += 1;
                cells[k][next_art] = 1.0;
                basis[k] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                cells[k][next_art] = 1.0;
                basis[k] = next_art;
                next_art += 1;
            }
        }
    }
    let mut tab = Tableau {
        cells,
        basis,
        width,
    };

    if n_art > 0 {
        let mut phase_one = vec![0.0; width];
        phase_one[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.optimize(&phase_one, width);
        let infeasibility: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= art_start)
            .map(|r| tab.rhs(r))
            .sum();
        if infeasibility > PHASE_ONE_TOL * (1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(*b))) {
            return LpSolution::failed(LpStatus::Infeasible, n);
        }
        // Drive remaining (zero-level) artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(col) = (0..art_start).find(|&j| tab.cells[r][j].abs() > PIVOT_EPS) {
                    tab.pivot(r, col);
                }
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    if !tab.optimize(&cost, art_start) {
        return LpSolution::failed(LpStatus::Unbounded, n);
    }

    let mut values = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            values[b] = tab.rhs(r).max(0.0);
        }
    }
    LpSolution {
        objective_value: lp.evaluate(&values),
        values,
        status: LpStatus::Optimal,
    }
}
