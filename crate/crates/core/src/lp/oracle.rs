//! Brute-force reference solver: enumerate every basic solution (every choice
//! of `n` constraints, counting `x_k >= 0` as constraints, held at equality),
//! keep the feasible ones, and return the best. Exponential, for small LPs
//! only. Shares no code with the simplex path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{LinearProgram, LpSolution, LpStatus, Sense, FEAS_TOL};

const ORACLE_FEAS_TOL: f64 = 1e-9;

/// Best vertex `(objective, x)`, or `None` when no basic feasible solution
/// exists (the LP is infeasible, since `x >= 0` makes every nonempty feasible
/// region pointed). The caller is responsible for boundedness.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let total = m + n;
    if n == 0 {
        return lp
            .rhs
            .iter()
            .zip(&lp.senses)
            .all(|(b, s)| match s {
                Sense::Le => *b >= -ORACLE_FEAS_TOL,
                Sense::Ge => *b <= ORACLE_FEAS_TOL,
                Sense::Eq => b.abs() <= ORACLE_FEAS_TOL,
            })
            .then(|| (0.0, Vec::new()));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen: Vec<usize> = (0..n).collect();
    if total < n {
        return None;
    }
    loop {
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (r, &c) in chosen.iter().enumerate() {
            if c < m {
                for k in 0..n {
                    a[(r, k)] = lp.rows[c][k];
                }
                b[r] = lp.rhs[c];
            } else {
                a[(r, c - m)] = 1.0;
            }
        }
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= ORACLE_FEAS_TOL {
                let obj = lp.evaluate(&x);
                if best.as_ref().is_none_or(|(bo, _)| obj > *bo) {
                    best = Some((obj, x));
                }
            }
        }
        if !next_combination(&mut chosen, total) {
            break;
        }
    }
    best
}

/// Random bounded LP with at most `max_vars` variables and `max_rows` rows.
/// The first row caps `sum x`, so every feasible instance is bounded. About
/// half the instances use coefficients on a half-integer lattice, which
/// produces ties and degenerate vertices.
pub fn random_lp<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars.max(1));
    let m = rng.random_range(1..=max_rows.max(1));
    let lattice = rng.random_bool(0.5);
    let draw = |rng: &mut R, lo: f64, hi: f64| {
        let v = rng.random_range(lo..hi);
        if lattice {
            (v * 2.0).round() / 2.0
        } else {
            v
        }
    };
    let objective = (0..n).map(|_| draw(rng, -2.0, 3.0)).collect();
    let mut lp = LinearProgram::new(objective);
    let cap = draw(rng, 1.0, 10.0);
    lp.add_row(vec![1.0; n], Sense::Le, cap);
    for _ in 1..m {
        let row = (0..n).map(|_| draw(rng, -3.0, 3.0)).collect();
        let sense = match rng.random_range(0..5) {
            0 => Sense::Ge,
            1 => Sense::Eq,
            _ => Sense::Le,
        };
        let rhs = draw(rng, -2.0, 6.0);
        lp.add_row(row, sense, rhs);
    }
    lp
}

/// Compares a solver's answer on a bounded LP with vertex enumeration.
/// Returns a description of the first disagreement.
pub fn check_against_oracle(lp: &LinearProgram, sol: &LpSolution) -> Option<String> {
    match vertex_enumeration(lp) {
        None => (sol.status != LpStatus::Infeasible)
            .then(|| format!("oracle finds no vertex, solver reports {:?}", sol.status)),
        Some((obj, _)) => {
            if sol.status != LpStatus::Optimal {
                return Some(format!(
                    "oracle optimum {obj}, solver reports {:?}",
                    sol.status
                ));
            }
            let viol = lp.max_violation(&sol.values);
            if viol > FEAS_TOL {
                return Some(format!("solver point violates a constraint by {viol:e}"));
            }
            let gap = (sol.objective_value - obj).abs();
            let recomputed = (lp.evaluate(&sol.values) - sol.objective_value).abs();
            if gap > 1e-8 || recomputed > 1e-8 {
                return Some(format!(
                    "objective {} differs from oracle {obj} by {gap:e}",
                    sol.objective_value
                ));
            }
            None
        }
    }
}

fn next_combination(c: &mut [usize], total: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < total - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
