use crate::error::{config_err, Error, Result};
use crate::model::{
    optimistic_prob, purchase_prob, ArrivalSchedule, Omega, ProblemInstance, Theta,
};

use super::{solve, LinearProgram, Sense};

/// Variable layout of an allocation LP: one share per (arm, type), arms in
/// resource order followed by the reject arm when enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocationIndex {
    pub resources: usize,
    pub types: usize,
    pub reject: bool,
}

impl AllocationIndex {
    pub fn arms(&self) -> usize {
        self.resources + usize::from(self.reject)
    }

    pub fn num_vars(&self) -> usize {
        self.arms() * self.types
    }

    /// Column of `s_ij`; `arm == resources` addresses the reject arm.
    pub fn var(&self, arm: usize, ty: usize) -> usize {
        debug_assert!(arm < self.arms() && ty < self.types);
        arm * self.types + ty
    }

    /// Unpacks a primal vector into a plan. The returned matrix always has a
    /// reject row (all zeros when the reject arm is disabled).
    pub fn plan(&self, values: &[f64], objective: f64) -> AllocationPlan {
        let mut shares = vec![vec![0.0; self.types]; self.resources + 1];
        for arm in 0..self.arms() {
            for ty in 0..self.types {
                shares[arm][ty] = values[self.var(arm, ty)].max(0.0);
            }
        }
        AllocationPlan { shares, objective }
    }
}

/// Solved allocation: `shares[arm][type]`, reject arm last.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub shares: Vec<Vec<f64>>,
    pub objective: f64,
}

impl AllocationPlan {
    /// Distribution over arms (resources then reject) for one customer type.
    pub fn column(&self, ty: usize) -> Vec<f64> {
        self.shares.iter().map(|row| row[ty]).collect()
    }
}

/// Allocation LP over shares `s_ij` with purchase coefficients `coef[i][j]`:
///
/// ```text
/// max  sum_i r_i sum_j lambda_j s_ij coef_ij
/// s.t. sum_j lambda_j s_ij coef_ij <= c_i      for each resource i
///      sum_i s_ij = 1                          for each type j (reject arm included)
///      s >= 0
/// ```
pub fn allocation_lp(
    instance: &ProblemInstance,
    coef: &[Vec<f64>],
) -> (LinearProgram, AllocationIndex) {
    let idx = AllocationIndex {
        resources: instance.num_resources(),
        types: instance.num_types(),
        reject: instance.reject_arm,
    };
    let mut objective = vec![0.0; idx.num_vars()];
    for (i, res) in instance.resources.iter().enumerate() {
        for (j, lam) in instance.total_rates.iter().enumerate() {
            objective[idx.var(i, j)] = res.revenue * lam * coef[i][j];
        }
    }
    let mut lp = LinearProgram::new(objective);
    for (i, res) in instance.resources.iter().enumerate() {
        let mut row = vec![0.0; idx.num_vars()];
        for (j, lam) in instance.total_rates.iter().enumerate() {
            row[idx.var(i, j)] = lam * coef[i][j];
        }
        lp.add_row(row, Sense::Le, res.capacity);
    }
    for j in 0..idx.types {
        let mut row = vec![0.0; idx.num_vars()];
        for arm in 0..idx.arms() {
            row[idx.var(arm, j)] = 1.0;
        }
        lp.add_row(row, Sense::Eq, 1.0);
    }
    (lp, idx)
}

/// `(probabilities, maximizers)`, both indexed `[resource][type]`.
pub type OptimisticTable = (Vec<Vec<f64>>, Vec<Vec<usize>>);

/// Optimistic purchase probabilities and their maximizers, `[resource][type]`.
pub fn optimistic_coefficients(
    instance: &ProblemInstance,
    omegas: &[Omega],
) -> Result<OptimisticTable> {
    if omegas.len() != instance.num_resources() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_resources(),
            actual: omegas.len(),
        });
    }
    let mut coef = Vec::with_capacity(omegas.len());
    let mut argmax = Vec::with_capacity(omegas.len());
    for (i, (res, omega)) in instance.resources.iter().zip(omegas).enumerate() {
        let mut c = Vec::with_capacity(instance.num_types());
        let mut a = Vec::with_capacity(instance.num_types());
        for ctx in &instance.contexts {
            let (p, k) = optimistic_prob(ctx, &res.theta_space, omega)
                .map_err(|_| Error::EmptyConfidenceSet { resource: i })?;
            c.push(p);
            a.push(k);
        }
        coef.push(c);
        argmax.push(a);
    }
    Ok((coef, argmax))
}

/// The optimistic per-period LP, with `max_{w in Omega_i} f_i(x_j, w)` as
/// purchase coefficients.
pub fn build_optimistic_lp(
    instance: &ProblemInstance,
    omegas: &[Omega],
) -> Result<(LinearProgram, AllocationIndex)> {
    let (coef, _) = optimistic_coefficients(instance, omegas)?;
    Ok(allocation_lp(instance, &coef))
}

/// The allocation LP with one fixed parameter per resource.
pub fn build_param_lp(
    instance: &ProblemInstance,
    thetas: &[Theta],
) -> Result<(LinearProgram, AllocationIndex)> {
    if thetas.len() != instance.num_resources() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_resources(),
            actual: thetas.len(),
        });
    }
    let coef = thetas
        .iter()
        .map(|th| {
            instance
                .contexts
                .iter()
                .map(|ctx| purchase_prob(ctx, th))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(allocation_lp(instance, &coef))
}

/// Deterministic revenue upper bound over periods `1..=t`, in aggregate form:
/// `y_ij` is the expected number of type-`j` customers sent to resource `i`.
///
/// ```text
/// max  sum_ij r_i f*_ij y_ij
/// s.t. sum_j f*_ij y_ij <= c_i
///      sum_i y_ij = sum_{s <= t} mu_j^s
///      y >= 0
/// ```
///
/// `t = 0` is accepted and yields 0.
pub fn benchmark_jd(
    instance: &ProblemInstance,
    schedule: &ArrivalSchedule,
    t: usize,
) -> Result<f64> {
    if t > instance.horizon || t > schedule.horizon() {
        return Err(config_err(format!(
            "benchmark period {t} beyond the horizon {}",
            instance.horizon
        )));
    }
    if schedule.num_types() != instance.num_types() {
        return Err(Error::DimensionMismatch {
            expected: instance.num_types(),
            actual: schedule.num_types(),
        });
    }
    let demand = schedule.cumulative(t);
    if demand.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let f = instance.true_probs();
    let idx = AllocationIndex {
        resources: instance.num_resources(),
        types: instance.num_types(),
        reject: instance.reject_arm,
    };
    let mut objective = vec![0.0; idx.num_vars()];
    for (i, res) in instance.resources.iter().enumerate() {
        for j in 0..idx.types {
            objective[idx.var(i, j)] = res.revenue * f[i][j];
        }
    }
    let mut lp = LinearProgram::new(objective);
    for (i, res) in instance.resources.iter().enumerate() {
        let mut row = vec![0.0; idx.num_vars()];
        for j in 0..idx.types {
            row[idx.var(i, j)] = f[i][j];
        }
        lp.add_row(row, Sense::Le, res.capacity);
    }
    for (j, d) in demand.iter().enumerate() {
        let mut row = vec![0.0; idx.num_vars()];
        for arm in 0..idx.arms() {
            row[idx.var(arm, j)] = 1.0;
        }
        lp.add_row(row, Sense::Eq, *d);
    }
    let sol = solve(&lp);
    if !sol.is_optimal() {
        return Err(Error::Lp(sol.status));
    }
    Ok(sol.objective_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{oracle::vertex_enumeration, LpStatus};
    use crate::model::{Context, ResourceSpec};

    /// One resource, one type, fixed purchase probability `p` (d = 1).
    fn single(p: f64, lam: f64, cap: f64) -> ProblemInstance {
        let z = (p / (1.0 - p)).ln();
        ProblemInstance::new(
            vec![ResourceSpec {
                revenue: 1.0,
                capacity: cap,
                theta_space: vec![Theta(vec![z])],
                true_theta: 0,
            }],
            vec![Context::new(0, vec![1.0])],
            lam as usize,
            vec![lam],
            true,
        )
        .unwrap()
    }

    #[test]
    fn slack_capacity_assigns_everything() {
        let inst = single(0.5, 10.0, 10.0);
        let (lp, idx) = build_optimistic_lp(&inst, &[Omega::full(1)]).unwrap();
        let sol = solve(&lp);
        assert!((sol.objective_value - 5.0).abs() < 1e-9);
        assert!((sol.values[idx.var(0, 0)] - 1.0).abs() < 1e-9);
        let (oracle, _) = vertex_enumeration(&lp).unwrap();
        assert!((oracle - 5.0).abs() < 1e-9);
    }

    #[test]
    fn binding_capacity_spills_to_reject() {
        // f = 1 is not representable by a logistic; build the LP from raw coefficients.
        let inst = single(0.5, 10.0, 4.0);
        let (lp, idx) = allocation_lp(&inst, &[vec![1.0]]);
        let sol = solve(&lp);
        assert!((sol.objective_value - 4.0).abs() < 1e-9);
        assert!((sol.values[idx.var(0, 0)] - 0.4).abs() < 1e-9);
        assert!((sol.values[idx.var(1, 0)] - 0.6).abs() < 1e-9);
        let (oracle, _) = vertex_enumeration(&lp).unwrap();
        assert!((oracle - 4.0).abs() < 1e-9);
    }

    #[test]
    fn no_reject_arm_can_be_infeasible() {
        let mut inst = single(0.5, 10.0, 4.0);
        inst.reject_arm = false;
        let (lp, _) = allocation_lp(&inst, &[vec![1.0]]);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn singleton_omega_matches_param_lp() {
        let inst = single(0.7, 10.0, 4.0);
        let (a, _) = build_optimistic_lp(&inst, &[Omega::full(1)]).unwrap();
        let (b, _) = build_param_lp(&inst, &[inst.resources[0].theta_space[0].clone()]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn benchmark_empty_prefix_is_zero() {
        let inst = single(0.5, 10.0, 4.0);
        let sched = ArrivalSchedule::from_rows(vec![vec![1.0]; 10]).unwrap();
        assert_eq!(benchmark_jd(&inst, &sched, 0).unwrap(), 0.0);
        assert!(benchmark_jd(&inst, &sched, 11).is_err());
    }
}
