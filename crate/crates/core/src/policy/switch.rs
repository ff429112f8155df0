//! Monitor deciding when the unified policy leaves the LP protocol for the
//! inventory-balancing protocol.
//!
//! Two running sums are tracked while the LP protocol is in force:
//!
//! 1. per candidate parameter `w`: `sum_l sum_i r_i (s_i(w) - sbar_i^l) f_i(x^l, w)`
//!    where `s(w)` solves the allocation LP with `w` plugged in, checked
//!    against `max_i r_i * sqrt(32 t ln(4 |Theta| t / beta))`;
//! 2. per resource: `sum_l sbar_i^l fbar_i(x^l)`, checked against
//!    `(t/T) c_i + sqrt(2 t ln(2t / beta))`.
//!
//! Candidates are the distinct parameter vectors across all resources. A
//! candidate is substituted for resource `i` only when it belongs to
//! `Theta_i`; other resources keep their optimistic coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{allocation_lp, solve, AllocationPlan};
use crate::model::{purchase_prob, ProblemInstance, Theta};

use super::confidence::ConfidenceState;

/// How `|Theta|` in the regret-growth threshold is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaCardinality {
    /// `sum_i |Theta_i|`
    #[default]
    Sum,
    /// `max_i |Theta_i|`
    Max,
}

#[derive(Debug, Clone)]
struct CachedParamPlan {
    generation: u64,
    plan: AllocationPlan,
    coef: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchCause {
    RegretGrowth { candidate: usize },
    Consumption { resource: usize },
}

#[derive(Debug, Clone)]
pub struct SwitchMonitor {
    switched: bool,
    switch_period: Option<usize>,
    cause: Option<SwitchCause>,
    candidates: Vec<Theta>,
    /// `[candidate][resource]` -> position in that resource's parameter space.
    membership: Vec<Vec<Option<usize>>>,
    cond1_sums: Vec<f64>,
    cond2_sums: Vec<f64>,
    cache: Vec<Option<CachedParamPlan>>,
    theta_count: f64,
}

impl SwitchMonitor {
    pub fn new(instance: &ProblemInstance, cardinality: ThetaCardinality) -> Self {
        let mut candidates: Vec<Theta> = Vec::new();
        for res in &instance.resources {
            for th in &res.theta_space {
                if !candidates.contains(th) {
                    candidates.push(th.clone());
                }
            }
        }
        let membership = candidates
            .iter()
            .map(|c| {
                instance
                    .resources
                    .iter()
                    .map(|r| r.theta_space.iter().position(|t| t == c))
                    .collect()
            })
            .collect();
        let sizes = instance.resources.iter().map(|r| r.theta_space.len());
        let theta_count = match cardinality {
            ThetaCardinality::Sum => sizes.sum::<usize>(),
            ThetaCardinality::Max => sizes.max().unwrap_or(1),
        } as f64;
        Self {
            switched: false,
            switch_period: None,
            cause: None,
            cache: vec![None; candidates.len()],
            cond1_sums: vec![0.0; candidates.len()],
            cond2_sums: vec![0.0; instance.num_resources()],
            candidates,
            membership,
            theta_count,
        }
    }

    pub fn switched(&self) -> bool {
        self.switched
    }

    pub fn switch_period(&self) -> Option<usize> {
        self.switch_period
    }

    pub fn cause(&self) -> Option<SwitchCause> {
        self.cause
    }

    pub fn candidates(&self) -> &[Theta] {
        &self.candidates
    }

    pub fn cond1_sums(&self) -> &[f64] {
        &self.cond1_sums
    }

    pub fn cond2_sums(&self) -> &[f64] {
        &self.cond2_sums
    }

    pub fn regret_threshold(&self, instance: &ProblemInstance, beta: f64, t: usize) -> f64 {
        let t = t as f64;
        instance.max_revenue() * (32.0 * t * (4.0 * self.theta_count * t / beta).ln()).sqrt()
    }

    pub fn consumption_threshold(
        &self,
        instance: &ProblemInstance,
        beta: f64,
        resource: usize,
        t: usize,
    ) -> f64 {
        let tf = t as f64;
        tf / instance.horizon as f64 * instance.resources[resource].capacity
            + (2.0 * tf * (2.0 * tf / beta).ln()).sqrt()
    }

    fn alive(&self, k: usize, confidence: &ConfidenceState) -> bool {
        self.membership[k]
            .iter()
            .enumerate()
            .any(|(i, m)| m.is_some_and(|pos| confidence.omega(i).contains(pos)))
    }

    fn param_plan(
        &mut self,
        k: usize,
        instance: &ProblemInstance,
        confidence: &ConfidenceState,
        optimistic: &[Vec<f64>],
    ) -> Result<&CachedParamPlan> {
        let generation = confidence.generation();
        if self.cache[k]
            .as_ref()
            .is_none_or(|c| c.generation != generation)
        {
            let mut coef = Vec::with_capacity(instance.num_resources());
            for (i, m) in self.membership[k].iter().enumerate() {
                match m {
                    Some(_) => coef.push(
                        instance
                            .contexts
                            .iter()
                            .map(|ctx| purchase_prob(ctx, &self.candidates[k]))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    None => coef.push(optimistic[i].clone()),
                }
            }
            let (lp, idx) = allocation_lp(instance, &coef);
            let sol = solve(&lp);
            if !sol.is_optimal() {
                return Err(Error::Lp(sol.status));
            }
            self.cache[k] = Some(CachedParamPlan {
                generation,
                plan: idx.plan(&sol.values, sol.objective_value),
                coef,
            });
        }
        Ok(self.cache[k].as_ref().expect("filled above"))
    }

    /// Adds period `t`'s increments and reports whether either condition is
    /// now violated. `plan` is the LP solution used this period and
    /// `optimistic` the coefficients `fbar_i(x_j)` under the pre-update sets.
    pub fn observe(
        &mut self,
        instance: &ProblemInstance,
        confidence: &ConfidenceState,
        plan: &AllocationPlan,
        optimistic: &[Vec<f64>],
        ty: usize,
        t: usize,
    ) -> Result<bool> {
        if self.switched {
            return Ok(true);
        }
        let beta = confidence.beta();
        let regret_thr = self.regret_threshold(instance, beta, t);
        let mut cause = None;

        for k in 0..self.candidates.len() {
            if !self.alive(k, confidence) {
                continue;
            }
            let cached = self.param_plan(k, instance, confidence, optimistic)?;
            let inc: f64 = instance
                .resources
                .iter()
                .enumerate()
                .map(|(i, res)| {
                    res.revenue
                        * (cached.plan.shares[i][ty] - plan.shares[i][ty])
                        * cached.coef[i][ty]
                })
                .sum();
            self.cond1_sums[k] += inc;
            if cause.is_none() && self.cond1_sums[k].abs() > regret_thr {
                cause = Some(SwitchCause::RegretGrowth { candidate: k });
            }
        }

        for (i, opt) in optimistic.iter().enumerate().take(instance.num_resources()) {
            self.cond2_sums[i] += plan.shares[i][ty] * opt[ty];
            if cause.is_none()
                && self.cond2_sums[i] > self.consumption_threshold(instance, beta, i, t)
            {
                cause = Some(SwitchCause::Consumption { resource: i });
            }
        }

        if cause.is_some() {
            self.switched = true;
            self.switch_period = Some(t);
            self.cause = cause;
        }
        Ok(self.switched)
    }
}
