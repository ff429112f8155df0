//! Per-resource confidence sets over the candidate parameters.
//!
//! Every time resource `i` is offered with optimistic parameter `w`, the
//! period joins `D_i(w)` and two families of running sums grow:
//!
//! - residual: `sum (f_i(x, w) - a)` over `D_i(w)`,
//! - gap: `sum (f_i(x, w) - f_i(x, v))` over `D_i(w)`, for every `v` still alive.
//!
//! `w` is dropped from `Omega_i` as soon as either magnitude exceeds
//! `m * sqrt(t * ln(2t / beta))` with `beta = 1/(nT)`. The last surviving
//! parameter of a resource is never dropped.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{purchase_prob, Context, Omega, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RemovalReason {
    Residual,
    Gap { against: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub period: usize,
    pub resource: usize,
    pub theta: usize,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone)]
pub struct ConfidenceState {
    omega: Vec<Omega>,
    d_sets: Vec<Vec<Vec<usize>>>,
    residual_sums: Vec<Vec<f64>>,
    gap_sums: Vec<Vec<Vec<f64>>>,
    beta: f64,
    multiplier: f64,
    generation: u64,
    removals: Vec<Removal>,
    suppressed: usize,
}

impl ConfidenceState {
    pub fn new(instance: &ProblemInstance, multiplier: f64) -> Self {
        let sizes: Vec<usize> = instance
            .resources
            .iter()
            .map(|r| r.theta_space.len())
            .collect();
        Self {
            omega: sizes.iter().map(|&k| Omega::full(k)).collect(),
            d_sets: sizes.iter().map(|&k| vec![Vec::new(); k]).collect(),
            residual_sums: sizes.iter().map(|&k| vec![0.0; k]).collect(),
            gap_sums: sizes.iter().map(|&k| vec![vec![0.0; k]; k]).collect(),
            beta: 1.0 / (instance.num_resources() as f64 * instance.horizon as f64),
            multiplier,
            generation: 0,
            removals: Vec::new(),
            suppressed: 0,
        }
    }

    pub fn omegas(&self) -> &[Omega] {
        &self.omega
    }

    pub fn omega(&self, resource: usize) -> &Omega {
        &self.omega[resource]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Bumped on every removal; cached LP solutions key on it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn removals(&self) -> &[Removal] {
        &self.removals
    }

    /// Removals skipped because they would have emptied a set.
    pub fn suppressed_removals(&self) -> usize {
        self.suppressed
    }

    pub fn periods(&self, resource: usize, theta: usize) -> &[usize] {
        &self.d_sets[resource][theta]
    }

    pub fn residual_sum(&self, resource: usize, theta: usize) -> f64 {
        self.residual_sums[resource][theta]
    }

    pub fn gap_sum(&self, resource: usize, theta: usize, against: usize) -> f64 {
        self.gap_sums[resource][theta][against]
    }

    pub fn threshold(&self, t: usize) -> f64 {
        let t = t as f64;
        self.multiplier * (t * (2.0 * t / self.beta).ln()).sqrt()
    }

    /// Records the outcome of offering `resource` at period `t` with
    /// optimistic parameter `maximizer`, and drops the maximizer if either
    /// test fails.
    pub fn update(
        &mut self,
        instance: &ProblemInstance,
        resource: usize,
        maximizer: usize,
        context: &Context,
        purchased: bool,
        t: usize,
    ) -> Result<Option<Removal>> {
        if !self.omega[resource].contains(maximizer) {
            return Err(Error::Config(format!(
                "parameter {maximizer} is not in the confidence set of resource {resource}"
            )));
        }
        let space = &instance.resources[resource].theta_space;
        let f_max = purchase_prob(context, &space[maximizer])?;
        let a = if purchased { 1.0 } else { 0.0 };

        self.d_sets[resource][maximizer].push(t);
        self.residual_sums[resource][maximizer] += f_max - a;
        let alive: Vec<usize> = self.omega[resource].iter().collect();
        for &v in &alive {
            let f_v = purchase_prob(context, &space[v])?;
            self.gap_sums[resource][maximizer][v] += f_max - f_v;
        }

        let thr = self.threshold(t);
        let reason = if self.residual_sums[resource][maximizer].abs() > thr {
            Some(RemovalReason::Residual)
        } else {
            alive
                .iter()
                .find(|&&v| self.gap_sums[resource][maximizer][v].abs() > thr)
                .map(|&v| RemovalReason::Gap { against: v })
        };
        let Some(reason) = reason else {
            return Ok(None);
        };
        if self.omega[resource].len() == 1 {
            warn!(
                "period {t}: resource {resource} would lose its last parameter {maximizer}; \
                 the parameter space looks misspecified"
            );
            self.suppressed += 1;
            return Ok(None);
        }
        self.omega[resource].remove(maximizer);
        self.generation += 1;
        let removal = Removal {
            period: t,
            resource,
            theta: maximizer,
            reason,
        };
        self.removals.push(removal);
        Ok(Some(removal))
    }
}
