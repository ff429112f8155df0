//! Problem description: resources, customer types, arrival schedules, and the
//! two scalar primitives shared by every policy (the logistic purchase
//! probability and the inventory-balancing penalty).

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Row-sum tolerance for arrival probability rows.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance when matching a schedule against the instance's total rates.
pub const RATE_TOL: f64 = 1e-9;

/// A latent parameter vector for the purchase model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Vec<f64>);

impl Theta {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for Theta {
    fn from(v: Vec<f64>) -> Self {
        Theta(v)
    }
}

/// A customer type and its feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    pub id: usize,
    pub features: Vec<f64>,
}

impl Context {
    pub fn new(id: usize, features: Vec<f64>) -> Self {
        Self { id, features }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    pub revenue: f64,
    pub capacity: f64,
    pub theta_space: Vec<Theta>,
    /// Index into `theta_space` of the parameter that generates purchases.
    pub true_theta: usize,
}

impl ResourceSpec {
    pub fn true_param(&self) -> &Theta {
        &self.theta_space[self.true_theta]
    }

    /// Purchase probability under the true parameter.
    pub fn true_prob(&self, context: &Context) -> Result<f64> {
        purchase_prob(context, self.true_param())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInstance {
    pub resources: Vec<ResourceSpec>,
    pub contexts: Vec<Context>,
    pub horizon: usize,
    /// Expected number of arrivals of each type over the whole horizon.
    pub total_rates: Vec<f64>,
    /// Adds a virtual zero-revenue, unbounded resource to every allocation LP.
    pub reject_arm: bool,
}

impl ProblemInstance {
    pub fn new(
        resources: Vec<ResourceSpec>,
        contexts: Vec<Context>,
        horizon: usize,
        total_rates: Vec<f64>,
        reject_arm: bool,
    ) -> Result<Self> {
        let inst = Self {
            resources,
            contexts,
            horizon,
            total_rates,
            reject_arm,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn num_types(&self) -> usize {
        self.contexts.len()
    }

    pub fn dim(&self) -> usize {
        self.contexts.first().map_or(0, Context::dim)
    }

    pub fn max_revenue(&self) -> f64 {
        self.resources.iter().map(|r| r.revenue).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resources.is_empty() {
            return Err(config_err("at least one resource is required"));
        }
        if self.contexts.is_empty() {
            return Err(config_err("at least one customer type is required"));
        }
        if self.horizon == 0 {
            return Err(config_err("horizon must be at least 1"));
        }
        let d = self.dim();
        for (l, ctx) in self.contexts.iter().enumerate() {
            if ctx.id != l {
                return Err(config_err(format!(
                    "context ids must be 0..L in order; position {l} has id {}",
                    ctx.id
                )));
            }
            if ctx.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: ctx.dim(),
                });
            }
            if ctx.features.iter().any(|x| !x.is_finite()) {
                return Err(config_err(format!("context {l} has non-finite features")));
            }
        }
        for (i, res) in self.resources.iter().enumerate() {
            if !(res.revenue > 0.0 && res.revenue.is_finite()) {
                return Err(config_err(format!(
                    "resource {i}: revenue must be positive"
                )));
            }
            if !(res.capacity > 0.0 && res.capacity.is_finite()) {
                return Err(config_err(format!(
                    "resource {i}: capacity must be positive"
                )));
            }
            if res.theta_space.is_empty() {
                return Err(config_err(format!("resource {i}: empty parameter space")));
            }
            if res.true_theta >= res.theta_space.len() {
                return Err(config_err(format!(
                    "resource {i}: true_theta {} out of range",
                    res.true_theta
                )));
            }
            for th in &res.theta_space {
                if th.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: th.dim(),
                    });
                }
                if th.0.iter().any(|x| !x.is_finite()) {
                    return Err(config_err(format!("resource {i}: non-finite parameter")));
                }
            }
        }
        if self.total_rates.len() != self.num_types() {
            return Err(Error::DimensionMismatch {
                expected: self.num_types(),
                actual: self.total_rates.len(),
            });
        }
        if self
            .total_rates
            .iter()
            .any(|&l| !(l >= 0.0 && l.is_finite()))
        {
            return Err(config_err("total rates must be nonnegative"));
        }
        let sum: f64 = self.total_rates.iter().sum();
        if (sum - self.horizon as f64).abs() > RATE_TOL * (self.horizon as f64).max(1.0) {
            return Err(config_err(format!(
                "total rates sum to {sum}, expected the horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// True purchase probabilities, indexed `[resource][type]`.
    pub fn true_probs(&self) -> Vec<Vec<f64>> {
        self.resources
            .iter()
            .map(|res| {
                self.contexts
                    .iter()
                    .map(|ctx| logistic(dot(&ctx.features, &res.true_param().0)))
                    .collect()
            })
            .collect()
    }
}

/// One piece of a piecewise-constant schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    /// Share of the horizon covered by this segment.
    pub fraction: f64,
    pub probs: Vec<f64>,
}

/// Per-period arrival probabilities over customer types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSchedule {
    rows: Vec<Vec<f64>>,
}

impl ArrivalSchedule {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(config_err("schedule has no periods"));
        }
        let l = rows[0].len();
        if l == 0 {
            return Err(config_err("schedule rows are empty"));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    actual: row.len(),
                });
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(config_err(format!(
                    "period {}: probability outside [0,1]",
                    t + 1
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(config_err(format!("period {}: row sums to {s}", t + 1)));
            }
        }
        Ok(Self { rows })
    }

    /// Expands segments over `horizon` periods. Segment boundaries are placed at
    /// `round(horizon * cumulative_fraction)`; the last segment always ends at
    /// the horizon.
    pub fn from_segments(segments: &[Segment], horizon: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(config_err("schedule has no segments"));
        }
        let total: f64 = segments.iter().map(|s| s.fraction).sum();
        if segments
            .iter()
            .any(|s| s.fraction.is_nan() || s.fraction <= 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(config_err(format!(
                "segment fractions must be positive and sum to 1 (got {total})"
            )));
        }
        let mut rows = Vec::with_capacity(horizon);
        let mut cum = 0.0;
        for (k, seg) in segments.iter().enumerate() {
            cum += seg.fraction;
            let end = if k + 1 == segments.len() {
                horizon
            } else {
                ((horizon as f64) * cum).round() as usize
            };
            while rows.len() < end.min(horizon) {
                rows.push(seg.probs.clone());
            }
        }
        Self::from_rows(rows)
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn num_types(&self) -> usize {
        self.rows[0].len()
    }

    /// Probability row for period `t` (1-based).
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Expected arrivals of each type over periods `1..=t`.
    pub fn cumulative(&self, t: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.num_types()];
        for row in self.rows.iter().take(t) {
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p;
            }
        }
        acc
    }

    pub fn total_rates(&self) -> Vec<f64> {
        self.cumulative(self.horizon())
    }

    /// Checks that this schedule matches the instance's horizon and total rates.
    pub fn check_against(&self, instance: &ProblemInstance) -> Result<()> {
        if self.horizon() != instance.horizon {
            return Err(config_err(format!(
                "schedule covers {} periods, instance horizon is {}",
                self.horizon(),
                instance.horizon
            )));
        }
        if self.num_types() != instance.num_types() {
            return Err(Error::DimensionMismatch {
                expected: instance.num_types(),
                actual: self.num_types(),
            });
        }
        for (l, (got, want)) in self
            .total_rates()
            .iter()
            .zip(&instance.total_rates)
            .enumerate()
        {
            if (got - want).abs() > RATE_TOL * want.abs().max(1.0) {
                return Err(config_err(format!(
                    "type {l}: schedule implies {got} arrivals, instance says {want}"
                )));
            }
        }
        Ok(())
    }
}

/// A surviving subset of a resource's parameter space, stored as a membership
/// mask over `theta_space` indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Omega {
    alive: Vec<bool>,
    len: usize,
}

impl Omega {
    pub fn full(size: usize) -> Self {
        Self {
            alive: vec![true; size],
            len: size,
        }
    }

    pub fn from_indices(size: usize, indices: &[usize]) -> Self {
        let mut alive = vec![false; size];
        for &k in indices {
            alive[k] = true;
        }
        let len = alive.iter().filter(|a| **a).count();
        Self { alive, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.alive.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.alive.get(k).copied().unwrap_or(false)
    }

    /// Returns true if `k` was present.
    pub fn remove(&mut self, k: usize) -> bool {
        if self.contains(k) {
            self.alive[k] = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(k, a)| a.then_some(k))
    }

    pub fn is_subset_of(&self, other: &Omega) -> bool {
        self.iter().all(|k| other.contains(k))
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Logistic purchase probability `1 / (1 + exp(-theta . x))`.
pub fn purchase_prob(context: &Context, theta: &Theta) -> Result<f64> {
    if theta.dim() != context.dim() {
        return Err(Error::DimensionMismatch {
            expected: context.dim(),
            actual: theta.dim(),
        });
    }
    Ok(logistic(dot(&context.features, &theta.0)))
}

/// Largest purchase probability over the surviving parameters, with the index
/// of the parameter attaining it. Ties go to the lowest index.
pub fn optimistic_prob(
    context: &Context,
    theta_space: &[Theta],
    omega: &Omega,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for k in omega.iter() {
        let p = purchase_prob(context, &theta_space[k])?;
        if best.is_none_or(|(bp, _)| p > bp) {
            best = Some((p, k));
        }
    }
    best.ok_or(Error::EmptyConfidenceSet { resource: 0 })
}

/// Inventory-balancing penalty `(e^u - 1) / (e - 1)` on `[0, 1]`.
pub fn psi(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(u));
    }
    if u == 1.0 {
        return Ok(1.0);
    }
    Ok(u.exp_m1() / E_MINUS_ONE)
}

const E_MINUS_ONE: f64 = std::f64::consts::E - 1.0;
