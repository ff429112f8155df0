//! Episode driver: arrivals, policy decisions, purchase outcomes, capacity
//! accounting and regret against the deterministic benchmark.
//!
//! Randomness comes from ChaCha8 seeded with `base_seed + replication`, split
//! into independent streams for arrivals, purchases and policy sampling (see
//! [`stream_rng`]). Two policies run on the same seed therefore face the same
//! customer sequence and the same purchase draws.

pub mod presets;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::lp::benchmark_jd;
use crate::model::{ArrivalSchedule, ProblemInstance};
use crate::policy::{PolicyKind, PolicySettings, PolicyState, Removal};

pub use presets::{preset_config, preset_instance, CapacityReading, Preset, PresetOptions};

pub const ARRIVAL_STREAM: u64 = 1;
pub const PURCHASE_STREAM: u64 = 2;
pub const POLICY_STREAM: u64 = 3;

/// ChaCha8 keyed by `base_seed + replication` on the given stream.
pub fn stream_rng(base_seed: u64, replication: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(replication));
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub instance: ProblemInstance,
    pub schedule: ArrivalSchedule,
    pub policy: PolicyKind,
    pub replications: usize,
    pub base_seed: u64,
    /// Sorted periods at which regret is reported.
    pub checkpoints: Vec<usize>,
    pub settings: PolicySettings,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        self.schedule.check_against(&self.instance)?;
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if self.checkpoints.is_empty() {
            return Err(config_err("at least one checkpoint is required"));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("checkpoints must be strictly increasing"));
        }
        let t = self.instance.horizon;
        if self.checkpoints[0] == 0 || *self.checkpoints.last().unwrap() > t {
            return Err(config_err(format!("checkpoints must lie in [1, {t}]")));
        }
        if self.settings.resolve_cadence == 0 {
            return Err(config_err("resolve_cadence must be at least 1"));
        }
        if !(self.settings.threshold_multiplier > 0.0
            && self.settings.threshold_multiplier.is_finite())
        {
            return Err(config_err("threshold_multiplier must be positive"));
        }
        Ok(())
    }
}

/// Five evenly spaced checkpoints ending at the horizon (fewer for short
/// horizons).
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=5)
        .map(|k| ((k * horizon) as f64 / 5.0).round() as usize)
        .filter(|&t| t >= 1)
        .collect();
    out.dedup();
    out
}

/// Draws a customer type for period `t` by inverse CDF over `mu^t`.
pub fn draw_arrival<R: Rng + ?Sized>(schedule: &ArrivalSchedule, t: usize, rng: &mut R) -> usize {
    let row = schedule.row(t);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (l, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return l;
        }
    }
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub context: usize,
    pub resource: Option<usize>,
    pub maximizer: Option<usize>,
    pub purchased: bool,
    pub reward: f64,
    pub remaining: Vec<f64>,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<PeriodRecord>,
    pub revenue: f64,
    /// Purchases per resource.
    pub consumption: Vec<f64>,
    /// Offers per resource (the unpaid reject arm excluded).
    pub offers: Vec<usize>,
    /// Sales beyond capacity per resource (soft mode only).
    pub violations: Vec<f64>,
    pub switch_period: Option<usize>,
    pub removals: Vec<Removal>,
    /// Whether the true parameter was dropped from any resource's set.
    pub theta_star_removed: bool,
    /// Cumulative offers `[type][arm]` (reject arm last) at each checkpoint.
    pub checkpoint_allocations: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: usize,
    pub benchmark: f64,
    pub revenue: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub points: Vec<RegretPoint>,
}

/// Benchmark values at each checkpoint.
pub fn checkpoint_benchmarks(config: &SimulationConfig) -> Result<Vec<f64>> {
    config
        .checkpoints
        .iter()
        .map(|&t| benchmark_jd(&config.instance, &config.schedule, t))
        .collect()
}

/// Runs one replication. Deterministic in `(config, replication)`.
pub fn run_episode(
    config: &SimulationConfig,
    replication: usize,
) -> Result<(EpisodeTrace, RegretTrace)> {
    config.validate()?;
    let benchmarks = checkpoint_benchmarks(config)?;
    episode(config, replication, &benchmarks)
}

fn episode(
    config: &SimulationConfig,
    replication: usize,
    benchmarks: &[f64],
) -> Result<(EpisodeTrace, RegretTrace)> {
    let inst = &config.instance;
    let n = inst.num_resources();
    let types = inst.num_types();
    let rep = replication as u64;
    let mut arrivals = stream_rng(config.base_seed, rep, ARRIVAL_STREAM);
    let mut purchases = stream_rng(config.base_seed, rep, PURCHASE_STREAM);
    let mut policy_rng = stream_rng(config.base_seed, rep, POLICY_STREAM);

    let truth = inst.true_probs();
    let mut state = PolicyState::new(inst, config.policy, config.settings);
    let mut records = Vec::with_capacity(inst.horizon);
    let mut revenue = 0.0;
    let mut sold = vec![0.0; n];
    let mut offers = vec![0usize; n];
    let mut alloc = vec![vec![0usize; n + 1]; types];
    let mut checkpoint_allocations = Vec::with_capacity(config.checkpoints.len());
    let mut points = Vec::with_capacity(config.checkpoints.len());
    let mut next_cp = 0;

    for t in 1..=inst.horizon {
        let ty = draw_arrival(&config.schedule, t, &mut arrivals);
        let ctx = &inst.contexts[ty];
        let decision = state.decide(inst, ctx, &mut policy_rng)?;
        let u: f64 = purchases.random();
        let (purchased, reward) = match decision.resource {
            Some(i) => {
                let bought = u < truth[i][ty];
                let within = sold[i] + 1.0 <= inst.resources[i].capacity + 1e-9;
                if bought {
                    sold[i] += 1.0;
                }
                offers[i] += 1;
                (
                    bought,
                    if bought && within {
                        inst.resources[i].revenue
                    } else {
                        0.0
                    },
                )
            }
            None => (false, 0.0),
        };
        alloc[ty][decision.resource.unwrap_or(n)] += 1;
        revenue += reward;
        state.observe(inst, &decision, ctx, purchased)?;

        records.push(PeriodRecord {
            period: t,
            context: ty,
            resource: decision.resource,
            maximizer: decision.maximizer,
            purchased,
            reward,
            remaining: inst
                .resources
                .iter()
                .zip(&sold)
                .map(|(r, s)| r.capacity - s)
                .collect(),
            switched: state.switched(),
        });

        if next_cp < config.checkpoints.len() && config.checkpoints[next_cp] == t {
            let benchmark = benchmarks[next_cp];
            points.push(RegretPoint {
                t,
                benchmark,
                revenue,
                regret: benchmark - revenue,
            });
            checkpoint_allocations.push(alloc.clone());
            next_cp += 1;
        }
    }

    let removals = state.confidence.removals().to_vec();
    let theta_star_removed = removals
        .iter()
        .any(|r| r.theta == inst.resources[r.resource].true_theta);
    let violations = inst
        .resources
        .iter()
        .zip(&sold)
        .map(|(r, s)| (s - r.capacity).max(0.0))
        .collect();
    Ok((
        EpisodeTrace {
            records,
            revenue,
            consumption: sold,
            offers,
            violations,
            switch_period: state.monitor.switch_period(),
            removals,
            theta_star_removed,
            checkpoint_allocations,
        },
        RegretTrace { points },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub t: usize,
    pub benchmark: f64,
    pub mean_revenue: f64,
    pub mean_regret: f64,
    /// Standard error of the mean regret (0 for a single replication).
    pub stderr: f64,
    /// Mean cumulative offers `[type][arm]`, reject arm last.
    pub mean_allocations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub replications: usize,
    pub checkpoints: Vec<CheckpointSummary>,
    /// Per replication, in replication order.
    pub switch_periods: Vec<Option<usize>>,
    pub theta_star_removals: usize,
    pub mean_violation: f64,
}

impl PolicySummary {
    pub fn at(&self, t: usize) -> Option<&CheckpointSummary> {
        self.checkpoints.iter().find(|c| c.t == t)
    }

    pub fn switch_count(&self) -> usize {
        self.switch_periods.iter().filter(|s| s.is_some()).count()
    }

    /// Median switch period with never-switching runs ranked last; `None`
    /// when at least half the runs never switch.
    pub fn median_switch_period(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .switch_periods
            .iter()
            .map(|s| s.map_or(f64::INFINITY, |p| p as f64))
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let med = if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        med.is_finite().then_some(med)
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Reduces replication traces (in replication order) to a summary.
pub fn summarize(config: &SimulationConfig, runs: &[(EpisodeTrace, RegretTrace)]) -> PolicySummary {
    let n_arms = config.instance.num_resources() + 1;
    let types = config.instance.num_types();
    let reps = runs.len() as f64;
    let checkpoints = config
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let regrets: Vec<f64> = runs.iter().map(|(_, r)| r.points[k].regret).collect();
            let (mean_regret, stderr) = mean_and_stderr(&regrets);
            let mean_revenue = runs.iter().map(|(_, r)| r.points[k].revenue).sum::<f64>() / reps;
            let mut mean_allocations = vec![vec![0.0; n_arms]; types];
            for (trace, _) in runs {
                for (row, counts) in mean_allocations
                    .iter_mut()
                    .zip(&trace.checkpoint_allocations[k])
                {
                    for (m, c) in row.iter_mut().zip(counts) {
                        *m += *c as f64 / reps;
                    }
                }
            }
            CheckpointSummary {
                t,
                benchmark: runs.first().map_or(0.0, |(_, r)| r.points[k].benchmark),
                mean_revenue,
                mean_regret,
                stderr,
                mean_allocations,
            }
        })
        .collect();
    PolicySummary {
        policy: config.policy,
        replications: runs.len(),
        checkpoints,
        switch_periods: runs.iter().map(|(e, _)| e.switch_period).collect(),
        theta_star_removals: runs.iter().filter(|(e, _)| e.theta_star_removed).count(),
        mean_violation: runs
            .iter()
            .map(|(e, _)| e.violations.iter().sum::<f64>())
            .sum::<f64>()
            / reps,
    }
}

/// Runs all replications (in parallel on the current rayon pool) and
/// summarises them. The output does not depend on the degree of parallelism.
pub fn replicate(config: &SimulationConfig) -> Result<PolicySummary> {
    config.validate()?;
    let benchmarks = checkpoint_benchmarks(config)?;
    let runs = (0..config.replications)
        .into_par_iter()
        .map(|r| episode(config, r, &benchmarks))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(config, &runs))
}
