//! The two-resource, two-type experiment and its three arrival settings.
//!
//! Types A and B have contexts `(1, 0)` and `(0, 1)`; both resources share the
//! true parameter `(ln 9, 0)`, so type A buys with probability 0.9 and type B
//! with probability 0.5 whichever resource is offered. Revenues are 1 and 1.5.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::{ArrivalSchedule, Context, ProblemInstance, ResourceSpec, Segment, Theta};
use crate::policy::{PolicyKind, PolicySettings};
use crate::theta::{build_theta_space, ThetaGridConfig};

use super::{default_checkpoints, SimulationConfig};

pub const PRESET_HORIZON: usize = 500;
pub const PRESET_REPLICATIONS: usize = 100;
pub const PRESET_RESOLVE_CADENCE: usize = 50;
pub const PRESET_REVENUES: [f64; 2] = [1.0, 1.5];
/// Seed for the synthetic history behind the parameter grid.
pub const PRESET_THETA_SEED: u64 = 20_240_501;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Iid,
    Adv1,
    Adv2,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Iid => "iid",
            Preset::Adv1 => "adv1",
            Preset::Adv2 => "adv2",
        }
    }

    /// Segment table: (share of the horizon, P(type A), P(type B)).
    pub fn segments(self) -> Vec<Segment> {
        let table: &[(f64, f64, f64)] = match self {
            Preset::Iid => &[(1.0, 0.6, 0.4)],
            Preset::Adv1 => &[(0.33, 0.15, 0.85), (0.67, 0.4, 0.6)],
            Preset::Adv2 => &[
                (0.1, 0.2, 0.8),
                (0.3, 0.8, 0.2),
                (0.2, 0.2, 0.8),
                (0.1, 0.4, 0.6),
                (0.1, 0.2, 0.8),
                (0.1, 0.02, 0.98),
                (0.1, 0.2, 0.8),
            ],
        };
        table
            .iter()
            .map(|&(fraction, a, b)| Segment {
                fraction,
                probs: vec![a, b],
            })
            .collect()
    }

    pub fn schedule(self, horizon: usize) -> Result<ArrivalSchedule> {
        ArrivalSchedule::from_segments(&self.segments(), horizon)
    }
}

impl std::str::FromStr for Preset {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" => Ok(Preset::Iid),
            "adv1" => Ok(Preset::Adv1),
            "adv2" => Ok(Preset::Adv2),
            other => Err(config_err(format!("unknown preset `{other}`"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How "total capacity matches the horizon" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityReading {
    /// `c_1 + c_2 = T`, split evenly.
    #[default]
    Split,
    /// `c_i = T` for each resource.
    Each,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetOptions {
    pub horizon: usize,
    pub capacity: CapacityReading,
    pub theta_grid: ThetaGridConfig,
    pub theta_seed: u64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            horizon: PRESET_HORIZON,
            capacity: CapacityReading::Split,
            theta_grid: ThetaGridConfig::default(),
            theta_seed: PRESET_THETA_SEED,
        }
    }
}

pub fn preset_contexts() -> Vec<Context> {
    vec![
        Context::new(0, vec![1.0, 0.0]),
        Context::new(1, vec![0.0, 1.0]),
    ]
}

pub fn preset_truth() -> Theta {
    Theta(vec![9.0f64.ln(), 0.0])
}

/// Instance and schedule for a preset. The parameter space is fitted to a
/// synthetic history whose type mix is the schedule's average mix, and is
/// shared by both resources.
pub fn preset_instance(
    preset: Preset,
    opts: &PresetOptions,
) -> Result<(ProblemInstance, ArrivalSchedule)> {
    if opts.horizon == 0 {
        return Err(config_err("horizon must be at least 1"));
    }
    let schedule = preset.schedule(opts.horizon)?;
    let rates = schedule.total_rates();
    let mix: Vec<f64> = rates.iter().map(|l| l / opts.horizon as f64).collect();
    let contexts = preset_contexts();
    let truth = preset_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.theta_seed);
    let space = build_theta_space(&contexts, &truth, &mix, &opts.theta_grid, &mut rng)?;
    let true_theta = space
        .true_index
        .ok_or_else(|| config_err("preset parameter space must contain the true parameter"))?;
    let n = PRESET_REVENUES.len();
    let capacity = match opts.capacity {
        CapacityReading::Split => opts.horizon as f64 / n as f64,
        CapacityReading::Each => opts.horizon as f64,
    };
    let resources = PRESET_REVENUES
        .iter()
        .map(|&revenue| ResourceSpec {
            revenue,
            capacity,
            theta_space: space.thetas.clone(),
            true_theta,
        })
        .collect();
    let instance = ProblemInstance::new(resources, contexts, opts.horizon, rates, true)?;
    Ok((instance, schedule))
}

/// Full experiment configuration for one policy under a preset.
pub fn preset_config(
    preset: Preset,
    policy: PolicyKind,
    opts: &PresetOptions,
) -> Result<SimulationConfig> {
    let (instance, schedule) = preset_instance(preset, opts)?;
    Ok(SimulationConfig {
        checkpoints: default_checkpoints(opts.horizon),
        instance,
        schedule,
        policy,
        replications: PRESET_REPLICATIONS,
        base_seed: 0,
        settings: PolicySettings {
            resolve_cadence: PRESET_RESOLVE_CADENCE,
            ..PolicySettings::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adv1_boundary() {
        let s = Preset::Adv1.schedule(500).unwrap();
        assert_eq!(s.row(165), &[0.15, 0.85]);
        assert_eq!(s.row(166), &[0.4, 0.6]);
        let lam = s.total_rates();
        assert!((lam[0] - (165.0 * 0.15 + 335.0 * 0.4)).abs() < 1e-9);
    }

    #[test]
    fn preset_instance_shape() {
        let (inst, sched) = preset_instance(Preset::Iid, &PresetOptions::default()).unwrap();
        assert_eq!(inst.num_resources(), 2);
        assert_eq!(inst.resources[0].capacity, 250.0);
        assert_eq!(sched.horizon(), 500);
        let p = inst.true_probs();
        assert!((p[1][0] - 0.9).abs() < 1e-12);
        assert!((p[0][1] - 0.5).abs() < 1e-12);
        assert_eq!(inst.resources[0].theta_space.len(), 10);
    }

    #[test]
    fn each_reading_gives_full_capacity() {
        let opts = PresetOptions {
            capacity: CapacityReading::Each,
            ..PresetOptions::default()
        };
        let (inst, _) = preset_instance(Preset::Adv2, &opts).unwrap();
        assert!(inst.resources.iter().all(|r| r.capacity == 500.0));
    }
}
