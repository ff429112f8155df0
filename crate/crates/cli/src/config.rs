//! Experiment files and their expansion into simulator configs.
//!
//! Command-line flags and files share one shape ([`ExperimentFile`]); flags are
//! layered over the file with [`ExperimentFile::over`], and whatever is still
//! unset falls back to the preset (or generic) defaults in [`expand`].

use serde::{Deserialize, Serialize};

use kbsim_core::model::{ArrivalSchedule, ProblemInstance, Segment};
use kbsim_core::policy::{CapacityMode, PolicyKind, PolicySettings, ThetaCardinality};
use kbsim_core::sim::presets::{PRESET_REPLICATIONS, PRESET_RESOLVE_CADENCE};
use kbsim_core::sim::{
    default_checkpoints, preset_instance, CapacityReading, Preset, PresetOptions, SimulationConfig,
};
use kbsim_core::theta::ThetaGridConfig;

pub const DEFAULT_POLICIES: [PolicyKind; 3] =
    [PolicyKind::Ulwe, PolicyKind::AlgLp, PolicyKind::AlgAdv];

/// Arrival schedule given as a preset name, a segment table or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Preset(Preset),
    Segments(Vec<Segment>),
    Rows(Vec<Vec<f64>>),
}

impl ScheduleSpec {
    pub fn build(&self, horizon: usize) -> kbsim_core::Result<ArrivalSchedule> {
        match self {
            ScheduleSpec::Preset(p) => p.schedule(horizon),
            ScheduleSpec::Segments(s) => ArrivalSchedule::from_segments(s, horizon),
            ScheduleSpec::Rows(r) => ArrivalSchedule::from_rows(r.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<ProblemInstance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicyKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolve_cadence: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity_mode: Option<CapacityMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_multiplier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_cardinality: Option<ThetaCardinality>,
    /// Preset only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Preset only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacity_reading: Option<CapacityReading>,
    /// Preset only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGridConfig>,
    /// Preset only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_seed: Option<u64>,
}

impl ExperimentFile {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
        // a meta.json from an earlier run carries its config under "config"
        let value = match value {
            serde_json::Value::Object(mut map)
                if map.contains_key("config") && map.contains_key("versions") =>
            {
                map.remove("config").expect("checked above")
            }
            other => other,
        };
        serde_json::from_value(value).map_err(|e| format!("invalid experiment file: {e}"))
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: ExperimentFile) -> ExperimentFile {
        ExperimentFile {
            preset: self.preset.or(lower.preset),
            instance: self.instance.or(lower.instance),
            schedule: self.schedule.or(lower.schedule),
            policies: self.policies.or(lower.policies),
            reps: self.reps.or(lower.reps),
            seed: self.seed.or(lower.seed),
            checkpoints: self.checkpoints.or(lower.checkpoints),
            resolve_cadence: self.resolve_cadence.or(lower.resolve_cadence),
            capacity_mode: self.capacity_mode.or(lower.capacity_mode),
            threshold_multiplier: self.threshold_multiplier.or(lower.threshold_multiplier),
            theta_cardinality: self.theta_cardinality.or(lower.theta_cardinality),
            horizon: self.horizon.or(lower.horizon),
            capacity_reading: self.capacity_reading.or(lower.capacity_reading),
            theta_grid: self.theta_grid.or(lower.theta_grid),
            theta_seed: self.theta_seed.or(lower.theta_seed),
        }
    }
}

/// A fully resolved experiment: one simulator config per policy, identical
/// apart from the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub preset: Option<Preset>,
    pub policies: Vec<PolicyKind>,
    pub base: SimulationConfig,
}

impl Experiment {
    pub fn config_for(&self, policy: PolicyKind) -> SimulationConfig {
        SimulationConfig {
            policy,
            ..self.base.clone()
        }
    }

    /// Explicit form of the experiment: rerunning it reproduces the outputs
    /// without consulting any defaults.
    pub fn echo(&self) -> ExperimentFile {
        let b = &self.base;
        ExperimentFile {
            instance: Some(b.instance.clone()),
            schedule: Some(ScheduleSpec::Rows(b.schedule.rows().to_vec())),
            policies: Some(self.policies.clone()),
            reps: Some(b.replications),
            seed: Some(b.base_seed),
            checkpoints: Some(b.checkpoints.clone()),
            resolve_cadence: Some(b.settings.resolve_cadence),
            capacity_mode: Some(b.settings.capacity_mode),
            threshold_multiplier: Some(b.settings.threshold_multiplier),
            theta_cardinality: Some(b.settings.theta_cardinality),
            ..ExperimentFile::default()
        }
    }
}

/// Expands a merged experiment description and validates it.
pub fn expand(file: &ExperimentFile) -> Result<Experiment, String> {
    let (instance, schedule, preset) = match (&file.instance, file.preset) {
        (Some(_), Some(_)) => return Err("give either `preset` or `instance`, not both".into()),
        (Some(inst), None) => {
            if file.horizon.is_some()
                || file.capacity_reading.is_some()
                || file.theta_grid.is_some()
                || file.theta_seed.is_some()
            {
                return Err(
                    "`horizon`, `capacity_reading`, `theta_grid` and `theta_seed` apply to presets only"
                        .into(),
                );
            }
            let spec = file
                .schedule
                .as_ref()
                .ok_or("an explicit `instance` needs a `schedule`")?;
            inst.validate().map_err(|e| e.to_string())?;
            let schedule = spec.build(inst.horizon).map_err(|e| e.to_string())?;
            (inst.clone(), schedule, None)
        }
        (None, Some(preset)) => {
            if file.schedule.is_some() {
                return Err("`schedule` cannot be combined with `preset`".into());
            }
            let defaults = PresetOptions::default();
            let opts = PresetOptions {
                horizon: file.horizon.unwrap_or(defaults.horizon),
                capacity: file.capacity_reading.unwrap_or(defaults.capacity),
                theta_grid: file.theta_grid.clone().unwrap_or(defaults.theta_grid),
                theta_seed: file.theta_seed.unwrap_or(defaults.theta_seed),
            };
            let (inst, sched) = preset_instance(preset, &opts).map_err(|e| e.to_string())?;
            (inst, sched, Some(preset))
        }
        (None, None) => return Err("either `preset` or `instance` is required".into()),
    };

    let cadence_default = if preset.is_some() {
        PRESET_RESOLVE_CADENCE
    } else {
        1
    };
    let policies = file
        .policies
        .clone()
        .unwrap_or_else(|| DEFAULT_POLICIES.to_vec());
    if policies.is_empty() {
        return Err("`policies` is empty".into());
    }
    let base = SimulationConfig {
        checkpoints: file
            .checkpoints
            .clone()
            .unwrap_or_else(|| default_checkpoints(instance.horizon)),
        policy: policies[0],
        replications: file.reps.unwrap_or(PRESET_REPLICATIONS),
        base_seed: file.seed.unwrap_or(0),
        settings: PolicySettings {
            resolve_cadence: file.resolve_cadence.unwrap_or(cadence_default),
            capacity_mode: file.capacity_mode.unwrap_or_default(),
            threshold_multiplier: file.threshold_multiplier.unwrap_or(1.0),
            theta_cardinality: file.theta_cardinality.unwrap_or_default(),
        },
        instance,
        schedule,
    };
    base.validate().map_err(|e| e.to_string())?;
    Ok(Experiment {
        preset,
        policies,
        base,
    })
}
