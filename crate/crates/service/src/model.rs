use epiroom_core::{DailyCounts, InterventionAction, PolicyState};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Days simulated per wall-clock second while a run is free-running.
pub const DEFAULT_SPEED: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Created,
    Running,
    Paused,
    Finished,
    Failed,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Finished | Status::Failed)
    }
}

/// A steering command, tagged by `command`.
///
/// `resume` lets a created or paused run free-run at the speed cap until it
/// finishes or is paused again. `set_speed` with `null` removes the cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum SteerCommand {
    Advance { days: u32 },
    Pause,
    Resume,
    InjectIntervention { intervention: InterventionAction },
    SetSpeed { days_per_second: Option<f64> },
}

impl SteerCommand {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SteerCommand::Advance { days: 0 } => Err("advance needs at least 1 day".into()),
            SteerCommand::InjectIntervention { intervention } => {
                intervention.validate().map_err(|e| e.to_string())
            }
            SteerCommand::SetSpeed {
                days_per_second: Some(s),
            } if !(s.is_finite() && *s > 0.0) => Err(format!(
                "days_per_second must be a positive number or null, got {s}"
            )),
            _ => Ok(()),
        }
    }
}

/// Body of `POST /api/v1/simulations`. `config` is a preset name or an inline
/// config document; `scenario` is a built-in name or an inline scenario.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default = "default_config")]
    pub config: Value,
    pub scenario: Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_config() -> Value {
    Value::String("desk".into())
}

/// Public view of one hosted simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationHandle {
    pub id: String,
    pub status: Status,
    /// Last simulated day; day 0 is simulated at creation.
    pub current_day: u32,
    pub horizon: u32,
    pub scenario: String,
    pub seed: u64,
    pub config_digest: String,
    pub scenario_digest: String,
    pub population: usize,
    /// `null` when uncapped.
    pub days_per_second: Option<f64>,
    /// Policy that will be in force on the next simulated day, including
    /// every acknowledged injection.
    pub policy: PolicyState,
    pub commands_applied: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub id: String,
    pub seq: u64,
    pub command: SteerCommand,
    pub status: Status,
    pub current_day: u32,
    /// Day from which an injected intervention is in force.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_day: Option<u32>,
}

/// One entry of the persisted command log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub seq: u64,
    /// Last simulated day when the command was applied.
    pub day: u32,
    pub command: SteerCommand,
}

/// Payload of the closing `end` event of a metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEnd {
    pub status: Status,
    pub current_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub horizon: u32,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRun {
    pub id: String,
    pub scenario: String,
    pub seed: u64,
    pub active: Vec<u32>,
    pub peak_day: u32,
    pub peak_active: u32,
}

/// Active-case series of 2 to 4 runs that share a config, for overlay charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_digest: String,
    pub runs: Vec<CompareRun>,
}

impl CompareRun {
    pub fn from_days(id: String, scenario: String, seed: u64, days: &[DailyCounts]) -> Self {
        let active: Vec<u32> = days.iter().map(|d| d.active).collect();
        let (peak_day, peak_active) = days.iter().fold((0, 0), |best, d| {
            if d.active > best.1 {
                (d.day, d.active)
            } else {
                best
            }
        });
        CompareRun {
            id,
            scenario,
            seed,
            active,
            peak_day,
            peak_active,
        }
    }
}
