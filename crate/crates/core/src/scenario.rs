//! Scenario documents and the built-in experiment suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Error, Result};
use crate::interventions::{InterventionAction, InterventionTimeline, TimedAction};
use crate::world::LocationKind;

/// A named intervention timeline with its horizon and default seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon: u32,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub actions: Vec<TimedAction>,
}

pub const BUILTIN_SCENARIOS: [&str; 10] = [
    "flatten_1",
    "flatten_2",
    "flatten_3",
    "flatten_4",
    "second_wave",
    "lebanon",
    "forecast_none",
    "forecast_schools",
    "forecast_universities",
    "forecast_both",
];

pub const FLATTEN_HORIZON: u32 = 140;
pub const FLATTEN_START: u32 = 5;
pub const SECOND_WAVE_HORIZON: u32 = 200;
/// Simulated days after the forecast reopening day.
pub const FORECAST_WINDOW: u32 = 90;

/// Day offsets of the real intervention dates, counted from the first
/// registered case (21 Feb 2020).
pub mod lebanon_days {
    pub const SCHOOLS_SHUT: u32 = 6; // 27 Feb 2020
    pub const NIGHTLIFE_SHUT: u32 = 14; // 6 Mar
    pub const MALLS_RESTAURANTS_SHUT: u32 = 19; // 11 Mar
    pub const LOCKDOWN_1: u32 = 23; // 15 Mar, airport closed too
    pub const REOPEN_START: u32 = 66; // 27 Apr
    pub const AIRPORT_REOPEN: u32 = 131; // 1 Jul, end of phased reopening
    pub const LOCKDOWN_2: u32 = 157; // 27 Jul
    pub const LIFT_2: u32 = 171; // 10 Aug
    pub const SCHOOLS_HALF: u32 = 213; // end of summer
    pub const LOCKDOWN_3: u32 = 267; // 14 Nov
    pub const LIFT_3: u32 = 283; // 30 Nov
    pub const LOCKDOWN_4: u32 = 321; // 7 Jan 2021
    pub const LIFT_4: u32 = 353; // 8 Feb 2021, phased reopening starts
    pub const FORECAST: u32 = 425; // 21 Apr 2021
}

fn scale(day: u32, compression: f64) -> u32 {
    (day as f64 * compression).round() as u32
}

/// Evenly spaced days strictly between `from` and `to`.
fn phases(from: u32, to: u32, count: u32) -> impl Iterator<Item = u32> {
    let step = (to - from) as f64 / (count + 1) as f64;
    (1..=count).map(move |i| from + (step * i as f64).round() as u32)
}

fn lebanon_actions() -> Vec<TimedAction> {
    use lebanon_days::*;
    use InterventionAction::*;
    use LocationKind::*;
    let close = InterventionAction::close;
    let reopen = InterventionAction::reopen;
    let at = TimedAction::new;

    let mut actions = vec![
        at(SCHOOLS_SHUT, close(School)),
        at(SCHOOLS_SHUT, close(University)),
        at(NIGHTLIFE_SHUT, close(Nightclub)),
        at(MALLS_RESTAURANTS_SHUT, close(Mall)),
        at(MALLS_RESTAURANTS_SHUT, close(Restaurant)),
        at(LOCKDOWN_1, FullLockdown { on: true }),
        at(LOCKDOWN_1, AirportOpen { open: false }),
        at(REOPEN_START, FullLockdown { on: false }),
    ];
    // Phased reopening in reverse closure order; schools stay shut until autumn.
    let mut p = phases(REOPEN_START, AIRPORT_REOPEN, 2);
    let first = p.next().unwrap();
    let second = p.next().unwrap();
    actions.extend([
        at(first, reopen(Mall)),
        at(first, reopen(Restaurant)),
        at(second, reopen(Nightclub)),
        at(AIRPORT_REOPEN, AirportOpen { open: true }),
        at(LOCKDOWN_2, FullLockdown { on: true }),
        at(LIFT_2, FullLockdown { on: false }),
        at(
            SCHOOLS_HALF,
            SetKindClosed {
                kind: School,
                closed: false,
                capacity: Some(0.5),
            },
        ),
        at(LOCKDOWN_3, FullLockdown { on: true }),
        at(LIFT_3, FullLockdown { on: false }),
        at(LOCKDOWN_4, FullLockdown { on: true }),
        at(LOCKDOWN_4, close(School)),
        at(LOCKDOWN_4, close(Mall)),
        at(LOCKDOWN_4, close(Restaurant)),
        at(LOCKDOWN_4, close(Nightclub)),
        at(LIFT_4, FullLockdown { on: false }),
    ]);
    let mut p = phases(LIFT_4, FORECAST, 2);
    let first = p.next().unwrap();
    let second = p.next().unwrap();
    actions.extend([
        at(first, reopen(Mall)),
        at(first, reopen(Restaurant)),
        at(second, reopen(Nightclub)),
    ]);
    actions
}

impl Scenario {
    /// Built-in scenario `name`; Lebanon-derived timelines have their gaps
    /// multiplied by `compression`.
    pub fn builtin(name: &str, compression: f64) -> Result<Scenario> {
        use InterventionAction::*;
        use LocationKind::*;
        let at = TimedAction::new;
        let seeds: Vec<u64> = (1..=10).collect();
        let flatten = |level: u32| {
            let mut actions = Vec::new();
            if level >= 2 {
                actions.push(at(FLATTEN_START, MaskMandate { on: true }));
            }
            if level >= 3 {
                actions.push(at(FLATTEN_START, AirportOpen { open: false }));
            }
            if level >= 4 {
                actions.push(at(FLATTEN_START, InterventionAction::close(School)));
                actions.push(at(FLATTEN_START, InterventionAction::close(University)));
            }
            actions
        };
        let (horizon, actions) = match name {
            "flatten_1" => (FLATTEN_HORIZON, flatten(1)),
            "flatten_2" => (FLATTEN_HORIZON, flatten(2)),
            "flatten_3" => (FLATTEN_HORIZON, flatten(3)),
            "flatten_4" => (FLATTEN_HORIZON, flatten(4)),
            "second_wave" => {
                // Masks come with the lockdown and are kept after the lift.
                let mut actions = vec![
                    at(10, FullLockdown { on: true }),
                    at(10, MaskMandate { on: true }),
                    at(100, FullLockdown { on: false }),
                ];
                for kind in LocationKind::ALL {
                    if !matches!(kind, House | Hospital | Restaurant | Nightclub | Airport) {
                        actions.push(at(100, InterventionAction::close(kind)));
                    }
                }
                actions.push(at(100, AirportOpen { open: false }));
                (SECOND_WAVE_HORIZON, actions)
            }
            "lebanon" | "forecast_none" | "forecast_schools" | "forecast_universities" | "forecast_both" => {
                let mut actions = lebanon_actions();
                let forecast = lebanon_days::FORECAST;
                let reopen: &[LocationKind] = match name {
                    "forecast_schools" => &[School],
                    "forecast_universities" => &[University],
                    "forecast_both" => &[School, University],
                    _ => &[],
                };
                for &kind in reopen {
                    actions.push(at(forecast, InterventionAction::reopen(kind)));
                }
                let horizon = if name == "lebanon" {
                    forecast
                } else {
                    forecast + FORECAST_WINDOW
                };
                for a in &mut actions {
                    a.day = scale(a.day, compression);
                }
                (scale(horizon, compression), actions)
            }
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        Ok(Scenario {
            name: name.to_string(),
            horizon,
            seeds,
            actions,
        })
    }

    /// First day of the forecast reopening for the forecast suite.
    pub fn forecast_day(compression: f64) -> u32 {
        scale(lebanon_days::FORECAST, compression)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Config(ConfigError::new(field, e.into_inner().to_string()).within("scenario"))
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// A built-in name, or else a path to a scenario file.
    pub fn resolve(source: &str, compression: f64) -> Result<Scenario> {
        if BUILTIN_SCENARIOS.contains(&source) {
            Self::builtin(source, compression)
        } else if Path::new(source).exists() {
            Self::from_path(Path::new(source))
        } else {
            Err(Error::UnknownScenario(source.to_string()))
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::new("scenario.horizon", "must be at least 1 day"));
        }
        self.timeline().validate().map_err(|e| e.within("scenario"))
    }

    pub fn timeline(&self) -> InterventionTimeline {
        InterventionTimeline::new(self.actions.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn digest(&self) -> String {
        crate::config::short_hash(&serde_json::to_vec(self).expect("scenario serializes"))
    }
}
