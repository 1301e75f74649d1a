//! Agent-based simulation of an epidemic spreading through the rooms of a
//! synthetic country, with a timeline of government interventions.
//!
//! The usual entry points are [`runner::run`] for a complete run and
//! [`engine::Simulation`] for stepping a run day by day.

pub mod config;
pub mod disease;
pub mod engine;
pub mod error;
pub mod interventions;
pub mod population;
pub mod runner;
pub mod sampling;
pub mod scenario;
pub mod scheduler;
pub mod world;

pub use config::CountryConfig;
pub use engine::{ExposureEvent, SimOptions, Simulation};
pub use error::{ConfigError, Error, Result};
pub use interventions::{InterventionAction, InterventionTimeline, PolicyState, TimedAction};
pub use runner::{run, run_batch, BatchResult, DailyCounts, EpidemicTimeSeries, RunSummary};
pub use scenario::Scenario;
