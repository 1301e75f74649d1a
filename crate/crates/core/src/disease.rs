//! Course of a single infection as a function of days since exposure.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::sampling::{CategoricalTable, Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Asymptomatic,
    Mild,
    Severe,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Asymptomatic,
        Severity::Mild,
        Severity::Severe,
        Severity::Critical,
    ];

    pub fn needs_hospital(self) -> bool {
        matches!(self, Severity::Severe | Severity::Critical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthState {
    Susceptible,
    Exposed,
    Infectious,
    Hospitalized,
    Recovered,
    Dead,
}

impl HealthState {
    /// Currently carrying the virus.
    pub fn is_active(self) -> bool {
        matches!(
            self,
            HealthState::Exposed | HealthState::Infectious | HealthState::Hospitalized
        )
    }

    /// Position in the progression order; hospitalized shares a rank with
    /// infectious because the two may alternate only in that direction.
    pub fn rank(self) -> u8 {
        match self {
            HealthState::Susceptible => 0,
            HealthState::Exposed => 1,
            HealthState::Infectious | HealthState::Hospitalized => 2,
            HealthState::Recovered | HealthState::Dead => 3,
        }
    }
}

/// Probability of death per severity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeathRates {
    pub asymptomatic: f64,
    pub mild: f64,
    pub severe: f64,
    pub critical: f64,
}

impl DeathRates {
    pub fn get(&self, severity: Severity) -> f64 {
        match severity {
            Severity::Asymptomatic => self.asymptomatic,
            Severity::Mild => self.mild,
            Severity::Severe => self.severe,
            Severity::Critical => self.critical,
        }
    }
}

impl Default for DeathRates {
    fn default() -> Self {
        DeathRates {
            asymptomatic: 0.0,
            mild: 0.0,
            severe: 0.15,
            critical: 0.50,
        }
    }
}

/// Timing and outcome parameters of the virus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirusProfile {
    pub latent_days: u32,
    pub incubation_days: u32,
    pub post_symptom_infectious_days: u32,
    pub hospital_day_severe: u32,
    pub hospital_day_critical: u32,
    pub severity_mix: CategoricalTable<Severity>,
    /// Optional per-age-band replacement for `severity_mix`, indexed like the
    /// population's age bands.
    pub severity_by_age_band: Option<Vec<CategoricalTable<Severity>>>,
    pub death_rate: DeathRates,
}

impl Default for VirusProfile {
    fn default() -> Self {
        VirusProfile {
            latent_days: 3,
            incubation_days: 5,
            post_symptom_infectious_days: 10,
            hospital_day_severe: 9,
            hospital_day_critical: 10,
            // Placeholder mix; supply real values through config.
            severity_mix: CategoricalTable::new(Severity::ALL.to_vec(), vec![0.30, 0.60, 0.07, 0.03])
                .expect("default severity mix"),
            severity_by_age_band: None,
            death_rate: DeathRates::default(),
        }
    }
}

impl VirusProfile {
    /// Days from infection until the course resolves.
    pub fn resolution_offset(&self) -> u32 {
        self.incubation_days + self.post_symptom_infectious_days
    }

    pub fn validate(&self, age_bands: usize) -> Result<(), ConfigError> {
        if self.latent_days == 0 || self.latent_days >= self.incubation_days {
            return Err(ConfigError::new(
                "latent_days",
                "must satisfy 0 < latent_days < incubation_days",
            ));
        }
        for (field, day) in [
            ("hospital_day_severe", self.hospital_day_severe),
            ("hospital_day_critical", self.hospital_day_critical),
        ] {
            if day < self.incubation_days {
                return Err(ConfigError::new(field, "must be >= incubation_days"));
            }
        }
        for severity in Severity::ALL {
            let p = self.death_rate.get(severity);
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::new(
                    format!("death_rate.{}", severity_name(severity)),
                    format!("{p} is not a probability"),
                ));
            }
        }
        if self.death_rate.asymptomatic != 0.0 || self.death_rate.mild != 0.0 {
            return Err(ConfigError::new(
                "death_rate",
                "asymptomatic and mild cases always recover",
            ));
        }
        if let Some(tables) = &self.severity_by_age_band {
            if tables.len() != age_bands {
                return Err(ConfigError::new(
                    "severity_by_age_band",
                    format!("expected {age_bands} tables, got {}", tables.len()),
                ));
            }
        }
        Ok(())
    }

    fn severity_table(&self, age_band: usize) -> &CategoricalTable<Severity> {
        self.severity_by_age_band
            .as_ref()
            .and_then(|t| t.get(age_band))
            .unwrap_or(&self.severity_mix)
    }
}

fn severity_name(s: Severity) -> &'static str {
    match s {
        Severity::Asymptomatic => "asymptomatic",
        Severity::Mild => "mild",
        Severity::Severe => "severe",
        Severity::Critical => "critical",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfectionCourse {
    pub infection_day: u32,
    pub severity: Severity,
    pub dies: bool,
    pub resolution_day: u32,
}

/// Draw the severity and outcome of a new infection. The draws depend on the
/// agent and seed only, so an agent's fate is shared by every scenario run
/// with the same seed.
pub fn roll_course(
    virus: &VirusProfile,
    infection_day: u32,
    agent_id: u32,
    age_band: usize,
    seed: u64,
) -> InfectionCourse {
    let key = StreamKey::new(seed, Purpose::Severity).entity(agent_id as u64);
    let severity = *virus.severity_table(age_band).sample(key.next_unit(0));
    let outcome = StreamKey {
        purpose: Purpose::Outcome,
        ..key
    };
    let dies = outcome.next_unit(0) < virus.death_rate.get(severity);
    InfectionCourse {
        infection_day,
        severity,
        dies,
        resolution_day: infection_day + virus.resolution_offset(),
    }
}

pub fn health_state_at(course: Option<&InfectionCourse>, day: u32, virus: &VirusProfile) -> HealthState {
    let Some(course) = course else {
        return HealthState::Susceptible;
    };
    if day < course.infection_day {
        return HealthState::Susceptible;
    }
    let since = day - course.infection_day;
    if since < virus.latent_days {
        HealthState::Exposed
    } else if since < virus.resolution_offset() {
        let hospital_day = match course.severity {
            Severity::Severe => Some(virus.hospital_day_severe),
            Severity::Critical => Some(virus.hospital_day_critical),
            _ => None,
        };
        match hospital_day {
            Some(h) if since >= h => HealthState::Hospitalized,
            _ => HealthState::Infectious,
        }
    } else if course.dies {
        HealthState::Dead
    } else {
        HealthState::Recovered
    }
}

pub fn transmits_at(course: Option<&InfectionCourse>, day: u32, virus: &VirusProfile) -> bool {
    health_state_at(course, day, virus) == HealthState::Infectious
}
