//! Country configuration: population tables, behaviour knobs, virus and world.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disease::VirusProfile;
use crate::error::{ConfigError, Error, Result};
use crate::population::Religion;
use crate::sampling::CategoricalTable;
use crate::world::WorldConfig;

/// Per-band shares of school pupils, university students and workers. The
/// remainder has no fixed daytime location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfessionRates {
    pub school: f64,
    pub university: f64,
    pub work: f64,
}

/// Per-band probability of being someone who visits each random category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitRates {
    pub worship: f64,
    pub restaurants_nightlife: f64,
    pub markets_malls: f64,
    pub hospitals: f64,
    pub companies: f64,
}

impl VisitRates {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.worship,
            self.restaurants_nightlife,
            self.markets_malls,
            self.hospitals,
            self.companies,
        ]
    }
}

/// One age band: its share of the population plus its profession and
/// random-visit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeBand {
    pub lo: u8,
    pub hi: u8,
    pub weight: f64,
    pub professions: ProfessionRates,
    pub visits: VisitRates,
}

fn band(lo: u8, hi: u8, weight: f64, prof: [f64; 3], visits: [f64; 5]) -> AgeBand {
    AgeBand {
        lo,
        hi,
        weight,
        professions: ProfessionRates {
            school: prof[0],
            university: prof[1],
            work: prof[2],
        },
        visits: VisitRates {
            worship: visits[0],
            restaurants_nightlife: visits[1],
            markets_malls: visits[2],
            hospitals: visits[3],
            companies: visits[4],
        },
    }
}

pub fn lebanon_age_bands() -> Vec<AgeBand> {
    vec![
        band(0, 4, 0.08, [0.26, 0.00, 0.00], [0.00, 0.00, 0.00, 0.02, 0.00]),
        band(5, 9, 0.08, [0.92, 0.00, 0.00], [0.00, 0.04, 0.16, 0.02, 0.00]),
        band(10, 19, 0.16, [0.71, 0.09, 0.07], [0.20, 0.06, 0.16, 0.02, 0.10]),
        band(20, 29, 0.17, [0.02, 0.15, 0.52], [0.20, 0.08, 0.06, 0.02, 0.07]),
        band(30, 39, 0.13, [0.00, 0.00, 0.62], [0.20, 0.12, 0.24, 0.02, 0.08]),
        band(40, 49, 0.11, [0.00, 0.00, 0.57], [0.20, 0.10, 0.06, 0.02, 0.06]),
        band(50, 59, 0.11, [0.00, 0.00, 0.47], [0.20, 0.02, 0.12, 0.02, 0.07]),
        band(60, 69, 0.08, [0.00, 0.00, 0.31], [0.20, 0.00, 0.06, 0.04, 0.06]),
        band(70, 79, 0.05, [0.00, 0.00, 0.16], [0.00, 0.00, 0.00, 0.04, 0.05]),
        band(80, 89, 0.03, [0.00, 0.00, 0.00], [0.00, 0.00, 0.00, 0.04, 0.00]),
    ]
}

pub fn lebanon_household_sizes() -> CategoricalTable<u8> {
    CategoricalTable::new(
        (1..=8).collect(),
        vec![0.10, 0.18, 0.18, 0.20, 0.16, 0.10, 0.04, 0.04],
    )
    .expect("household table")
}

pub fn lebanon_religions() -> CategoricalTable<Religion> {
    CategoricalTable::new(
        vec![Religion::Christian, Religion::Muslim, Religion::Other],
        vec![0.38, 0.57, 0.05],
    )
    .expect("religion table")
}

/// Everything needed to synthesize a country and drive its agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountryConfig {
    pub house_count: u32,
    pub household_size: CategoricalTable<u8>,
    pub age_bands: Vec<AgeBand>,
    pub religion: CategoricalTable<Religion>,
    /// Share of agents with a friend and a relative house to visit.
    pub p_visits: f64,
    /// Share of agents who travel abroad at all.
    pub p_travel_trait: f64,
    /// Daily chance that an eligible agent takes an outing in one category.
    pub p_daily_outing: f64,
    /// Daily chance that an agent with visit houses makes a house visit.
    pub p_daily_housevisit: f64,
    /// House-visit chance while a full lockdown is in force; 0 keeps
    /// everyone at home.
    pub p_lockdown_housevisit: f64,
    /// Daily departure chance for a traveller allowed to fly.
    pub p_depart: f64,
    /// Chance of catching the virus during one trip.
    pub p_abroad_infection: f64,
    pub travel_days: (u32, u32),
    pub house_visit_hours: u8,
    /// Waking window `[start, end)` in which outings and visits are placed.
    pub outing_window: (u8, u8),
    /// Multiplier on the gaps between real-world intervention dates.
    pub timeline_compression: f64,
    pub virus: VirusProfile,
    pub world: WorldConfig,
}

impl Default for CountryConfig {
    fn default() -> Self {
        CountryConfig {
            house_count: 2_000,
            household_size: lebanon_household_sizes(),
            age_bands: lebanon_age_bands(),
            religion: lebanon_religions(),
            p_visits: 0.5,
            p_travel_trait: 0.05,
            p_daily_outing: 0.15,
            p_daily_housevisit: 0.3,
            p_lockdown_housevisit: 0.07,
            p_depart: 0.01,
            p_abroad_infection: 0.02,
            travel_days: (3, 5),
            house_visit_hours: 2,
            outing_window: (7, 24),
            timeline_compression: 0.9,
            virus: VirusProfile::default(),
            world: WorldConfig::default(),
        }
    }
}

pub const PRESETS: [&str; 2] = ["desk", "country"];

impl CountryConfig {
    /// Desk-scale country used by tests: 2,000 houses.
    pub fn desk() -> Self {
        CountryConfig::default()
    }

    /// Full-size country: 15,000 houses.
    pub fn country() -> Self {
        CountryConfig {
            house_count: 15_000,
            ..CountryConfig::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "country" => Some(Self::country()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: CountryConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            if field.is_empty() || field == "." {
                Error::Parse {
                    what: "country config".into(),
                    source: inner,
                }
            } else {
                Error::Config(ConfigError::new(field, inner.to_string()))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Load a config file, or a preset when `source` names one.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(preset) = Self::preset(source) {
            return Ok(preset);
        }
        let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
        Self::from_json(&text)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Short content hash identifying this configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        short_hash(&bytes)
    }

    pub fn age_table(&self) -> CategoricalTable<usize> {
        CategoricalTable::new(
            (0..self.age_bands.len()).collect(),
            self.age_bands.iter().map(|b| b.weight).collect(),
        )
        .expect("validated age bands")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.house_count == 0 {
            return Err(ConfigError::new("house_count", "must be at least 1"));
        }
        if self.p_visits > 0.0 && self.house_count < 3 {
            return Err(ConfigError::new(
                "house_count",
                "house visits need at least 3 houses",
            ));
        }
        if let Some(size) = self
            .household_size
            .labels()
            .iter()
            .find(|&&s| !(1..=8).contains(&s))
        {
            return Err(ConfigError::new(
                "household_size.labels",
                format!("household size {size} outside 1..=8"),
            ));
        }
        self.validate_bands()?;
        for (field, p) in [
            ("p_visits", self.p_visits),
            ("p_travel_trait", self.p_travel_trait),
            ("p_daily_outing", self.p_daily_outing),
            ("p_daily_housevisit", self.p_daily_housevisit),
            ("p_lockdown_housevisit", self.p_lockdown_housevisit),
            ("p_depart", self.p_depart),
            ("p_abroad_infection", self.p_abroad_infection),
        ] {
            check_probability(field, p)?;
        }
        let (lo, hi) = self.travel_days;
        if lo == 0 || lo > hi {
            return Err(ConfigError::new("travel_days", "need 1 <= min <= max"));
        }
        let (start, end) = self.outing_window;
        if start >= end || end > 24 {
            return Err(ConfigError::new("outing_window", "need start < end <= 24"));
        }
        if self.house_visit_hours == 0 || self.house_visit_hours > end - start {
            return Err(ConfigError::new(
                "house_visit_hours",
                "must fit inside the outing window",
            ));
        }
        if !(self.timeline_compression > 0.0 && self.timeline_compression.is_finite()) {
            return Err(ConfigError::new("timeline_compression", "must be positive"));
        }
        self.virus
            .validate(self.age_bands.len())
            .map_err(|e| e.within("virus"))?;
        self.world.validate().map_err(|e| e.within("world"))?;
        Ok(())
    }

    fn validate_bands(&self) -> Result<(), ConfigError> {
        if self.age_bands.is_empty() {
            return Err(ConfigError::new("age_bands", "at least one band is required"));
        }
        for (i, b) in self.age_bands.iter().enumerate() {
            let at = |f: &str| format!("age_bands.{i}.{f}");
            if b.lo > b.hi {
                return Err(ConfigError::new(at("lo"), "lo must not exceed hi"));
            }
            if !(b.weight.is_finite() && b.weight >= 0.0) {
                return Err(ConfigError::new(at("weight"), "must be a non-negative number"));
            }
            let p = &b.professions;
            for (name, v) in [
                ("school", p.school),
                ("university", p.university),
                ("work", p.work),
            ] {
                check_probability(&at(&format!("professions.{name}")), v)?;
            }
            if p.school + p.university + p.work > 1.0 + 1e-9 {
                return Err(ConfigError::new(at("professions"), "shares sum above 1"));
            }
            for (name, v) in [
                "worship",
                "restaurants_nightlife",
                "markets_malls",
                "hospitals",
                "companies",
            ]
            .into_iter()
            .zip(b.visits.as_array())
            {
                check_probability(&at(&format!("visits.{name}")), v)?;
            }
        }
        if self.age_bands.iter().map(|b| b.weight).sum::<f64>() <= 0.0 {
            return Err(ConfigError::new("age_bands", "band weights sum to zero"));
        }
        Ok(())
    }
}

fn check_probability(field: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("{p} is not a probability")))
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        CountryConfig::desk().validate().unwrap();
        CountryConfig::country().validate().unwrap();
        assert_eq!(CountryConfig::country().house_count, 15_000);
    }

    #[test]
    fn table_values() {
        let bands = lebanon_age_bands();
        let total: f64 = bands.iter().map(|b| b.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = lebanon_household_sizes().iter().map(|(&s, w)| s as f64 * w).sum();
        assert!((mean - 3.80).abs() < 1e-9);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = CountryConfig::from_json(r#"{"house_count": 10, "p_visits": 0}"#).unwrap();
        assert_eq!(c.house_count, 10);
        assert_eq!(c.age_bands, lebanon_age_bands());
    }

    #[test]
    fn malformed_config_names_field() {
        let err = CountryConfig::from_json(r#"{"virus": {"latent_days": "three"}}"#).unwrap_err();
        assert!(err.to_string().contains("virus.latent_days"), "{err}");
        let err = CountryConfig::from_json(r#"{"p_depart": 2.0}"#).unwrap_err();
        assert!(err.to_string().contains("p_depart"), "{err}");
        let err = CountryConfig::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = CountryConfig::from_json(r#"{"virus": {"latent_days": 6}}"#).unwrap_err();
        assert!(err.to_string().contains("virus.latent_days"), "{err}");
    }

    #[test]
    fn roundtrip_and_digest() {
        let c = CountryConfig::desk();
        let back = CountryConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_ne!(CountryConfig::country().digest(), c.digest());
    }
}
