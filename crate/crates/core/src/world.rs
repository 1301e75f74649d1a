//! Location kinds, opening hours, hourly infection rates and the instantiated
//! set of mixing rooms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::interventions::PolicyState;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    #[default]
    House,
    Hospital,
    Market,
    Mall,
    Restaurant,
    Nightclub,
    Company,
    Church,
    Mosque,
    School,
    University,
    Airport,
}

impl LocationKind {
    pub const ALL: [LocationKind; 12] = [
        LocationKind::House,
        LocationKind::Hospital,
        LocationKind::Market,
        LocationKind::Mall,
        LocationKind::Restaurant,
        LocationKind::Nightclub,
        LocationKind::Company,
        LocationKind::Church,
        LocationKind::Mosque,
        LocationKind::School,
        LocationKind::University,
        LocationKind::Airport,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LocationKind::House => "house",
            LocationKind::Hospital => "hospital",
            LocationKind::Market => "market",
            LocationKind::Mall => "mall",
            LocationKind::Restaurant => "restaurant",
            LocationKind::Nightclub => "nightclub",
            LocationKind::Company => "company",
            LocationKind::Church => "church",
            LocationKind::Mosque => "mosque",
            LocationKind::School => "school",
            LocationKind::University => "university",
            LocationKind::Airport => "airport",
        }
    }
}

impl fmt::Display for LocationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Opening interval per weekday (0 = Monday), `None` when closed all day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeeklyHours(pub [Option<(u8, u8)>; 7]);

impl WeeklyHours {
    pub const ALWAYS: WeeklyHours = WeeklyHours([Some((0, 24)); 7]);

    pub fn daily(open: u8, close: u8) -> Self {
        WeeklyHours([Some((open, close)); 7])
    }

    /// Open `open..close` on the listed weekdays only.
    pub fn on(days: &[usize], open: u8, close: u8) -> Self {
        let mut hours = [None; 7];
        for &d in days {
            hours[d] = Some((open, close));
        }
        WeeklyHours(hours)
    }

    #[inline]
    pub fn contains(&self, weekday: usize, hour: u8) -> bool {
        matches!(self.0[weekday % 7], Some((open, close)) if open <= hour && hour < close)
    }

    pub fn interval(&self, weekday: usize) -> Option<(u8, u8)> {
        self.0[weekday % 7]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (day, slot) in self.0.iter().enumerate() {
            if let Some((open, close)) = *slot {
                if open >= close || close > 24 {
                    return Err(ConfigError::new(
                        day.to_string(),
                        format!("bad interval {open}..{close}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

const WEEKDAYS: [usize; 5] = [0, 1, 2, 3, 4];

/// Hourly infection probability between one infectious and one susceptible
/// occupant, without and with a mask mandate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePair {
    pub no_mask: f64,
    pub mask: f64,
}

impl RatePair {
    pub const fn new(no_mask: f64, mask: f64) -> Self {
        RatePair { no_mask, mask }
    }
}

/// Which population count an instance rule scales with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Agents,
    Workers,
    Christians,
    Muslims,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRule {
    Fixed {
        fixed: u32,
    },
    Scaled {
        every: f64,
        basis: Basis,
        #[serde(default = "one")]
        min: u32,
    },
}

fn one() -> u32 {
    1
}

impl InstanceRule {
    pub fn count(&self, basis_count: impl Fn(Basis) -> usize) -> u32 {
        match *self {
            InstanceRule::Fixed { fixed } => fixed,
            InstanceRule::Scaled { every, basis, min } => {
                let n = basis_count(basis) as f64;
                ((n / every).ceil() as u32).max(min)
            }
        }
    }
}

pub fn table5_rates(kind: LocationKind) -> RatePair {
    use LocationKind::*;
    match kind {
        School => RatePair::new(0.03, 0.01),
        University => RatePair::new(0.04, 0.01),
        House => RatePair::new(0.14, 0.04),
        Church | Mosque => RatePair::new(0.21, 0.01),
        Restaurant => RatePair::new(0.32, 0.01),
        Nightclub => RatePair::new(0.42, 0.03),
        Market | Mall => RatePair::new(0.16, 0.01),
        Hospital => RatePair::new(0.02, 0.01),
        Company => RatePair::new(0.21, 0.01),
        // Nobody mixes at the airport; it only gates travel.
        Airport => RatePair::new(0.0, 0.0),
    }
}

pub fn default_hours(kind: LocationKind) -> WeeklyHours {
    use LocationKind::*;
    match kind {
        House | Hospital => WeeklyHours::ALWAYS,
        School => WeeklyHours::on(&WEEKDAYS, 8, 14),
        University => WeeklyHours::on(&WEEKDAYS, 8, 17),
        Company => WeeklyHours::on(&WEEKDAYS, 9, 17),
        Market | Mall => WeeklyHours::daily(9, 21),
        Restaurant => WeeklyHours::daily(12, 23),
        Nightclub => WeeklyHours::on(&[4, 5], 20, 24),
        Church => WeeklyHours::on(&[6], 9, 12),
        Mosque => WeeklyHours::on(&[4], 11, 14),
        Airport => WeeklyHours::daily(6, 22),
    }
}

pub fn default_count(kind: LocationKind) -> Option<InstanceRule> {
    use LocationKind::*;
    let scaled = |every: f64, basis| InstanceRule::Scaled { every, basis, min: 1 };
    Some(match kind {
        House => return None,
        // Each instance is one mixing room, so fixed locations are sized
        // like a classroom, a lecture hall and an office.
        School => scaled(150.0, Basis::Agents),
        University => scaled(1_000.0, Basis::Agents),
        Company => scaled(10.0, Basis::Workers),
        Market | Mall | Restaurant => scaled(2_000.0, Basis::Agents),
        Nightclub => scaled(5_000.0, Basis::Agents),
        Church => scaled(3_000.0, Basis::Christians),
        Mosque => scaled(3_000.0, Basis::Muslims),
        Hospital => InstanceRule::Scaled {
            every: 5_000.0,
            basis: Basis::Agents,
            min: 2,
        },
        Airport => InstanceRule::Fixed { fixed: 1 },
    })
}

/// Country structure settings. Kinds missing from a map fall back to the
/// built-in defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub counts: BTreeMap<LocationKind, InstanceRule>,
    pub hours: BTreeMap<LocationKind, WeeklyHours>,
    pub rates: BTreeMap<LocationKind, RatePair>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let kinds = LocationKind::ALL.iter().copied();
        WorldConfig {
            counts: kinds
                .clone()
                .filter_map(|k| default_count(k).map(|r| (k, r)))
                .collect(),
            hours: kinds.clone().map(|k| (k, default_hours(k))).collect(),
            rates: kinds.map(|k| (k, table5_rates(k))).collect(),
        }
    }
}

impl WorldConfig {
    pub fn count_rule(&self, kind: LocationKind) -> Option<InstanceRule> {
        self.counts.get(&kind).copied().or_else(|| default_count(kind))
    }

    pub fn hours_for(&self, kind: LocationKind) -> WeeklyHours {
        if kind == LocationKind::House {
            return WeeklyHours::ALWAYS;
        }
        self.hours
            .get(&kind)
            .copied()
            .unwrap_or_else(|| default_hours(kind))
    }

    pub fn rates_for(&self, kind: LocationKind) -> RatePair {
        self.rates
            .get(&kind)
            .copied()
            .unwrap_or_else(|| table5_rates(kind))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.counts.contains_key(&LocationKind::House) {
            return Err(ConfigError::new(
                "counts.house",
                "house count comes from house_count",
            ));
        }
        for (kind, rule) in &self.counts {
            let field = format!("counts.{kind}");
            match *rule {
                InstanceRule::Fixed { fixed } => {
                    if *kind == LocationKind::Airport && fixed != 1 {
                        return Err(ConfigError::new(field, "there is exactly one airport"));
                    }
                    if *kind == LocationKind::Hospital && fixed == 0 {
                        return Err(ConfigError::new(field, "at least one hospital is required"));
                    }
                }
                InstanceRule::Scaled { every, min, .. } => {
                    if !(every > 0.0 && every.is_finite()) {
                        return Err(ConfigError::new(field, "`every` must be positive"));
                    }
                    if *kind == LocationKind::Airport {
                        return Err(ConfigError::new(field, "there is exactly one airport"));
                    }
                    if *kind == LocationKind::Hospital && min == 0 {
                        return Err(ConfigError::new(field, "at least one hospital is required"));
                    }
                }
            }
        }
        for (kind, hours) in &self.hours {
            hours.validate().map_err(|e| e.within(&format!("hours.{kind}")))?;
        }
        for (kind, rate) in &self.rates {
            let ok = (0.0..=1.0).contains(&rate.mask)
                && (0.0..=1.0).contains(&rate.no_mask)
                && rate.mask <= rate.no_mask;
            if !ok {
                return Err(ConfigError::new(
                    format!("rates.{kind}"),
                    "need 0 <= mask <= no_mask <= 1",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub u32);

impl LocationId {
    /// Marker for "not present in the country" (abroad, dead).
    pub const NOWHERE: LocationId = LocationId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One mixing room.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationInstance {
    pub id: LocationId,
    pub kind: LocationKind,
    pub hours: WeeklyHours,
    pub rate_no_mask: f64,
    pub rate_mask: f64,
}

impl LocationInstance {
    pub fn is_open(&self, weekday: usize, hour: u8, policy: &PolicyState) -> bool {
        kind_open(self.kind, &self.hours, weekday, hour, policy)
    }

    pub fn effective_rate(&self, policy: &PolicyState) -> f64 {
        if policy.mask_mandate {
            self.rate_mask
        } else {
            self.rate_no_mask
        }
    }
}

/// Openness of any instance of `kind` with the given hours.
#[inline]
pub fn kind_open(
    kind: LocationKind,
    hours: &WeeklyHours,
    weekday: usize,
    hour: u8,
    policy: &PolicyState,
) -> bool {
    if kind == LocationKind::House {
        return true;
    }
    if kind == LocationKind::Airport && !policy.airport_is_open() {
        return false;
    }
    !policy.is_kind_closed(kind) && hours.contains(weekday, hour)
}

/// All location instances. Houses occupy ids `0..house_count`, so a house's
/// id doubles as its location id.
#[derive(Debug, Clone, Serialize)]
pub struct World {
    locations: Vec<LocationInstance>,
    by_kind: Vec<Vec<LocationId>>,
    hours: Vec<WeeklyHours>,
}

impl World {
    /// Instantiate `counts[kind]` rooms of every kind.
    pub fn build(config: &WorldConfig, counts: &BTreeMap<LocationKind, u32>) -> World {
        let mut locations = Vec::new();
        let mut by_kind = vec![Vec::new(); LocationKind::ALL.len()];
        for kind in LocationKind::ALL {
            let n = counts.get(&kind).copied().unwrap_or(0);
            let hours = config.hours_for(kind);
            let rates = config.rates_for(kind);
            for _ in 0..n {
                let id = LocationId(locations.len() as u32);
                by_kind[kind.index()].push(id);
                locations.push(LocationInstance {
                    id,
                    kind,
                    hours,
                    rate_no_mask: rates.no_mask,
                    rate_mask: rates.mask,
                });
            }
        }
        let hours = LocationKind::ALL.iter().map(|&k| config.hours_for(k)).collect();
        World {
            locations,
            by_kind,
            hours,
        }
    }

    #[inline]
    pub fn get(&self, id: LocationId) -> &LocationInstance {
        &self.locations[id.index()]
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[LocationInstance] {
        &self.locations
    }

    pub fn instances(&self, kind: LocationKind) -> &[LocationId] {
        &self.by_kind[kind.index()]
    }

    pub fn count(&self, kind: LocationKind) -> usize {
        self.by_kind[kind.index()].len()
    }

    pub fn hours(&self, kind: LocationKind) -> &WeeklyHours {
        &self.hours[kind.index()]
    }

    /// True when instances of `kind` exist and are open at this hour.
    #[inline]
    pub fn kind_open(&self, kind: LocationKind, weekday: usize, hour: u8, policy: &PolicyState) -> bool {
        self.count(kind) > 0 && kind_open(kind, self.hours(kind), weekday, hour, policy)
    }

    pub fn kind_open_today(&self, kind: LocationKind, weekday: usize, policy: &PolicyState) -> bool {
        (0..24).any(|h| self.kind_open(kind, weekday, h, policy))
    }
}
