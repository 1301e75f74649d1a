//! Synthetic population built house by house.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::CountryConfig;
use crate::error::ConfigError;
use crate::sampling::{CategoricalTable, Purpose, StreamKey};
use crate::world::{Basis, LocationId, LocationKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Religion {
    Christian,
    Muslim,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profession {
    SchoolStudent,
    UniversityStudent,
    Worker,
    #[serde(rename = "none")]
    Unoccupied,
}

impl Profession {
    /// Kind of the fixed daytime location, if any.
    pub fn fixed_kind(self) -> Option<LocationKind> {
        match self {
            Profession::SchoolStudent => Some(LocationKind::School),
            Profession::UniversityStudent => Some(LocationKind::University),
            Profession::Worker => Some(LocationKind::Company),
            Profession::Unoccupied => None,
        }
    }
}

/// Random-visit categories, in the column order of the visit table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitCategory {
    Worship,
    RestaurantsNightlife,
    MarketsMalls,
    Hospitals,
    Companies,
}

impl VisitCategory {
    pub const ALL: [VisitCategory; 5] = [
        VisitCategory::Worship,
        VisitCategory::RestaurantsNightlife,
        VisitCategory::MarketsMalls,
        VisitCategory::Hospitals,
        VisitCategory::Companies,
    ];

    /// Location kinds an agent of `religion` may visit in this category.
    pub fn kinds(self, religion: Religion) -> &'static [LocationKind] {
        use LocationKind::*;
        match self {
            VisitCategory::Worship => match religion {
                Religion::Christian => &[Church],
                Religion::Muslim => &[Mosque],
                Religion::Other => &[],
            },
            VisitCategory::RestaurantsNightlife => &[Restaurant, Nightclub],
            VisitCategory::MarketsMalls => &[Market, Mall],
            VisitCategory::Hospitals => &[Hospital],
            VisitCategory::Companies => &[Company],
        }
    }
}

/// Eligibility bit per [`VisitCategory`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VisitFlags(u8);

impl VisitFlags {
    pub fn contains(self, category: VisitCategory) -> bool {
        self.0 & (1 << category as u8) != 0
    }

    pub fn insert(&mut self, category: VisitCategory) {
        self.0 |= 1 << category as u8;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = VisitCategory> {
        VisitCategory::ALL.into_iter().filter(move |&c| self.contains(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct House {
    pub id: u32,
    pub religion: Religion,
    pub members: Vec<u32>,
}

impl House {
    pub fn location(&self) -> LocationId {
        LocationId(self.id)
    }
}

/// One person. Infection and travel state live in the simulation, not here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Agent {
    pub id: u32,
    pub age: u8,
    pub age_band: u8,
    pub profession: Profession,
    pub home: u32,
    pub religion: Religion,
    pub fixed_location: Option<LocationId>,
    pub eligibility: VisitFlags,
    /// Friend's and relative's houses.
    pub visit_houses: Option<[u32; 2]>,
    pub travels: bool,
}

impl Agent {
    pub fn home_location(&self) -> LocationId {
        LocationId(self.home)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Population {
    pub houses: Vec<House>,
    pub agents: Vec<Agent>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// A synthesized country: its rooms and its people.
#[derive(Debug, Clone, Serialize)]
pub struct Country {
    pub world: World,
    pub population: Population,
}

/// Profession distribution for each age band, residual mass on `Unoccupied`.
pub fn profession_tables(config: &CountryConfig) -> Vec<CategoricalTable<Profession>> {
    config
        .age_bands
        .iter()
        .map(|b| {
            let p = b.professions;
            let none = (1.0 - p.school - p.university - p.work).max(0.0);
            CategoricalTable::new(
                vec![
                    Profession::SchoolStudent,
                    Profession::UniversityStudent,
                    Profession::Worker,
                    Profession::Unoccupied,
                ],
                vec![p.school, p.university, p.work, none],
            )
            .expect("validated profession shares")
        })
        .collect()
}

pub fn assign_profession(table: &CategoricalTable<Profession>, seed: u64, agent: u32) -> Profession {
    let key = StreamKey::new(seed, Purpose::Profession).entity(agent as u64);
    *table.sample(key.next_unit(0))
}

/// Independent eligibility draw per category. Worship is restricted to the
/// agent's own faith; agents of other faiths never qualify.
pub fn assign_visit_eligibility(
    config: &CountryConfig,
    age_band: usize,
    religion: Religion,
    seed: u64,
    agent: u32,
) -> VisitFlags {
    let key = StreamKey::new(seed, Purpose::VisitEligibility).entity(agent as u64);
    let rates = config.age_bands[age_band].visits.as_array();
    let mut flags = VisitFlags::default();
    for (i, category) in VisitCategory::ALL.into_iter().enumerate() {
        if category.kinds(religion).is_empty() {
            continue;
        }
        if key.next_unit(i as u64) < rates[i] {
            flags.insert(category);
        }
    }
    flags
}

/// House-visit partners and the travel trait.
pub fn assign_social_traits(
    config: &CountryConfig,
    home: u32,
    house_count: u32,
    seed: u64,
    agent: u32,
) -> (Option<[u32; 2]>, bool) {
    let visits = StreamKey::new(seed, Purpose::SocialVisits).entity(agent as u64);
    let visit_houses = if house_count >= 3 && visits.next_unit(0) < config.p_visits {
        let picks = StreamKey::new(seed, Purpose::VisitHouses).entity(agent as u64);
        let pick = |i: u64, n: u32| ((picks.next_unit(i) * n as f64) as u32).min(n - 1);
        let mut first = pick(0, house_count - 1);
        if first >= home {
            first += 1;
        }
        let (lo, hi) = if first < home {
            (first, home)
        } else {
            (home, first)
        };
        let mut second = pick(1, house_count - 2);
        if second >= lo {
            second += 1;
        }
        if second >= hi {
            second += 1;
        }
        Some([first, second])
    } else {
        None
    };
    let travel = StreamKey::new(seed, Purpose::TravelTrait).entity(agent as u64);
    (visit_houses, travel.next_unit(0) < config.p_travel_trait)
}

/// Synthesize houses, people and rooms from `config`.
pub fn build_population(config: &CountryConfig, seed: u64) -> Result<Country, ConfigError> {
    config.validate()?;
    let age_table = config.age_table();
    let professions = profession_tables(config);
    let house_count = config.house_count;

    let mut houses = Vec::with_capacity(house_count as usize);
    let mut agents = Vec::with_capacity(house_count as usize * 4);
    for h in 0..house_count {
        let size_key = StreamKey::new(seed, Purpose::HouseSize).entity(h as u64);
        let size = *config.household_size.sample(size_key.next_unit(0));
        let religion_key = StreamKey::new(seed, Purpose::HouseReligion).entity(h as u64);
        let religion = *config.religion.sample(religion_key.next_unit(0));
        let mut members = Vec::with_capacity(size as usize);
        for _ in 0..size {
            let id = agents.len() as u32;
            let band_idx = *age_table.sample(
                StreamKey::new(seed, Purpose::AgeBand)
                    .entity(id as u64)
                    .next_unit(0),
            );
            let band = &config.age_bands[band_idx];
            let year_u = StreamKey::new(seed, Purpose::AgeYear)
                .entity(id as u64)
                .next_unit(0);
            let age = band.lo + ((year_u * (band.hi - band.lo + 1) as f64) as u8).min(band.hi - band.lo);
            let (visit_houses, travels) = assign_social_traits(config, h, house_count, seed, id);
            agents.push(Agent {
                id,
                age,
                age_band: band_idx as u8,
                profession: assign_profession(&professions[band_idx], seed, id),
                home: h,
                religion,
                fixed_location: None,
                eligibility: assign_visit_eligibility(config, band_idx, religion, seed, id),
                visit_houses,
                travels,
            });
            members.push(id);
        }
        houses.push(House {
            id: h,
            religion,
            members,
        });
    }

    let basis_count = |basis: Basis| match basis {
        Basis::Agents => agents.len(),
        Basis::Workers => agents
            .iter()
            .filter(|a| a.profession == Profession::Worker)
            .count(),
        Basis::Christians => agents
            .iter()
            .filter(|a| a.religion == Religion::Christian)
            .count(),
        Basis::Muslims => agents.iter().filter(|a| a.religion == Religion::Muslim).count(),
    };
    let mut counts = BTreeMap::new();
    counts.insert(LocationKind::House, house_count);
    for kind in LocationKind::ALL {
        if let Some(rule) = config.world.count_rule(kind) {
            counts.insert(kind, rule.count(basis_count));
        }
    }
    let world = World::build(&config.world, &counts);

    for agent in &mut agents {
        let Some(kind) = agent.profession.fixed_kind() else {
            continue;
        };
        let instances = world.instances(kind);
        if instances.is_empty() {
            return Err(ConfigError::new(
                format!("world.counts.{kind}"),
                "no instances for agents who need one",
            ));
        }
        let u = StreamKey::new(seed, Purpose::FixedLocation)
            .entity(agent.id as u64)
            .next_unit(0);
        let i = ((u * instances.len() as f64) as usize).min(instances.len() - 1);
        agent.fixed_location = Some(instances[i]);
    }

    log::debug!(
        "built {} agents in {} houses, {} locations",
        agents.len(),
        houses.len(),
        world.len()
    );
    Ok(Country {
        world,
        population: Population { houses, agents },
    })
}
