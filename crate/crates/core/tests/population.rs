//! Statistics and structural invariants of a synthesized country.

mod common;

use std::collections::BTreeSet;

use common::assert_fits;
use epiroom_core::config::CountryConfig;
use epiroom_core::population::{
    build_population, profession_tables, Country, Profession, Religion, VisitCategory,
};
use epiroom_core::world::LocationKind;

fn build(houses: u32, seed: u64) -> (CountryConfig, Country) {
    let config = CountryConfig {
        house_count: houses,
        ..CountryConfig::default()
    };
    let country = build_population(&config, seed).unwrap();
    (config, country)
}

#[test]
fn same_seed_same_country() {
    let (_, a) = build(300, 4);
    let (_, b) = build(300, 4);
    let (_, c) = build(300, 5);
    assert_eq!(a.population.agents, b.population.agents);
    assert_eq!(a.world.locations(), b.world.locations());
    assert_ne!(a.population.agents, c.population.agents);
}

#[test]
fn household_sizes_and_religion() {
    let (config, country) = build(4_000, 11);
    let mut sizes = vec![0u64; 8];
    let mut faiths = [0u64; 3];
    for house in &country.population.houses {
        sizes[house.members.len() - 1] += 1;
        faiths[house.religion as usize] += 1;
        for &m in &house.members {
            let agent = &country.population.agents[m as usize];
            assert_eq!(agent.home, house.id);
            assert_eq!(agent.religion, house.religion);
        }
    }
    assert_fits(&sizes, config.household_size.weights(), "household size");
    assert_fits(&faiths, config.religion.weights(), "religion");
    let total: usize = country.population.houses.iter().map(|h| h.members.len()).sum();
    assert_eq!(total, country.population.len());
}

#[test]
fn age_bands_and_professions() {
    let (config, country) = build(4_000, 12);
    let agents = &country.population.agents;
    let mut bands = vec![0u64; config.age_bands.len()];
    for a in agents {
        let band = &config.age_bands[a.age_band as usize];
        assert!((band.lo..=band.hi).contains(&a.age), "age {} outside band", a.age);
        bands[a.age_band as usize] += 1;
    }
    assert_fits(&bands, config.age_table().weights(), "age band");

    let tables = profession_tables(&config);
    for (i, table) in tables.iter().enumerate() {
        let mut counts = vec![0u64; table.len()];
        for a in agents.iter().filter(|a| a.age_band as usize == i) {
            let idx = table.labels().iter().position(|&p| p == a.profession).unwrap();
            counts[idx] += 1;
        }
        if counts.iter().sum::<u64>() >= 500 {
            assert_fits(&counts, table.weights(), &format!("professions in band {i}"));
        }
    }
}

#[test]
fn fixed_locations_match_professions() {
    let (_, country) = build(1_000, 3);
    for a in &country.population.agents {
        match (a.profession.fixed_kind(), a.fixed_location) {
            (None, None) => {}
            (Some(kind), Some(loc)) => assert_eq!(country.world.get(loc).kind, kind),
            other => panic!("agent {} has {other:?}", a.id),
        }
    }
    assert!(country
        .population
        .agents
        .iter()
        .any(|a| a.profession == Profession::Worker));
}

#[test]
fn social_traits() {
    let (config, country) = build(2_000, 21);
    let agents = &country.population.agents;
    let with_visits = agents.iter().filter(|a| a.visit_houses.is_some()).count();
    let n = agents.len() as u64;
    assert_fits(
        &[with_visits as u64, n - with_visits as u64],
        &[config.p_visits, 1.0 - config.p_visits],
        "visit trait",
    );
    for a in agents {
        if let Some([friend, relative]) = a.visit_houses {
            assert_ne!(friend, relative);
            assert_ne!(friend, a.home);
            assert_ne!(relative, a.home);
            assert!(friend < config.house_count && relative < config.house_count);
        }
        for c in a.eligibility.iter() {
            if c == VisitCategory::Worship {
                assert_ne!(a.religion, Religion::Other);
            }
        }
    }
}

#[test]
fn world_structure() {
    let (config, country) = build(2_000, 8);
    let world = &country.world;
    assert_eq!(world.count(LocationKind::House), config.house_count as usize);
    assert_eq!(world.count(LocationKind::Airport), 1);
    assert!(world.count(LocationKind::Hospital) >= 2);
    // House ids double as location ids.
    for house in &country.population.houses {
        assert_eq!(world.get(house.location()).kind, LocationKind::House);
    }
    let ids: BTreeSet<u32> = world.locations().iter().map(|l| l.id.0).collect();
    assert_eq!(ids.len(), world.len());
    assert_eq!(*ids.last().unwrap() as usize, world.len() - 1);
}

#[test]
fn singleton_households_when_configured() {
    let config = CountryConfig {
        house_count: 200,
        household_size: epiroom_core::sampling::CategoricalTable::new(vec![1], vec![1.0]).unwrap(),
        ..CountryConfig::default()
    };
    let country = build_population(&config, 1).unwrap();
    assert_eq!(country.population.len(), 200);
}
