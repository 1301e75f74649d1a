//! The hourly mixing loop and day-boundary bookkeeping.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::CountryConfig;
use crate::disease::{health_state_at, roll_course, HealthState, InfectionCourse};
use crate::error::Result;
use crate::interventions::{InterventionAction, InterventionTimeline, PolicyState};
use crate::population::{build_population, Country};
use crate::runner::DailyCounts;
use crate::sampling::{Purpose, StreamKey};
use crate::scenario::Scenario;
use crate::scheduler::{
    decide_travel, hospital_bed, plan_day, process_return, DaySchedule, PlanContext, TravelStatus,
};
use crate::world::{LocationId, LocationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureEvent {
    pub day: u32,
    pub hour: u8,
    pub location_id: LocationId,
    pub location_kind: LocationKind,
    pub source: u32,
    pub target: u32,
}

/// Occupants of one room during one hour, both lists in ascending id order.
#[derive(Debug, Clone, Default)]
pub struct Room {
    pub location: LocationId,
    pub kind: LocationKind,
    pub rate: f64,
    pub sources: Vec<u32>,
    pub targets: Vec<u32>,
}

impl Default for LocationId {
    fn default() -> Self {
        LocationId::NOWHERE
    }
}

/// Each susceptible occupant runs one Bernoulli trial per infectious occupant;
/// the first success in source-id order is recorded as the infector.
pub fn expose_room(seed: u64, day: u32, hour: u8, room: &Room, out: &mut Vec<ExposureEvent>) {
    if room.rate <= 0.0 {
        return;
    }
    for &target in &room.targets {
        let key = StreamKey::new(seed, Purpose::Infection)
            .entity(target as u64)
            .day(day)
            .hour(hour);
        if let Some(&source) = room
            .sources
            .iter()
            .find(|&&s| key.next_unit(s as u64) < room.rate)
        {
            out.push(ExposureEvent {
                day,
                hour,
                location_id: room.location,
                location_kind: room.kind,
                source,
                target,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Process the rooms of each hour on the rayon pool.
    pub parallel: bool,
    /// Keep every exposure event in memory.
    pub record_events: bool,
}

const NO_ROOM: u32 = u32::MAX;

/// One running epidemic.
pub struct Simulation {
    config: Arc<CountryConfig>,
    country: Arc<Country>,
    seed: u64,
    timeline: InterventionTimeline,
    horizon: u32,
    options: SimOptions,
    day: u32,
    policy: PolicyState,
    courses: Vec<Option<InfectionCourse>>,
    travel: Vec<Option<TravelStatus>>,
    travellers: Vec<u32>,
    schedules: Vec<DaySchedule>,
    transmitters: Vec<u32>,
    susceptible: Vec<u32>,
    room_of: Vec<u32>,
    new_today: u32,
    history: Vec<DailyCounts>,
    events: Vec<ExposureEvent>,
    index_case: u32,
}

impl Simulation {
    /// Build the country for `seed` and infect one uniformly chosen agent on day 0.
    pub fn new(
        config: Arc<CountryConfig>,
        scenario: &Scenario,
        seed: u64,
        options: SimOptions,
    ) -> Result<Self> {
        config.validate()?;
        scenario.validate()?;
        let country = Arc::new(build_population(&config, seed)?);
        Ok(Self::with_country(config, country, scenario, seed, options))
    }

    /// Start from an already built country (must come from the same config and seed).
    pub fn with_country(
        config: Arc<CountryConfig>,
        country: Arc<Country>,
        scenario: &Scenario,
        seed: u64,
        options: SimOptions,
    ) -> Self {
        let n = country.population.len();
        let travellers = country
            .population
            .agents
            .iter()
            .filter(|a| a.travels)
            .map(|a| a.id)
            .collect();
        let mut sim = Simulation {
            seed,
            timeline: scenario.timeline(),
            horizon: scenario.horizon,
            options,
            day: 0,
            policy: PolicyState::default(),
            courses: vec![None; n],
            travel: vec![None; n],
            travellers,
            schedules: vec![DaySchedule::ABSENT; n],
            transmitters: Vec::new(),
            susceptible: Vec::new(),
            room_of: vec![NO_ROOM; country.world.len()],
            new_today: 0,
            history: Vec::new(),
            events: Vec::new(),
            index_case: 0,
            config,
            country,
        };
        let u = StreamKey::new(seed, Purpose::IndexCase).next_unit(0);
        let index = ((u * n as f64) as usize).min(n - 1) as u32;
        sim.infect(index, 0);
        sim.index_case = index;
        sim
    }

    fn infect(&mut self, agent: u32, day: u32) {
        let band = self.country.population.agents[agent as usize].age_band as usize;
        self.courses[agent as usize] = Some(roll_course(&self.config.virus, day, agent, band, self.seed));
        self.new_today += 1;
    }

    pub fn config(&self) -> &CountryConfig {
        &self.config
    }

    pub fn country(&self) -> &Country {
        &self.country
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next day to be simulated (equals the number of completed days).
    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn index_case(&self) -> u32 {
        self.index_case
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    pub fn timeline(&self) -> &InterventionTimeline {
        &self.timeline
    }

    pub fn history(&self) -> &[DailyCounts] {
        &self.history
    }

    pub fn events(&self) -> &[ExposureEvent] {
        &self.events
    }

    pub fn course(&self, agent: u32) -> Option<&InfectionCourse> {
        self.courses[agent as usize].as_ref()
    }

    pub fn travel_status(&self, agent: u32) -> Option<&TravelStatus> {
        self.travel[agent as usize].as_ref()
    }

    pub fn schedule(&self, agent: u32) -> &DaySchedule {
        &self.schedules[agent as usize]
    }

    pub fn population_size(&self) -> usize {
        self.courses.len()
    }

    pub fn health(&self, agent: u32, day: u32) -> HealthState {
        health_state_at(self.courses[agent as usize].as_ref(), day, &self.config.virus)
    }

    /// Schedule `action` at the next day boundary; returns the day it takes effect.
    pub fn inject(&mut self, action: InterventionAction) -> u32 {
        self.timeline.push(self.day, action);
        self.day
    }

    /// No one is infected and no returning traveller carries an infection.
    pub fn is_extinct(&self) -> bool {
        let active = self.history.last().map_or(1, |c| c.active);
        active == 0
            && !self.travellers.iter().any(|&id| {
                matches!(self.travel[id as usize], Some(t) if t.infected_abroad)
                    && self.courses[id as usize].is_none()
            })
    }

    pub fn is_finished(&self) -> bool {
        self.day >= self.horizon || self.is_extinct()
    }

    pub fn step_day(&mut self) -> DailyCounts {
        self.begin_day();
        for hour in 0..24 {
            self.step_hour(hour);
        }
        self.end_day()
    }

    /// Resolve policy, process returns and departures, and plan every
    /// present agent's schedule.
    pub fn begin_day(&mut self) {
        let day = self.day;
        let virus = &self.config.virus;
        self.policy = self.timeline.resolve(day);
        let agents = &self.country.population.agents;

        for &id in &self.travellers {
            let i = id as usize;
            if let Some(status) = self.travel[i] {
                if status.return_day == day {
                    self.travel[i] = None;
                    if let Some(course) = process_return(
                        &agents[i],
                        self.courses[i].as_ref(),
                        day,
                        &status,
                        virus,
                        self.seed,
                    ) {
                        self.courses[i] = Some(course);
                        self.new_today += 1;
                    }
                }
            }
        }

        for &id in &self.travellers {
            let i = id as usize;
            if self.travel[i].is_some() {
                continue;
            }
            let state = health_state_at(self.courses[i].as_ref(), day, virus);
            if matches!(state, HealthState::Dead | HealthState::Hospitalized) {
                continue;
            }
            self.travel[i] = decide_travel(
                &agents[i],
                self.courses[i].as_ref(),
                day,
                &self.policy,
                virus,
                &self.config,
                self.seed,
            );
        }

        let ctx = PlanContext {
            world: &self.country.world,
            policy: &self.policy,
            config: &self.config,
            seed: self.seed,
            day,
        };
        let courses = &self.courses;
        let travel = &self.travel;
        let plan = |agent: &crate::population::Agent| -> (DaySchedule, HealthState) {
            let i = agent.id as usize;
            if travel[i].is_some() {
                return (DaySchedule::ABSENT, HealthState::Recovered);
            }
            let state = health_state_at(courses[i].as_ref(), day, virus);
            let schedule = match state {
                HealthState::Dead => DaySchedule::ABSENT,
                HealthState::Hospitalized => DaySchedule::all(hospital_bed(ctx.world, ctx.seed, agent.id)),
                _ => plan_day(&ctx, agent),
            };
            (schedule, state)
        };
        let planned: Vec<(DaySchedule, HealthState)> = if self.options.parallel {
            agents.par_iter().map(plan).collect()
        } else {
            agents.iter().map(plan).collect()
        };

        self.transmitters.clear();
        self.susceptible.clear();
        for (i, (schedule, state)) in planned.into_iter().enumerate() {
            self.schedules[i] = schedule;
            if schedule.is_absent() {
                continue;
            }
            match state {
                HealthState::Infectious => self.transmitters.push(i as u32),
                HealthState::Susceptible => self.susceptible.push(i as u32),
                _ => {}
            }
        }
    }

    /// Mix every room that holds at least one infectious agent during `hour`.
    pub fn step_hour(&mut self, hour: u8) -> Vec<ExposureEvent> {
        if self.transmitters.is_empty() {
            return Vec::new();
        }
        let h = hour as usize;
        let world = &self.country.world;
        let mut rooms: Vec<Room> = Vec::new();
        for &s in &self.transmitters {
            let loc = self.schedules[s as usize].at(h);
            let slot = &mut self.room_of[loc.index()];
            if *slot == NO_ROOM {
                *slot = rooms.len() as u32;
                let instance = world.get(loc);
                rooms.push(Room {
                    location: loc,
                    kind: instance.kind,
                    rate: instance.effective_rate(&self.policy),
                    sources: Vec::new(),
                    targets: Vec::new(),
                });
            }
            rooms[*slot as usize].sources.push(s);
        }
        for &t in &self.susceptible {
            if self.courses[t as usize].is_some() {
                continue;
            }
            let loc = self.schedules[t as usize].at(h);
            let slot = self.room_of[loc.index()];
            if slot != NO_ROOM {
                rooms[slot as usize].targets.push(t);
            }
        }
        for room in &rooms {
            self.room_of[room.location.index()] = NO_ROOM;
        }

        let (seed, day) = (self.seed, self.day);
        let mut events: Vec<ExposureEvent> = if self.options.parallel {
            rooms
                .par_iter()
                .flat_map_iter(|room| {
                    let mut out = Vec::new();
                    expose_room(seed, day, hour, room, &mut out);
                    out
                })
                .collect()
        } else {
            let mut out = Vec::new();
            for room in &rooms {
                expose_room(seed, day, hour, room, &mut out);
            }
            out
        };
        events.sort_unstable_by_key(|e| e.target);
        for e in &events {
            self.infect(e.target, day);
        }
        if self.options.record_events {
            self.events.extend_from_slice(&events);
        }
        events
    }

    /// Tally compartments for the day and advance the clock.
    pub fn end_day(&mut self) -> DailyCounts {
        let day = self.day;
        let virus = &self.config.virus;
        let mut counts = DailyCounts {
            day,
            ..DailyCounts::default()
        };
        for course in &self.courses {
            match health_state_at(course.as_ref(), day, virus) {
                HealthState::Susceptible => counts.susceptible += 1,
                HealthState::Exposed => counts.exposed += 1,
                HealthState::Infectious => counts.infectious += 1,
                HealthState::Hospitalized => counts.hospitalized += 1,
                HealthState::Recovered => counts.recovered += 1,
                HealthState::Dead => counts.dead += 1,
            }
        }
        counts.active = counts.exposed + counts.infectious + counts.hospitalized;
        counts.abroad = self.travel.iter().filter(|t| t.is_some()).count() as u32;
        counts.new_infections = std::mem::take(&mut self.new_today);
        self.history.push(counts);
        self.day += 1;
        counts
    }

    /// Step until the horizon or extinction.
    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step_day();
        }
    }
}
