//! Daily schedules and travel.

use serde::{Deserialize, Serialize};

use crate::config::CountryConfig;
use crate::disease::{roll_course, InfectionCourse, VirusProfile};
use crate::interventions::PolicyState;
use crate::population::Agent;
use crate::sampling::{sample_int_range, Purpose, StreamKey};
use crate::world::{LocationId, LocationKind, World};

/// Where an agent is during each hour of one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySchedule {
    pub slots: [LocationId; 24],
}

impl DaySchedule {
    pub const ABSENT: DaySchedule = DaySchedule {
        slots: [LocationId::NOWHERE; 24],
    };

    pub fn all(loc: LocationId) -> Self {
        DaySchedule { slots: [loc; 24] }
    }

    #[inline]
    pub fn at(&self, hour: usize) -> LocationId {
        self.slots[hour]
    }

    pub fn is_absent(&self) -> bool {
        self.slots[0] == LocationId::NOWHERE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TravelStatus {
    pub departure_day: u32,
    pub return_day: u32,
    pub infected_abroad: bool,
}

/// Inputs shared by every agent's plan on one day.
pub struct PlanContext<'a> {
    pub world: &'a World,
    pub policy: &'a PolicyState,
    pub config: &'a CountryConfig,
    pub seed: u64,
    pub day: u32,
}

impl PlanContext<'_> {
    fn weekday(&self) -> usize {
        (self.day % 7) as usize
    }

    /// Place `instance` into the first free run of `len` hours chosen by `u`,
    /// among starts inside the waking window where `open(hour)` holds.
    fn place(
        &self,
        slots: &mut [LocationId; 24],
        home: LocationId,
        len: u8,
        u: f64,
        instance: LocationId,
        open: impl Fn(u8) -> bool,
    ) -> bool {
        let (start, end) = self.config.outing_window;
        if end < start + len {
            return false;
        }
        let mut starts = [0u8; 24];
        let mut n = 0;
        for s in start..=end - len {
            if (s..s + len).all(|h| slots[h as usize] == home && open(h)) {
                starts[n] = s;
                n += 1;
            }
        }
        if n == 0 {
            return false;
        }
        let s = starts[((u * n as f64) as usize).min(n - 1)];
        for h in s..s + len {
            slots[h as usize] = instance;
        }
        true
    }
}

/// Build one agent's day: home by default, then the fixed location, then
/// random outings, then a house visit.
pub fn plan_day(ctx: &PlanContext<'_>, agent: &Agent) -> DaySchedule {
    let home = agent.home_location();
    let mut slots = [home; 24];
    let weekday = ctx.weekday();
    let world = ctx.world;
    let policy = ctx.policy;

    if let Some(fixed) = agent.fixed_location {
        let kind = world.get(fixed).kind;
        let attendance = policy.attendance(kind);
        let attends = attendance >= 1.0
            || StreamKey::new(ctx.seed, Purpose::Attendance)
                .entity(agent.id as u64)
                .day(ctx.day)
                .next_unit(0)
                < attendance;
        if attends {
            for h in 0..24u8 {
                if world.kind_open(kind, weekday, h, policy) {
                    slots[h as usize] = fixed;
                }
            }
        }
    }

    // Random outings are suspended under a full lockdown; hospitals stay open
    // for patients only.
    if !policy.lockdown {
        for category in agent.eligibility.iter() {
            let key = StreamKey::new(ctx.seed, Purpose::Outing)
                .entity(agent.id as u64)
                .day(ctx.day)
                .hour(category as u8);
            if key.next_unit(0) >= ctx.config.p_daily_outing {
                continue;
            }
            let mut open_kinds = [LocationKind::House; 2];
            let mut n = 0;
            for &kind in category.kinds(agent.religion) {
                if world.kind_open_today(kind, weekday, policy) {
                    open_kinds[n] = kind;
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            let kind = open_kinds[((key.next_unit(1) * n as f64) as usize).min(n - 1)];
            let len = sample_int_range(1, 2, key.next_unit(2)).expect("1 <= 2") as u8;
            let instances = world.instances(kind);
            let instance =
                instances[((key.next_unit(3) * instances.len() as f64) as usize).min(instances.len() - 1)];
            ctx.place(&mut slots, home, len, key.next_unit(4), instance, |h| {
                world.kind_open(kind, weekday, h, policy)
            });
        }
    }

    if let Some(houses) = agent.visit_houses {
        let key = StreamKey::new(ctx.seed, Purpose::HouseVisit)
            .entity(agent.id as u64)
            .day(ctx.day);
        let p = if policy.lockdown {
            ctx.config.p_lockdown_housevisit
        } else {
            ctx.config.p_daily_housevisit
        };
        if key.next_unit(0) < p {
            let target = houses[(key.next_unit(1) < 0.5) as usize];
            ctx.place(
                &mut slots,
                home,
                ctx.config.house_visit_hours,
                key.next_unit(2),
                LocationId(target),
                |_| true,
            );
        }
    }

    DaySchedule { slots }
}

/// Hospital bed for a hospitalized agent; stable for the agent's whole stay.
pub fn hospital_bed(world: &World, seed: u64, agent: u32) -> LocationId {
    let beds = world.instances(LocationKind::Hospital);
    let u = StreamKey::new(seed, Purpose::HospitalBed)
        .entity(agent as u64)
        .next_unit(0);
    beds[((u * beds.len() as f64) as usize).min(beds.len() - 1)]
}

/// Day-start departure decision. Only travellers who are uninfected, or
/// infected but still incubating, may fly, and only while the airport is open.
pub fn decide_travel(
    agent: &Agent,
    course: Option<&InfectionCourse>,
    day: u32,
    policy: &PolicyState,
    virus: &VirusProfile,
    config: &CountryConfig,
    seed: u64,
) -> Option<TravelStatus> {
    if !agent.travels || !policy.airport_is_open() {
        return None;
    }
    if let Some(c) = course {
        if day.saturating_sub(c.infection_day) >= virus.incubation_days {
            return None;
        }
    }
    let key = StreamKey::new(seed, Purpose::Departure)
        .entity(agent.id as u64)
        .day(day);
    if key.next_unit(0) >= config.p_depart {
        return None;
    }
    let (lo, hi) = config.travel_days;
    let length = sample_int_range(lo as i64, hi as i64, key.next_unit(1)).expect("validated") as u32;
    Some(TravelStatus {
        departure_day: day,
        return_day: day + length,
        infected_abroad: key.next_unit(2) < config.p_abroad_infection,
    })
}

/// Bring a traveller home. Returns the new course when the trip infected a
/// never-infected agent; the returnee is placed inside the incubation period.
pub fn process_return(
    agent: &Agent,
    course: Option<&InfectionCourse>,
    day: u32,
    status: &TravelStatus,
    virus: &VirusProfile,
    seed: u64,
) -> Option<InfectionCourse> {
    if !status.infected_abroad || course.is_some() {
        return None;
    }
    let key = StreamKey::new(seed, Purpose::ReturnOffset)
        .entity(agent.id as u64)
        .day(day);
    let back = sample_int_range(0, virus.incubation_days as i64 - 1, key.next_unit(0))
        .expect("incubation >= 1") as u32;
    Some(roll_course(
        virus,
        day.saturating_sub(back),
        agent.id,
        agent.age_band as usize,
        seed,
    ))
}
