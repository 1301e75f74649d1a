//! Non-pharmaceutical interventions as a day-stamped action timeline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::world::LocationKind;

/// One policy change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterventionAction {
    MaskMandate {
        on: bool,
    },
    /// Close or reopen every instance of a kind. When reopening, `capacity`
    /// below 1 admits each fixed attendee on a given day with that probability.
    SetKindClosed {
        kind: LocationKind,
        closed: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        capacity: Option<f64>,
    },
    AirportOpen {
        open: bool,
    },
    FullLockdown {
        on: bool,
    },
}

impl InterventionAction {
    pub fn close(kind: LocationKind) -> Self {
        InterventionAction::SetKindClosed {
            kind,
            closed: true,
            capacity: None,
        }
    }

    pub fn reopen(kind: LocationKind) -> Self {
        InterventionAction::SetKindClosed {
            kind,
            closed: false,
            capacity: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let InterventionAction::SetKindClosed { kind, capacity, .. } = self {
            if *kind == LocationKind::House {
                return Err(ConfigError::new("kind", "houses cannot be closed"));
            }
            if let Some(c) = capacity {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(ConfigError::new("capacity", "must be in (0, 1]"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub day: u32,
    #[serde(flatten)]
    pub action: InterventionAction,
}

impl TimedAction {
    pub fn new(day: u32, action: InterventionAction) -> Self {
        TimedAction { day, action }
    }
}

/// Policies in force on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub mask_mandate: bool,
    pub closed_kinds: BTreeSet<LocationKind>,
    /// Attendance factor for reopened kinds running below full capacity.
    pub capacity: BTreeMap<LocationKind, f64>,
    pub airport_open: bool,
    pub lockdown: bool,
}

impl Default for PolicyState {
    fn default() -> Self {
        PolicyState {
            mask_mandate: false,
            closed_kinds: BTreeSet::new(),
            capacity: BTreeMap::new(),
            airport_open: true,
            lockdown: false,
        }
    }
}

impl PolicyState {
    /// Whether `kind` is shut by policy. Lockdown shuts everything except
    /// houses and hospitals on top of individual closures.
    #[inline]
    pub fn is_kind_closed(&self, kind: LocationKind) -> bool {
        match kind {
            LocationKind::House => false,
            LocationKind::Hospital => self.closed_kinds.contains(&kind),
            _ => self.lockdown || self.closed_kinds.contains(&kind),
        }
    }

    pub fn airport_is_open(&self) -> bool {
        self.airport_open && !self.is_kind_closed(LocationKind::Airport)
    }

    /// Daily attendance probability for fixed attendees of `kind`.
    pub fn attendance(&self, kind: LocationKind) -> f64 {
        self.capacity.get(&kind).copied().unwrap_or(1.0)
    }

    pub fn apply(&mut self, action: &InterventionAction) {
        match *action {
            InterventionAction::MaskMandate { on } => self.mask_mandate = on,
            InterventionAction::SetKindClosed {
                kind,
                closed,
                capacity,
            } => {
                if closed {
                    self.closed_kinds.insert(kind);
                    self.capacity.remove(&kind);
                } else {
                    self.closed_kinds.remove(&kind);
                    match capacity {
                        Some(c) if c < 1.0 => {
                            self.capacity.insert(kind, c);
                        }
                        _ => {
                            self.capacity.remove(&kind);
                        }
                    }
                }
            }
            InterventionAction::AirportOpen { open } => self.airport_open = open,
            InterventionAction::FullLockdown { on } => self.lockdown = on,
        }
    }
}

/// Actions ordered by day; same-day actions keep their listed order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterventionTimeline {
    actions: Vec<TimedAction>,
}

impl InterventionTimeline {
    pub fn new(mut actions: Vec<TimedAction>) -> Self {
        actions.sort_by_key(|a| a.day);
        InterventionTimeline { actions }
    }

    pub fn actions(&self) -> &[TimedAction] {
        &self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Insert after every existing action with the same or an earlier day.
    pub fn push(&mut self, day: u32, action: InterventionAction) {
        let at = self.actions.partition_point(|a| a.day <= day);
        self.actions.insert(at, TimedAction::new(day, action));
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, a) in self.actions.iter().enumerate() {
            a.action
                .validate()
                .map_err(|e| e.within(&format!("actions.{i}")))?;
        }
        Ok(())
    }

    /// Fold every action dated on or before `day` over the all-open state.
    pub fn resolve(&self, day: u32) -> PolicyState {
        let mut state = PolicyState::default();
        for a in self.actions.iter().take_while(|a| a.day <= day) {
            state.apply(&a.action);
        }
        state
    }
}

pub fn resolve_policy(timeline: &InterventionTimeline, day: u32) -> PolicyState {
    timeline.resolve(day)
}
