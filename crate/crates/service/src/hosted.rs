use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use epiroom_core::{CountryConfig, DailyCounts, PolicyState, Scenario, SimOptions, Simulation};
use log::{debug, info, warn};
use tokio::sync::{oneshot, watch};

use crate::error::ApiError;
use crate::model::{Ack, LoggedCommand, SimulationHandle, Status, SteerCommand, DEFAULT_SPEED};
use crate::persist::Record;

/// How many free-running days pass between snapshots of the persisted record.
const SNAPSHOT_EVERY: u32 = 10;

/// Length of the metrics log and whether it will grow further.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub days: usize,
    pub done: bool,
}

struct Envelope {
    command: SteerCommand,
    reply: oneshot::Sender<Result<Ack, ApiError>>,
}

#[derive(Debug, Clone)]
struct Live {
    status: Status,
    current_day: u32,
    speed: Option<f64>,
    policy: PolicyState,
    commands_applied: u64,
    error: Option<String>,
}

/// A simulation hosted by the service. The worker thread owns the engine;
/// everything here is what request handlers are allowed to see.
pub struct Hosted {
    pub id: String,
    pub scenario: String,
    pub seed: u64,
    pub horizon: u32,
    pub config_digest: String,
    pub scenario_digest: String,
    pub population: usize,
    live: Mutex<Live>,
    log: RwLock<Vec<DailyCounts>>,
    progress: watch::Sender<Progress>,
    queue: Mutex<Option<mpsc::Sender<Envelope>>>,
}

impl Hosted {
    /// Build the population, simulate day 0, replay `record` if given, and
    /// start the worker thread. Blocking: call from a blocking context.
    pub fn launch(
        id: String,
        config: CountryConfig,
        scenario: Scenario,
        seed: u64,
        persist_dir: Option<PathBuf>,
        replay: Option<&Record>,
    ) -> Result<Arc<Hosted>, ApiError> {
        let config = Arc::new(config);
        let mut sim = Simulation::new(config.clone(), &scenario, seed, SimOptions::default())
            .map_err(|e| ApiError::from_core("config", e))?;
        sim.step_day();

        let mut status = Status::Created;
        let mut speed = Some(DEFAULT_SPEED);
        let mut commands = Vec::new();
        if let Some(record) = replay {
            for entry in &record.commands {
                while sim.day() <= entry.day && !sim.is_finished() {
                    sim.step_day();
                }
                match &entry.command {
                    SteerCommand::InjectIntervention { intervention } => {
                        sim.inject(intervention.clone());
                    }
                    SteerCommand::SetSpeed { days_per_second } => speed = *days_per_second,
                    SteerCommand::Advance { .. } | SteerCommand::Resume | SteerCommand::Pause => {
                        status = Status::Paused
                    }
                }
            }
            while sim.day() <= record.current_day && !sim.is_finished() {
                sim.step_day();
            }
            commands = record.commands.clone();
        }
        if sim.is_finished() {
            status = Status::Finished;
        }

        let record = persist_dir.map(|dir| {
            let record = Record {
                id: id.clone(),
                config: (*config).clone(),
                scenario: scenario.clone(),
                seed,
                current_day: sim.day() - 1,
                commands,
            };
            (dir, record)
        });
        if let Some((dir, record)) = &record {
            if let Err(e) = record.save(dir) {
                warn!("could not persist simulation {id}: {e}");
            }
        }

        let live = Live {
            status,
            current_day: sim.day() - 1,
            speed,
            policy: sim.timeline().resolve(sim.day()),
            commands_applied: record.as_ref().map_or(0, |(_, r)| r.commands.len() as u64),
            error: None,
        };
        let (progress, _) = watch::channel(Progress {
            days: sim.history().len(),
            done: status.is_terminal(),
        });
        let (tx, rx) = mpsc::channel();
        let hosted = Arc::new(Hosted {
            id: id.clone(),
            scenario: scenario.name.clone(),
            seed,
            horizon: sim.horizon(),
            config_digest: config.digest(),
            scenario_digest: scenario.digest(),
            population: sim.population_size(),
            live: Mutex::new(live),
            log: RwLock::new(sim.history().to_vec()),
            progress,
            queue: Mutex::new(Some(tx)),
        });

        let seq = hosted.live.lock().unwrap().commands_applied;
        let worker = Worker {
            sim,
            hosted: hosted.clone(),
            rx,
            status,
            speed,
            next_due: Instant::now(),
            seq,
            record,
        };
        std::thread::Builder::new()
            .name(format!("sim-{id}"))
            .spawn(move || worker.run())
            .map_err(|e| ApiError::internal(format!("could not start worker: {e}")))?;
        info!(
            "simulation {id} hosted ({} agents, status {status:?})",
            hosted.population
        );
        Ok(hosted)
    }

    pub fn handle(&self) -> SimulationHandle {
        let live = self.live.lock().unwrap().clone();
        SimulationHandle {
            id: self.id.clone(),
            status: live.status,
            current_day: live.current_day,
            horizon: self.horizon,
            scenario: self.scenario.clone(),
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            scenario_digest: self.scenario_digest.clone(),
            population: self.population,
            days_per_second: live.speed,
            policy: live.policy,
            commands_applied: live.commands_applied,
            error: live.error,
        }
    }

    pub fn status(&self) -> Status {
        self.live.lock().unwrap().status
    }

    /// Daily counts for days `>= from_day`, in day order.
    pub fn metrics(&self, from_day: u32) -> Vec<DailyCounts> {
        let log = self.log.read().unwrap();
        log.get(from_day as usize..)
            .map(<[_]>::to_vec)
            .unwrap_or_default()
    }

    /// Rows `start..` of the metrics log.
    pub fn rows_from(&self, start: usize) -> Vec<DailyCounts> {
        let log = self.log.read().unwrap();
        log.get(start..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn subscribe(&self) -> watch::Receiver<Progress> {
        self.progress.subscribe()
    }

    /// Queue a command and wait for the worker to apply it.
    pub async fn submit(&self, command: SteerCommand) -> Result<Ack, ApiError> {
        command.validate().map_err(ApiError::invalid_command)?;
        if self.status().is_terminal() {
            return Err(ApiError::finished(&self.id));
        }
        let (reply, answer) = oneshot::channel();
        {
            let queue = self.queue.lock().unwrap();
            let tx = queue
                .as_ref()
                .ok_or_else(|| ApiError::unknown_simulation(&self.id))?;
            tx.send(Envelope { command, reply })
                .map_err(|_| ApiError::finished(&self.id))?;
        }
        answer
            .await
            .map_err(|_| ApiError::internal("simulation worker stopped"))?
    }

    /// Stop the worker. Open metric streams end after draining.
    pub fn shut_down(&self) {
        self.queue.lock().unwrap().take();
    }
}

struct Worker {
    sim: Simulation,
    hosted: Arc<Hosted>,
    rx: mpsc::Receiver<Envelope>,
    status: Status,
    speed: Option<f64>,
    next_due: Instant,
    seq: u64,
    record: Option<(PathBuf, Record)>,
}

impl Worker {
    fn run(mut self) {
        loop {
            let next = if self.status == Status::Running {
                let wait = self.next_due.saturating_duration_since(Instant::now());
                match self.rx.recv_timeout(wait) {
                    Ok(envelope) => Some(envelope),
                    Err(mpsc::RecvTimeoutError::Timeout) => {
                        self.free_step();
                        continue;
                    }
                    Err(mpsc::RecvTimeoutError::Disconnected) => None,
                }
            } else {
                self.rx.recv().ok()
            };
            match next {
                Some(envelope) => {
                    let outcome = self.apply(envelope.command);
                    let _ = envelope.reply.send(outcome);
                }
                None => break,
            }
        }
        debug!("worker for {} exiting", self.hosted.id);
        self.hosted.progress.send_modify(|p| p.done = true);
    }

    fn free_step(&mut self) {
        self.step();
        if let Some(speed) = self.speed {
            self.next_due = Instant::now().max(self.next_due) + Duration::from_secs_f64(1.0 / speed);
        }
        if self.status == Status::Running && self.sim.day().is_multiple_of(SNAPSHOT_EVERY) {
            self.save();
        }
    }

    fn apply(&mut self, command: SteerCommand) -> Result<Ack, ApiError> {
        if self.status.is_terminal() {
            return Err(ApiError::finished(&self.hosted.id));
        }
        let mut effective_day = None;
        match &command {
            SteerCommand::Advance { days } => {
                if self.status == Status::Running {
                    return Err(ApiError::invalid_state(
                        "pause the simulation before advancing it",
                    ));
                }
                self.set_status(Status::Running);
                for _ in 0..*days {
                    if self.status != Status::Running {
                        break;
                    }
                    self.step();
                }
                if self.status == Status::Running {
                    self.set_status(Status::Paused);
                }
            }
            SteerCommand::Pause => match self.status {
                Status::Running | Status::Paused => self.set_status(Status::Paused),
                _ => {
                    return Err(ApiError::invalid_state(
                        "a simulation that never ran cannot be paused",
                    ))
                }
            },
            SteerCommand::Resume => {
                if self.status != Status::Running {
                    self.next_due = Instant::now();
                    self.set_status(Status::Running);
                }
            }
            SteerCommand::InjectIntervention { intervention } => {
                effective_day = Some(self.sim.inject(intervention.clone()));
            }
            SteerCommand::SetSpeed { days_per_second } => {
                self.speed = *days_per_second;
                self.next_due = Instant::now();
            }
        }
        self.seq += 1;
        let current_day = self.sim.day() - 1;
        {
            let mut live = self.hosted.live.lock().unwrap();
            live.speed = self.speed;
            live.policy = self.sim.timeline().resolve(self.sim.day());
            live.commands_applied = self.seq;
        }
        if let Some((_, record)) = &mut self.record {
            record.commands.push(LoggedCommand {
                seq: self.seq,
                day: current_day,
                command: command.clone(),
            });
        }
        self.save();
        Ok(Ack {
            id: self.hosted.id.clone(),
            seq: self.seq,
            command,
            status: self.status,
            current_day,
            effective_day,
        })
    }

    /// Simulate one day and publish its counts.
    fn step(&mut self) {
        let outcome = catch_unwind(AssertUnwindSafe(|| self.sim.step_day()));
        match outcome {
            Ok(counts) => {
                self.hosted.log.write().unwrap().push(counts);
                let days = self.sim.history().len();
                {
                    let mut live = self.hosted.live.lock().unwrap();
                    live.current_day = counts.day;
                    live.policy = self.sim.timeline().resolve(self.sim.day());
                }
                if self.sim.is_finished() {
                    self.set_status(Status::Finished);
                    self.save();
                }
                let done = self.status.is_terminal();
                self.hosted.progress.send_replace(Progress { days, done });
            }
            Err(panic) => {
                let reason = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "simulation panicked".into());
                warn!("simulation {} failed: {reason}", self.hosted.id);
                self.hosted.live.lock().unwrap().error = Some(reason);
                self.set_status(Status::Failed);
                self.hosted.progress.send_modify(|p| p.done = true);
            }
        }
    }

    fn set_status(&mut self, status: Status) {
        self.status = status;
        self.hosted.live.lock().unwrap().status = status;
    }

    fn save(&mut self) {
        if let Some((dir, record)) = &mut self.record {
            record.current_day = self.sim.day() - 1;
            if let Err(e) = record.save(dir) {
                warn!("could not persist simulation {}: {e}", record.id);
            }
        }
    }
}
