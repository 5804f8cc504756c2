//! Event-driven simulation of one EEE link.
//!
//! The link cycles through `Active → Sleeping (Ts) → Idle → Waking (Tw) →
//! Active`. It transmits only while `Active`, and only `Idle` draws the
//! reduced power `σ_off`; both transitions draw full power. A sleep
//! transition is never aborted: frames arriving while `Sleeping` wait until
//! it completes, and the governor decides then whether to wake at once.
//!
//! Between two arrivals the link evolves deterministically, so the simulator
//! keeps no event heap: [`LinkSim::advance_to`] replays the link's own
//! transitions up to a time, and [`LinkSim::enqueue`] injects an arrival.
//! At equal timestamps mode changes are processed before arrivals.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{GovernorSpec, LinkParams};
use crate::traffic::{FrameEvent, TraceStream};

/// Backlog at which a run is aborted.
pub const MAX_BACKLOG_FRAMES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkSimError {
    #[error("arrival at {timestamp} s is outside the simulated horizon {duration} s")]
    ArrivalBeyondHorizon { timestamp: f64, duration: f64 },
    #[error("arrival at {timestamp} s precedes the link clock {clock} s")]
    OutOfOrder { timestamp: f64, clock: f64 },
    #[error("backlog exceeded {MAX_BACKLOG_FRAMES} frames at {time} s")]
    BacklogOverflow { time: f64 },
    #[error("invalid accounting window: warm-up {warmup} s, duration {duration} s")]
    InvalidWindow { warmup: f64, duration: f64 },
    #[error("invalid link configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkMode {
    Active,
    Sleeping,
    Idle,
    Waking,
}

/// Mode, queue and coalescing timer of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub mode: LinkMode,
    pub mode_entered_at: f64,
    /// Frames waiting for transmission (the frame on the wire is not included).
    pub queue: VecDeque<FrameEvent>,
    pub backlog_bytes: u64,
    /// First arrival since the queue last emptied (burst governor only).
    pub coalesce_first_arrival: Option<f64>,
}

impl LinkState {
    fn new() -> Self {
        Self {
            mode: LinkMode::Active,
            mode_entered_at: 0.0,
            queue: VecDeque::new(),
            backlog_bytes: 0,
            coalesce_first_arrival: None,
        }
    }
}

/// Whether a link in low-power mode should start waking at `now`.
///
/// Frame governor: any queued frame. Burst governor: `Qw` queued frames, or
/// `Tmax` elapsed since the first of them arrived.
pub fn governor_wake_decision(state: &LinkState, now: f64, gov: &GovernorSpec<f64>) -> bool {
    match *gov {
        GovernorSpec::Frame => !state.queue.is_empty(),
        GovernorSpec::Burst { qw, tmax } => {
            state.queue.len() >= qw as usize
                || state
                    .coalesce_first_arrival
                    .is_some_and(|first| now >= first + tmax)
        }
    }
}

/// Time spent in each mode inside the accounting window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyAccumulator {
    pub active_time: f64,
    pub sleeping_time: f64,
    pub idle_time: f64,
    pub waking_time: f64,
    /// Sleep transitions started inside the window.
    pub sleep_cycles: u64,
}

impl EnergyAccumulator {
    pub fn total_time(&self) -> f64 {
        self.active_time + self.sleeping_time + self.idle_time + self.waking_time
    }

    /// Time-averaged power relative to full active power.
    pub fn normalized_energy(&self, sigma_off: f64) -> f64 {
        let total = self.total_time();
        if total <= 0.0 {
            return 0.0;
        }
        (self.active_time + self.sleeping_time + self.waking_time + sigma_off * self.idle_time) / total
    }

    /// Mean low-power sojourn per sleep cycle.
    pub fn mean_idle_period(&self) -> f64 {
        if self.sleep_cycles == 0 {
            0.0
        } else {
            self.idle_time / self.sleep_cycles as f64
        }
    }

    fn add(&mut self, mode: LinkMode, dt: f64) {
        match mode {
            LinkMode::Active => self.active_time += dt,
            LinkMode::Sleeping => self.sleeping_time += dt,
            LinkMode::Idle => self.idle_time += dt,
            LinkMode::Waking => self.waking_time += dt,
        }
    }
}

/// Queuing delay (service start − arrival) of frames arriving inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayAccumulator {
    pub total_wait: f64,
    pub frames: u64,
    pub max_wait: f64,
}

impl DelayAccumulator {
    pub fn mean(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.total_wait / self.frames as f64
        }
    }

    pub fn merge(&mut self, other: &DelayAccumulator) {
        self.total_wait += other.total_wait;
        self.frames += other.frames;
        self.max_wait = self.max_wait.max(other.max_wait);
    }

    fn record(&mut self, wait: f64) {
        self.total_wait += wait;
        self.frames += 1;
        self.max_wait = self.max_wait.max(wait);
    }
}

/// Simulated horizon `[0, duration)` with statistics collected from `warmup` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimWindow {
    pub warmup: f64,
    pub duration: f64,
}

impl SimWindow {
    pub fn new(warmup: f64, duration: f64) -> Result<Self, LinkSimError> {
        if !(warmup >= 0.0 && duration > warmup) || !duration.is_finite() {
            return Err(LinkSimError::InvalidWindow { warmup, duration });
        }
        Ok(Self { warmup, duration })
    }

    /// Whole horizon, no warm-up.
    pub fn full(duration: f64) -> Result<Self, LinkSimError> {
        Self::new(0.0, duration)
    }

    pub fn length(&self) -> f64 {
        self.duration - self.warmup
    }

    fn clip(&self, from: f64, to: f64) -> f64 {
        (to.min(self.duration) - from.max(self.warmup)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct InService {
    end: f64,
    size: u32,
}

/// Final statistics of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub energy: EnergyAccumulator,
    pub delay: DelayAccumulator,
    pub normalized_energy: f64,
    /// Bytes whose transmission completed before the end of the horizon.
    pub sent_bytes: u64,
    /// Bytes still queued or on the wire at the end of the horizon.
    pub residual_bytes: u64,
    pub offered_bytes: u64,
    pub offered_frames: u64,
}

/// One link's state machine with energy and delay accounting.
#[derive(Debug, Clone)]
pub struct LinkSim {
    params: LinkParams<f64>,
    gov: GovernorSpec<f64>,
    window: SimWindow,
    state: LinkState,
    in_service: Option<InService>,
    clock: f64,
    energy: EnergyAccumulator,
    delay: DelayAccumulator,
    sent_bytes: u64,
    offered_bytes: u64,
    offered_frames: u64,
}

impl LinkSim {
    /// Link at `t = 0`, active with an empty queue, immediately starting to sleep.
    pub fn new(params: LinkParams<f64>, gov: GovernorSpec<f64>, window: SimWindow) -> Result<Self, LinkSimError> {
        params.validate().map_err(|e| LinkSimError::Config(e.to_string()))?;
        gov.validate().map_err(|e| LinkSimError::Config(e.to_string()))?;
        let mut sim = Self {
            params,
            gov,
            window,
            state: LinkState::new(),
            in_service: None,
            clock: 0.0,
            energy: EnergyAccumulator::default(),
            delay: DelayAccumulator::default(),
            sent_bytes: 0,
            offered_bytes: 0,
            offered_frames: 0,
        };
        sim.enter_sleep(0.0);
        Ok(sim)
    }

    pub fn state(&self) -> &LinkState {
        &self.state
    }

    pub fn params(&self) -> &LinkParams<f64> {
        &self.params
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    fn set_mode(&mut self, mode: LinkMode, t: f64) {
        let dt = self.window.clip(self.state.mode_entered_at, t);
        self.energy.add(self.state.mode, dt);
        self.state.mode = mode;
        self.state.mode_entered_at = t;
    }

    fn enter_sleep(&mut self, t: f64) {
        self.set_mode(LinkMode::Sleeping, t);
        self.state.coalesce_first_arrival = None;
        if t >= self.window.warmup && t < self.window.duration {
            self.energy.sleep_cycles += 1;
        }
    }

    fn start_service(&mut self, t: f64) {
        let frame = self.state.queue.pop_front().expect("service starts with a queued frame");
        self.state.backlog_bytes -= frame.size as u64;
        if frame.timestamp >= self.window.warmup {
            self.delay.record(t - frame.timestamp);
        }
        self.in_service = Some(InService {
            end: t + frame.bits() / self.params.capacity_bps,
            size: frame.size,
        });
    }

    /// Time of the next internal transition, or `+∞` if the link waits for an arrival.
    pub fn next_event_time(&self) -> f64 {
        let s = &self.state;
        match s.mode {
            LinkMode::Sleeping => s.mode_entered_at + self.params.ts,
            LinkMode::Waking => s.mode_entered_at + self.params.tw,
            LinkMode::Active => self.in_service.map_or(s.mode_entered_at, |f| f.end),
            LinkMode::Idle => match (self.gov, s.coalesce_first_arrival) {
                (GovernorSpec::Burst { tmax, .. }, Some(first)) => first + tmax,
                _ => f64::INFINITY,
            },
        }
    }

    fn fire(&mut self, t: f64) {
        match self.state.mode {
            LinkMode::Sleeping => {
                if governor_wake_decision(&self.state, t, &self.gov) {
                    self.set_mode(LinkMode::Waking, t);
                } else {
                    self.set_mode(LinkMode::Idle, t);
                }
            }
            // only the coalescing timer is scheduled while idle
            LinkMode::Idle => self.set_mode(LinkMode::Waking, t),
            LinkMode::Waking => {
                self.set_mode(LinkMode::Active, t);
                self.state.coalesce_first_arrival = None;
                if self.state.queue.is_empty() {
                    self.enter_sleep(t);
                } else {
                    self.start_service(t);
                }
            }
            LinkMode::Active => {
                if let Some(done) = self.in_service.take() {
                    self.sent_bytes += done.size as u64;
                }
                if self.state.queue.is_empty() {
                    self.enter_sleep(t);
                } else {
                    self.start_service(t);
                }
            }
        }
    }

    /// Processes every internal transition due at or before `t`.
    pub fn advance_to(&mut self, t: f64) {
        loop {
            let next = self.next_event_time();
            if next > t {
                break;
            }
            self.fire(next);
        }
        if t > self.clock {
            self.clock = t;
        }
    }

    /// Queue content in time units: backlog bits, including the rest of the frame on the wire, over `C`.
    /// Assumes the link was advanced to `now`.
    pub fn queue_delay(&self, now: f64) -> f64 {
        let on_wire = self.in_service.map_or(0.0, |f| (f.end - now).max(0.0));
        on_wire + self.state.backlog_bytes as f64 * 8.0 / self.params.capacity_bps
    }

    /// Injects an arrival at `frame.timestamp`.
    pub fn enqueue(&mut self, frame: FrameEvent) -> Result<(), LinkSimError> {
        let t = frame.timestamp;
        if !(t < self.window.duration) {
            return Err(LinkSimError::ArrivalBeyondHorizon {
                timestamp: t,
                duration: self.window.duration,
            });
        }
        if t < self.clock {
            return Err(LinkSimError::OutOfOrder {
                timestamp: t,
                clock: self.clock,
            });
        }
        self.advance_to(t);
        if self.state.queue.len() >= MAX_BACKLOG_FRAMES {
            return Err(LinkSimError::BacklogOverflow { time: t });
        }
        self.state.queue.push_back(frame);
        self.state.backlog_bytes += frame.size as u64;
        self.offered_bytes += frame.size as u64;
        self.offered_frames += 1;
        match self.state.mode {
            LinkMode::Sleeping => {
                self.state.coalesce_first_arrival.get_or_insert(t);
            }
            LinkMode::Idle => {
                self.state.coalesce_first_arrival.get_or_insert(t);
                if governor_wake_decision(&self.state, t, &self.gov) {
                    self.set_mode(LinkMode::Waking, t);
                }
            }
            LinkMode::Waking | LinkMode::Active => {}
        }
        Ok(())
    }

    /// Runs to the end of the horizon and closes the accounting.
    pub fn finish(mut self) -> LinkOutcome {
        let end = self.window.duration;
        self.advance_to(end);
        let mode = self.state.mode;
        self.set_mode(mode, end);
        let residual = self.state.backlog_bytes + self.in_service.map_or(0, |f| f.size as u64);
        LinkOutcome {
            normalized_energy: self.energy.normalized_energy(self.params.sigma_off),
            energy: self.energy,
            delay: self.delay,
            sent_bytes: self.sent_bytes,
            residual_bytes: residual,
            offered_bytes: self.offered_bytes,
            offered_frames: self.offered_frames,
        }
    }
}

/// Simulates one link fed by `events` over `window`.
pub fn simulate_link_events(
    events: impl IntoIterator<Item = FrameEvent>,
    params: &LinkParams<f64>,
    gov: &GovernorSpec<f64>,
    window: SimWindow,
) -> Result<LinkOutcome, LinkSimError> {
    let mut sim = LinkSim::new(*params, *gov, window)?;
    for e in events {
        sim.enqueue(e)?;
    }
    Ok(sim.finish())
}

/// Simulates one link over `[0, duration)` with no warm-up.
pub fn simulate_link(
    stream: &TraceStream,
    params: &LinkParams<f64>,
    gov: &GovernorSpec<f64>,
    duration: f64,
) -> Result<(EnergyAccumulator, DelayAccumulator), LinkSimError> {
    let out = simulate_link_events(stream.events().iter().copied(), params, gov, SimWindow::full(duration)?)?;
    Ok((out.energy, out.delay))
}
