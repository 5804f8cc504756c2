//! Simulation of an N-link bundle under a dispatch strategy.
//!
//! Static strategies compute an [`AllocationVector`] for the offered rate and
//! realize it frame by frame, either with a byte-weighted deficit round robin
//! or with a seeded random split. The dynamic strategy implements delay
//! controlled water-filling: each link keeps its own queue and the
//! dispatcher tracks `N + 1` numbers, the queue contents in time units `q_i`
//! and an EWMA `d_av` of the queue delay seen by dispatched frames.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::alloc::{equitable, waterfill, waterfill_capped, AllocError, AllocationVector, BundleSpec};
use crate::link_sim::{DelayAccumulator, EnergyAccumulator, LinkOutcome, LinkSim, LinkSimError, SimWindow};
use crate::model::GovernorSpec;
use crate::traffic::{FrameEvent, TraceStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleSimError {
    #[error("invalid dispatcher configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("link {link}: {source}")]
    Link {
        link: usize,
        #[source]
        source: LinkSimError,
    },
    #[error(transparent)]
    Window(LinkSimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Equitable,
    StaticWaterfill,
    CappedWaterfill,
    DynamicWaterfill,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Equitable => "equitable",
            Strategy::StaticWaterfill => "waterfill",
            Strategy::CappedWaterfill => "capped-waterfill",
            Strategy::DynamicWaterfill => "dynamic",
        }
    }

    pub fn is_static(self) -> bool {
        self != Strategy::DynamicWaterfill
    }
}

/// How a static allocation is turned into per-frame decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SplitMode {
    /// Deficit round robin over bytes; deterministic, no RNG.
    #[default]
    RoundRobin,
    /// Independent weighted draw per frame. Thinning a Poisson stream this
    /// way keeps every per-link stream Poisson.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatcherConfig {
    pub strategy: Strategy,
    /// Target mean delay `d_e` in seconds (dynamic strategy only).
    pub expected_delay: f64,
    /// EWMA gain `β`.
    pub beta: f64,
    /// Feed the EWMA with the chosen queue's delay after adding the frame.
    pub ewma_post_enqueue: bool,
    pub split: SplitMode,
}

/// Default EWMA gain.
pub const DEFAULT_BETA: f64 = 0.1;

impl DispatcherConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            expected_delay: 0.0,
            beta: DEFAULT_BETA,
            ewma_post_enqueue: false,
            split: SplitMode::RoundRobin,
        }
    }

    pub fn dynamic(expected_delay: f64) -> Self {
        Self {
            expected_delay,
            ..Self::new(Strategy::DynamicWaterfill)
        }
    }

    pub fn with_split(mut self, split: SplitMode) -> Self {
        self.split = split;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<(), BundleSimError> {
        if self.strategy == Strategy::DynamicWaterfill {
            if !(self.expected_delay > 0.0) {
                return Err(BundleSimError::Config(format!(
                    "expected delay must be positive, got {}",
                    self.expected_delay
                )));
            }
            if !(self.beta > 0.0 && self.beta < 1.0) {
                return Err(BundleSimError::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
            }
        }
        Ok(())
    }
}

/// Dispatcher memory: `d_av` and the per-link queue delays `q_i` at the current instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatcherState {
    pub d_av: f64,
    /// `q_i` in seconds, indexed by link.
    pub queue_delays: Vec<f64>,
    /// Link capacities in bits/second, indexed by link.
    pub capacities: Vec<f64>,
    /// Order of the sequential search (non-increasing capacity).
    pub search_order: Vec<usize>,
}

impl DispatcherState {
    pub fn new(bundle: &BundleSpec<f64>) -> Self {
        Self {
            d_av: 0.0,
            queue_delays: vec![0.0; bundle.len()],
            capacities: bundle.links().iter().map(|l| l.capacity_bps).collect(),
            search_order: bundle.order().to_vec(),
        }
    }
}

/// Picks the queue for `frame` and updates `d_av` once.
///
/// If `d_av < d_e` the first link is used. Otherwise the first link whose
/// `q_i < d_e` is used, or the last link if there is none. The EWMA is then
/// fed with the chosen queue's delay: `d_av ← β q + (1 − β) d_av`.
pub fn dispatch_frame(state: &mut DispatcherState, config: &DispatcherConfig, frame: &FrameEvent) -> usize {
    let de = config.expected_delay;
    let order = &state.search_order;
    let pick = if state.d_av < de {
        order[0]
    } else {
        order
            .iter()
            .copied()
            .find(|&i| state.queue_delays[i] < de)
            .unwrap_or(order[order.len() - 1])
    };
    let mut q = state.queue_delays[pick];
    if config.ewma_post_enqueue {
        q += frame.bits() / state.capacities[pick];
    }
    state.d_av = config.beta * q + (1.0 - config.beta) * state.d_av;
    pick
}

/// Aggregated results of one bundle run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub per_link_energy: Vec<f64>,
    /// Mean of `per_link_energy`.
    pub bundle_energy_normalized: f64,
    /// Transmitted bits/second per link over the whole horizon.
    pub per_link_carried: Vec<f64>,
    /// Mean queuing delay over all frames arriving inside the accounting window.
    pub mean_delay: f64,
    pub per_link_delay: Vec<DelayAccumulator>,
    pub per_link_time: Vec<EnergyAccumulator>,
    pub per_link_sent_bytes: Vec<u64>,
    pub per_link_offered_bytes: Vec<u64>,
    pub offered_bytes: u64,
    pub residual_bytes: u64,
    /// Static allocation the split realized, if any.
    pub allocation: Option<AllocationVector<f64>>,
    pub window: SimWindow,
    /// Dispatcher configuration, absent for runs driven by an explicit allocation.
    pub config_echo: Option<DispatcherConfig>,
}

impl SimReport {
    fn from_outcomes(
        outcomes: Vec<LinkOutcome>,
        window: SimWindow,
        config: Option<DispatcherConfig>,
        allocation: Option<AllocationVector<f64>>,
    ) -> Self {
        let n = outcomes.len().max(1) as f64;
        let per_link_energy: Vec<f64> = outcomes.iter().map(|o| o.normalized_energy).collect();
        let mut all = DelayAccumulator::default();
        for o in &outcomes {
            all.merge(&o.delay);
        }
        Self {
            bundle_energy_normalized: per_link_energy.iter().sum::<f64>() / n,
            per_link_energy,
            per_link_carried: outcomes
                .iter()
                .map(|o| o.sent_bytes as f64 * 8.0 / window.duration)
                .collect(),
            mean_delay: all.mean(),
            per_link_delay: outcomes.iter().map(|o| o.delay).collect(),
            per_link_time: outcomes.iter().map(|o| o.energy).collect(),
            per_link_sent_bytes: outcomes.iter().map(|o| o.sent_bytes).collect(),
            per_link_offered_bytes: outcomes.iter().map(|o| o.offered_bytes).collect(),
            offered_bytes: outcomes.iter().map(|o| o.offered_bytes).sum(),
            residual_bytes: outcomes.iter().map(|o| o.residual_bytes).sum(),
            allocation,
            window,
            config_echo: config,
        }
    }
}

/// Static allocation used by a strategy for an offered `demand` (bits/second).
pub fn static_allocation(bundle: &BundleSpec<f64>, strategy: Strategy, demand: f64) -> Result<AllocationVector<f64>, AllocError> {
    match strategy {
        Strategy::Equitable => equitable(bundle, demand),
        Strategy::StaticWaterfill => waterfill(bundle, demand),
        Strategy::CappedWaterfill => waterfill_capped(bundle, demand),
        Strategy::DynamicWaterfill => waterfill(bundle, demand),
    }
}

enum Splitter {
    RoundRobin {
        weights: Vec<f64>,
        sent: Vec<f64>,
        total: f64,
        order: Vec<usize>,
    },
    Random {
        cumulative: Vec<f64>,
        rng: Pcg64,
    },
}

impl Splitter {
    fn new(alloc: &AllocationVector<f64>, order: &[usize], mode: SplitMode) -> Self {
        let mut weights = alloc.shares();
        if weights.iter().all(|&w| w <= 0.0) {
            weights[order[0]] = 1.0;
        }
        match mode {
            SplitMode::RoundRobin => Splitter::RoundRobin {
                sent: vec![0.0; weights.len()],
                weights,
                total: 0.0,
                order: order.to_vec(),
            },
            SplitMode::Random { seed } => {
                let sum: f64 = weights.iter().sum();
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / sum;
                        acc
                    })
                    .collect();
                Splitter::Random {
                    cumulative,
                    rng: Pcg64::seed_from_u64(seed),
                }
            }
        }
    }

    fn pick(&mut self, frame: &FrameEvent) -> usize {
        match self {
            Splitter::RoundRobin {
                weights,
                sent,
                total,
                order,
            } => {
                let size = frame.size as f64;
                *total += size;
                // most-owed link; ties go to the earliest link in capacity order
                let mut best = order[0];
                let mut best_deficit = f64::NEG_INFINITY;
                for &i in order.iter() {
                    if weights[i] <= 0.0 {
                        continue;
                    }
                    let deficit = weights[i] * *total - sent[i];
                    if deficit > best_deficit {
                        best_deficit = deficit;
                        best = i;
                    }
                }
                sent[best] += size;
                best
            }
            Splitter::Random { cumulative, rng } => {
                let u: f64 = rng.gen();
                cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or_else(|| cumulative.iter().rposition(|&c| c > 0.0).unwrap_or(0))
            }
        }
    }
}

fn link_err(link: usize) -> impl Fn(LinkSimError) -> BundleSimError {
    move |source| BundleSimError::Link { link, source }
}

/// Runs a bundle fed by `events` whose mean offered rate is `demand` bits/second.
///
/// `demand` only matters to the static strategies, which allocate it up front.
pub fn run_bundle_events(
    events: impl IntoIterator<Item = FrameEvent>,
    demand: f64,
    bundle: &BundleSpec<f64>,
    gov: &GovernorSpec<f64>,
    config: &DispatcherConfig,
    window: SimWindow,
) -> Result<SimReport, BundleSimError> {
    config.validate()?;
    let mut links = build_links(bundle, gov, window)?;

    let mut allocation = None;
    if config.strategy.is_static() {
        let alloc = static_allocation(bundle, config.strategy, demand)?;
        feed_split(&mut links, events, &alloc, bundle, config.split)?;
        allocation = Some(alloc);
    } else {
        let mut state = DispatcherState::new(bundle);
        for e in events {
            let t = e.timestamp;
            if !(t < window.duration) {
                return Err(BundleSimError::Link {
                    link: 0,
                    source: LinkSimError::ArrivalBeyondHorizon {
                        timestamp: t,
                        duration: window.duration,
                    },
                });
            }
            for (q, link) in state.queue_delays.iter_mut().zip(links.iter_mut()) {
                link.advance_to(t);
                *q = link.queue_delay(t);
            }
            let i = dispatch_frame(&mut state, config, &e);
            links[i].enqueue(e).map_err(link_err(i))?;
        }
    }
    let outcomes = links.into_iter().map(LinkSim::finish).collect();
    Ok(SimReport::from_outcomes(outcomes, window, Some(*config), allocation))
}

fn build_links(bundle: &BundleSpec<f64>, gov: &GovernorSpec<f64>, window: SimWindow) -> Result<Vec<LinkSim>, BundleSimError> {
    bundle
        .links()
        .iter()
        .enumerate()
        .map(|(i, p)| LinkSim::new(*p, *gov, window).map_err(link_err(i)))
        .collect()
}

fn feed_split(
    links: &mut [LinkSim],
    events: impl IntoIterator<Item = FrameEvent>,
    alloc: &AllocationVector<f64>,
    bundle: &BundleSpec<f64>,
    split: SplitMode,
) -> Result<(), BundleSimError> {
    let mut splitter = Splitter::new(alloc, bundle.order(), split);
    for e in events {
        let i = splitter.pick(&e);
        links[i].enqueue(e).map_err(link_err(i))?;
    }
    Ok(())
}

/// Splits `events` according to a caller-supplied allocation (e.g. one point of a share sweep).
pub fn run_allocation_events(
    events: impl IntoIterator<Item = FrameEvent>,
    allocation: &AllocationVector<f64>,
    bundle: &BundleSpec<f64>,
    gov: &GovernorSpec<f64>,
    split: SplitMode,
    window: SimWindow,
) -> Result<SimReport, BundleSimError> {
    if allocation.rates.len() != bundle.len() || !allocation.is_feasible_for(bundle) {
        return Err(BundleSimError::Config(format!("allocation {:?} does not fit the bundle", allocation.rates)));
    }
    let mut links = build_links(bundle, gov, window)?;
    feed_split(&mut links, events, allocation, bundle, split)?;
    let outcomes = links.into_iter().map(LinkSim::finish).collect();
    Ok(SimReport::from_outcomes(outcomes, window, None, Some(allocation.clone())))
}

/// Runs a bundle fed by a materialized stream; static strategies allocate the stream's mean rate.
pub fn run_bundle(
    stream: &TraceStream,
    bundle: &BundleSpec<f64>,
    gov: &GovernorSpec<f64>,
    config: &DispatcherConfig,
    window: SimWindow,
) -> Result<SimReport, BundleSimError> {
    let demand = stream.mean_rate().min(bundle.total_capacity());
    run_bundle_events(stream.events().iter().copied(), demand, bundle, gov, config, window)
}

/// One dynamic-dispatcher run per target delay; returns `(target, measured mean delay)`.
pub fn measure_delay_tracking(
    stream: &TraceStream,
    bundle: &BundleSpec<f64>,
    gov: &GovernorSpec<f64>,
    targets: &[f64],
    window: SimWindow,
) -> Result<Vec<(f64, f64)>, BundleSimError> {
    targets
        .iter()
        .map(|&target| {
            let config = DispatcherConfig::dynamic(target);
            let report = run_bundle(stream, bundle, gov, &config, window)?;
            Ok((target, report.mean_delay))
        })
        .collect()
}
