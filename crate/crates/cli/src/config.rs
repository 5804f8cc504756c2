//! Experiment configuration: built-in defaults per subcommand, then a flat
//! `key = value` file, then command-line overrides, all through [`ExperimentConfig::set`].

use std::fs;
use std::path::{Path, PathBuf};

use eee_bundle::bundle_sim::DEFAULT_BETA;
use eee_bundle::{Distribution, GovernorSpec, LinkParams, SplitMode, Strategy};

use crate::error::CliError;

/// Subcommands, used to pick defaults and output file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Model,
    Allocate,
    ShareSweep,
    BundleSweep,
    DelaySweep,
    Table,
    ValidateConcavity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Allocate => "allocate",
            Command::ShareSweep => "share-sweep",
            Command::BundleSweep => "bundle-sweep",
            Command::DelaySweep => "delay-sweep",
            Command::Table => "table",
            Command::ValidateConcavity => "validate-concavity",
        }
    }

    /// Extension of the default output file.
    pub fn extension(self) -> &'static str {
        if self == Command::Table {
            "txt"
        } else {
            "csv"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GovernorKind {
    Frame,
    Burst,
}

impl GovernorKind {
    pub fn name(self) -> &'static str {
        match self {
            GovernorKind::Frame => "frame",
            GovernorKind::Burst => "burst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficKind {
    Poisson,
    Pareto,
}

/// A strategy named on the command line; `Oracle` is the brute-force minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    Sim(Strategy),
    Oracle,
}

impl StrategyChoice {
    pub fn name(self) -> &'static str {
        match self {
            StrategyChoice::Sim(s) => s.name(),
            StrategyChoice::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    RoundRobin,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub links: Vec<usize>,
    pub capacity_gbps: f64,
    pub ts_us: f64,
    pub tw_us: f64,
    pub sigma_off: f64,
    pub governors: Vec<GovernorKind>,
    pub qw: u32,
    pub tmax_us: f64,
    pub pkt: u32,
    pub distributions: Vec<Distribution>,
    pub traffic: TrafficKind,
    pub alpha: f64,
    pub traces: Vec<PathBuf>,
    pub scale: f64,
    pub copies: usize,
    pub duration: f64,
    pub warmup: f64,
    pub seeds: Vec<u64>,
    /// Percent of one link's capacity (share sweep) or of the bundle's capacity (other sweeps).
    pub loads: Vec<f64>,
    pub share_points: usize,
    pub share_max: f64,
    pub strategies: Vec<StrategyChoice>,
    pub targets_us: Vec<f64>,
    pub expected_delay_us: f64,
    pub burst_expected_delay_us: f64,
    pub beta: f64,
    pub ewma_post_enqueue: bool,
    pub split: SplitKind,
    pub cap: f64,
    pub rho: Vec<f64>,
    pub pkt_sizes: Vec<f64>,
    pub demand_gbps: Vec<f64>,
    pub output: Option<PathBuf>,
}

/// Every key accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "links",
    "capacity-gbps",
    "ts-us",
    "tw-us",
    "sigma-off",
    "governor",
    "qw",
    "tmax-us",
    "pkt",
    "dist",
    "traffic",
    "alpha",
    "trace",
    "scale",
    "copies",
    "duration",
    "warmup",
    "seeds",
    "loads",
    "share-points",
    "share-max",
    "strategies",
    "targets-us",
    "expected-delay-us",
    "burst-expected-delay-us",
    "beta",
    "ewma",
    "split",
    "cap",
    "rho",
    "pkt-sizes",
    "demand-gbps",
    "output",
];

/// Bundle rates of the four-link trace experiment, in Gb/s.
pub const TABLE_RATES_GBPS: [f64; 5] = [6.21, 12.60, 18.81, 25.08, 31.40];

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            links: vec![2],
            capacity_gbps: 10.0,
            ts_us: 2.88,
            tw_us: 4.48,
            sigma_off: 0.1,
            governors: vec![GovernorKind::Frame],
            qw: 20,
            tmax_us: 100.0,
            pkt: 1000,
            distributions: vec![Distribution::PoissonExact],
            traffic: TrafficKind::Poisson,
            alpha: 2.5,
            traces: Vec::new(),
            scale: 1.0,
            copies: 1,
            duration: 10.0,
            warmup: 1.0,
            seeds: (1..=5).collect(),
            loads: vec![],
            share_points: 5,
            share_max: 0.5,
            strategies: vec![],
            targets_us: vec![],
            expected_delay_us: 10.0,
            burst_expected_delay_us: 20.0,
            beta: DEFAULT_BETA,
            ewma_post_enqueue: false,
            split: SplitKind::RoundRobin,
            cap: 0.9,
            rho: vec![],
            pkt_sizes: vec![],
            demand_gbps: vec![],
            output: None,
        };
        let both = vec![GovernorKind::Frame, GovernorKind::Burst];
        match command {
            Command::Model => {
                c.rho = grid(0.1, 0.9, 0.1);
                c.pkt_sizes = vec![1000.0];
            }
            Command::Allocate => {
                c.links = vec![4];
                c.demand_gbps = TABLE_RATES_GBPS.to_vec();
                c.strategies = vec![
                    StrategyChoice::Sim(Strategy::Equitable),
                    StrategyChoice::Sim(Strategy::StaticWaterfill),
                    StrategyChoice::Sim(Strategy::CappedWaterfill),
                ];
            }
            Command::ShareSweep => {
                c.loads = vec![25.0, 75.0, 125.0, 175.0];
                c.governors = both;
                c.split = SplitKind::Random;
            }
            Command::BundleSweep => {
                c.links = vec![2, 4, 8];
                c.loads = grid(10.0, 90.0, 10.0);
                c.governors = both;
                c.strategies = vec![
                    StrategyChoice::Sim(Strategy::Equitable),
                    StrategyChoice::Sim(Strategy::StaticWaterfill),
                    StrategyChoice::Sim(Strategy::DynamicWaterfill),
                ];
                c.split = SplitKind::Random;
            }
            Command::DelaySweep => {
                c.links = vec![4];
                c.loads = vec![15.0, 30.0, 45.0, 60.0, 75.0];
                c.targets_us = vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
                c.seeds = vec![1];
            }
            Command::Table => {
                c.links = vec![4];
                c.demand_gbps = TABLE_RATES_GBPS.to_vec();
                c.governors = both;
                c.seeds = vec![1];
            }
            Command::ValidateConcavity => {
                c.rho = grid(0.01, 0.99, 0.01);
                c.pkt_sizes = vec![64.0, 128.0, 256.0, 512.0, 1000.0, 1500.0, 4000.0, 9000.0];
            }
        }
        c
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let e = |reason: String| CliError::Config(format!("{key} = {v:?}: {reason}"));
        match key {
            "links" => self.links = parse_list(v, parse_usize).map_err(e)?,
            "capacity-gbps" => self.capacity_gbps = parse_f64(v).map_err(e)?,
            "ts-us" => self.ts_us = parse_f64(v).map_err(e)?,
            "tw-us" => self.tw_us = parse_f64(v).map_err(e)?,
            "sigma-off" => self.sigma_off = parse_f64(v).map_err(e)?,
            "governor" => {
                self.governors = parse_list(v, |s| match s {
                    "frame" => Ok(vec![GovernorKind::Frame]),
                    "burst" => Ok(vec![GovernorKind::Burst]),
                    "both" => Ok(vec![GovernorKind::Frame, GovernorKind::Burst]),
                    _ => Err(format!("unknown governor {s:?} (frame, burst, both)")),
                })
                .map_err(e)?
                .concat()
            }
            "qw" => self.qw = v.parse().map_err(|_| e("expected a positive integer".into()))?,
            "tmax-us" => self.tmax_us = parse_f64(v).map_err(e)?,
            "pkt" => self.pkt = v.parse().map_err(|_| e("expected frame size in bytes".into()))?,
            "dist" => {
                self.distributions = parse_list(v, |s| match s {
                    "poisson" => Ok(vec![Distribution::PoissonExact]),
                    "approx" => Ok(vec![Distribution::GeneralApprox]),
                    "both" => Ok(vec![Distribution::PoissonExact, Distribution::GeneralApprox]),
                    _ => Err(format!("unknown distribution {s:?} (poisson, approx, both)")),
                })
                .map_err(e)?
                .concat()
            }
            "traffic" => {
                self.traffic = match v {
                    "poisson" => TrafficKind::Poisson,
                    "pareto" => TrafficKind::Pareto,
                    _ => return Err(e("expected poisson or pareto".into())),
                }
            }
            "alpha" => self.alpha = parse_f64(v).map_err(e)?,
            "trace" => {
                self.traces = if v.is_empty() {
                    vec![]
                } else {
                    v.split(',').map(|p| PathBuf::from(p.trim())).collect()
                }
            }
            "scale" => self.scale = parse_f64(v).map_err(e)?,
            "copies" => self.copies = parse_usize(v).map_err(e)?,
            "duration" => self.duration = parse_f64(v).map_err(e)?,
            "warmup" => self.warmup = parse_f64(v).map_err(e)?,
            "seeds" => {
                self.seeds = parse_list(v, |s| parse_f64(s).map(|x| x as u64))
                    .map_err(e)?
            }
            "loads" => self.loads = parse_grid(v).map_err(e)?,
            "share-points" => self.share_points = parse_usize(v).map_err(e)?,
            "share-max" => self.share_max = parse_f64(v).map_err(e)?,
            "strategies" => self.strategies = parse_list(v, parse_strategy).map_err(e)?,
            "targets-us" => self.targets_us = parse_grid(v).map_err(e)?,
            "expected-delay-us" => self.expected_delay_us = parse_f64(v).map_err(e)?,
            "burst-expected-delay-us" => self.burst_expected_delay_us = parse_f64(v).map_err(e)?,
            "beta" => self.beta = parse_f64(v).map_err(e)?,
            "ewma" => {
                self.ewma_post_enqueue = match v {
                    "pre" => false,
                    "post" => true,
                    _ => return Err(e("expected pre or post".into())),
                }
            }
            "split" => {
                self.split = match v {
                    "rr" | "round-robin" => SplitKind::RoundRobin,
                    "random" => SplitKind::Random,
                    _ => return Err(e("expected rr or random".into())),
                }
            }
            "cap" => self.cap = parse_f64(v).map_err(e)?,
            "rho" => self.rho = parse_grid(v).map_err(e)?,
            "pkt-sizes" => self.pkt_sizes = parse_grid(v).map_err(e)?,
            "demand-gbps" => self.demand_gbps = parse_grid(v).map_err(e)?,
            "output" => self.output = Some(PathBuf::from(v)),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every line of a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(&key.trim().replace('_', "-"), value)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    /// Checks cross-field constraints and that referenced files exist.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.links.is_empty() || self.links.contains(&0) {
            return bad("links must list positive counts".into());
        }
        self.link_params()?;
        for g in &self.governors {
            self.governor_spec(*g)?;
        }
        if self.governors.is_empty() {
            return bad("governor list is empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds list is empty".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.duration) {
            return bad(format!("warmup must lie in [0, duration), got {}", self.warmup));
        }
        if !(self.cap > 0.0 && self.cap <= 1.0) {
            return bad(format!("cap must lie in (0, 1], got {}", self.cap));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if self.traffic == TrafficKind::Pareto && !(self.alpha > 2.0) {
            return bad(format!("alpha must exceed 2, got {}", self.alpha));
        }
        if !(self.scale >= 1.0) || self.copies == 0 {
            return bad("scale must be ≥ 1 and copies ≥ 1".into());
        }
        for p in &self.traces {
            if !p.is_file() {
                return bad(format!("trace file {} does not exist", p.display()));
            }
        }
        let needs_grid = |v: &Vec<f64>, name: &str| {
            if v.is_empty() {
                Err(CliError::Config(format!("{name} grid is empty")))
            } else {
                Ok(())
            }
        };
        match self.command {
            Command::Model | Command::ValidateConcavity => {
                needs_grid(&self.rho, "rho")?;
                needs_grid(&self.pkt_sizes, "pkt-sizes")?;
            }
            Command::Allocate => {
                needs_grid(&self.demand_gbps, "demand-gbps")?;
                if self.strategies.is_empty() {
                    return bad("strategies list is empty".into());
                }
            }
            Command::ShareSweep => {
                if self.links != [2] {
                    return bad("share-sweep needs exactly 2 links".into());
                }
                if !self.traces.is_empty() {
                    return bad("share-sweep runs on generated traffic; drop the trace key".into());
                }
                needs_grid(&self.loads, "loads")?;
                if self.share_points == 0 || !(self.share_max > 0.0 && self.share_max <= 1.0) {
                    return bad("share-points must be positive and share-max in (0, 1]".into());
                }
            }
            Command::BundleSweep => {
                if self.traces.is_empty() {
                    needs_grid(&self.loads, "loads")?;
                }
                if self.strategies.is_empty() || self.strategies.contains(&StrategyChoice::Oracle) {
                    return bad("bundle-sweep needs simulated strategies (no oracle)".into());
                }
            }
            Command::DelaySweep => {
                if self.traces.is_empty() {
                    needs_grid(&self.loads, "loads")?;
                }
                needs_grid(&self.targets_us, "targets-us")?;
                if self.targets_us.iter().any(|&t| !(t >= 0.0)) {
                    return bad("targets must be non-negative".into());
                }
            }
            Command::Table => {
                if self.links != [4] {
                    return bad("table needs exactly 4 links".into());
                }
                if self.traces.is_empty() {
                    needs_grid(&self.demand_gbps, "demand-gbps")?;
                }
            }
        }
        if matches!(self.command, Command::ShareSweep | Command::BundleSweep | Command::DelaySweep) {
            if self.loads.iter().any(|&l| !(l >= 0.0)) {
                return bad("loads must be non-negative percentages".into());
            }
        }
        Ok(())
    }

    pub fn link_params(&self) -> Result<LinkParams<f64>, CliError> {
        LinkParams::new(self.capacity_gbps * 1e9, self.ts_us / 1e6, self.tw_us / 1e6, self.sigma_off)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn governor_spec(&self, kind: GovernorKind) -> Result<GovernorSpec<f64>, CliError> {
        match kind {
            GovernorKind::Frame => Ok(GovernorSpec::Frame),
            GovernorKind::Burst => {
                GovernorSpec::burst(self.qw, self.tmax_us / 1e6).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    /// Target delay of the dynamic dispatcher under `kind`, in seconds.
    pub fn expected_delay(&self, kind: GovernorKind) -> f64 {
        match kind {
            GovernorKind::Frame => self.expected_delay_us / 1e6,
            GovernorKind::Burst => self.burst_expected_delay_us / 1e6,
        }
    }

    /// Split used by static strategies in the run for `seed`.
    pub fn split_mode(&self, seed: u64) -> SplitMode {
        match self.split {
            SplitKind::RoundRobin => SplitMode::RoundRobin,
            SplitKind::Random => SplitMode::Random {
                seed: seed ^ 0x5DEE_CE66_D1CE_4E5B,
            },
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("{s:?} is not a finite number"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("{s:?} is not a non-negative integer"))
}

fn parse_strategy(s: &str) -> Result<StrategyChoice, String> {
    Ok(match s {
        "equitable" => StrategyChoice::Sim(Strategy::Equitable),
        "waterfill" => StrategyChoice::Sim(Strategy::StaticWaterfill),
        "capped-waterfill" | "capped" => StrategyChoice::Sim(Strategy::CappedWaterfill),
        "dynamic" => StrategyChoice::Sim(Strategy::DynamicWaterfill),
        "oracle" => StrategyChoice::Oracle,
        _ => return Err(format!("unknown strategy {s:?}")),
    })
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|p| item(p.trim())).collect()
}

/// Inclusive `start..=stop` grid; the end point is kept despite rounding.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Comma list whose items are numbers or inclusive `start:stop:step` ranges.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(parse_f64(x)?),
            [a, b, c] => {
                let (a, b, c) = (parse_f64(a)?, parse_f64(b)?, parse_f64(c)?);
                if !(c > 0.0) || b < a {
                    return Err(format!("bad range {item:?}"));
                }
                out.extend(grid(a, b, c));
            }
            _ => return Err(format!("bad grid item {item:?}")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_keep_their_end_points() {
        let g = grid(0.01, 0.99, 0.01);
        assert_eq!(g.len(), 99);
        assert!((g[98] - 0.99).abs() < 1e-12);
        assert_eq!(parse_grid("1, 3:7:2,10").unwrap(), vec![1.0, 3.0, 5.0, 7.0, 10.0]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn file_then_override() {
        let mut c = ExperimentConfig::defaults(Command::BundleSweep);
        c.apply_text("# sweep\nlinks = 4\nloads = 40:60:10  # mid loads\nstrategies = equitable,dynamic\n")
            .unwrap();
        assert_eq!(c.links, vec![4]);
        assert_eq!(c.loads, vec![40.0, 50.0, 60.0]);
        c.set("loads", "50").unwrap();
        assert_eq!(c.loads, vec![50.0]);
        assert_eq!(c.strategies.len(), 2);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_line_and_key() {
        let mut c = ExperimentConfig::defaults(Command::Model);
        let err = c.apply_text("rho = 0.5\nbogus = 1\n").unwrap_err();
        assert!(err.message().contains("line 2"), "{}", err.message());
        let err = c.set("governor", "sleepy").unwrap_err();
        assert!(err.message().contains("governor"));
    }

    #[test]
    fn cross_field_checks() {
        let mut c = ExperimentConfig::defaults(Command::ShareSweep);
        c.links = vec![3];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Command::DelaySweep);
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Command::Model);
        c.warmup = 20.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(Command::Table);
        c.traces = vec![PathBuf::from("/no/such/trace.csv")];
        assert!(c.validate().is_err());
    }

    #[test]
    fn governors_and_units() {
        let mut c = ExperimentConfig::defaults(Command::Model);
        c.set("governor", "both").unwrap();
        c.set("ts-us", "2.28").unwrap();
        assert_eq!(c.governors, vec![GovernorKind::Frame, GovernorKind::Burst]);
        assert!((c.link_params().unwrap().ts - 2.28e-6).abs() < 1e-18);
        assert_eq!(
            c.governor_spec(GovernorKind::Burst).unwrap(),
            GovernorSpec::Burst { qw: 20, tmax: 100e-6 }
        );
    }
}
