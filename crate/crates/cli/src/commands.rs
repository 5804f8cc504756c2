//! One function per subcommand. Each returns its full output in memory so the
//! caller decides where it goes and reruns stay byte-identical.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use eee_bundle::alloc::{brute_force_min, equitable, waterfill, waterfill_capped};
use eee_bundle::bundle_sim::{run_allocation_events, run_bundle_events, static_allocation};
use eee_bundle::model::{
    bundle_energy, concavity_margin, energy_second_derivative_grid, link_energy, select_curve, toff, Derivatives,
    SojournCurve,
};
use eee_bundle::traffic::{load_trace, pareto_arrivals, poisson_arrivals, scale_trace};
use eee_bundle::{
    AllocationVector, BundleSpec, DispatcherConfig, Distribution, FrameEvent, GovernorSpec, SimReport, SimWindow,
    Strategy, ToffCurve, TraceStream, TrafficSpec,
};
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, GovernorKind, StrategyChoice, TrafficKind};
use crate::csvio::{fmt_list, fmt_num, CsvTable, ResultRow};
use crate::error::CliError;

/// Output of a subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub body: String,
    /// Non-fatal problem to report after writing the output, turning the exit code into a runtime failure.
    pub failure: Option<String>,
}

impl CommandOutput {
    fn ok(body: String) -> Self {
        Self { body, failure: None }
    }
}

/// Validates `cfg` and runs its subcommand.
pub fn execute(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    cfg.validate()?;
    match cfg.command {
        Command::Model => cmd_model(cfg).map(|t| CommandOutput::ok(t.to_string())),
        Command::Allocate => cmd_allocate(cfg).map(|t| CommandOutput::ok(t.to_string())),
        Command::ShareSweep => cmd_share_sweep(cfg).map(|t| CommandOutput::ok(t.to_string())),
        Command::BundleSweep => cmd_bundle_sweep(cfg).map(|r| CommandOutput::ok(ResultRow::table(&r).to_string())),
        Command::DelaySweep => cmd_delay_sweep(cfg).map(|r| CommandOutput::ok(ResultRow::table(&r).to_string())),
        Command::Table => cmd_table(cfg).map(|t| CommandOutput::ok(render_table(&t))),
        Command::ValidateConcavity => {
            let (table, failures) = cmd_validate_concavity(cfg)?;
            Ok(CommandOutput {
                body: table.to_string(),
                failure: (failures > 0).then(|| format!("{failures} grid points have a non-positive concavity margin")),
            })
        }
    }
}

fn model_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn dist_name(d: Distribution) -> &'static str {
    match d {
        Distribution::PoissonExact => "poisson",
        Distribution::GeneralApprox => "approx",
    }
}

/// Closed form matching the generated traffic: exact for Poisson, approximate otherwise.
fn model_distribution(cfg: &ExperimentConfig) -> Distribution {
    if cfg.traffic == TrafficKind::Poisson && cfg.traces.is_empty() {
        Distribution::PoissonExact
    } else {
        Distribution::GeneralApprox
    }
}

fn bundle(cfg: &ExperimentConfig, n: usize) -> Result<BundleSpec<f64>, CliError> {
    BundleSpec::uniform(n, cfg.link_params()?)
        .and_then(|b| b.with_max_utilization(cfg.cap))
        .map_err(|e| CliError::Config(e.to_string()))
}

/// `E(ρ)` and `T_off(ρ)` per governor, distribution, frame size and load.
pub fn cmd_model(cfg: &ExperimentConfig) -> Result<CsvTable, CliError> {
    let link = cfg.link_params()?;
    let mut t = CsvTable::new(&["governor", "distribution", "pkt_bytes", "rho", "regime", "toff_s", "energy"]);
    for &g in &cfg.governors {
        let gov = cfg.governor_spec(g)?;
        for &dist in &cfg.distributions {
            for &pkt in &cfg.pkt_sizes {
                for &rho in &cfg.rho {
                    let spec = TrafficSpec::new(link.service_rate(pkt), rho, dist).map_err(model_err)?;
                    let (regime, t_off) = if rho == 0.0 {
                        (if gov.is_burst() { "low" } else { "frame" }, f64::INFINITY)
                    } else {
                        let curve = select_curve(&spec, &gov).map_err(model_err)?;
                        (curve.regime(), toff(&spec, &gov, &link).map_err(model_err)?)
                    };
                    let e = link_energy(&spec, &gov, &link).map_err(model_err)?;
                    t.push(vec![
                        g.name().into(),
                        dist_name(dist).into(),
                        fmt_num(pkt),
                        fmt_num(rho),
                        regime.into(),
                        fmt_num(t_off),
                        fmt_num(e),
                    ]);
                }
            }
        }
    }
    Ok(t)
}

fn allocate(b: &BundleSpec<f64>, choice: StrategyChoice, demand: f64, ctx: Option<(&GovernorSpec<f64>, Distribution, f64)>) -> Result<AllocationVector<f64>, CliError> {
    let r = match choice {
        StrategyChoice::Sim(Strategy::Equitable) => equitable(b, demand),
        StrategyChoice::Sim(Strategy::StaticWaterfill) => waterfill(b, demand),
        StrategyChoice::Sim(Strategy::CappedWaterfill) => waterfill_capped(b, demand),
        StrategyChoice::Sim(Strategy::DynamicWaterfill) => {
            return Err(CliError::Config("dynamic has no static allocation".into()))
        }
        StrategyChoice::Oracle => {
            let (gov, dist, pkt) = ctx.expect("oracle needs a cost model");
            let step = b.links()[b.order()[0]].capacity_bps / 100.0;
            brute_force_min(b, demand, gov, dist, pkt, step)
        }
    };
    r.map_err(model_err)
}

/// Static allocations and their analytic bundle energy.
pub fn cmd_allocate(cfg: &ExperimentConfig) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(&[
        "links",
        "governor",
        "distribution",
        "strategy",
        "demand_gbps",
        "rates_gbps",
        "loads",
        "energy",
    ]);
    let pkt = cfg.pkt as f64;
    for &n in &cfg.links {
        let b = bundle(cfg, n)?;
        for &g in &cfg.governors {
            let gov = cfg.governor_spec(g)?;
            for &dist in &cfg.distributions {
                for &choice in &cfg.strategies {
                    for &demand_gbps in &cfg.demand_gbps {
                        let alloc = allocate(&b, choice, demand_gbps * 1e9, Some((&gov, dist, pkt)))?;
                        let e = bundle_energy(&alloc.rates, b.links(), &gov, dist, pkt).map_err(model_err)?;
                        let gbps: Vec<f64> = alloc.rates.iter().map(|x| x / 1e9).collect();
                        t.push(vec![
                            n.to_string(),
                            g.name().into(),
                            dist_name(dist).into(),
                            choice.name().into(),
                            fmt_num(demand_gbps),
                            fmt_list(&gbps),
                            fmt_list(&alloc.loads(&b)),
                            fmt_num(e.normalized),
                        ]);
                    }
                }
            }
        }
    }
    Ok(t)
}

type Events = Box<dyn Iterator<Item = FrameEvent> + Send>;

/// Generated arrivals at `rate` bits/second over the configured duration.
fn synthetic(cfg: &ExperimentConfig, rate: f64, seed: u64) -> Result<Events, CliError> {
    if rate <= 0.0 {
        return Ok(Box::new(std::iter::empty()));
    }
    Ok(match cfg.traffic {
        TrafficKind::Poisson => Box::new(poisson_arrivals(rate, cfg.pkt, cfg.duration, seed).map_err(model_err)?),
        TrafficKind::Pareto => {
            Box::new(pareto_arrivals(rate, cfg.pkt, cfg.alpha, cfg.duration, seed).map_err(model_err)?)
        }
    })
}

fn window(cfg: &ExperimentConfig, duration: f64) -> Result<SimWindow, CliError> {
    SimWindow::new(cfg.warmup, duration).map_err(|e| CliError::Config(format!("{e} (duration {duration} s)")))
}

fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Second-link rates visited for an aggregate demand `x` on a two-link bundle.
pub fn share_points(cfg: &ExperimentConfig, capacity: f64, x: f64) -> Vec<f64> {
    let lo = (x - capacity).max(0.0);
    let hi = (cfg.share_max * x).min(capacity).max(lo);
    if cfg.share_points == 1 || hi <= lo {
        return vec![lo];
    }
    let k = (cfg.share_points - 1) as f64;
    (0..cfg.share_points).map(|i| lo + (hi - lo) * i as f64 / k).collect()
}

/// Two-link energy versus the second link's share, simulated over seeds next to the model.
pub fn cmd_share_sweep(cfg: &ExperimentConfig) -> Result<CsvTable, CliError> {
    let link = cfg.link_params()?;
    let b = bundle(cfg, 2)?;
    let c = link.capacity_bps;
    let w = window(cfg, cfg.duration)?;
    let dist = model_distribution(cfg);
    let pkt = cfg.pkt as f64;

    struct Point {
        gov_kind: GovernorKind,
        gov: GovernorSpec<f64>,
        load_pct: f64,
        alloc: AllocationVector<f64>,
    }
    let mut points = Vec::new();
    for &g in &cfg.governors {
        let gov = cfg.governor_spec(g)?;
        for &load_pct in &cfg.loads {
            let x = load_pct / 100.0 * c;
            if x > 2.0 * c {
                return Err(CliError::Config(format!("load {load_pct}% exceeds the bundle")));
            }
            for x2 in share_points(cfg, c, x) {
                let alloc = AllocationVector {
                    rates: vec![x - x2, x2],
                    demand: x,
                };
                points.push(Point {
                    gov_kind: g,
                    gov,
                    load_pct,
                    alloc,
                });
            }
        }
    }
    let cells: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results: Vec<SimReport> = cells
        .par_iter()
        .map(|&(p, seed)| {
            let pt = &points[p];
            let events = synthetic(cfg, pt.alloc.demand, seed)?;
            run_allocation_events(events, &pt.alloc, &b, &pt.gov, cfg.split_mode(seed), w).map_err(model_err)
        })
        .collect::<Result<_, _>>()?;

    let mut t = CsvTable::new(&[
        "governor",
        "load_pct",
        "x1_gbps",
        "x2_gbps",
        "share2",
        "seeds",
        "energy_mean",
        "energy_stdev",
        "energy_model",
        "delay_mean_s",
    ]);
    let per_point = cfg.seeds.len();
    for (p, pt) in points.iter().enumerate() {
        let reports = &results[p * per_point..(p + 1) * per_point];
        let energies: Vec<f64> = reports.iter().map(|r| r.bundle_energy_normalized).collect();
        let delays: Vec<f64> = reports.iter().map(|r| r.mean_delay).collect();
        let (mean, sd) = mean_stdev(&energies);
        let model = bundle_energy(&pt.alloc.rates, b.links(), &pt.gov, dist, pkt).map_err(model_err)?;
        let x = pt.alloc.demand;
        t.push(vec![
            pt.gov_kind.name().into(),
            fmt_num(pt.load_pct),
            fmt_num(pt.alloc.rates[0] / 1e9),
            fmt_num(pt.alloc.rates[1] / 1e9),
            fmt_num(if x > 0.0 { pt.alloc.rates[1] / x } else { 0.0 }),
            per_point.to_string(),
            fmt_num(mean),
            fmt_num(sd),
            fmt_num(model.normalized),
            fmt_num(mean_stdev(&delays).0),
        ]);
    }
    Ok(t)
}

/// Offered traffic of one sweep point: generated at a load, or a trace file.
#[derive(Clone)]
enum Workload {
    Synthetic { load_pct: f64 },
    Trace { name: String, stream: Arc<TraceStream> },
}

fn workloads(cfg: &ExperimentConfig) -> Result<Vec<Workload>, CliError> {
    if cfg.traces.is_empty() {
        return Ok(cfg.loads.iter().map(|&load_pct| Workload::Synthetic { load_pct }).collect());
    }
    cfg.traces
        .iter()
        .map(|p| {
            let s = load_trace(p).map_err(model_err)?;
            let s = if cfg.scale > 1.0 || cfg.copies > 1 {
                scale_trace(&s, cfg.scale, cfg.copies).map_err(model_err)?
            } else {
                s
            };
            Ok(Workload::Trace {
                name: trace_name(p),
                stream: Arc::new(s),
            })
        })
        .collect()
}

fn trace_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Workload {
    fn label(&self) -> String {
        match self {
            Workload::Synthetic { .. } => "synthetic".into(),
            Workload::Trace { name, .. } => name.clone(),
        }
    }

    /// Offered rate, events and accounting window for one run.
    fn realize(&self, cfg: &ExperimentConfig, b: &BundleSpec<f64>, seed: u64) -> Result<(f64, Events, SimWindow), CliError> {
        match self {
            Workload::Synthetic { load_pct } => {
                let rate = load_pct / 100.0 * b.total_capacity();
                Ok((rate, synthetic(cfg, rate, seed)?, window(cfg, cfg.duration)?))
            }
            Workload::Trace { stream, .. } => {
                let rate = stream.mean_rate().min(b.total_capacity());
                let s = Arc::clone(stream);
                let events = (0..s.len()).map(move |i| s.events()[i]);
                Ok((rate, Box::new(events), window(cfg, stream.duration())?))
            }
        }
    }
}

fn dispatcher(cfg: &ExperimentConfig, strategy: Strategy, kind: GovernorKind, target: Option<f64>, seed: u64) -> DispatcherConfig {
    let mut d = DispatcherConfig::new(strategy).with_beta(cfg.beta).with_split(cfg.split_mode(seed));
    d.ewma_post_enqueue = cfg.ewma_post_enqueue;
    // a zero target means the limit d_e → 0⁺: any non-empty queue is "too long"
    d.expected_delay = target.unwrap_or_else(|| cfg.expected_delay(kind)).max(f64::MIN_POSITIVE);
    d
}

fn result_row(
    cfg: &ExperimentConfig,
    experiment: &str,
    kind: GovernorKind,
    gov: &GovernorSpec<f64>,
    b: &BundleSpec<f64>,
    offered: f64,
    seed: u64,
    report: &SimReport,
    target_s: f64,
) -> Result<ResultRow, CliError> {
    let caps: Vec<f64> = b.links().iter().map(|l| l.capacity_bps).collect();
    let carried: Vec<f64> = report.per_link_carried.iter().zip(&caps).map(|(x, c)| x.min(*c)).collect();
    let model = bundle_energy(&carried, b.links(), gov, model_distribution(cfg), cfg.pkt as f64).map_err(model_err)?;
    let strategy = report.config_echo.map(|c| c.strategy.name()).unwrap_or("allocation");
    Ok(ResultRow {
        experiment: experiment.into(),
        governor: kind.name().into(),
        strategy: strategy.into(),
        links: b.len(),
        seed,
        load_pct: offered / b.total_capacity() * 100.0,
        target_s,
        per_link_loads: carried.iter().zip(&caps).map(|(x, c)| x / c).collect(),
        per_link_energy: report.per_link_energy.clone(),
        bundle_energy: report.bundle_energy_normalized,
        model_energy: model.normalized,
        mean_delay_s: report.mean_delay,
    })
}

/// Equitable versus static versus dynamic sharing over bundle sizes and loads.
pub fn cmd_bundle_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let loads = workloads(cfg)?;
    let mut cells = Vec::new();
    for &g in &cfg.governors {
        for &n in &cfg.links {
            for (wi, _) in loads.iter().enumerate() {
                for &s in &cfg.strategies {
                    for &seed in &cfg.seeds {
                        cells.push((g, n, wi, s, seed));
                    }
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(g, n, wi, choice, seed)| {
            let StrategyChoice::Sim(strategy) = choice else {
                return Err(CliError::Config("oracle cannot be simulated".into()));
            };
            let b = bundle(cfg, n)?;
            let gov = cfg.governor_spec(g)?;
            let (rate, events, w) = loads[wi].realize(cfg, &b, seed)?;
            let d = dispatcher(cfg, strategy, g, None, seed);
            let report = run_bundle_events(events, rate, &b, &gov, &d, w).map_err(model_err)?;
            let target = if strategy.is_static() { 0.0 } else { d.expected_delay };
            let label = format!("bundle-sweep/{}", loads[wi].label());
            result_row(cfg, &label, g, &gov, &b, rate, seed, &report, target)
        })
        .collect()
}

/// Measured delay and energy of the dynamic dispatcher per target delay.
pub fn cmd_delay_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let loads = workloads(cfg)?;
    let mut cells = Vec::new();
    for &g in &cfg.governors {
        for &n in &cfg.links {
            for (wi, _) in loads.iter().enumerate() {
                for &target_us in &cfg.targets_us {
                    for &seed in &cfg.seeds {
                        cells.push((g, n, wi, target_us, seed));
                    }
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(g, n, wi, target_us, seed)| {
            let b = bundle(cfg, n)?;
            let gov = cfg.governor_spec(g)?;
            let (rate, events, w) = loads[wi].realize(cfg, &b, seed)?;
            let d = dispatcher(cfg, Strategy::DynamicWaterfill, g, Some(target_us / 1e6), seed);
            let report = run_bundle_events(events, rate, &b, &gov, &d, w).map_err(model_err)?;
            let label = format!("delay-sweep/{}", loads[wi].label());
            result_row(cfg, &label, g, &gov, &b, rate, seed, &report, target_us / 1e6)
        })
        .collect()
}

/// One line of the per-link rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub bundle_gbps: f64,
    pub strategy: String,
    pub per_link_gbps: Vec<f64>,
}

/// Per-link rates for each bundle rate: static rows by arithmetic, dynamic rows by simulation.
pub fn cmd_table(cfg: &ExperimentConfig) -> Result<Vec<TableRow>, CliError> {
    let b = bundle(cfg, 4)?;
    let seed = cfg.seeds[0];
    let loads: Vec<Workload> = if cfg.traces.is_empty() {
        cfg.demand_gbps
            .iter()
            .map(|&r| Workload::Synthetic {
                load_pct: r * 1e9 / b.total_capacity() * 100.0,
            })
            .collect()
    } else {
        workloads(cfg)?
    };
    let mut jobs = Vec::new();
    for (wi, _) in loads.iter().enumerate() {
        for &g in &cfg.governors {
            jobs.push((wi, g));
        }
    }
    let dynamic: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(wi, g)| {
            let gov = cfg.governor_spec(g)?;
            let (rate, events, w) = loads[wi].realize(cfg, &b, seed)?;
            let d = dispatcher(cfg, Strategy::DynamicWaterfill, g, None, seed);
            let r = run_bundle_events(events, rate, &b, &gov, &d, w).map_err(model_err)?;
            Ok(r.per_link_carried.iter().map(|x| x / 1e9).collect())
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows = Vec::new();
    for (wi, load) in loads.iter().enumerate() {
        let rate = match load {
            Workload::Synthetic { load_pct } => load_pct / 100.0 * b.total_capacity(),
            Workload::Trace { stream, .. } => stream.mean_rate().min(b.total_capacity()),
        };
        let gbps = |a: AllocationVector<f64>| a.rates.iter().map(|x| x / 1e9).collect::<Vec<_>>();
        rows.push(TableRow {
            bundle_gbps: rate / 1e9,
            strategy: "Equit.".into(),
            per_link_gbps: gbps(static_allocation(&b, Strategy::Equitable, rate).map_err(model_err)?),
        });
        rows.push(TableRow {
            bundle_gbps: rate / 1e9,
            strategy: "Naive Water-fill".into(),
            per_link_gbps: gbps(static_allocation(&b, Strategy::CappedWaterfill, rate).map_err(model_err)?),
        });
        for (gi, &g) in cfg.governors.iter().enumerate() {
            let name = match g {
                GovernorKind::Frame => "Dyn. Frame",
                GovernorKind::Burst => "Dyn. Burst",
            };
            rows.push(TableRow {
                bundle_gbps: rate / 1e9,
                strategy: name.into(),
                per_link_gbps: dynamic[wi * cfg.governors.len() + gi].clone(),
            });
        }
    }
    Ok(rows)
}

/// Fixed-width text rendering, two decimals, bundle rate on the first row of each group.
pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:>8}  {:<17}{:>9}{:>9}{:>9}{:>9}\n",
        "Bundle", "Strategy", "Link #1", "Link #2", "Link #3", "Link #4"
    );
    let mut last = f64::NAN;
    for r in rows {
        let bundle = if r.bundle_gbps == last {
            String::new()
        } else {
            format!("{:.2}", r.bundle_gbps)
        };
        last = r.bundle_gbps;
        out += &format!("{bundle:>8}  {:<17}", r.strategy);
        for x in &r.per_link_gbps {
            out += &format!("{x:>9.2}");
        }
        out.push('\n');
    }
    out
}

/// Concavity margin and `h″` for every closed form on the grid; also returns the count of failing points.
pub fn cmd_validate_concavity(cfg: &ExperimentConfig) -> Result<(CsvTable, usize), CliError> {
    let link = cfg.link_params()?;
    let gov = cfg.governor_spec(GovernorKind::Burst)?;
    let b = link.ts + link.tw;
    let mut t = CsvTable::new(&["curve", "pkt_bytes", "rho", "margin", "h_second", "ok"]);
    let mut failures = 0;
    for curve in ToffCurve::ALL {
        let h2 = energy_second_derivative_grid(curve, &gov, &link, &cfg.pkt_sizes, &cfg.rho).map_err(model_err)?;
        for (pi, &pkt) in cfg.pkt_sizes.iter().enumerate() {
            let sc = SojournCurve::new(curve, &link, &gov, pkt).map_err(model_err)?;
            for (ri, &rho) in cfg.rho.iter().enumerate() {
                let m = concavity_margin(&sc, b, rho, Derivatives::Analytic).map_err(model_err)?;
                let ok = m > 0.0;
                failures += usize::from(!ok);
                t.push(vec![
                    curve.name().into(),
                    fmt_num(pkt),
                    fmt_num(rho),
                    fmt_num(m),
                    fmt_num(h2[pi][ri]),
                    ok.to_string(),
                ]);
            }
        }
    }
    Ok((t, failures))
}

/// Where a command's output goes: `output` (relative to `out_dir` if given),
/// else `out_dir/<command>.<ext>`, else standard output (`None`).
pub fn output_path(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Option<PathBuf> {
    match (&cfg.output, out_dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join(format!("{}.{}", cfg.command.name(), cfg.command.extension()))),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn share_points_span_feasible_range() {
        let cfg = ExperimentConfig::defaults(Command::ShareSweep);
        let pts = share_points(&cfg, 10e9, 17.5e9);
        assert_eq!(pts.len(), 5);
        assert!((pts[0] - 7.5e9).abs() < 1.0);
        assert!((pts[4] - 8.75e9).abs() < 1.0);
        let pts = share_points(&cfg, 10e9, 2.5e9);
        assert_eq!(pts[0], 0.0);
        assert!((pts[4] - 1.25e9).abs() < 1.0);
    }

    #[test]
    fn mean_and_sample_stdev() {
        let (m, s) = mean_stdev(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_stdev(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn output_resolution() {
        let mut cfg = ExperimentConfig::defaults(Command::Table);
        assert_eq!(output_path(&cfg, None), None);
        assert_eq!(output_path(&cfg, Some(Path::new("/o"))), Some(PathBuf::from("/o/table.txt")));
        cfg.output = Some(PathBuf::from("t.txt"));
        assert_eq!(output_path(&cfg, Some(Path::new("/o"))), Some(PathBuf::from("/o/t.txt")));
        cfg.output = Some(PathBuf::from("/abs/t.txt"));
        assert_eq!(output_path(&cfg, Some(Path::new("/o"))), Some(PathBuf::from("/abs/t.txt")));
    }

    #[test]
    fn table_rendering_groups_by_bundle() {
        let rows = vec![
            TableRow {
                bundle_gbps: 12.6,
                strategy: "Equit.".into(),
                per_link_gbps: vec![3.15; 4],
            },
            TableRow {
                bundle_gbps: 12.6,
                strategy: "Naive Water-fill".into(),
                per_link_gbps: vec![9.0, 3.6, 0.0, 0.0],
            },
        ];
        let text = render_table(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].trim_start().starts_with("12.60"));
        assert!(lines[2].trim_start().starts_with("Naive"));
        assert!(lines[2].contains("3.60"));
    }
}
