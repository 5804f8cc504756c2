use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eee_bundle_cli::commands::output_path;
use eee_bundle_cli::{execute, CliError, Command, ExperimentConfig, OUT_DIR_ENV};

/// Energy model, allocation and simulation experiments for bundles of Energy Efficient Ethernet links.
#[derive(Parser, Debug)]
#[command(name = "eee-bundle", version)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files when no explicit `--output` is given.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Closed-form T_off(ρ) and E(ρ) on a load grid.
    Model(Keys),
    /// Static allocations and their analytic bundle energy.
    Allocate(Keys),
    /// Two-link energy versus the share of the second link (simulated and analytic).
    ShareSweep(Keys),
    /// Equitable, water-fill and dynamic sharing across bundle sizes and loads.
    BundleSweep(Keys),
    /// Measured delay and energy of the dynamic dispatcher per target delay.
    DelaySweep(Keys),
    /// Per-link rate table for a four-link bundle.
    Table(Keys),
    /// Concavity margin and h″ of every closed form on a load × frame-size grid.
    ValidateConcavity(Keys),
}

/// Every configuration key, settable from the command line. Lists are comma
/// separated; numeric grids also accept inclusive `start:stop:step` ranges.
#[derive(Args, Debug, Default)]
struct Keys {
    /// Link counts, e.g. `2,4,8`.
    #[arg(long)]
    links: Option<String>,
    /// Link capacity in Gb/s.
    #[arg(long)]
    capacity_gbps: Option<String>,
    /// Sleep transition time in µs.
    #[arg(long)]
    ts_us: Option<String>,
    /// Wake transition time in µs.
    #[arg(long)]
    tw_us: Option<String>,
    /// Idle power relative to active power.
    #[arg(long)]
    sigma_off: Option<String>,
    /// frame, burst or both.
    #[arg(long)]
    governor: Option<String>,
    /// Burst governor wake threshold in frames.
    #[arg(long)]
    qw: Option<String>,
    /// Burst governor coalescing timer in µs.
    #[arg(long)]
    tmax_us: Option<String>,
    /// Frame size in bytes.
    #[arg(long)]
    pkt: Option<String>,
    /// Model distribution: poisson, approx or both.
    #[arg(long)]
    dist: Option<String>,
    /// Generated traffic: poisson or pareto.
    #[arg(long)]
    traffic: Option<String>,
    /// Pareto shape (> 2).
    #[arg(long)]
    alpha: Option<String>,
    /// Trace files (`timestamp,size` lines, optionally .gz), comma separated.
    #[arg(long)]
    trace: Option<String>,
    /// Time compression factor applied to traces.
    #[arg(long)]
    scale: Option<String>,
    /// Back-to-back copies of each trace.
    #[arg(long)]
    copies: Option<String>,
    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<String>,
    /// Seconds excluded from accounting at the start of each run; 0 disables.
    #[arg(long)]
    warmup: Option<String>,
    /// Random seeds, e.g. `1:5:1`.
    #[arg(long)]
    seeds: Option<String>,
    /// Loads in percent (of one link for share-sweep, of the bundle otherwise).
    #[arg(long)]
    loads: Option<String>,
    /// Share points per load in share-sweep.
    #[arg(long)]
    share_points: Option<String>,
    /// Largest fraction of the demand placed on the second link in share-sweep.
    #[arg(long)]
    share_max: Option<String>,
    /// equitable, waterfill, capped-waterfill, dynamic, oracle.
    #[arg(long)]
    strategies: Option<String>,
    /// Target delays in µs for delay-sweep.
    #[arg(long)]
    targets_us: Option<String>,
    /// Dynamic dispatcher target delay in µs under the frame governor.
    #[arg(long)]
    expected_delay_us: Option<String>,
    /// Dynamic dispatcher target delay in µs under the burst governor.
    #[arg(long)]
    burst_expected_delay_us: Option<String>,
    /// EWMA gain of the dynamic dispatcher.
    #[arg(long)]
    beta: Option<String>,
    /// EWMA sample: pre (queue delay before the frame) or post.
    #[arg(long)]
    ewma: Option<String>,
    /// Static split: rr (deficit round robin) or random.
    #[arg(long)]
    split: Option<String>,
    /// Per-link utilization cap of capped-waterfill.
    #[arg(long)]
    cap: Option<String>,
    /// Load grid for model and validate-concavity.
    #[arg(long)]
    rho: Option<String>,
    /// Frame sizes in bytes for model and validate-concavity.
    #[arg(long)]
    pkt_sizes: Option<String>,
    /// Bundle rates in Gb/s for allocate and table.
    #[arg(long)]
    demand_gbps: Option<String>,
    /// Output file; `-` or absent writes to standard output unless an output directory is set.
    #[arg(long)]
    output: Option<String>,
}

impl Keys {
    fn pairs(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("links", &self.links),
            ("capacity-gbps", &self.capacity_gbps),
            ("ts-us", &self.ts_us),
            ("tw-us", &self.tw_us),
            ("sigma-off", &self.sigma_off),
            ("governor", &self.governor),
            ("qw", &self.qw),
            ("tmax-us", &self.tmax_us),
            ("pkt", &self.pkt),
            ("dist", &self.dist),
            ("traffic", &self.traffic),
            ("alpha", &self.alpha),
            ("trace", &self.trace),
            ("scale", &self.scale),
            ("copies", &self.copies),
            ("duration", &self.duration),
            ("warmup", &self.warmup),
            ("seeds", &self.seeds),
            ("loads", &self.loads),
            ("share-points", &self.share_points),
            ("share-max", &self.share_max),
            ("strategies", &self.strategies),
            ("targets-us", &self.targets_us),
            ("expected-delay-us", &self.expected_delay_us),
            ("burst-expected-delay-us", &self.burst_expected_delay_us),
            ("beta", &self.beta),
            ("ewma", &self.ewma),
            ("split", &self.split),
            ("cap", &self.cap),
            ("rho", &self.rho),
            ("pkt-sizes", &self.pkt_sizes),
            ("demand-gbps", &self.demand_gbps),
            ("output", &self.output),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

fn split(sub: Sub) -> (Command, Keys) {
    match sub {
        Sub::Model(k) => (Command::Model, k),
        Sub::Allocate(k) => (Command::Allocate, k),
        Sub::ShareSweep(k) => (Command::ShareSweep, k),
        Sub::BundleSweep(k) => (Command::BundleSweep, k),
        Sub::DelaySweep(k) => (Command::DelaySweep, k),
        Sub::Table(k) => (Command::Table, k),
        Sub::ValidateConcavity(k) => (Command::ValidateConcavity, k),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, keys) = split(cli.command);
    let mut cfg = ExperimentConfig::defaults(command);
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in keys.pairs() {
        cfg.set(k, v)?;
    }
    if cfg.output.as_deref() == Some(std::path::Path::new("-")) {
        cfg.output = None;
    }
    let out = execute(&cfg)?;
    match output_path(&cfg, cli.out_dir.as_deref()) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
            }
            fs::write(&path, &out.body).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            std::io::stdout()
                .write_all(out.body.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
        }
    }
    match out.failure {
        Some(msg) => Err(CliError::Runtime(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eee-bundle: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
