//! `uavqos`: run episodes, train policies and reproduce the experiment
//! sweeps from the command line.
//!
//! Exit codes: 0 on success, 1 on a configuration or I/O error, 2 when an
//! infeasible slot is hit in `--on-infeasible fail` mode.

mod bench;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uavqos::harness::export::{
    self, write_rows, AllocatorPoint, CurvePoint, SummaryRow, ALLOCATOR_HEADER, CURVE_HEADER, GRID_HEADER,
    SUMMARY_HEADER, TIME_HEADER,
};
use uavqos::harness::{
    compare_allocators, load_scenario, run_episode, sweep_altitude_speed, sweep_time_series, OnInfeasible,
    PolicyChoice, ScenarioConfig, TimeVariable,
};
use uavqos::rl::{checkpoint, train_with, BaselineKind, PolicyParameters};
use uavqos::Error;

#[derive(Parser, Debug)]
#[command(name = "uavqos", version, about = "UAV trajectory and QoS-aware allocation simulator")]
struct Cli {
    /// Scenario file (TOML). Overrides --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, global = true, default_value = "paper-s4")]
    preset: String,
    /// Master seed; defaults to the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "UAVQOS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run evaluation episodes and write one trace per episode plus a summary.
    Simulate(SimulateArgs),
    /// Train a PPO policy and write its checkpoint and training curve.
    Train(TrainArgs),
    /// Mean throughput over an altitude x speed grid.
    SweepHs(SweepHsArgs),
    /// Heuristic versus dual-ascent allocation under several fronthaul caps.
    CompareAlloc(CompareArgs),
    /// Throughput versus time for several altitudes or user counts.
    SweepTs(SweepTsArgs),
    /// Run all allocators on slot instances read from a TOML file.
    AllocBench(bench::BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    StationaryCentroid,
    FollowCentroid,
    Trained,
}

#[derive(Args, Debug)]
struct PolicyOpts {
    /// Who steers the UAV.
    #[arg(long, value_enum, default_value = "follow-centroid")]
    policy: PolicyArg,
    /// Checkpoint for `--policy trained`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InfeasibleArg {
    Terminate,
    Continue,
    Fail,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    policy: PolicyOpts,
    /// Episodes; episode `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    #[arg(long, value_enum, default_value = "terminate")]
    on_infeasible: InfeasibleArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Override the scenario's iteration count.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepHsArgs {
    #[command(flatten)]
    policy: PolicyOpts,
    #[arg(long, value_delimiter = ',', default_values_t = [50.0, 100.0, 150.0, 300.0, 1000.0])]
    altitudes: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 15.0, 20.0, 25.0, 30.0])]
    speeds: Vec<f64>,
    /// Episodes per cell.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    policy: PolicyOpts,
    /// Fronthaul capacities, bit/s.
    #[arg(long, value_delimiter = ',', default_values_t = [500e6, 200e6])]
    capacities: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

#[derive(Args, Debug)]
struct SweepTsArgs {
    #[command(flatten)]
    policy: PolicyOpts,
    /// Altitudes, m.
    #[arg(long, value_delimiter = ',', conflicts_with = "users")]
    altitudes: Option<Vec<f64>>,
    /// User counts.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
}

fn scenario(cli: &Cli) -> uavqos::Result<ScenarioConfig> {
    match &cli.config {
        Some(path) => load_scenario(path),
        None => ScenarioConfig::preset(&cli.preset),
    }
}

fn seed_list(base: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| base.wrapping_add(i)).collect()
}

fn load_policy(opts: &PolicyOpts, cfg: &ScenarioConfig) -> uavqos::Result<Option<PolicyParameters>> {
    match (opts.policy, &opts.checkpoint) {
        (PolicyArg::Trained, Some(path)) => checkpoint::load(path, Some(&cfg.fingerprint())).map(Some),
        (PolicyArg::Trained, None) => Err(Error::Config {
            field: "checkpoint".into(),
            reason: "--policy trained needs --checkpoint".into(),
        }),
        _ => Ok(None),
    }
}

fn choice<'a>(opts: &PolicyOpts, trained: Option<&'a PolicyParameters>) -> PolicyChoice<'a> {
    match (opts.policy, trained) {
        (PolicyArg::StationaryCentroid, _) => PolicyChoice::Baseline(BaselineKind::StationaryCentroid),
        (PolicyArg::FollowCentroid, _) => PolicyChoice::Baseline(BaselineKind::FollowCentroid),
        (PolicyArg::Trained, Some(p)) => PolicyChoice::Trained(p),
        (PolicyArg::Trained, None) => unreachable!("trained policy is loaded before dispatch"),
    }
}

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn simulate(cli: &Cli, cfg: &ScenarioConfig, seed: u64, args: &SimulateArgs) -> uavqos::Result<()> {
    let trained = load_policy(&args.policy, cfg)?;
    let policy = choice(&args.policy, trained.as_ref());
    let mode = match args.on_infeasible {
        InfeasibleArg::Terminate => OnInfeasible::Terminate,
        InfeasibleArg::Continue => OnInfeasible::Continue,
        InfeasibleArg::Fail => OnInfeasible::Fail,
    };
    let mut summaries = Vec::new();
    for s in seed_list(seed, args.episodes) {
        let (trace, metrics) = run_episode(cfg, policy, s, mode)?;
        export::write_trace(&out_path(&cli.out_dir, &format!("trace_{s}.csv")), &trace, &cfg.allocation)?;
        eprintln!(
            "seed {s}: {} slots, mean sum rate {:.3} Mbit/s, Jain {:.3}, {} infeasible",
            metrics.episode_length,
            metrics.mean_sum_rate / 1e6,
            metrics.jain_index,
            metrics.infeasible_slots
        );
        summaries.push(SummaryRow::new(policy.label(), s, &metrics));
    }
    write_rows(&out_path(&cli.out_dir, "summary.csv"), &summaries, SUMMARY_HEADER)
}

fn train(cli: &Cli, cfg: &ScenarioConfig, seed: u64, args: &TrainArgs) -> uavqos::Result<()> {
    // Fingerprint the scenario as given, so the checkpoint loads against it.
    let fp = cfg.fingerprint();
    let mut cfg = cfg.clone();
    if let Some(m) = args.iterations {
        cfg.ppo.iterations = m;
    }
    cfg.validate()?;
    let total = cfg.ppo.iterations;
    let (policy, report) = train_with(&cfg, seed, |m, r| {
        if (m + 1) % 10 == 0 || m + 1 == total {
            eprintln!("iteration {}/{total}: mean episode reward {r:.2}", m + 1);
        }
    })?;
    for e in &report.events {
        eprintln!("{e}");
    }
    let curve: Vec<CurvePoint> = report
        .curve
        .iter()
        .zip(&report.lengths)
        .enumerate()
        .map(|(i, (&r, &l))| CurvePoint { iteration: i + 1, mean_reward: r, mean_length: l })
        .collect();
    write_rows(&out_path(&cli.out_dir, "curve.csv"), &curve, CURVE_HEADER)?;
    checkpoint::save(&out_path(&cli.out_dir, "policy.ckpt"), &policy, &fp)
}

fn sweep_hs(cli: &Cli, cfg: &ScenarioConfig, seed: u64, args: &SweepHsArgs) -> uavqos::Result<()> {
    let trained = load_policy(&args.policy, cfg)?;
    let grid = sweep_altitude_speed(
        cfg,
        &args.altitudes,
        &args.speeds,
        &seed_list(seed, args.seeds),
        choice(&args.policy, trained.as_ref()),
    )?;
    for c in &grid {
        eprintln!("H = {:>6} m, v_max = {:>4} m/s: {:.3} Mbit/s", c.altitude, c.v_max, c.mean_throughput / 1e6);
    }
    write_rows(&out_path(&cli.out_dir, "grid.csv"), &grid, GRID_HEADER)
}

fn compare(cli: &Cli, cfg: &ScenarioConfig, seed: u64, args: &CompareArgs) -> uavqos::Result<()> {
    let trained = load_policy(&args.policy, cfg)?;
    let cmp = compare_allocators(
        cfg,
        &args.capacities,
        &seed_list(seed, args.seeds),
        choice(&args.policy, trained.as_ref()),
    )?;
    #[derive(serde::Serialize)]
    struct RunRow<'a> {
        c_fronthaul: f64,
        allocator: &'a str,
        seed: u64,
        infeasible_slots: usize,
        relaxed_slots: usize,
        mean_sum_rate: f64,
    }
    let runs: Vec<RunRow> = cmp
        .runs
        .iter()
        .map(|r| RunRow {
            c_fronthaul: r.c_fronthaul,
            allocator: r.allocator.as_str(),
            seed: r.seed,
            infeasible_slots: r.infeasible_slots,
            relaxed_slots: r.relaxed_slots,
            mean_sum_rate: r.trace.rows.iter().map(|x| x.sum_rate).sum::<f64>() / r.trace.rows.len().max(1) as f64,
        })
        .collect();
    for r in &runs {
        eprintln!(
            "C_f = {:>5} Mbit/s, {:<11} seed {}: {:.3} Mbit/s, {} infeasible, {} relaxed",
            r.c_fronthaul / 1e6,
            r.allocator,
            r.seed,
            r.mean_sum_rate / 1e6,
            r.infeasible_slots,
            r.relaxed_slots
        );
    }
    write_rows::<AllocatorPoint>(&out_path(&cli.out_dir, "alloc_series.csv"), &cmp.series, ALLOCATOR_HEADER)?;
    write_rows(
        &out_path(&cli.out_dir, "alloc_runs.csv"),
        &runs,
        &["c_fronthaul", "allocator", "seed", "infeasible_slots", "relaxed_slots", "mean_sum_rate"],
    )
}

fn sweep_ts(cli: &Cli, cfg: &ScenarioConfig, seed: u64, args: &SweepTsArgs) -> uavqos::Result<()> {
    let trained = load_policy(&args.policy, cfg)?;
    let (variable, values) = match (&args.altitudes, &args.users) {
        (_, Some(ks)) => (TimeVariable::Users, ks.iter().map(|&k| k as f64).collect()),
        (Some(hs), None) => (TimeVariable::Altitude, hs.clone()),
        (None, None) => (TimeVariable::Altitude, vec![50.0, 100.0, 150.0]),
    };
    let points = sweep_time_series(
        cfg,
        variable,
        &values,
        &seed_list(seed, args.seeds),
        choice(&args.policy, trained.as_ref()),
    )?;
    write_rows(&out_path(&cli.out_dir, "time_series.csv"), &points, TIME_HEADER)
}

fn run(cli: &Cli) -> uavqos::Result<()> {
    let cfg = scenario(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Simulate(a) => simulate(cli, &cfg, seed, a),
        Command::Train(a) => train(cli, &cfg, seed, a),
        Command::SweepHs(a) => sweep_hs(cli, &cfg, seed, a),
        Command::CompareAlloc(a) => compare(cli, &cfg, seed, a),
        Command::SweepTs(a) => sweep_ts(cli, &cfg, seed, a),
        Command::AllocBench(a) => bench::run(&cfg, &cli.out_dir, a),
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Infeasible { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
