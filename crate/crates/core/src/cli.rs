//! The `rebins` command line.
//!
//! Exit codes: 0 on success, 2 for invalid flags, configs or input files, 3
//! for failures during simulation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adversary::FaultSpec;
use crate::baselines::{coupon_collector_mean, single_ball_cover_time};
use crate::error::{Error, Result};
use crate::experiments::{
    derive_seed, estimate_whp, presets, run_experiment, run_repetition, scaling_fit, DurationStats,
    ExperimentSpec, MRule, Quantiles, RunSummary, SweepResult, TopologySpec,
};
use crate::expr::NExpr;
use crate::metrics::{LegitimacyRule, Rounds, RuleForm};
use crate::output;
use crate::process::{Placement, ProcessKind, Strategy};
use crate::rng::Streams;

/// Environment variable read when `--workers` is absent.
pub const WORKERS_ENV: &str = "REBINS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "rebins", version, about = "Repeated balls-into-bins simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single simulation and write its per-round record.
    Simulate(SimulateArgs),
    /// Run every experiment of a config file or preset.
    Sweep(SweepArgs),
    /// Run a reference process (memoryless or dominating).
    Baseline(BaselineArgs),
    /// Estimate the single-ball cover time of a graph.
    Cover(CoverArgs),
    /// List the shipped presets, or print one.
    Presets(PresetsArgs),
    /// Summarize a results CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// complete, ring, regular:D or file:PATH
    #[arg(long, default_value = "complete")]
    pub topology: TopologySpec,
    /// Number of nodes
    #[arg(long)]
    pub n: usize,
    /// Ball count, as an integer or an expression in n
    #[arg(long, default_value = "n")]
    pub m: NExpr,
    /// Queue discipline: fifo, lifo or random
    #[arg(long, default_value = "fifo")]
    pub strategy: Strategy,
    /// spread, point:IDX, random, counts:A,B,... or file:PATH
    #[arg(long, default_value = "spread")]
    pub placement: Placement,
    /// Round budget: c, cn, cnlogn or cn^2
    #[arg(long, default_value = "n")]
    pub rounds: NExpr,
    /// Legitimacy threshold constant
    #[arg(long, default_value_t = 4.0)]
    pub alpha: f64,
    /// Legitimacy threshold form: balanced, scaled or additive
    #[arg(long, default_value = "balanced")]
    pub rule: RuleForm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Track individual balls (needed for progress and cover time)
    #[arg(long)]
    pub trace: bool,
    /// TRIGGER/POLICY, e.g. periodic:8n/point:0
    #[arg(long)]
    pub faults: Option<FaultSpec>,
    /// Keep every k-th round (default: about 10^4 samples per run)
    #[arg(long)]
    pub stride: Option<u64>,
    #[arg(long, default_value = "rebins-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub flags: RunFlags,
    /// Process variant: base, dominating, memoryless or single_ball
    #[arg(long, default_value = "base")]
    pub process: ProcessKind,
    /// Stop as soon as every ball has visited every node (needs --trace)
    #[arg(long)]
    pub stop_when_covered: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineKind {
    Memoryless,
    Dominating,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    pub kind: BaselineKind,
    #[command(flatten)]
    pub flags: RunFlags,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "preset"]))]
pub struct SweepArgs {
    /// Experiment config file
    pub config: Option<PathBuf>,
    /// Run a shipped preset instead of a config file
    #[arg(long)]
    pub preset: Option<String>,
    /// Worker threads (default: $REBINS_WORKERS, else all cores)
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "rebins-out")]
    pub out: PathBuf,
    /// Rerun experiments already present in the results file
    #[arg(long)]
    pub fresh: bool,
    /// Also write every run's per-round samples
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[arg(long, default_value = "complete")]
    pub topology: TopologySpec,
    /// Number of nodes
    #[arg(long)]
    pub n: usize,
    /// Node the ball starts on
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Independent walks to average
    #[arg(long, default_value_t = 1000)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PresetsArgs {
    /// Print this preset's config
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub results: PathBuf,
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                3
            }
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let mut spec = flags_spec("simulate", &args.flags)?;
            spec.process = args.process;
            spec.stop_when_covered = args.stop_when_covered;
            simulate(spec, &args.flags)
        }
        Command::Baseline(args) => {
            let mut spec = flags_spec("baseline", &args.flags)?;
            spec.process = match args.kind {
                BaselineKind::Memoryless => ProcessKind::Memoryless,
                BaselineKind::Dominating => ProcessKind::Dominating,
            };
            simulate(spec, &args.flags)
        }
        Command::Sweep(args) => sweep(&args),
        Command::Cover(args) => cover(&args),
        Command::Presets(args) => {
            match args.name {
                Some(name) => {
                    presets::load(&name)?;
                    print!("{}", presets::find(&name).expect("loaded above").source);
                }
                None => {
                    for p in presets::PRESETS {
                        println!("{:<18} {}", p.name, p.summary);
                    }
                }
            }
            Ok(())
        }
        Command::Report(args) => {
            print!("{}", report(&output::read_results(&args.results)?));
            Ok(())
        }
    }
}

fn flags_spec(id: &str, flags: &RunFlags) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(id, vec![flags.n], flags.rounds);
    spec.topology = flags.topology.clone();
    spec.m_rule = MRule::Explicit(vec![flags.m.eval(flags.n)]);
    spec.strategy = flags.strategy;
    spec.placement = flags.placement.clone();
    spec.rule = LegitimacyRule::new(flags.alpha, flags.rule)?;
    spec.seed = flags.seed;
    spec.trace = flags.trace;
    spec.faults = flags.faults.clone();
    spec.stride = flags.stride;
    Ok(spec)
}

fn announce(spec: &ExperimentSpec) {
    eprintln!("rebins {}", env!("CARGO_PKG_VERSION"));
    eprint!("{}", spec.resolved());
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn simulate(spec: ExperimentSpec, flags: &RunFlags) -> Result<()> {
    if spec.process == ProcessKind::SingleBall {
        return Err(Error::Config(
            "use `rebins cover` for the single-ball walk".into(),
        ));
    }
    spec.validate()?;
    announce(&spec);
    let n = flags.n;
    let m = spec.m_rule.values(n)[0];
    let graph = spec.topology.build(n, flags.seed)?;
    let outcome = run_repetition(&spec, &graph, m, flags.seed, 0)?;
    let record = outcome
        .record
        .expect("multi-ball processes produce a record");

    create_dir(&flags.out)?;
    output::write_samples_jsonl(&record, File::create(flags.out.join("samples.jsonl"))?)?;
    output::write_samples_csv(&record, File::create(flags.out.join("samples.csv"))?)?;
    output::write_results(
        File::create(flags.out.join("results.csv"))?,
        [&outcome.summary],
    )?;
    let s = &outcome.summary;
    println!(
        "rounds={} max_load={} convergence={} stability={} cover={}",
        record.rounds_run,
        record.max_load_overall,
        show(s.convergence()),
        show(s.stability()),
        show(s.cover())
    );
    Ok(())
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|w| w.max(1))
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let specs = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            crate::experiments::parse_config(&text)?
        }
        (None, Some(name)) => presets::load(name)?,
        (None, None) => unreachable!("clap requires a config or a preset"),
    };
    let workers = workers(args.workers)?;
    create_dir(&args.out)?;
    let results_path = args.out.join("results.csv");
    if args.fresh && results_path.exists() {
        fs::remove_file(&results_path)?;
    }
    let done = output::completed_ids(&results_path)?;
    for spec in &specs {
        if done.contains(&spec.id) {
            eprintln!(
                "skipping {}: already in {}",
                spec.id,
                results_path.display()
            );
            continue;
        }
        announce(spec);
        let result = run_experiment(spec, workers)?;
        output::append_results(&results_path, result.summaries())?;
        output::write_summary_json(
            &result,
            File::create(args.out.join(format!("{}.json", spec.id)))?,
        )?;
        if args.records {
            write_records(&args.out, &result)?;
        }
        print!("{}", sweep_lines(&result));
    }
    Ok(())
}

fn write_records(out: &Path, result: &SweepResult) -> Result<()> {
    let dir = out.join(&result.id);
    create_dir(&dir)?;
    for cell in &result.cells {
        for (rep, record) in cell.records.iter().enumerate() {
            let name = format!("n{}-m{}-rep{rep}.csv", cell.n, cell.m);
            output::write_samples_csv(record, File::create(dir.join(name))?)?;
        }
    }
    Ok(())
}

fn show(r: Option<Rounds>) -> String {
    match r {
        Some(Rounds::Observed(v)) => v.to_string(),
        Some(Rounds::Censored(v)) => format!(">{v}"),
        None => "-".into(),
    }
}

fn show_stats(d: &Option<DurationStats>) -> String {
    d.as_ref().map_or("-".into(), |d| show(Some(d.median)))
}

fn show_fraction(successes: u64, trials: u64) -> String {
    match estimate_whp(successes, trials) {
        Ok(p) => format!("{:.3} [{:.3}, {:.3}]", p.fraction, p.lower, p.upper),
        Err(_) => "-".into(),
    }
}

fn sweep_lines(result: &SweepResult) -> String {
    let mut out = String::new();
    for cell in &result.cells {
        let _ = writeln!(
            out,
            "{} n={} m={} runs={} median convergence={} median stability={} median cover={}",
            result.id,
            cell.n,
            cell.m,
            cell.runs,
            show_stats(&cell.convergence),
            show_stats(&cell.stability),
            show_stats(&cell.cover),
        );
    }
    if let Some(fit) = &result.convergence_fit {
        let _ = writeln!(out, "{} convergence ~ n^{:.3}", result.id, fit.exponent);
    }
    out
}

fn cover(args: &CoverArgs) -> Result<()> {
    let graph = args.topology.build(args.n, args.seed)?;
    if args.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let times: Vec<f64> = (0..args.runs)
        .map(|i| {
            let mut streams =
                Streams::from_seed(derive_seed(args.seed, "cover", args.n as u64, 1, i));
            single_ball_cover_time(&graph, args.start, &mut streams).map(|t| t as f64)
        })
        .collect::<Result<_>>()?;
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let q = Quantiles::of(&times).expect("runs >= 1");
    println!(
        "runs={} mean={mean:.3} median={} q10={} q90={}",
        args.runs, q.median, q.q10, q.q90
    );
    if args.topology == TopologySpec::Complete {
        let expected = coupon_collector_mean(args.n)?;
        println!(
            "coupon collector mean={expected:.3} ratio={:.4}",
            mean / expected
        );
    }
    Ok(())
}

/// Per-experiment table of a results file: run fractions with Wilson
/// intervals, median durations, and a convergence fit when at least three
/// sizes converged.
pub fn report(rows: &[RunSummary]) -> String {
    if rows.is_empty() {
        return "no runs\n".into();
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, BTreeMap<(usize, u64), Vec<&RunSummary>>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(r.experiment_id.as_str()) {
            order.push(&r.experiment_id);
        }
        groups
            .entry(&r.experiment_id)
            .or_default()
            .entry((r.n, r.m))
            .or_default()
            .push(r);
    }
    let mut out = String::new();
    for id in order {
        let _ = writeln!(out, "== {id}");
        let _ = writeln!(
            out,
            "{:>7} {:>8} {:>5}  {:<24} {:>10}  {:<24} {:>10} {:>10} {:>9}",
            "n", "m", "runs", "converged", "median", "stable", "median", "cover", "progress"
        );
        let mut fit_points = Vec::new();
        for (&(n, m), cell) in &groups[id] {
            let conv: Vec<Rounds> = cell.iter().filter_map(|r| r.convergence()).collect();
            let stab: Vec<Rounds> = cell.iter().filter_map(|r| r.stability()).collect();
            let cover: Vec<Rounds> = cell.iter().filter_map(|r| r.cover()).collect();
            let conv_stats = DurationStats::of(&conv);
            let progress: Vec<f64> = cell
                .iter()
                .filter_map(|r| r.min_progress.map(|p| p as f64))
                .collect();
            if let Some(median) = conv_stats.as_ref().and_then(|d| d.median.observed()) {
                if median > 0 {
                    fit_points.push((n as f64, median as f64));
                }
            }
            let converged = conv.iter().filter(|r| !r.is_censored()).count() as u64;
            let stable = stab.iter().filter(|r| r.is_censored()).count() as u64;
            let _ = writeln!(
                out,
                "{:>7} {:>8} {:>5}  {:<24} {:>10}  {:<24} {:>10} {:>10} {:>9}",
                n,
                m,
                cell.len(),
                show_fraction(converged, conv.len() as u64),
                show_stats(&conv_stats),
                show_fraction(stable, stab.len() as u64),
                show_stats(&DurationStats::of(&stab)),
                show_stats(&DurationStats::of(&cover)),
                Quantiles::of(&progress).map_or("-".into(), |q| q.median.to_string()),
            );
        }
        if let Ok(fit) = scaling_fit(&fit_points) {
            let _ = writeln!(
                out,
                "convergence fit: median ~ n^{:.3} (max relative residual {:.3})",
                fit.exponent, fit.residual
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(id: &str, n: usize, conv: Option<Rounds>, stab: Option<Rounds>) -> RunSummary {
        RunSummary {
            experiment_id: id.into(),
            seed: 0,
            n,
            m: n as u64,
            topology: "complete".into(),
            strategy: "fifo".into(),
            alpha: 4.0,
            convergence_time: conv.map(|r| r.value()),
            convergence_censored: conv.map(|r| r.is_censored()),
            stability_horizon: stab.map(|r| r.value()),
            stability_censored: stab.map(|r| r.is_censored()),
            parallel_cover_time: None,
            cover_censored: None,
            min_progress: None,
            max_load_overall: Some(3),
            mean_empty_fraction: Some(0.3),
        }
    }

    #[test]
    fn report_on_empty_results() {
        assert_eq!(report(&[]), "no runs\n");
    }

    #[test]
    fn report_all_stable() {
        let rows: Vec<RunSummary> = (0..10)
            .map(|_| {
                synthetic(
                    "s",
                    64,
                    Some(Rounds::Observed(0)),
                    Some(Rounds::Censored(4096)),
                )
            })
            .collect();
        let text = report(&rows);
        assert!(text.contains("1.000 [0.722, 1.000]"), "{text}");
    }

    #[test]
    fn report_linear_fit() {
        let rows: Vec<RunSummary> = [128, 256, 512]
            .iter()
            .map(|&n| synthetic("c", n, Some(Rounds::Observed(7 * n as u64)), None))
            .collect();
        let text = report(&rows);
        assert!(text.contains("n^1.000"), "{text}");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(
            main_with(["rebins", "simulate", "--n", "4", "--strategy", "sideways"]),
            2
        );
        assert_eq!(main_with(["rebins", "frobnicate"]), 2);
        assert_eq!(main_with(["rebins", "presets", "nope"]), 2);
        assert_eq!(main_with(["rebins", "presets"]), 0);
    }
}
