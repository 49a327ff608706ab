//! Declarative sweeps: seeded repetitions per `(n, m)` cell, run-fraction
//! estimates with confidence intervals, and scaling fits.

pub mod presets;
pub mod spec;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::faulty_run;
use crate::baselines::{run_memoryless, single_ball_cover_time};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{convergence_time, parallel_cover_time, stability_horizon, Rounds, RunRecord};
use crate::process::{run, Configuration, Mode, Placement, ProcessKind, RunOptions};
use crate::rng::Streams;

pub use spec::{parse_config, ExperimentSpec, MRule, TopologySpec};
pub use stats::{estimate_whp, scaling_fit, DurationStats, PowerFit, Proportion, Quantiles};

/// Marker repetition index for the per-cell graph seed.
const GRAPH_SEED_SLOT: u64 = u64::MAX;

/// Seed of repetition `rep` in cell `(n, m)`: the first eight bytes
/// (little-endian) of SHA-256 over
/// `"rebins/seed/v1" || master || len(label) || label || n || m || rep`, with
/// integers encoded as little-endian `u64`.
pub fn derive_seed(master: u64, label: &str, n: u64, m: u64, rep: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"rebins/seed/v1");
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(n.to_le_bytes());
    h.update(m.to_le_bytes());
    h.update(rep.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment_id: String,
    pub seed: u64,
    pub n: usize,
    pub m: u64,
    pub topology: String,
    pub strategy: String,
    pub alpha: f64,
    pub convergence_time: Option<u64>,
    pub convergence_censored: Option<bool>,
    pub stability_horizon: Option<u64>,
    pub stability_censored: Option<bool>,
    pub parallel_cover_time: Option<u64>,
    pub cover_censored: Option<bool>,
    pub min_progress: Option<u64>,
    pub max_load_overall: Option<u32>,
    pub mean_empty_fraction: Option<f64>,
}

pub const RESULTS_HEADER: [&str; 16] = [
    "experiment_id",
    "seed",
    "n",
    "m",
    "topology",
    "strategy",
    "alpha",
    "convergence_time",
    "convergence_censored",
    "stability_horizon",
    "stability_censored",
    "parallel_cover_time",
    "cover_censored",
    "min_progress",
    "max_load_overall",
    "mean_empty_fraction",
];

fn split(r: Option<Rounds>) -> (Option<u64>, Option<bool>) {
    match r {
        Some(r) => (Some(r.value()), Some(r.is_censored())),
        None => (None, None),
    }
}

fn join(value: Option<u64>, censored: Option<bool>) -> Option<Rounds> {
    match (value, censored) {
        (Some(v), Some(true)) => Some(Rounds::Censored(v)),
        (Some(v), _) => Some(Rounds::Observed(v)),
        _ => None,
    }
}

impl RunSummary {
    pub fn convergence(&self) -> Option<Rounds> {
        join(self.convergence_time, self.convergence_censored)
    }

    pub fn stability(&self) -> Option<Rounds> {
        join(self.stability_horizon, self.stability_censored)
    }

    pub fn cover(&self) -> Option<Rounds> {
        join(self.parallel_cover_time, self.cover_censored)
    }

    fn from_record(spec: &ExperimentSpec, graph: &Graph, record: &RunRecord) -> RunSummary {
        let (convergence_time, convergence_censored) = split(Some(convergence_time(record)));
        let (stability_horizon, stability_censored) =
            split(stability_horizon(record, &record.rule).ok());
        let (parallel_cover_time, cover_censored) = split(parallel_cover_time(record).ok());
        RunSummary {
            experiment_id: spec.id.clone(),
            seed: record.seed,
            n: record.n,
            m: record.m,
            topology: graph.kind().to_string(),
            strategy: spec.strategy.to_string(),
            alpha: spec.rule.alpha,
            convergence_time,
            convergence_censored,
            stability_horizon,
            stability_censored,
            parallel_cover_time,
            cover_censored,
            min_progress: record.min_progress(),
            max_load_overall: Some(record.max_load_overall),
            mean_empty_fraction: Some(record.mean_empty_fraction),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultRecoveryStats {
    pub faults: u64,
    pub recovered: u64,
    pub max_recovery: Option<u64>,
    /// Runs in which every fault was followed by a legitimate configuration
    /// before the next fault or the end of the run.
    pub runs_fully_recovered: Proportion,
}

/// Aggregates for one `(n, m)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub m: u64,
    pub runs: u64,
    pub converged: Option<Proportion>,
    pub stable: Option<Proportion>,
    pub covered: Option<Proportion>,
    pub convergence: Option<DurationStats>,
    pub stability: Option<DurationStats>,
    pub cover: Option<DurationStats>,
    pub min_progress: Option<Quantiles>,
    pub max_load_overall: Option<Quantiles>,
    pub mean_empty_fraction: Option<Quantiles>,
    /// Sampled per-round empty fractions from each run's convergence onward.
    pub empty_fraction_after_convergence: Option<Quantiles>,
    pub fault_recovery: Option<FaultRecoveryStats>,
    #[serde(skip)]
    pub summaries: Vec<RunSummary>,
    #[serde(skip)]
    pub records: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub id: String,
    pub process: ProcessKind,
    pub config: String,
    pub cells: Vec<CellResult>,
    /// Power-law fit of median convergence time against `n`, when at least
    /// three cells have a positive observed median.
    pub convergence_fit: Option<PowerFit>,
}

impl SweepResult {
    pub fn summaries(&self) -> impl Iterator<Item = &RunSummary> {
        self.cells.iter().flat_map(|c| c.summaries.iter())
    }
}

/// Output of one repetition.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub repetition: u64,
    pub summary: RunSummary,
    pub record: Option<RunRecord>,
}

/// Run every repetition of every cell of `spec` on up to `workers` threads.
/// The result does not depend on `workers`.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let label = spec.seed_label();
    let mut cells = Vec::new();
    for &n in &spec.n_values {
        for m in spec.m_rule.values(n) {
            let graph_seed = derive_seed(spec.seed, label, n as u64, m, GRAPH_SEED_SLOT);
            cells.push((n, m, spec.topology.build(n, graph_seed)?));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..spec.repetitions).map(move |r| (c, r)))
        .collect();

    let execute = || -> Vec<Result<RunOutcome>> {
        jobs.par_iter()
            .map(|&(c, rep)| {
                let (n, m, ref graph) = cells[c];
                let seed = derive_seed(spec.seed, label, n as u64, m, rep);
                run_repetition(spec, graph, m, seed, rep)
            })
            .collect()
    };
    let results = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?
        .install(execute);

    let mut per_cell: Vec<Vec<RunOutcome>> = vec![Vec::new(); cells.len()];
    for (&(c, _), outcome) in jobs.iter().zip(results) {
        per_cell[c].push(outcome?);
    }
    let cells: Vec<CellResult> = cells
        .iter()
        .zip(per_cell)
        .map(|(&(n, m, _), outcomes)| aggregate_cell(n, m, outcomes))
        .collect();
    let fit_points: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| {
            let median = c.convergence.as_ref()?.median.observed()?;
            (median > 0).then_some((c.n as f64, median as f64))
        })
        .collect();
    Ok(SweepResult {
        id: spec.id.clone(),
        process: spec.process,
        config: spec.resolved(),
        convergence_fit: scaling_fit(&fit_points).ok(),
        cells,
    })
}

/// One seeded repetition of `spec` on `graph` with `m` balls.
pub fn run_repetition(
    spec: &ExperimentSpec,
    graph: &Graph,
    m: u64,
    seed: u64,
    repetition: u64,
) -> Result<RunOutcome> {
    let n = graph.n();
    let budget = spec.rounds.eval(n);
    let mut streams = Streams::from_seed(seed);
    let record = match spec.process {
        ProcessKind::SingleBall => {
            let start = match spec.placement {
                Placement::AllInOne(v) => v,
                _ => 0,
            };
            let cover = single_ball_cover_time(graph, start, &mut streams)?;
            let summary = RunSummary {
                experiment_id: spec.id.clone(),
                seed,
                n,
                m: 1,
                topology: graph.kind().to_string(),
                strategy: spec.strategy.to_string(),
                alpha: spec.rule.alpha,
                convergence_time: None,
                convergence_censored: None,
                stability_horizon: None,
                stability_censored: None,
                parallel_cover_time: Some(cover),
                cover_censored: Some(false),
                min_progress: None,
                max_load_overall: None,
                mean_empty_fraction: None,
            };
            return Ok(RunOutcome {
                repetition,
                summary,
                record: None,
            });
        }
        ProcessKind::Memoryless => {
            run_memoryless(n, m as usize, budget, spec.rule, spec.stride, &mut streams)?
        }
        ProcessKind::Base | ProcessKind::Dominating => {
            let mode = if spec.trace {
                Mode::Traced
            } else {
                Mode::Anonymous
            };
            let mut config =
                Configuration::new(graph, m as usize, &spec.placement, mode, &mut streams)?;
            let options = RunOptions {
                rounds: budget,
                rule: spec.rule,
                stride: spec.stride,
                checkpoints: spec.checkpoints.clone(),
                process: spec.process,
                stop_when_covered: spec.stop_when_covered,
            };
            match &spec.faults {
                Some(f) => faulty_run(
                    &mut config,
                    graph,
                    spec.strategy,
                    &options,
                    &f.resolve(n)?,
                    &mut [],
                    &mut streams,
                )?,
                None => run(
                    &mut config,
                    graph,
                    spec.strategy,
                    &options,
                    &mut [],
                    &mut streams,
                )?,
            }
        }
    };
    Ok(RunOutcome {
        repetition,
        summary: RunSummary::from_record(spec, graph, &record),
        record: Some(record),
    })
}

fn proportion(flags: impl Iterator<Item = bool>) -> Option<Proportion> {
    let (mut hits, mut total) = (0, 0);
    for f in flags {
        total += 1;
        hits += f as u64;
    }
    estimate_whp(hits, total).ok()
}

/// Aggregate one cell. Outcomes are ordered by repetition first, so the
/// result is independent of completion order.
pub fn aggregate_cell(n: usize, m: u64, mut outcomes: Vec<RunOutcome>) -> CellResult {
    outcomes.sort_by_key(|o| o.repetition);
    let summaries: Vec<RunSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    let records: Vec<RunRecord> = outcomes.into_iter().filter_map(|o| o.record).collect();

    let conv: Vec<Rounds> = summaries
        .iter()
        .filter_map(RunSummary::convergence)
        .collect();
    let stab: Vec<Rounds> = summaries.iter().filter_map(RunSummary::stability).collect();
    let cover: Vec<Rounds> = summaries.iter().filter_map(RunSummary::cover).collect();
    let floats = |f: fn(&RunSummary) -> Option<f64>| -> Option<Quantiles> {
        Quantiles::of(&summaries.iter().filter_map(f).collect::<Vec<_>>())
    };

    let after_convergence: Vec<f64> = records
        .iter()
        .filter_map(|r| {
            let t = convergence_time(r).observed()?;
            Some(
                r.samples
                    .iter()
                    .filter(move |s| s.round >= t)
                    .map(|s| s.empty_fraction),
            )
        })
        .flatten()
        .collect();

    let fault_recovery = if records.iter().any(|r| !r.faults.is_empty()) {
        let all = records.iter().flat_map(|r| r.faults.iter());
        let faults = all.clone().count() as u64;
        let recovered = all.clone().filter(|f| f.recovery.is_some()).count() as u64;
        Some(FaultRecoveryStats {
            faults,
            recovered,
            max_recovery: all.filter_map(|f| f.recovery).max(),
            runs_fully_recovered: proportion(
                records
                    .iter()
                    .map(|r| r.faults.iter().all(|f| f.recovery.is_some())),
            )
            .expect("records are non-empty"),
        })
    } else {
        None
    };

    CellResult {
        n,
        m,
        runs: summaries.len() as u64,
        converged: proportion(conv.iter().map(|r| !r.is_censored())),
        stable: proportion(stab.iter().map(|r| r.is_censored())),
        covered: proportion(cover.iter().map(|r| !r.is_censored())),
        convergence: DurationStats::of(&conv),
        stability: DurationStats::of(&stab),
        cover: DurationStats::of(&cover),
        min_progress: floats(|s| s.min_progress.map(|p| p as f64)),
        max_load_overall: floats(|s| s.max_load_overall.map(f64::from)),
        mean_empty_fraction: floats(|s| s.mean_empty_fraction),
        empty_fraction_after_convergence: Quantiles::of(&after_convergence),
        fault_recovery,
        summaries,
        records,
    }
}
