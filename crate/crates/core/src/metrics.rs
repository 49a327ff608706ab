//! Legitimacy, convergence, stability, progress and cover metrics.
//!
//! Max load and legitimacy are evaluated every round while a run streams; only
//! a strided subset of rounds is stored as [`Sample`]s. Exact duration metrics
//! for any threshold are recovered from the running-maximum and
//! running-minimum breakpoints of the max-load trajectory.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{BallTrace, Configuration, ProcessKind};

/// Rounds above which snapshots are thinned to about this many samples.
pub const SAMPLE_TARGET: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleForm {
    /// `ceil(alpha * log2 n)`
    Balanced,
    /// `ceil(alpha * (m/n) * log2 n)`
    Scaled,
    /// `ceil(alpha * (m/n + log2 n))`
    Additive,
}

impl fmt::Display for RuleForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleForm::Balanced => "balanced",
            RuleForm::Scaled => "scaled",
            RuleForm::Additive => "additive",
        })
    }
}

impl FromStr for RuleForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balanced" => Ok(RuleForm::Balanced),
            "scaled" => Ok(RuleForm::Scaled),
            "additive" => Ok(RuleForm::Additive),
            other => Err(Error::Rule(format!("unknown rule form {other:?}"))),
        }
    }
}

/// A configuration is legitimate when its max load is at most the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegitimacyRule {
    pub alpha: f64,
    pub form: RuleForm,
}

impl Default for LegitimacyRule {
    fn default() -> Self {
        LegitimacyRule {
            alpha: 4.0,
            form: RuleForm::Balanced,
        }
    }
}

impl LegitimacyRule {
    pub fn new(alpha: f64, form: RuleForm) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Rule(format!("alpha must be positive, got {alpha}")));
        }
        Ok(LegitimacyRule { alpha, form })
    }

    /// Max-load threshold for `m` balls on `n` nodes (base-2 logarithms).
    ///
    /// Fails when the threshold would sit below `ceil(m/n)`, which no
    /// configuration can satisfy.
    pub fn threshold(&self, n: usize, m: u64) -> Result<u32> {
        if n < 2 {
            return Err(Error::Rule(format!("threshold needs n >= 2, got {n}")));
        }
        let log_n = (n as f64).log2();
        let avg = m as f64 / n as f64;
        let raw = match self.form {
            RuleForm::Balanced => self.alpha * log_n,
            RuleForm::Scaled => self.alpha * avg * log_n,
            RuleForm::Additive => self.alpha * (avg + log_n),
        };
        let threshold = raw.ceil();
        let floor = m.div_ceil(n as u64);
        if threshold < floor as f64 {
            return Err(Error::Rule(format!(
                "threshold {threshold} is below the average load ceiling {floor} (n={n}, m={m}, alpha={}, {})",
                self.alpha, self.form
            )));
        }
        Ok(threshold.min(u32::MAX as f64) as u32)
    }
}

/// A duration that either happened within the budget or was censored there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounds {
    Observed(u64),
    Censored(u64),
}

impl Rounds {
    pub fn value(&self) -> u64 {
        match *self {
            Rounds::Observed(r) | Rounds::Censored(r) => r,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Rounds::Censored(_))
    }

    pub fn observed(&self) -> Option<u64> {
        match *self {
            Rounds::Observed(r) => Some(r),
            Rounds::Censored(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub round: u64,
    pub max_load: u32,
    pub empty_fraction: f64,
    pub legitimate: bool,
    pub faulty: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub round: u64,
    /// Rounds from the fault until the first legitimate configuration,
    /// unset if another fault or the end of the run came first.
    pub recovery: Option<u64>,
}

/// Per-ball outcome of a traced run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallSummary {
    pub progress: u64,
    pub cover_round: Option<u64>,
}

/// Metric stream of one seeded trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub process: ProcessKind,
    pub seed: u64,
    pub n: usize,
    /// Ball count at round 0.
    pub m: u64,
    pub rule: LegitimacyRule,
    pub threshold: u32,
    pub budget: u64,
    /// Rounds actually executed; less than `budget` after an early stop.
    pub rounds_run: u64,
    pub stride: u64,
    pub samples: Vec<Sample>,
    /// `(round, value)` each time the max load exceeded all earlier rounds.
    pub load_highs: Vec<(u64, u32)>,
    /// `(round, value)` each time the max load fell below all earlier rounds.
    pub load_lows: Vec<(u64, u32)>,
    pub faults: Vec<FaultEvent>,
    pub max_load_overall: u32,
    pub mean_empty_fraction: f64,
    pub total_forwards: u64,
    pub final_ball_count: u64,
    pub balls: Option<Vec<BallSummary>>,
}

impl RunRecord {
    pub fn min_progress(&self) -> Option<u64> {
        self.balls
            .as_ref()
            .and_then(|b| b.iter().map(|s| s.progress).min())
    }

    pub fn initial_max_load(&self) -> u32 {
        self.load_highs.first().map_or(0, |&(_, v)| v)
    }

    /// Max load at `round`, if that round was sampled.
    pub fn max_load_at(&self, round: u64) -> Option<u32> {
        self.samples
            .binary_search_by_key(&round, |s| s.round)
            .ok()
            .map(|i| self.samples[i].max_load)
    }
}

pub fn max_load(config: &Configuration) -> u32 {
    config.loads().iter().copied().max().unwrap_or(0)
}

pub fn empty_fraction(config: &Configuration) -> f64 {
    let loads = config.loads();
    loads.iter().filter(|&&l| l == 0).count() as f64 / loads.len() as f64
}

pub fn is_legitimate(config: &Configuration, rule: &LegitimacyRule) -> Result<bool> {
    let threshold = rule.threshold(config.n(), config.ball_count())?;
    Ok(max_load(config) <= threshold)
}

/// First round with a legitimate configuration under the record's own rule.
pub fn convergence_time(record: &RunRecord) -> Rounds {
    first_at_most(record, record.threshold)
}

/// Like [`convergence_time`] but for an arbitrary rule.
pub fn convergence_time_with(record: &RunRecord, rule: &LegitimacyRule) -> Result<Rounds> {
    Ok(first_at_most(record, rule.threshold(record.n, record.m)?))
}

fn first_at_most(record: &RunRecord, threshold: u32) -> Rounds {
    record
        .load_lows
        .iter()
        .find(|&&(_, v)| v <= threshold)
        .map_or(Rounds::Censored(record.rounds_run), |&(r, _)| {
            Rounds::Observed(r)
        })
}

/// First round whose configuration violates `rule`, or censored at the end of
/// the run. The run must start legitimate.
pub fn stability_horizon(record: &RunRecord, rule: &LegitimacyRule) -> Result<Rounds> {
    let threshold = rule.threshold(record.n, record.m)?;
    if record.initial_max_load() > threshold {
        return Err(Error::Precondition(format!(
            "run starts with max load {} above threshold {threshold}",
            record.initial_max_load()
        )));
    }
    Ok(record
        .load_highs
        .iter()
        .find(|&&(_, v)| v > threshold)
        .map_or(Rounds::Censored(record.rounds_run), |&(r, _)| {
            Rounds::Observed(r)
        }))
}

/// Forwarding events of one ball in rounds `from..to`.
///
/// Arbitrary windows need the forward log; without it only the window
/// starting at round 0 and ending at `current_round` is answerable.
pub fn progress(trace: &BallTrace, from: u64, to: u64, current_round: u64) -> Result<u64> {
    if from > to || to > current_round {
        return Err(Error::Precondition(format!(
            "window {from}..{to} not within 0..{current_round}"
        )));
    }
    if from == to {
        return Ok(0);
    }
    match trace.forward_log() {
        Some(log) => {
            let lo = log.partition_point(|&r| r < from);
            let hi = log.partition_point(|&r| r < to);
            Ok((hi - lo) as u64)
        }
        None if from == 0 && to == current_round => Ok(trace.progress()),
        None => Err(Error::Precondition(
            "windowed progress needs a forward log".into(),
        )),
    }
}

/// Per-ball progress of a traced configuration over a window.
pub fn config_progress(config: &Configuration, from: u64, to: u64) -> Result<Vec<u64>> {
    let traces = config.traces().ok_or(Error::TracingRequired)?;
    traces
        .iter()
        .map(|t| progress(t, from, to, config.round()))
        .collect()
}

/// Round by which every traced ball had visited every node.
pub fn parallel_cover_time(record: &RunRecord) -> Result<Rounds> {
    let balls = record.balls.as_ref().ok_or(Error::TracingRequired)?;
    let mut latest = 0;
    for b in balls {
        match b.cover_round {
            Some(r) => latest = latest.max(r),
            None => return Ok(Rounds::Censored(record.rounds_run)),
        }
    }
    Ok(Rounds::Observed(latest))
}

/// Streams per-round observations into a [`RunRecord`].
#[derive(Debug)]
pub(crate) struct RecordBuilder {
    process: ProcessKind,
    seed: u64,
    n: usize,
    m: u64,
    rule: LegitimacyRule,
    threshold: u32,
    budget: u64,
    stride: u64,
    checkpoints: Vec<u64>,
    samples: Vec<Sample>,
    highs: Vec<(u64, u32)>,
    lows: Vec<(u64, u32)>,
    faults: Vec<FaultEvent>,
    empty_total: u128,
    observed: u64,
    forwards: u64,
    last: Option<Sample>,
}

pub fn default_stride(budget: u64) -> u64 {
    if budget <= SAMPLE_TARGET {
        1
    } else {
        budget.div_ceil(SAMPLE_TARGET)
    }
}

impl RecordBuilder {
    pub(crate) fn new(
        process: ProcessKind,
        seed: u64,
        n: usize,
        m: u64,
        rule: LegitimacyRule,
        budget: u64,
        stride: Option<u64>,
        checkpoints: &[u64],
    ) -> Result<Self> {
        let threshold = rule.threshold(n, m)?;
        let mut checkpoints = checkpoints.to_vec();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        Ok(RecordBuilder {
            process,
            seed,
            n,
            m,
            rule,
            threshold,
            budget,
            stride: stride.unwrap_or_else(|| default_stride(budget)).max(1),
            checkpoints,
            samples: Vec::new(),
            highs: Vec::new(),
            lows: Vec::new(),
            faults: Vec::new(),
            empty_total: 0,
            observed: 0,
            forwards: 0,
            last: None,
        })
    }

    /// Observe the configuration in force at `round`. Returns whether it is
    /// legitimate.
    pub(crate) fn observe(
        &mut self,
        round: u64,
        loads: &[u32],
        faulty: bool,
        forwards: u64,
    ) -> bool {
        let mut max = 0;
        let mut empty = 0usize;
        for &l in loads {
            max = max.max(l);
            empty += (l == 0) as usize;
        }
        let legitimate = max <= self.threshold;
        self.forwards += forwards;
        self.empty_total += empty as u128;
        self.observed += 1;
        if self.highs.last().is_none_or(|&(_, v)| max > v) {
            self.highs.push((round, max));
        }
        if self.lows.last().is_none_or(|&(_, v)| max < v) {
            self.lows.push((round, max));
        }
        if faulty {
            self.faults.push(FaultEvent {
                round,
                recovery: None,
            });
        }
        if let Some(f) = self.faults.last_mut() {
            if f.recovery.is_none() && legitimate && (faulty || f.round < round) {
                f.recovery = Some(round - f.round);
            }
        }
        let sample = Sample {
            round,
            max_load: max,
            empty_fraction: empty as f64 / loads.len() as f64,
            legitimate,
            faulty,
        };
        if round % self.stride == 0 || self.checkpoints.binary_search(&round).is_ok() {
            self.samples.push(sample);
            self.last = None;
        } else {
            self.last = Some(sample);
        }
        legitimate
    }

    pub(crate) fn finish(
        mut self,
        rounds_run: u64,
        final_balls: u64,
        config: Option<&Configuration>,
    ) -> RunRecord {
        if let Some(last) = self.last.take() {
            self.samples.push(last);
        }
        let balls = config.and_then(|c| c.traces()).map(|traces| {
            traces
                .iter()
                .map(|t| BallSummary {
                    progress: t.progress(),
                    cover_round: t.cover_round(),
                })
                .collect()
        });
        let mean_empty = if self.observed == 0 {
            0.0
        } else {
            self.empty_total as f64 / (self.observed as f64 * self.n as f64)
        };
        RunRecord {
            process: self.process,
            seed: self.seed,
            n: self.n,
            m: self.m,
            rule: self.rule,
            threshold: self.threshold,
            budget: self.budget,
            rounds_run,
            stride: self.stride,
            samples: self.samples,
            max_load_overall: self.highs.last().map_or(0, |&(_, v)| v),
            load_highs: self.highs,
            load_lows: self.lows,
            faults: self.faults,
            mean_empty_fraction: mean_empty,
            total_forwards: self.forwards,
            final_ball_count: final_balls,
            balls,
        }
    }
}
