//! Faulty rounds: an adversary re-assigns every ball at scheduled times.
//!
//! A fault replaces the placement of all balls but never their histories, so
//! cover and progress tracking continue across faults.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::expr::NExpr;
use crate::graph::Graph;
use crate::metrics::RunRecord;
use crate::process::{parse_counts, run_engine, Configuration, Observer, RunOptions, Strategy};
use crate::rng::{below, unit, Streams};

#[derive(Clone, Debug, PartialEq)]
pub enum FaultPolicy {
    AllInOne(usize),
    UniformReshuffle,
    Custom(Vec<u32>),
}

impl fmt::Display for FaultPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultPolicy::AllInOne(t) => write!(f, "point:{t}"),
            FaultPolicy::UniformReshuffle => write!(f, "reshuffle"),
            FaultPolicy::Custom(c) => {
                let parts: Vec<String> = c.iter().map(u32::to_string).collect();
                write!(f, "counts:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for FaultPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("reshuffle") => Ok(FaultPolicy::UniformReshuffle),
            Some(("point", idx)) => idx
                .trim()
                .parse()
                .map(FaultPolicy::AllInOne)
                .map_err(|_| Error::FaultSpec(format!("invalid target node {idx:?}"))),
            Some(("counts", list)) => parse_counts(list, ',')
                .map(FaultPolicy::Custom)
                .map_err(|e| Error::FaultSpec(e.to_string())),
            _ => Err(Error::FaultSpec(format!("unknown fault policy {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FaultTrigger {
    /// Rounds `k, 2k, 3k, ...`
    Periodic(u64),
    /// Each round independently with probability `p`.
    Bernoulli(f64),
    /// Explicit, strictly increasing rounds.
    AtRounds(Vec<u64>),
}

impl fmt::Display for FaultTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTrigger::Periodic(k) => write!(f, "periodic:{k}"),
            FaultTrigger::Bernoulli(p) => write!(f, "bernoulli:{p}"),
            FaultTrigger::AtRounds(r) => {
                let parts: Vec<String> = r.iter().map(u64::to_string).collect();
                write!(f, "at:{}", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaultSchedule {
    pub trigger: FaultTrigger,
    pub policy: FaultPolicy,
}

impl FaultSchedule {
    pub fn new(trigger: FaultTrigger, policy: FaultPolicy) -> Result<Self> {
        match &trigger {
            FaultTrigger::Periodic(0) => {
                return Err(Error::FaultSpec("period must be at least 1".into()))
            }
            FaultTrigger::Bernoulli(p) if !(0.0..=1.0).contains(p) => {
                return Err(Error::FaultSpec(format!("rate {p} outside [0, 1]")))
            }
            FaultTrigger::AtRounds(r) if r.windows(2).any(|w| w[0] >= w[1]) => {
                return Err(Error::FaultSpec(
                    "fault rounds must be strictly increasing".into(),
                ))
            }
            _ => {}
        }
        Ok(FaultSchedule { trigger, policy })
    }

    /// A schedule that never fires.
    pub fn never() -> Self {
        FaultSchedule {
            trigger: FaultTrigger::AtRounds(Vec::new()),
            policy: FaultPolicy::UniformReshuffle,
        }
    }

    /// Whether a fault hits `round`. Bernoulli triggers take one draw per
    /// round from `rng`; the other triggers take none.
    pub fn fires<R: RngCore + ?Sized>(&self, round: u64, rng: &mut R) -> bool {
        match &self.trigger {
            FaultTrigger::Periodic(k) => round > 0 && round % k == 0,
            FaultTrigger::Bernoulli(p) => unit(rng) < *p,
            FaultTrigger::AtRounds(rounds) => rounds.binary_search(&round).is_ok(),
        }
    }
}

impl fmt::Display for FaultSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.trigger, self.policy)
    }
}

/// Fault schedule whose period may depend on `n` (e.g. `periodic:8n/point:0`).
///
/// Syntax: `TRIGGER/POLICY` with `TRIGGER` one of `periodic:EXPR`,
/// `bernoulli:P`, `at:R1,R2,...` and `POLICY` one of `point:IDX`,
/// `reshuffle`, `counts:C1,C2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultSpec {
    trigger: TriggerSpec,
    policy: FaultPolicy,
}

#[derive(Clone, Debug, PartialEq)]
enum TriggerSpec {
    Periodic(NExpr),
    Bernoulli(f64),
    AtRounds(Vec<u64>),
}

impl FaultSpec {
    pub fn resolve(&self, n: usize) -> Result<FaultSchedule> {
        let trigger = match &self.trigger {
            TriggerSpec::Periodic(e) => FaultTrigger::Periodic(e.eval(n)),
            TriggerSpec::Bernoulli(p) => FaultTrigger::Bernoulli(*p),
            TriggerSpec::AtRounds(r) => FaultTrigger::AtRounds(r.clone()),
        };
        FaultSchedule::new(trigger, self.policy.clone())
    }
}

impl FromStr for FaultSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (trigger, policy) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| Error::FaultSpec(format!("expected TRIGGER/POLICY, got {s:?}")))?;
        let (kind, arg) = trigger.split_once(':').ok_or_else(|| {
            Error::FaultSpec(format!("expected KIND:ARG trigger, got {trigger:?}"))
        })?;
        let trigger = match kind.trim() {
            "periodic" => TriggerSpec::Periodic(
                arg.parse()
                    .map_err(|e: Error| Error::FaultSpec(e.to_string()))?,
            ),
            "bernoulli" => TriggerSpec::Bernoulli(
                arg.trim()
                    .parse()
                    .map_err(|_| Error::FaultSpec(format!("invalid rate {arg:?}")))?,
            ),
            "at" => {
                let rounds = if arg.trim().is_empty() {
                    Vec::new()
                } else {
                    arg.split(',')
                        .map(|r| {
                            r.trim()
                                .parse()
                                .map_err(|_| Error::FaultSpec(format!("invalid round {r:?}")))
                        })
                        .collect::<Result<Vec<u64>>>()?
                };
                TriggerSpec::AtRounds(rounds)
            }
            other => return Err(Error::FaultSpec(format!("unknown trigger {other:?}"))),
        };
        let spec = FaultSpec {
            trigger,
            policy: policy.parse()?,
        };
        // surface range errors at parse time
        spec.resolve(2)?;
        Ok(spec)
    }
}

impl fmt::Display for FaultSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.trigger {
            TriggerSpec::Periodic(e) => write!(f, "periodic:{e}")?,
            TriggerSpec::Bernoulli(p) => write!(f, "bernoulli:{p}")?,
            TriggerSpec::AtRounds(r) => {
                let parts: Vec<String> = r.iter().map(u64::to_string).collect();
                write!(f, "at:{}", parts.join(","))?
            }
        }
        write!(f, "/{}", self.policy)
    }
}

/// Re-assign every ball according to `policy`.
///
/// Traced mode: for `AllInOne`/`Custom` ascending ball ids fill ascending
/// node indices; `UniformReshuffle` draws one node per ball in ascending id
/// order from `streams.placement`, in either mode.
pub fn apply_fault(
    config: &mut Configuration,
    policy: &FaultPolicy,
    streams: &mut Streams,
) -> Result<()> {
    let n = config.n();
    let m = config.ball_count();
    let node_of: Vec<u32> = match policy {
        FaultPolicy::UniformReshuffle => (0..m)
            .map(|_| below(&mut streams.placement, n as u32))
            .collect(),
        FaultPolicy::AllInOne(target) => {
            if *target >= n {
                return Err(Error::FaultSpec(format!(
                    "target node {target} out of range for n={n}"
                )));
            }
            vec![*target as u32; m as usize]
        }
        FaultPolicy::Custom(counts) => {
            if counts.len() != n {
                return Err(Error::FaultSpec(format!(
                    "expected {n} counts, got {}",
                    counts.len()
                )));
            }
            let total: u64 = counts.iter().map(|&c| c as u64).sum();
            if total != m {
                return Err(Error::FaultSpec(format!(
                    "counts sum to {total}, configuration holds {m} balls"
                )));
            }
            counts
                .iter()
                .enumerate()
                .flat_map(|(v, &c)| std::iter::repeat(v as u32).take(c as usize))
                .collect()
        }
    };
    config.relocate(&node_of);
    Ok(())
}

/// [`crate::process::run`] with faults injected per `schedule`.
pub fn faulty_run(
    config: &mut Configuration,
    graph: &Graph,
    strategy: Strategy,
    options: &RunOptions,
    schedule: &FaultSchedule,
    observers: &mut [&mut dyn Observer],
    streams: &mut Streams,
) -> Result<RunRecord> {
    run_engine(
        config,
        graph,
        strategy,
        options,
        Some(schedule),
        observers,
        streams,
    )
}
