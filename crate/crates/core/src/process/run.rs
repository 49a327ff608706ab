use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversary::{apply_fault, FaultSchedule};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{LegitimacyRule, RecordBuilder, RunRecord};
use crate::process::{step, Configuration, Move, Strategy};
use crate::rng::Streams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    #[default]
    Base,
    Dominating,
    Memoryless,
    SingleBall,
}

impl fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessKind::Base => "base",
            ProcessKind::Dominating => "dominating",
            ProcessKind::Memoryless => "memoryless",
            ProcessKind::SingleBall => "single_ball",
        })
    }
}

impl FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "base" => Ok(ProcessKind::Base),
            "dominating" => Ok(ProcessKind::Dominating),
            "memoryless" => Ok(ProcessKind::Memoryless),
            "single_ball" => Ok(ProcessKind::SingleBall),
            other => Err(Error::Config(format!("unknown process kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Receives the configuration after every round (and once at round 0 with
/// no moves). Returning an error aborts the run.
pub trait Observer {
    fn observe(
        &mut self,
        config: &Configuration,
        moves: &[Move],
    ) -> std::result::Result<Flow, String>;
}

impl<F> Observer for F
where
    F: FnMut(&Configuration, &[Move]) -> std::result::Result<Flow, String>,
{
    fn observe(
        &mut self,
        config: &Configuration,
        moves: &[Move],
    ) -> std::result::Result<Flow, String> {
        self(config, moves)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub rounds: u64,
    pub rule: LegitimacyRule,
    /// Snapshot stride; defaults to [`crate::metrics::default_stride`].
    pub stride: Option<u64>,
    /// Rounds always included among the samples.
    pub checkpoints: Vec<u64>,
    /// `Base` or `Dominating`.
    pub process: ProcessKind,
    /// End the run once every traced ball has covered the graph.
    pub stop_when_covered: bool,
}

impl RunOptions {
    pub fn new(rounds: u64) -> Self {
        RunOptions {
            rounds,
            rule: LegitimacyRule::default(),
            stride: None,
            checkpoints: Vec::new(),
            process: ProcessKind::Base,
            stop_when_covered: false,
        }
    }

    pub fn rule(mut self, rule: LegitimacyRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn stride(mut self, stride: u64) -> Self {
        self.stride = Some(stride);
        self
    }

    pub fn checkpoints(mut self, rounds: impl IntoIterator<Item = u64>) -> Self {
        self.checkpoints = rounds.into_iter().collect();
        self
    }

    pub fn dominating(mut self) -> Self {
        self.process = ProcessKind::Dominating;
        self
    }

    pub fn stop_when_covered(mut self) -> Self {
        self.stop_when_covered = true;
        self
    }
}

/// Apply `options.rounds` rounds to `config`, streaming metrics into a
/// [`RunRecord`].
pub fn run(
    config: &mut Configuration,
    graph: &Graph,
    strategy: Strategy,
    options: &RunOptions,
    observers: &mut [&mut dyn Observer],
    streams: &mut Streams,
) -> Result<RunRecord> {
    run_engine(config, graph, strategy, options, None, observers, streams)
}

/// Shared loop for plain and faulty runs. A fault triggered at round `t`
/// (for `t < rounds`) re-assigns balls before the configuration of round `t`
/// is observed and forwarded.
pub(crate) fn run_engine(
    config: &mut Configuration,
    graph: &Graph,
    strategy: Strategy,
    options: &RunOptions,
    schedule: Option<&FaultSchedule>,
    observers: &mut [&mut dyn Observer],
    streams: &mut Streams,
) -> Result<RunRecord> {
    if !matches!(options.process, ProcessKind::Base | ProcessKind::Dominating) {
        return Err(Error::Config(format!(
            "run drives base or dominating processes, not {}",
            options.process
        )));
    }
    if config.n() != graph.n() {
        return Err(Error::Precondition(format!(
            "configuration has {} nodes, graph has {}",
            config.n(),
            graph.n()
        )));
    }
    if options.stop_when_covered && !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let start = config.round();
    let mut builder = RecordBuilder::new(
        options.process,
        streams.seed(),
        graph.n(),
        config.ball_count(),
        options.rule,
        options.rounds,
        options.stride,
        &options.checkpoints,
    )?;

    let fault_at =
        |round: u64, config: &mut Configuration, streams: &mut Streams| -> Result<bool> {
            match schedule {
                Some(s) if round < options.rounds && s.fires(round, &mut streams.fault_trigger) => {
                    apply_fault(config, &s.policy, streams)?;
                    Ok(true)
                }
                _ => Ok(false),
            }
        };

    let faulty = fault_at(0, config, streams)?;
    builder.observe(0, config.loads(), faulty, 0);
    let mut stop = notify(observers, config, &[], 0)?;
    let mut t = 0;
    while t < options.rounds && !stop {
        if options.process == ProcessKind::Dominating {
            config.fill_empty();
        }
        let forwarded = step(config, graph, strategy, streams).len() as u64;
        t += 1;
        let faulty = fault_at(t, config, streams)?;
        builder.observe(t, config.loads(), faulty, forwarded);
        let moves = config.last_moves().to_vec();
        stop = notify(observers, config, &moves, t)?;
        if options.stop_when_covered && config.all_covered() {
            stop = true;
        }
    }
    debug_assert_eq!(config.round(), start + t);
    Ok(builder.finish(t, config.ball_count(), Some(config)))
}

fn notify(
    observers: &mut [&mut dyn Observer],
    config: &Configuration,
    moves: &[Move],
    round: u64,
) -> Result<bool> {
    let mut stop = false;
    for obs in observers.iter_mut() {
        match obs.observe(config, moves) {
            Ok(Flow::Stop) => stop = true,
            Ok(Flow::Continue) => {}
            Err(message) => return Err(Error::Observer { round, message }),
        }
    }
    Ok(stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{convergence_time, Rounds, RuleForm};
    use crate::process::{Mode, Placement};

    #[test]
    fn zero_rounds_is_initial_snapshot() {
        let g = Graph::complete(4).unwrap();
        let mut s = Streams::from_seed(1);
        let mut c =
            Configuration::new(&g, 4, &Placement::OnePerNode, Mode::Anonymous, &mut s).unwrap();
        let rec = run(
            &mut c,
            &g,
            Strategy::Fifo,
            &RunOptions::new(0),
            &mut [],
            &mut s,
        )
        .unwrap();
        assert_eq!(rec.samples.len(), 1);
        assert_eq!(rec.samples[0].round, 0);
        assert_eq!(rec.rounds_run, 0);
    }

    #[test]
    fn k2_two_balls_in_one_node() {
        let g = Graph::complete(2).unwrap();
        let mut s = Streams::from_seed(1);
        let mut c = Configuration::from_loads(vec![2, 0], Mode::Anonymous);
        let rule = LegitimacyRule::new(1.0, RuleForm::Balanced).unwrap();
        let rec = run(
            &mut c,
            &g,
            Strategy::Fifo,
            &RunOptions::new(1).rule(rule),
            &mut [],
            &mut s,
        )
        .unwrap();
        assert_eq!(c.loads(), &[1, 1]);
        assert_eq!(convergence_time(&rec), Rounds::Observed(1));
    }

    #[test]
    fn conservation_and_one_out_rule() {
        let g = Graph::complete(8).unwrap();
        for strategy in [Strategy::Fifo, Strategy::Lifo, Strategy::UniformRandom] {
            let mut s = Streams::from_seed(5);
            let mut c =
                Configuration::new(&g, 8, &Placement::OnePerNode, Mode::Traced, &mut s).unwrap();
            let mut prev = c.loads().to_vec();
            let mut check = |c: &Configuration, moves: &[Move]| {
                if c.loads().iter().sum::<u32>() != 8 {
                    return Err("ball lost".to_string());
                }
                if c.round() > 0 {
                    let mut sources: Vec<u32> = moves.iter().map(|m| m.source).collect();
                    sources.sort_unstable();
                    let nonempty: Vec<u32> = (0..8).filter(|&v| prev[v as usize] > 0).collect();
                    if sources != nonempty {
                        return Err("one-out rule violated".to_string());
                    }
                }
                prev = c.loads().to_vec();
                Ok(Flow::Continue)
            };
            run(
                &mut c,
                &g,
                strategy,
                &RunOptions::new(1000),
                &mut [&mut check],
                &mut s,
            )
            .unwrap();
        }
    }

    #[test]
    fn observer_failure_carries_round() {
        let g = Graph::complete(3).unwrap();
        let mut s = Streams::from_seed(1);
        let mut c = Configuration::from_loads(vec![1, 1, 1], Mode::Anonymous);
        let mut fail = |c: &Configuration, _: &[Move]| {
            if c.round() == 4 {
                Err("boom".to_string())
            } else {
                Ok(Flow::Continue)
            }
        };
        match run(
            &mut c,
            &g,
            Strategy::Fifo,
            &RunOptions::new(10),
            &mut [&mut fail],
            &mut s,
        ) {
            Err(Error::Observer { round: 4, message }) => assert_eq!(message, "boom"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn observer_can_stop_early() {
        let g = Graph::complete(3).unwrap();
        let mut s = Streams::from_seed(1);
        let mut c = Configuration::from_loads(vec![1, 1, 1], Mode::Anonymous);
        let mut stop = |c: &Configuration, _: &[Move]| {
            Ok(if c.round() == 3 {
                Flow::Stop
            } else {
                Flow::Continue
            })
        };
        let rec = run(
            &mut c,
            &g,
            Strategy::Fifo,
            &RunOptions::new(10),
            &mut [&mut stop],
            &mut s,
        )
        .unwrap();
        assert_eq!(rec.rounds_run, 3);
        assert_eq!(c.round(), 3);
    }

    #[test]
    fn stop_when_covered() {
        let g = Graph::complete(4).unwrap();
        let mut s = Streams::from_seed(2);
        let mut c =
            Configuration::new(&g, 4, &Placement::OnePerNode, Mode::Traced, &mut s).unwrap();
        let rec = run(
            &mut c,
            &g,
            Strategy::Fifo,
            &RunOptions::new(100_000).stop_when_covered(),
            &mut [],
            &mut s,
        )
        .unwrap();
        assert!(c.all_covered());
        assert!(rec.rounds_run < 100_000);
        let cover = crate::metrics::parallel_cover_time(&rec).unwrap();
        assert_eq!(cover, Rounds::Observed(rec.rounds_run));
    }
}
