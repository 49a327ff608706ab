//! The repeated balls-into-bins engine.
//!
//! A round has three phases: every non-empty node removes one ball chosen by
//! the [`Strategy`]; each removed ball draws a destination among its source's
//! neighbors; arrivals are appended to destination queues. A ball that
//! arrives in round `t` can move again no earlier than round `t + 1`.

mod run;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{below, shuffle, Streams};

pub(crate) use run::run_engine;
pub use run::{run, Flow, Observer, ProcessKind, RunOptions};

pub type BallId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Fifo,
    Lifo,
    UniformRandom,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Fifo => "fifo",
            Strategy::Lifo => "lifo",
            Strategy::UniformRandom => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fifo" => Ok(Strategy::Fifo),
            "lifo" => Ok(Strategy::Lifo),
            "random" | "uniform_random" => Ok(Strategy::UniformRandom),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Order in which simultaneous arrivals join a destination queue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ArrivalOrder {
    /// Uniformly random order, drawn from stream B.
    #[default]
    Shuffled,
    /// Ascending source index; deterministic, for debugging.
    SourceIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Anonymous,
    Traced,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Placement {
    OnePerNode,
    AllInOne(usize),
    UniformRandom,
    Custom(Vec<u32>),
}

impl Placement {
    /// Per-node ball counts for `m` balls on `n` nodes.
    ///
    /// `UniformRandom` draws one node per ball, in ball order, from `rng`.
    pub fn counts<R: RngCore + ?Sized>(&self, n: usize, m: usize, rng: &mut R) -> Result<Vec<u32>> {
        let mut counts = vec![0u32; n];
        match self {
            Placement::OnePerNode => {
                if m != n {
                    return Err(Error::Placement(format!(
                        "one-per-node needs m = n, got m={m}, n={n}"
                    )));
                }
                counts.fill(1);
            }
            Placement::AllInOne(target) => {
                if *target >= n {
                    return Err(Error::Placement(format!(
                        "target node {target} out of range for n={n}"
                    )));
                }
                counts[*target] = m as u32;
            }
            Placement::UniformRandom => {
                for _ in 0..m {
                    counts[below(rng, n as u32) as usize] += 1;
                }
            }
            Placement::Custom(custom) => {
                if custom.len() != n {
                    return Err(Error::Placement(format!(
                        "expected {n} counts, got {}",
                        custom.len()
                    )));
                }
                let total: u64 = custom.iter().map(|&c| c as u64).sum();
                if total != m as u64 {
                    return Err(Error::Placement(format!(
                        "counts sum to {total}, expected m={m}"
                    )));
                }
                counts.copy_from_slice(custom);
            }
        }
        Ok(counts)
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::OnePerNode => write!(f, "spread"),
            Placement::AllInOne(t) => write!(f, "point:{t}"),
            Placement::UniformRandom => write!(f, "random"),
            Placement::Custom(c) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                write!(f, "counts:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Placement {
    type Err = Error;

    /// `spread`, `point:IDX`, `random`, `counts:a,b,...`, or `file:PATH`
    /// (whitespace-separated counts).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("spread" | "one_per_node", None) => Ok(Placement::OnePerNode),
            ("random" | "uniform_random", None) => Ok(Placement::UniformRandom),
            ("point" | "all_in_one", Some(idx)) => idx
                .trim()
                .parse()
                .map(Placement::AllInOne)
                .map_err(|_| Error::Placement(format!("invalid node index {idx:?}"))),
            ("counts", Some(list)) => parse_counts(list, ',').map(Placement::Custom),
            ("file", Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                parse_counts(&text, ' ').map(Placement::Custom)
            }
            _ => Err(Error::Placement(format!("unknown placement {s:?}"))),
        }
    }
}

pub(crate) fn parse_counts(text: &str, sep: char) -> Result<Vec<u32>> {
    let pieces: Vec<&str> = if sep == ' ' {
        text.split_whitespace().collect()
    } else {
        text.split(sep).map(str::trim).collect()
    };
    pieces
        .into_iter()
        .map(|p| {
            p.parse::<u32>()
                .map_err(|_| Error::Placement(format!("invalid count {p:?}")))
        })
        .collect()
}

/// Per-ball walk history, kept only in traced mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BallTrace {
    visited: Vec<u64>,
    visited_count: u32,
    progress: u64,
    cover_round: Option<u64>,
    forward_log: Option<Vec<u64>>,
}

impl BallTrace {
    fn new(n: usize, start: usize, log_forwards: bool) -> BallTrace {
        let mut trace = BallTrace {
            visited: vec![0; n.div_ceil(64)],
            visited_count: 0,
            progress: 0,
            cover_round: None,
            forward_log: log_forwards.then(Vec::new),
        };
        trace.visit(start, n, 0);
        trace
    }

    #[inline]
    fn visit(&mut self, node: usize, n: usize, round: u64) {
        let (word, bit) = (node / 64, 1u64 << (node % 64));
        if self.visited[word] & bit == 0 {
            self.visited[word] |= bit;
            self.visited_count += 1;
            if self.visited_count as usize == n {
                self.cover_round = Some(round);
            }
        }
    }

    pub fn has_visited(&self, node: usize) -> bool {
        self.visited
            .get(node / 64)
            .is_some_and(|w| w & (1u64 << (node % 64)) != 0)
    }

    pub fn visited_count(&self) -> usize {
        self.visited_count as usize
    }

    /// Total forwarding events since round 0.
    pub fn progress(&self) -> u64 {
        self.progress
    }

    pub fn cover_round(&self) -> Option<u64> {
        self.cover_round
    }

    /// Rounds in which the ball was forwarded, if logging was enabled.
    pub fn forward_log(&self) -> Option<&[u64]> {
        self.forward_log.as_deref()
    }
}

/// One forwarding event of a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Move {
    pub source: u32,
    pub destination: u32,
    /// Present in traced mode only.
    pub ball: Option<BallId>,
}

#[derive(Clone, Debug)]
struct Traced {
    queues: Vec<VecDeque<BallId>>,
    traces: Vec<BallTrace>,
    covered: usize,
}

/// Process state: per-node queue sizes, plus ball queues and histories in
/// traced mode.
#[derive(Clone, Debug)]
pub struct Configuration {
    round: u64,
    loads: Vec<u32>,
    balls: u64,
    traced: Option<Traced>,
    arrival: ArrivalOrder,
    moves: Vec<Move>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.round == other.round
            && self.loads == other.loads
            && self.balls == other.balls
            && match (&self.traced, &other.traced) {
                (Some(a), Some(b)) => a.queues == b.queues && a.traces == b.traces,
                (None, None) => true,
                _ => false,
            }
    }
}

impl Configuration {
    /// Place `m` balls on `graph` at round 0.
    ///
    /// In traced mode ball identifiers are handed out in ascending order by
    /// node index. Placement randomness comes from `streams.placement`.
    pub fn new(
        graph: &Graph,
        m: usize,
        placement: &Placement,
        mode: Mode,
        streams: &mut Streams,
    ) -> Result<Configuration> {
        if m == 0 {
            return Err(Error::Placement("need at least one ball".into()));
        }
        if m > u32::MAX as usize {
            return Err(Error::Placement(format!("m={m} exceeds u32 ball ids")));
        }
        let loads = placement.counts(graph.n(), m, &mut streams.placement)?;
        Ok(Configuration::from_loads(loads, mode))
    }

    /// Configuration with the given queue sizes, ids assigned by node index.
    pub fn from_loads(loads: Vec<u32>, mode: Mode) -> Configuration {
        let balls: u64 = loads.iter().map(|&l| l as u64).sum();
        let traced = match mode {
            Mode::Anonymous => None,
            Mode::Traced => {
                let n = loads.len();
                let mut queues = Vec::with_capacity(n);
                let mut traces = Vec::with_capacity(balls as usize);
                let mut next: BallId = 0;
                for (v, &l) in loads.iter().enumerate() {
                    queues.push((next..next + l).collect::<VecDeque<_>>());
                    for _ in 0..l {
                        traces.push(BallTrace::new(n, v, false));
                    }
                    next += l;
                }
                Some(Traced {
                    queues,
                    traces,
                    covered: 0,
                })
            }
        };
        Configuration {
            round: 0,
            loads,
            balls,
            traced,
            arrival: ArrivalOrder::default(),
            moves: Vec::new(),
        }
    }

    /// Traced configuration with explicit queue contents (front = oldest).
    /// Identifiers must be exactly `0..m`.
    pub fn from_queues(queues: Vec<Vec<BallId>>) -> Result<Configuration> {
        let n = queues.len();
        let m: usize = queues.iter().map(Vec::len).sum();
        let mut start = vec![usize::MAX; m];
        for (v, q) in queues.iter().enumerate() {
            for &b in q {
                let slot = start
                    .get_mut(b as usize)
                    .ok_or_else(|| Error::Placement(format!("ball id {b} out of range 0..{m}")))?;
                if *slot != usize::MAX {
                    return Err(Error::Placement(format!("ball id {b} appears twice")));
                }
                *slot = v;
            }
        }
        Ok(Configuration {
            round: 0,
            loads: queues.iter().map(|q| q.len() as u32).collect(),
            balls: m as u64,
            traced: Some(Traced {
                queues: queues.into_iter().map(VecDeque::from).collect(),
                traces: start.iter().map(|&v| BallTrace::new(n, v, false)).collect(),
                covered: 0,
            }),
            arrival: ArrivalOrder::default(),
            moves: Vec::new(),
        })
    }

    pub fn with_arrival_order(mut self, order: ArrivalOrder) -> Self {
        self.arrival = order;
        self
    }

    /// Record the round of every forwarding event per ball, enabling
    /// windowed progress queries. Costs one `u64` per event.
    pub fn with_forward_log(mut self) -> Self {
        if let Some(t) = &mut self.traced {
            for trace in &mut t.traces {
                trace.forward_log.get_or_insert_with(Vec::new);
            }
        }
        self
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    /// Current number of balls in the system.
    pub fn ball_count(&self) -> u64 {
        self.balls
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn mode(&self) -> Mode {
        if self.traced.is_some() {
            Mode::Traced
        } else {
            Mode::Anonymous
        }
    }

    pub fn queues(&self) -> Option<&[VecDeque<BallId>]> {
        self.traced.as_ref().map(|t| t.queues.as_slice())
    }

    /// Histories of the balls present at construction. Balls injected later
    /// (dominating process) are not traced.
    pub fn traces(&self) -> Option<&[BallTrace]> {
        self.traced.as_ref().map(|t| t.traces.as_slice())
    }

    /// True once every traced ball has visited every node.
    pub fn all_covered(&self) -> bool {
        self.traced
            .as_ref()
            .is_some_and(|t| t.covered == t.traces.len())
    }

    /// Moves of the most recent round, in arrival order.
    pub fn last_moves(&self) -> &[Move] {
        &self.moves
    }

    /// Add one fresh ball to every empty node. Returns how many were added.
    pub(crate) fn fill_empty(&mut self) -> u64 {
        let mut added = 0;
        for v in 0..self.loads.len() {
            if self.loads[v] == 0 {
                self.loads[v] = 1;
                if let Some(t) = &mut self.traced {
                    t.queues[v].push_back((self.balls + added) as BallId);
                }
                added += 1;
            }
        }
        self.balls += added;
        added
    }

    /// Replace the placement of all balls. `node_of[i]` is the new node of
    /// the `i`-th smallest ball id; histories are kept and the new node
    /// counts as visited.
    pub(crate) fn relocate(&mut self, node_of: &[u32]) {
        debug_assert_eq!(node_of.len() as u64, self.balls);
        let n = self.loads.len();
        self.loads.fill(0);
        for &v in node_of {
            self.loads[v as usize] += 1;
        }
        let round = self.round;
        if let Some(t) = &mut self.traced {
            let mut ids: Vec<BallId> = t.queues.iter_mut().flat_map(|q| q.drain(..)).collect();
            ids.sort_unstable();
            for (&b, &v) in ids.iter().zip(node_of) {
                t.queues[v as usize].push_back(b);
                if let Some(trace) = t.traces.get_mut(b as usize) {
                    let before = trace.cover_round.is_some();
                    trace.visit(v as usize, n, round);
                    if !before && trace.cover_round.is_some() {
                        t.covered += 1;
                    }
                }
            }
        }
    }

    fn check(&self, graph: &Graph) {
        assert_eq!(
            self.loads.len(),
            graph.n(),
            "configuration/graph size mismatch"
        );
    }
}

/// Advance one synchronous round and return its moves.
///
/// Destinations are drawn from `streams.destination`, one draw per non-empty
/// node in ascending node order, in both modes. Traced mode additionally uses
/// `streams.strategy` for random selection and arrival shuffling.
pub fn step<'c>(
    config: &'c mut Configuration,
    graph: &Graph,
    strategy: Strategy,
    streams: &mut Streams,
) -> &'c [Move] {
    config.check(graph);
    let n = config.loads.len();
    let Configuration {
        round,
        loads,
        traced,
        arrival,
        moves,
        ..
    } = config;
    moves.clear();

    match traced {
        None => {
            for v in 0..n {
                if loads[v] > 0 {
                    loads[v] -= 1;
                    let dest = graph.sample_neighbor(v, &mut streams.destination);
                    moves.push(Move {
                        source: v as u32,
                        destination: dest as u32,
                        ball: None,
                    });
                }
            }
            for mv in moves.iter() {
                loads[mv.destination as usize] += 1;
            }
        }
        Some(t) => {
            for v in 0..n {
                if loads[v] == 0 {
                    continue;
                }
                let queue = &mut t.queues[v];
                let ball = match strategy {
                    Strategy::Fifo => queue.pop_front(),
                    Strategy::Lifo => queue.pop_back(),
                    Strategy::UniformRandom => {
                        let idx = below(&mut streams.strategy, queue.len() as u32) as usize;
                        queue.swap_remove_back(idx)
                    }
                }
                .expect("queue length matches load");
                loads[v] -= 1;
                let dest = graph.sample_neighbor(v, &mut streams.destination);
                moves.push(Move {
                    source: v as u32,
                    destination: dest as u32,
                    ball: Some(ball),
                });
            }
            if *arrival == ArrivalOrder::Shuffled {
                shuffle(&mut streams.strategy, moves);
            }
            let next = *round + 1;
            for mv in moves.iter() {
                let dest = mv.destination as usize;
                let ball = mv.ball.expect("traced move");
                loads[dest] += 1;
                t.queues[dest].push_back(ball);
                if let Some(trace) = t.traces.get_mut(ball as usize) {
                    trace.progress += 1;
                    if let Some(log) = &mut trace.forward_log {
                        log.push(*round);
                    }
                    let before = trace.cover_round.is_some();
                    trace.visit(dest, n, next);
                    if !before && trace.cover_round.is_some() {
                        t.covered += 1;
                    }
                }
            }
        }
    }
    *round += 1;
    &config.moves
}
