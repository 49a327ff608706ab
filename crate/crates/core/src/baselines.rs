//! Reference processes: memoryless re-assignment, the dominating process
//! that refills empty bins, and the single-ball walk.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{LegitimacyRule, RecordBuilder, RunRecord};
use crate::process::{step, Configuration, Move, ProcessKind, Strategy};
use crate::rng::{below, Streams};

/// Throw `m` balls independently and uniformly into `n` bins.
pub fn memoryless_step<R: rand::RngCore + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<u32> {
    let mut loads = vec![0u32; n];
    memoryless_into(&mut loads, m, rng);
    loads
}

fn memoryless_into<R: rand::RngCore + ?Sized>(loads: &mut [u32], m: usize, rng: &mut R) {
    loads.fill(0);
    let n = loads.len() as u32;
    for _ in 0..m {
        loads[below(rng, n) as usize] += 1;
    }
}

/// Memoryless process over `rounds` rounds. Round 0 is already a random
/// throw; draws come from `streams.destination`.
pub fn run_memoryless(
    n: usize,
    m: usize,
    rounds: u64,
    rule: LegitimacyRule,
    stride: Option<u64>,
    streams: &mut Streams,
) -> Result<RunRecord> {
    if n == 0 || m == 0 {
        return Err(Error::Precondition(
            "memoryless process needs m, n >= 1".into(),
        ));
    }
    let mut builder = RecordBuilder::new(
        ProcessKind::Memoryless,
        streams.seed(),
        n,
        m as u64,
        rule,
        rounds,
        stride,
        &[],
    )?;
    let mut loads = vec![0u32; n];
    for t in 0..=rounds {
        memoryless_into(&mut loads, m, &mut streams.destination);
        builder.observe(t, &loads, false, if t == 0 { 0 } else { m as u64 });
    }
    Ok(builder.finish(rounds, m as u64, None))
}

/// One round of the dominating process: a fresh ball enters every empty
/// node, then the standard round runs.
pub fn dominating_step<'c>(
    config: &'c mut Configuration,
    graph: &Graph,
    strategy: Strategy,
    streams: &mut Streams,
) -> &'c [Move] {
    config.fill_empty();
    step(config, graph, strategy, streams)
}

/// Rounds until one undelayed walker starting at `start` has visited every
/// node. Uses the same neighbor sampler as the main process.
pub fn single_ball_cover_time(graph: &Graph, start: usize, streams: &mut Streams) -> Result<u64> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    if start >= graph.n() {
        return Err(Error::Precondition(format!(
            "start node {start} out of range"
        )));
    }
    let n = graph.n();
    let mut visited = vec![false; n];
    visited[start] = true;
    let mut remaining = n - 1;
    let mut at = start;
    let mut rounds = 0;
    while remaining > 0 {
        at = graph.sample_neighbor(at, &mut streams.destination);
        rounds += 1;
        if !visited[at] {
            visited[at] = true;
            remaining -= 1;
        }
    }
    Ok(rounds)
}

/// Exact mean cover time of a uniform walk on the complete graph `K_n`:
/// `(n - 1) * H(n - 1)`.
pub fn coupon_collector_mean(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition(format!("need n >= 2, got {n}")));
    }
    let k = n - 1;
    let harmonic: f64 = (1..=k).rev().map(|i| 1.0 / i as f64).sum();
    Ok(k as f64 * harmonic)
}
