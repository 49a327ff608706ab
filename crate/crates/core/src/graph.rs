//! Topologies the process runs on.
//!
//! Complete graphs and rings use O(1) neighbor formulas so that runs with a
//! million nodes need no adjacency storage. Random-regular and custom graphs
//! keep a compressed adjacency list.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{below, shuffle};

/// Upper bound on pairing-model restarts before giving up.
pub const MAX_PAIRING_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Complete,
    Ring,
    RandomRegular(usize),
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Complete => write!(f, "complete"),
            TopologyKind::Ring => write!(f, "ring"),
            TopologyKind::RandomRegular(d) => write!(f, "regular:{d}"),
            TopologyKind::Custom => write!(f, "custom"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Neighbors {
    Implicit,
    /// CSR layout: neighbors of `v` are `targets[offsets[v]..offsets[v + 1]]`.
    Adjacency {
        offsets: Vec<usize>,
        targets: Vec<u32>,
    },
}

/// An undirected simple graph with every degree at least one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    kind: TopologyKind,
    neighbors: Neighbors,
    connected: bool,
}

impl Graph {
    pub fn complete(n: usize) -> Result<Graph> {
        if n < 2 {
            return Err(Error::InvalidTopology(format!(
                "complete graph needs n >= 2, got {n}"
            )));
        }
        check_index_range(n)?;
        Ok(Graph {
            n,
            kind: TopologyKind::Complete,
            neighbors: Neighbors::Implicit,
            connected: true,
        })
    }

    pub fn ring(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::InvalidTopology(format!(
                "ring needs n >= 3, got {n}"
            )));
        }
        check_index_range(n)?;
        Ok(Graph {
            n,
            kind: TopologyKind::Ring,
            neighbors: Neighbors::Implicit,
            connected: true,
        })
    }

    /// Simple `d`-regular graph from the pairing model, restarting from
    /// scratch whenever a self-loop or parallel edge appears.
    pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
        if d == 0 || d >= n || (n * d) % 2 == 1 {
            return Err(Error::InvalidTopology(format!(
                "random regular graph needs 1 <= d < n and n*d even, got n={n}, d={d}"
            )));
        }
        check_index_range(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stubs: Vec<u32> = Vec::with_capacity(n * d);
        for _ in 0..MAX_PAIRING_ATTEMPTS {
            stubs.clear();
            for v in 0..n as u32 {
                stubs.extend(std::iter::repeat(v).take(d));
            }
            shuffle(&mut rng, &mut stubs);
            if let Some(edges) = simple_pairs(&stubs) {
                return Ok(Graph::from_edges(n, TopologyKind::RandomRegular(d), &edges));
            }
        }
        Err(Error::GenerationFailed {
            n,
            d,
            attempts: MAX_PAIRING_ATTEMPTS,
        })
    }

    /// Graph from an explicit edge list. `n` is one more than the largest
    /// node index mentioned.
    pub fn custom(edges: &[(u32, u32)]) -> Result<Graph> {
        let n = edges
            .iter()
            .map(|&(u, v)| u.max(v) as usize + 1)
            .max()
            .unwrap_or(0);
        if n < 2 {
            return Err(Error::InvalidTopology(
                "custom graph needs at least one edge".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == v {
                return Err(Error::InvalidTopology(format!("self-loop at node {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidTopology(format!("duplicate edge {u} {v}")));
            }
        }
        let g = Graph::from_edges(n, TopologyKind::Custom, edges);
        if let Some(v) = (0..n).find(|&v| g.degree(v) == 0) {
            return Err(Error::InvalidTopology(format!("node {v} is isolated")));
        }
        Ok(g)
    }

    /// Parse a whitespace-separated `u v` edge list. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::EdgeList {
                    line,
                    message: format!("expected two node indices, found {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<u32>().map_err(|_| Error::EdgeList {
                    line,
                    message: format!("invalid node index {s:?}"),
                })
            };
            let (u, v) = (parse(fields[0])?, parse(fields[1])?);
            if u == v {
                return Err(Error::EdgeList {
                    line,
                    message: format!("self-loop at node {u}"),
                });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::EdgeList {
                    line,
                    message: format!("duplicate edge {u} {v}"),
                });
            }
            edges.push((u, v));
        }
        Graph::custom(&edges)
    }

    pub fn load_edge_list(path: &Path) -> Result<Graph> {
        let text = std::fs::read_to_string(path)?;
        Graph::parse_edge_list(&text)
    }

    fn from_edges(n: usize, kind: TopologyKind, edges: &[(u32, u32)]) -> Graph {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            targets[fill[u as usize]] = v;
            fill[u as usize] += 1;
            targets[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let mut g = Graph {
            n,
            kind,
            neighbors: Neighbors::Adjacency { offsets, targets },
            connected: false,
        };
        g.connected = g.bfs_reachable(0) == n;
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &TopologyKind {
        &self.kind
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn degree(&self, v: usize) -> usize {
        match (&self.kind, &self.neighbors) {
            (TopologyKind::Complete, _) => self.n - 1,
            (TopologyKind::Ring, _) => 2,
            (_, Neighbors::Adjacency { offsets, .. }) => offsets[v + 1] - offsets[v],
            (_, Neighbors::Implicit) => unreachable!("implicit adjacency is complete/ring only"),
        }
    }

    pub fn neighbors(&self, v: usize) -> Vec<u32> {
        let n = self.n as u32;
        let v32 = v as u32;
        match (&self.kind, &self.neighbors) {
            (TopologyKind::Complete, _) => (0..n).filter(|&u| u != v32).collect(),
            (TopologyKind::Ring, _) => {
                let mut out = vec![(v32 + n - 1) % n, (v32 + 1) % n];
                out.sort_unstable();
                out.dedup();
                out
            }
            (_, Neighbors::Adjacency { offsets, targets }) => {
                targets[offsets[v]..offsets[v + 1]].to_vec()
            }
            (_, Neighbors::Implicit) => unreachable!(),
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u == v || u >= self.n || v >= self.n {
            return false;
        }
        match (&self.kind, &self.neighbors) {
            (TopologyKind::Complete, _) => true,
            (TopologyKind::Ring, _) => (u + 1) % self.n == v || (v + 1) % self.n == u,
            (_, Neighbors::Adjacency { offsets, targets }) => targets[offsets[u]..offsets[u + 1]]
                .binary_search(&(v as u32))
                .is_ok(),
            (_, Neighbors::Implicit) => unreachable!(),
        }
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    /// Sorted edge list with `u < v`.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.n {
            for v in self.neighbors(u) {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }

    /// Uniform neighbor of `v`. Consumes exactly one 64-bit draw from `rng`
    /// on every topology.
    #[inline]
    pub fn sample_neighbor<R: RngCore + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        debug_assert!(v < self.n);
        match (&self.kind, &self.neighbors) {
            (TopologyKind::Complete, _) => {
                let u = below(rng, (self.n - 1) as u32) as usize;
                if u >= v {
                    u + 1
                } else {
                    u
                }
            }
            (TopologyKind::Ring, _) => {
                if below(rng, 2) == 0 {
                    (v + self.n - 1) % self.n
                } else {
                    (v + 1) % self.n
                }
            }
            (_, Neighbors::Adjacency { offsets, targets }) => {
                let lo = offsets[v];
                let deg = offsets[v + 1] - lo;
                targets[lo + below(rng, deg as u32) as usize] as usize
            }
            (_, Neighbors::Implicit) => unreachable!(),
        }
    }

    fn bfs_reachable(&self, start: usize) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for w in self.neighbors(u) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count
    }
}

fn check_index_range(n: usize) -> Result<()> {
    if n > u32::MAX as usize {
        return Err(Error::InvalidTopology(format!(
            "n={n} exceeds u32 node indices"
        )));
    }
    Ok(())
}

/// Pair consecutive stubs; `None` on a self-loop or repeated edge.
fn simple_pairs(stubs: &[u32]) -> Option<Vec<(u32, u32)>> {
    let mut seen = HashSet::with_capacity(stubs.len() / 2);
    let mut edges = Vec::with_capacity(stubs.len() / 2);
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v || !seen.insert((u.min(v), u.max(v))) {
            return None;
        }
        edges.push((u, v));
    }
    Some(edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reachable_oracle(edges: &[(u32, u32)], n: usize) -> bool {
        // Repeated relaxation, independent of the BFS used by Graph.
        let mut reach = vec![false; n];
        reach[0] = true;
        loop {
            let mut changed = false;
            for &(u, v) in edges {
                let (u, v) = (u as usize, v as usize);
                if reach[u] != reach[v] {
                    reach[u] = true;
                    reach[v] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        reach.iter().all(|&r| r)
    }

    #[test]
    fn complete_graph_basics() {
        let k2 = Graph::complete(2).unwrap();
        assert_eq!(k2.neighbors(0), vec![1]);
        let k5 = Graph::complete(5).unwrap();
        assert!((0..5).all(|v| k5.degree(v) == 4));
        assert!(matches!(Graph::complete(1), Err(Error::InvalidTopology(_))));
    }

    #[test]
    fn ring_basics() {
        let tri = Graph::ring(3).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(tri.has_edge(u, v), u != v);
            }
        }
        assert_eq!(Graph::ring(4).unwrap().neighbors(0), vec![1, 3]);
        assert!(matches!(Graph::ring(2), Err(Error::InvalidTopology(_))));
    }

    #[test]
    fn random_regular_on_four_nodes_is_k4() {
        let g = Graph::random_regular(4, 3, 11).unwrap();
        assert_eq!(g.edges(), Graph::complete(4).unwrap().edges());
    }

    #[test]
    fn random_regular_connectivity_matches_oracle() {
        for seed in 0..20 {
            let g = Graph::random_regular(6, 2, seed).unwrap();
            assert!((0..6).all(|v| g.degree(v) == 2));
            assert_eq!(
                g.is_connected(),
                reachable_oracle(&g.edges(), 6),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn random_regular_rejects_bad_parameters() {
        assert!(matches!(
            Graph::random_regular(5, 3, 0),
            Err(Error::InvalidTopology(_))
        ));
        assert!(matches!(
            Graph::random_regular(4, 4, 0),
            Err(Error::InvalidTopology(_))
        ));
    }

    #[test]
    fn random_regular_is_deterministic() {
        let a = Graph::random_regular(100, 4, 99).unwrap();
        let b = Graph::random_regular(100, 4, 99).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.edge_count(), 200);
    }

    #[test]
    fn k2_sampling_is_forced() {
        let g = Graph::complete(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| g.sample_neighbor(0, &mut rng) == 1));
    }

    #[test]
    fn k3_never_samples_self() {
        let g = Graph::complete(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..1000).all(|_| g.sample_neighbor(2, &mut rng) < 2));
    }

    #[test]
    fn ring_sampling_is_uniform() {
        let g = Graph::ring(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 100_000;
        let ones = (0..trials)
            .filter(|_| match g.sample_neighbor(0, &mut rng) {
                1 => true,
                3 => false,
                other => panic!("non-neighbor {other}"),
            })
            .count();
        let freq = ones as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.01, "{freq}");
        // chi-square with one degree of freedom, 99.9% critical value 10.83
        let expected = trials as f64 / 2.0;
        let chi = (ones as f64 - expected).powi(2) / expected * 2.0;
        assert!(chi < 10.83, "chi-square {chi}");
    }

    #[test]
    fn sampling_consumes_one_draw() {
        let graphs = [
            Graph::complete(7).unwrap(),
            Graph::ring(7).unwrap(),
            Graph::random_regular(8, 3, 1).unwrap(),
        ];
        for g in &graphs {
            let mut a = ChaCha8Rng::seed_from_u64(9);
            let mut b = ChaCha8Rng::seed_from_u64(9);
            g.sample_neighbor(3, &mut a);
            b.next_u64();
            assert_eq!(a.next_u64(), b.next_u64(), "{}", g.kind());
        }
    }

    #[test]
    fn samples_are_true_neighbors() {
        let graphs = [
            Graph::complete(9).unwrap(),
            Graph::ring(9).unwrap(),
            Graph::random_regular(10, 3, 4).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in &graphs {
            for i in 0..10_000 {
                let v = i % g.n();
                let u = g.sample_neighbor(v, &mut rng);
                assert!(g.has_edge(v, u));
            }
        }
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::parse_edge_list("# square\n0 1\n1 2\n\n2 3\n3 0\n").unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.kind(), &TopologyKind::Custom);
        assert!(g.is_connected());
        assert_eq!(g.neighbors(0), vec![1, 3]);

        match Graph::parse_edge_list("0 1\n1 2\n2 1\n") {
            Err(Error::EdgeList { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match Graph::parse_edge_list("0 1\n2 2\n") {
            Err(Error::EdgeList { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match Graph::parse_edge_list("0 1 5\n") {
            Err(Error::EdgeList { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(!Graph::parse_edge_list("0 1\n2 3\n").unwrap().is_connected());
        assert!(matches!(
            Graph::parse_edge_list("0 2\n"),
            Err(Error::InvalidTopology(_))
        ));
    }

    #[test]
    fn degree_sum_is_twice_edges() {
        for g in [
            Graph::complete(6).unwrap(),
            Graph::ring(6).unwrap(),
            Graph::random_regular(12, 5, 3).unwrap(),
        ] {
            let sum: usize = (0..g.n()).map(|v| g.degree(v)).sum();
            assert_eq!(sum, 2 * g.edges().len());
        }
    }
}
