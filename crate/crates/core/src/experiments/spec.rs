//! Experiment definitions and their plain-text (TOML) config format.
//!
//! ```toml
//! [stability]
//! topology = "complete"
//! n = [256, 1024]
//! m = "n"
//! placement = "spread"
//! rounds = "n^2"
//! repetitions = 20
//! seed = 1
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;

use crate::adversary::FaultSpec;
use crate::error::{Error, Result};
use crate::expr::NExpr;
use crate::graph::Graph;
use crate::metrics::{LegitimacyRule, RuleForm};
use crate::process::{Placement, ProcessKind, Strategy};

#[derive(Clone, Debug, PartialEq)]
pub enum TopologySpec {
    Complete,
    Ring,
    Regular(usize),
    File(PathBuf),
}

impl TopologySpec {
    /// Build the graph for one cell. `seed` only matters for random-regular.
    pub fn build(&self, n: usize, seed: u64) -> Result<Graph> {
        match self {
            TopologySpec::Complete => Graph::complete(n),
            TopologySpec::Ring => Graph::ring(n),
            TopologySpec::Regular(d) => Graph::random_regular(n, *d, seed),
            TopologySpec::File(path) => {
                let g = Graph::load_edge_list(path)?;
                if g.n() != n {
                    return Err(Error::Config(format!(
                        "edge list {} has {} nodes, expected n={n}",
                        path.display(),
                        g.n()
                    )));
                }
                Ok(g)
            }
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Complete => write!(f, "complete"),
            TopologySpec::Ring => write!(f, "ring"),
            TopologySpec::Regular(d) => write!(f, "regular:{d}"),
            TopologySpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for TopologySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "complete" => Ok(TopologySpec::Complete),
            None if s == "ring" => Ok(TopologySpec::Ring),
            Some(("regular", d)) => d
                .trim()
                .parse()
                .map(TopologySpec::Regular)
                .map_err(|_| Error::Config(format!("invalid degree {d:?}"))),
            Some(("file", path)) if !path.is_empty() => Ok(TopologySpec::File(path.into())),
            _ => Err(Error::Config(format!("unknown topology {s:?}"))),
        }
    }
}

/// Ball count per `n`.
#[derive(Clone, Debug, PartialEq)]
pub enum MRule {
    EqualN,
    /// `n * ceil(log2 n)`
    NLogN,
    Explicit(Vec<u64>),
}

impl MRule {
    pub fn values(&self, n: usize) -> Vec<u64> {
        match self {
            MRule::EqualN => vec![n as u64],
            MRule::NLogN => vec![n as u64 * (n as f64).log2().ceil() as u64],
            MRule::Explicit(ms) => ms.clone(),
        }
    }
}

impl fmt::Display for MRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MRule::EqualN => write!(f, "n"),
            MRule::NLogN => write!(f, "nlogn"),
            MRule::Explicit(ms) => {
                let parts: Vec<String> = ms.iter().map(u64::to_string).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for MRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '*')
            .collect();
        match compact.to_ascii_lowercase().as_str() {
            "n" | "equal_n" => Ok(MRule::EqualN),
            "nlogn" | "n_log_n" | "nlog2n" => Ok(MRule::NLogN),
            list => list
                .split(',')
                .map(|x| {
                    x.parse::<u64>()
                        .ok()
                        .filter(|&m| m >= 1)
                        .ok_or_else(|| Error::Config(format!("invalid ball count {x:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(MRule::Explicit),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub description: Option<String>,
    pub topology: TopologySpec,
    pub n_values: Vec<usize>,
    pub m_rule: MRule,
    pub strategy: Strategy,
    pub placement: Placement,
    pub rule: LegitimacyRule,
    pub rounds: NExpr,
    pub repetitions: u64,
    pub seed: u64,
    /// Seeds are derived from this label instead of `id` when set, so two
    /// experiments can share seeds for paired comparisons.
    pub seed_label: Option<String>,
    pub faults: Option<FaultSpec>,
    pub trace: bool,
    pub process: ProcessKind,
    pub stop_when_covered: bool,
    pub checkpoints: Vec<u64>,
    pub stride: Option<u64>,
}

impl ExperimentSpec {
    pub fn new(id: impl Into<String>, n_values: Vec<usize>, rounds: NExpr) -> Self {
        ExperimentSpec {
            id: id.into(),
            description: None,
            topology: TopologySpec::Complete,
            n_values,
            m_rule: MRule::EqualN,
            strategy: Strategy::Fifo,
            placement: Placement::OnePerNode,
            rule: LegitimacyRule::default(),
            rounds,
            repetitions: 1,
            seed: 0,
            seed_label: None,
            faults: None,
            trace: false,
            process: ProcessKind::Base,
            stop_when_covered: false,
            checkpoints: Vec::new(),
            stride: None,
        }
    }

    pub fn seed_label(&self) -> &str {
        self.seed_label.as_deref().unwrap_or(&self.id)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("experiment {:?}: {msg}", self.id)));
        if self.id.is_empty() {
            return fail("empty id".into());
        }
        if self.repetitions < 1 {
            return fail("repetitions must be at least 1".into());
        }
        if self.n_values.is_empty() {
            return fail("no n values".into());
        }
        if self.stop_when_covered && !self.trace {
            return fail("stop_when_covered requires trace = true".into());
        }
        for &n in &self.n_values {
            if n < 2 {
                return fail(format!("n={n} is below 2"));
            }
            if let Some(f) = &self.faults {
                f.resolve(n)?;
            }
        }
        Ok(())
    }

    /// Human-readable `key = value` dump of every resolved field.
    pub fn resolved(&self) -> String {
        let ns: Vec<String> = self.n_values.iter().map(usize::to_string).collect();
        let cps: Vec<String> = self.checkpoints.iter().map(u64::to_string).collect();
        let mut out = format!("[{}]\n", self.id);
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("process", self.process.to_string());
        kv("topology", self.topology.to_string());
        kv("n", format!("[{}]", ns.join(", ")));
        kv("m", self.m_rule.to_string());
        kv("strategy", self.strategy.to_string());
        kv("placement", self.placement.to_string());
        kv("rule", self.rule.form.to_string());
        kv("alpha", self.rule.alpha.to_string());
        kv("rounds", self.rounds.to_string());
        kv("repetitions", self.repetitions.to_string());
        kv("seed", self.seed.to_string());
        kv("seed_label", self.seed_label().to_string());
        kv(
            "faults",
            self.faults
                .as_ref()
                .map_or("none".into(), |f| f.to_string()),
        );
        kv("trace", self.trace.to_string());
        kv("stop_when_covered", self.stop_when_covered.to_string());
        kv("checkpoints", format!("[{}]", cps.join(", ")));
        kv(
            "stride",
            self.stride.map_or("auto".into(), |s| s.to_string()),
        );
        out
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<toml::Value>),
    One(toml::Value),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    description: Option<String>,
    process: Option<String>,
    topology: Option<String>,
    n: OneOrMany,
    m: Option<OneOrMany>,
    strategy: Option<String>,
    placement: Option<String>,
    rule: Option<String>,
    alpha: Option<toml::Value>,
    rounds: Option<toml::Value>,
    repetitions: Option<u64>,
    seed: Option<u64>,
    seed_label: Option<String>,
    faults: Option<String>,
    trace: Option<bool>,
    stop_when_covered: Option<bool>,
    checkpoints: Option<Vec<u64>>,
    stride: Option<u64>,
}

fn scalar_string(v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        other => Err(Error::Config(format!(
            "expected a string or number, got {other}"
        ))),
    }
}

impl RawExperiment {
    fn into_spec(self, id: &str) -> Result<ExperimentSpec> {
        let n_values = match &self.n {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(vs) => vs.clone(),
        }
        .iter()
        .map(|v| match v {
            toml::Value::Integer(i) if *i >= 2 => Ok(*i as usize),
            other => Err(Error::Config(format!("invalid n value {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
        let m_rule = match &self.m {
            None => MRule::EqualN,
            Some(OneOrMany::One(v)) => scalar_string(v)?.parse()?,
            Some(OneOrMany::Many(vs)) => {
                let parts = vs.iter().map(scalar_string).collect::<Result<Vec<_>>>()?;
                MRule::from_str(&parts.join(","))?
            }
        };
        let form: RuleForm = self.rule.as_deref().unwrap_or("balanced").parse()?;
        let alpha = match &self.alpha {
            None => 4.0,
            Some(toml::Value::Integer(i)) => *i as f64,
            Some(toml::Value::Float(f)) => *f,
            Some(other) => return Err(Error::Config(format!("invalid alpha {other}"))),
        };
        let rounds: NExpr = match &self.rounds {
            None => NExpr::constant(0),
            Some(v) => scalar_string(v)?.parse()?,
        };
        let spec = ExperimentSpec {
            id: id.to_string(),
            description: self.description,
            topology: self.topology.as_deref().unwrap_or("complete").parse()?,
            n_values,
            m_rule,
            strategy: self.strategy.as_deref().unwrap_or("fifo").parse()?,
            placement: self.placement.as_deref().unwrap_or("spread").parse()?,
            rule: LegitimacyRule::new(alpha, form)?,
            rounds,
            repetitions: self.repetitions.unwrap_or(1),
            seed: self.seed.unwrap_or(0),
            seed_label: self.seed_label,
            faults: self.faults.as_deref().map(str::parse).transpose()?,
            trace: self.trace.unwrap_or(false),
            process: self.process.as_deref().unwrap_or("base").parse()?,
            stop_when_covered: self.stop_when_covered.unwrap_or(false),
            checkpoints: self.checkpoints.unwrap_or_default(),
            stride: self.stride,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn header_line(text: &str, id: &str) -> Option<usize> {
    let target = format!("[{id}]");
    text.lines()
        .position(|l| l.trim() == target || l.trim().starts_with(&format!("{target} ")))
        .map(|i| i + 1)
}

/// Parse every `[id]` section of a config file, in file order.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentSpec>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(format!("{}", e).trim_end().replace('\n', " "))
    })?;
    let mut specs = Vec::new();
    for (id, value) in table {
        let line = header_line(text, &id)
            .map(|l| format!(" (line {l})"))
            .unwrap_or_default();
        let toml::Value::Table(section) = value else {
            return Err(Error::Config(format!(
                "top-level key {id:?} is not an experiment section{line}"
            )));
        };
        let raw: RawExperiment =
            toml::Value::Table(section)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    Error::Config(format!("experiment {id:?}{line}: {}", e.message()))
                })?;
        let spec = raw
            .into_spec(&id)
            .map_err(|e| Error::Config(format!("experiment {id:?}{line}: {e}")))?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(Error::Config("no experiments defined".into()));
    }
    Ok(specs)
}
