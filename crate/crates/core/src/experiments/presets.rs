//! Shipped experiment configs, one per acceptance check.

use crate::error::{Error, Result};

use super::spec::{parse_config, ExperimentSpec};

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset {
            name: $name,
            summary: $summary,
            source: include_str!(concat!("../../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!(
        "coupon_collector",
        "single-ball cover time on K64 vs 63*H(63)"
    ),
    preset!("memoryless_empty", "memoryless empty fraction vs (1-1/n)^n"),
    preset!(
        "stability",
        "stability horizon from a legitimate start over n^2 rounds"
    ),
    preset!(
        "convergence",
        "convergence time from a single pile, n = 128..1024"
    ),
    preset!(
        "parallel_cover",
        "parallel cover time relative to n log^2 n"
    ),
    preset!(
        "fifo_progress",
        "minimum per-ball progress over a 16n window"
    ),
    preset!(
        "early_load",
        "max load during the first n rounds at n = 10^4"
    ),
    preset!(
        "dominating",
        "dominating process growth and paired dominance"
    ),
    preset!("fault_recovery", "recovery after periodic pile-up faults"),
    preset!("open_more_balls", "empty fraction with m = n ceil(log2 n)"),
    preset!("open_ring", "stability and convergence on the ring"),
    preset!("invariants", "small traced runs for mechanical checks"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Parsed experiments of the named preset.
pub fn load(name: &str) -> Result<Vec<ExperimentSpec>> {
    let preset = find(name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!(
            "unknown preset {name:?}; available: {}",
            names.join(", ")
        ))
    })?;
    parse_config(preset.source)
}
