//! C ABI for the rebins simulator.
//!
//! Graphs and simulations are opaque handles created by `rebins_*_new`-style
//! functions and released with the matching `*_free`. Fallible functions
//! return a [`RebinsStatus`]; on failure, `rebins_last_error` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rebins::baselines::coupon_collector_mean;
use rebins::experiments::estimate_whp;
use rebins::metrics::{empty_fraction, is_legitimate, max_load};
use rebins::process::{step, Configuration, Mode, Placement, Strategy};
use rebins::{Error, Graph, LegitimacyRule, RuleForm, Streams};

/// Result of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebinsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RuntimeError = 3,
    Panic = 4,
}

pub const REBINS_STRATEGY_FIFO: u32 = 0;
pub const REBINS_STRATEGY_LIFO: u32 = 1;
pub const REBINS_STRATEGY_RANDOM: u32 = 2;

pub const REBINS_RULE_BALANCED: u32 = 0;
pub const REBINS_RULE_SCALED: u32 = 1;
pub const REBINS_RULE_ADDITIVE: u32 = 2;

/// Opaque graph handle.
pub struct RebinsGraph(Graph);

/// Opaque simulation handle: a configuration, its graph and RNG streams.
pub struct RebinsSim {
    graph: Graph,
    config: Configuration,
    strategy: Strategy,
    streams: Streams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).expect("nul bytes removed"));
}

fn fail(status: RebinsStatus, message: impl Into<String>) -> RebinsStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> RebinsStatus {
    let status = if e.is_usage() {
        RebinsStatus::InvalidArgument
    } else {
        RebinsStatus::RuntimeError
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> RebinsStatus) -> RebinsStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(RebinsStatus::Panic, "internal panic"))
}

fn strategy(code: u32) -> Option<Strategy> {
    match code {
        REBINS_STRATEGY_FIFO => Some(Strategy::Fifo),
        REBINS_STRATEGY_LIFO => Some(Strategy::Lifo),
        REBINS_STRATEGY_RANDOM => Some(Strategy::UniformRandom),
        _ => None,
    }
}

fn rule_form(code: u32) -> Option<RuleForm> {
    match code {
        REBINS_RULE_BALANCED => Some(RuleForm::Balanced),
        REBINS_RULE_SCALED => Some(RuleForm::Scaled),
        REBINS_RULE_ADDITIVE => Some(RuleForm::Additive),
        _ => None,
    }
}

/// Message of the last failed call on this thread. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rebins_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rebins_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn put_graph(result: rebins::Result<Graph>, out: *mut *mut RebinsGraph) -> RebinsStatus {
    if out.is_null() {
        return fail(RebinsStatus::NullPointer, "out is null");
    }
    match result {
        Ok(g) => {
            // SAFETY: `out` is non-null and the caller guarantees it is writable.
            unsafe { *out = Box::into_raw(Box::new(RebinsGraph(g))) };
            RebinsStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Complete graph on `n >= 2` nodes.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_complete(
    n: usize,
    out: *mut *mut RebinsGraph,
) -> RebinsStatus {
    guard(|| put_graph(Graph::complete(n), out))
}

/// Cycle on `n >= 3` nodes.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_ring(n: usize, out: *mut *mut RebinsGraph) -> RebinsStatus {
    guard(|| put_graph(Graph::ring(n), out))
}

/// Random `d`-regular graph drawn with the given seed.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_random_regular(
    n: usize,
    d: usize,
    seed: u64,
    out: *mut *mut RebinsGraph,
) -> RebinsStatus {
    guard(|| put_graph(Graph::random_regular(n, d, seed), out))
}

/// Graph from `edge_count` pairs stored as `2 * edge_count` node indices.
///
/// # Safety
/// `pairs` must point to `2 * edge_count` readable values; `out` must be
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_from_edges(
    pairs: *const u32,
    edge_count: usize,
    out: *mut *mut RebinsGraph,
) -> RebinsStatus {
    guard(|| {
        if pairs.is_null() {
            return fail(RebinsStatus::NullPointer, "pairs is null");
        }
        let flat = std::slice::from_raw_parts(pairs, edge_count * 2);
        let edges: Vec<(u32, u32)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        put_graph(Graph::custom(&edges), out)
    })
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_node_count(graph: *const RebinsGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `graph` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rebins_graph_free(graph: *mut RebinsGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// New simulation of `m` balls on a copy of `graph`. `placement` uses the
/// CLI syntax (`spread`, `point:IDX`, `random`, `counts:A,B,...`).
///
/// # Safety
/// `graph` must be a live handle, `placement` a NUL-terminated string, and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_new(
    graph: *const RebinsGraph,
    m: usize,
    placement: *const c_char,
    strategy_code: u32,
    traced: bool,
    seed: u64,
    out: *mut *mut RebinsSim,
) -> RebinsStatus {
    guard(|| {
        let (Some(graph), false, false) = (graph.as_ref(), placement.is_null(), out.is_null())
        else {
            return fail(RebinsStatus::NullPointer, "null argument");
        };
        let Some(strategy) = strategy(strategy_code) else {
            return fail(
                RebinsStatus::InvalidArgument,
                format!("unknown strategy {strategy_code}"),
            );
        };
        let Ok(text) = CStr::from_ptr(placement).to_str() else {
            return fail(RebinsStatus::InvalidArgument, "placement is not UTF-8");
        };
        let placement: Placement = match text.parse() {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        let mode = if traced {
            Mode::Traced
        } else {
            Mode::Anonymous
        };
        let mut streams = Streams::from_seed(seed);
        match Configuration::new(&graph.0, m, &placement, mode, &mut streams) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(RebinsSim {
                    graph: graph.0.clone(),
                    config,
                    strategy,
                    streams,
                }));
                RebinsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Advance one synchronous round.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_step(sim: *mut RebinsSim) -> RebinsStatus {
    rebins_sim_run(sim, 1)
}

/// Advance `rounds` synchronous rounds.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_run(sim: *mut RebinsSim, rounds: u64) -> RebinsStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(RebinsStatus::NullPointer, "sim is null");
        };
        for _ in 0..rounds {
            step(&mut s.config, &s.graph, s.strategy, &mut s.streams);
        }
        RebinsStatus::Ok
    })
}

/// Current round, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_round(sim: *const RebinsSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.config.round())
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_node_count(sim: *const RebinsSim) -> usize {
    sim.as_ref().map_or(0, |s| s.config.n())
}

/// Copy the per-node loads into `buf`, which must hold at least
/// `rebins_sim_node_count(sim)` values.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_loads(
    sim: *const RebinsSim,
    buf: *mut u32,
    len: usize,
) -> RebinsStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), buf.is_null()) else {
            return fail(RebinsStatus::NullPointer, "null argument");
        };
        let loads = s.config.loads();
        if len < loads.len() {
            return fail(
                RebinsStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", loads.len()),
            );
        }
        ptr::copy_nonoverlapping(loads.as_ptr(), buf, loads.len());
        RebinsStatus::Ok
    })
}

/// Largest queue, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_max_load(sim: *const RebinsSim) -> u32 {
    sim.as_ref().map_or(0, |s| max_load(&s.config))
}

/// Fraction of empty nodes, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_empty_fraction(sim: *const RebinsSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| empty_fraction(&s.config))
}

/// Whether the current configuration is legitimate under the rule
/// (`alpha`, `REBINS_RULE_*`).
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_is_legitimate(
    sim: *const RebinsSim,
    alpha: f64,
    rule: u32,
    out: *mut bool,
) -> RebinsStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), out.is_null()) else {
            return fail(RebinsStatus::NullPointer, "null argument");
        };
        let Some(form) = rule_form(rule) else {
            return fail(
                RebinsStatus::InvalidArgument,
                format!("unknown rule {rule}"),
            );
        };
        match LegitimacyRule::new(alpha, form).and_then(|r| is_legitimate(&s.config, &r)) {
            Ok(v) => {
                *out = v;
                RebinsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Whether every ball has visited every node. Requires a traced simulation.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_all_covered(
    sim: *const RebinsSim,
    out: *mut bool,
) -> RebinsStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), out.is_null()) else {
            return fail(RebinsStatus::NullPointer, "null argument");
        };
        if s.config.mode() != Mode::Traced {
            return from_error(Error::TracingRequired);
        }
        *out = s.config.all_covered();
        RebinsStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rebins_sim_free(sim: *mut RebinsSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Exact mean single-ball cover time of the complete graph on `n` nodes.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_coupon_collector_mean(n: usize, out: *mut f64) -> RebinsStatus {
    guard(|| {
        if out.is_null() {
            return fail(RebinsStatus::NullPointer, "out is null");
        }
        match coupon_collector_mean(n) {
            Ok(v) => {
                *out = v;
                RebinsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Point estimate and 95% Wilson interval of `successes / trials`.
///
/// # Safety
/// The three output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rebins_wilson(
    successes: u64,
    trials: u64,
    fraction: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> RebinsStatus {
    guard(|| {
        if fraction.is_null() || lower.is_null() || upper.is_null() {
            return fail(RebinsStatus::NullPointer, "null argument");
        }
        match estimate_whp(successes, trials) {
            Ok(p) => {
                *fraction = p.fraction;
                *lower = p.lower;
                *upper = p.upper;
                RebinsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_and_rule_codes() {
        assert_eq!(strategy(REBINS_STRATEGY_LIFO), Some(Strategy::Lifo));
        assert_eq!(strategy(9), None);
        assert_eq!(rule_form(REBINS_RULE_ADDITIVE), Some(RuleForm::Additive));
        assert_eq!(rule_form(3), None);
    }

    #[test]
    fn errors_are_recorded_per_thread() {
        assert_eq!(
            fail(RebinsStatus::InvalidArgument, "bad\0thing"),
            RebinsStatus::InvalidArgument
        );
        let msg = unsafe { CStr::from_ptr(rebins_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "bad thing");
        std::thread::spawn(|| {
            let msg = unsafe { CStr::from_ptr(rebins_last_error()) };
            assert!(msg.to_bytes().is_empty());
        })
        .join()
        .unwrap();
    }
}
