//! Test systems shipped with the crate.

use crate::case::{parse_case_json, parse_matpower, parse_matpower_with_sidecar, PowerCase, Scenario};

pub const CASE39_M: &str = include_str!("../data/case39.m");
pub const CASE39_DYN: &str = include_str!("../data/case39.dyn.json");
pub const CASE9_M: &str = include_str!("../data/case9.m");
pub const TWO_BUS_JSON: &str = include_str!("../data/two_bus.json");
pub const TWO_BUS_LOAD_STEP: &str = include_str!("../data/two_bus_load_step.json");
pub const CASE39_LOAD_STEP: &str = include_str!("../data/case39_load_step.json");
pub const CASE39_LINE_OUTAGE: &str = include_str!("../data/case39_line_outage.json");

/// New England 39-bus system with default machine inertia on each unit's
/// `mBase` and reactance-proportional line lengths.
pub fn ieee39() -> PowerCase {
    parse_matpower(CASE39_M).expect("bundled case39 parses")
}

/// 39-bus system with the per-machine H and ratings of `case39.dyn.json`
/// (the equivalent machine at bus 39 dominates).
pub fn ieee39_with_dynamics() -> PowerCase {
    parse_matpower_with_sidecar(CASE39_M, Some(CASE39_DYN)).expect("bundled case39 parses")
}

pub fn ieee9() -> PowerCase {
    parse_matpower(CASE9_M).expect("bundled case9 parses")
}

pub fn two_bus() -> PowerCase {
    parse_case_json(TWO_BUS_JSON).expect("bundled two-bus case parses")
}

pub fn scenario(text: &str) -> Scenario {
    Scenario::from_json(text).expect("bundled scenario parses")
}
