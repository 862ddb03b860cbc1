//! Per-line EMW velocities and the fastest propagation path between buses.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;
use thiserror::Error;

use crate::case::{BusId, Line, LineId, PowerCase};
use crate::inertia::InertiaMap;
use crate::powerflow::PowerFlowSolution;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("inertia density must be > 0, got {0}")]
    NonPositiveDensity(f64),
    #[error("line reactance must be > 0, got {0}")]
    NonPositiveReactance(f64),
    #[error("voltage must be > 0, got {0}")]
    NonPositiveVoltage(f64),
    #[error("bus {0} is not in the case")]
    UnknownBus(BusId),
    #[error("bus {dst} is unreachable from bus {src}")]
    Unreachable { src: BusId, dst: BusId },
}

/// EMW speed along a line in miles/s: `sqrt(V^2 b / (j_h w0))` with the
/// length-scaled susceptance `b = length / x`.
pub fn line_emw_velocity(line: &Line, j_h: f64, v_pu: f64, omega0: f64) -> Result<f64, PathError> {
    if !(line.x > 0.0) {
        return Err(PathError::NonPositiveReactance(line.x));
    }
    if !(j_h > 0.0) {
        return Err(PathError::NonPositiveDensity(j_h));
    }
    if !(v_pu > 0.0) {
        return Err(PathError::NonPositiveVoltage(v_pu));
    }
    Ok(wave_speed(line.susceptance_per_mile(), j_h, v_pu, omega0))
}

pub fn wave_speed(b: f64, j_h: f64, v_pu: f64, omega0: f64) -> f64 {
    (v_pu * v_pu * b / (j_h * omega0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmwPath {
    pub buses: Vec<BusId>,
    pub lines: Vec<LineId>,
    /// miles/s per line
    pub velocities: Vec<f64>,
    /// miles per line
    pub lengths: Vec<f64>,
    pub travel_time_s: f64,
    pub total_length_miles: f64,
}

impl EmwPath {
    pub fn trivial(bus: BusId) -> Self {
        EmwPath {
            buses: vec![bus],
            lines: vec![],
            velocities: vec![],
            lengths: vec![],
            travel_time_s: 0.0,
            total_length_miles: 0.0,
        }
    }

    pub fn to_json(&self, c: &PowerCase) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            buses: &'a [BusId],
            lines: Vec<String>,
            velocities: &'a [f64],
            travel_time_s: f64,
        }
        serde_json::to_string_pretty(&Export {
            buses: &self.buses,
            lines: self.lines.iter().map(|&l| c.line_label(l)).collect(),
            velocities: &self.velocities,
            travel_time_s: self.travel_time_s,
        })
        .expect("path serialization cannot fail")
    }
}

/// Sum of per-segment `length / velocity`.
pub fn path_travel_time(p: &EmwPath) -> f64 {
    p.lengths.iter().zip(&p.velocities).map(|(l, v)| l / v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: BusId,
    pub line: LineId,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    bus: BusId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.bus.cmp(&other.bus))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over a non-negative weighted adjacency list. Among equal-cost
/// frontier entries the smaller bus id is settled first.
pub fn dijkstra(
    adjacency: &BTreeMap<BusId, Vec<Edge>>,
    src: BusId,
    dst: BusId,
) -> Option<(f64, Vec<BusId>, Vec<LineId>)> {
    if !adjacency.contains_key(&src) || !adjacency.contains_key(&dst) {
        return None;
    }
    let mut dist: BTreeMap<BusId, f64> = BTreeMap::from([(src, 0.0)]);
    let mut prev: BTreeMap<BusId, (BusId, LineId)> = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse(Entry { cost: 0.0, bus: src })]);

    while let Some(Reverse(Entry { cost, bus })) = heap.pop() {
        if cost > dist[&bus] {
            continue;
        }
        if bus == dst {
            break;
        }
        for e in &adjacency[&bus] {
            let next = cost + e.weight;
            if dist.get(&e.to).is_none_or(|&d| next < d) {
                dist.insert(e.to, next);
                prev.insert(e.to, (bus, e.line));
                heap.push(Reverse(Entry { cost: next, bus: e.to }));
            }
        }
    }

    let cost = *dist.get(&dst)?;
    let mut buses = vec![dst];
    let mut lines = vec![];
    let mut at = dst;
    while at != src {
        let (p, l) = prev[&at];
        buses.push(p);
        lines.push(l);
        at = p;
    }
    buses.reverse();
    lines.reverse();
    Some((cost, buses, lines))
}

/// Voltage used to weight a line for pathing: mean of its end magnitudes.
fn line_voltage(sol: &PowerFlowSolution, line: &Line) -> f64 {
    let a = sol.v_mag_of(line.from_bus).unwrap_or(1.0);
    let b = sol.v_mag_of(line.to_bus).unwrap_or(1.0);
    0.5 * (a + b)
}

/// Travel time across a line; zero for a line that carries no inertia.
fn line_travel_time(line: &Line, j_h: f64, v: f64, omega0: f64) -> f64 {
    line.length_miles * (j_h * omega0 / (v * v * line.susceptance_per_mile())).sqrt()
}

pub fn emw_adjacency(c: &PowerCase, map: &InertiaMap, sol: &PowerFlowSolution) -> BTreeMap<BusId, Vec<Edge>> {
    let mut adjacency: BTreeMap<BusId, Vec<Edge>> = c.buses.iter().map(|b| (b.id, Vec::new())).collect();
    for (k, line) in c.lines.iter().enumerate() {
        if !line.in_service() {
            continue;
        }
        let t = line_travel_time(line, map.j_per_mile[k], line_voltage(sol, line), c.omega0);
        let id = LineId(k);
        adjacency.entry(line.from_bus).or_default().push(Edge {
            to: line.to_bus,
            line: id,
            weight: t,
        });
        adjacency.entry(line.to_bus).or_default().push(Edge {
            to: line.from_bus,
            line: id,
            weight: t,
        });
    }
    for edges in adjacency.values_mut() {
        edges.sort_by_key(|e| (e.to, e.line));
    }
    adjacency
}

/// Minimal travel-time path from `src` to `dst`, weighting each line by
/// `length / velocity` at its mean pre-disturbance voltage.
pub fn shortest_emw_path(
    c: &PowerCase,
    map: &InertiaMap,
    sol: &PowerFlowSolution,
    src: BusId,
    dst: BusId,
) -> Result<EmwPath, PathError> {
    for id in [src, dst] {
        if c.bus(id).is_none() {
            return Err(PathError::UnknownBus(id));
        }
    }
    if src == dst {
        return Ok(EmwPath::trivial(src));
    }
    let adjacency = emw_adjacency(c, map, sol);
    let (_, buses, lines) = dijkstra(&adjacency, src, dst).ok_or(PathError::Unreachable { src, dst })?;
    Ok(build_path(c, map, sol, buses, lines))
}

pub(crate) fn build_path(
    c: &PowerCase,
    map: &InertiaMap,
    sol: &PowerFlowSolution,
    buses: Vec<BusId>,
    lines: Vec<LineId>,
) -> EmwPath {
    let mut velocities = Vec::with_capacity(lines.len());
    let mut lengths = Vec::with_capacity(lines.len());
    for &id in &lines {
        let line = &c.lines[id.0];
        let v = line_voltage(sol, line);
        let j_h = map.j_per_mile[id.0];
        velocities.push(if j_h > 0.0 {
            wave_speed(line.susceptance_per_mile(), j_h, v, c.omega0)
        } else {
            f64::INFINITY
        });
        lengths.push(line.length_miles);
    }
    let mut path = EmwPath {
        buses,
        lines,
        velocities,
        total_length_miles: lengths.iter().sum(),
        lengths,
        travel_time_s: 0.0,
    };
    path.travel_time_s = path_travel_time(&path);
    path
}

/// Path through an explicit bus sequence, using the first in-service line
/// between each consecutive pair.
pub fn path_through(
    c: &PowerCase,
    map: &InertiaMap,
    sol: &PowerFlowSolution,
    buses: &[BusId],
) -> Result<EmwPath, PathError> {
    let mut lines = Vec::with_capacity(buses.len().saturating_sub(1));
    for w in buses.windows(2) {
        let id = c
            .lines
            .iter()
            .position(|l| l.in_service() && l.touches(w[0]) && l.other_end(w[0]) == Some(w[1]))
            .ok_or(PathError::Unreachable { src: w[0], dst: w[1] })?;
        lines.push(LineId(id));
    }
    Ok(build_path(c, map, sol, buses.to_vec(), lines))
}
