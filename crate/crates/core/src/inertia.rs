//! Admittance-based inertia distribution (ABID).
//!
//! Each generator's rotational inertia is seeded onto its incident lines in
//! proportion to their series admittance magnitude. Inertia arriving at a bus
//! without a generator is partly kept by the arriving line and partly pushed
//! onward, again in proportion to admittance. The process runs as a
//! breadth-first wavefront until the amount still in flight is negligible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::case::{ordered_pair, BusId, LineId, PowerCase};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum InertiaError {
    #[error("connected component {buses:?} has lines but no generator")]
    NoGenerator { buses: Vec<BusId> },
    #[error("generator bus {0} has no in-service lines to carry its inertia")]
    IsolatedGenerator(BusId),
    #[error("unknown line {0}")]
    UnknownLine(LineId),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InertiaMap {
    /// Inertia assigned to each line of the case, indexed by [`LineId`];
    /// zero for lines out of service.
    pub j_total: Vec<f64>,
    /// `j_total / length_miles`.
    pub j_per_mile: Vec<f64>,
    /// Inertia still in flight when the wavefront stopped, before folding.
    pub residue: f64,
    pub rounds: usize,
}

impl InertiaMap {
    pub fn total(&self) -> f64 {
        self.j_total.iter().sum()
    }

    pub fn to_csv(&self, c: &PowerCase) -> String {
        let mut out = String::from("line_id,j_total,j_per_mile\n");
        for (k, (j, jh)) in self.j_total.iter().zip(&self.j_per_mile).enumerate() {
            let _ = writeln!(out, "{},{},{}", c.line_label(LineId(k)), j, jh);
        }
        out
    }
}

/// Fraction of arriving inertia a line keeps at a bus with `n` onward lines.
pub fn retained_fraction(n: usize, y_arriving: f64, y_onward_sum: f64) -> f64 {
    let ny = n as f64 * y_arriving;
    ny / (ny + y_onward_sum)
}

/// Inertia travelling along `line` towards `bus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Front {
    ends: (BusId, BusId),
    line: usize,
    bus: BusId,
}

pub fn distribute_inertia(c: &PowerCase, tol: f64, max_rounds: usize) -> Result<InertiaMap, InertiaError> {
    let active: Vec<usize> = (0..c.lines.len()).filter(|&k| c.lines[k].in_service()).collect();
    let admittance: Vec<f64> = c.lines.iter().map(|l| l.admittance_magnitude()).collect();

    let mut incident: BTreeMap<BusId, Vec<usize>> = c.buses.iter().map(|b| (b.id, Vec::new())).collect();
    for &k in &active {
        let l = &c.lines[k];
        incident.entry(l.from_bus).or_default().push(k);
        incident.entry(l.to_bus).or_default().push(k);
    }
    for lines in incident.values_mut() {
        lines.sort_by_key(|&k| (ordered_pair(c.lines[k].from_bus, c.lines[k].to_bus), k));
    }

    let mut gen_inertia: BTreeMap<BusId, f64> = BTreeMap::new();
    for g in &c.generators {
        *gen_inertia.entry(g.bus).or_default() += g.inertia_j;
    }
    check_connectivity(c, &incident, &gen_inertia)?;

    let front = |line: usize, bus: BusId| Front {
        ends: ordered_pair(c.lines[line].from_bus, c.lines[line].to_bus),
        line,
        bus,
    };

    let mut j_total = vec![0.0; c.lines.len()];
    let mut flying: BTreeMap<Front, f64> = BTreeMap::new();
    let total: f64 = gen_inertia.values().sum();

    // step 1: seed each generator's inertia onto its incident lines
    for (&bus, &j) in &gen_inertia {
        let lines = &incident[&bus];
        let y_sum: f64 = lines.iter().map(|&k| admittance[k]).sum();
        for &k in lines {
            let far = c.lines[k].other_end(bus).expect("incident line");
            *flying.entry(front(k, far)).or_default() += j * admittance[k] / y_sum;
        }
    }

    // step 2: push inertia through non-generator buses
    let mut rounds = 0;
    loop {
        let in_flight: f64 = flying.values().sum();
        if flying.is_empty() || in_flight <= tol * total || rounds >= max_rounds {
            break;
        }
        rounds += 1;
        let mut next: BTreeMap<Front, f64> = BTreeMap::new();
        for (f, amount) in std::mem::take(&mut flying) {
            let onward: Vec<usize> = incident[&f.bus].iter().copied().filter(|&k| k != f.line).collect();
            if gen_inertia.contains_key(&f.bus) || onward.is_empty() {
                j_total[f.line] += amount;
                continue;
            }
            let y_onward: f64 = onward.iter().map(|&k| admittance[k]).sum();
            let kept = retained_fraction(onward.len(), admittance[f.line], y_onward) * amount;
            j_total[f.line] += kept;
            let passed = amount - kept;
            for &k in &onward {
                let far = c.lines[k].other_end(f.bus).expect("incident line");
                *next.entry(front(k, far)).or_default() += passed * admittance[k] / y_onward;
            }
        }
        flying = next;
    }

    // fold whatever is still moving back onto the lines, proportionally
    let residue: f64 = flying.values().sum();
    let placed: f64 = j_total.iter().sum();
    if residue > 0.0 {
        if placed > 0.0 {
            let scale = (placed + residue) / placed;
            for j in &mut j_total {
                *j *= scale;
            }
        } else {
            for (f, amount) in &flying {
                j_total[f.line] += amount;
            }
        }
    }

    let j_per_mile = j_total.iter().zip(&c.lines).map(|(j, l)| j / l.length_miles).collect();
    Ok(InertiaMap {
        j_total,
        j_per_mile,
        residue,
        rounds,
    })
}

fn check_connectivity(
    c: &PowerCase,
    incident: &BTreeMap<BusId, Vec<usize>>,
    gen_inertia: &BTreeMap<BusId, f64>,
) -> Result<(), InertiaError> {
    let mut seen: BTreeSet<BusId> = BTreeSet::new();
    for &start in incident.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut component = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(bus) = queue.pop_front() {
            for &k in &incident[&bus] {
                let far = c.lines[k].other_end(bus).expect("incident line");
                if seen.insert(far) {
                    component.push(far);
                    queue.push_back(far);
                }
            }
        }
        let has_lines = component.iter().any(|b| !incident[b].is_empty());
        let has_gen = component.iter().any(|b| gen_inertia.contains_key(b));
        if has_lines && !has_gen {
            component.sort_unstable();
            return Err(InertiaError::NoGenerator { buses: component });
        }
        if !has_lines {
            if let Some(&j) = gen_inertia.get(&start) {
                if j > 0.0 {
                    return Err(InertiaError::IsolatedGenerator(start));
                }
            }
        }
    }
    Ok(())
}

pub fn line_density(map: &InertiaMap, line: LineId) -> Result<f64, InertiaError> {
    map.j_per_mile
        .get(line.0)
        .copied()
        .ok_or(InertiaError::UnknownLine(line))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{Bus, BusKind, Generator, Line, LineStatus};
    use approx::assert_relative_eq;

    fn line_with_y(from: BusId, to: BusId, y: f64) -> Line {
        Line {
            from_bus: from,
            to_bus: to,
            r: 0.0,
            x: 1.0 / y,
            b_shunt: 0.0,
            length_miles: 1.0,
            status: LineStatus::InService,
        }
    }

    fn case_with(n_buses: u32, lines: Vec<Line>, gens: &[(BusId, f64)]) -> PowerCase {
        let buses = (1..=n_buses)
            .map(|id| Bus {
                id,
                kind: if id == 1 { BusKind::Slack } else { BusKind::Pq },
                v_set: 1.0,
                p_load: 0.0,
                q_load: 0.0,
            })
            .collect();
        let mut c = PowerCase::new(100.0, 60.0, buses, lines, vec![]).unwrap();
        // set inertia_j directly so the examples read in plain numbers
        c.generators = gens
            .iter()
            .map(|&(bus, j)| Generator {
                bus,
                h_const: 1.0,
                mva_rating: 1.0,
                p_gen: 0.0,
                inertia_j: j,
            })
            .collect();
        c
    }

    #[test]
    fn chain_splits_at_passive_bus() {
        let c = case_with(
            3,
            vec![line_with_y(1, 2, 5.0), line_with_y(2, 3, 5.0)],
            &[(1, 10.0), (3, 0.0)],
        );
        let m = distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_relative_eq!(m.j_total[0], 5.0, max_relative = 1e-12);
        assert_relative_eq!(m.j_total[1], 5.0, max_relative = 1e-12);
    }

    #[test]
    fn generator_to_generator_line_keeps_everything() {
        let c = case_with(2, vec![line_with_y(1, 2, 3.0)], &[(1, 7.0), (2, 0.0)]);
        let m = distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_relative_eq!(m.j_total[0], 7.0, max_relative = 1e-12);
    }

    #[test]
    fn star_hub_retains_and_splits() {
        let c = case_with(
            4,
            vec![line_with_y(1, 2, 2.0), line_with_y(2, 3, 1.0), line_with_y(2, 4, 1.0)],
            &[(1, 12.0)],
        );
        let m = distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_relative_eq!(m.j_total[0], 8.0, max_relative = 1e-12);
        assert_relative_eq!(m.j_total[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(m.j_total[2], 2.0, max_relative = 1e-12);
        assert_relative_eq!(m.total(), 12.0, max_relative = 1e-12);
    }

    #[test]
    fn meshed_network_conserves() {
        let c = case_with(
            4,
            vec![
                line_with_y(1, 2, 4.0),
                line_with_y(2, 3, 1.0),
                line_with_y(3, 4, 2.0),
                line_with_y(4, 2, 3.0),
            ],
            &[(1, 3.0)],
        );
        let m = distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_relative_eq!(m.total(), 3.0, max_relative = 1e-12);
        assert!(m.j_total.iter().all(|&j| j > 0.0));
        assert!(m.residue <= DEFAULT_TOL * 3.0);
    }

    #[test]
    fn component_without_generator_is_an_error() {
        let c = case_with(4, vec![line_with_y(1, 2, 1.0), line_with_y(3, 4, 1.0)], &[(1, 1.0)]);
        assert_eq!(
            distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS),
            Err(InertiaError::NoGenerator { buses: vec![3, 4] })
        );
    }

    #[test]
    fn densities() {
        let mut c = case_with(2, vec![line_with_y(1, 2, 1.0)], &[(1, 5.0)]);
        c.lines[0].length_miles = 2.0;
        let m = distribute_inertia(&c, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_eq!(line_density(&m, LineId(0)).unwrap(), 2.5);
        assert!(line_density(&m, LineId(3)).is_err());

        let zero = case_with(2, vec![line_with_y(1, 2, 1.0)], &[(1, 0.0)]);
        let m = distribute_inertia(&zero, DEFAULT_TOL, DEFAULT_MAX_ROUNDS).unwrap();
        assert_eq!(line_density(&m, LineId(0)).unwrap(), 0.0);
    }

    #[test]
    fn retained_fraction_is_proper() {
        assert_relative_eq!(retained_fraction(1, 5.0, 5.0), 0.5);
        assert_relative_eq!(retained_fraction(2, 2.0, 2.0), 2.0 / 3.0);
    }
}
