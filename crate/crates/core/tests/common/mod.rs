//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use emw_core::case::{Bus, BusId, BusKind, Generator, Line, LineStatus, PowerCase};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

/// Random connected network with `2..=max_buses` buses. Bus 1 is the slack;
/// a few more buses carry generators. Loads are light so the power flow
/// converges from a flat start.
pub fn random_case(seed: u64, max_buses: usize) -> PowerCase {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_buses);
    let mut lines = Vec::new();
    let line = |rng: &mut StdRng, a: usize, b: usize| {
        let x = rng.random_range(0.02..0.2);
        Line {
            from_bus: a as BusId,
            to_bus: b as BusId,
            r: x * rng.random_range(0.0..0.3),
            x,
            b_shunt: rng.random_range(0.0..0.05),
            length_miles: rng.random_range(5.0..100.0),
            status: LineStatus::InService,
        }
    };
    // spanning tree, then extra edges (parallels allowed)
    for k in 2..=n {
        let parent = rng.random_range(1..k);
        lines.push(line(&mut rng, parent, k));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b {
            lines.push(line(&mut rng, a, b));
        }
    }

    let mut gen_buses = BTreeSet::from([1usize]);
    for _ in 0..rng.random_range(0..=n.min(4)) {
        gen_buses.insert(rng.random_range(1..=n));
    }
    let buses = (1..=n)
        .map(|id| Bus {
            id: id as BusId,
            kind: if id == 1 {
                BusKind::Slack
            } else if gen_buses.contains(&id) {
                BusKind::Pv
            } else {
                BusKind::Pq
            },
            v_set: if gen_buses.contains(&id) {
                rng.random_range(0.98..1.04)
            } else {
                1.0
            },
            p_load: rng.random_range(0.0..15.0),
            q_load: rng.random_range(0.0..5.0),
        })
        .collect();
    let generators = gen_buses
        .iter()
        .map(|&b| Generator {
            bus: b as BusId,
            h_const: rng.random_range(1.0..10.0),
            mva_rating: rng.random_range(50.0..500.0),
            p_gen: if b == 1 { 0.0 } else { rng.random_range(0.0..20.0) },
            inertia_j: 0.0,
        })
        .collect();
    PowerCase::new(100.0, 60.0, buses, lines, generators).expect("generated case is well formed")
}
