//! Steady-state AC power flow.
//!
//! Polar Newton-Raphson from a flat start. PV reactive limits are not
//! enforced and transformer taps are treated as nominal.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::case::{BusId, BusKind, Line, PowerCase};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 25;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("power flow did not converge after {iterations} iterations (max mismatch {max_mismatch:.3e} pu)")]
    NotConverged { iterations: usize, max_mismatch: f64 },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("case has {0} slack buses, expected exactly one")]
    SlackCount(usize),
    #[error("bus {0} is not part of the solved case")]
    UnknownBus(BusId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    /// Bus id of each row/column, in case order.
    pub bus_ids: Vec<BusId>,
    pub y: DMatrix<Complex64>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }
}

/// Series admittance `1/(r + jx)`.
pub fn series_admittance(line: &Line) -> Complex64 {
    Complex64::new(line.r, line.x).inv()
}

pub fn build_ybus(c: &PowerCase) -> AdmittanceMatrix {
    let bus_ids: Vec<BusId> = c.buses.iter().map(|b| b.id).collect();
    let n = bus_ids.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for line in c.lines.iter().filter(|l| l.in_service()) {
        let (Some(i), Some(j)) = (c.bus_index(line.from_bus), c.bus_index(line.to_bus)) else {
            continue;
        };
        let ys = series_admittance(line);
        let half_shunt = Complex64::new(0.0, line.b_shunt / 2.0);
        y[(i, i)] += ys + half_shunt;
        y[(j, j)] += ys + half_shunt;
        y[(i, j)] -= ys;
        y[(j, i)] -= ys;
    }
    AdmittanceMatrix { bus_ids, y }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<BusId>,
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn index_of(&self, id: BusId) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    pub fn voltage(&self, id: BusId) -> Option<Complex64> {
        self.index_of(id)
            .map(|i| Complex64::from_polar(self.v_mag[i], self.v_ang[i]))
    }

    pub fn v_mag_of(&self, id: BusId) -> Option<f64> {
        self.index_of(id).map(|i| self.v_mag[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bus_id,v_mag_pu,v_ang_rad,p_inj_pu,q_inj_pu\n");
        for i in 0..self.bus_ids.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.bus_ids[i], self.v_mag[i], self.v_ang[i], self.p_inj[i], self.q_inj[i]
            );
        }
        out
    }
}

/// Net scheduled injection (generation minus load) per bus, per-unit.
fn scheduled_injections(c: &PowerCase) -> (Vec<f64>, Vec<f64>) {
    let base = c.base_mva;
    let mut p: Vec<f64> = c.buses.iter().map(|b| -b.p_load_pu(base)).collect();
    let q: Vec<f64> = c.buses.iter().map(|b| -b.q_load_pu(base)).collect();
    for g in &c.generators {
        if let Some(i) = c.bus_index(g.bus) {
            p[i] += g.p_gen_pu(base);
        }
    }
    (p, q)
}

fn injections(y: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let current: Complex64 = (0..n).map(|k| y[(i, k)] * v[k]).sum();
            v[i] * current.conj()
        })
        .collect()
}

pub fn solve_power_flow(c: &PowerCase, tol: f64, max_iter: usize) -> Result<PowerFlowSolution, PowerFlowError> {
    let slack_count = c.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
    if slack_count != 1 {
        return Err(PowerFlowError::SlackCount(slack_count));
    }
    let ybus = build_ybus(c);
    let n = ybus.n();
    let (p_spec, q_spec) = scheduled_injections(c);

    let mut vm: Vec<f64> = c
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Pq { 1.0 } else { b.v_set })
        .collect();
    let mut va = vec![0.0; n];

    // unknown angles at pv+pq, unknown magnitudes at pq
    let ang_idx: Vec<usize> = (0..n).filter(|&i| c.buses[i].kind != BusKind::Slack).collect();
    let mag_idx: Vec<usize> = (0..n).filter(|&i| c.buses[i].kind == BusKind::Pq).collect();
    let na = ang_idx.len();
    let dim = na + mag_idx.len();

    let mut iterations = 0;
    loop {
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
        let s = injections(&ybus.y, &v);
        let mut mismatch = DVector::zeros(dim);
        for (r, &i) in ang_idx.iter().enumerate() {
            mismatch[r] = p_spec[i] - s[i].re;
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            mismatch[na + r] = q_spec[i] - s[i].im;
        }
        let max_mismatch = mismatch.amax();
        if max_mismatch <= tol {
            return Ok(finish(c, &ybus, vm, va, iterations, max_mismatch));
        }
        if iterations >= max_iter {
            return Err(PowerFlowError::NotConverged {
                iterations,
                max_mismatch,
            });
        }
        iterations += 1;

        let jac = jacobian(&ybus.y, &vm, &va, &s, &ang_idx, &mag_idx);
        let dx = jac
            .lu()
            .solve(&mismatch)
            .filter(|dx| dx.iter().all(|x| x.is_finite()))
            .ok_or(PowerFlowError::SingularJacobian { iteration: iterations })?;
        for (r, &i) in ang_idx.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in mag_idx.iter().enumerate() {
            vm[i] += dx[na + r];
        }
    }
}

fn jacobian(
    y: &DMatrix<Complex64>,
    vm: &[f64],
    va: &[f64],
    s: &[Complex64],
    ang_idx: &[usize],
    mag_idx: &[usize],
) -> DMatrix<f64> {
    let na = ang_idx.len();
    let dim = na + mag_idx.len();
    let mut jac = DMatrix::zeros(dim, dim);

    // dP_i/dθ_k, dQ_i/dθ_k, dP_i/dV_k, dQ_i/dV_k in polar form
    let dp_dth = |i: usize, k: usize| -> f64 {
        if i == k {
            -s[i].im - y[(i, i)].im * vm[i] * vm[i]
        } else {
            let th = va[i] - va[k];
            vm[i] * vm[k] * (y[(i, k)].re * th.sin() - y[(i, k)].im * th.cos())
        }
    };
    let dq_dth = |i: usize, k: usize| -> f64 {
        if i == k {
            s[i].re - y[(i, i)].re * vm[i] * vm[i]
        } else {
            let th = va[i] - va[k];
            -vm[i] * vm[k] * (y[(i, k)].re * th.cos() + y[(i, k)].im * th.sin())
        }
    };
    let dp_dv = |i: usize, k: usize| -> f64 {
        if i == k {
            s[i].re / vm[i] + y[(i, i)].re * vm[i]
        } else {
            let th = va[i] - va[k];
            vm[i] * (y[(i, k)].re * th.cos() + y[(i, k)].im * th.sin())
        }
    };
    let dq_dv = |i: usize, k: usize| -> f64 {
        if i == k {
            s[i].im / vm[i] - y[(i, i)].im * vm[i]
        } else {
            let th = va[i] - va[k];
            vm[i] * (y[(i, k)].re * th.sin() - y[(i, k)].im * th.cos())
        }
    };

    for (r, &i) in ang_idx.iter().enumerate() {
        for (col, &k) in ang_idx.iter().enumerate() {
            jac[(r, col)] = dp_dth(i, k);
        }
        for (col, &k) in mag_idx.iter().enumerate() {
            jac[(r, na + col)] = dp_dv(i, k);
        }
    }
    for (r, &i) in mag_idx.iter().enumerate() {
        for (col, &k) in ang_idx.iter().enumerate() {
            jac[(na + r, col)] = dq_dth(i, k);
        }
        for (col, &k) in mag_idx.iter().enumerate() {
            jac[(na + r, na + col)] = dq_dv(i, k);
        }
    }
    jac
}

fn finish(
    c: &PowerCase,
    ybus: &AdmittanceMatrix,
    vm: Vec<f64>,
    mut va: Vec<f64>,
    iterations: usize,
    max_mismatch: f64,
) -> PowerFlowSolution {
    if let Some(slack) = c.buses.iter().position(|b| b.kind == BusKind::Slack) {
        va[slack] = 0.0;
    }
    let v: Vec<Complex64> = (0..vm.len()).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
    let s = injections(&ybus.y, &v);
    PowerFlowSolution {
        bus_ids: ybus.bus_ids.clone(),
        v_mag: vm,
        v_ang: va,
        p_inj: s.iter().map(|x| x.re).collect(),
        q_inj: s.iter().map(|x| x.im).collect(),
        iterations,
        max_mismatch,
    }
}

/// Complex power entering the line at its from-end and at its to-end.
pub fn line_flow(sol: &PowerFlowSolution, line: &Line) -> Result<(Complex64, Complex64), PowerFlowError> {
    let v1 = sol
        .voltage(line.from_bus)
        .ok_or(PowerFlowError::UnknownBus(line.from_bus))?;
    let v2 = sol
        .voltage(line.to_bus)
        .ok_or(PowerFlowError::UnknownBus(line.to_bus))?;
    let y_conj = series_admittance(line).conj();
    let end = |a: Complex64, b: Complex64| {
        a * (a - b).conj() * y_conj - Complex64::new(0.0, a.norm_sqr() * line.b_shunt / 2.0)
    };
    Ok((end(v1, v2), end(v2, v1)))
}
