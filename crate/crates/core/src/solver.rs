//! Time integration of the EMW system along a discretized path.
//!
//! State per point is `lam = -nu dtheta/dxi`, `chi = d(dtheta)/dt` and the
//! angle deviation itself. Inside each line
//!
//! ```text
//! lam_t = -nu chi_xi
//! chi_t = -nu (V^2 lam)_xi
//! ```
//!
//! is advanced with the Richtmyer scheme (or plain Lax-Wendroff for the
//! constant-voltage model). Line ends are coupled through the Riemann
//! invariants `chi +- V lam`: the source end is driven by the change in power
//! sent into the path, junctions conserve power with the off-path lines
//! treated as absorbing, and the far end absorbs outgoing waves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{apply_disturbance, CaseError, Disturbance, Phase, PowerCase};
use crate::continuum::{discretize_path, solve_voltage_with_nodes, ContinuumError, ContinuumGrid, FieldState};
use crate::inertia::{self, InertiaError};
use crate::path::EmwPath;
use crate::powerflow::{self, line_flow, PowerFlowError, PowerFlowSolution};
use crate::scheme::{lw_linear_step, richtmyer_step};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite value at step {step}, grid index {index}")]
    NonFinite { step: usize, index: usize },
    #[error("instability at step {step}: max |chi| = {max_chi:.3e} exceeds {limit:.3e}")]
    Unstable { step: usize, max_chi: f64, limit: f64 },
    #[error("maximum wave speed is zero; no time step can be chosen")]
    ZeroSpeed,
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("path does not start at a bus of the case or has no lines")]
    BadPath,
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Inertia(#[from] InertiaError),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Constant voltage everywhere.
    Homogeneous,
    /// Voltage follows the power flow along the path.
    Nonhomogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Characteristic,
    /// Linear extrapolation to a ghost point at the two path ends.
    Fictitious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub courant: f64,
    pub t_end: f64,
    pub model: Model,
    pub boundary_mode: BoundaryMode,
    pub record_stride: usize,
    /// Grid spacing, miles.
    pub dxi: f64,
    /// Voltage used everywhere. Always applied by the homogeneous model
    /// (default 1.0); pins the nonhomogeneous model when set.
    pub v_const: Option<f64>,
    /// Time constant of the first-order lag applied to boundary voltages and
    /// source power after each phase change; 0 means ideal steps.
    pub lag_s: f64,
    /// The run aborts when max |chi| exceeds this multiple of the forced level.
    pub growth_limit: f64,
    /// Fixed time step instead of the CFL choice; shortened slightly so the
    /// run ends exactly at `t_end`.
    pub dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            courant: 0.9,
            t_end: 10.0,
            model: Model::Nonhomogeneous,
            boundary_mode: BoundaryMode::Characteristic,
            record_stride: 1,
            dxi: 0.2,
            v_const: None,
            lag_s: 0.0,
            growth_limit: 1e3,
            dt: None,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), SolverError> {
        let mut bad = Vec::new();
        if !(self.courant > 0.0) {
            bad.push(format!("courant must be > 0, got {}", self.courant));
        }
        if !(self.t_end > 0.0) {
            bad.push(format!("t_end must be > 0, got {}", self.t_end));
        }
        if self.record_stride == 0 {
            bad.push("record_stride must be >= 1".to_string());
        }
        if !(self.dxi > 0.0) {
            bad.push(format!("dxi must be > 0, got {}", self.dxi));
        }
        if let Some(v) = self.v_const {
            if !(v > 0.0) {
                bad.push(format!("v_const must be > 0, got {v}"));
            }
        }
        if !(self.lag_s >= 0.0) {
            bad.push(format!("lag_s must be >= 0, got {}", self.lag_s));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                bad.push(format!("dt must be > 0, got {dt}"));
            }
        }
        if !(self.growth_limit > 1.0) {
            bad.push(format!("growth_limit must be > 1, got {}", self.growth_limit));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(SolverError::Config(bad.join("; ")))
        }
    }

    fn constant_voltage(&self) -> Option<f64> {
        match self.model {
            Model::Homogeneous => Some(self.v_const.unwrap_or(1.0)),
            Model::Nonhomogeneous => self.v_const,
        }
    }
}

/// Boundary data at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryValues {
    /// Change in power sent from the source bus into the path, pu.
    pub source_power: f64,
    /// Voltage magnitude pinned at bus marker indices.
    pub bus_voltages: BTreeMap<usize, f64>,
}

impl BoundaryValues {
    fn blend(&self, target: &BoundaryValues, w: f64) -> BoundaryValues {
        let mix = |a: f64, b: f64| b + (a - b) * w;
        BoundaryValues {
            source_power: mix(self.source_power, target.source_power),
            bus_voltages: target
                .bus_voltages
                .iter()
                .map(|(&i, &b)| (i, mix(self.bus_voltages.get(&i).copied().unwrap_or(b), b)))
                .collect(),
        }
    }
}

/// Piecewise-constant boundary data with an optional first-order lag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySchedule {
    pub pre: BoundaryValues,
    pub during: BoundaryValues,
    pub post: BoundaryValues,
    pub t_start: f64,
    pub t_end: f64,
    pub lag_s: f64,
}

impl BoundarySchedule {
    pub fn constant(values: BoundaryValues) -> Self {
        BoundarySchedule {
            pre: values.clone(),
            during: values.clone(),
            post: values,
            t_start: f64::INFINITY,
            t_end: f64::INFINITY,
            lag_s: 0.0,
        }
    }

    /// `pre` until `t_start`, then `after` for good.
    pub fn step(pre: BoundaryValues, after: BoundaryValues, t_start: f64) -> Self {
        BoundarySchedule {
            pre,
            during: after.clone(),
            post: after,
            t_start,
            t_end: f64::INFINITY,
            lag_s: 0.0,
        }
    }

    fn relax(&self, from: &BoundaryValues, to: &BoundaryValues, since: f64) -> BoundaryValues {
        if self.lag_s > 0.0 {
            from.blend(to, (-since / self.lag_s).exp())
        } else {
            to.clone()
        }
    }

    pub fn at(&self, t: f64) -> BoundaryValues {
        if t < self.t_start {
            self.pre.clone()
        } else if t < self.t_end {
            self.relax(&self.pre, &self.during, t - self.t_start)
        } else {
            let at_clear = self.relax(&self.pre, &self.during, self.t_end - self.t_start);
            self.relax(&at_clear, &self.post, t - self.t_end)
        }
    }
}

/// Largest stable step for the given voltage field.
pub fn cfl_timestep(grid: &ContinuumGrid, v_field: &[f64], courant: f64) -> Result<f64, SolverError> {
    if !(courant > 0.0) {
        return Err(SolverError::Config(format!("courant must be > 0, got {courant}")));
    }
    let max_speed = grid
        .nu
        .iter()
        .zip(v_field)
        .fold(0.0f64, |m, (nu, v)| m.max(nu * v.abs()));
    if !(max_speed > 0.0) || !max_speed.is_finite() {
        return Err(SolverError::ZeroSpeed);
    }
    Ok(courant * grid.dxi / max_speed)
}

fn voltage_field(grid: &ContinuumGrid, bc: &BoundaryValues, cfg: &SolverConfig) -> Vec<f64> {
    match cfg.constant_voltage() {
        Some(v) => vec![v; grid.n_points()],
        None => solve_voltage_with_nodes(grid, &bc.bus_voltages),
    }
}

/// Forced `chi` level a power change `dp` produces at the source.
pub fn forced_chi(grid: &ContinuumGrid, dp: f64, v0: f64) -> f64 {
    dp / (v0 * grid.segments[0].impedance())
}

/// Advances `state` by `dt` with boundary data `bc` taken at the new time.
pub fn step_emw(
    state: &FieldState,
    grid: &ContinuumGrid,
    bc: &BoundaryValues,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<FieldState, SolverError> {
    let n = grid.n_points();
    let v_old = &state.v;
    let v_new = voltage_field(grid, bc, cfg);
    let homogeneous = cfg.model == Model::Homogeneous;
    let dxi = grid.dxi;
    let last_seg = grid.segments.len() - 1;
    let fictitious = cfg.boundary_mode == BoundaryMode::Fictitious;

    let mut lam = state.lam.clone();
    let mut lam_up = state.lam_upstream.clone();
    let mut chi = state.chi.clone();

    for (s_idx, seg) in grid.segments.iter().enumerate() {
        let nu = seg.nu;
        let ghost_left = fictitious && s_idx == 0;
        let ghost_right = fictitious && s_idx == last_seg;

        let mut u: Vec<[f64; 2]> = (seg.start..=seg.end)
            .map(|i| {
                let l = if i == seg.end {
                    state.lam_upstream[i]
                } else {
                    state.lam[i]
                };
                [l, state.chi[i]]
            })
            .collect();
        let mut vo: Vec<f64> = v_old[seg.start..=seg.end].to_vec();
        let mut vn: Vec<f64> = v_new[seg.start..=seg.end].to_vec();
        if ghost_left {
            u.insert(0, extrapolate(&u[0], &u[1]));
            vo.insert(0, 2.0 * vo[0] - vo[1]);
            vn.insert(0, 2.0 * vn[0] - vn[1]);
        }
        if ghost_right {
            let m = u.len();
            u.push(extrapolate(&u[m - 1], &u[m - 2]));
            let m = vo.len();
            vo.push(2.0 * vo[m - 1] - vo[m - 2]);
            vn.push(2.0 * vn[m - 1] - vn[m - 2]);
        }

        let next = if homogeneous {
            let v = cfg.constant_voltage().unwrap_or(1.0);
            lw_linear_step(&u, &[[0.0, nu], [nu * v * v, 0.0]], dxi, dt)
        } else {
            let flux = |h: usize, w: &[f64; 2]| {
                let k = h / 2;
                let v = if h.is_multiple_of(2) {
                    vo[k]
                } else {
                    0.25 * (vo[k] + vo[k + 1] + vn[k] + vn[k + 1])
                };
                [nu * w[1], nu * v * v * w[0]]
            };
            richtmyer_step(&u, flux, dxi, dt)
        };

        let offset = usize::from(ghost_left);
        let lo = if ghost_left { seg.start } else { seg.start + 1 };
        let hi = if ghost_right { seg.end } else { seg.end - 1 };
        for i in lo..=hi {
            let w = next[i - seg.start + offset];
            lam[i] = w[0];
            lam_up[i] = w[0];
            chi[i] = w[1];
        }
    }

    // Riemann invariants chi +- V lam at the old time, traced back along
    // the characteristic feet by linear interpolation.
    let w_plus = |i: usize, upstream: bool| {
        let l = if upstream { state.lam_upstream[i] } else { state.lam[i] };
        state.chi[i] + v_old[i] * l
    };
    let w_minus = |i: usize| state.chi[i] - v_old[i] * state.lam[i];
    let sigma = |nu: f64, i: usize| nu * v_old[i] * dt / dxi;

    // source end
    let first = &grid.segments[0];
    let v0 = v_new[0];
    let lam0 = bc.source_power / (v0 * v0 * first.impedance());
    if !fictitious {
        let s = sigma(first.nu, 0);
        let wm = (1.0 - s) * w_minus(0) + s * w_minus(1);
        chi[0] = wm + v0 * lam0;
    }
    lam[0] = lam0;
    lam_up[0] = lam0;

    // junctions
    for pair in grid.segments.windows(2) {
        let (left, right) = (&pair[0], &pair[1]);
        let j = right.start;
        let sl = sigma(left.nu, j);
        let sr = sigma(right.nu, j);
        let wp = (1.0 - sl) * w_plus(j, true) + sl * w_plus(j - 1, false);
        let wm = (1.0 - sr) * w_minus(j) + sr * w_minus(j + 1);
        let (zl, zr) = (left.impedance(), right.impedance());
        let zs = grid.side_impedance.get(&j).copied().unwrap_or(0.0);
        let x = (zl * wp + zr * wm) / (zl + zr + zs);
        chi[j] = x;
        lam_up[j] = (wp - x) / v_new[j];
        lam[j] = (x - wm) / v_new[j];
    }

    // far end absorbs
    if !fictitious {
        let e = n - 1;
        let s = sigma(grid.segments[last_seg].nu, e);
        let wp = (1.0 - s) * w_plus(e, false) + s * w_plus(e - 1, false);
        chi[e] = 0.5 * wp;
        lam[e] = 0.5 * wp / v_new[e];
        lam_up[e] = lam[e];
    }

    let mut delta_theta = state.delta_theta.clone();
    for i in 1..n - 1 {
        delta_theta[i] += 0.5 * dt * (state.chi[i] + chi[i]);
    }
    delta_theta[0] = delta_theta[1];
    delta_theta[n - 1] = delta_theta[n - 2];

    let time = state.time + dt;
    let mut out = FieldState {
        time,
        delta_theta,
        chi,
        lam,
        lam_upstream: lam_up,
        gamma: vec![0.0; n],
        v: v_new,
    };
    out.refresh_gamma();

    let step = (time / dt).round() as usize;
    for i in 0..n {
        let vals = [
            out.chi[i],
            out.lam[i],
            out.lam_upstream[i],
            out.delta_theta[i],
            out.gamma[i],
        ];
        if vals.iter().any(|x| !x.is_finite()) {
            return Err(SolverError::NonFinite { step, index: i });
        }
    }
    Ok(out)
}

fn extrapolate(edge: &[f64; 2], inner: &[f64; 2]) -> [f64; 2] {
    [2.0 * edge[0] - inner[0], 2.0 * edge[1] - inner[1]]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveField {
    pub times: Vec<f64>,
    pub snapshots: Vec<FieldState>,
    pub grid: ContinuumGrid,
    pub dt: f64,
    pub steps: usize,
    pub model: Model,
    /// Largest `|chi|` the source forcing alone would sustain.
    pub forced_chi: f64,
}

impl WaveField {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,xi,delta_theta,chi,v\n");
        for s in &self.snapshots {
            for i in 0..self.grid.n_points() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    s.time, self.grid.xi[i], s.delta_theta[i], s.chi[i], s.v[i]
                );
            }
        }
        out
    }

    /// `chi` at grid index `i` across all snapshots.
    pub fn chi_series(&self, i: usize) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.chi[i]).collect()
    }

    pub fn max_abs_chi(&self) -> f64 {
        self.snapshots.iter().fold(0.0, |m, s| m.max(s.max_abs_chi()))
    }
}

/// Integrates from `initial` to `cfg.t_end` on a prepared grid.
pub fn integrate(
    grid: &ContinuumGrid,
    initial: FieldState,
    schedule: &BoundarySchedule,
    cfg: &SolverConfig,
) -> Result<WaveField, SolverError> {
    cfg.check()?;
    let mut state = initial;
    state.v = voltage_field(grid, &schedule.at(state.time), cfg);
    state.refresh_gamma();

    let dt_max = match cfg.dt {
        Some(dt) => dt,
        None => cfl_timestep(grid, &state.v, cfg.courant)?,
    };
    let steps = (cfg.t_end / dt_max).ceil().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;

    let forced = [&schedule.pre, &schedule.during, &schedule.post]
        .iter()
        .map(|b| {
            let v0 = voltage_field(grid, b, cfg)[0];
            forced_chi(grid, b.source_power, v0).abs()
        })
        .fold(0.0, f64::max);
    let reference = forced.max(state.max_abs_chi());
    let limit = cfg.growth_limit * reference;

    let mut times = vec![state.time];
    let mut snapshots = vec![state.clone()];
    for k in 1..=steps {
        let t = k as f64 * dt;
        let bc = schedule.at(t);
        let mut next = step_emw(&state, grid, &bc, dt, cfg)?;
        next.time = t;
        let m = next.max_abs_chi();
        if reference > 0.0 && m > limit {
            return Err(SolverError::Unstable {
                step: k,
                max_chi: m,
                limit,
            });
        }
        state = next;
        if k % cfg.record_stride == 0 || k == steps {
            times.push(t);
            snapshots.push(state.clone());
        }
    }
    Ok(WaveField {
        times,
        snapshots,
        grid: grid.clone(),
        dt,
        steps,
        model: cfg.model,
        forced_chi: forced,
    })
}

/// Power sent from the first bus of the path into its first line.
fn sent_power(c: &PowerCase, sol: &PowerFlowSolution, path: &EmwPath) -> Result<f64, SolverError> {
    let id = *path.lines.first().ok_or(SolverError::BadPath)?;
    let line = c.line(id).ok_or(SolverError::BadPath)?;
    let (s_from, s_to) = line_flow(sol, line)?;
    Ok(if line.from_bus == path.buses[0] {
        s_from.re
    } else {
        s_to.re
    })
}

/// Pre, during and post power-flow solutions for a disturbance.
pub fn phase_solutions(c: &PowerCase, d: &Disturbance) -> Result<[PowerFlowSolution; 3], SolverError> {
    let solve = |phase| -> Result<PowerFlowSolution, SolverError> {
        let case = apply_disturbance(c, d, phase)?;
        Ok(powerflow::solve_power_flow(
            &case,
            powerflow::DEFAULT_TOL,
            powerflow::DEFAULT_MAX_ITER,
        )?)
    };
    Ok([solve(Phase::Pre)?, solve(Phase::During)?, solve(Phase::Post)?])
}

/// Boundary schedule for `d` seen from the start of `path`.
pub fn disturbance_schedule(
    c: &PowerCase,
    d: &Disturbance,
    path: &EmwPath,
    grid: &ContinuumGrid,
    lag_s: f64,
) -> Result<(BoundarySchedule, PowerFlowSolution), SolverError> {
    let [pre, during, post] = phase_solutions(c, d)?;
    let p_pre = sent_power(c, &pre, path)?;
    let values = |sol: &PowerFlowSolution| -> Result<BoundaryValues, SolverError> {
        let mut bus_voltages = BTreeMap::new();
        for (&i, &bus) in &grid.bus_markers {
            let v = sol.v_mag_of(bus).ok_or(ContinuumError::MissingVoltage(bus))?;
            bus_voltages.insert(i, v);
        }
        Ok(BoundaryValues {
            source_power: sent_power(c, sol, path)? - p_pre,
            bus_voltages,
        })
    };
    let schedule = BoundarySchedule {
        pre: values(&pre)?,
        during: values(&during)?,
        post: values(&post)?,
        t_start: d.t_start,
        t_end: d.t_end(),
        lag_s,
    };
    Ok((schedule, pre))
}

/// Homogeneous and nonhomogeneous runs sharing one time step, so their
/// snapshots line up.
pub fn simulate_both(
    c: &PowerCase,
    d: &Disturbance,
    path: &EmwPath,
    cfg: &SolverConfig,
) -> Result<(WaveField, WaveField), SolverError> {
    cfg.check()?;
    let map = inertia::distribute_inertia(c, inertia::DEFAULT_TOL, inertia::DEFAULT_MAX_ROUNDS)?;
    let grid = discretize_path(path, c, &map, cfg.dxi)?;
    let (schedule, _) = disturbance_schedule(c, d, path, &grid, cfg.lag_s)?;
    let hom_cfg = SolverConfig {
        model: Model::Homogeneous,
        ..cfg.clone()
    };
    let non_cfg = SolverConfig {
        model: Model::Nonhomogeneous,
        ..cfg.clone()
    };
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => {
            let mut dt = f64::INFINITY;
            for b in [&schedule.pre, &schedule.during, &schedule.post] {
                for c in [&hom_cfg, &non_cfg] {
                    dt = dt.min(cfl_timestep(&grid, &voltage_field(&grid, b, c), cfg.courant)?);
                }
            }
            dt
        }
    };
    let run = |c: &SolverConfig| {
        let c = SolverConfig {
            dt: Some(dt),
            ..c.clone()
        };
        integrate(&grid, FieldState::zeros(vec![1.0; grid.n_points()]), &schedule, &c)
    };
    Ok((run(&hom_cfg)?, run(&non_cfg)?))
}

/// Full run: power flows, inertia distribution, grid and integration.
pub fn simulate(c: &PowerCase, d: &Disturbance, path: &EmwPath, cfg: &SolverConfig) -> Result<WaveField, SolverError> {
    cfg.check()?;
    let map = inertia::distribute_inertia(c, inertia::DEFAULT_TOL, inertia::DEFAULT_MAX_ROUNDS)?;
    let grid = discretize_path(path, c, &map, cfg.dxi)?;
    let (schedule, _) = disturbance_schedule(c, d, path, &grid, cfg.lag_s)?;
    let initial = FieldState::zeros(vec![1.0; grid.n_points()]);
    integrate(&grid, initial, &schedule, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const W0: f64 = 376.991;

    fn uniform(n: usize) -> ContinuumGrid {
        // nu = 1 mile/s per unit voltage
        ContinuumGrid::uniform(n, 0.2, W0 * 0.01, 0.0, 0.01, W0)
    }

    fn flat(grid: &ContinuumGrid, p: f64, v: f64) -> BoundaryValues {
        BoundaryValues {
            source_power: p,
            bus_voltages: grid.bus_markers.keys().map(|&i| (i, v)).collect(),
        }
    }

    #[test]
    fn cfl_examples() {
        let g = uniform(6);
        let v = vec![1.0; 6];
        assert_abs_diff_eq!(cfl_timestep(&g, &v, 1.0).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(cfl_timestep(&g, &v, 0.9).unwrap(), 0.18, epsilon = 1e-12);
        let mut v2 = v.clone();
        v2[3] = 2.0;
        assert_abs_diff_eq!(cfl_timestep(&g, &v2, 1.0).unwrap(), 0.1, epsilon = 1e-12);
        assert!(matches!(cfl_timestep(&g, &[0.0; 6], 1.0), Err(SolverError::ZeroSpeed)));
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = uniform(20);
        let cfg = SolverConfig::default();
        let s0 = FieldState::zeros(vec![1.0; 20]);
        let s1 = step_emw(&s0, &g, &flat(&g, 0.0, 1.0), 0.1, &cfg).unwrap();
        assert!(s1.chi.iter().chain(&s1.lam).chain(&s1.delta_theta).all(|&x| x == 0.0));
    }

    #[test]
    fn constant_voltage_matches_homogeneous_step() {
        let g = uniform(30);
        let mut s = FieldState::zeros(vec![1.0; 30]);
        for i in 0..30 {
            let x = g.xi[i] - 3.0;
            s.lam[i] = (-x * x).exp();
            s.lam_upstream[i] = s.lam[i];
            s.chi[i] = 0.5 * (-(x - 0.5) * (x - 0.5)).exp();
        }
        let non = SolverConfig::default();
        let hom = SolverConfig {
            model: Model::Homogeneous,
            ..SolverConfig::default()
        };
        let bc = flat(&g, 0.1, 1.0);
        let a = step_emw(&s, &g, &bc, 0.15, &non).unwrap();
        let b = step_emw(&s, &g, &bc, 0.15, &hom).unwrap();
        for i in 0..30 {
            assert_abs_diff_eq!(a.chi[i], b.chi[i], epsilon = 1e-14);
            assert_abs_diff_eq!(a.lam[i], b.lam[i], epsilon = 1e-14);
            assert_eq!(b.gamma[i], b.lam[i]);
        }
    }

    #[test]
    fn gaussian_splits_into_two_half_pulses() {
        let n = 401;
        let g = uniform(n);
        let bump = |x: f64| 0.01 * (-(x - 40.0) * (x - 40.0) / 16.0).exp();
        let mut s = FieldState::zeros(vec![1.0; n]);
        for i in 0..n {
            let x = g.xi[i];
            s.delta_theta[i] = bump(x);
            // lam = -nu dtheta/dxi, nu = 1
            s.lam[i] = bump(x) * (x - 40.0) / 8.0;
            s.lam_upstream[i] = s.lam[i];
        }
        let cfg = SolverConfig {
            courant: 0.5,
            t_end: 20.0,
            ..SolverConfig::default()
        };
        let w = integrate(&g, s, &BoundarySchedule::constant(flat(&g, 0.0, 1.0)), &cfg).unwrap();
        let last = w.snapshots.last().unwrap();
        let t = last.time;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = g.xi[i];
            let exact = 0.5 * (bump(x - t) + bump(x + t));
            worst = worst.max((last.delta_theta[i] - exact).abs());
        }
        assert!(worst < 2e-4, "max error {worst}");
    }

    #[test]
    fn gamma_tracks_voltage() {
        let g = uniform(40);
        let pre = flat(&g, 0.0, 1.0);
        let mut after = flat(&g, 0.5, 1.0);
        after.bus_voltages.insert(39, 0.9);
        let cfg = SolverConfig {
            t_end: 5.0,
            ..SolverConfig::default()
        };
        let w = integrate(
            &g,
            FieldState::zeros(vec![1.0; 40]),
            &BoundarySchedule::step(pre, after, 1.0),
            &cfg,
        )
        .unwrap();
        for s in &w.snapshots {
            for i in 0..40 {
                assert!((s.gamma[i] - s.v[i] * s.v[i] * s.lam[i]).abs() <= 1e-12);
            }
        }
        assert!(w.times.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn unstable_courant_is_caught() {
        let g = uniform(100);
        let cfg = SolverConfig {
            courant: 1.5,
            t_end: 2000.0 * 0.3,
            ..SolverConfig::default()
        };
        let sched = BoundarySchedule::step(flat(&g, 0.0, 1.0), flat(&g, 0.2, 1.0), 0.0);
        let r = integrate(&g, FieldState::zeros(vec![1.0; 100]), &sched, &cfg);
        assert!(matches!(r, Err(SolverError::Unstable { step, .. }) if step <= 2000));
    }

    #[test]
    fn schedule_lag_relaxes() {
        let g = uniform(5);
        let mut s = BoundarySchedule::step(flat(&g, 0.0, 1.0), flat(&g, 1.0, 1.0), 1.0);
        assert_eq!(s.at(0.5).source_power, 0.0);
        assert_eq!(s.at(1.0).source_power, 1.0);
        s.lag_s = 0.5;
        assert_abs_diff_eq!(s.at(1.5).source_power, 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn config_checks() {
        assert!(SolverConfig::default().check().is_ok());
        let bad = SolverConfig {
            courant: 0.0,
            t_end: -1.0,
            record_stride: 0,
            ..SolverConfig::default()
        };
        let msg = bad.check().unwrap_err().to_string();
        assert!(msg.contains("courant") && msg.contains("t_end") && msg.contains("record_stride"));
    }
}
