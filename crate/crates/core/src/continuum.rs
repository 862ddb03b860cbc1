//! One-dimensional continuum along an EMW path.
//!
//! Every line of the path is cut into `round(length / dxi)` cells of the same
//! width `dxi`; neighbouring lines share the junction point. Parameters are
//! constant per line, so they jump only at bus markers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::case::{BusId, LineId, PowerCase};
use crate::inertia::InertiaMap;
use crate::path::EmwPath;
use crate::powerflow::PowerFlowSolution;

#[derive(Debug, Error, PartialEq)]
pub enum ContinuumError {
    #[error("dxi must be > 0, got {0}")]
    NonPositiveStep(f64),
    #[error("dxi {dxi} is larger than half of line {line} ({length} miles)")]
    StepTooCoarse { line: String, length: f64, dxi: f64 },
    #[error("path has no lines")]
    EmptyPath,
    #[error("line {0} carries no inertia; wave parameter undefined")]
    NoInertia(String),
    #[error("index {index} has no centered neighbours on a grid of {n} points")]
    BoundaryIndex { index: usize, n: usize },
    #[error("field length {got} does not match grid size {n}")]
    FieldLength { got: usize, n: usize },
    #[error("bus {0} has no power-flow voltage")]
    MissingVoltage(BusId),
}

/// Stretch of grid owned by one line, `start..=end` in point indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub line: Option<LineId>,
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub start: usize,
    pub end: usize,
    pub length_miles: f64,
    pub b: f64,
    pub g: f64,
    pub j_h: f64,
    pub nu: f64,
}

impl Segment {
    /// Characteristic impedance `b / nu`; relates the power flux to `chi`
    /// for a one-way wave.
    pub fn impedance(&self) -> f64 {
        self.b / self.nu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuumGrid {
    pub dxi: f64,
    pub omega0: f64,
    pub xi: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    pub j_h: Vec<f64>,
    pub nu: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Grid index to bus id, at both path ends and every junction.
    pub bus_markers: BTreeMap<usize, BusId>,
    /// Summed characteristic impedance of the off-path lines at each interior
    /// junction. Energy leaving through them is treated as lost to the path.
    pub side_impedance: BTreeMap<usize, f64>,
}

impl ContinuumGrid {
    /// Single uniform segment of `n_points`.
    pub fn uniform(n_points: usize, dxi: f64, b: f64, g: f64, j_h: f64, omega0: f64) -> Self {
        assert!(n_points >= 3, "a grid needs at least 3 points");
        let nu = (b / (j_h * omega0)).sqrt();
        let end = n_points - 1;
        let segment = Segment {
            line: None,
            from_bus: 1,
            to_bus: 2,
            start: 0,
            end,
            length_miles: end as f64 * dxi,
            b,
            g,
            j_h,
            nu,
        };
        Self::from_segments(dxi, omega0, vec![segment], BTreeMap::new())
    }

    pub fn from_segments(dxi: f64, omega0: f64, segments: Vec<Segment>, side_impedance: BTreeMap<usize, f64>) -> Self {
        let n = segments.last().map_or(0, |s| s.end + 1);
        let mut grid = ContinuumGrid {
            dxi,
            omega0,
            xi: (0..n).map(|i| i as f64 * dxi).collect(),
            b: vec![0.0; n],
            g: vec![0.0; n],
            j_h: vec![0.0; n],
            nu: vec![0.0; n],
            bus_markers: BTreeMap::new(),
            side_impedance,
            segments,
        };
        for s in &grid.segments {
            // downstream segment wins at shared junction points
            for i in s.start..=s.end {
                grid.b[i] = s.b;
                grid.g[i] = s.g;
                grid.j_h[i] = s.j_h;
                grid.nu[i] = s.nu;
            }
        }
        for s in &grid.segments {
            grid.bus_markers.insert(s.start, s.from_bus);
            grid.bus_markers.insert(s.end, s.to_bus);
        }
        grid
    }

    pub fn n_points(&self) -> usize {
        self.xi.len()
    }

    /// Index of the segment owning point `i`; junctions belong downstream.
    pub fn segment_of(&self, i: usize) -> usize {
        self.segments
            .iter()
            .position(|s| i >= s.start && i < s.end)
            .unwrap_or(self.segments.len() - 1)
    }

    /// Interior junction indices (bus markers other than the two ends).
    pub fn junctions(&self) -> Vec<usize> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    pub fn is_junction(&self, i: usize) -> bool {
        self.segments.iter().skip(1).any(|s| s.start == i)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,xi_miles,b,g,j_h,nu,bus_id\n");
        for i in 0..self.n_points() {
            let bus = self.bus_markers.get(&i).map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{bus}",
                self.xi[i], self.b[i], self.g[i], self.j_h[i], self.nu[i]
            );
        }
        out
    }
}

/// Builds the grid for `p`, reading per-line parameters from `c` and `map`.
pub fn discretize_path(
    p: &EmwPath,
    c: &PowerCase,
    map: &InertiaMap,
    dxi: f64,
) -> Result<ContinuumGrid, ContinuumError> {
    if !(dxi > 0.0) {
        return Err(ContinuumError::NonPositiveStep(dxi));
    }
    if p.lines.is_empty() {
        return Err(ContinuumError::EmptyPath);
    }
    let mut segments = Vec::with_capacity(p.lines.len());
    let mut start = 0;
    for (k, &id) in p.lines.iter().enumerate() {
        let line = &c.lines[id.0];
        if line.length_miles < 2.0 * dxi {
            return Err(ContinuumError::StepTooCoarse {
                line: c.line_label(id),
                length: line.length_miles,
                dxi,
            });
        }
        let j_h = map.j_per_mile[id.0];
        if !(j_h > 0.0) {
            return Err(ContinuumError::NoInertia(c.line_label(id)));
        }
        let b = line.susceptance_per_mile();
        let cells = (line.length_miles / dxi).round() as usize;
        segments.push(Segment {
            line: Some(id),
            from_bus: p.buses[k],
            to_bus: p.buses[k + 1],
            start,
            end: start + cells,
            length_miles: line.length_miles,
            b,
            g: line.conductance_per_mile(),
            j_h,
            nu: (b / (j_h * c.omega0)).sqrt(),
        });
        start += cells;
    }

    let mut side = BTreeMap::new();
    for pair in segments.windows(2) {
        let bus = pair[0].to_bus;
        let on_path = [pair[0].line, pair[1].line];
        let z: f64 = c
            .lines
            .iter()
            .enumerate()
            .filter(|(k, l)| l.in_service() && l.touches(bus) && !on_path.contains(&Some(LineId(*k))))
            .map(|(k, l)| (l.susceptance_per_mile() * map.j_per_mile[k] * c.omega0).sqrt())
            .fold(0.0, |a, z| a + z);
        side.insert(pair[1].start, z);
    }
    Ok(ContinuumGrid::from_segments(dxi, c.omega0, segments, side))
}

/// Centered first and second differences of `v` and `theta` at `i`.
struct Derivatives {
    v: f64,
    v_x: f64,
    v_xx: f64,
    th_x: f64,
    th_xx: f64,
}

fn derivatives(grid: &ContinuumGrid, v: &[f64], theta: &[f64], i: usize) -> Result<Derivatives, ContinuumError> {
    let n = grid.n_points();
    for f in [v, theta] {
        if f.len() != n {
            return Err(ContinuumError::FieldLength { got: f.len(), n });
        }
    }
    if i == 0 || i + 1 >= n {
        return Err(ContinuumError::BoundaryIndex { index: i, n });
    }
    let h = grid.dxi;
    Ok(Derivatives {
        v: v[i],
        v_x: (v[i + 1] - v[i - 1]) / (2.0 * h),
        v_xx: (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h),
        th_x: (theta[i + 1] - theta[i - 1]) / (2.0 * h),
        th_xx: (theta[i + 1] - 2.0 * theta[i] + theta[i - 1]) / (h * h),
    })
}

impl Derivatives {
    /// `V^2 th_xx + 2 V V_x th_x`
    fn angular(&self) -> f64 {
        self.v * self.v * self.th_xx + 2.0 * self.v * self.v_x * self.th_x
    }

    /// `V V_xx - V^2 th_x^2`
    fn radial(&self) -> f64 {
        self.v * self.v_xx - self.v * self.v * self.th_x * self.th_x
    }
}

/// `(dP, dQ)` per unit length at point `i`, neglecting conductance.
pub fn power_deviation_lossless(
    grid: &ContinuumGrid,
    v: &[f64],
    theta: &[f64],
    i: usize,
) -> Result<(f64, f64), ContinuumError> {
    let d = derivatives(grid, v, theta, i)?;
    let b = grid.b[i];
    Ok((-b * d.angular(), -b * d.radial()))
}

/// `(dP, dQ)` per unit length at point `i` including series conductance.
pub fn power_deviation_lossy(
    grid: &ContinuumGrid,
    v: &[f64],
    theta: &[f64],
    i: usize,
) -> Result<(f64, f64), ContinuumError> {
    let d = derivatives(grid, v, theta, i)?;
    let (b, g) = (grid.b[i], grid.g[i]);
    let (ang, rad) = (d.angular(), d.radial());
    Ok((-g * rad - b * ang, g * ang - b * rad))
}

/// Linear voltage profile between the two path ends.
pub fn solve_voltage_profile(grid: &ContinuumGrid, v_left: f64, v_right: f64) -> Vec<f64> {
    let n = grid.n_points();
    solve_voltage_with_nodes(grid, &BTreeMap::from([(0, v_left), (n - 1, v_right)]))
}

/// Discrete Laplace solution with the voltage pinned at `fixed` points.
/// Cell admittance follows the owning line, so ramps between pinned points
/// that span several lines bend at the junctions.
pub fn solve_voltage_with_nodes(grid: &ContinuumGrid, fixed: &BTreeMap<usize, f64>) -> Vec<f64> {
    let n = grid.n_points();
    let mut v = vec![0.0; n];
    let nodes: Vec<(usize, f64)> = fixed.iter().map(|(&i, &x)| (i, x)).collect();
    if nodes.is_empty() {
        return vec![1.0; n];
    }
    for &(i, x) in &nodes {
        v[i] = x;
    }
    // flat extension beyond the outermost pinned points
    let (first, v_first) = nodes[0];
    let (last, v_last) = nodes[nodes.len() - 1];
    v[..first].fill(v_first);
    v[last + 1..].fill(v_last);

    for w in nodes.windows(2) {
        let ((a, va), (z, vz)) = (w[0], w[1]);
        if z <= a + 1 {
            continue;
        }
        // cell k spans points k..k+1
        let y: Vec<f64> = (a..z).map(|k| grid.b[k]).collect();
        let m = z - a - 1;
        // tridiagonal rows for unknowns a+1..z-1: -y_l v_{i-1} + (y_l+y_r) v_i - y_r v_{i+1} = 0
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let (yl, yr) = (y[r], y[r + 1]);
            diag[r] = yl + yr;
            upper[r] = -yr;
            if r == 0 {
                rhs[r] += yl * va;
            }
            if r == m - 1 {
                rhs[r] += yr * vz;
            }
        }
        // Thomas algorithm; the lower band equals -y_l
        for r in 1..m {
            let lower = -y[r];
            let f = lower / diag[r - 1];
            diag[r] -= f * upper[r - 1];
            rhs[r] -= f * rhs[r - 1];
        }
        let mut sol = vec![0.0; m];
        sol[m - 1] = rhs[m - 1] / diag[m - 1];
        for r in (0..m - 1).rev() {
            sol[r] = (rhs[r] - upper[r] * sol[r + 1]) / diag[r];
        }
        v[a + 1..z].copy_from_slice(&sol);
    }
    v
}

/// Voltage profile pinned at every bus marker to the given bus magnitudes.
pub fn voltage_from_buses(
    grid: &ContinuumGrid,
    bus_v: impl Fn(BusId) -> Option<f64>,
) -> Result<Vec<f64>, ContinuumError> {
    let mut fixed = BTreeMap::new();
    for (&i, &bus) in &grid.bus_markers {
        fixed.insert(i, bus_v(bus).ok_or(ContinuumError::MissingVoltage(bus))?);
    }
    Ok(solve_voltage_with_nodes(grid, &fixed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldState {
    pub time: f64,
    pub delta_theta: Vec<f64>,
    pub chi: Vec<f64>,
    /// Value on the downstream side at junctions.
    pub lam: Vec<f64>,
    /// Equals `lam` except at junctions, where it holds the upstream value.
    pub lam_upstream: Vec<f64>,
    pub gamma: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn zeros(v: Vec<f64>) -> Self {
        let n = v.len();
        FieldState {
            time: 0.0,
            delta_theta: vec![0.0; n],
            chi: vec![0.0; n],
            lam: vec![0.0; n],
            lam_upstream: vec![0.0; n],
            gamma: vec![0.0; n],
            v,
        }
    }

    pub fn n_points(&self) -> usize {
        self.v.len()
    }

    pub fn refresh_gamma(&mut self) {
        for ((g, &l), &v) in self.gamma.iter_mut().zip(&self.lam).zip(&self.v) {
            *g = v * v * l;
        }
    }

    pub fn max_abs_chi(&self) -> f64 {
        self.chi.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Equilibrium state: zero deviations, voltage from the pre-disturbance flow.
pub fn initial_conditions(grid: &ContinuumGrid, sol: &PowerFlowSolution) -> Result<FieldState, ContinuumError> {
    let v = voltage_from_buses(grid, |b| sol.v_mag_of(b))?;
    Ok(FieldState::zeros(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::{Line, LineStatus};
    use approx::assert_abs_diff_eq;

    fn two_line_grid(b2: f64) -> ContinuumGrid {
        let seg = |start, end, from_bus, to_bus, b: f64| Segment {
            line: None,
            from_bus,
            to_bus,
            start,
            end,
            length_miles: 1.0,
            b,
            g: 0.0,
            j_h: 0.1,
            nu: (b / 0.1).sqrt(),
        };
        ContinuumGrid::from_segments(
            0.1,
            1.0,
            vec![seg(0, 10, 1, 2, 5.0), seg(10, 20, 2, 3, b2)],
            BTreeMap::from([(10, 0.0)]),
        )
    }

    #[test]
    fn uniform_grid_counts() {
        let g = ContinuumGrid::uniform(6, 0.2, 5.0, 0.0, 0.01, 376.991);
        assert_eq!(g.n_points(), 6);
        assert!(g.nu.iter().all(|&n| n == g.nu[0] && n > 0.0));
        assert_eq!(g.bus_markers.len(), 2);
    }

    #[test]
    fn junction_parameters_belong_downstream() {
        let g = two_line_grid(8.0);
        assert_eq!(g.n_points(), 21);
        assert_eq!(g.b[9], 5.0);
        assert_eq!(g.b[10], 8.0);
        assert_eq!(g.segment_of(10), 1);
        assert_eq!(g.segment_of(20), 1);
        assert_eq!(g.junctions(), vec![10]);
        assert_eq!(g.bus_markers[&10], 2);
    }

    #[test]
    fn linear_theta_constant_v() {
        let g = ContinuumGrid::uniform(11, 0.1, 5.0, 0.5, 0.01, 376.991);
        let v = vec![1.02; 11];
        let theta: Vec<f64> = g.xi.iter().map(|x| 0.3 * x).collect();
        let (dp, dq) = power_deviation_lossless(&g, &v, &theta, 5).unwrap();
        assert_abs_diff_eq!(dp, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dq, 1.02f64.powi(2) * 5.0 * 0.09, epsilon = 1e-12);
        let (dp, dq) = power_deviation_lossy(&g, &v, &theta, 5).unwrap();
        assert_abs_diff_eq!(dp, 0.5 * 1.02f64.powi(2) * 0.09, epsilon = 1e-12);
        assert_abs_diff_eq!(dq, 5.0 * 1.02f64.powi(2) * 0.09, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_theta() {
        let g = ContinuumGrid::uniform(11, 0.1, 5.0, 0.0, 0.01, 376.991);
        let v = vec![1.0; 11];
        let theta: Vec<f64> = g.xi.iter().map(|x| x * x).collect();
        let (dp, _) = power_deviation_lossless(&g, &v, &theta, 3).unwrap();
        assert_abs_diff_eq!(dp, -10.0, epsilon = 1e-9);
    }

    #[test]
    fn sloped_voltage_example() {
        let g = ContinuumGrid::uniform(11, 0.1, 5.0, 0.0, 0.01, 376.991);
        let v: Vec<f64> = g.xi.iter().map(|x| 1.0 + 0.01 * x).collect();
        let theta: Vec<f64> = g.xi.iter().map(|x| 0.1 * x).collect();
        for i in 1..10 {
            let (dp, _) = power_deviation_lossless(&g, &v, &theta, i).unwrap();
            let oracle = -2.0 * (1.0 + 0.01 * g.xi[i]) * 5.0 * 0.01 * 0.1;
            assert_abs_diff_eq!(dp, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn lossy_reduces_bitwise() {
        let g = ContinuumGrid::uniform(9, 0.25, 3.0, 0.0, 0.01, 376.991);
        let v: Vec<f64> = g.xi.iter().map(|x| 1.0 + 0.05 * (x * 1.3).sin()).collect();
        let theta: Vec<f64> = g.xi.iter().map(|x| 0.2 * (x * 0.7).cos()).collect();
        for i in 1..8 {
            let a = power_deviation_lossless(&g, &v, &theta, i).unwrap();
            let b = power_deviation_lossy(&g, &v, &theta, i).unwrap();
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
    }

    #[test]
    fn boundary_index_rejected() {
        let g = ContinuumGrid::uniform(5, 0.1, 1.0, 0.0, 1.0, 1.0);
        let f = vec![1.0; 5];
        assert!(power_deviation_lossless(&g, &f, &f, 0).is_err());
        assert!(power_deviation_lossy(&g, &f, &f, 4).is_err());
        assert!(power_deviation_lossy(&g, &f[..3], &f, 2).is_err());
    }

    #[test]
    fn voltage_examples() {
        let g = ContinuumGrid::uniform(6, 0.2, 5.0, 0.0, 0.01, 376.991);
        assert!(solve_voltage_profile(&g, 1.0, 1.0)
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
        let v = solve_voltage_profile(&g, 1.0, 0.95);
        for (k, want) in [1.0, 0.99, 0.98, 0.97, 0.96, 0.95].iter().enumerate() {
            assert_abs_diff_eq!(v[k], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn junction_pinned_voltage_is_two_ramps() {
        let g = two_line_grid(8.0);
        let v = solve_voltage_with_nodes(&g, &BTreeMap::from([(0, 1.0), (10, 0.98), (20, 1.01)]));
        assert_eq!(v[10], 0.98);
        for i in 1..20 {
            if i != 10 {
                assert_abs_diff_eq!(v[i - 1] - 2.0 * v[i] + v[i + 1], 0.0, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(v[5], 0.99, epsilon = 1e-12);
    }

    #[test]
    fn unpinned_junction_conserves_current() {
        let g = two_line_grid(20.0);
        let v = solve_voltage_profile(&g, 1.0, 0.9);
        // equal current through every cell: b_k (v_k - v_{k+1}) constant
        let i0 = 5.0 * (v[0] - v[1]);
        for k in 0..20 {
            assert_abs_diff_eq!(g.b[k] * (v[k] - v[k + 1]), i0, epsilon = 1e-13);
        }
    }

    #[test]
    fn discretize_checks() {
        use crate::case::{Bus, BusKind, Generator};
        let line = |f, t| Line {
            from_bus: f,
            to_bus: t,
            r: 0.01,
            x: 0.2,
            b_shunt: 0.0,
            length_miles: 1.0,
            status: LineStatus::InService,
        };
        let bus = |id, kind| Bus {
            id,
            kind,
            v_set: 1.0,
            p_load: 0.0,
            q_load: 0.0,
        };
        let gen = |b| Generator {
            bus: b,
            h_const: 3.0,
            mva_rating: 100.0,
            p_gen: 0.0,
            inertia_j: 0.0,
        };
        let c = PowerCase::new(
            100.0,
            60.0,
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Pq), bus(3, BusKind::Pv)],
            vec![line(1, 2), line(2, 3)],
            vec![gen(1), gen(3)],
        )
        .unwrap();
        let map = crate::inertia::distribute_inertia(&c, 1e-9, 100).unwrap();
        let sol = crate::powerflow::solve_power_flow(&c, 1e-10, 20).unwrap();
        let p = crate::path::path_through(&c, &map, &sol, &[1, 2, 3]).unwrap();
        let g = discretize_path(&p, &c, &map, 0.1).unwrap();
        assert_eq!(g.n_points(), 21);
        assert_eq!(g.bus_markers[&10], 2);
        assert_eq!(g.side_impedance[&10], 0.0);
        let one = crate::path::path_through(&c, &map, &sol, &[1, 2]).unwrap();
        assert_eq!(discretize_path(&one, &c, &map, 0.2).unwrap().n_points(), 6);
        assert!(matches!(
            discretize_path(&one, &c, &map, 0.6),
            Err(ContinuumError::StepTooCoarse { .. })
        ));
        let s = initial_conditions(&g, &sol).unwrap();
        assert!(s.chi.iter().chain(&s.lam).chain(&s.delta_theta).all(|&x| x == 0.0));
        assert_abs_diff_eq!(s.v[0], 1.0, epsilon = 1e-12);
        assert!(g.to_csv().starts_with("index,xi_miles,b,g,j_h,nu,bus_id\n0,0,"));
    }
}
