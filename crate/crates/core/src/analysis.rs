//! Arrival times, front velocities, amplitudes and model comparison.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::case::{BusId, PowerCase};
use crate::solver::WaveField;

pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("threshold fraction must be in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("need at least 3 detected arrivals, found {0}")]
    TooFewArrivals(usize),
    #[error("arrival times do not vary; velocity undefined")]
    DegenerateFit,
    #[error("wave fields differ: {0}")]
    Mismatch(String),
    #[error("wave field has no snapshots")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalCurve {
    pub xi: Vec<f64>,
    pub arrival_t: Vec<Option<f64>>,
    pub threshold_frac: f64,
    /// `max_t |chi(0, t)|`
    pub reference: f64,
}

impl ArrivalCurve {
    pub fn detected(&self) -> usize {
        self.arrival_t.iter().flatten().count()
    }
}

/// First time `|chi|` reaches `threshold_frac` of the source peak at each
/// point, linearly interpolated between snapshots.
pub fn detect_arrival_times(w: &WaveField, threshold_frac: f64) -> Result<ArrivalCurve, AnalysisError> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(AnalysisError::BadThreshold(threshold_frac));
    }
    if w.snapshots.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let n = w.grid.n_points();
    let reference = w.snapshots.iter().fold(0.0f64, |m, s| m.max(s.chi[0].abs()));
    let level = threshold_frac * reference;
    let arrival_t = (0..n)
        .map(|i| {
            if reference == 0.0 {
                return None;
            }
            let mut prev: Option<(f64, f64)> = None;
            for (t, s) in w.times.iter().zip(&w.snapshots) {
                let a = s.chi[i].abs();
                if a >= level {
                    return Some(match prev {
                        Some((t0, a0)) if a > a0 => t0 + (t - t0) * (level - a0) / (a - a0),
                        _ => *t,
                    });
                }
                prev = Some((*t, a));
            }
            None
        })
        .collect();
    Ok(ArrivalCurve {
        xi: w.grid.xi.clone(),
        arrival_t,
        threshold_frac,
        reference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityFit {
    /// miles/s
    pub velocity: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares slope of position against arrival time.
pub fn fit_velocity(xi: &[f64], t: &[f64]) -> Result<VelocityFit, AnalysisError> {
    let n = xi.len();
    if n < 3 {
        return Err(AnalysisError::TooFewArrivals(n));
    }
    let nf = n as f64;
    let mt = t.iter().sum::<f64>() / nf;
    let mx = xi.iter().sum::<f64>() / nf;
    let (mut stt, mut stx, mut sxx) = (0.0, 0.0, 0.0);
    for (x, tt) in xi.iter().zip(t) {
        let (dt, dx) = (tt - mt, x - mx);
        stt += dt * dt;
        stx += dt * dx;
        sxx += dx * dx;
    }
    if stt == 0.0 {
        return Err(AnalysisError::DegenerateFit);
    }
    let slope = stx / stt;
    let r2 = if sxx == 0.0 { 1.0 } else { stx * stx / (stt * sxx) };
    Ok(VelocityFit {
        velocity: slope,
        r2,
        points: n,
    })
}

/// Velocity fit over every detected arrival.
pub fn estimate_velocity(curve: &ArrivalCurve) -> Result<VelocityFit, AnalysisError> {
    estimate_velocity_window(curve, f64::NEG_INFINITY, f64::INFINITY)
}

/// Velocity fit over detected arrivals with `xi_min <= xi <= xi_max`.
pub fn estimate_velocity_window(curve: &ArrivalCurve, xi_min: f64, xi_max: f64) -> Result<VelocityFit, AnalysisError> {
    let (xi, t): (Vec<f64>, Vec<f64>) = curve
        .xi
        .iter()
        .zip(&curve.arrival_t)
        .filter(|(x, _)| **x >= xi_min && **x <= xi_max)
        .filter_map(|(x, t)| t.map(|t| (*x, t)))
        .unzip();
    fit_velocity(&xi, &t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub line: String,
    pub start_xi: f64,
    pub end_xi: f64,
    /// `nu * V` at the pre-disturbance mean voltage of the segment.
    pub predicted_velocity: f64,
    pub velocity: Option<VelocityFit>,
    /// Mean over interior points of the peak `|chi|`.
    pub mean_peak_chi: f64,
}

/// Per-line velocity fits and amplitudes. `c` only supplies line labels.
pub fn segment_reports(w: &WaveField, curve: &ArrivalCurve, c: Option<&PowerCase>) -> Vec<SegmentReport> {
    let amp = amplitude_profile(w);
    let v0 = w.snapshots.first().map(|s| s.v.clone()).unwrap_or_default();
    w.grid
        .segments
        .iter()
        .map(|s| {
            let (a, b) = (w.grid.xi[s.start], w.grid.xi[s.end]);
            let interior = if s.end > s.start + 1 {
                s.start + 1..s.end
            } else {
                s.start..s.end + 1
            };
            let mean_peak_chi = amp[interior.clone()].iter().sum::<f64>() / interior.len() as f64;
            let v_mean = if v0.is_empty() {
                1.0
            } else {
                v0[s.start..=s.end].iter().sum::<f64>() / (s.end - s.start + 1) as f64
            };
            let line = match (c, s.line) {
                (Some(c), Some(id)) => c.line_label(id),
                _ => format!("{}-{}", s.from_bus, s.to_bus),
            };
            SegmentReport {
                from_bus: s.from_bus,
                to_bus: s.to_bus,
                line,
                start_xi: a,
                end_xi: b,
                predicted_velocity: s.nu * v_mean,
                velocity: estimate_velocity_window(curve, a, b).ok(),
                mean_peak_chi,
            }
        })
        .collect()
}

/// Peak `|chi|` over time at each point.
pub fn amplitude_profile(w: &WaveField) -> Vec<f64> {
    let n = w.grid.n_points();
    let mut out = vec![0.0f64; n];
    for s in &w.snapshots {
        for (o, x) in out.iter_mut().zip(&s.chi) {
            *o = o.max(x.abs());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotDiff {
    pub t: f64,
    pub chi_max: f64,
    pub chi_l2: f64,
    pub theta_max: f64,
    pub theta_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub snapshots: Vec<SnapshotDiff>,
    /// Time-maximum of the `chi` L2 difference.
    pub summary: f64,
}

pub fn compare_models(a: &WaveField, b: &WaveField) -> Result<DivergenceReport, AnalysisError> {
    if a.grid.n_points() != b.grid.n_points() || a.grid.dxi != b.grid.dxi {
        return Err(AnalysisError::Mismatch(format!(
            "grids of {} and {} points (dxi {} vs {})",
            a.grid.n_points(),
            b.grid.n_points(),
            a.grid.dxi,
            b.grid.dxi
        )));
    }
    if a.times.len() != b.times.len() {
        return Err(AnalysisError::Mismatch(format!(
            "{} vs {} snapshots",
            a.times.len(),
            b.times.len()
        )));
    }
    if let Some((ta, tb)) = a
        .times
        .iter()
        .zip(&b.times)
        .find(|(x, y)| (*x - *y).abs() > 1e-9 * x.abs().max(1.0))
    {
        return Err(AnalysisError::Mismatch(format!("snapshot times {ta} vs {tb}")));
    }
    let h = a.grid.dxi;
    let norms = |p: &[f64], q: &[f64]| {
        let mut mx = 0.0f64;
        let mut sq = 0.0;
        for (x, y) in p.iter().zip(q) {
            let d = (x - y).abs();
            mx = mx.max(d);
            sq += d * d;
        }
        (mx, (sq * h).sqrt())
    };
    let snapshots: Vec<SnapshotDiff> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(sa, sb)| {
            let (chi_max, chi_l2) = norms(&sa.chi, &sb.chi);
            let (theta_max, theta_l2) = norms(&sa.delta_theta, &sb.delta_theta);
            SnapshotDiff {
                t: sa.time,
                chi_max,
                chi_l2,
                theta_max,
                theta_l2,
            }
        })
        .collect();
    let summary = snapshots.iter().fold(0.0f64, |m, d| m.max(d.chi_l2));
    Ok(DivergenceReport { snapshots, summary })
}

/// Everything `emw analyze` reports for one wave field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub threshold_frac: f64,
    pub source_peak_chi: f64,
    pub max_abs_chi: f64,
    pub propagated: bool,
    pub velocity: Option<VelocityFit>,
    pub segments: Vec<SegmentReport>,
    pub arrivals: ArrivalCurve,
    pub amplitude: Vec<f64>,
}

pub fn analyze(w: &WaveField, threshold_frac: f64, c: Option<&PowerCase>) -> Result<AnalysisReport, AnalysisError> {
    let arrivals = detect_arrival_times(w, threshold_frac)?;
    let segments = segment_reports(w, &arrivals, c);
    Ok(AnalysisReport {
        threshold_frac,
        source_peak_chi: arrivals.reference,
        max_abs_chi: w.max_abs_chi(),
        propagated: arrivals.reference > 0.0,
        velocity: estimate_velocity(&arrivals).ok(),
        segments,
        amplitude: amplitude_profile(w),
        arrivals,
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.propagated {
            out.push_str("no propagation: the source never deviates from equilibrium\n");
            return out;
        }
        let _ = writeln!(out, "source peak |chi| {:.6e} rad/s", self.source_peak_chi);
        let _ = writeln!(out, "field peak |chi|  {:.6e} rad/s", self.max_abs_chi);
        match self.velocity {
            Some(v) => {
                let _ = writeln!(
                    out,
                    "front velocity    {:.4} mi/s (R2 {:.4}, {} points)",
                    v.velocity, v.r2, v.points
                );
            }
            None => out.push_str("front velocity    n/a\n"),
        }
        let _ = writeln!(
            out,
            "\n{:<10} {:>9} {:>9} {:>12} {:>12} {:>8} {:>12}",
            "line", "xi0", "xi1", "v_pred", "v_meas", "R2", "mean_peak"
        );
        for s in &self.segments {
            let (vm, r2) = match s.velocity {
                Some(f) => (format!("{:.4}", f.velocity), format!("{:.4}", f.r2)),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{:<10} {:>9.3} {:>9.3} {:>12.4} {:>12} {:>8} {:>12.4e}",
                s.line, s.start_xi, s.end_xi, s.predicted_velocity, vm, r2, s.mean_peak_chi
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::{ContinuumGrid, FieldState};
    use crate::solver::{integrate, BoundarySchedule, BoundaryValues, SolverConfig};
    use approx::assert_abs_diff_eq;

    fn uniform_run(p: f64, t_end: f64) -> WaveField {
        let n = 201;
        let g = ContinuumGrid::uniform(n, 0.2, 5.0, 0.0, 0.01, 376.991);
        let bc = |p| BoundaryValues {
            source_power: p,
            bus_voltages: g.bus_markers.keys().map(|&i| (i, 1.0)).collect(),
        };
        let cfg = SolverConfig {
            t_end,
            ..SolverConfig::default()
        };
        integrate(
            &g,
            FieldState::zeros(vec![1.0; n]),
            &BoundarySchedule::step(bc(0.0), bc(p), 1.0),
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn linear_curve_fit_is_exact() {
        let t: Vec<f64> = (0..10).map(|k| 0.3 * k as f64).collect();
        let xi: Vec<f64> = t.iter().map(|t| 2.0 + 1.5 * t).collect();
        let f = fit_velocity(&xi, &t).unwrap();
        assert_abs_diff_eq!(f.velocity, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        assert_eq!(fit_velocity(&xi[..2], &t[..2]), Err(AnalysisError::TooFewArrivals(2)));
    }

    #[test]
    fn zero_field_has_no_arrivals() {
        let w = uniform_run(0.0, 3.0);
        let c = detect_arrival_times(&w, 0.05).unwrap();
        assert!(c.arrival_t.iter().all(Option::is_none));
        assert!(amplitude_profile(&w).iter().all(|&a| a == 0.0));
        assert!(estimate_velocity(&c).is_err());
        assert!(detect_arrival_times(&w, 1.5).is_err());
        let r = analyze(&w, 0.05, None).unwrap();
        assert!(r.to_text().starts_with("no propagation"));
    }

    #[test]
    fn uniform_front_speed_and_onset() {
        let w = uniform_run(0.5, 20.0);
        let c = detect_arrival_times(&w, DEFAULT_THRESHOLD).unwrap();
        let t0 = c.arrival_t[0].unwrap();
        assert!((t0 - 1.0).abs() <= w.dt, "onset {t0}");
        let expected = (5.0f64 / (0.01 * 376.991)).sqrt();
        let fit = estimate_velocity(&c).unwrap();
        assert!(
            (fit.velocity / expected - 1.0).abs() < 0.02,
            "{} vs {expected}",
            fit.velocity
        );
        let arrivals: Vec<f64> = c.arrival_t.iter().flatten().copied().collect();
        assert!(arrivals.windows(2).all(|p| p[1] >= p[0] - 1e-12));
    }

    #[test]
    fn compare_is_symmetric_and_zero_on_self() {
        let a = uniform_run(0.5, 5.0);
        let mut b = a.clone();
        for s in &mut b.snapshots {
            s.chi[10] += 0.01;
        }
        let same = compare_models(&a, &a).unwrap();
        assert_eq!(same.summary, 0.0);
        let ab = compare_models(&a, &b).unwrap();
        let ba = compare_models(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.summary > 0.0);
        let shorter = uniform_run(0.5, 4.0);
        assert!(compare_models(&a, &shorter).is_err());
    }
}
