//! The simulate pipeline and parameter sweeps built on it.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use emw_core::analysis::{self, AnalysisReport, DivergenceReport};
use emw_core::case::{BusId, Disturbance, DisturbanceKind, PowerCase, Target};
use emw_core::inertia::{self, InertiaMap};
use emw_core::path::{self, EmwPath};
use emw_core::powerflow::{self, PowerFlowSolution};
use emw_core::solver::{self, Model, WaveField};

use crate::config::{ModelChoice, RunConfig, SweepParam};
use crate::io;

#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn base_solution(c: &PowerCase) -> Result<(InertiaMap, PowerFlowSolution)> {
    let map = inertia::distribute_inertia(c, inertia::DEFAULT_TOL, inertia::DEFAULT_MAX_ROUNDS)
        .context("inertia distribution")?;
    let sol =
        powerflow::solve_power_flow(c, powerflow::DEFAULT_TOL, powerflow::DEFAULT_MAX_ITER).context("power flow")?;
    Ok((map, sol))
}

pub fn find_path(c: &PowerCase, src: BusId, dst: BusId) -> Result<EmwPath> {
    let (map, sol) = base_solution(c)?;
    path::shortest_emw_path(c, &map, &sol, src, dst).context("path search")
}

/// Source bus: explicit, else the bus a load step acts on.
fn source_bus(cfg: &RunConfig, d: &Disturbance) -> Result<BusId> {
    match (cfg.src, d.kind, &d.target) {
        (Some(s), _, _) => Ok(s),
        (None, DisturbanceKind::LoadStep, Target::Id(b)) => Ok(*b),
        _ => Err(usage(
            "--src is required unless the scenario is a load step on a bus id",
        )),
    }
}

pub struct RunOutput {
    pub path: EmwPath,
    pub primary: WaveField,
    pub hom: Option<WaveField>,
    pub analysis: AnalysisReport,
    pub hom_analysis: Option<AnalysisReport>,
    pub comparison: Option<DivergenceReport>,
}

pub fn run_pipeline(c: &PowerCase, d: &Disturbance, cfg: &RunConfig) -> Result<RunOutput> {
    let src = source_bus(cfg, d)?;
    let dst = cfg.dst.ok_or_else(|| usage("--dst is required"))?;
    let path = find_path(c, src, dst)?;
    let solver_cfg = cfg.solver();
    let thr = cfg.threshold();
    let (primary, hom) = match cfg.model.unwrap_or(ModelChoice::Nonhom) {
        ModelChoice::Both => {
            let (h, n) = solver::simulate_both(c, d, &path, &solver_cfg).context("simulation")?;
            (n, Some(h))
        }
        _ => (solver::simulate(c, d, &path, &solver_cfg).context("simulation")?, None),
    };
    let analysis = analysis::analyze(&primary, thr, Some(c)).context("analysis")?;
    let hom_analysis = hom
        .as_ref()
        .map(|h| analysis::analyze(h, thr, Some(c)))
        .transpose()
        .context("analysis")?;
    let comparison = hom
        .as_ref()
        .map(|h| analysis::compare_models(h, &primary))
        .transpose()
        .context("model comparison")?;
    Ok(RunOutput {
        path,
        primary,
        hom,
        analysis,
        hom_analysis,
        comparison,
    })
}

pub fn write_artifacts(dir: &Path, c: &PowerCase, cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    io::write(dir, "path.json", &out.path.to_json(c))?;
    io::write(dir, "grid.csv", &out.primary.grid.to_csv())?;
    io::write(dir, "wavefield.csv", &out.primary.to_csv())?;
    io::write(dir, "analysis.json", &out.analysis.to_json())?;
    if let Some(h) = &out.hom {
        io::write(dir, "wavefield_hom.csv", &h.to_csv())?;
    }
    if let Some(a) = &out.hom_analysis {
        io::write(dir, "analysis_hom.json", &a.to_json())?;
    }
    if let Some(cmp) = &out.comparison {
        io::write(dir, "comparison.json", &serde_json::to_string_pretty(cmp)?)?;
    }
    io::write(dir, "manifest.json", &serde_json::to_string_pretty(&cfg.resolved())?)?;
    Ok(())
}

pub fn summary(out: &RunOutput) -> String {
    let buses: Vec<String> = out.path.buses.iter().map(|b| b.to_string()).collect();
    let model = match out.primary.model {
        Model::Homogeneous => "homogeneous",
        Model::Nonhomogeneous => "nonhomogeneous",
    };
    let mut s = format!(
        "path {} ({:.3} mi, predicted travel {:.4} s)\nmodel {model}, {} points, dt {:.4e} s, {} steps\n",
        buses.join(" -> "),
        out.path.total_length_miles,
        out.path.travel_time_s,
        out.primary.grid.n_points(),
        out.primary.dt,
        out.primary.steps,
    );
    s.push_str(&out.analysis.to_text());
    if let Some(cmp) = &out.comparison {
        s.push_str(&format!(
            "homogeneous vs nonhomogeneous: max L2 chi difference {:.4e}\n",
            cmp.summary
        ));
    }
    s
}

/// Case with the sweep parameter set to `value`.
fn sweep_case(base: &PowerCase, cfg: &RunConfig, param: SweepParam, value: f64) -> Result<PowerCase> {
    let mut c = base.clone();
    match param {
        SweepParam::H => {
            let mut hit = false;
            for g in c.generators.iter_mut().filter(|g| cfg.gen.is_none_or(|b| g.bus == b)) {
                g.h_const = value;
                hit = true;
            }
            if !hit {
                bail!("no generator matches --gen {:?}", cfg.gen);
            }
            c.refresh_derived();
        }
        SweepParam::Length => {
            let reference = cfg
                .line
                .as_deref()
                .ok_or_else(|| usage("--param length needs --line"))?;
            let id = c
                .find_line(reference)
                .ok_or_else(|| anyhow!("no line matches {reference:?}"))?;
            c.lines[id.0].length_miles *= value;
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub peak_chi: f64,
    pub front_velocity: Option<f64>,
    pub segment_line: Option<String>,
    pub segment_velocity: Option<f64>,
    pub segment_predicted_velocity: Option<f64>,
}

fn sweep_row(c: &PowerCase, cfg: &RunConfig, value: f64, out: &RunOutput) -> SweepRow {
    let seg = match cfg.line.as_deref().and_then(|r| c.find_line(r)) {
        Some(id) => out.analysis.segments.iter().find(|s| s.line == c.line_label(id)),
        None => out.analysis.segments.first(),
    };
    SweepRow {
        value,
        peak_chi: out.analysis.max_abs_chi,
        front_velocity: out.analysis.velocity.map(|v| v.velocity),
        segment_line: seg.map(|s| s.line.clone()),
        segment_velocity: seg.and_then(|s| s.velocity.map(|v| v.velocity)),
        segment_predicted_velocity: seg.map(|s| s.predicted_velocity),
    }
}

pub fn sweep(base: &PowerCase, d: &Disturbance, cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let param = cfg.param.ok_or_else(|| usage("--param is required"))?;
    let values = cfg
        .values
        .clone()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| usage("--values is required"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    let out_dir = cfg.out.as_ref().map(PathBuf::from);
    pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &value)| -> Result<SweepRow> {
                let c = sweep_case(base, cfg, param, value)?;
                let out = run_pipeline(&c, d, cfg).with_context(|| format!("sweep value {value}"))?;
                if let Some(dir) = &out_dir {
                    let run_cfg = RunConfig {
                        values: Some(vec![value]),
                        ..cfg.clone()
                    };
                    write_artifacts(&dir.join(format!("run_{k:03}")), &c, &run_cfg, &out)?;
                }
                Ok(sweep_row(&c, cfg, value, &out))
            })
            .collect()
    })
}

pub fn sweep_table(param: SweepParam, rows: &[SweepRow]) -> String {
    let name = match param {
        SweepParam::H => "H",
        SweepParam::Length => "length_x",
    };
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut s = format!(
        "{name:>10} {:>14} {:>12} {:>10} {:>12} {:>12}\n",
        "peak_chi", "front_v", "segment", "seg_v", "seg_v_pred"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>10.4} {:>14.6e} {:>12} {:>10} {:>12} {:>12}\n",
            r.value,
            r.peak_chi,
            opt(r.front_velocity),
            r.segment_line.as_deref().unwrap_or("-"),
            opt(r.segment_velocity),
            opt(r.segment_predicted_velocity),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use emw_core::cases;

    fn two_bus_cfg() -> RunConfig {
        RunConfig {
            dst: Some(1),
            t_end: Some(2.0),
            ..Default::default()
        }
    }

    #[test]
    fn load_step_source_defaults_to_target_bus() {
        let d = cases::scenario(cases::TWO_BUS_LOAD_STEP).disturbance;
        assert_eq!(source_bus(&two_bus_cfg(), &d).unwrap(), 2);
        let outage = cases::scenario(cases::CASE39_LINE_OUTAGE).disturbance;
        assert!(source_bus(&two_bus_cfg(), &outage).is_err());
    }

    #[test]
    fn single_value_sweep_matches_simulate() {
        let c = cases::two_bus();
        let d = cases::scenario(cases::TWO_BUS_LOAD_STEP).disturbance;
        let h = c.generators[0].h_const;
        let cfg = RunConfig {
            param: Some(SweepParam::H),
            values: Some(vec![h]),
            jobs: Some(1),
            ..two_bus_cfg()
        };
        let rows = sweep(&c, &d, &cfg).unwrap();
        let direct = run_pipeline(&c, &d, &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].peak_chi, direct.analysis.max_abs_chi);
    }
}
