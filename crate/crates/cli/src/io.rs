//! Reading inputs and writing run artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use emw_core::case::{
    parse_case_json_unchecked, parse_matpower_with_sidecar, validate_case, CaseError, Disturbance, PowerCase, Scenario,
};
use emw_core::cases;
use emw_core::continuum::{ContinuumGrid, FieldState, Segment};
use emw_core::solver::{Model, WaveField};

const BUILTIN: &str = "builtin:";

fn builtin_case(name: &str) -> Option<PowerCase> {
    match name {
        "ieee39" => Some(cases::ieee39()),
        "ieee39-dyn" => Some(cases::ieee39_with_dynamics()),
        "ieee9" => Some(cases::ieee9()),
        "two_bus" => Some(cases::two_bus()),
        _ => None,
    }
}

fn builtin_scenario(name: &str) -> Option<&'static str> {
    match name {
        "two_bus_load_step" => Some(cases::TWO_BUS_LOAD_STEP),
        "case39_load_step" => Some(cases::CASE39_LOAD_STEP),
        "case39_line_outage" => Some(cases::CASE39_LINE_OUTAGE),
        _ => None,
    }
}

pub fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

/// Parses a case without rejecting invariant violations. `.m` files are
/// read as MATPOWER, everything else as JSON.
pub fn load_case_unchecked(path: &str, sidecar: Option<&str>) -> Result<PowerCase> {
    if let Some(name) = path.strip_prefix(BUILTIN) {
        return builtin_case(name).ok_or_else(|| anyhow!("unknown built-in case {name:?}"));
    }
    let text = read(path)?;
    let case = if path.ends_with(".m") {
        let side = sidecar.map(read).transpose()?;
        parse_matpower_with_sidecar(&text, side.as_deref())
    } else {
        if sidecar.is_some() {
            bail!("--sidecar only applies to MATPOWER (.m) cases");
        }
        parse_case_json_unchecked(&text)
    };
    case.with_context(|| format!("parsing case {path}"))
}

pub fn load_case(path: &str, sidecar: Option<&str>) -> Result<PowerCase> {
    let case = load_case_unchecked(path, sidecar)?;
    let report = validate_case(&case);
    if !report.is_empty() {
        return Err(CaseError::Invalid(report)).with_context(|| format!("case {path}"));
    }
    Ok(case)
}

pub fn load_scenario(path: &str) -> Result<Disturbance> {
    let text = match path.strip_prefix(BUILTIN) {
        Some(name) => builtin_scenario(name)
            .ok_or_else(|| anyhow!("unknown built-in scenario {name:?}"))?
            .to_string(),
        None => read(path)?,
    };
    Ok(Scenario::from_json(&text)
        .with_context(|| format!("parsing scenario {path}"))?
        .disturbance)
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Long-format wave field as written by `WaveField::to_csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    pub times: Vec<f64>,
    pub xi: Vec<f64>,
    pub delta_theta: Vec<Vec<f64>>,
    pub chi: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

pub fn read_field_table(path: &Path) -> Result<FieldTable> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let want = ["t", "xi", "delta_theta", "chi", "v"];
    if headers.iter().collect::<Vec<_>>() != want {
        bail!("{}: expected header {}", path.display(), want.join(","));
    }
    let mut table = FieldTable {
        times: vec![],
        xi: vec![],
        delta_theta: vec![],
        chi: vec![],
        v: vec![],
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .with_context(|| format!("{} row {}: {:?} is not a number", path.display(), row + 2, &rec[k]))
        };
        let (t, xi) = (num(0)?, num(1)?);
        if table.times.last() != Some(&t) {
            table.times.push(t);
            table.delta_theta.push(vec![]);
            table.chi.push(vec![]);
            table.v.push(vec![]);
        }
        if table.times.len() == 1 {
            table.xi.push(xi);
        }
        let k = table.times.len() - 1;
        table.delta_theta[k].push(num(2)?);
        table.chi[k].push(num(3)?);
        table.v[k].push(num(4)?);
    }
    let n = table.xi.len();
    if table.times.is_empty() || n < 3 {
        bail!("{}: wave field needs at least one snapshot of 3 points", path.display());
    }
    if let Some(k) = table.chi.iter().position(|c| c.len() != n) {
        bail!(
            "{}: snapshot at t={} has {} points, expected {n}",
            path.display(),
            table.times[k],
            table.chi[k].len()
        );
    }
    Ok(table)
}

pub fn read_grid(path: &Path, omega0: f64) -> Result<ContinuumGrid> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut xi = vec![];
    let mut params = vec![];
    let mut markers = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .with_context(|| format!("{} row {}: bad number {:?}", path.display(), row + 2, &rec[k]))
        };
        xi.push(num(1)?);
        params.push([num(2)?, num(3)?, num(4)?, num(5)?]);
        if !rec[6].is_empty() {
            markers.insert(row, rec[6].parse::<u32>().context("bad bus id in grid file")?);
        }
    }
    if xi.len() < 3 || markers.len() < 2 {
        bail!("{}: grid needs at least 3 points and 2 bus markers", path.display());
    }
    let dxi = xi[1] - xi[0];
    let idx: Vec<usize> = markers.keys().copied().collect();
    let segments = idx
        .windows(2)
        .map(|w| {
            let [b, g, j_h, nu] = params[w[0]];
            Segment {
                line: None,
                from_bus: markers[&w[0]],
                to_bus: markers[&w[1]],
                start: w[0],
                end: w[1],
                length_miles: (w[1] - w[0]) as f64 * dxi,
                b,
                g,
                j_h,
                nu,
            }
        })
        .collect();
    Ok(ContinuumGrid::from_segments(dxi, omega0, segments, BTreeMap::new()))
}

/// Rebuilds enough of a `WaveField` for analysis from its CSV artifacts.
pub fn wavefield_from_files(field: &Path, grid: &Path) -> Result<WaveField> {
    let table = read_field_table(field)?;
    let grid = read_grid(grid, 2.0 * std::f64::consts::PI * 60.0)?;
    if grid.n_points() != table.xi.len() {
        bail!(
            "grid has {} points but the wave field has {}",
            grid.n_points(),
            table.xi.len()
        );
    }
    let snapshots = table
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut s = FieldState::zeros(table.v[k].clone());
            s.time = t;
            s.chi = table.chi[k].clone();
            s.delta_theta = table.delta_theta[k].clone();
            s
        })
        .collect();
    let dt = if table.times.len() > 1 {
        table.times[1] - table.times[0]
    } else {
        0.0
    };
    Ok(WaveField {
        steps: table.times.len() - 1,
        times: table.times,
        snapshots,
        grid,
        dt,
        model: Model::Nonhomogeneous,
        forced_chi: 0.0,
    })
}
