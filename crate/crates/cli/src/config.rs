//! Run settings shared by `simulate` and `sweep`.
//!
//! A JSON config file holds the same keys as the command-line flags; flags
//! override the file. The resolved settings are written back as the run
//! manifest, so `emw simulate --config <out>/manifest.json` repeats a run.

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use emw_core::solver::{BoundaryMode, Model, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Hom,
    Nonhom,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryChoice {
    Characteristic,
    Fictitious,
}

impl From<BoundaryChoice> for BoundaryMode {
    fn from(b: BoundaryChoice) -> Self {
        match b {
            BoundaryChoice::Characteristic => BoundaryMode::Characteristic,
            BoundaryChoice::Fictitious => BoundaryMode::Fictitious,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    H,
    Length,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    pub case: Option<String>,
    pub sidecar: Option<String>,
    pub scenario: Option<String>,
    pub src: Option<u32>,
    pub dst: Option<u32>,
    pub model: Option<ModelChoice>,
    pub boundary: Option<BoundaryChoice>,
    pub dxi: Option<f64>,
    pub courant: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub record_stride: Option<usize>,
    pub lag_s: Option<f64>,
    pub v_const: Option<f64>,
    pub threshold: Option<f64>,
    pub out: Option<String>,
    pub param: Option<SweepParam>,
    pub values: Option<Vec<f64>>,
    pub line: Option<String>,
    pub gen: Option<u32>,
    pub jobs: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))
    }

    /// Fields set in `flags` replace those of `self`.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(self, flags; case, sidecar, scenario, src, dst, model, boundary, dxi, courant, t_end,
            dt, record_stride, lag_s, v_const, threshold, out, param, values, line, gen, jobs);
        self
    }

    pub fn solver(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            courant: self.courant.unwrap_or(d.courant),
            t_end: self.t_end.unwrap_or(d.t_end),
            model: match self.model {
                Some(ModelChoice::Hom) => Model::Homogeneous,
                _ => Model::Nonhomogeneous,
            },
            boundary_mode: self.boundary.map_or(d.boundary_mode, Into::into),
            record_stride: self.record_stride.unwrap_or(d.record_stride),
            dxi: self.dxi.unwrap_or(d.dxi),
            v_const: self.v_const,
            lag_s: self.lag_s.unwrap_or(d.lag_s),
            growth_limit: d.growth_limit,
            dt: self.dt,
        }
    }

    /// Copy with every solver default spelled out, for the manifest.
    pub fn resolved(&self) -> Self {
        let s = self.solver();
        RunConfig {
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
            model: Some(self.model.unwrap_or(ModelChoice::Nonhom)),
            boundary: Some(self.boundary.unwrap_or(BoundaryChoice::Characteristic)),
            dxi: Some(s.dxi),
            courant: Some(s.courant),
            t_end: Some(s.t_end),
            record_stride: Some(s.record_stride),
            lag_s: Some(s.lag_s),
            threshold: Some(self.threshold()),
            ..self.clone()
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(emw_core::analysis::DEFAULT_THRESHOLD)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig {
            dxi: Some(0.1),
            courant: Some(0.5),
            ..Default::default()
        };
        let flags = RunConfig {
            courant: Some(0.8),
            ..Default::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.dxi, Some(0.1));
        assert_eq!(merged.courant, Some(0.8));
        assert_eq!(merged.solver().courant, 0.8);
    }

    #[test]
    fn manifest_round_trips() {
        let cfg = RunConfig {
            case: Some("builtin:ieee39".into()),
            src: Some(39),
            ..Default::default()
        }
        .resolved();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.solver(), cfg.solver());
    }
}
