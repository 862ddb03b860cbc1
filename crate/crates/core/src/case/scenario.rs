use serde::{Deserialize, Serialize};

use super::{BusId, CaseError, LineId, LineStatus, PowerCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    LoadStep,
    LineOutage,
}

/// A bus id (load steps) or a line reference (outages). Lines accept
/// `"from-to"` labels or a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Id(u32),
    Label(String),
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Id(n) => write!(f, "{n}"),
            Target::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub kind: DisturbanceKind,
    pub target: Target,
    #[serde(default)]
    pub magnitude_fraction: f64,
    #[serde(default)]
    pub t_start: f64,
    /// Seconds; `None` means the disturbance never clears.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Scale only active power on a load step.
    #[serde(default)]
    pub p_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    During,
    Post,
}

impl Disturbance {
    pub fn load_step(bus: BusId, fraction: f64, t_start: f64) -> Self {
        Disturbance {
            kind: DisturbanceKind::LoadStep,
            target: Target::Id(bus),
            magnitude_fraction: fraction,
            t_start,
            duration: None,
            p_only: false,
        }
    }

    pub fn line_outage(line: &str, t_start: f64, duration: Option<f64>) -> Self {
        Disturbance {
            kind: DisturbanceKind::LineOutage,
            target: Target::Label(line.to_string()),
            magnitude_fraction: 0.0,
            t_start,
            duration,
            p_only: false,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.duration.map_or(f64::INFINITY, |d| self.t_start + d)
    }

    pub fn phase_at(&self, t: f64) -> Phase {
        if t < self.t_start {
            Phase::Pre
        } else if t < self.t_end() {
            Phase::During
        } else {
            Phase::Post
        }
    }

    /// Invariant violations of the disturbance itself (not its target).
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.t_start >= 0.0) {
            out.push(format!("t_start must be >= 0, got {}", self.t_start));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0) {
                out.push(format!("duration must be > 0, got {d}"));
            }
        }
        if self.kind == DisturbanceKind::LoadStep && !(self.magnitude_fraction > -1.0) {
            out.push(format!(
                "magnitude_fraction must be > -1, got {}",
                self.magnitude_fraction
            ));
        }
        out
    }

    pub fn target_bus(&self, c: &PowerCase) -> Result<BusId, CaseError> {
        match &self.target {
            Target::Id(id) if c.bus(*id).is_some() => Ok(*id),
            Target::Label(s) => match s.trim().parse::<BusId>() {
                Ok(id) if c.bus(id).is_some() => Ok(id),
                _ => Err(CaseError::UnknownTarget(format!("bus {s}"))),
            },
            Target::Id(id) => Err(CaseError::UnknownTarget(format!("bus {id}"))),
        }
    }

    pub fn target_line(&self, c: &PowerCase) -> Result<LineId, CaseError> {
        let reference = self.target.to_string();
        c.find_line(&reference)
            .ok_or_else(|| CaseError::UnknownTarget(format!("line {reference}")))
    }
}

/// Returns a copy of `c` with `d` applied as seen during `phase`.
pub fn apply_disturbance(c: &PowerCase, d: &Disturbance, phase: Phase) -> Result<PowerCase, CaseError> {
    let mut out = c.clone();
    match d.kind {
        DisturbanceKind::LoadStep => {
            let id = d.target_bus(c)?;
            if phase != Phase::Pre {
                let scale = 1.0 + d.magnitude_fraction;
                let bus = out
                    .buses
                    .iter_mut()
                    .find(|b| b.id == id)
                    .expect("target bus resolved above");
                bus.p_load *= scale;
                if !d.p_only {
                    bus.q_load *= scale;
                }
            }
        }
        DisturbanceKind::LineOutage => {
            let id = d.target_line(c)?;
            if phase == Phase::During {
                out.lines[id.0].status = LineStatus::Out;
            }
        }
    }
    Ok(out)
}

/// Contents of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub disturbance: Disturbance,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CaseError> {
        let s: Scenario = serde_json::from_str(text).map_err(super::json_error)?;
        let problems = s.disturbance.problems();
        if problems.is_empty() {
            Ok(s)
        } else {
            Err(CaseError::Schema(problems.join("; ")))
        }
    }
}
