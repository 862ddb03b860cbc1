//! Network cases and disturbance scenarios.
//!
//! A [`PowerCase`] is the static description of a transmission network. Loads
//! and generator outputs are kept in MW/MVAr exactly as they appear in case
//! files; branch impedances are per-unit on `base_mva`. Helpers such as
//! [`Bus::p_load_pu`] do the conversion for the numerical modules.

mod matpower;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matpower::{parse_matpower, parse_matpower_with_sidecar, GeneratorDynamics, MatpowerSidecar};
pub use scenario::{apply_disturbance, Disturbance, DisturbanceKind, Phase, Scenario, Target};

pub type BusId = u32;

/// Index of a line inside [`PowerCase::lines`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineId(pub usize);

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0 + 1)
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{what} refers to unknown bus {id}")]
    DanglingBus { what: String, id: BusId },
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("malformed {matrix} row {row}: {message}")]
    MalformedRow {
        matrix: String,
        row: usize,
        message: String,
    },
    #[error("unknown disturbance target {0}")]
    UnknownTarget(String),
    #[error("case is not simulable:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    #[serde(default = "unit_voltage")]
    pub v_set: f64,
    /// MW
    #[serde(default)]
    pub p_load: f64,
    /// MVAr
    #[serde(default)]
    pub q_load: f64,
}

fn unit_voltage() -> f64 {
    1.0
}

impl Bus {
    pub fn p_load_pu(&self, base_mva: f64) -> f64 {
        self.p_load / base_mva
    }

    pub fn q_load_pu(&self, base_mva: f64) -> f64 {
        self.q_load / base_mva
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LineStatus {
    #[default]
    InService,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split half per end.
    #[serde(default)]
    pub b_shunt: f64,
    pub length_miles: f64,
    #[serde(default)]
    pub status: LineStatus,
}

impl Line {
    pub fn in_service(&self) -> bool {
        self.status == LineStatus::InService
    }

    /// Magnitude of the series admittance |1/(r + jx)|.
    pub fn admittance_magnitude(&self) -> f64 {
        1.0 / self.r.hypot(self.x)
    }

    /// Series susceptance scaled to the line length, `b = length / x`.
    pub fn susceptance_per_mile(&self) -> f64 {
        self.length_miles / self.x
    }

    /// Series conductance scaled to the line length, `g = G * length`.
    pub fn conductance_per_mile(&self) -> f64 {
        self.length_miles * self.r / (self.r * self.r + self.x * self.x)
    }

    pub fn other_end(&self, bus: BusId) -> Option<BusId> {
        if bus == self.from_bus {
            Some(self.to_bus)
        } else if bus == self.to_bus {
            Some(self.from_bus)
        } else {
            None
        }
    }

    pub fn touches(&self, bus: BusId) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    /// MJ/MVA on the machine rating.
    pub h_const: f64,
    pub mva_rating: f64,
    /// MW
    #[serde(default)]
    pub p_gen: f64,
    /// `2 H S / (S_base w0)`; recomputed whenever a case is built.
    #[serde(default)]
    pub inertia_j: f64,
}

impl Generator {
    pub fn p_gen_pu(&self, base_mva: f64) -> f64 {
        self.p_gen / base_mva
    }
}

pub fn rotational_inertia(h_const: f64, mva_rating: f64, base_mva: f64, omega0: f64) -> f64 {
    2.0 * h_const * mva_rating / (base_mva * omega0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCase {
    pub base_mva: f64,
    pub frequency_hz: f64,
    pub omega0: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    base_mva: f64,
    #[serde(default = "nominal_frequency")]
    frequency_hz: f64,
    #[serde(default)]
    #[allow(dead_code)]
    omega0: Option<f64>,
    buses: Vec<Bus>,
    #[serde(default)]
    lines: Vec<Line>,
    #[serde(default)]
    generators: Vec<Generator>,
}

fn nominal_frequency() -> f64 {
    60.0
}

impl PowerCase {
    /// Builds a case, deriving `omega0` and every generator's `inertia_j` and
    /// checking referential integrity. Domain invariants (slack count, positive
    /// reactance, ...) are left to [`validate_case`].
    pub fn new(
        base_mva: f64,
        frequency_hz: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
    ) -> Result<Self, CaseError> {
        let mut case = PowerCase {
            base_mva,
            frequency_hz,
            omega0: 2.0 * PI * frequency_hz,
            buses,
            lines,
            generators,
        };
        case.refresh_derived();
        case.check_references()?;
        Ok(case)
    }

    /// Recomputes derived quantities after a field was edited in place.
    pub fn refresh_derived(&mut self) {
        self.omega0 = 2.0 * PI * self.frequency_hz;
        for g in &mut self.generators {
            g.inertia_j = rotational_inertia(g.h_const, g.mva_rating, self.base_mva, self.omega0);
        }
    }

    fn check_references(&self) -> Result<(), CaseError> {
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(CaseError::DuplicateBus(b.id));
            }
        }
        for (k, l) in self.lines.iter().enumerate() {
            for id in [l.from_bus, l.to_bus] {
                if !seen.contains(&id) {
                    return Err(CaseError::DanglingBus {
                        what: format!("line {}", k + 1),
                        id,
                    });
                }
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if !seen.contains(&g.bus) {
                return Err(CaseError::DanglingBus {
                    what: format!("generator {}", k + 1),
                    id: g.bus,
                });
            }
        }
        Ok(())
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line(&self, id: LineId) -> Option<&Line> {
        self.lines.get(id.0)
    }

    /// `"from-to"`, with a `#k` suffix when parallel lines share both ends.
    pub fn line_label(&self, id: LineId) -> String {
        let l = &self.lines[id.0];
        let key = ordered_pair(l.from_bus, l.to_bus);
        let parallels: Vec<usize> = self
            .lines
            .iter()
            .enumerate()
            .filter(|(_, o)| ordered_pair(o.from_bus, o.to_bus) == key)
            .map(|(k, _)| k)
            .collect();
        if parallels.len() > 1 {
            let n = parallels.iter().position(|&k| k == id.0).unwrap_or(0) + 1;
            format!("{}-{}#{}", l.from_bus, l.to_bus, n)
        } else {
            format!("{}-{}", l.from_bus, l.to_bus)
        }
    }

    /// Resolves `"6-7"` (either orientation), `"6-7#2"` for parallels, or a
    /// 1-based line number.
    pub fn find_line(&self, reference: &str) -> Option<LineId> {
        let reference = reference.trim();
        if let Ok(n) = reference.parse::<usize>() {
            return (n >= 1 && n <= self.lines.len()).then(|| LineId(n - 1));
        }
        let (ends, nth) = match reference.split_once('#') {
            Some((ends, n)) => (ends, n.parse::<usize>().ok()?),
            None => (reference, 1),
        };
        let (a, b) = ends.split_once('-')?;
        let a: BusId = a.trim().parse().ok()?;
        let b: BusId = b.trim().parse().ok()?;
        let key = ordered_pair(a, b);
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| ordered_pair(l.from_bus, l.to_bus) == key)
            .nth(nth.checked_sub(1)?)
            .map(|(k, _)| LineId(k))
    }

    pub fn generator_buses(&self) -> BTreeSet<BusId> {
        self.generators.iter().map(|g| g.bus).collect()
    }

    pub fn total_inertia(&self) -> f64 {
        self.generators.iter().map(|g| g.inertia_j).sum()
    }

    pub fn slack_bus(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.kind == BusKind::Slack)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialization cannot fail")
    }
}

pub(crate) fn ordered_pair(a: BusId, b: BusId) -> (BusId, BusId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn json_error(e: serde_json::Error) -> CaseError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => CaseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
        Category::Data => CaseError::Schema(e.to_string()),
    }
}

/// Parses the native JSON schema and checks structure and references only.
pub fn parse_case_json_unchecked(text: &str) -> Result<PowerCase, CaseError> {
    let raw: RawCase = serde_json::from_str(text).map_err(json_error)?;
    PowerCase::new(raw.base_mva, raw.frequency_hz, raw.buses, raw.lines, raw.generators)
}

/// Parses the native JSON schema and rejects cases that violate any invariant.
pub fn parse_case_json(text: &str) -> Result<PowerCase, CaseError> {
    let case = parse_case_json_unchecked(text)?;
    let report = validate_case(&case);
    if report.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Invalid(report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    fn push(&mut self, code: &'static str, message: String) {
        self.violations.push(Violation { code, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.code, v.message)?;
        }
        Ok(())
    }
}

/// Lists every invariant violation; an empty report means the case can be simulated.
pub fn validate_case(c: &PowerCase) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !(c.base_mva > 0.0) {
        report.push("base_mva", format!("base_mva must be > 0, got {}", c.base_mva));
    }
    if !(c.frequency_hz > 0.0) {
        report.push("frequency", format!("frequency_hz must be > 0, got {}", c.frequency_hz));
    }

    let mut counts: BTreeMap<BusId, usize> = BTreeMap::new();
    for b in &c.buses {
        *counts.entry(b.id).or_default() += 1;
    }
    for (id, n) in &counts {
        if *n > 1 {
            report.push("duplicate bus", format!("bus {id} appears {n} times"));
        }
    }

    let slacks: Vec<BusId> = c
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Slack)
        .map(|b| b.id)
        .collect();
    match slacks.len() {
        0 => report.push("no slack", "case has no slack bus".into()),
        1 => {}
        _ => report.push("multiple slack", format!("slack buses {slacks:?}")),
    }

    for b in &c.buses {
        if b.kind != BusKind::Pq && !(b.v_set > 0.0) {
            report.push("v_set", format!("bus {}: v_set must be > 0, got {}", b.id, b.v_set));
        }
    }

    for (k, l) in c.lines.iter().enumerate() {
        let label = c.line_label(LineId(k));
        for id in [l.from_bus, l.to_bus] {
            if !counts.contains_key(&id) {
                report.push("dangling bus", format!("line {label}: unknown bus {id}"));
            }
        }
        if l.from_bus == l.to_bus {
            report.push("self loop", format!("line {label} connects a bus to itself"));
        }
        if !(l.x > 0.0) {
            report.push("reactance", format!("line {label}: x must be > 0, got {}", l.x));
        }
        if !(l.r >= 0.0) {
            report.push("resistance", format!("line {label}: r must be >= 0, got {}", l.r));
        }
        if !(l.b_shunt >= 0.0) {
            report.push(
                "shunt",
                format!("line {label}: b_shunt must be >= 0, got {}", l.b_shunt),
            );
        }
        if !(l.length_miles > 0.0) {
            report.push(
                "length",
                format!("line {label}: length_miles must be > 0, got {}", l.length_miles),
            );
        }
    }

    for (k, g) in c.generators.iter().enumerate() {
        if !counts.contains_key(&g.bus) {
            report.push("dangling bus", format!("generator {}: unknown bus {}", k + 1, g.bus));
        }
        if !(g.h_const > 0.0) {
            report.push(
                "h_const",
                format!("generator {} at bus {}: h_const must be > 0", k + 1, g.bus),
            );
        }
        if !(g.mva_rating > 0.0) {
            report.push(
                "mva_rating",
                format!("generator {} at bus {}: mva_rating must be > 0", k + 1, g.bus),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TWO_BUS: &str = include_str!("../../data/two_bus.json");

    #[test]
    fn minimal_two_bus_case_parses() {
        let c = parse_case_json(TWO_BUS).unwrap();
        assert_eq!(c.buses.len(), 2);
        assert_eq!(c.lines.len(), 1);
        assert_eq!(c.lines[0].r, 0.04);
        assert_eq!(c.lines[0].x, 0.2);
        assert_eq!(c.omega0, 2.0 * PI * 60.0);
        let g = &c.generators[0];
        assert!((g.inertia_j - 2.0 * 1.5 * 100.0 / (100.0 * c.omega0)).abs() < 1e-15);
    }

    #[test]
    fn zero_line_case_is_legal() {
        let text = r#"{"base_mva": 100, "frequency_hz": 50,
            "buses": [{"id": 1, "kind": "slack", "v_set": 1.0}]}"#;
        let c = parse_case_json(text).unwrap();
        assert!(c.lines.is_empty());
        assert!(validate_case(&c).is_empty());
    }

    #[test]
    fn dangling_bus_is_named() {
        let text = r#"{"base_mva": 100, "buses": [{"id": 1, "kind": "slack"}],
            "lines": [{"from_bus": 1, "to_bus": 99, "r": 0, "x": 0.1, "length_miles": 1}]}"#;
        match parse_case_json(text) {
            Err(CaseError::DanglingBus { id, .. }) => assert_eq!(id, 99),
            other => panic!("expected dangling bus error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = "{\n  \"base_mva\": 100,\n  \"buses\": [,]\n}";
        match parse_case_json(text) {
            Err(CaseError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let text = r#"{"base_mva": 100, "buses": [{"id": 1, "kind": "slack"}],
            "lines": [{"from_bus": 1, "to_bus": 1, "r": 0, "length_miles": 1}]}"#;
        match parse_case_json(text) {
            Err(CaseError::Schema(msg)) => assert!(msg.contains("`x`"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn validation_reports() {
        let c = parse_case_json(TWO_BUS).unwrap();
        assert!(validate_case(&c).is_empty());

        let mut two_slack = c.clone();
        two_slack.buses[1].kind = BusKind::Slack;
        let r = validate_case(&two_slack);
        assert_eq!(r.len(), 1);
        assert_eq!(r.violations[0].code, "multiple slack");

        let mut zero_x = c.clone();
        zero_x.lines[0].x = 0.0;
        let r = validate_case(&zero_x);
        assert_eq!(r.len(), 1);
        assert!(r.violations[0].message.contains("1-2"));
    }

    #[test]
    fn strict_parse_rejects_invalid_case() {
        let text = TWO_BUS.replace("\"pq\"", "\"slack\"");
        assert!(matches!(parse_case_json(&text), Err(CaseError::Invalid(_))));
        assert!(parse_case_json_unchecked(&text).is_ok());
    }

    #[test]
    fn line_lookup() {
        let text = r#"{"base_mva": 100, "buses": [{"id": 1, "kind": "slack"}, {"id": 2, "kind": "pq"}],
            "lines": [{"from_bus": 1, "to_bus": 2, "r": 0, "x": 0.1, "length_miles": 1},
                      {"from_bus": 2, "to_bus": 1, "r": 0, "x": 0.2, "length_miles": 1}]}"#;
        let c = parse_case_json(text).unwrap();
        assert_eq!(c.find_line("2-1"), Some(LineId(0)));
        assert_eq!(c.find_line("1-2#2"), Some(LineId(1)));
        assert_eq!(c.find_line("2"), Some(LineId(1)));
        assert_eq!(c.find_line("1-3"), None);
        assert_eq!(c.line_label(LineId(1)), "2-1#2");
    }
}
