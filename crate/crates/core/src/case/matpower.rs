//! Read-only ingestion of MATPOWER `.m` case files.
//!
//! The format carries no line lengths or machine inertia. Both come from an
//! optional JSON sidecar; without it lengths default to `100 * x` miles and
//! every machine gets `DEFAULT_H` MJ/MVA on its `mBase`.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{Bus, BusId, BusKind, CaseError, Generator, Line, LineStatus, PowerCase};

pub const DEFAULT_H: f64 = 5.0;
pub const MILES_PER_PU_REACTANCE: f64 = 100.0;

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDynamics {
    pub h_const: f64,
    #[serde(default)]
    pub mva_rating: Option<f64>,
}

/// Data the MATPOWER format has no room for.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatpowerSidecar {
    #[serde(default)]
    pub frequency_hz: Option<f64>,
    /// Line reference (`"from-to"` or 1-based row) to miles.
    #[serde(default)]
    pub lengths: BTreeMap<String, f64>,
    /// Bus id (as a string key) to machine data; applies to every unit at that bus.
    #[serde(default)]
    pub generators: BTreeMap<String, GeneratorDynamics>,
}

pub fn parse_matpower(text: &str) -> Result<PowerCase, CaseError> {
    parse_matpower_with_sidecar(text, None)
}

pub fn parse_matpower_with_sidecar(text: &str, sidecar: Option<&str>) -> Result<PowerCase, CaseError> {
    let sidecar: MatpowerSidecar = match sidecar {
        Some(s) => serde_json::from_str(s).map_err(super::json_error)?,
        None => MatpowerSidecar::default(),
    };
    let clean = strip_comments(text);

    let base_mva = scalar(&clean, "baseMVA")?;
    let bus_rows = matrix(&clean, "bus")?;
    let gen_rows = matrix(&clean, "gen")?;
    let branch_rows = matrix(&clean, "branch")?;

    let mut gen_voltage: BTreeMap<BusId, f64> = BTreeMap::new();
    let mut generators = Vec::new();
    for (k, row) in gen_rows.iter().enumerate() {
        require_cols("gen", k, row, GEN_COLS)?;
        if row[7] <= 0.0 {
            continue;
        }
        let bus = bus_id("gen", k, row[0])?;
        gen_voltage.entry(bus).or_insert(row[5]);
        let dynamics = sidecar.generators.get(&bus.to_string());
        let m_base = if row[6] > 0.0 { row[6] } else { base_mva };
        generators.push(Generator {
            bus,
            h_const: dynamics.map_or(DEFAULT_H, |d| d.h_const),
            mva_rating: dynamics.and_then(|d| d.mva_rating).unwrap_or(m_base),
            p_gen: row[1],
            inertia_j: 0.0,
        });
    }

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (k, row) in bus_rows.iter().enumerate() {
        require_cols("bus", k, row, BUS_COLS)?;
        let id = bus_id("bus", k, row[0])?;
        let kind = match row[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Slack,
            t => {
                return Err(CaseError::MalformedRow {
                    matrix: "bus".into(),
                    row: k + 1,
                    message: format!("unsupported bus type {t}"),
                })
            }
        };
        let v_set = match kind {
            BusKind::Pq => 1.0,
            _ => gen_voltage.get(&id).copied().unwrap_or(row[7]),
        };
        buses.push(Bus {
            id,
            kind,
            v_set,
            p_load: row[2],
            q_load: row[3],
        });
    }

    let mut lines = Vec::with_capacity(branch_rows.len());
    for (k, row) in branch_rows.iter().enumerate() {
        require_cols("branch", k, row, BRANCH_COLS)?;
        lines.push(Line {
            from_bus: bus_id("branch", k, row[0])?,
            to_bus: bus_id("branch", k, row[1])?,
            r: row[2],
            x: row[3],
            b_shunt: row[4],
            length_miles: row[3] * MILES_PER_PU_REACTANCE,
            status: if row[10] > 0.0 {
                LineStatus::InService
            } else {
                LineStatus::Out
            },
        });
    }

    let mut case = PowerCase::new(base_mva, sidecar.frequency_hz.unwrap_or(60.0), buses, lines, generators)?;
    for (reference, miles) in &sidecar.lengths {
        let id = case
            .find_line(reference)
            .ok_or_else(|| CaseError::Schema(format!("sidecar length for unknown line {reference}")))?;
        case.lines[id.0].length_miles = *miles;
    }
    Ok(case)
}

fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn scalar(text: &str, name: &str) -> Result<f64, CaseError> {
    let key = format!("mpc.{name}");
    let start = text
        .find(&key)
        .ok_or_else(|| CaseError::Schema(format!("missing {key}")))?;
    let rest = &text[start + key.len()..];
    let rest = rest
        .trim_start()
        .strip_prefix('=')
        .ok_or_else(|| CaseError::Schema(format!("{key} is not an assignment")))?;
    let value = rest.split(';').next().unwrap_or("").trim();
    value
        .parse()
        .map_err(|_| CaseError::Schema(format!("{key} = {value:?} is not a number")))
}

fn matrix(text: &str, name: &str) -> Result<Vec<Vec<f64>>, CaseError> {
    let key = format!("mpc.{name}");
    let start = text
        .match_indices(&key)
        .map(|(i, _)| i)
        .find(|&i| text[i + key.len()..].trim_start().starts_with('='))
        .ok_or_else(|| CaseError::Schema(format!("missing matrix {key}")))?;
    let rest = &text[start + key.len()..];
    let open = rest
        .find('[')
        .ok_or_else(|| CaseError::Schema(format!("{key} has no opening bracket")))?;
    let close = rest[open..]
        .find(']')
        .ok_or_else(|| CaseError::Schema(format!("{key} has no closing bracket")))?;
    let body = &rest[open + 1..open + close];

    let mut rows = Vec::new();
    for chunk in body.split([';', '\n']) {
        let fields: Vec<&str> = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        let row_index = rows.len();
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| CaseError::MalformedRow {
                    matrix: name.to_string(),
                    row: row_index + 1,
                    message: format!("{f:?} is not a number"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn require_cols(matrix: &str, k: usize, row: &[f64], n: usize) -> Result<(), CaseError> {
    if row.len() < n {
        return Err(CaseError::MalformedRow {
            matrix: matrix.to_string(),
            row: k + 1,
            message: format!("expected at least {n} columns, found {}", row.len()),
        });
    }
    Ok(())
}

fn bus_id(matrix: &str, k: usize, v: f64) -> Result<BusId, CaseError> {
    if v >= 1.0 && v.fract() == 0.0 && v <= BusId::MAX as f64 {
        Ok(v as BusId)
    } else {
        Err(CaseError::MalformedRow {
            matrix: matrix.to_string(),
            row: k + 1,
            message: format!("{v} is not a valid bus number"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::validate_case;

    const CASE39: &str = include_str!("../../data/case39.m");
    const CASE39_DYN: &str = include_str!("../../data/case39.dyn.json");
    const CASE9: &str = include_str!("../../data/case9.m");

    #[test]
    fn ieee39_counts() {
        let c = parse_matpower(CASE39).unwrap();
        assert_eq!(c.buses.len(), 39);
        assert_eq!(c.generators.len(), 10);
        assert_eq!(c.lines.len(), 46);
        assert_eq!(c.slack_bus().unwrap().id, 31);
        assert!(validate_case(&c).is_empty());
    }

    #[test]
    fn ieee9_counts() {
        let c = parse_matpower(CASE9).unwrap();
        assert_eq!(c.buses.len(), 9);
        assert_eq!(c.generators.len(), 3);
        assert_eq!(c.bus(2).unwrap().v_set, 1.025);
    }

    #[test]
    fn default_lengths_follow_reactance() {
        let c = parse_matpower(CASE39).unwrap();
        let l = &c.lines[c.find_line("39-9").unwrap().0];
        assert!((l.length_miles - 2.5).abs() < 1e-12);
        assert_eq!(c.generators[0].h_const, DEFAULT_H);
    }

    #[test]
    fn sidecar_overrides() {
        let side = r#"{"lengths": {"8-9": 40.0}, "generators": {"39": {"h_const": 5.0, "mva_rating": 10000}}}"#;
        let c = parse_matpower_with_sidecar(CASE39, Some(side)).unwrap();
        assert_eq!(c.lines[c.find_line("9-8").unwrap().0].length_miles, 40.0);
        let g39 = c.generators.iter().find(|g| g.bus == 39).unwrap();
        assert_eq!(g39.mva_rating, 10000.0);

        let full = parse_matpower_with_sidecar(CASE39, Some(CASE39_DYN)).unwrap();
        let h: f64 = full.generators.iter().map(|g| g.h_const * g.mva_rating / 100.0).sum();
        // 500 + 30.3 + 35.8 + 28.6 + 26 + 34.8 + 26.4 + 24.3 + 34.5 + 42
        assert!((h - 782.7).abs() < 0.05, "{h}");
    }

    #[test]
    fn short_branch_row_is_rejected() {
        let broken = CASE9.replace(
            "8\t9\t0.032\t0.161\t0.306\t250\t250\t250\t0\t0\t1\t-360\t360;",
            "8\t9\t0.032;",
        );
        match parse_matpower(&broken) {
            Err(CaseError::MalformedRow { matrix, row, .. }) => {
                assert_eq!(matrix, "branch");
                assert_eq!(row, 8);
            }
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn unknown_sidecar_line() {
        let side = r#"{"lengths": {"1-9": 4.0}}"#;
        assert!(parse_matpower_with_sidecar(CASE9, Some(side)).is_err());
    }
}
