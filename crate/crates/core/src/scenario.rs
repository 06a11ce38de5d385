//! Scenario definitions: coal capacity pathway, capacity-factor caps and policy mode.
//!
//! Scenario files are TOML:
//!
//! ```toml
//! [scenario]
//! name = "fast"
//! phase_out_year = 2040
//! policy_mode = "netzero:2060"
//! demand = "fast"
//!
//! [coal.capacity_gw]
//! "2020" = 1070
//! "2025" = 1040
//!
//! [coal.capacity_factor]
//! "2020" = 0.58
//! "2025" = 0.55
//!
//! [coal.early_retirement_gw]
//! "2020" = 0
//! "2025" = 100
//! ```
//!
//! `[coal.generation_twh]` is optional; where present its nodes replace the
//! capacity × capacity-factor product.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::generation_from_capacity;
use crate::time::{NodeSeries, TimeGrid};

/// Phase-out means implied generation at or below this fraction of the first node.
pub const PHASE_OUT_RESIDUAL: f64 = 0.01;

/// Allowed rise of coal generation between consecutive nodes after the first period.
pub const DECLINE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyMode {
    /// Net CO₂ reaches zero in the given year and stays there.
    NetZeroYear(i32),
    /// Cumulative net CO₂ over the horizon is capped at this many Gt.
    FixedBudget(f64),
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyMode::NetZeroYear(y) => write!(f, "netzero:{y}"),
            PolicyMode::FixedBudget(gt) => write!(f, "budget:{gt}"),
        }
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation("policy_mode", format!("expected `netzero:<year>` or `budget:<Gt>`, got `{s}`"));
        match s.split_once(':') {
            Some(("netzero", y)) => y.trim().parse().map(PolicyMode::NetZeroYear).map_err(|_| bad()),
            Some(("budget", gt)) => {
                let gt: f64 = gt.trim().parse().map_err(|_| bad())?;
                if !(gt > 0.0 && gt.is_finite()) {
                    return Err(Error::validation("policy_mode", "budget must be positive"));
                }
                Ok(PolicyMode::FixedBudget(gt))
            }
            _ => Err(bad()),
        }
    }
}

/// A named coal pathway together with its policy setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub coal_capacity: NodeSeries,
    pub coal_cf_cap: NodeSeries,
    pub coal_generation_override: Option<NodeSeries>,
    pub early_retirement_limit: NodeSeries,
    pub phase_out_year: Option<i32>,
    pub policy_mode: PolicyMode,
    pub demand_ref: String,
}

/// One failed check from [`ScenarioSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scenario: RawHeader,
    coal: RawCoal,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase_out_year: Option<i32>,
    policy_mode: String,
    demand: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoal {
    capacity_gw: BTreeMap<String, f64>,
    capacity_factor: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation_twh: Option<BTreeMap<String, f64>>,
    early_retirement_gw: BTreeMap<String, f64>,
}

fn nodes_from_table(field: &str, table: &BTreeMap<String, f64>) -> Result<NodeSeries> {
    let mut points = Vec::with_capacity(table.len());
    for (k, &v) in table {
        let year: i32 = k
            .trim()
            .parse()
            .map_err(|_| Error::validation(field, format!("key `{k}` is not a year")))?;
        points.push((year, v));
    }
    NodeSeries::new(points).map_err(|e| Error::validation(field, e.to_string()))
}

fn nodes_to_table(series: &NodeSeries) -> BTreeMap<String, f64> {
    series.points().iter().map(|&(y, v)| (y.to_string(), v)).collect()
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Parse and validate scenario TOML text.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<scenario>".into(),
        message: e.to_string(),
    })?;
    let spec = ScenarioSpec {
        name: raw.scenario.name,
        coal_capacity: nodes_from_table("coal_capacity", &raw.coal.capacity_gw)?,
        coal_cf_cap: nodes_from_table("coal_cf_cap", &raw.coal.capacity_factor)?,
        coal_generation_override: raw
            .coal
            .generation_twh
            .as_ref()
            .map(|t| nodes_from_table("coal_generation_override", t))
            .transpose()?,
        early_retirement_limit: nodes_from_table("early_retirement_limit", &raw.coal.early_retirement_gw)?,
        phase_out_year: raw.scenario.phase_out_year,
        policy_mode: raw.scenario.policy_mode.parse()?,
        demand_ref: raw.scenario.demand,
    };
    if let Some(v) = spec.validate().into_iter().next() {
        return Err(Error::Validation {
            field: v.field,
            message: v.message,
        });
    }
    Ok(spec)
}

impl ScenarioSpec {
    /// Serialize back to the scenario file format.
    pub fn to_toml(&self) -> String {
        let raw = RawFile {
            scenario: RawHeader {
                name: self.name.clone(),
                phase_out_year: self.phase_out_year,
                policy_mode: self.policy_mode.to_string(),
                demand: self.demand_ref.clone(),
            },
            coal: RawCoal {
                capacity_gw: nodes_to_table(&self.coal_capacity),
                capacity_factor: nodes_to_table(&self.coal_cf_cap),
                generation_twh: self.coal_generation_override.as_ref().map(nodes_to_table),
                early_retirement_gw: nodes_to_table(&self.early_retirement_limit),
            },
        };
        toml::to_string(&raw).expect("scenario serializes")
    }

    /// Coal generation (TWh/yr) implied at each capacity node, overrides applied.
    pub fn coal_generation(&self) -> NodeSeries {
        let points = self
            .coal_capacity
            .points()
            .iter()
            .map(|&(y, cap)| {
                let gen = self
                    .coal_generation_override
                    .as_ref()
                    .and_then(|o| o.get(y))
                    .unwrap_or_else(|| {
                        let cf = self.coal_cf_cap.get(y).unwrap_or(0.0);
                        generation_from_capacity(cap.max(0.0), cf.clamp(0.0, 1.0)).unwrap_or(0.0)
                    });
                (y, gen)
            })
            .collect();
        NodeSeries::new(points).expect("years come from a valid series")
    }

    /// The same pathway restricted to a different policy mode.
    pub fn with_policy(&self, mode: PolicyMode) -> ScenarioSpec {
        ScenarioSpec {
            policy_mode: mode,
            ..self.clone()
        }
    }

    /// All invariant checks on the default grid; an empty report means valid.
    pub fn validate(&self) -> Vec<Violation> {
        self.validate_on(&TimeGrid::default())
    }

    pub fn validate_on(&self, grid: &TimeGrid) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Violation {
                field: field.to_string(),
                message,
            })
        };

        if self.name.trim().is_empty() {
            push("name", "must not be empty".into());
        }

        let mut series: Vec<(&str, &NodeSeries)> = vec![
            ("coal_capacity", &self.coal_capacity),
            ("coal_cf_cap", &self.coal_cf_cap),
            ("early_retirement_limit", &self.early_retirement_limit),
        ];
        if let Some(o) = &self.coal_generation_override {
            series.push(("coal_generation_override", o));
        }
        for (field, s) in &series {
            if s.is_empty() {
                push(field, "has no nodes".into());
                continue;
            }
            for y in s.off_grid(grid) {
                push(field, format!("year {y} is not a grid node"));
            }
            for y in s.missing_nodes(grid) {
                push(field, format!("missing interior node {y}"));
            }
            for (y, v) in s.points() {
                if *v < 0.0 {
                    push(field, format!("negative value {v} in {y}"));
                }
            }
        }

        for &(y, cf) in self.coal_cf_cap.points() {
            if cf > 1.0 {
                push("coal_cf_cap", format!("capacity factor {cf} in {y} exceeds 1"));
            }
        }
        if self.coal_capacity.years().ne(self.coal_cf_cap.years()) {
            push("coal_cf_cap", "years must match coal_capacity".into());
        }
        if self.coal_capacity.first_year() != Some(grid.start_year) {
            push("coal_capacity", format!("must start at {}", grid.start_year));
        }

        if let PolicyMode::FixedBudget(gt) = self.policy_mode {
            if !(gt > 0.0) {
                push("policy_mode", "budget must be positive".into());
            }
        }

        let gen = self.coal_generation();
        if let (Some(po), Some(&(_, g0))) = (self.phase_out_year, gen.points().first()) {
            let limit = PHASE_OUT_RESIDUAL * g0;
            for &(y, g) in gen.points().iter().filter(|p| p.0 >= po) {
                if g > limit {
                    push(
                        "phase_out_year",
                        format!("generation after phase-out: {g:.0} TWh in {y} exceeds {limit:.1} TWh"),
                    );
                }
            }
            // After the first period generation should not climb (plateaus allowed).
            for w in gen.points().windows(2).skip(1) {
                let ((_, prev), (y, g)) = (w[0], w[1]);
                if g > prev * (1.0 + DECLINE_TOLERANCE) + 1e-9 {
                    push(
                        "coal_capacity",
                        format!("generation rises from {prev:.0} to {g:.0} TWh in {y}"),
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAST: &str = r#"
[scenario]
name = "fast"
phase_out_year = 2040
policy_mode = "netzero:2060"
demand = "fast"

[coal.capacity_gw]
"2020" = 1070
"2025" = 1040
"2030" = 740
"2035" = 360
"2040" = 0

[coal.capacity_factor]
"2020" = 0.58
"2025" = 0.55
"2030" = 0.39
"2035" = 0.17
"2040" = 0.0

[coal.early_retirement_gw]
"2020" = 0
"2025" = 300
"2030" = 300
"2035" = 300
"2040" = 300
"#;

    #[test]
    fn parses_minimal_file() {
        let s = parse_scenario(FAST).unwrap();
        assert_eq!(s.coal_capacity.get(2030), Some(740.0));
        assert_eq!(s.coal_cf_cap.get(2030), Some(0.39));
        assert_eq!(s.policy_mode, PolicyMode::NetZeroYear(2060));
        assert!(s.validate().is_empty());
    }

    #[test]
    fn cf_above_one_names_field() {
        let text = FAST.replace("\"2030\" = 0.39", "\"2030\" = 1.3");
        match parse_scenario(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "coal_cf_cap"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = FAST.replace("demand = \"fast\"", "demand = \"fast\"\ncolour = \"red\"");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_toml_reports_line() {
        let err = parse_scenario("[scenario\nname = 1").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn generation_after_phase_out_flagged() {
        let text = FAST
            .replace("\"2040\" = 0\n", "\"2040\" = 0\n\"2045\" = 420\n")
            .replace("\"2040\" = 0.0\n", "\"2040\" = 0.0\n\"2045\" = 0.28\n")
            .replace("\"2040\" = 300\n", "\"2040\" = 300\n\"2045\" = 300\n");
        let raw: RawFile = toml::from_str(&text).unwrap();
        let spec = ScenarioSpec {
            name: "x".into(),
            coal_capacity: nodes_from_table("c", &raw.coal.capacity_gw).unwrap(),
            coal_cf_cap: nodes_from_table("c", &raw.coal.capacity_factor).unwrap(),
            coal_generation_override: None,
            early_retirement_limit: nodes_from_table("c", &raw.coal.early_retirement_gw).unwrap(),
            phase_out_year: Some(2040),
            policy_mode: PolicyMode::NetZeroYear(2060),
            demand_ref: "fast".into(),
        };
        let report = spec.validate();
        assert!(
            report.iter().any(|v| v.message.contains("generation after phase-out")),
            "{report:?}"
        );
    }

    #[test]
    fn missing_interior_node_flagged() {
        let text = FAST.replace("\"2035\" = 360\n", "");
        match parse_scenario(&text) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "coal_capacity");
                assert!(message.contains("missing interior node 2035"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_mode_parsing() {
        assert_eq!("budget:167".parse::<PolicyMode>().unwrap(), PolicyMode::FixedBudget(167.0));
        assert!("budget:0".parse::<PolicyMode>().is_err());
        assert!("yearly".parse::<PolicyMode>().is_err());
    }

    #[test]
    fn override_takes_precedence() {
        let text = FAST.replace(
            "[coal.early_retirement_gw]",
            "[coal.generation_twh]\n\"2030\" = 2550\n\n[coal.early_retirement_gw]",
        );
        let s = parse_scenario(&text).unwrap();
        let g = s.coal_generation();
        assert_eq!(g.get(2030), Some(2550.0));
        assert!((g.get(2025).unwrap() - 1040.0 * 0.55 * 8.76).abs() < 1e-9);
    }
}
