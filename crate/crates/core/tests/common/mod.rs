#![allow(dead_code)]

use std::sync::OnceLock;

use netzero::data::{bundled_dir, Bundle, TABLE_SCENARIOS};
use netzero::pipeline::{run_scenario, ScenarioRun};
use netzero::scenario::{PolicyMode, ScenarioSpec};
use netzero::time::NodeSeries;

pub fn bundle() -> &'static Bundle {
    static B: OnceLock<Bundle> = OnceLock::new();
    B.get_or_init(|| Bundle::load(bundled_dir()).expect("bundled data loads"))
}

pub fn scenario(name: &str) -> ScenarioSpec {
    bundle().scenario(name).expect("bundled scenario")
}

/// The four published scenarios under their own (net-zero) mode.
pub fn netzero_runs() -> &'static Vec<ScenarioRun> {
    static R: OnceLock<Vec<ScenarioRun>> = OnceLock::new();
    R.get_or_init(|| {
        TABLE_SCENARIOS
            .iter()
            .map(|n| run_scenario(bundle(), &scenario(n), None, None).expect("scenario solves"))
            .collect()
    })
}

pub fn budget_runs() -> &'static Vec<ScenarioRun> {
    static R: OnceLock<Vec<ScenarioRun>> = OnceLock::new();
    R.get_or_init(|| {
        TABLE_SCENARIOS
            .iter()
            .map(|n| run_scenario(bundle(), &scenario(n), Some(PolicyMode::FixedBudget(167.0)), None).expect("budget run solves"))
            .collect()
    })
}

pub fn run<'a>(runs: &'a [ScenarioRun], name: &str) -> &'a ScenarioRun {
    runs.iter().find(|r| r.scenario.name == name).expect("scenario present")
}

/// Demand shared by every scenario in the common-demand comparisons.
pub fn common_demand() -> &'static NodeSeries {
    &bundle().demand["slow"]
}

/// Rectangle rule with `steps_per_year` sub-steps on linear interpolation.
pub fn riemann(series: &NodeSeries, from: i32, to: i32, steps_per_year: usize) -> f64 {
    let n = (to - from) as usize * steps_per_year;
    let h = 1.0 / steps_per_year as f64;
    (0..n)
        .map(|i| series.value_at(from as f64 + (i as f64 + 0.5) * h).expect("inside series") * h)
        .sum()
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct Table1Cell {
    pub scenario: String,
    pub year: i32,
    pub generation_twh: f64,
    pub share_pct: f64,
    pub decline_pp_yr: Option<f64>,
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct TableS1Cell {
    pub scenario: String,
    pub year: i32,
    pub capacity_gw: f64,
    pub capacity_factor_pct: Option<f64>,
}

fn reference<T: serde::de::DeserializeOwned>(file: &str) -> Vec<T> {
    let path = netzero::data::bundled_dir().join("reference").join(file);
    csv::Reader::from_path(&path)
        .expect("reference table present")
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("reference table parses")
}

pub fn table1() -> Vec<Table1Cell> {
    reference("table1.csv")
}

pub fn table_s1() -> Vec<TableS1Cell> {
    reference("table_s1.csv")
}
