//! Bundled input data: technology and cost tables, demand paths, end-use
//! calibration, appliance coefficients and scenario files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::enduse::EndUseConfig;
use crate::error::{Error, Result};
use crate::expansion::CostModel;
use crate::parity::{load_appliances, ApplianceSpec};
use crate::power::TechSet;
use crate::scenario::{load_scenario, ScenarioSpec};
use crate::time::NodeSeries;

/// Overrides the bundled data directory.
pub const DATA_DIR_ENV: &str = "NETZERO_DATA_DIR";

/// Scenarios that make up the published table, in display order.
pub const TABLE_SCENARIOS: [&str; 4] = ["fast", "medium", "slow", "plateau30"];

/// `$NETZERO_DATA_DIR` if set, otherwise the `data/` directory shipped with the crate.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => bundled_dir(),
    }
}

pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Power demand paths keyed by name, TWh/yr.
pub fn load_demand(path: impl AsRef<Path>) -> Result<BTreeMap<String, NodeSeries>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        power_demand: BTreeMap<String, BTreeMap<String, f64>>,
    }
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: File = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.power_demand
        .into_iter()
        .map(|(name, nodes)| {
            let points = nodes
                .into_iter()
                .map(|(y, v)| {
                    let year = y
                        .parse()
                        .map_err(|_| Error::validation(format!("power_demand.{name}"), format!("`{y}` is not a year")))?;
                    if !(v >= 0.0) {
                        return Err(Error::validation(format!("power_demand.{name}"), "demand must be ≥ 0"));
                    }
                    Ok((year, v))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name, NodeSeries::new(points)?))
        })
        .collect()
}

/// Everything a run reads from the data directory.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub techs: TechSet,
    pub costs: CostModel,
    pub demand: BTreeMap<String, NodeSeries>,
    pub enduse: EndUseConfig,
    pub appliances: Vec<ApplianceSpec>,
}

impl Bundle {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        Ok(Bundle {
            techs: TechSet::load(dir.join("technologies.toml"))?,
            costs: CostModel::load(dir.join("costs.toml"))?,
            demand: load_demand(dir.join("demand.toml"))?,
            enduse: EndUseConfig::load(dir.join("enduse.toml"))?,
            appliances: load_appliances(dir.join("appliances.toml"))?,
            dir,
        })
    }

    /// Load from [`data_dir`].
    pub fn from_env() -> Result<Self> {
        Bundle::load(data_dir())
    }

    pub fn scenario_path(&self, name: &str) -> PathBuf {
        self.dir.join("scenarios").join(format!("{name}.toml"))
    }

    pub fn scenario(&self, name: &str) -> Result<ScenarioSpec> {
        load_scenario(self.scenario_path(name))
    }

    pub fn demand_for(&self, scenario: &ScenarioSpec) -> Result<&NodeSeries> {
        self.demand.get(&scenario.demand_ref).ok_or_else(|| {
            Error::validation(
                "demand",
                format!("scenario `{}` refers to unknown demand path `{}`", scenario.name, scenario.demand_ref),
            )
        })
    }
}
