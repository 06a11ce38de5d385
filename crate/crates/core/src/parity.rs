//! Emission-intensity parity of electrified applications against their fossil
//! incumbents.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::time::AnnualSeries;

/// One electrified application and its incumbent, per service unit.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplianceSpec {
    #[serde(skip)]
    pub name: String,
    pub service_unit: String,
    /// kWh per unit
    #[serde(rename = "electric_kwh_per_unit")]
    pub electric_consumption: f64,
    /// gCO₂ per unit
    #[serde(rename = "electric_embodied_g_per_unit")]
    pub electric_embodied: f64,
    /// gCO₂ per unit
    #[serde(rename = "fossil_g_per_unit")]
    pub fossil_intensity: f64,
    /// gCO₂ per unit
    #[serde(rename = "fossil_embodied_g_per_unit", default)]
    pub fossil_embodied: f64,
    #[serde(default)]
    pub efficiency_note: String,
    /// Yearly change of the incumbent's intensity, gCO₂ per unit per year.
    #[serde(default)]
    pub fossil_slope: f64,
}

impl ApplianceSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.electric_consumption > 0.0) {
            return Err(Error::domain(format!("{}: electric consumption must be positive", self.name)));
        }
        if [self.electric_embodied, self.fossil_intensity, self.fossil_embodied]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::domain(format!("{}: emission coefficients must be ≥ 0", self.name)));
        }
        Ok(())
    }

    /// Incumbent total per unit in `year`, relative to a flat line anchored at `base_year`.
    pub fn fossil_total(&self, year: i32, base_year: i32) -> f64 {
        (self.fossil_intensity + self.fossil_slope * (year - base_year) as f64).max(0.0) + self.fossil_embodied
    }
}

/// Electricity per unit for a route that goes through electrolysis and a
/// conversion step: `direct_need / (η₁·η₂)`.
pub fn hydrogen_chain_consumption(direct_need_kwh: f64, electrolysis_eff: f64, conversion_eff: f64) -> Result<f64> {
    if !(electrolysis_eff > 0.0 && electrolysis_eff <= 1.0 && conversion_eff > 0.0 && conversion_eff <= 1.0) {
        return Err(Error::domain("chain efficiencies must lie in (0, 1]"));
    }
    if !(direct_need_kwh > 0.0) {
        return Err(Error::domain("direct need must be positive"));
    }
    Ok(direct_need_kwh / (electrolysis_eff * conversion_eff))
}

/// gCO₂ per service unit on a grid of intensity `grid` (gCO₂/kWh).
pub fn service_intensity_electric(app: &ApplianceSpec, grid: f64) -> f64 {
    app.electric_embodied + app.electric_consumption * grid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// gCO₂/kWh
    At(f64),
    Never,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::At(v) => Some(v),
            Threshold::Never => None,
        }
    }
}

/// Grid intensity at which both options emit the same per unit.
pub fn parity_threshold(app: &ApplianceSpec) -> Result<Threshold> {
    threshold_against(app, app.fossil_intensity + app.fossil_embodied)
}

fn threshold_against(app: &ApplianceSpec, fossil_total: f64) -> Result<Threshold> {
    if !(app.electric_consumption > 0.0) {
        return Err(Error::domain(format!("{}: electric consumption must be positive", app.name)));
    }
    let numerator = fossil_total - app.electric_embodied;
    if numerator <= 0.0 {
        return Ok(Threshold::Never);
    }
    Ok(Threshold::At(numerator / app.electric_consumption))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParityYear {
    AlreadyReached(i32),
    Year(i32),
    Never,
}

impl ParityYear {
    /// Calendar year, with `AlreadyReached` mapped to its start year.
    pub fn year(self) -> Option<i32> {
        match self {
            ParityYear::AlreadyReached(y) | ParityYear::Year(y) => Some(y),
            ParityYear::Never => None,
        }
    }
}

impl fmt::Display for ParityYear {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParityYear::AlreadyReached(y) => write!(f, "already:{y}"),
            ParityYear::Year(y) => write!(f, "{y}"),
            ParityYear::Never => f.write_str("never"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityResult {
    pub appliance: String,
    pub threshold: Threshold,
    pub scenario: String,
    pub parity_year: ParityYear,
}

/// First year in which the trajectory (gCO₂/kWh) is at or below the threshold.
pub fn parity_year(app: &ApplianceSpec, grid: &AnnualSeries, scenario: &str) -> Result<ParityResult> {
    if grid.values.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let threshold = parity_threshold(app)?;
    let mut found = ParityYear::Never;
    for (year, intensity) in grid.iter() {
        // a sloped incumbent moves the threshold year by year
        let t = if app.fossil_slope == 0.0 {
            threshold
        } else {
            threshold_against(app, app.fossil_total(year, grid.start))?
        };
        if let Threshold::At(v) = t {
            if intensity <= v {
                found = if year == grid.start {
                    ParityYear::AlreadyReached(year)
                } else {
                    ParityYear::Year(year)
                };
                break;
            }
        }
    }
    Ok(ParityResult {
        appliance: app.name.clone(),
        threshold,
        scenario: scenario.to_string(),
        parity_year: found,
    })
}

/// Appliance coefficient file, keyed by name.
pub fn load_appliances(path: impl AsRef<Path>) -> Result<Vec<ApplianceSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_appliances(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_appliances(text: &str) -> Result<Vec<ApplianceSpec>> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct File {
        appliance: BTreeMap<String, ApplianceSpec>,
    }
    let file: File = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<appliances>".into(),
        message: e.to_string(),
    })?;
    file.appliance
        .into_iter()
        .map(|(name, mut spec)| {
            spec.name = name;
            spec.check()?;
            Ok(spec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bev() -> ApplianceSpec {
        ApplianceSpec {
            name: "bev".into(),
            service_unit: "km".into(),
            electric_consumption: 0.18,
            electric_embodied: 50.0,
            fossil_intensity: 200.0,
            fossil_embodied: 50.0,
            efficiency_note: String::new(),
            fossil_slope: 0.0,
        }
    }

    fn trajectory(values: &[f64]) -> AnnualSeries {
        AnnualSeries {
            start: 2023,
            values: values.to_vec(),
        }
    }

    #[test]
    fn electric_intensity_is_linear() {
        let b = bev();
        assert_eq!(service_intensity_electric(&b, 0.0), 50.0);
        assert_relative_eq!(service_intensity_electric(&b, 600.0), 158.0, max_relative = 1e-12);
        let var = |g| service_intensity_electric(&b, g) - b.electric_embodied;
        assert_eq!(var(800.0), 2.0 * var(400.0));
    }

    #[test]
    fn threshold_examples() {
        let t = parity_threshold(&bev()).unwrap().value().unwrap();
        assert_relative_eq!(t, 1_111.111_111, max_relative = 1e-9);
        let dirty = ApplianceSpec {
            electric_embodied: 300.0,
            ..bev()
        };
        assert_eq!(parity_threshold(&dirty).unwrap(), Threshold::Never);
        let half = ApplianceSpec {
            electric_consumption: 0.09,
            ..bev()
        };
        assert_relative_eq!(parity_threshold(&half).unwrap().value().unwrap(), 2.0 * t, max_relative = 1e-12);
        let zero = ApplianceSpec {
            electric_consumption: 0.0,
            ..bev()
        };
        assert!(parity_threshold(&zero).is_err());
    }

    #[test]
    fn year_examples() {
        let r = parity_year(&bev(), &trajectory(&[600.0, 550.0]), "fast").unwrap();
        assert_eq!(r.parity_year, ParityYear::AlreadyReached(2023));
        let high = ApplianceSpec {
            fossil_intensity: 100.0,
            ..bev()
        };
        let r = parity_year(&high, &trajectory(&[600.0; 38]), "slow").unwrap();
        assert_eq!(r.parity_year, ParityYear::Never);
        let r = parity_year(&high, &trajectory(&[600.0, 500.0, 400.0, 300.0, 200.0]), "x").unwrap();
        // threshold (150 − 50)/0.18 = 555.6
        assert_eq!(r.parity_year, ParityYear::Year(2024));
        assert!(matches!(parity_year(&bev(), &trajectory(&[]), "x"), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn first_crossing_wins() {
        let app = ApplianceSpec {
            fossil_intensity: 86.0,
            ..bev()
        };
        // threshold 477.8
        let r = parity_year(&app, &trajectory(&[600.0, 450.0, 520.0, 300.0]), "x").unwrap();
        assert_eq!(r.parity_year, ParityYear::Year(2024));
    }

    #[test]
    fn hydrogen_chain() {
        assert_relative_eq!(hydrogen_chain_consumption(2000.0, 0.7, 0.8).unwrap(), 2000.0 / 0.56, max_relative = 1e-12);
        assert!(hydrogen_chain_consumption(2000.0, 0.0, 0.8).is_err());
        assert!(hydrogen_chain_consumption(2000.0, 0.7, 1.2).is_err());
    }

    #[test]
    fn sloped_incumbent_moves_parity_later() {
        let app = ApplianceSpec {
            fossil_intensity: 150.0,
            fossil_embodied: 0.0,
            electric_embodied: 0.0,
            electric_consumption: 0.5,
            ..bev()
        };
        let falling: Vec<f64> = (0..30).map(|i| 500.0 - 10.0 * i as f64).collect();
        let flat = parity_year(&app, &trajectory(&falling), "x").unwrap().parity_year;
        let sloped = ApplianceSpec {
            fossil_slope: -1.0,
            ..app
        };
        let later = parity_year(&sloped, &trajectory(&falling), "x").unwrap().parity_year;
        assert_eq!(flat, ParityYear::Year(2043));
        assert!(later > flat);
    }
}
