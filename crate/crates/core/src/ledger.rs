//! CO₂ accounting: power, sectoral direct and indirect channels, cumulative
//! totals, budget shares and the TCRE temperature response.

use crate::enduse::Sector;
use crate::error::{Error, Result};
use crate::power::{PowerMix, TechSet};
use crate::time::{AnnualSeries, NodeSeries};

/// °C per GtCO₂
pub const DEFAULT_TCRE: f64 = 0.45 / 1000.0;

/// Gt/yr
pub const DEFAULT_FUEL_PRODUCTION_OVERHEAD: f64 = 1.5;

/// Remaining global budgets, GtCO₂ from `accounting_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetContext {
    /// 1.5 °C, 67 % likelihood
    pub global_15_67: f64,
    /// 1.5 °C, 50 % likelihood
    pub global_15_50: f64,
    /// 2 °C, 67 % likelihood
    pub global_2_67: f64,
    pub accounting_start: i32,
}

impl Default for BudgetContext {
    fn default() -> Self {
        BudgetContext {
            global_15_67: 150.0,
            global_15_50: 250.0,
            global_2_67: 950.0,
            accounting_start: 2023,
        }
    }
}

impl BudgetContext {
    pub fn check(&self, first_year: i32, last_year: i32) -> Result<()> {
        if [self.global_15_67, self.global_15_50, self.global_2_67].iter().any(|b| !(*b > 0.0)) {
            return Err(Error::domain("budgets must be positive"));
        }
        if !(first_year..=last_year).contains(&self.accounting_start) {
            return Err(Error::MissingYear(self.accounting_start));
        }
        Ok(())
    }
}

/// One sector's energy use in a year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorUse {
    pub sector: Sector,
    /// TWh/yr
    pub electricity_twh: f64,
    /// EJ/yr
    pub fossil_ej: f64,
    /// Gt per EJ of fuel
    pub fuel_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorEmissions {
    pub sector: Sector,
    /// Gt/yr
    pub direct: f64,
    /// Gt/yr
    pub indirect: f64,
}

/// Emissions for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub year: i32,
    /// Gt/yr
    pub power: f64,
    /// gCO₂/kWh
    pub grid_intensity: f64,
    /// TWh/yr
    pub generation: f64,
    pub sectors: Vec<SectorEmissions>,
    /// Gt/yr removed
    pub cdr: f64,
}

impl LedgerRow {
    pub fn direct(&self) -> f64 {
        self.sectors.iter().map(|s| s.direct).sum()
    }

    pub fn indirect(&self) -> f64 {
        self.sectors.iter().map(|s| s.indirect).sum()
    }
}

/// Power-sector CO₂ in Gt/yr for generation in TWh/yr and factors in t/MWh.
fn power_emissions(generation: impl IntoIterator<Item = (f64, f64)>) -> Result<f64> {
    let mut total = 0.0;
    for (twh, factor) in generation {
        if twh < 0.0 || factor < 0.0 {
            return Err(Error::domain("generation and emission factors must be ≥ 0"));
        }
        total += twh * factor / 1000.0;
    }
    Ok(total)
}

/// gCO₂/kWh from Gt/yr and TWh/yr.
pub fn grid_intensity(power_gt: f64, generation_twh: f64) -> f64 {
    if generation_twh > 0.0 {
        power_gt / generation_twh * 1e6
    } else {
        0.0
    }
}

/// Account one year.
///
/// Total generation is attributed to sectors in proportion to their
/// electricity use, so indirect emissions sum to the power-sector total.
pub fn annual_emissions(year: i32, mix: &PowerMix, techs: &TechSet, uses: &[SectorUse]) -> Result<LedgerRow> {
    let generation: Vec<(f64, f64)> = mix
        .by_tech
        .iter()
        .map(|(&id, s)| (s.get(year).unwrap_or(0.0), techs.emission_factor(id)))
        .collect();
    let total: f64 = generation.iter().map(|g| g.0).sum();
    let power = power_emissions(generation)?;
    let intensity = grid_intensity(power, total);

    let use_total: f64 = uses.iter().map(|u| u.electricity_twh).sum();
    let mut sectors = Vec::with_capacity(uses.len());
    for u in uses {
        if u.electricity_twh < 0.0 || u.fossil_ej < 0.0 || u.fuel_factor < 0.0 {
            return Err(Error::domain(format!("negative energy use in {}", u.sector)));
        }
        let attributed = if use_total > 0.0 {
            total * u.electricity_twh / use_total
        } else {
            0.0
        };
        sectors.push(SectorEmissions {
            sector: u.sector,
            direct: u.fossil_ej * u.fuel_factor,
            indirect: attributed * intensity / 1e6,
        });
    }
    Ok(LedgerRow {
        year,
        power,
        grid_intensity: intensity,
        generation: total,
        sectors,
        cdr: 0.0,
    })
}

/// Annual rows at each grid node plus the constant fuel-production overhead.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLedger {
    pub rows: Vec<LedgerRow>,
    /// Gt/yr
    pub fuel_production_overhead: f64,
}

impl EmissionLedger {
    pub fn new(rows: Vec<LedgerRow>) -> Self {
        EmissionLedger {
            rows,
            fuel_production_overhead: DEFAULT_FUEL_PRODUCTION_OVERHEAD,
        }
    }

    pub fn row(&self, year: i32) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.year == year)
    }

    fn series(&self, f: impl Fn(&LedgerRow) -> f64) -> NodeSeries {
        NodeSeries::new(self.rows.iter().map(|r| (r.year, f(r))).collect()).expect("ledger years are unique")
    }

    /// Gt/yr
    pub fn power(&self) -> NodeSeries {
        self.series(|r| r.power)
    }

    /// gCO₂/kWh
    pub fn grid_intensity(&self) -> NodeSeries {
        self.series(|r| r.grid_intensity)
    }

    /// Direct emissions of all sectors, Gt/yr.
    pub fn direct(&self) -> NodeSeries {
        self.series(LedgerRow::direct)
    }

    /// Everything except power: sector fuel use plus the overhead, Gt/yr.
    pub fn non_power(&self) -> NodeSeries {
        self.series(|r| r.direct() + self.fuel_production_overhead)
    }

    /// Net economy-wide emissions, Gt/yr.
    pub fn economy(&self) -> NodeSeries {
        self.series(|r| r.power + r.direct() + self.fuel_production_overhead - r.cdr)
    }
}

/// Trapezoidal integral of `series` over `[from, to]` after annual interpolation, Gt.
pub fn cumulative(series: &NodeSeries, from: i32, to: i32) -> Result<f64> {
    let range = Error::Range {
        from: from as f64,
        to: to as f64,
    };
    if from >= to {
        return Err(range);
    }
    let annual = series.interpolate_annual().map_err(|_| range)?;
    cumulative_annual(&annual, from, to)
}

/// Trapezoidal integral of an annual series over `[from, to]`.
pub fn cumulative_annual(annual: &AnnualSeries, from: i32, to: i32) -> Result<f64> {
    let w = annual.window(from, to).filter(|_| from < to).ok_or(Error::Range {
        from: from as f64,
        to: to as f64,
    })?;
    let v = &w.values;
    Ok(v.windows(2).map(|p| 0.5 * (p[0] + p[1])).sum())
}

/// Percent of `budget` used by `cum`.
pub fn budget_share(cum: f64, budget: f64) -> Result<f64> {
    if !(budget > 0.0) {
        return Err(Error::domain("budget must be positive"));
    }
    if !(cum >= 0.0) {
        return Err(Error::domain("cumulative emissions must be ≥ 0"));
    }
    Ok(100.0 * cum / budget)
}

/// Direct and indirect totals for a year, and the electrified percentage.
/// The fuel-production overhead belongs to neither channel.
pub fn direct_indirect_split(ledger: &EmissionLedger, year: i32) -> Result<(f64, f64, f64)> {
    let row = ledger.row(year).ok_or(Error::MissingYear(year))?;
    let (d, i) = (row.direct(), row.indirect());
    let pct = if d + i > 0.0 { 100.0 * i / (d + i) } else { 0.0 };
    Ok((d, i, pct))
}

/// Warming in °C for cumulative emissions in Gt at the default TCRE.
pub fn temperature_delta(cum: f64) -> f64 {
    temperature_delta_with(cum, DEFAULT_TCRE)
}

pub fn temperature_delta_with(cum: f64, tcre: f64) -> f64 {
    tcre * cum
}
