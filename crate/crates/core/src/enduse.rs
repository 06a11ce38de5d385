//! End-use sectors: final energy, electrification diffusion and the LDV fleet.
//!
//! Each sector's electric share moves toward a logit target computed from the
//! useful-energy cost of electricity versus fossil fuel, limited by an inertia
//! band per period and, for transport, lifted by a policy floor.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::time::{NodeSeries, TimeGrid};

/// TWh per EJ
pub const TWH_PER_EJ: f64 = 1e6 / 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Buildings,
    Industry,
    Transport,
}

impl Sector {
    pub const ALL: [Sector; 3] = [Sector::Buildings, Sector::Industry, Sector::Transport];

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Buildings => "buildings",
            Sector::Industry => "industry",
            Sector::Transport => "transport",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "buildings" => Ok(Sector::Buildings),
            "industry" => Ok(Sector::Industry),
            "transport" => Ok(Sector::Transport),
            other => Err(Error::validation("sector", format!("unknown sector `{other}`"))),
        }
    }
}

/// One sector's trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    pub sector: Sector,
    /// EJ/yr
    pub final_energy: NodeSeries,
    /// fraction of final energy delivered as electricity
    pub electric_share: NodeSeries,
    /// largest share change per period
    pub inertia: f64,
    pub price_sensitivity: f64,
    pub policy_floor: Option<NodeSeries>,
}

impl SectorState {
    /// Electricity use, EJ/yr, at a node.
    pub fn electricity(&self, year: i32) -> Option<f64> {
        Some(self.final_energy.get(year)? * self.electric_share.get(year)?)
    }

    /// Non-electric final energy, EJ/yr, at a node.
    pub fn fossil(&self, year: i32) -> Option<f64> {
        Some(self.final_energy.get(year)? * (1.0 - self.electric_share.get(year)?))
    }

    fn floor_at(&self, year: i32) -> Option<f64> {
        self.policy_floor.as_ref().and_then(|f| f.value_at(year as f64))
    }
}

/// Multinomial logit over carrier prices: `exp(−λ p_i) / Σ exp(−λ p_j)`.
pub fn logit_shares(prices: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if prices.is_empty() {
        return Err(Error::domain("no carriers"));
    }
    if let Some(p) = prices.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!("carrier price {p} must be positive")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain("price sensitivity must be ≥ 0"));
    }
    // shift by the cheapest price so the largest exponent is zero
    let min = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = prices.iter().map(|&p| (-lambda * (p - min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Move `prev` toward `target` by at most `inertia`, then apply the floor.
pub fn step_electrification(prev: f64, target: f64, inertia: f64, floor: Option<f64>) -> f64 {
    let mut next = target.clamp(prev - inertia, prev + inertia);
    if let Some(f) = floor {
        next = next.max(f);
    }
    next.clamp(0.0, 1.0)
}

/// Share of electricity in total final energy across sectors, percent.
pub fn economy_rate(states: &[SectorState], year: i32) -> Result<f64> {
    let mut elec = 0.0;
    let mut total = 0.0;
    for s in states {
        let t = year as f64;
        let fe = s.final_energy.value_at(t).ok_or(Error::MissingYear(year))?;
        let share = s.electric_share.value_at(t).ok_or(Error::MissingYear(year))?;
        elec += fe * share;
        total += fe;
    }
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * elec / total)
}

/// Light-duty vehicle stock, million vehicles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleFleet {
    pub stock: f64,
    pub bev_stock: f64,
    /// million/yr
    pub annual_sales: f64,
    pub bev_sales_share: f64,
    /// fraction of vehicles surviving each year
    pub survival_rate: f64,
}

impl VehicleFleet {
    pub fn check(&self) -> Result<()> {
        if !(self.stock >= 0.0 && self.bev_stock >= 0.0 && self.annual_sales >= 0.0) {
            return Err(Error::domain("fleet quantities must be ≥ 0"));
        }
        if self.bev_stock > self.stock * (1.0 + 1e-12) {
            return Err(Error::domain("BEV stock exceeds total stock"));
        }
        if !(0.0..=1.0).contains(&self.bev_sales_share) || !(0.0..=1.0).contains(&self.survival_rate) {
            return Err(Error::domain("fleet shares must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn bev_fraction(&self) -> f64 {
        if self.stock > 0.0 {
            self.bev_stock / self.stock
        } else {
            0.0
        }
    }
}

/// Advance the fleet `span` years with a fixed BEV sales share.
pub fn vehicle_stock_step(fleet: &VehicleFleet, bev_sales_share: f64, span: f64) -> Result<VehicleFleet> {
    fleet.check()?;
    if !(0.0..=1.0).contains(&bev_sales_share) {
        return Err(Error::domain(format!("BEV sales share {bev_sales_share} outside [0, 1]")));
    }
    if !(span >= 0.0) {
        return Err(Error::domain("span must be ≥ 0"));
    }
    let survive = fleet.survival_rate.powf(span);
    let stock = fleet.stock * survive + fleet.annual_sales * span;
    let bev = (fleet.bev_stock * survive + bev_sales_share * fleet.annual_sales * span).min(stock);
    Ok(VehicleFleet {
        stock,
        bev_stock: bev,
        bev_sales_share,
        ..*fleet
    })
}

/// Calibration of one sector.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    pub final_energy_ej: BTreeMap<String, f64>,
    pub initial_share: f64,
    pub inertia: f64,
    #[serde(rename = "lambda")]
    pub price_sensitivity: f64,
    /// useful energy per unit of electricity
    pub electric_efficiency: f64,
    /// useful energy per unit of fuel
    pub fossil_efficiency: f64,
    /// Non-price cost of switching to electricity, $/MWh useful; negative
    /// values favour electricity.
    #[serde(default)]
    pub barrier: BTreeMap<String, f64>,
    /// CO₂ per EJ of non-electric final energy, Gt/EJ
    pub direct_factor_gt_per_ej: BTreeMap<String, f64>,
    #[serde(default)]
    pub policy_floor: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub stock_m: f64,
    pub bev_stock_m: f64,
    pub annual_sales_m: BTreeMap<String, f64>,
    pub survival_rate: f64,
    pub bev_sales_share: BTreeMap<String, f64>,
}

/// End-use calibration file.
#[derive(Debug, Clone, PartialEq)]
pub struct EndUseConfig {
    /// network and retail cost added to the wholesale price, $/MWh
    pub electricity_adder: f64,
    /// $/MWh of fuel
    pub fossil_price: NodeSeries,
    pub sectors: BTreeMap<Sector, SectorCalibration>,
    pub fleet: Option<FleetCalibration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorCalibration {
    pub final_energy: NodeSeries,
    pub initial_share: f64,
    pub inertia: f64,
    pub price_sensitivity: f64,
    pub electric_efficiency: f64,
    pub fossil_efficiency: f64,
    pub barrier: NodeSeries,
    pub direct_factor: NodeSeries,
    pub policy_floor: Option<NodeSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetCalibration {
    pub initial: VehicleFleet,
    pub annual_sales: NodeSeries,
    pub bev_sales_share: NodeSeries,
}

fn node_series(field: &str, map: &BTreeMap<String, f64>) -> Result<NodeSeries> {
    let points = map
        .iter()
        .map(|(k, &v)| {
            k.parse::<i32>()
                .map(|y| (y, v))
                .map_err(|_| Error::validation(field, format!("`{k}` is not a year")))
        })
        .collect::<Result<Vec<_>>>()?;
    NodeSeries::new(points).map_err(|e| Error::validation(field, e.to_string()))
}

impl EndUseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Global {
            electricity_adder: f64,
            fossil_price: BTreeMap<String, f64>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            global: Global,
            sector: BTreeMap<String, SectorConfig>,
            #[serde(default)]
            fleet: Option<FleetConfig>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<enduse>".into(),
            message: e.to_string(),
        })?;
        let mut sectors = BTreeMap::new();
        for (name, c) in raw.sector {
            let sector: Sector = name.parse()?;
            let f = |field: &str| format!("{name}.{field}");
            if !(0.0..=1.0).contains(&c.initial_share) {
                return Err(Error::validation(f("initial_share"), "must lie in [0, 1]"));
            }
            if !(c.inertia >= 0.0) || !(c.price_sensitivity >= 0.0) {
                return Err(Error::validation(f("inertia"), "inertia and lambda must be ≥ 0"));
            }
            if !(c.electric_efficiency > 0.0 && c.fossil_efficiency > 0.0) {
                return Err(Error::validation(f("electric_efficiency"), "efficiencies must be positive"));
            }
            let final_energy = node_series(&f("final_energy_ej"), &c.final_energy_ej)?;
            if final_energy.values().any(|v| !(v > 0.0)) {
                return Err(Error::validation(f("final_energy_ej"), "must be positive"));
            }
            let barrier = if c.barrier.is_empty() {
                NodeSeries::new(vec![(final_energy.first_year().unwrap_or(0), 0.0)])?
            } else {
                node_series(&f("barrier"), &c.barrier)?
            };
            let policy_floor = c
                .policy_floor
                .as_ref()
                .map(|m| node_series(&f("policy_floor"), m))
                .transpose()?;
            sectors.insert(
                sector,
                SectorCalibration {
                    final_energy,
                    initial_share: c.initial_share,
                    inertia: c.inertia,
                    price_sensitivity: c.price_sensitivity,
                    electric_efficiency: c.electric_efficiency,
                    fossil_efficiency: c.fossil_efficiency,
                    barrier,
                    direct_factor: node_series(&f("direct_factor_gt_per_ej"), &c.direct_factor_gt_per_ej)?,
                    policy_floor,
                },
            );
        }
        let fleet = raw
            .fleet
            .map(|c| -> Result<FleetCalibration> {
                let initial = VehicleFleet {
                    stock: c.stock_m,
                    bev_stock: c.bev_stock_m,
                    annual_sales: 0.0,
                    bev_sales_share: 0.0,
                    survival_rate: c.survival_rate,
                };
                initial.check()?;
                Ok(FleetCalibration {
                    initial,
                    annual_sales: node_series("fleet.annual_sales_m", &c.annual_sales_m)?,
                    bev_sales_share: node_series("fleet.bev_sales_share", &c.bev_sales_share)?,
                })
            })
            .transpose()?;
        Ok(EndUseConfig {
            electricity_adder: raw.global.electricity_adder,
            fossil_price: node_series("global.fossil_price", &raw.global.fossil_price)?,
            sectors,
            fleet,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EndUseConfig::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

/// Sector trajectories and fleet for one electricity-price path.
#[derive(Debug, Clone, PartialEq)]
pub struct EndUseOutcome {
    pub sectors: Vec<SectorState>,
    /// Gt/EJ by sector
    pub direct_factors: BTreeMap<Sector, NodeSeries>,
    /// fleet at each node
    pub fleet: Vec<(i32, VehicleFleet)>,
}

impl EndUseOutcome {
    pub fn sector(&self, s: Sector) -> Option<&SectorState> {
        self.sectors.iter().find(|x| x.sector == s)
    }

    pub fn economy_rate(&self, year: i32) -> Result<f64> {
        economy_rate(&self.sectors, year)
    }

    /// Direct (non-electric) emissions summed over sectors, Gt/yr at each node.
    pub fn direct_emissions(&self, grid: &TimeGrid) -> NodeSeries {
        grid.series(grid.years().map(|y| {
            self.sectors
                .iter()
                .map(|s| {
                    let f = self.direct_factors.get(&s.sector).and_then(|d| d.value_at(y as f64));
                    s.fossil(y).unwrap_or(0.0) * f.unwrap_or(0.0)
                })
                .sum()
        }))
    }
}

fn at(series: &NodeSeries, year: i32) -> f64 {
    match (series.first_year(), series.last_year()) {
        (Some(f), _) if year <= f => series.get(f).unwrap_or(0.0),
        (_, Some(l)) if year >= l => series.get(l).unwrap_or(0.0),
        _ => series.value_at(year as f64).unwrap_or(0.0),
    }
}

/// Electrification target for a sector given the wholesale electricity price.
pub fn target_share(cal: &SectorCalibration, config: &EndUseConfig, wholesale: f64, year: i32) -> Result<f64> {
    let barrier = at(&cal.barrier, year);
    // shares only depend on the price difference, so a negative barrier is
    // charged to the fuel instead
    let electric = (wholesale.max(0.0) + config.electricity_adder) / cal.electric_efficiency + barrier.max(0.0);
    let fossil = at(&config.fossil_price, year) / cal.fossil_efficiency + (-barrier).max(0.0);
    Ok(logit_shares(&[electric, fossil], cal.price_sensitivity)?[0])
}

/// Evolve every configured sector along `grid` under `electricity_price` ($/MWh).
///
/// The step into node t uses prices at node t−1.
pub fn simulate(config: &EndUseConfig, grid: &TimeGrid, electricity_price: &NodeSeries) -> Result<EndUseOutcome> {
    let years: Vec<i32> = grid.years().collect();
    let mut sectors = Vec::new();
    let mut direct_factors = BTreeMap::new();
    for (&sector, cal) in &config.sectors {
        let missing = cal.final_energy.missing_nodes(grid);
        if cal.final_energy.first_year() != Some(grid.start_year)
            || cal.final_energy.last_year() != Some(grid.end_year)
            || !missing.is_empty()
        {
            return Err(Error::validation(
                format!("{sector}.final_energy_ej"),
                "must cover every grid node",
            ));
        }
        let mut state = SectorState {
            sector,
            final_energy: cal.final_energy.clone(),
            electric_share: NodeSeries::default(),
            inertia: cal.inertia,
            price_sensitivity: cal.price_sensitivity,
            policy_floor: cal.policy_floor.clone(),
        };
        let mut shares = vec![(years[0], cal.initial_share)];
        let mut prev = cal.initial_share;
        for w in years.windows(2) {
            let (from, to) = (w[0], w[1]);
            let price = electricity_price.get(from).ok_or(Error::MissingYear(from))?;
            let target = target_share(cal, config, price, from)?;
            prev = step_electrification(prev, target, cal.inertia, state.floor_at(to));
            shares.push((to, prev));
        }
        state.electric_share = NodeSeries::new(shares)?;
        direct_factors.insert(sector, cal.direct_factor.clone());
        sectors.push(state);
    }

    let mut fleet = Vec::new();
    if let Some(fc) = &config.fleet {
        let mut f = VehicleFleet {
            annual_sales: at(&fc.annual_sales, years[0]),
            bev_sales_share: at(&fc.bev_sales_share, years[0]),
            ..fc.initial
        };
        fleet.push((years[0], f));
        for w in years.windows(2) {
            // yearly steps so sales shares ramp within the period
            for y in w[0]..w[1] {
                f.annual_sales = at(&fc.annual_sales, y);
                let share = fc.bev_sales_share.value_at(y as f64).unwrap_or_else(|| at(&fc.bev_sales_share, y));
                f = vehicle_stock_step(&f, share.clamp(0.0, 1.0), 1.0)?;
            }
            fleet.push((w[1], f));
        }
    }

    Ok(EndUseOutcome {
        sectors,
        direct_factors,
        fleet,
    })
}
