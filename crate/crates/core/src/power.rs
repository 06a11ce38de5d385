//! Power-sector arithmetic: generation from capacity, coal shares, decline
//! rates and merit-order dispatch of the residual load.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{NodeSeries, HOURS_PER_YEAR};

/// Technologies known to the model. Order is the deterministic tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechId {
    Biomass,
    Coal,
    CoalCcs,
    Gas,
    Hydro,
    Nuclear,
    Solar,
    Wind,
}

impl TechId {
    pub const ALL: [TechId; 8] = [
        TechId::Biomass,
        TechId::Coal,
        TechId::CoalCcs,
        TechId::Gas,
        TechId::Hydro,
        TechId::Nuclear,
        TechId::Solar,
        TechId::Wind,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechId::Biomass => "biomass",
            TechId::Coal => "coal",
            TechId::CoalCcs => "coal_ccs",
            TechId::Gas => "gas",
            TechId::Hydro => "hydro",
            TechId::Nuclear => "nuclear",
            TechId::Solar => "solar",
            TechId::Wind => "wind",
        }
    }
}

impl fmt::Display for TechId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TechId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::validation("technology", format!("unknown technology `{s}`")))
    }
}

/// Physical and cost parameters of one generation technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Technology {
    #[serde(skip)]
    pub id: Option<TechId>,
    #[serde(rename = "emission_factor_t_per_mwh")]
    pub emission_factor: f64,
    #[serde(default = "yes")]
    pub dispatchable: bool,
    pub max_cf: f64,
    /// $/MWh
    pub variable_cost: f64,
    /// $/kW at the base year
    pub capex: f64,
    /// GW installed at the first model node
    #[serde(default)]
    pub existing_gw: f64,
    #[serde(default = "default_lifetime")]
    pub lifetime_years: f64,
    /// Upper bound on installed capacity, GW.
    #[serde(default)]
    pub potential_gw: Option<f64>,
    /// Additions in the period before the first node, GW. Seeds the build-ramp constraint.
    #[serde(default)]
    pub historical_additions_gw: f64,
    /// Whether the optimizer may add capacity.
    #[serde(default = "yes")]
    pub expandable: bool,
    /// Largest fraction of total demand this technology may supply (integration limit).
    #[serde(default)]
    pub max_share: Option<f64>,
}

fn yes() -> bool {
    true
}

fn default_lifetime() -> f64 {
    30.0
}

impl Technology {
    pub fn id(&self) -> TechId {
        self.id.expect("technology id set at load time")
    }

    pub fn check(&self) -> Result<()> {
        let field = |f: &str| format!("{}.{f}", self.id.map(|t| t.as_str()).unwrap_or("tech"));
        if !(self.emission_factor >= 0.0) {
            return Err(Error::validation(field("emission_factor_t_per_mwh"), "must be ≥ 0"));
        }
        if !(self.max_cf > 0.0 && self.max_cf <= 1.0) {
            return Err(Error::validation(field("max_cf"), "must lie in (0, 1]"));
        }
        if !(self.variable_cost >= 0.0 && self.capex >= 0.0) {
            return Err(Error::validation(field("variable_cost"), "costs must be ≥ 0"));
        }
        if !(self.lifetime_years > 0.0) {
            return Err(Error::validation(field("lifetime_years"), "must be positive"));
        }
        if !(self.existing_gw >= 0.0 && self.historical_additions_gw >= 0.0) {
            return Err(Error::validation(field("existing_gw"), "must be ≥ 0"));
        }
        if self.max_share.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::validation(field("max_share"), "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Maximum annual output per GW installed, TWh/yr.
    pub fn twh_per_gw(&self) -> f64 {
        self.max_cf * HOURS_PER_YEAR / 1000.0
    }
}

/// A configured technology set, keyed and iterated in [`TechId`] order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TechSet {
    techs: BTreeMap<TechId, Technology>,
}

impl TechSet {
    pub fn new(techs: impl IntoIterator<Item = (TechId, Technology)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, mut t) in techs {
            t.id = Some(id);
            t.check()?;
            map.insert(id, t);
        }
        Ok(TechSet { techs: map })
    }

    pub fn get(&self, id: TechId) -> Option<&Technology> {
        self.techs.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Technology> {
        self.techs.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = TechId> + '_ {
        self.techs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.techs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.techs.is_empty()
    }

    pub fn emission_factor(&self, id: TechId) -> f64 {
        self.get(id).map(|t| t.emission_factor).unwrap_or(0.0)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            tech: BTreeMap<String, Technology>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<technologies>".into(),
            message: e.to_string(),
        })?;
        let mut items = Vec::new();
        for (name, t) in raw.tech {
            items.push((name.parse()?, t));
        }
        TechSet::new(items)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TechSet::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.into(),
                message,
            },
            other => other,
        })
    }
}

/// Generation by technology plus the total, all in TWh/yr.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerMix {
    pub by_tech: BTreeMap<TechId, NodeSeries>,
    pub total: NodeSeries,
}

impl PowerMix {
    /// Build a mix and derive the total from the parts.
    pub fn from_parts(by_tech: BTreeMap<TechId, NodeSeries>) -> PowerMix {
        let mut totals: BTreeMap<i32, f64> = BTreeMap::new();
        for s in by_tech.values() {
            for &(y, v) in s.points() {
                *totals.entry(y).or_default() += v;
            }
        }
        let total = NodeSeries::new(totals.into_iter().collect()).expect("years unique");
        PowerMix { by_tech, total }
    }

    pub fn generation(&self, tech: TechId, year: i32) -> f64 {
        self.by_tech.get(&tech).and_then(|s| s.get(year)).unwrap_or(0.0)
    }

    /// Largest relative gap between the stored total and the sum of parts.
    pub fn balance_error(&self) -> f64 {
        self.total
            .points()
            .iter()
            .map(|&(y, tot)| {
                let sum: f64 = self.by_tech.values().filter_map(|s| s.get(y)).sum();
                if tot == 0.0 {
                    sum.abs()
                } else {
                    ((sum - tot) / tot).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Annual generation in TWh/yr of `capacity_gw` running at capacity factor `cf`.
pub fn generation_from_capacity(capacity_gw: f64, cf: f64) -> Result<f64> {
    if !(capacity_gw >= 0.0) {
        return Err(Error::domain(format!("capacity {capacity_gw} GW is negative")));
    }
    if !(0.0..=1.0).contains(&cf) {
        return Err(Error::domain(format!("capacity factor {cf} outside [0, 1]")));
    }
    Ok(capacity_gw * cf * HOURS_PER_YEAR / 1000.0)
}

/// Coal share of total generation, in percent.
pub fn coal_share(coal_gen: f64, total_gen: f64) -> Result<f64> {
    if !(total_gen > 0.0) {
        return Err(Error::domain("total generation must be positive"));
    }
    if !(coal_gen >= 0.0) || coal_gen > total_gen {
        return Err(Error::domain(format!(
            "coal generation {coal_gen} outside [0, {total_gen}]"
        )));
    }
    Ok(100.0 * coal_gen / total_gen)
}

/// Backward-differenced share change per year. The first node has no rate.
pub fn share_decline_rate(shares: &NodeSeries) -> Result<NodeSeries> {
    let p = shares.points();
    if p.len() < 2 {
        return Err(Error::EmptySeries(p.len()));
    }
    let rates = p
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0) as f64))
        .collect();
    NodeSeries::new(rates)
}

/// A non-coal source offered to the residual dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchOffer {
    pub tech: TechId,
    pub capacity_gw: f64,
    pub max_cf: f64,
    /// $/MWh
    pub marginal_cost: f64,
}

impl DispatchOffer {
    pub fn potential_twh(&self) -> f64 {
        self.capacity_gw.max(0.0) * self.max_cf * HOURS_PER_YEAR / 1000.0
    }
}

/// Fill `demand - coal_gen` from the offers in ascending marginal-cost order.
///
/// Returns allocations in the order the offers were given.
pub fn dispatch_residual(demand: f64, coal_gen: f64, offers: &[DispatchOffer]) -> Result<Vec<f64>> {
    if !(demand >= 0.0 && coal_gen >= 0.0) {
        return Err(Error::domain("demand and coal generation must be ≥ 0"));
    }
    let residual = (demand - coal_gen).max(0.0);
    let mut order: Vec<usize> = (0..offers.len()).collect();
    order.sort_by(|&a, &b| {
        offers[a]
            .marginal_cost
            .total_cmp(&offers[b].marginal_cost)
            .then(offers[a].tech.cmp(&offers[b].tech))
    });

    let mut alloc = vec![0.0; offers.len()];
    let mut left = residual;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = offers[i].potential_twh().min(left);
        alloc[i] = take;
        left -= take;
    }
    if left > 1e-9 * residual.max(1.0) {
        return Err(Error::InfeasibleDispatch { shortfall_twh: left });
    }
    // Absorb floating residue so the allocations sum to the residual exactly.
    if let Some(last) = alloc.iter().rposition(|&a| a > 0.0) {
        let sum: f64 = alloc.iter().sum();
        alloc[last] += residual - sum;
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offer(tech: TechId, twh: f64, cost: f64) -> DispatchOffer {
        // capacity chosen so capacity × 1.0 × 8.76 = twh
        DispatchOffer {
            tech,
            capacity_gw: twh / 8.76,
            max_cf: 1.0,
            marginal_cost: cost,
        }
    }

    #[test]
    fn generation_from_table_cells() {
        let g = generation_from_capacity(1070.0, 0.58).unwrap();
        assert!((g - 5436.456).abs() < 1e-6);
        assert!((g / 5430.0 - 1.0).abs() < 0.002);
        assert_eq!(generation_from_capacity(0.0, 0.58).unwrap(), 0.0);
        let fast = generation_from_capacity(740.0, 0.39).unwrap();
        assert!((fast - 2528.136).abs() < 1e-6);
        assert!(generation_from_capacity(-1.0, 0.5).is_err());
        assert!(generation_from_capacity(1.0, 1.2).is_err());
    }

    #[test]
    fn shares() {
        assert!((coal_share(5430.0, 8873.0).unwrap() - 61.197).abs() < 1e-3);
        assert_eq!(coal_share(0.0, 10000.0).unwrap(), 0.0);
        assert!((coal_share(2550.0, 11916.0).unwrap() - 21.4).abs() < 0.01);
        assert!(coal_share(1.0, 0.0).is_err());
        assert!(coal_share(2.0, 1.0).is_err());
    }

    #[test]
    fn decline_rates_from_table_rows() {
        let fast = NodeSeries::new(vec![(2025, 48.3), (2030, 21.4)]).unwrap();
        let r = share_decline_rate(&fast).unwrap();
        assert!((r.get(2030).unwrap() + 5.38).abs() < 1e-9);
        assert_eq!(r.get(2025), None);

        let plateau = NodeSeries::new(vec![(2025, 52.9), (2030, 40.3)]).unwrap();
        assert!((share_decline_rate(&plateau).unwrap().get(2030).unwrap() + 2.52).abs() < 1e-9);

        let flat = NodeSeries::new(vec![(2020, 3.0), (2025, 3.0), (2030, 3.0)]).unwrap();
        assert!(share_decline_rate(&flat).unwrap().values().all(|v| v == 0.0));
        assert!(share_decline_rate(&NodeSeries::default()).is_err());
    }

    #[test]
    fn dispatch_examples() {
        let offers = [offer(TechId::Solar, 50.0, 10.0), offer(TechId::Gas, 50.0, 20.0)];
        let none = dispatch_residual(100.0, 100.0, &offers).unwrap();
        assert!(none.iter().all(|&a| a == 0.0));

        let a = dispatch_residual(100.0, 40.0, &offers).unwrap();
        assert!((a[0] - 50.0).abs() < 1e-9 && (a[1] - 10.0).abs() < 1e-9);

        let short = [offer(TechId::Solar, 25.0, 10.0), offer(TechId::Gas, 25.0, 20.0)];
        match dispatch_residual(100.0, 40.0, &short) {
            Err(Error::InfeasibleDispatch { shortfall_twh }) => assert!((shortfall_twh - 10.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equal_costs_break_ties_by_id() {
        let offers = [offer(TechId::Wind, 50.0, 10.0), offer(TechId::Hydro, 50.0, 10.0)];
        let a = dispatch_residual(30.0, 0.0, &offers).unwrap();
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn mix_total_is_sum_of_parts() {
        let mut parts = BTreeMap::new();
        parts.insert(TechId::Coal, NodeSeries::new(vec![(2020, 3.0), (2025, 1.0)]).unwrap());
        parts.insert(TechId::Solar, NodeSeries::new(vec![(2020, 1.0), (2025, 4.0)]).unwrap());
        let mix = PowerMix::from_parts(parts);
        assert_eq!(mix.total.get(2025), Some(5.0));
        assert!(mix.balance_error() < 1e-12);
    }
}
