//! Least-cost capacity expansion around an exogenous coal pathway.
//!
//! Each node carries five years of flows. Non-coal technologies are built
//! (`additions`, GW per period) and dispatched (`generation`, TWh/yr) to meet
//! the residual of demand after coal. Capital cost is charged as an annuity
//! for every node a vintage is alive inside the horizon, so late builds are
//! not penalised by the horizon cut-off. Learning is handled by re-solving the
//! LP with capex recomputed from the previous solution's cumulative additions
//! until capex stops moving.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, LpSolution, Sense};
use crate::power::{PowerMix, TechId, TechSet};
use crate::scenario::{PolicyMode, ScenarioSpec};
use crate::time::{NodeSeries, TimeGrid};

/// Convergence threshold on the largest relative capex change between iterations.
pub const LEARNING_TOLERANCE: f64 = 1e-4;
pub const MAX_LEARNING_ITERATIONS: usize = 50;

/// TWh × t/MWh → Gt
const GT_PER_TWH_T: f64 = 1e-3;
/// $/t × Gt → M$
const MUSD_PER_GT_USD: f64 = 1e3;

/// Cost after `cumulative/base` growth at a fixed learning rate per doubling.
pub fn learning_update(capex0: f64, cumulative_gw: f64, base_gw: f64, learning_rate: f64) -> Result<f64> {
    if !(base_gw > 0.0) || !(cumulative_gw > 0.0) {
        return Err(Error::domain("learning capacities must be positive"));
    }
    if cumulative_gw < base_gw {
        return Err(Error::domain(format!(
            "cumulative capacity {cumulative_gw} below learning base {base_gw}"
        )));
    }
    if !(0.0..0.5).contains(&learning_rate) {
        return Err(Error::domain(format!("learning rate {learning_rate} outside [0, 0.5)")));
    }
    let exponent = -(1.0 - learning_rate).log2();
    Ok(capex0 * (cumulative_gw / base_gw).powf(-exponent))
}

/// Capital recovery factor.
pub fn annuity_factor(rate: f64, lifetime_years: f64) -> f64 {
    if rate == 0.0 {
        1.0 / lifetime_years
    } else {
        rate / (1.0 - (1.0 + rate).powf(-lifetime_years))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechCost {
    /// $/kW; falls back to the technology file when absent
    #[serde(default)]
    pub capex: Option<f64>,
    /// $/MWh; falls back to the technology file when absent
    #[serde(default)]
    pub variable_cost: Option<f64>,
    #[serde(default)]
    pub learning_rate: f64,
    #[serde(default = "one", rename = "base_capacity_gw")]
    pub base_capacity: f64,
    /// Max fractional growth of additions from one period to the next.
    #[serde(default)]
    pub build_ramp_limit: Option<f64>,
    /// Additions per period above which the excess pays the adjustment markup.
    #[serde(default)]
    pub adjustment_threshold_gw: Option<f64>,
    /// Additions allowed on top of the ramp, GW per period.
    #[serde(default)]
    pub ramp_seed_gw: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TechCost {
    fn default() -> Self {
        TechCost {
            capex: None,
            variable_cost: None,
            learning_rate: 0.0,
            base_capacity: 1.0,
            build_ramp_limit: None,
            ramp_seed_gw: 0.0,
            adjustment_threshold_gw: None,
        }
    }
}

/// Economic assumptions for the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub techs: BTreeMap<TechId, TechCost>,
    pub discount_rate: f64,
    /// Default max fractional growth in additions per period.
    pub build_ramp_limit: f64,
    /// $/tCO₂
    pub cdr_cost: f64,
    /// Gt/yr of extra removal capacity per period
    pub cdr_ramp_gt_per_period: f64,
    pub cdr_first_year: i32,
    /// Markup on excess additions as a fraction of capex.
    pub adjustment_markup: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            techs: BTreeMap::new(),
            discount_rate: 0.05,
            build_ramp_limit: 1.0,
            cdr_cost: 150.0,
            cdr_ramp_gt_per_period: 0.5,
            cdr_first_year: 2030,
            adjustment_markup: 0.0,
        }
    }
}

impl CostModel {
    pub fn check(&self) -> Result<()> {
        if !(self.discount_rate >= 0.0) {
            return Err(Error::validation("discount_rate", "must be ≥ 0"));
        }
        if !(self.cdr_cost >= 0.0 && self.cdr_ramp_gt_per_period >= 0.0) {
            return Err(Error::validation("cdr_cost", "CDR parameters must be ≥ 0"));
        }
        if !(self.adjustment_markup >= 0.0) {
            return Err(Error::validation("adjustment_markup", "adjustment parameters must be ≥ 0"));
        }
        for (id, t) in &self.techs {
            if !(0.0..0.5).contains(&t.learning_rate) {
                return Err(Error::validation(format!("{id}.learning_rate"), "must lie in [0, 0.5)"));
            }
            if !(t.base_capacity > 0.0) {
                return Err(Error::validation(format!("{id}.base_capacity_gw"), "must be positive"));
            }
            if t.build_ramp_limit.is_some_and(|r| r < 0.0) || t.ramp_seed_gw < 0.0 {
                return Err(Error::validation(format!("{id}.build_ramp_limit"), "must be ≥ 0"));
            }
        }
        Ok(())
    }

    pub fn tech(&self, id: TechId) -> TechCost {
        self.techs.get(&id).cloned().unwrap_or_default()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Global {
            #[serde(default = "default_rate")]
            discount_rate: f64,
            #[serde(default = "default_ramp")]
            build_ramp_limit: f64,
            cdr_cost: f64,
            cdr_ramp_gt_per_period: f64,
            #[serde(default = "default_cdr_year")]
            cdr_first_year: i32,
            #[serde(default)]
            adjustment_markup: f64,
        }
        fn default_rate() -> f64 {
            0.05
        }
        fn default_ramp() -> f64 {
            1.0
        }
        fn default_cdr_year() -> i32 {
            2030
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            global: Global,
            #[serde(default)]
            tech: BTreeMap<String, TechCost>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<costs>".into(),
            message: e.to_string(),
        })?;
        let mut techs = BTreeMap::new();
        for (k, v) in raw.tech {
            techs.insert(k.parse()?, v);
        }
        let model = CostModel {
            techs,
            discount_rate: raw.global.discount_rate,
            build_ramp_limit: raw.global.build_ramp_limit,
            cdr_cost: raw.global.cdr_cost,
            cdr_ramp_gt_per_period: raw.global.cdr_ramp_gt_per_period,
            cdr_first_year: raw.global.cdr_first_year,
            adjustment_markup: raw.global.adjustment_markup,
        };
        model.check()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CostModel::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.into(),
                message,
            },
            other => other,
        })
    }
}

/// Emission constraint applied by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionPolicy {
    None,
    /// Net power-sector emissions at and after the year are ≤ 0.
    NetZero(i32),
    /// Cumulative net emissions (power + exogenous) over the horizon ≤ Gt.
    Budget(f64),
}

impl From<PolicyMode> for EmissionPolicy {
    fn from(m: PolicyMode) -> Self {
        match m {
            PolicyMode::NetZeroYear(y) => EmissionPolicy::NetZero(y),
            PolicyMode::FixedBudget(gt) => EmissionPolicy::Budget(gt),
        }
    }
}

/// Everything the optimizer needs for one run.
#[derive(Debug, Clone)]
pub struct ExpansionProblem<'a> {
    pub grid: TimeGrid,
    /// TWh/yr
    pub demand: NodeSeries,
    /// Fixed coal output, TWh/yr
    pub coal_generation: NodeSeries,
    /// GW
    pub coal_capacity: NodeSeries,
    /// GW per period retired ahead of schedule, at most
    pub early_retirement_limit: Option<NodeSeries>,
    /// Non-power emissions counted against a budget, Gt/yr
    pub other_emissions: Option<NodeSeries>,
    pub policy: EmissionPolicy,
    pub techs: &'a TechSet,
    pub costs: &'a CostModel,
    /// First node is history: no additions there.
    pub fix_first_node: bool,
}

impl<'a> ExpansionProblem<'a> {
    pub fn from_scenario(
        scenario: &ScenarioSpec,
        demand: &NodeSeries,
        costs: &'a CostModel,
        techs: &'a TechSet,
    ) -> Self {
        ExpansionProblem {
            grid: TimeGrid::default(),
            demand: demand.clone(),
            coal_generation: scenario.coal_generation(),
            coal_capacity: scenario.coal_capacity.clone(),
            early_retirement_limit: Some(scenario.early_retirement_limit.clone()),
            other_emissions: None,
            policy: scenario.policy_mode.into(),
            techs,
            costs,
            fix_first_node: true,
        }
    }
}

/// Optimizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPlan {
    pub grid: TimeGrid,
    pub capacity: BTreeMap<TechId, NodeSeries>,
    pub additions: BTreeMap<TechId, NodeSeries>,
    pub retirements: BTreeMap<TechId, NodeSeries>,
    pub generation: PowerMix,
    /// $/MWh
    pub electricity_price: NodeSeries,
    /// $/tCO₂
    pub co2_price: NodeSeries,
    /// Gt/yr removed
    pub cdr: NodeSeries,
    /// Discounted cost of the optimized (non-coal) system, M$
    pub objective: f64,
    /// Discounted fuel and renewal cost of the exogenous coal fleet, M$
    pub coal_cost: f64,
    /// capex ($/kW) by technology and node: the starting values, then the
    /// update after each LP. The last entry is the target that met the
    /// tolerance; the plan itself was solved with the one before it.
    pub capex_iterates: Vec<BTreeMap<TechId, Vec<f64>>>,
    pub iterations: usize,
    /// False when the iteration cap was hit; the plan is the last iterate.
    pub converged: bool,
    /// Gt/yr, before CDR
    pub power_emissions: NodeSeries,
}

impl ExpansionPlan {
    /// Cumulative net power-sector emissions plus `other` over the whole grid (trapezoid), Gt.
    pub fn cumulative_net_emissions(&self, other: Option<&NodeSeries>) -> f64 {
        let w = trapezoid_weights(&self.grid);
        self.grid
            .years()
            .enumerate()
            .map(|(i, y)| {
                let e = self.power_emissions.get(y).unwrap_or(0.0) - self.cdr.get(y).unwrap_or(0.0)
                    + other.and_then(|o| o.get(y)).unwrap_or(0.0);
                w[i] * e
            })
            .sum()
    }

    /// capex the final LP was solved with.
    pub fn final_capex(&self) -> Option<&BTreeMap<TechId, Vec<f64>>> {
        let n = self.capex_iterates.len();
        self.capex_iterates.get(n.saturating_sub(2))
    }
}

/// Node weights that integrate a piecewise-linear series exactly.
pub fn trapezoid_weights(grid: &TimeGrid) -> Vec<f64> {
    let n = grid.len();
    let s = grid.step as f64;
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { s / 2.0 } else { s })
        .collect()
}

fn value_on_grid(series: &NodeSeries, year: i32) -> f64 {
    if let Some(v) = series.get(year) {
        return v;
    }
    match (series.first_year(), series.last_year()) {
        (Some(f), _) if year < f => series.get(f).unwrap_or(0.0),
        (_, Some(l)) if year > l => series.get(l).unwrap_or(0.0),
        _ => series.value_at(year as f64).unwrap_or(0.0),
    }
}

struct Layout {
    /// techs that get LP variables (everything but coal), in id order
    techs: Vec<TechId>,
    add: Vec<Vec<Option<usize>>>,
    gen: Vec<Vec<usize>>,
    cdr: Vec<Option<usize>>,
    demand_rows: Vec<usize>,
    budget_row: Option<usize>,
    netzero_rows: Vec<(usize, usize)>,
}

struct Assembler<'p, 'a> {
    p: &'p ExpansionProblem<'a>,
    years: Vec<i32>,
    df: Vec<f64>,
    step: f64,
}

impl<'p, 'a> Assembler<'p, 'a> {
    fn new(p: &'p ExpansionProblem<'a>) -> Self {
        let years: Vec<i32> = p.grid.years().collect();
        let df = years
            .iter()
            .map(|&y| (1.0 + p.costs.discount_rate).powi(-(y - p.grid.start_year)))
            .collect();
        Assembler {
            p,
            years,
            df,
            step: p.grid.step as f64,
        }
    }

    fn alive(&self, built: usize, at: usize, lifetime: f64) -> bool {
        at >= built && ((self.years[at] - self.years[built]) as f64) < lifetime
    }

    fn existing(&self, id: TechId, t: usize) -> f64 {
        let tech = self.p.techs.get(id).expect("tech in set");
        let age = (self.years[t] - self.years[0]) as f64;
        tech.existing_gw * (1.0 - age / tech.lifetime_years).max(0.0)
    }

    /// PV of the annuity paid while a GW built at `t` is alive in the horizon, per $/kW.
    fn capex_weight(&self, id: TechId, t: usize) -> f64 {
        let tech = self.p.techs.get(id).expect("tech in set");
        let crf = annuity_factor(self.p.costs.discount_rate, tech.lifetime_years);
        (t..self.years.len())
            .filter(|&s| self.alive(t, s, tech.lifetime_years))
            .map(|s| crf * self.df[s] * self.step)
            .sum()
    }

    fn variable_cost(&self, id: TechId) -> f64 {
        self.p
            .costs
            .tech(id)
            .variable_cost
            .unwrap_or_else(|| self.p.techs.get(id).map(|t| t.variable_cost).unwrap_or(0.0))
    }

    fn build(&self, capex: &BTreeMap<TechId, Vec<f64>>) -> Result<(LinearProgram, Layout)> {
        let p = self.p;
        let n = self.years.len();
        let techs: Vec<TechId> = p.techs.ids().filter(|&t| t != TechId::Coal).collect();
        let mut lp = LinearProgram::new();

        let first_build = usize::from(p.fix_first_node);
        let mut add = Vec::with_capacity(techs.len());
        let mut gen = Vec::with_capacity(techs.len());
        for &id in &techs {
            let tech = p.techs.get(id).expect("tech in set");
            let vc = self.variable_cost(id);
            gen.push((0..n).map(|t| lp.add_var(self.df[t] * self.step * vc)).collect::<Vec<_>>());
            add.push(
                (0..n)
                    .map(|t| {
                        (tech.expandable && t >= first_build)
                            .then(|| lp.add_var(capex[&id][t] * self.capex_weight(id, t)))
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let cdr: Vec<Option<usize>> = (0..n)
            .map(|t| {
                (p.policy != EmissionPolicy::None && self.years[t] >= p.costs.cdr_first_year)
                    .then(|| lp.add_var(self.df[t] * self.step * p.costs.cdr_cost * MUSD_PER_GT_USD))
            })
            .collect();

        // demand balance
        let mut demand_rows = Vec::with_capacity(n);
        for t in 0..n {
            let residual = value_on_grid(&p.demand, self.years[t]) - value_on_grid(&p.coal_generation, self.years[t]);
            if residual < -1e-9 {
                return Err(Error::Infeasible(format!(
                    "coal generation exceeds demand in {}",
                    self.years[t]
                )));
            }
            let coeffs = gen.iter().map(|g| (g[t], 1.0)).collect();
            demand_rows.push(lp.add_row(format!("demand[{}]", self.years[t]), coeffs, Sense::Ge, residual.max(0.0)));
        }

        for (k, &id) in techs.iter().enumerate() {
            let tech = p.techs.get(id).expect("tech in set");
            let cost = p.costs.tech(id);
            let yield_twh = tech.twh_per_gw();
            for t in 0..n {
                let alive: Vec<usize> = (0..=t)
                    .filter(|&s| self.alive(s, t, tech.lifetime_years))
                    .filter_map(|s| add[k][s])
                    .collect();
                let mut coeffs = vec![(gen[k][t], 1.0)];
                coeffs.extend(alive.iter().map(|&a| (a, -yield_twh)));
                lp.add_row(
                    format!("capacity[{id},{}]", self.years[t]),
                    coeffs,
                    Sense::Le,
                    yield_twh * self.existing(id, t),
                );
                if let Some(pot) = tech.potential_gw {
                    if !alive.is_empty() {
                        lp.add_row(
                            format!("potential[{id},{}]", self.years[t]),
                            alive.iter().map(|&a| (a, 1.0)).collect(),
                            Sense::Le,
                            (pot - self.existing(id, t)).max(0.0),
                        );
                    }
                }
                if let Some(share) = tech.max_share {
                    // g_k ≤ share · (coal + Σ g): homogeneous in output so the
                    // demand dual carries the integration limit.
                    let coeffs = gen
                        .iter()
                        .enumerate()
                        .map(|(j, g)| (g[t], if j == k { 1.0 - share } else { -share }))
                        .collect();
                    lp.add_row(
                        format!("share[{id},{}]", self.years[t]),
                        coeffs,
                        Sense::Le,
                        share * value_on_grid(&p.coal_generation, self.years[t]),
                    );
                }
                if let Some(a) = add[k][t] {
                    let growth = 1.0 + cost.build_ramp_limit.unwrap_or(p.costs.build_ramp_limit);
                    let mut coeffs = vec![(a, 1.0)];
                    let mut rhs = cost.ramp_seed_gw;
                    match t.checked_sub(1).and_then(|s| add[k][s]) {
                        Some(prev) => coeffs.push((prev, -growth)),
                        None => rhs += growth * tech.historical_additions_gw,
                    }
                    lp.add_row(format!("ramp[{id},{}]", self.years[t]), coeffs, Sense::Le, rhs);
                    if let (Some(threshold), true) = (cost.adjustment_threshold_gw, p.costs.adjustment_markup > 0.0) {
                        let excess = lp.add_var(
                            p.costs.adjustment_markup * capex[&id][t] * self.capex_weight(id, t),
                        );
                        lp.add_row(
                            format!("adjust[{id},{}]", self.years[t]),
                            vec![(a, 1.0), (excess, -1.0)],
                            Sense::Le,
                            threshold,
                        );
                    }
                }
            }
        }

        let mut prev_cdr = None;
        for t in 0..n {
            if let Some(c) = cdr[t] {
                let mut coeffs = vec![(c, 1.0)];
                if let Some(pc) = prev_cdr {
                    coeffs.push((pc, -1.0));
                }
                lp.add_row(
                    format!("cdr_ramp[{}]", self.years[t]),
                    coeffs,
                    Sense::Le,
                    p.costs.cdr_ramp_gt_per_period,
                );
                prev_cdr = Some(c);
            }
        }

        let coal_ef = p.techs.emission_factor(TechId::Coal) * GT_PER_TWH_T;
        let emission_terms = |t: usize| -> Vec<(usize, f64)> {
            let mut v: Vec<(usize, f64)> = techs
                .iter()
                .enumerate()
                .filter(|(_, &id)| p.techs.emission_factor(id) > 0.0)
                .map(|(k, &id)| (gen[k][t], p.techs.emission_factor(id) * GT_PER_TWH_T))
                .collect();
            if let Some(c) = cdr[t] {
                v.push((c, -1.0));
            }
            v
        };
        let fixed_emissions = |t: usize| -> f64 {
            coal_ef * value_on_grid(&p.coal_generation, self.years[t])
                + p.other_emissions.as_ref().map(|o| value_on_grid(o, self.years[t])).unwrap_or(0.0)
        };

        let mut budget_row = None;
        let mut netzero_rows = Vec::new();
        match p.policy {
            EmissionPolicy::None => {}
            EmissionPolicy::NetZero(year) => {
                for t in (0..n).filter(|&t| self.years[t] >= year) {
                    let coal_only = coal_ef * value_on_grid(&p.coal_generation, self.years[t]);
                    let row = lp.add_row(
                        format!("netzero[{}]", self.years[t]),
                        emission_terms(t),
                        Sense::Le,
                        -coal_only,
                    );
                    netzero_rows.push((t, row));
                }
            }
            EmissionPolicy::Budget(gt) => {
                let w = trapezoid_weights(&p.grid);
                let mut coeffs = Vec::new();
                let mut fixed = 0.0;
                for t in 0..n {
                    coeffs.extend(emission_terms(t).into_iter().map(|(j, c)| (j, c * w[t])));
                    fixed += w[t] * fixed_emissions(t);
                }
                budget_row = Some(lp.add_row("budget", coeffs, Sense::Le, gt - fixed));
            }
        }

        Ok((
            lp,
            Layout {
                techs,
                add,
                gen,
                cdr,
                demand_rows,
                budget_row,
                netzero_rows,
            },
        ))
    }

    /// Objective terms that do not depend on decisions: coal fuel and coal fleet renewal.
    fn coal_constant(&self, coal_add: &[f64]) -> f64 {
        let Some(coal) = self.p.techs.get(TechId::Coal) else {
            return 0.0;
        };
        let vc = self.variable_cost(TechId::Coal);
        let capex = self.p.costs.tech(TechId::Coal).capex.unwrap_or(coal.capex);
        (0..self.years.len())
            .map(|t| {
                self.df[t] * self.step * vc * value_on_grid(&self.p.coal_generation, self.years[t])
                    + coal_add[t] * capex * self.capex_weight(TechId::Coal, t)
            })
            .sum()
    }

    /// Coal additions, retirements and early retirements implied by the exogenous path.
    fn coal_stock(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.years.len();
        let cap: Vec<f64> = self.years.iter().map(|&y| value_on_grid(&self.p.coal_capacity, y)).collect();
        let (lifetime, existing) = self
            .p
            .techs
            .get(TechId::Coal)
            .map(|c| (c.lifetime_years, c.existing_gw))
            .unwrap_or((40.0, 0.0));
        let scheduled_per_period = existing * self.step / lifetime;
        let mut additions = vec![0.0; n];
        let mut retirements = vec![0.0; n];
        let mut early = vec![0.0; n];
        for t in 1..n {
            let sched = scheduled_per_period.min(cap[t - 1]);
            let drop = cap[t - 1] - cap[t];
            early[t] = (drop - sched).max(0.0);
            retirements[t] = sched + early[t];
            additions[t] = (cap[t] - cap[t - 1] + retirements[t]).max(0.0);
            if let Some(limit) = &self.p.early_retirement_limit {
                let lim = limit.get(self.years[t]).unwrap_or(f64::INFINITY);
                if early[t] > lim + 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "early retirement of {:.1} GW in {} exceeds limit {lim:.1} GW",
                        early[t], self.years[t]
                    )));
                }
            }
        }
        Ok((additions, retirements, early))
    }
}

fn lp_error(e: LpError) -> Error {
    match e {
        LpError::Infeasible(rows) => Error::Infeasible(format!("violated constraints: {}", rows.join(", "))),
        LpError::Unbounded => Error::Infeasible("problem is unbounded".into()),
        LpError::IterationLimit => Error::Infeasible("simplex pivot limit reached".into()),
    }
}

/// Shadow price of demand at each node, in $/MWh.
pub fn electricity_price(problem: &ExpansionProblem<'_>, solution: Option<&LpSolution>) -> Result<NodeSeries> {
    let sol = solution.ok_or(Error::NotSolved)?;
    let asm = Assembler::new(problem);
    let n = asm.years.len();
    // demand rows are the first n rows by construction
    if sol.duals.len() < n {
        return Err(Error::NotSolved);
    }
    Ok(problem
        .grid
        .series((0..n).map(|t| sol.duals[t] / (asm.df[t] * asm.step))))
}

/// Highest electricity price ($/MWh) the plan's cost structure supports at
/// each node: over expandable technologies, the variable cost plus the full
/// capex (with the adjustment markup) of a unit that is used at that node only.
pub fn price_ceiling(problem: &ExpansionProblem<'_>, plan: &ExpansionPlan) -> Result<NodeSeries> {
    let asm = Assembler::new(problem);
    let capex = plan.final_capex().ok_or(Error::NotSolved)?;
    let markup = 1.0 + problem.costs.adjustment_markup;
    let values = (0..asm.years.len()).map(|t| {
        problem
            .techs
            .iter()
            .filter(|tech| tech.expandable && tech.id() != TechId::Coal && tech.twh_per_gw() > 0.0)
            .map(|tech| {
                let id = tech.id();
                let c = capex.get(&id).and_then(|v| v.get(t)).copied().unwrap_or(0.0);
                asm.variable_cost(id) + markup * c * asm.capex_weight(id, t) / (tech.twh_per_gw() * asm.df[t] * asm.step)
            })
            .fold(0.0, f64::max)
    });
    Ok(problem.grid.series(values))
}

/// Solve the expansion problem with learning-by-doing.
pub fn solve(problem: &ExpansionProblem<'_>) -> Result<ExpansionPlan> {
    problem.costs.check()?;
    let asm = Assembler::new(problem);
    let n = asm.years.len();
    let (coal_add, coal_ret, _) = asm.coal_stock()?;

    let capex0: BTreeMap<TechId, f64> = problem
        .techs
        .iter()
        .map(|t| (t.id(), problem.costs.tech(t.id()).capex.unwrap_or(t.capex)))
        .collect();
    let mut capex: BTreeMap<TechId, Vec<f64>> = capex0.iter().map(|(&k, &c)| (k, vec![c; n])).collect();
    let mut iterates = vec![capex.clone()];

    // Experience only ratchets up across iterations, so targets never rise
    // and the iterates fall monotonically toward the fixed point.
    let mut experience_seen: BTreeMap<TechId, Vec<f64>> = capex.keys().map(|&k| (k, vec![0.0; n])).collect();

    let mut converged = false;
    let mut iterations = 0;
    let (mut lp_sol, mut layout);
    loop {
        iterations += 1;
        let (lp, lay) = asm.build(&capex)?;
        let sol = lp.solve().map_err(lp_error)?;
        lp_sol = sol;
        layout = lay;

        let mut next = capex.clone();
        let mut max_change: f64 = 0.0;
        for (k, &id) in layout.techs.iter().enumerate() {
            let cost = problem.costs.tech(id);
            if cost.learning_rate == 0.0 {
                continue;
            }
            let mut cumulative = cost.base_capacity;
            for t in 0..n {
                // vintage t learns from half of its own build
                let built = layout.add[k][t].map(|a| lp_sol.x[a]).unwrap_or(0.0);
                let seen = &mut experience_seen.get_mut(&id).expect("tech present")[t];
                *seen = seen.max(cumulative + 0.5 * built);
                let updated = learning_update(capex0[&id], *seen, cost.base_capacity, cost.learning_rate)?;
                let current = capex[&id][t];
                max_change = max_change.max(((updated - current) / current).abs());
                next.get_mut(&id).expect("tech present")[t] = updated;
                cumulative += built;
            }
        }
        capex = next;
        iterates.push(capex.clone());
        if max_change < LEARNING_TOLERANCE {
            converged = true;
            break;
        }
        if iterations >= MAX_LEARNING_ITERATIONS {
            break;
        }
    }

    let x = &lp_sol.x;
    let mut capacity = BTreeMap::new();
    let mut additions = BTreeMap::new();
    let mut retirements = BTreeMap::new();
    let mut gen_parts = BTreeMap::new();
    for (k, &id) in layout.techs.iter().enumerate() {
        let tech = problem.techs.get(id).expect("tech in set");
        let adds: Vec<f64> = (0..n).map(|t| layout.add[k][t].map(|a| x[a]).unwrap_or(0.0)).collect();
        let cap: Vec<f64> = (0..n)
            .map(|t| {
                asm.existing(id, t)
                    + (0..=t)
                        .filter(|&s| asm.alive(s, t, tech.lifetime_years))
                        .map(|s| adds[s])
                        .sum::<f64>()
            })
            .collect();
        let ret: Vec<f64> = (0..n)
            .map(|t| if t == 0 { 0.0 } else { cap[t - 1] + adds[t] - cap[t] })
            .collect();
        capacity.insert(id, problem.grid.series(cap));
        additions.insert(id, problem.grid.series(adds));
        retirements.insert(id, problem.grid.series(ret));
        gen_parts.insert(id, problem.grid.series((0..n).map(|t| x[layout.gen[k][t]])));
    }
    if problem.techs.get(TechId::Coal).is_some() || !problem.coal_generation.is_empty() {
        capacity.insert(
            TechId::Coal,
            problem.grid.series(asm.years.iter().map(|&y| value_on_grid(&problem.coal_capacity, y))),
        );
        additions.insert(TechId::Coal, problem.grid.series(coal_add.iter().copied()));
        retirements.insert(TechId::Coal, problem.grid.series(coal_ret.iter().copied()));
        gen_parts.insert(
            TechId::Coal,
            problem.grid.series(asm.years.iter().map(|&y| value_on_grid(&problem.coal_generation, y))),
        );
    }
    let generation = PowerMix::from_parts(gen_parts);
    let power_emissions = problem.grid.series(asm.years.iter().map(|&y| {
        generation
            .by_tech
            .iter()
            .map(|(&id, s)| problem.techs.emission_factor(id) * s.get(y).unwrap_or(0.0) * GT_PER_TWH_T)
            .sum()
    }));

    let price = problem.grid.series(
        layout
            .demand_rows
            .iter()
            .enumerate()
            .map(|(t, &r)| lp_sol.duals[r] / (asm.df[t] * asm.step)),
    );
    let mut co2 = vec![0.0; n];
    if let Some(r) = layout.budget_row {
        let mu = (-lp_sol.duals[r]).max(0.0);
        for t in 0..n {
            co2[t] = mu / (MUSD_PER_GT_USD * asm.df[t]);
        }
    }
    for &(t, r) in &layout.netzero_rows {
        co2[t] = (-lp_sol.duals[r]).max(0.0) / (MUSD_PER_GT_USD * asm.df[t] * asm.step);
    }
    let cdr = problem
        .grid
        .series((0..n).map(|t| layout.cdr[t].map(|c| x[c]).unwrap_or(0.0)));

    Ok(ExpansionPlan {
        grid: problem.grid,
        capacity,
        additions,
        retirements,
        generation,
        electricity_price: price,
        co2_price: problem.grid.series(co2),
        cdr,
        objective: lp_sol.objective,
        coal_cost: asm.coal_constant(&coal_add),
        capex_iterates: iterates,
        iterations,
        converged,
        power_emissions,
    })
}

/// Plan a scenario under its own policy mode.
pub fn plan_expansion(
    scenario: &ScenarioSpec,
    demand: &NodeSeries,
    costs: &CostModel,
    techs: &TechSet,
) -> Result<ExpansionPlan> {
    if demand.values().any(|d| d < 0.0) {
        return Err(Error::domain("demand must be ≥ 0"));
    }
    solve(&ExpansionProblem::from_scenario(scenario, demand, costs, techs))
}

/// Plan a scenario under a cumulative budget (Gt over the horizon), with
/// `other_emissions` (Gt/yr) counted against it.
pub fn solve_fixed_budget(
    scenario: &ScenarioSpec,
    budget_gt: f64,
    demand: &NodeSeries,
    costs: &CostModel,
    techs: &TechSet,
    other_emissions: Option<&NodeSeries>,
) -> Result<ExpansionPlan> {
    if !(budget_gt > 0.0) {
        return Err(Error::domain("budget must be positive"));
    }
    let mut problem = ExpansionProblem::from_scenario(scenario, demand, costs, techs);
    problem.policy = EmissionPolicy::Budget(budget_gt);
    problem.other_emissions = other_emissions.cloned();
    solve(&problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tech_toml(solar_capex: f64, gas_gw: f64, gas_vc: f64) -> TechSet {
        // both technologies deliver exactly 1 TWh/yr per GW
        let cf = 1000.0 / HOURS;
        TechSet::from_toml(&format!(
            r#"
            [tech.coal]
            emission_factor_t_per_mwh = 0.9
            max_cf = {cf}
            variable_cost = 0.0
            capex = 0.0
            expandable = false
            [tech.solar]
            emission_factor_t_per_mwh = 0.0
            max_cf = {cf}
            variable_cost = 0.0
            capex = {solar_capex}
            [tech.gas]
            emission_factor_t_per_mwh = 0.4
            max_cf = {cf}
            variable_cost = {gas_vc}
            capex = 0.0
            existing_gw = {gas_gw}
            lifetime_years = 1e12
            expandable = false
            "#
        ))
        .unwrap()
    }

    const HOURS: f64 = crate::time::HOURS_PER_YEAR;

    fn loose_costs() -> CostModel {
        let loose = TechCost {
            build_ramp_limit: Some(100.0),
            ramp_seed_gw: 1000.0,
            ..TechCost::default()
        };
        CostModel {
            techs: [(TechId::Solar, loose.clone()), (TechId::Gas, loose)].into_iter().collect(),
            ..CostModel::default()
        }
    }

    fn toy<'a>(
        grid: TimeGrid,
        demand: &[f64],
        coal: &[f64],
        techs: &'a TechSet,
        costs: &'a CostModel,
    ) -> ExpansionProblem<'a> {
        ExpansionProblem {
            grid,
            demand: grid.series(demand.iter().copied()),
            coal_generation: grid.series(coal.iter().copied()),
            coal_capacity: grid.series(coal.iter().copied()),
            early_retirement_limit: None,
            other_emissions: None,
            policy: EmissionPolicy::None,
            techs,
            costs,
            fix_first_node: false,
        }
    }

    /// Exhaustive search over integer solar additions in 0..=20 GW per node.
    fn brute_force(demand: &[f64], coal: &[f64], solar_capex: f64, gas_gw: f64, gas_vc: f64) -> Option<f64> {
        let r = 0.05_f64;
        let crf = r / (1.0 - (1.0 + r).powf(-30.0));
        let df: Vec<f64> = (0..3).map(|t| (1.0 + r).powi(-5 * t)).collect();
        let weight: Vec<f64> = (0..3).map(|t| (t..3).map(|s| crf * df[s] * 5.0).sum()).collect();
        let mut best: Option<f64> = None;
        for a0 in 0..=20 {
            for a1 in 0..=20 {
                for a2 in 0..=20 {
                    let adds = [a0 as f64, a1 as f64, a2 as f64];
                    let mut cost = 0.0;
                    let mut cap = 0.0;
                    let mut ok = true;
                    for t in 0..3 {
                        cap += adds[t];
                        let residual = demand[t] - coal[t];
                        let gas = (residual - cap).max(0.0);
                        if gas > gas_gw + 1e-9 {
                            ok = false;
                            break;
                        }
                        cost += solar_capex * adds[t] * weight[t] + df[t] * 5.0 * gas_vc * gas;
                    }
                    if ok && best.is_none_or(|b| cost < b) {
                        best = Some(cost);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn learning_rate_per_doubling() {
        assert_relative_eq!(learning_update(1000.0, 200.0, 100.0, 0.2).unwrap(), 800.0, max_relative = 1e-12);
        assert_relative_eq!(learning_update(1000.0, 400.0, 100.0, 0.2).unwrap(), 640.0, max_relative = 1e-12);
        assert!((learning_update(1000.0, 300.0, 100.0, 0.2).unwrap() - 702.1).abs() < 0.05);
        assert_eq!(learning_update(500.0, 100.0, 100.0, 0.3).unwrap(), 500.0);
    }

    #[test]
    fn learning_rejects_bad_inputs() {
        assert!(learning_update(1000.0, 0.0, 100.0, 0.2).is_err());
        assert!(learning_update(1000.0, 100.0, 0.0, 0.2).is_err());
        assert!(learning_update(1000.0, 50.0, 100.0, 0.2).is_err());
        assert!(learning_update(1000.0, 200.0, 100.0, 0.5).is_err());
    }

    #[test]
    fn annuity_matches_closed_form() {
        assert_relative_eq!(annuity_factor(0.0, 20.0), 0.05);
        assert_relative_eq!(annuity_factor(0.05, 20.0), 0.080_242_587_2, max_relative = 1e-9);
    }

    #[test]
    fn zero_demand_builds_nothing() {
        let techs = tech_toml(600.0, 0.0, 50.0);
        let costs = loose_costs();
        let grid = TimeGrid::new(2020, 2030, 5).unwrap();
        let plan = solve(&toy(grid, &[0.0; 3], &[0.0; 3], &techs, &costs)).unwrap();
        assert_eq!(plan.objective, 0.0);
        assert!(plan.additions.values().all(|s| s.values().all(|v| v == 0.0)));
    }

    #[test]
    fn matches_exhaustive_search_on_toy() {
        let grid = TimeGrid::new(2020, 2030, 5).unwrap();
        let costs = loose_costs();
        for (demand, gas_gw, gas_vc, capex) in [
            ([10.0, 12.0, 15.0], 0.0, 50.0, 600.0),
            ([10.0, 12.0, 15.0], 4.0, 30.0, 900.0),
            ([12.0, 14.0, 18.0], 6.0, 80.0, 300.0),
            ([8.0, 9.0, 11.0], 3.0, 120.0, 1500.0),
        ] {
            let coal = [10.0, 5.0, 0.0].map(|c: f64| c.min(demand[0]));
            let techs = tech_toml(capex, gas_gw, gas_vc);
            let plan = solve(&toy(grid, &demand, &coal, &techs, &costs)).unwrap();
            let oracle = brute_force(&demand, &coal, capex, gas_gw, gas_vc).unwrap();
            assert!(plan.objective <= oracle * (1.0 + 1e-9), "{} vs {oracle} {:?}", plan.objective, plan.additions);
            assert!((plan.objective - oracle).abs() <= 0.01 * oracle, "{} vs {oracle}", plan.objective);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(48))]
        #[test]
        fn random_integer_toys_match_exhaustive_search(
            demand in proptest::array::uniform3(1u32..=15),
            coal0 in 0u32..=10,
            gas_gw in 0u32..=6,
            gas_vc in 10u32..=150,
            capex in 1u32..=20,
        ) {
            let demand = demand.map(f64::from);
            let coal0 = f64::from(coal0).min(demand[0]);
            let coal = [coal0, (coal0 / 2.0).floor().min(demand[1]), 0.0];
            let capex = 100.0 * f64::from(capex);
            let (gas_gw, gas_vc) = (f64::from(gas_gw), f64::from(gas_vc));
            let techs = tech_toml(capex, gas_gw, gas_vc);
            let costs = loose_costs();
            let grid = TimeGrid::new(2020, 2030, 5).unwrap();
            let plan = solve(&toy(grid, &demand, &coal, &techs, &costs)).unwrap();
            let oracle = brute_force(&demand, &coal, capex, gas_gw, gas_vc).unwrap();
            proptest::prop_assert!(plan.objective <= oracle * (1.0 + 1e-9) + 1e-9, "{} vs {}", plan.objective, oracle);
            proptest::prop_assert!((plan.objective - oracle).abs() <= 0.01 * oracle + 1e-9, "{} vs {}", plan.objective, oracle);
        }
    }

    #[test]
    fn price_is_variable_cost_with_slack() {
        let techs = tech_toml(1e6, 100.0, 30.0);
        let costs = loose_costs();
        let grid = TimeGrid::new(2020, 2025, 5).unwrap();
        let plan = solve(&toy(grid, &[10.0, 10.0], &[0.0, 0.0], &techs, &costs)).unwrap();
        for p in plan.electricity_price.values() {
            assert_relative_eq!(p, 30.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn price_is_next_unit_when_capacity_binds() {
        // gas (30) is capped at 5 TWh; an expensive "biomass" at 50 covers the rest
        let cf = 1000.0 / HOURS;
        let techs = TechSet::from_toml(&format!(
            r#"
            [tech.gas]
            emission_factor_t_per_mwh = 0.4
            max_cf = {cf}
            variable_cost = 30.0
            capex = 0.0
            existing_gw = 5.0
            lifetime_years = 1e12
            expandable = false
            [tech.biomass]
            emission_factor_t_per_mwh = 0.0
            max_cf = {cf}
            variable_cost = 50.0
            capex = 0.0
            existing_gw = 100.0
            lifetime_years = 1e12
            expandable = false
            "#
        ))
        .unwrap();
        let costs = CostModel::default();
        let grid = TimeGrid::new(2020, 2025, 5).unwrap();
        let plan = solve(&toy(grid, &[10.0, 10.0], &[0.0, 0.0], &techs, &costs)).unwrap();
        for p in plan.electricity_price.values() {
            assert_relative_eq!(p, 50.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn price_without_solution_is_an_error() {
        let techs = tech_toml(600.0, 0.0, 50.0);
        let costs = loose_costs();
        let problem = toy(TimeGrid::default(), &[1.0; 9], &[0.0; 9], &techs, &costs);
        assert!(matches!(electricity_price(&problem, None), Err(Error::NotSolved)));
    }

    #[test]
    fn coal_above_demand_is_infeasible() {
        let techs = tech_toml(600.0, 0.0, 50.0);
        let costs = loose_costs();
        let grid = TimeGrid::new(2020, 2025, 5).unwrap();
        let err = solve(&toy(grid, &[5.0, 5.0], &[6.0, 0.0], &techs, &costs)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn unreachable_budget_is_infeasible() {
        // demand only gas can meet, and no removal before 2030
        let techs = tech_toml(1e6, 100.0, 30.0);
        let mut costs = loose_costs();
        costs.techs.insert(TechId::Solar, TechCost { build_ramp_limit: Some(0.0), ..TechCost::default() });
        let grid = TimeGrid::new(2020, 2025, 5).unwrap();
        let mut problem = toy(grid, &[50.0, 50.0], &[0.0, 0.0], &techs, &costs);
        problem.policy = EmissionPolicy::Budget(0.01);
        assert!(matches!(solve(&problem), Err(Error::Infeasible(_))));
    }

    #[test]
    fn trapezoid_weights_halve_the_ends() {
        assert_eq!(
            trapezoid_weights(&TimeGrid::new(2020, 2035, 5).unwrap()),
            vec![2.5, 5.0, 5.0, 2.5]
        );
    }

    #[test]
    fn cost_file_rejects_unknown_keys() {
        let bad = "[global]\ncdr_cost = 1.0\ncdr_ramp_gt_per_period = 1.0\nfoo = 2\n";
        assert!(CostModel::from_toml(bad).is_err());
        let bad_rate = "[global]\ncdr_cost = 1.0\ncdr_ramp_gt_per_period = 1.0\n[tech.solar]\nlearning_rate = 0.6\n";
        assert!(CostModel::from_toml(bad_rate).is_err());
    }
}
