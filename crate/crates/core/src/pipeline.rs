//! One scenario end to end: expansion plan, end-use response, emission
//! ledger and parity years.

use crate::data::Bundle;
use crate::enduse::{simulate, EndUseOutcome, TWH_PER_EJ};
use crate::error::{Error, Result};
use crate::expansion::{plan_expansion, solve_fixed_budget, ExpansionPlan};
use crate::ledger::{annual_emissions, EmissionLedger, LedgerRow, SectorUse};
use crate::parity::{parity_year, ParityResult};
use crate::scenario::{PolicyMode, ScenarioSpec};
use crate::time::{AnnualSeries, NodeSeries, TimeGrid};

/// Passes of the budget loop between optimizer and end-use.
pub const MAX_BUDGET_PASSES: usize = 6;

/// Gt/yr
const BUDGET_PASS_TOLERANCE: f64 = 1e-6;

/// Net-zero year assumed for the first pass of a budget run.
const NET_ZERO_YEAR: i32 = 2060;

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: ScenarioSpec,
    pub mode: PolicyMode,
    pub plan: ExpansionPlan,
    pub enduse: EndUseOutcome,
    pub ledger: EmissionLedger,
    /// Non-power emissions the optimizer counted against a budget, Gt/yr.
    pub budget_other: Option<NodeSeries>,
}

impl ScenarioRun {
    pub fn grid(&self) -> TimeGrid {
        self.plan.grid
    }

    /// Annual grid intensity from `from` to the end of the horizon, gCO₂/kWh.
    pub fn intensity_trajectory(&self, from: i32) -> Result<AnnualSeries> {
        let annual = self.ledger.grid_intensity().interpolate_annual()?;
        let end = annual.end();
        annual.window(from, end).ok_or(Error::MissingYear(from))
    }

    pub fn parity(&self, bundle: &Bundle, from: i32) -> Result<Vec<ParityResult>> {
        let trajectory = self.intensity_trajectory(from)?;
        bundle
            .appliances
            .iter()
            .map(|a| parity_year(a, &trajectory, &self.scenario.name))
            .collect()
    }
}

/// Ledger rows for a plan and the end-use response to its prices.
pub fn build_ledger(bundle: &Bundle, plan: &ExpansionPlan, enduse: &EndUseOutcome) -> Result<EmissionLedger> {
    let rows = plan
        .grid
        .years()
        .map(|year| {
            let uses: Vec<SectorUse> = enduse
                .sectors
                .iter()
                .map(|s| SectorUse {
                    sector: s.sector,
                    electricity_twh: s.electricity(year).unwrap_or(0.0) * TWH_PER_EJ,
                    fossil_ej: s.fossil(year).unwrap_or(0.0),
                    fuel_factor: enduse
                        .direct_factors
                        .get(&s.sector)
                        .and_then(|f| f.value_at(year as f64))
                        .unwrap_or(0.0),
                })
                .collect();
            let mut row: LedgerRow = annual_emissions(year, &plan.generation, &bundle.techs, &uses)?;
            row.cdr = plan.cdr.get(year).unwrap_or(0.0);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmissionLedger::new(rows))
}

/// Run `scenario` under `mode` (its own policy mode when `None`).
///
/// Budget runs alternate between the optimizer and the end-use model: the
/// direct emissions implied by one plan's prices are counted against the
/// budget in the next solve, starting from a net-zero plan.
pub fn run_scenario(
    bundle: &Bundle,
    scenario: &ScenarioSpec,
    mode: Option<PolicyMode>,
    demand: Option<&NodeSeries>,
) -> Result<ScenarioRun> {
    let mode = mode.unwrap_or(scenario.policy_mode);
    let scenario = scenario.with_policy(mode);
    let demand = match demand {
        Some(d) => d,
        None => bundle.demand_for(&scenario)?,
    };
    let grid = TimeGrid::default();

    let (plan, enduse, budget_other) = match mode {
        PolicyMode::NetZeroYear(_) => {
            let plan = plan_expansion(&scenario, demand, &bundle.costs, &bundle.techs)?;
            let enduse = simulate(&bundle.enduse, &grid, &plan.electricity_price)?;
            (plan, enduse, None)
        }
        PolicyMode::FixedBudget(budget) => {
            let first = scenario.with_policy(PolicyMode::NetZeroYear(NET_ZERO_YEAR));
            let plan = plan_expansion(&first, demand, &bundle.costs, &bundle.techs)?;
            let mut enduse = simulate(&bundle.enduse, &grid, &plan.electricity_price)?;
            let mut other = enduse.direct_emissions(&grid);
            let mut last = None;
            for _ in 0..MAX_BUDGET_PASSES {
                let plan = solve_fixed_budget(&scenario, budget, demand, &bundle.costs, &bundle.techs, Some(&other))?;
                enduse = simulate(&bundle.enduse, &grid, &plan.electricity_price)?;
                let next = enduse.direct_emissions(&grid);
                let shift = next
                    .values()
                    .zip(other.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                last = Some((plan, other));
                if shift < BUDGET_PASS_TOLERANCE {
                    break;
                }
                other = next;
            }
            let (plan, used) = last.expect("at least one pass");
            (plan, enduse, Some(used))
        }
    };
    let ledger = build_ledger(bundle, &plan, &enduse)?;
    Ok(ScenarioRun {
        scenario,
        mode,
        plan,
        enduse,
        ledger,
        budget_other,
    })
}

/// Run several scenarios, optionally on the rayon pool. Results keep input order.
pub fn run_many(
    bundle: &Bundle,
    scenarios: &[ScenarioSpec],
    mode: Option<PolicyMode>,
    parallel: bool,
) -> Vec<std::result::Result<ScenarioRun, (String, Error)>> {
    let one = |s: &ScenarioSpec| run_scenario(bundle, s, mode, None).map_err(|e| (s.name.clone(), e));
    if parallel {
        use rayon::prelude::*;
        scenarios.par_iter().map(one).collect()
    } else {
        scenarios.iter().map(one).collect()
    }
}
