mod common;

use approx::assert_relative_eq;
use common::*;
use netzero::power::{dispatch_residual, generation_from_capacity, share_decline_rate, DispatchOffer, TechId};
use netzero::report::{GENERATION_TOLERANCE, KNOWN_EXCEPTIONS};
use netzero::scenario::{load_scenario, parse_scenario};
use netzero::time::{NodeSeries, TimeGrid, HOURS_PER_YEAR};
use proptest::prelude::*;

proptest! {
    #[test]
    fn annual_interpolation_is_exact_at_nodes_and_linear_between(
        values in proptest::collection::vec(-1e4f64..1e4, 9),
        year in 2020i32..=2060,
    ) {
        let grid = TimeGrid::default();
        let s = grid.series(values.iter().copied());
        let annual = s.interpolate_annual().unwrap();
        prop_assert_eq!(annual.start, 2020);
        prop_assert_eq!(annual.end(), 2060);
        for (y, v) in s.points() {
            prop_assert_eq!(annual.get(*y).unwrap(), *v);
        }
        let a = 2020 + (year - 2020) / 5 * 5;
        let b = (a + 5).min(2060);
        let (va, vb) = (s.get(a).unwrap(), s.get(b).unwrap());
        let expected = if a == b { va } else { va + (vb - va) * (year - a) as f64 / (b - a) as f64 };
        prop_assert!((annual.get(year).unwrap() - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn scenario_round_trips_with_edited_capacity(scale in 0.5f64..1.5, cf in 0.1f64..0.9) {
        let base = scenario("baseline");
        let spec = netzero::scenario::ScenarioSpec {
            coal_capacity: base.coal_capacity.map(|v| (v * scale * 10.0).round() / 10.0),
            coal_cf_cap: base.coal_cf_cap.map(|_| cf),
            ..base
        };
        let back = parse_scenario(&spec.to_toml()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn dispatch_matches_exhaustive_search(
        caps in proptest::collection::vec(0u32..=10, 1..=4),
        costs in proptest::collection::vec(0u32..=100, 4),
        demand in 0u32..=40,
        coal in 0u32..=10,
    ) {
        let ids = [TechId::Gas, TechId::Solar, TechId::Wind, TechId::Nuclear];
        // one TWh/yr per GW
        let cf = 1000.0 / HOURS_PER_YEAR;
        let offers: Vec<DispatchOffer> = caps
            .iter()
            .enumerate()
            .map(|(i, &c)| DispatchOffer { tech: ids[i], capacity_gw: c as f64, max_cf: cf, marginal_cost: costs[i] as f64 })
            .collect();
        let residual = demand.saturating_sub(coal);
        let oracle = exhaustive(&caps, &costs, residual);
        match dispatch_residual(demand as f64, coal as f64, &offers) {
            Ok(alloc) => {
                let oracle = oracle.expect("merit order found a feasible dispatch");
                let cost: f64 = alloc.iter().zip(&offers).map(|(a, o)| a * o.marginal_cost).sum();
                prop_assert!((cost - oracle).abs() <= 1e-9 * (1.0 + oracle), "{} vs {}", cost, oracle);
                prop_assert!((alloc.iter().sum::<f64>() - residual as f64).abs() <= 1e-9 * (1.0 + residual as f64));
            }
            Err(_) => prop_assert!(oracle.is_none()),
        }
    }
}

fn exhaustive(caps: &[u32], costs: &[u32], residual: u32) -> Option<f64> {
    fn go(caps: &[u32], costs: &[u32], left: u32) -> Option<f64> {
        match caps.split_first() {
            None => (left == 0).then_some(0.0),
            Some((&c, rest)) => (0..=c.min(left))
                .filter_map(|take| go(rest, &costs[1..], left - take).map(|v| v + take as f64 * costs[0] as f64))
                .reduce(f64::min),
        }
    }
    go(caps, costs, residual)
}

#[test]
fn bundled_scenarios_validate_clean() {
    for name in ["fast", "medium", "slow", "plateau30", "baseline"] {
        let spec = scenario(name);
        assert!(spec.validate().is_empty(), "{name}: {:?}", spec.validate());
    }
}

#[test]
fn bundled_scenarios_round_trip() {
    let b = bundle();
    for name in ["fast", "medium", "slow", "plateau30", "baseline"] {
        let spec = load_scenario(b.scenario_path(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, spec.to_toml()).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), spec, "{name}");
    }
}

#[test]
fn capacity_times_factor_reproduces_published_generation() {
    let t1 = table1();
    let mut checked = 0;
    for cell in table_s1() {
        if cell.scenario == "baseline" || KNOWN_EXCEPTIONS.contains(&(cell.scenario.as_str(), cell.year)) {
            continue;
        }
        let published = t1
            .iter()
            .find(|c| c.scenario == cell.scenario && c.year == cell.year)
            .expect("matching published cell");
        let gen = generation_from_capacity(cell.capacity_gw, cell.capacity_factor_pct.unwrap_or(0.0) / 100.0).unwrap();
        if published.generation_twh == 0.0 {
            assert!(gen < 1e-9, "{} {}: {gen}", cell.scenario, cell.year);
        } else {
            let rel = (gen - published.generation_twh).abs() / published.generation_twh;
            assert!(rel <= GENERATION_TOLERANCE, "{} {}: {gen} vs {}", cell.scenario, cell.year, published.generation_twh);
        }
        checked += 1;
    }
    assert_eq!(checked, 21);
}

#[test]
fn decline_rates_follow_from_backward_differences() {
    let t1 = table1();
    for name in netzero::data::TABLE_SCENARIOS {
        let rows: Vec<_> = t1.iter().filter(|c| c.scenario == name).collect();
        let shares = NodeSeries::new(rows.iter().map(|c| (c.year, c.share_pct)).collect()).unwrap();
        let rates = share_decline_rate(&shares).unwrap();
        for c in &rows[1..] {
            let published = c.decline_pp_yr.expect("rate after the first node");
            let r = rates.get(c.year).unwrap();
            assert!((r - published).abs() <= 0.05 + 1e-9, "{name} {}: {r} vs {published}", c.year);
        }
    }
}

#[test]
fn capacity_identity_example() {
    assert_relative_eq!(generation_from_capacity(1070.0, 0.58).unwrap(), 5436.456, max_relative = 1e-12);
    assert!(generation_from_capacity(-1.0, 0.5).is_err());
    assert!(generation_from_capacity(1.0, 1.5).is_err());
}

#[test]
fn table1_refuses_scenarios_outside_the_published_set() {
    let b = bundle();
    let baseline = netzero::pipeline::run_scenario(b, &scenario("baseline"), None, None).unwrap();
    let err = netzero::report::table1_rows(&[baseline], &["baseline"]).unwrap_err();
    assert!(matches!(err, netzero::Error::MissingScenario(ref s) if s == "baseline"));
    let err = netzero::report::table1_rows(netzero_runs(), &["fast", "nowhere"]).unwrap_err();
    assert!(matches!(err, netzero::Error::MissingScenario(_)));
}
