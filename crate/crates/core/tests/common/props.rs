//! Property bodies shared by the proptest suite and the acceptance run.

use std::collections::BTreeMap;

use modfleet::exact::{solve_exact, ExactConfig, SolveLimits, SolveStatus};
use modfleet::mip::{build_model, parse_lp, solve_model, write_lp, BuildOptions};
use modfleet::model::{EvId, Scenario, StationId};
use modfleet::online::{handle_request, run_online, FleetState, HeuristicKind, Scorer};
use modfleet::scenario_gen::{generate, GenConfig};
use modfleet::{check_feasibility, objective, Schedule};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{location_changes, small_scenario, without_customer, SmallSpec};

pub type PropResult = Result<(), TestCaseError>;

pub const HEURISTICS: [fn(u64) -> HeuristicKind; 3] = [
    |_| HeuristicKind::Square,
    |_| HeuristicKind::Destination,
    HeuristicKind::Random,
];

fn spec(tight: bool) -> SmallSpec {
    if tight {
        SmallSpec::ORACLE.tight()
    } else {
        SmallSpec::ORACLE
    }
}

fn exact(s: &Scenario) -> (usize, Schedule) {
    let res = solve_exact(s, &ExactConfig::default()).expect("valid scenario");
    assert_eq!(res.status, SolveStatus::Optimal);
    (res.objective, res.schedule.expect("schedule"))
}

/// Every schedule the solvers produce for one instance.
fn all_schedules(s: &Scenario, seed: u64) -> Vec<(String, Schedule)> {
    let mut out = vec![("optimal".to_string(), exact(s).1)];
    for h in HEURISTICS {
        let kind = h(seed);
        out.push((kind.name().to_string(), run_online(s, kind).schedule));
    }
    out
}

pub fn determinism(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    let a = solve_exact(&s, &ExactConfig::default()).unwrap();
    let b = solve_exact(&s, &ExactConfig::default()).unwrap();
    prop_assert_eq!(a.schedule, b.schedule);
    prop_assert_eq!(a.nodes_explored, b.nodes_explored);
    for h in HEURISTICS {
        let x = run_online(&s, h(seed));
        let y = run_online(&s, h(seed));
        prop_assert_eq!(x.schedule, y.schedule);
        prop_assert_eq!(x.decisions, y.decisions);
    }
    let cfg = GenConfig {
        num_customers: (seed % 20) as usize,
        seed,
        ..GenConfig::default()
    };
    prop_assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    Ok(())
}

/// Online reservations never book a station past capacity at any point, and
/// the final parking counts respect capacity too.
pub fn capacity_with_reservations(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for h in HEURISTICS {
        let mut fs = FleetState::new(&s);
        let mut scorer = Scorer::new(h(seed));
        let mut order: Vec<_> = s.customers.iter().collect();
        order.sort_by_key(|c| (c.arrival, c.id));
        for c in order {
            fs.advance_charging(&s, c.arrival.max(fs.t_now));
            handle_request(&mut fs, &s, c, &mut scorer);
            for (l, row) in fs.occupancy.iter().enumerate() {
                let cap = s.network.capacity(StationId(l));
                prop_assert!(row.iter().all(|&n| n <= cap), "station {} over capacity", l);
            }
        }
    }
    for (who, sch) in all_schedules(&s, seed) {
        let mut parked: BTreeMap<(usize, StationId), usize> = BTreeMap::new();
        for &(_, t, l) in &sch.prk {
            *parked.entry((t, l)).or_default() += 1;
        }
        for ((t, l), n) in parked {
            prop_assert!(n <= s.network.capacity(l), "{}: {} EVs at {} at {}", who, n, l, t);
        }
    }
    Ok(())
}

pub fn battery_band(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for (who, sch) in all_schedules(&s, seed) {
        for (a, trace) in sch.energy_trace.iter().enumerate() {
            for (t, &e) in trace.iter().enumerate() {
                prop_assert!((-1e-9..=100.0 + 1e-9).contains(&e), "{}: EV {} at {} holds {}", who, a, t, e);
            }
        }
        for (a, row) in sch.bch.iter().enumerate() {
            let rate = s.evs[a].charge_rate;
            prop_assert!(row.iter().all(|&b| (-1e-9..=rate + 1e-9).contains(&b)), "{}: charging out of range", who);
        }
    }
    Ok(())
}

pub fn location_change_count(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for (who, sch) in all_schedules(&s, seed) {
        prop_assert_eq!(location_changes(&s, &sch.prk), 2 * objective(&sch), "{}", who);
    }
    Ok(())
}

pub fn customer_exclusivity(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for (who, sch) in all_schedules(&s, seed) {
        for c in &s.customers {
            let served = c.alternatives.iter().filter(|r| sch.lambda[r.0]).count();
            prop_assert!(served <= 1, "{}: {} served {} times", who, c.id, served);
        }
        for r in sch.executed() {
            let drivers: Vec<EvId> = sch
                .eps
                .iter()
                .filter(|&&(_, q, _)| q == r)
                .map(|&(a, _, _)| a)
                .collect();
            prop_assert_eq!(drivers.len(), s.task(r).duration, "{}", who);
            prop_assert!(drivers.iter().all(|&a| Some(&a) == sch.assignment.get(&r)), "{}", who);
        }
    }
    Ok(())
}

/// An extra EV never lowers the optimum when it parks where it can never be
/// in the way. A full station is a different matter, see the tests.
pub fn ev_addition_monotone(seed: u64, tight: bool) -> PropResult {
    let mut s = small_scenario(seed, spec(tight));
    let home = StationId((seed % s.num_stations() as u64) as usize);
    let room = s.evs.len() + 1;
    let cap = &mut s.network.stations[home.0].capacity;
    *cap = (*cap).max(room);
    let bigger = s.with_extra_ev(home);
    prop_assert!(exact(&bigger).0 >= exact(&s).0);
    Ok(())
}

pub fn online_within_optimal(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    let best = exact(&s).0;
    for h in HEURISTICS {
        let run = run_online(&s, h(seed));
        prop_assert!(run.serviced <= best, "{} served {} > {}", h(seed).name(), run.serviced, best);
    }
    Ok(())
}

pub fn schedules_feasible(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for (who, sch) in all_schedules(&s, seed) {
        let report = check_feasibility(&s, &sch);
        prop_assert!(report.ok, "{}: {:?}", who, report.violations);
    }
    Ok(())
}

pub fn cut_neutral(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    let with = solve_exact(&s, &ExactConfig::default()).unwrap();
    let without = solve_exact(
        &s,
        &ExactConfig {
            cuts: false,
            ..ExactConfig::default()
        },
    )
    .unwrap();
    prop_assert_eq!(with.objective, without.objective);
    Ok(())
}

/// The balance rows change neither the model optimum nor what it agrees with
/// the combinatorial solver on. Full models are only solvable when tiny.
pub fn model_cut_neutral(seed: u64) -> PropResult {
    let s = small_scenario(
        seed,
        SmallSpec {
            max_evs: 2,
            max_customers: 2,
            max_points: 6,
            max_stations: 2,
            tight_energy: seed % 2 == 0,
        },
    );
    let limits = SolveLimits::unlimited();
    let with = solve_model(&build_model(&s, &BuildOptions { cuts: true }), &limits);
    let without = solve_model(&build_model(&s, &BuildOptions { cuts: false }), &limits);
    prop_assert_eq!(with.status, SolveStatus::Optimal);
    prop_assert_eq!(without.status, SolveStatus::Optimal);
    prop_assert!((with.objective - without.objective).abs() < 1e-6);
    prop_assert!((with.objective - exact(&s).0 as f64).abs() < 1e-6);
    Ok(())
}

pub fn lp_round_trip(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for cuts in [true, false] {
        let m = build_model(&s, &BuildOptions { cuts });
        let text = write_lp(&m);
        let back = parse_lp(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(back == m, "round trip changed the model (cuts {})", cuts);
        prop_assert_eq!(write_lp(&back), text);
    }
    Ok(())
}

/// Dropping a customer the scheduler turned away leaves every other decision
/// as it was.
pub fn rejection_replay(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    for h in HEURISTICS {
        let full = run_online(&s, h(seed));
        let Some(dropped) = full.decisions.iter().find(|d| !d.accepted) else {
            continue;
        };
        let drop = dropped.customer.0;
        let reduced = without_customer(&s, drop);
        let replay = run_online(&reduced, h(seed));
        let removed = s.customers[drop].alternatives.len();
        let first_removed = s.customers[drop].alternatives.iter().map(|r| r.0).min().unwrap();
        let mut before: Vec<_> = full
            .decisions
            .iter()
            .filter(|d| d.customer.0 != drop)
            .map(|d| {
                let remap = |r: usize| if r > first_removed { r - removed } else { r };
                let c = if d.customer.0 > drop { d.customer.0 - 1 } else { d.customer.0 };
                (c, d.accepted, d.task.map(|r| remap(r.0)), d.ev)
            })
            .collect();
        let mut after: Vec<_> = replay
            .decisions
            .iter()
            .map(|d| (d.customer.0, d.accepted, d.task.map(|r| r.0), d.ev))
            .collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }
    Ok(())
}

pub fn json_round_trip(seed: u64, tight: bool) -> PropResult {
    let s = small_scenario(seed, spec(tight));
    prop_assert_eq!(&Scenario::from_json(&s.to_json()).unwrap(), &s);
    for (_, sch) in all_schedules(&s, seed) {
        prop_assert_eq!(&Schedule::from_json(&sch.to_json()).unwrap(), &sch);
    }
    Ok(())
}
