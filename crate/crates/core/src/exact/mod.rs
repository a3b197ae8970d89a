//! Exact offline assignment.
//!
//! Two search strategies share one entry point, [`solve_exact`]:
//!
//! * when no EV can ever be short of energy for a task (see
//!   [`energy_never_binds`]), EVs at the same station are interchangeable and
//!   the problem collapses to an integer flow over (station, time point)
//!   nodes, solved by LP-based branch and bound in [`flow`];
//! * otherwise [`search`] enumerates customer decisions depth first, keeping
//!   per-EV traces and station occupancy up to date as it goes.
//!
//! [`brute_force_oracle`] is a separate exhaustive enumeration for checking
//! both on small instances.

mod flow;
mod oracle;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_scenario, Scenario, ScenarioIssue};
use crate::schedule::{objective, simulate_trace, Assignment, Schedule};

pub use crate::mip::solve::{SolveLimits, SolveStatus};
pub use oracle::{brute_force_oracle, InstanceTooLarge, ORACLE_MAX_CUSTOMERS, ORACLE_MAX_EVS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactConfig {
    pub limits: SolveLimits,
    /// Use the station-balance rows: they drive the flow formulation and
    /// give the enumeration a root bound. Off means plain enumeration.
    pub cuts: bool,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            limits: SolveLimits::default(),
            cuts: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Optimal schedule, or the best one found when a limit was hit.
    pub schedule: Option<Schedule>,
    pub objective: usize,
    pub nodes_explored: u64,
    #[serde(with = "secs")]
    pub wall_time: Duration,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flow,
    Enumeration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExactError {
    #[error("invalid scenario: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidScenario(Vec<ScenarioIssue>),
}

/// True when every EV that is parked for at least one point before a task
/// holds enough energy for it, whatever it did before.
///
/// An EV arriving with an empty battery regains `charge_rate` in one parked
/// point, so tasks needing at most that much are always affordable after a
/// previous task; the first task of each EV is covered by its start energy
/// plus one point of charging.
pub fn energy_never_binds(s: &Scenario) -> bool {
    let Some(need) = s.tasks.iter().map(|t| t.energy).reduce(f64::max) else {
        return true;
    };
    s.evs.iter().all(|ev| {
        ev.charged(0.0) >= need && ev.charged(ev.start_energy) >= need
    })
}

/// Maximizes the number of executed tasks.
pub fn solve_exact(s: &Scenario, cfg: &ExactConfig) -> Result<SolveResult, ExactError> {
    let issues = validate_scenario(s);
    if !issues.is_empty() {
        return Err(ExactError::InvalidScenario(issues));
    }
    let started = Instant::now();
    let (outcome, method) = if cfg.cuts && energy_never_binds(s) {
        (flow::solve(s, &cfg.limits, started), Method::Flow)
    } else {
        let bound = if cfg.cuts { flow::relaxation_bound(s) } else { None };
        (search::solve(s, &cfg.limits, started, bound), Method::Enumeration)
    };
    let schedule = simulate_trace(s, &outcome.assignment)
        .expect("search only keeps assignments with a valid trace");
    Ok(SolveResult {
        status: outcome.status,
        objective: objective(&schedule),
        schedule: Some(schedule),
        nodes_explored: outcome.nodes,
        wall_time: started.elapsed(),
        method,
    })
}

pub(crate) struct Outcome {
    pub status: SolveStatus,
    pub assignment: Assignment,
    pub nodes: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::check_feasibility;
    use crate::model::fixtures::*;
    use crate::model::{EvId, TaskId};

    fn both(s: &Scenario) -> [SolveResult; 2] {
        [true, false].map(|cuts| {
            solve_exact(
                s,
                &ExactConfig {
                    cuts,
                    ..Default::default()
                },
            )
            .unwrap()
        })
    }

    #[test]
    fn single_feasible_choice() {
        let mut s = two_station_scenario(5, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        for res in both(&s) {
            assert_eq!(res.status, SolveStatus::Optimal);
            assert_eq!(res.objective, 1);
            let sch = res.schedule.unwrap();
            assert_eq!(sch.assignment, Assignment::from([(TaskId(0), EvId(0))]));
            assert!(check_feasibility(&s, &sch).ok);
        }
    }

    #[test]
    fn overlapping_windows_share_one_ev() {
        let mut s = two_station_scenario(8, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        add_customer(&mut s, &[(0, 2)], 0);
        for res in both(&s) {
            assert_eq!(res.objective, 1);
            assert_eq!(res.schedule.unwrap().assignment.len(), 1);
        }
    }

    #[test]
    fn low_energy_switches_to_enumeration() {
        // Empty battery charging 5 per point: 5 at start 1, 20 at start 4.
        let mut s = two_station_scenario(8, &[(0, 0.0)]);
        s.evs[0].charge_rate = 5.0;
        add_customer(&mut s, &[(0, 1)], 0);
        add_customer(&mut s, &[(0, 4)], 0);
        assert!(!energy_never_binds(&s));
        for res in both(&s) {
            assert_eq!(res.method, Method::Enumeration);
            assert_eq!(res.objective, 1);
            assert_eq!(
                res.schedule.unwrap().assignment,
                Assignment::from([(TaskId(1), EvId(0))])
            );
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected_up_front() {
        let mut s = two_station_scenario(5, &[(0, 100.0)]);
        s.network.stations[0].capacity = 0;
        assert!(matches!(
            solve_exact(&s, &ExactConfig::default()),
            Err(ExactError::InvalidScenario(_))
        ));
    }

    #[test]
    fn node_budget_keeps_incumbent() {
        let mut s = two_station_scenario(12, &[(0, 100.0), (1, 100.0)]);
        for k in 0..5 {
            add_customer(&mut s, &[(k % 2, 1 + k), (1 - k % 2, 2 + k)], 0);
        }
        let cfg = ExactConfig {
            limits: SolveLimits {
                node_budget: Some(1),
                time_budget: None,
            },
            cuts: false,
        };
        let res = solve_exact(&s, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::TimedOut);
        let sch = res.schedule.unwrap();
        assert!(check_feasibility(&s, &sch).ok);
    }

    #[test]
    fn deterministic() {
        let mut s = two_station_scenario(12, &[(0, 100.0), (1, 60.0)]);
        for k in 0..4 {
            add_customer(&mut s, &[(k % 2, 1 + 2 * k), (1 - k % 2, 2 + k)], 0);
        }
        for cuts in [true, false] {
            let cfg = ExactConfig {
                cuts,
                ..Default::default()
            };
            let one = solve_exact(&s, &cfg).unwrap();
            let two = solve_exact(&s, &cfg).unwrap();
            assert_eq!(one.schedule, two.schedule);
            assert_eq!(one.nodes_explored, two.nodes_explored);
        }
    }
}
