//! Aggregated integer flow over (station, time point) nodes.
//!
//! `w[l][t]` counts EVs parked at `l` during both `t` and `t + 1`. A task
//! from `o` starting at `s` consumes one unit leaving node `(o, s - 1)` and
//! produces one at `(d, s + duration)`. Node balance is the station balance
//! row of the full model; capacity applies to everything parked at a node.

use std::time::Instant;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use super::{Outcome, SolveLimits};
use crate::mip::solve::{branch_and_bound, SolveStatus};
use crate::model::{EvId, Scenario, StationId};
use crate::schedule::Assignment;

struct FlowLp {
    problem: Problem,
    vars: Vec<Variable>,
    num_tasks: usize,
}

fn build(s: &Scenario) -> FlowLp {
    let horizon = s.grid.num_points;
    let stations = s.num_stations();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let mut vars = Vec::with_capacity(s.tasks.len() + stations * horizon);
    for _ in &s.tasks {
        vars.push(problem.add_var(1.0, (0.0, 1.0)));
    }
    let w = |l: usize, t: usize| s.tasks.len() + l * horizon + t;
    for l in 0..stations {
        let cap = s.network.capacity(StationId(l)) as f64;
        for _ in 0..horizon {
            vars.push(problem.add_var(0.0, (0.0, cap)));
        }
    }

    // departures[l][t]: tasks leaving l whose EV is last parked there at t.
    let mut departures = vec![vec![Vec::new(); horizon]; stations];
    let mut arrivals = vec![vec![Vec::new(); horizon]; stations];
    for task in &s.tasks {
        departures[task.origin.0][task.start - 1].push(task.id.0);
        arrivals[task.dest.0][task.end()].push(task.id.0);
    }

    let init = s.initial_counts();
    for l in 0..stations {
        let cap = s.network.capacity(StationId(l)) as f64;
        for t in 0..horizon {
            let mut balance = vec![(vars[w(l, t)], 1.0)];
            let mut parked = vec![(vars[w(l, t)], 1.0)];
            for &r in &departures[l][t] {
                balance.push((vars[r], 1.0));
                parked.push((vars[r], 1.0));
            }
            for &r in &arrivals[l][t] {
                balance.push((vars[r], -1.0));
            }
            let rhs = if t == 0 {
                init[l] as f64
            } else {
                balance.push((vars[w(l, t - 1)], -1.0));
                0.0
            };
            problem.add_constraint(balance.as_slice(), ComparisonOp::Eq, rhs);
            if !departures[l][t].is_empty() {
                problem.add_constraint(parked.as_slice(), ComparisonOp::Le, cap);
            }
        }
    }
    for c in &s.customers {
        if c.alternatives.len() > 1 {
            let row: Vec<(Variable, f64)> =
                c.alternatives.iter().map(|r| (vars[r.0], 1.0)).collect();
            problem.add_constraint(row.as_slice(), ComparisonOp::Le, 1.0);
        }
    }
    FlowLp {
        problem,
        vars,
        num_tasks: s.tasks.len(),
    }
}

/// Upper bound on the objective from the flow relaxation, valid whether or
/// not energy binds.
pub(crate) fn relaxation_bound(s: &Scenario) -> Option<usize> {
    let lp = build(s);
    let sol = lp.problem.solve().ok()?;
    Some((sol.objective() + 1e-6).floor().max(0.0) as usize)
}

pub(crate) fn solve(s: &Scenario, limits: &SolveLimits, started: Instant) -> Outcome {
    let lp = build(s);
    let integers: Vec<usize> = (0..lp.num_tasks).collect();
    let mut limits = *limits;
    if let Some(budget) = limits.time_budget {
        limits.time_budget = Some(budget.saturating_sub(started.elapsed()));
    }
    let out = branch_and_bound(&lp.problem, &lp.vars, &integers, true, &limits);
    let chosen: Vec<bool> = if out.values.is_empty() {
        vec![false; lp.num_tasks]
    } else {
        out.values[..lp.num_tasks].iter().map(|&x| x > 0.5).collect()
    };
    let status = match out.status {
        // The empty assignment is always a solution of a valid scenario.
        SolveStatus::Infeasible => SolveStatus::Optimal,
        other => other,
    };
    Outcome {
        status,
        assignment: disaggregate(s, &chosen),
        nodes: out.nodes,
    }
}

/// Hands executed tasks to EVs in start order, each to the lowest-id EV
/// parked at the origin by the point before departure.
pub(crate) fn disaggregate(s: &Scenario, chosen: &[bool]) -> Assignment {
    let mut order: Vec<usize> = (0..s.tasks.len()).filter(|&r| chosen[r]).collect();
    order.sort_by_key(|&r| (s.tasks[r].start, r));
    let mut location: Vec<StationId> = s.evs.iter().map(|e| e.start_location).collect();
    let mut free_from = vec![0usize; s.evs.len()];
    let mut out = Assignment::new();
    for r in order {
        let task = &s.tasks[r];
        let ev = (0..s.evs.len())
            .find(|&a| location[a] == task.origin && free_from[a] < task.start)
            .expect("flow solution always has an EV waiting at the origin");
        location[ev] = task.dest;
        free_from[ev] = task.end();
        out.insert(task.id, EvId(ev));
    }
    out
}
