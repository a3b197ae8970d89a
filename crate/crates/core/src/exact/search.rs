//! Depth-first enumeration over tasks in start order.
//!
//! Each level decides one task: run it on an EV that is parked at the origin
//! by the point before departure and holds enough charge, or skip it. Tasks
//! are only ever appended to an EV's plan, so every partial plan is a valid
//! chain. Station occupancy at a point is settled once every task starting at
//! or before it has been decided; capacity is checked as the sweep passes.

use std::time::Instant;

use super::{Outcome, SolveLimits};
use crate::mip::solve::SolveStatus;
use crate::model::{EvId, EvSpec, Scenario, TaskId};
use crate::schedule::Assignment;

/// Where an EV is, from when, and with how much charge at that point.
#[derive(Clone, Copy)]
struct EvAt {
    location: usize,
    free_from: usize,
    energy: f64,
}

struct Search<'a> {
    s: &'a Scenario,
    order: Vec<TaskId>,
    /// Per customer, the last position in `order` holding one of its tasks.
    last_pos: Vec<usize>,
    served: Vec<bool>,
    evs: Vec<EvAt>,
    /// Parked counts assuming nobody leaves after their last decided task.
    occupancy: Vec<Vec<usize>>,
    chosen: Vec<(TaskId, EvId)>,
    best: Option<(usize, Assignment)>,
    ceiling: usize,
    nodes: u64,
    deadline: Option<Instant>,
    node_budget: Option<u64>,
    stopped: bool,
}

/// Charge on reaching `until` after parking from `from` with `energy`.
fn charge_until(ev: &EvSpec, mut energy: f64, from: usize, until: usize) -> f64 {
    for _ in from..until {
        if energy >= ev.max_energy {
            break;
        }
        energy = ev.charged(energy);
    }
    energy
}

impl<'a> Search<'a> {
    /// Charge left after running `r` on EV `a`, if it can.
    fn fits(&self, a: usize, r: TaskId) -> Option<f64> {
        let task = self.s.task(r);
        let at = self.evs[a];
        if at.location != task.origin.0 || at.free_from >= task.start {
            return None;
        }
        let spec = &self.s.evs[a];
        let mut energy = charge_until(spec, at.energy, at.free_from, task.start);
        for _ in task.window() {
            energy -= spec.consumption;
            if energy < 0.0 {
                return None;
            }
        }
        Some(energy)
    }

    fn settled_within_capacity(&self, from: usize, to: usize) -> bool {
        self.occupancy.iter().enumerate().all(|(l, row)| {
            let cap = self.s.network.stations[l].capacity;
            row[from..to].iter().all(|&n| n <= cap)
        })
    }

    fn shift(&mut self, r: TaskId, sign: bool) {
        let task = self.s.task(r);
        for n in &mut self.occupancy[task.origin.0][task.start..] {
            *n = if sign { *n - 1 } else { *n + 1 };
        }
        for n in &mut self.occupancy[task.dest.0][task.end()..] {
            *n = if sign { *n + 1 } else { *n - 1 };
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.stopped {
            return true;
        }
        if self.node_budget.is_some_and(|n| self.nodes >= n)
            || (self.nodes % 256 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d))
        {
            self.stopped = true;
        }
        self.stopped
    }

    fn done(&self) -> bool {
        self.best.as_ref().is_some_and(|(v, _)| *v >= self.ceiling)
    }

    /// Customers not yet served that still have an undecided task at or after `i`.
    fn still_open(&self, i: usize) -> usize {
        self.last_pos
            .iter()
            .zip(&self.served)
            .filter(|&(&last, &served)| !served && last != usize::MAX && last >= i)
            .count()
    }

    fn dfs(&mut self, i: usize) {
        self.nodes += 1;
        let s = self.s;
        let horizon = s.grid.num_points;
        let settled_from = i.checked_sub(1).map_or(0, |k| s.task(self.order[k]).start);
        let settled_to = self.order.get(i).map_or(horizon, |&r| s.task(r).start);
        if !self.settled_within_capacity(settled_from, settled_to) {
            return;
        }
        let executed = self.chosen.len();
        if let Some((value, _)) = &self.best {
            if executed + self.still_open(i) <= *value {
                return;
            }
        }
        if i == self.order.len() {
            self.best = Some((executed, self.chosen.iter().copied().collect()));
            return;
        }
        if self.out_of_budget() {
            return;
        }

        let r = self.order[i];
        let task = s.task(r);
        if !self.served[task.customer.0] {
            // EVs at the same place with the same charge at departure are
            // interchangeable from here on.
            let mut tried: Vec<u64> = Vec::new();
            for a in 0..s.evs.len() {
                let Some(left) = self.fits(a, r) else {
                    continue;
                };
                let at = self.evs[a];
                let key = charge_until(&s.evs[a], at.energy, at.free_from, task.start).to_bits();
                if tried.contains(&key) {
                    continue;
                }
                tried.push(key);

                self.shift(r, true);
                self.evs[a] = EvAt {
                    location: task.dest.0,
                    free_from: task.end(),
                    energy: left,
                };
                self.served[task.customer.0] = true;
                self.chosen.push((r, EvId(a)));
                self.dfs(i + 1);
                self.chosen.pop();
                self.served[task.customer.0] = false;
                self.evs[a] = at;
                self.shift(r, false);
                if self.stopped || self.done() {
                    return;
                }
            }
        }
        self.dfs(i + 1);
    }
}

pub(crate) fn solve(
    s: &Scenario,
    limits: &SolveLimits,
    started: Instant,
    ceiling: Option<usize>,
) -> Outcome {
    let horizon = s.grid.num_points;
    let mut occupancy = vec![vec![0; horizon]; s.num_stations()];
    for (l, &n) in s.initial_counts().iter().enumerate() {
        occupancy[l].fill(n);
    }
    let mut order: Vec<TaskId> = s.tasks.iter().map(|t| t.id).collect();
    order.sort_by_key(|&r| (s.task(r).start, r));
    let mut last_pos = vec![usize::MAX; s.customers.len()];
    for (i, &r) in order.iter().enumerate() {
        last_pos[s.task(r).customer.0] = i;
    }
    let mut search = Search {
        s,
        order,
        last_pos,
        served: vec![false; s.customers.len()],
        evs: s
            .evs
            .iter()
            .map(|ev| EvAt {
                location: ev.start_location.0,
                free_from: 0,
                energy: ev.start_energy,
            })
            .collect(),
        occupancy,
        chosen: Vec::new(),
        best: None,
        ceiling: ceiling.unwrap_or(usize::MAX).min(s.customers.len()),
        nodes: 0,
        deadline: limits.deadline(started),
        node_budget: limits.node_budget,
        stopped: false,
    };
    search.dfs(0);
    let status = if search.stopped && !search.done() {
        SolveStatus::TimedOut
    } else {
        SolveStatus::Optimal
    };
    Outcome {
        status,
        assignment: search.best.map(|(_, a)| a).unwrap_or_default(),
        nodes: search.nodes,
    }
}
