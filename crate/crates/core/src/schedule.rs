//! Schedules: the decision variables of the assignment problem plus the
//! per-EV energy trajectory they imply.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EvId, EvSpec, Scenario, StationId, TaskId};

/// Executed tasks and the EV running each of them.
pub type Assignment = BTreeMap<TaskId, EvId>;

/// Full variable assignment.
///
/// `eps` and `prk` hold the true entries of the boolean work and parking
/// indicators, so any (possibly inconsistent) boolean array can be expressed.
/// `energy_trace[a][t]` is the battery level of EV `a` at the beginning of
/// point `t`; `bch[a][t]` is what it charges during `t`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub lambda: Vec<bool>,
    pub assignment: Assignment,
    /// `(ev, task, t)`: EV drives for the task during `t`.
    pub eps: BTreeSet<(EvId, TaskId, usize)>,
    /// `(ev, t, station)`: EV is parked at the station during `t`.
    pub prk: BTreeSet<(EvId, usize, StationId)>,
    pub bch: Vec<Vec<f64>>,
    pub energy_trace: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn executed(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.lambda
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(k, _)| TaskId(k))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Number of executed tasks.
pub fn objective(sch: &Schedule) -> usize {
    sch.lambda.iter().filter(|&&on| on).count()
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TraceError {
    #[error("{0} does not exist")]
    UnknownTask(TaskId),
    #[error("{0} does not exist")]
    UnknownEv(EvId),
    #[error("{ev} cannot run {second} while still busy with {first}")]
    Overlap {
        ev: EvId,
        first: TaskId,
        second: TaskId,
    },
    #[error("{ev} is at {at} but {task} leaves from {origin}")]
    WrongOrigin {
        ev: EvId,
        task: TaskId,
        at: StationId,
        origin: StationId,
    },
    #[error("{ev} runs out of energy on {task}")]
    OutOfEnergy { ev: EvId, task: TaskId },
    #[error("{0} starts at time point 0")]
    StartsAtZero(TaskId),
    #[error("{0} ends outside the horizon")]
    PastHorizon(TaskId),
}

/// Builds the full schedule implied by an assignment: every EV drives during
/// the windows of its tasks, is parked otherwise and charges at the maximum
/// rate whenever parked.
pub fn simulate_trace(s: &Scenario, assignment: &Assignment) -> Result<Schedule, TraceError> {
    let horizon = s.grid.num_points;
    let mut per_ev: Vec<Vec<TaskId>> = vec![Vec::new(); s.evs.len()];
    for (&task, &ev) in assignment {
        if task.0 >= s.tasks.len() {
            return Err(TraceError::UnknownTask(task));
        }
        if ev.0 >= s.evs.len() {
            return Err(TraceError::UnknownEv(ev));
        }
        per_ev[ev.0].push(task);
    }

    let mut sch = Schedule {
        lambda: vec![false; s.tasks.len()],
        assignment: assignment.clone(),
        eps: BTreeSet::new(),
        prk: BTreeSet::new(),
        bch: Vec::with_capacity(s.evs.len()),
        energy_trace: Vec::with_capacity(s.evs.len()),
    };
    for &task in assignment.keys() {
        sch.lambda[task.0] = true;
    }

    for (ev, tasks) in s.evs.iter().zip(per_ev.iter_mut()) {
        tasks.sort_by_key(|&r| (s.task(r).start, r));
        let mut bch = vec![0.0; horizon];
        let mut trace = vec![0.0; horizon];
        let mut energy = ev.start_energy;
        let mut location = ev.start_location;
        let mut t = 0;
        let mut previous: Option<TaskId> = None;

        for &r in tasks.iter() {
            let task = s.task(r);
            if task.start == 0 {
                return Err(TraceError::StartsAtZero(r));
            }
            if task.end() >= horizon {
                return Err(TraceError::PastHorizon(r));
            }
            // Parked at the origin one point before departure.
            if t > task.start - 1 {
                return Err(TraceError::Overlap {
                    ev: ev.id,
                    first: previous.unwrap_or(r),
                    second: r,
                });
            }
            if location != task.origin {
                return Err(TraceError::WrongOrigin {
                    ev: ev.id,
                    task: r,
                    at: location,
                    origin: task.origin,
                });
            }
            park(ev, task.start, &mut t, &mut energy, location, &mut trace, &mut bch, &mut sch.prk);
            for step in task.window() {
                trace[step] = energy;
                energy -= ev.consumption;
                if energy < 0.0 {
                    return Err(TraceError::OutOfEnergy { ev: ev.id, task: r });
                }
                sch.eps.insert((ev.id, r, step));
            }
            t = task.end();
            location = task.dest;
            previous = Some(r);
        }
        park(ev, horizon, &mut t, &mut energy, location, &mut trace, &mut bch, &mut sch.prk);
        sch.bch.push(bch);
        sch.energy_trace.push(trace);
    }
    Ok(sch)
}

#[allow(clippy::too_many_arguments)]
fn park(
    ev: &EvSpec,
    until: usize,
    t: &mut usize,
    energy: &mut f64,
    location: StationId,
    trace: &mut [f64],
    bch: &mut [f64],
    prk: &mut BTreeSet<(EvId, usize, StationId)>,
) {
    while *t < until {
        trace[*t] = *energy;
        let charged = ev.charged(*energy);
        bch[*t] = charged - *energy;
        *energy = charged;
        prk.insert((ev.id, *t, location));
        *t += 1;
    }
}
