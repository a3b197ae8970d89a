//! Customer-by-customer online assignment.
//!
//! Requests are handled in arrival order. For each one the scheduler keeps
//! the alternatives that have an idle, sufficiently charged EV at the origin
//! and room at the destination, scores them with a heuristic and commits the
//! lowest score. EVs charge at the maximum rate whenever parked.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Customer, CustomerId, EvId, Scenario, StationId, TaskId};
use crate::schedule::{simulate_trace, Assignment, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeuristicKind {
    /// Sum of squared station occupancies once the task is done.
    Square,
    /// Occupancy ratio of the destination on arrival.
    Destination,
    /// Uniform draw from a seeded stream.
    Random(u64),
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Square => "square",
            HeuristicKind::Destination => "destination",
            HeuristicKind::Random(_) => "random",
        }
    }
}

/// Per-EV bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct EvState {
    /// Station the EV is at, or heading to if it has a task in progress.
    pub location: StationId,
    /// Battery level at the beginning of `t_now`.
    pub energy: f64,
    /// Point at which the current commitment ends; idle from then on.
    pub busy_until: usize,
    pub pending: Option<TaskId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FleetState {
    pub t_now: usize,
    pub evs: Vec<EvState>,
    /// Projected parked count per station and time point, including every
    /// commitment made so far.
    pub occupancy: Vec<Vec<usize>>,
    pub committed: Vec<(CustomerId, TaskId, EvId)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub customer: CustomerId,
    pub accepted: bool,
    pub task: Option<TaskId>,
    pub ev: Option<EvId>,
    /// Score of every feasible alternative, in task order.
    pub scores: Vec<(TaskId, f64)>,
}

impl FleetState {
    pub fn new(s: &Scenario) -> Self {
        let mut occupancy = vec![vec![0; s.grid.num_points]; s.num_stations()];
        for (l, &n) in s.initial_counts().iter().enumerate() {
            occupancy[l].fill(n);
        }
        Self {
            t_now: 0,
            evs: s
                .evs
                .iter()
                .map(|ev| EvState {
                    location: ev.start_location,
                    energy: ev.start_energy,
                    busy_until: 0,
                    pending: None,
                })
                .collect(),
            occupancy,
            committed: Vec::new(),
        }
    }

    /// Stations' parked sets at `t_now`.
    pub fn parked(&self) -> Vec<Vec<EvId>> {
        let mut out = vec![Vec::new(); self.occupancy.len()];
        for (a, ev) in self.evs.iter().enumerate() {
            if self.is_idle(a) {
                out[ev.location.0].push(EvId(a));
            }
        }
        out
    }

    pub fn is_idle(&self, a: usize) -> bool {
        self.evs[a].busy_until <= self.t_now
    }

    /// Moves the clock to `to`: EVs lose `consumption` per point driven and
    /// gain `charge_rate` (capped) per point parked.
    pub fn advance_charging(&mut self, s: &Scenario, to: usize) {
        assert!(to >= self.t_now, "time cannot go backwards");
        for (ev, spec) in self.evs.iter_mut().zip(&s.evs) {
            let window = ev.pending.map(|r| s.task(r).window());
            for t in self.t_now..to {
                if window.as_ref().is_some_and(|w| w.contains(&t)) {
                    ev.energy -= spec.consumption;
                } else {
                    ev.energy = spec.charged(ev.energy);
                }
            }
            if ev.busy_until <= to {
                ev.pending = None;
            }
        }
        self.t_now = to;
    }

    /// Lowest-id EV that is idle at the task's origin with more energy than
    /// the task needs.
    fn candidate(&self, s: &Scenario, r: TaskId) -> Option<EvId> {
        let task = s.task(r);
        (0..self.evs.len())
            .find(|&a| {
                let ev = &self.evs[a];
                self.is_idle(a) && ev.location == task.origin && ev.energy > task.energy
            })
            .map(EvId)
    }

    /// True if the destination can take one more EV from the task's arrival
    /// to the end of the horizon.
    fn has_room(&self, s: &Scenario, r: TaskId) -> bool {
        let task = s.task(r);
        let cap = s.network.capacity(task.dest);
        self.occupancy[task.dest.0][task.end()..].iter().all(|&n| n < cap)
    }

    /// Alternatives that can be served now, each with the EV that would run it.
    pub fn feasible_tasks(&self, s: &Scenario, dem: &[TaskId]) -> Vec<(TaskId, EvId)> {
        let mut out: Vec<(TaskId, EvId)> = dem
            .iter()
            .filter(|&&r| s.task(r).start > self.t_now && self.has_room(s, r))
            .filter_map(|&r| self.candidate(s, r).map(|a| (r, a)))
            .collect();
        out.sort();
        out
    }

    fn commit(&mut self, s: &Scenario, customer: CustomerId, r: TaskId, a: EvId) {
        let task = s.task(r);
        for n in &mut self.occupancy[task.origin.0][task.start..] {
            *n -= 1;
        }
        for n in &mut self.occupancy[task.dest.0][task.end()..] {
            *n += 1;
        }
        let ev = &mut self.evs[a.0];
        ev.location = task.dest;
        ev.busy_until = task.end();
        ev.pending = Some(r);
        self.committed.push((customer, r, a));
    }

    pub fn assignment(&self) -> Assignment {
        self.committed.iter().map(|&(_, r, a)| (r, a)).collect()
    }
}

/// Heuristic with its random stream, if any.
pub struct Scorer {
    kind: HeuristicKind,
    rng: Option<ChaCha8Rng>,
}

impl Scorer {
    pub fn new(kind: HeuristicKind) -> Self {
        let rng = match kind {
            HeuristicKind::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { kind, rng }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    /// Score of running `r`; lower is better.
    pub fn score(&mut self, fs: &FleetState, s: &Scenario, r: TaskId) -> f64 {
        let task = s.task(r);
        let end = task.end();
        match self.kind {
            HeuristicKind::Square => fs
                .occupancy
                .iter()
                .enumerate()
                .map(|(l, occ)| {
                    let mut n = occ[end] as f64;
                    if l == task.origin.0 {
                        n -= 1.0;
                    }
                    if l == task.dest.0 {
                        n += 1.0;
                    }
                    n * n
                })
                .sum(),
            HeuristicKind::Destination => {
                fs.occupancy[task.dest.0][end] as f64 / s.network.capacity(task.dest) as f64
            }
            HeuristicKind::Random(_) => self
                .rng
                .as_mut()
                .expect("random scorer has a stream")
                .gen::<f64>(),
        }
    }
}

/// Decides one customer and commits the choice, if any.
pub fn handle_request(
    fs: &mut FleetState,
    s: &Scenario,
    customer: &Customer,
    scorer: &mut Scorer,
) -> Decision {
    let feasible = fs.feasible_tasks(s, &customer.alternatives);
    let scores: Vec<(TaskId, f64)> = feasible
        .iter()
        .map(|&(r, _)| (r, scorer.score(fs, s, r)))
        .collect();
    let best = feasible
        .iter()
        .zip(&scores)
        .min_by(|(a, (_, x)), (b, (_, y))| x.total_cmp(y).then(a.0.cmp(&b.0)))
        .map(|(&pair, _)| pair);
    if let Some((r, a)) = best {
        fs.commit(s, customer.id, r, a);
    }
    Decision {
        customer: customer.id,
        accepted: best.is_some(),
        task: best.map(|(r, _)| r),
        ev: best.map(|(_, a)| a),
        scores,
    }
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub schedule: Schedule,
    pub serviced: usize,
    pub wall_time: Duration,
    pub decisions: Vec<Decision>,
}

#[derive(Serialize)]
struct DecisionRecord<'a> {
    arrival: usize,
    feasible: usize,
    #[serde(flatten)]
    decision: &'a Decision,
}

/// Runs every customer through the scheduler in arrival order.
pub fn run_online(s: &Scenario, kind: HeuristicKind) -> OnlineRun {
    run_online_logged(s, kind, None).expect("no log sink, no i/o")
}

/// As [`run_online`], streaming one JSON line per decision to `log`.
pub fn run_online_logged(
    s: &Scenario,
    kind: HeuristicKind,
    mut log: Option<&mut dyn Write>,
) -> std::io::Result<OnlineRun> {
    let started = Instant::now();
    let mut order: Vec<&Customer> = s.customers.iter().collect();
    order.sort_by_key(|c| (c.arrival, c.id));
    let mut fs = FleetState::new(s);
    let mut scorer = Scorer::new(kind);
    let mut decisions = Vec::with_capacity(order.len());
    for customer in order {
        fs.advance_charging(s, customer.arrival.max(fs.t_now));
        let decision = handle_request(&mut fs, s, customer, &mut scorer);
        if let Some(out) = log.as_deref_mut() {
            let record = DecisionRecord {
                arrival: customer.arrival,
                feasible: decision.scores.len(),
                decision: &decision,
            };
            serde_json::to_writer(&mut *out, &record)?;
            out.write_all(b"\n")?;
        }
        decisions.push(decision);
    }
    let schedule = simulate_trace(s, &fs.assignment())
        .expect("online commitments always form a valid trace");
    Ok(OnlineRun {
        serviced: fs.committed.len(),
        schedule,
        wall_time: started.elapsed(),
        decisions,
    })
}
