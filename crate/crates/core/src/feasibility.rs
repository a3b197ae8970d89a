//! Independent constraint checker.
//!
//! Every constraint family of the assignment model is evaluated as a plain
//! predicate on the arrays of a [`Schedule`]; no solver code is involved, so
//! the checker can audit the output of any algorithm in the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Scenario, StationId};
use crate::schedule::Schedule;

const TOL: f64 = 1e-9;

/// Constraint families of the assignment model. The names double as LP row
/// prefixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    /// An executed task is driven for exactly its duration inside its window.
    Eq2,
    /// No driving for a task outside its window.
    Eq3,
    /// Within the window, the same EV drives the task on every point.
    Eq4,
    /// Charging only while parked, at most at the charge rate.
    Eq5,
    /// Battery stays within `[0, 100]`.
    Eq6,
    /// At most one alternative per customer.
    Eq7,
    /// Every EV is either parked at exactly one station or driving.
    Eq8,
    /// Location changes happen only through tasks, two per task.
    Eq9,
    /// Parked at the origin one point before departure.
    Eq10,
    /// Parked at the destination when the task ends.
    Eq11,
    /// Station capacity.
    Eq12,
    /// Initial placement.
    Eq13,
    /// Nothing is driven at time point 0.
    Eq14,
    /// Per-station balance: parked counts change only by departures and arrivals.
    Eq15,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::Eq2,
        Family::Eq3,
        Family::Eq4,
        Family::Eq5,
        Family::Eq6,
        Family::Eq7,
        Family::Eq8,
        Family::Eq9,
        Family::Eq10,
        Family::Eq11,
        Family::Eq12,
        Family::Eq13,
        Family::Eq14,
        Family::Eq15,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Eq2 => "Eq2",
            Family::Eq3 => "Eq3",
            Family::Eq4 => "Eq4",
            Family::Eq5 => "Eq5",
            Family::Eq6 => "Eq6",
            Family::Eq7 => "Eq7",
            Family::Eq8 => "Eq8",
            Family::Eq9 => "Eq9",
            Family::Eq10 => "Eq10",
            Family::Eq11 => "Eq11",
            Family::Eq12 => "Eq12",
            Family::Eq13 => "Eq13",
            Family::Eq14 => "Eq14",
            Family::Eq15 => "Eq15",
        }
    }

    /// Family of an LP row name such as `Eq7_c0` or `Eq9pos_a0_t1_l2`.
    pub fn from_row_name(name: &str) -> Option<Family> {
        let digits: String = name
            .strip_prefix("Eq")?
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        Family::ALL
            .into_iter()
            .find(|f| f.as_str()[2..] == digits)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// `None` when the schedule arrays themselves are malformed.
    pub family: Option<Family>,
    pub indices: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Some(family) => write!(f, "[{family}] {:?}: {}", self.indices, self.detail),
            None => write!(f, "[shape] {:?}: {}", self.indices, self.detail),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn families(&self) -> Vec<Family> {
        let mut out: Vec<Family> = self.violations.iter().filter_map(|v| v.family).collect();
        out.sort();
        out.dedup();
        out
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, family: Family, indices: &[usize], detail: impl Into<String>) {
        self.0.push(Violation {
            family: Some(family),
            indices: indices.to_vec(),
            detail: detail.into(),
        });
    }

    fn shape(&mut self, indices: &[usize], detail: impl Into<String>) {
        self.0.push(Violation {
            family: None,
            indices: indices.to_vec(),
            detail: detail.into(),
        });
    }
}

/// Dense views of the sparse indicator sets.
struct Dense {
    /// `work[a][t]`: tasks EV `a` drives for during `t`.
    work: Vec<Vec<Vec<usize>>>,
    /// `parked[a][t]`: stations EV `a` is parked at during `t`.
    parked: Vec<Vec<Vec<usize>>>,
    /// `by_task[r]`: `(ev, t)` work entries of task `r`.
    by_task: Vec<Vec<(usize, usize)>>,
}

impl Dense {
    fn works(&self, a: usize, r: usize, t: usize) -> bool {
        self.work[a][t].contains(&r)
    }

    fn parks(&self, a: usize, t: usize, l: usize) -> bool {
        self.parked[a][t].contains(&l)
    }
}

pub fn check_feasibility(s: &Scenario, sch: &Schedule) -> FeasibilityReport {
    let mut rep = Report(Vec::new());
    let Some(dense) = check_shape(s, sch, &mut rep) else {
        return FeasibilityReport {
            ok: false,
            violations: rep.0,
        };
    };
    let horizon = s.grid.num_points;
    let n_st = s.num_stations();

    for task in &s.tasks {
        let r = task.id.0;
        let window = task.window();
        let on = sch.lambda[r];

        // Executed tasks, assignment and driving agree.
        let entries = &dense.by_task[r];
        let inside = entries.iter().filter(|(_, t)| window.contains(t)).count();
        let outside = entries.len() - inside;
        let mut drivers: Vec<usize> = entries.iter().map(|&(a, _)| a).collect();
        drivers.sort_unstable();
        drivers.dedup();
        let expected = if on { task.duration } else { 0 };
        if inside != expected {
            rep.push(
                Family::Eq2,
                &[r],
                format!("{} drives {inside} points in its window, expected {expected}", task.id),
            );
        }
        if on != sch.assignment.contains_key(&task.id) {
            rep.push(
                Family::Eq2,
                &[r],
                format!("{} executed flag disagrees with the assignment", task.id),
            );
        }
        if let Some(&ev) = sch.assignment.get(&task.id) {
            if !dense.works(ev.0, r, task.start) {
                rep.push(
                    Family::Eq2,
                    &[r, ev.0],
                    format!("{} is assigned to {ev} which does not drive it", task.id),
                );
            }
        }
        if outside > 0 {
            rep.push(
                Family::Eq3,
                &[r],
                format!("{} driven on {outside} points outside its window", task.id),
            );
        }
        for &a in &drivers {
            for t in task.start..task.end().saturating_sub(1) {
                if dense.works(a, r, t) != dense.works(a, r, t + 1) {
                    rep.push(
                        Family::Eq4,
                        &[a, r, t],
                        format!("{} is not driven contiguously by ev {a}", task.id),
                    );
                }
            }
            if dense.works(a, r, task.start) {
                let before = task.start - 1;
                if !dense.parks(a, before, task.origin.0) {
                    rep.push(
                        Family::Eq10,
                        &[r, a],
                        format!("ev {a} not parked at {} at {before}", task.origin),
                    );
                }
                if task.end() < horizon && !dense.parks(a, task.end(), task.dest.0) {
                    rep.push(
                        Family::Eq11,
                        &[r, a],
                        format!("ev {a} not parked at {} at {}", task.dest, task.end()),
                    );
                }
            }
        }
    }

    for ev in &s.evs {
        let a = ev.id.0;
        let mut level = ev.start_energy;
        if (sch.energy_trace[a][0] - ev.start_energy).abs() > TOL {
            rep.push(Family::Eq6, &[a, 0], "energy trace does not start at the initial level");
        }
        let mut changes = 0usize;
        for t in 0..horizon {
            let parked = dense.parked[a][t].len();
            let driving = dense.work[a][t].len();
            let charge = sch.bch[a][t];
            if charge < -TOL || charge > parked as f64 * ev.charge_rate + TOL {
                rep.push(
                    Family::Eq5,
                    &[a, t],
                    format!("ev {a} charges {charge} with {parked} parking entries"),
                );
            }
            if (sch.energy_trace[a][t] - level).abs() > TOL {
                rep.push(
                    Family::Eq6,
                    &[a, t],
                    format!("energy trace says {}, recursion gives {level}", sch.energy_trace[a][t]),
                );
            }
            level += charge - driving as f64 * ev.consumption;
            if level < -TOL || level > ev.max_energy + TOL {
                rep.push(
                    Family::Eq6,
                    &[a, t],
                    format!("ev {a} battery at {level} after point {t}"),
                );
            }
            if parked + driving != 1 {
                rep.push(
                    Family::Eq8,
                    &[a, t],
                    format!("ev {a} parked at {parked} stations and driving {driving} tasks"),
                );
            }
            if t + 1 < horizon {
                for l in 0..n_st {
                    if dense.parks(a, t, l) != dense.parks(a, t + 1, l) {
                        changes += 1;
                    }
                }
            }
        }
        let starts = s
            .tasks
            .iter()
            .filter(|task| dense.works(a, task.id.0, task.start))
            .count();
        if 2 * starts != changes {
            rep.push(
                Family::Eq9,
                &[a],
                format!("ev {a} changes location {changes} times for {starts} tasks"),
            );
        }
        for l in 0..n_st {
            let expected = l == ev.start_location.0;
            if dense.parks(a, 0, l) != expected {
                rep.push(
                    Family::Eq13,
                    &[a, l],
                    format!("ev {a} initial placement at station {l} is wrong"),
                );
            }
        }
        if !dense.work[a][0].is_empty() {
            rep.push(Family::Eq14, &[a], format!("ev {a} drives at time point 0"));
        }
    }

    for customer in &s.customers {
        let executed = customer
            .alternatives
            .iter()
            .filter(|r| sch.lambda[r.0])
            .count();
        if executed > 1 {
            rep.push(
                Family::Eq7,
                &[customer.id.0],
                format!("{} has {executed} executed alternatives", customer.id),
            );
        }
    }

    let mut counts = vec![vec![0usize; n_st]; horizon];
    for &(a, t, l) in &sch.prk {
        let _ = a;
        counts[t][l.0] += 1;
    }
    let mut balance = vec![vec![0i64; n_st]; horizon];
    for task in s.tasks.iter().filter(|task| sch.lambda[task.id.0]) {
        balance[task.start][task.origin.0] -= 1;
        if task.end() < horizon {
            balance[task.end()][task.dest.0] += 1;
        }
    }
    for t in 0..horizon {
        for l in 0..n_st {
            let capacity = s.network.capacity(StationId(l));
            if counts[t][l] > capacity {
                rep.push(
                    Family::Eq12,
                    &[t, l],
                    format!("station {l} holds {} EVs at {t}, capacity {capacity}", counts[t][l]),
                );
            }
            if t > 0 {
                let delta = counts[t][l] as i64 - counts[t - 1][l] as i64;
                if delta != balance[t][l] {
                    rep.push(
                        Family::Eq15,
                        &[t, l],
                        format!(
                            "station {l} changes by {delta} at {t}, tasks account for {}",
                            balance[t][l]
                        ),
                    );
                }
            }
        }
    }

    FeasibilityReport {
        ok: rep.0.is_empty(),
        violations: rep.0,
    }
}

fn check_shape(s: &Scenario, sch: &Schedule, rep: &mut Report) -> Option<Dense> {
    let horizon = s.grid.num_points;
    let n_ev = s.evs.len();
    let before = rep.0.len();
    if sch.lambda.len() != s.tasks.len() {
        rep.shape(&[sch.lambda.len()], "lambda length differs from the task count");
    }
    for (name, rows) in [("bch", &sch.bch), ("energy_trace", &sch.energy_trace)] {
        if rows.len() != n_ev || rows.iter().any(|row| row.len() != horizon) {
            rep.shape(&[rows.len()], format!("{name} is not EVs x time points"));
        }
    }
    for (&task, &ev) in &sch.assignment {
        if task.0 >= s.tasks.len() || ev.0 >= n_ev {
            rep.shape(&[task.0, ev.0], "assignment references an unknown task or EV");
        }
    }
    let mut dense = Dense {
        work: vec![vec![Vec::new(); horizon]; n_ev],
        parked: vec![vec![Vec::new(); horizon]; n_ev],
        by_task: vec![Vec::new(); s.tasks.len()],
    };
    for &(a, r, t) in &sch.eps {
        if a.0 >= n_ev || r.0 >= s.tasks.len() || t >= horizon {
            rep.shape(&[a.0, r.0, t], "work entry out of range");
        } else {
            dense.work[a.0][t].push(r.0);
            dense.by_task[r.0].push((a.0, t));
        }
    }
    for &(a, t, l) in &sch.prk {
        if a.0 >= n_ev || t >= horizon || l.0 >= s.num_stations() {
            rep.shape(&[a.0, t, l.0], "parking entry out of range");
        } else {
            dense.parked[a.0][t].push(l.0);
        }
    }
    (rep.0.len() == before).then_some(dense)
}
