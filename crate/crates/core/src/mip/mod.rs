//! Mixed-integer model of the offline assignment problem.
//!
//! [`build_model`] produces the complete model over the four decision
//! variable families (`lambda`, `eps`, `prk`, `bch`) plus the two auxiliary
//! variables per location-change term that linearize the absolute values in
//! the location-change count. The model can be written as LP text ([`lp`]) for
//! an external solver, or solved directly at small scale ([`solve`]).

pub mod lp;
pub mod solve;

use serde::{Deserialize, Serialize};

use crate::feasibility::Family;
use crate::model::Scenario;

pub use lp::{export_lp, parse_lp, write_lp, LpError};
pub use solve::{solve_model, ModelSolution, SolveLimits, SolveStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

/// Sparse linear expression; terms keep insertion order.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, var: usize, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Ge => lhs >= rhs - tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub family: Family,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization model.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MipModel {
    pub variables: Vec<Var>,
    pub objective: LinExpr,
    pub constraints: Vec<Row>,
}

impl MipModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn rows_of(&self, family: Family) -> impl Iterator<Item = &Row> {
        self.constraints.iter().filter(move |r| r.family == family)
    }

    pub fn count_rows(&self, family: Family) -> usize {
        self.rows_of(family).count()
    }

    fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Var {
            name,
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    fn add_row(&mut self, name: String, family: Family, expr: LinExpr, relation: Relation, rhs: f64) {
        debug_assert!(!expr.is_empty(), "empty row {name}");
        self.constraints.push(Row {
            name,
            family,
            expr,
            relation,
            rhs,
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    /// Include the redundant per-station balance rows.
    pub cuts: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { cuts: true }
    }
}

/// Variable layout of a built model.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub tasks: usize,
    pub evs: usize,
    pub points: usize,
    pub stations: usize,
}

impl Layout {
    pub fn of(s: &Scenario) -> Self {
        Self {
            tasks: s.tasks.len(),
            evs: s.evs.len(),
            points: s.grid.num_points,
            stations: s.num_stations(),
        }
    }

    pub fn lambda(&self, r: usize) -> usize {
        r
    }

    pub fn eps(&self, a: usize, r: usize, t: usize) -> usize {
        self.tasks + (a * self.tasks + r) * self.points + t
    }

    pub fn prk(&self, a: usize, t: usize, l: usize) -> usize {
        self.tasks + self.evs * self.tasks * self.points + (a * self.points + t) * self.stations + l
    }

    pub fn bch(&self, a: usize, t: usize) -> usize {
        self.tasks + self.evs * self.points * (self.tasks + self.stations) + a * self.points + t
    }

    fn aux_base(&self) -> usize {
        self.tasks + self.evs * self.points * (self.tasks + self.stations + 1)
    }

    /// Positive and negative parts of `prk[a][t+1][l] - prk[a][t][l]`.
    pub fn change(&self, a: usize, t: usize, l: usize) -> (usize, usize) {
        let k = (a * (self.points - 1) + t) * self.stations + l;
        (self.aux_base() + 2 * k, self.aux_base() + 2 * k + 1)
    }

    pub fn num_vars(&self) -> usize {
        self.aux_base() + 2 * self.evs * self.points.saturating_sub(1) * self.stations
    }
}

/// Builds the full assignment model of a (validated) scenario.
pub fn build_model(s: &Scenario, opts: &BuildOptions) -> MipModel {
    use Relation::*;
    let lay = Layout::of(s);
    let (n_r, n_a, n_t, n_l) = (lay.tasks, lay.evs, lay.points, lay.stations);
    let mut m = MipModel::default();

    for r in 0..n_r {
        m.add_var(format!("lambda[{r}]"), VarKind::Binary, 0.0, 1.0);
    }
    for a in 0..n_a {
        for r in 0..n_r {
            for t in 0..n_t {
                m.add_var(format!("eps[{a}][{r}][{t}]"), VarKind::Binary, 0.0, 1.0);
            }
        }
    }
    for a in 0..n_a {
        for t in 0..n_t {
            for l in 0..n_l {
                m.add_var(format!("prk[{a}][{t}][{l}]"), VarKind::Binary, 0.0, 1.0);
            }
        }
    }
    for (a, ev) in s.evs.iter().enumerate() {
        for t in 0..n_t {
            m.add_var(format!("bch[{a}][{t}]"), VarKind::Continuous, 0.0, ev.charge_rate);
        }
    }
    for a in 0..n_a {
        for t in 0..n_t.saturating_sub(1) {
            for l in 0..n_l {
                let inf = f64::INFINITY;
                m.add_var(format!("dpos[{a}][{t}][{l}]"), VarKind::Continuous, 0.0, inf);
                m.add_var(format!("dneg[{a}][{t}][{l}]"), VarKind::Continuous, 0.0, inf);
            }
        }
    }
    debug_assert_eq!(m.variables.len(), lay.num_vars());

    for r in 0..n_r {
        m.objective.add(lay.lambda(r), 1.0);
    }

    for task in &s.tasks {
        let r = task.id.0;
        let window = task.window();
        let mut inside = LinExpr::new();
        let mut outside = LinExpr::new();
        for a in 0..n_a {
            for t in 0..n_t {
                if window.contains(&t) {
                    inside.add(lay.eps(a, r, t), 1.0);
                } else {
                    outside.add(lay.eps(a, r, t), 1.0);
                }
            }
        }
        inside.add(lay.lambda(r), -(task.duration as f64));
        m.add_row(format!("Eq2_r{r}"), Family::Eq2, inside, Eq, 0.0);
        if !outside.is_empty() {
            m.add_row(format!("Eq3_r{r}"), Family::Eq3, outside, Eq, 0.0);
        }
        for a in 0..n_a {
            for t in task.start..task.end().saturating_sub(1) {
                let mut e = LinExpr::new();
                e.add(lay.eps(a, r, t + 1), 1.0).add(lay.eps(a, r, t), -1.0);
                m.add_row(format!("Eq4_a{a}_r{r}_t{t}"), Family::Eq4, e, Eq, 0.0);
            }
        }
    }

    for (a, ev) in s.evs.iter().enumerate() {
        for t in 0..n_t {
            let mut e = LinExpr::new();
            e.add(lay.bch(a, t), 1.0);
            for l in 0..n_l {
                e.add(lay.prk(a, t, l), -ev.charge_rate);
            }
            m.add_row(format!("Eq5_a{a}_t{t}"), Family::Eq5, e, Le, 0.0);
        }
        // Cumulative battery level after point t. Driving terms before a
        // task's start or after its end are fixed at zero by Eq3 and omitted.
        for t in 0..n_t {
            let mut e = LinExpr::new();
            for t2 in 0..=t {
                e.add(lay.bch(a, t2), 1.0);
            }
            for task in s.tasks.iter().filter(|task| task.start <= t) {
                for t2 in task.start..=t.min(task.end() - 1) {
                    e.add(lay.eps(a, task.id.0, t2), -ev.consumption);
                }
            }
            m.add_row(
                format!("Eq6lo_a{a}_t{t}"),
                Family::Eq6,
                e.clone(),
                Ge,
                -ev.start_energy,
            );
            m.add_row(
                format!("Eq6hi_a{a}_t{t}"),
                Family::Eq6,
                e,
                Le,
                ev.max_energy - ev.start_energy,
            );
        }
    }

    for customer in &s.customers {
        let mut e = LinExpr::new();
        for r in &customer.alternatives {
            e.add(lay.lambda(r.0), 1.0);
        }
        m.add_row(format!("Eq7_c{}", customer.id.0), Family::Eq7, e, Le, 1.0);
    }

    for a in 0..n_a {
        // Parked somewhere or driving; tasks whose window misses t are fixed
        // at zero by Eq3 and omitted.
        for t in 0..n_t {
            let mut e = LinExpr::new();
            for l in 0..n_l {
                e.add(lay.prk(a, t, l), 1.0);
            }
            for task in s.tasks.iter().filter(|task| task.window().contains(&t)) {
                e.add(lay.eps(a, task.id.0, t), 1.0);
            }
            m.add_row(format!("Eq8_a{a}_t{t}"), Family::Eq8, e, Eq, 1.0);
        }

        let mut count = LinExpr::new();
        for task in &s.tasks {
            count.add(lay.eps(a, task.id.0, task.start), 2.0);
        }
        for t in 0..n_t.saturating_sub(1) {
            for l in 0..n_l {
                let (pos, neg) = lay.change(a, t, l);
                count.add(pos, -1.0).add(neg, -1.0);
                let mut up = LinExpr::new();
                up.add(pos, 1.0)
                    .add(lay.prk(a, t + 1, l), -1.0)
                    .add(lay.prk(a, t, l), 1.0);
                m.add_row(format!("Eq9pos_a{a}_t{t}_l{l}"), Family::Eq9, up, Ge, 0.0);
                let mut down = LinExpr::new();
                down.add(neg, 1.0)
                    .add(lay.prk(a, t + 1, l), 1.0)
                    .add(lay.prk(a, t, l), -1.0);
                m.add_row(format!("Eq9neg_a{a}_t{t}_l{l}"), Family::Eq9, down, Ge, 0.0);
            }
        }
        if !count.is_empty() {
            m.add_row(format!("Eq9_a{a}"), Family::Eq9, count, Eq, 0.0);
        }
    }

    for task in &s.tasks {
        let r = task.id.0;
        for a in 0..n_a {
            let mut before = LinExpr::new();
            before
                .add(lay.prk(a, task.start - 1, task.origin.0), 1.0)
                .add(lay.eps(a, r, task.start), -1.0);
            m.add_row(format!("Eq10_r{r}_a{a}"), Family::Eq10, before, Ge, 0.0);
            // The work indicator is zero at the end point itself, so arrival
            // is tied to the start indicator.
            let mut after = LinExpr::new();
            after
                .add(lay.prk(a, task.end(), task.dest.0), 1.0)
                .add(lay.eps(a, r, task.start), -1.0);
            m.add_row(format!("Eq11_r{r}_a{a}"), Family::Eq11, after, Ge, 0.0);
        }
    }

    if n_a > 0 {
        for t in 0..n_t {
            for (l, station) in s.network.stations.iter().enumerate() {
                let mut e = LinExpr::new();
                for a in 0..n_a {
                    e.add(lay.prk(a, t, l), 1.0);
                }
                m.add_row(
                    format!("Eq12_t{t}_l{l}"),
                    Family::Eq12,
                    e,
                    Le,
                    station.capacity as f64,
                );
            }
        }
    }

    for (a, ev) in s.evs.iter().enumerate() {
        for l in 0..n_l {
            let mut e = LinExpr::new();
            e.add(lay.prk(a, 0, l), 1.0);
            let at_start = if ev.start_location.0 == l { 1.0 } else { 0.0 };
            m.add_row(format!("Eq13_a{a}_l{l}"), Family::Eq13, e, Eq, at_start);
        }
    }

    for a in 0..n_a {
        for r in 0..n_r {
            let mut e = LinExpr::new();
            e.add(lay.eps(a, r, 0), 1.0);
            m.add_row(format!("Eq14_a{a}_r{r}"), Family::Eq14, e, Eq, 0.0);
        }
    }

    if opts.cuts && n_a > 0 {
        for t in 1..n_t {
            for l in 0..n_l {
                let mut e = LinExpr::new();
                for a in 0..n_a {
                    e.add(lay.prk(a, t, l), 1.0);
                }
                for a in 0..n_a {
                    e.add(lay.prk(a, t - 1, l), -1.0);
                }
                for task in &s.tasks {
                    if task.origin.0 == l && task.start == t {
                        e.add(lay.lambda(task.id.0), 1.0);
                    }
                    if task.dest.0 == l && task.end() == t {
                        e.add(lay.lambda(task.id.0), -1.0);
                    }
                }
                m.add_row(format!("Eq15_t{t}_l{l}"), Family::Eq15, e, Eq, 0.0);
            }
        }
    }

    m
}

/// Reads a schedule-shaped value vector out of a solved model.
pub fn assignment_from_values(
    s: &Scenario,
    values: &[f64],
) -> crate::schedule::Assignment {
    let lay = Layout::of(s);
    let mut out = crate::schedule::Assignment::new();
    for task in &s.tasks {
        if values[lay.lambda(task.id.0)] > 0.5 {
            for ev in &s.evs {
                if values[lay.eps(ev.id.0, task.id.0, task.start)] > 0.5 {
                    out.insert(task.id, ev.id);
                }
            }
        }
    }
    out
}
