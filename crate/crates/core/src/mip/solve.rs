//! LP-based branch and bound over a [`MipModel`].
//!
//! Relaxations are solved with `minilp`; children reuse the parent's simplex
//! state through `fix_var`, so each node costs a few dual pivots.

use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};
use serde::{Deserialize, Serialize};

use super::{MipModel, Relation, VarKind};

const INT_TOL: f64 = 1e-6;

/// Work limits for a search. `None` means unlimited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub time_budget: Option<Duration>,
    pub node_budget: Option<u64>,
}

impl SolveLimits {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub(crate) fn deadline(&self, from: Instant) -> Option<Instant> {
        self.time_budget.map(|d| from + d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// A limit stopped the search; the result holds the best solution found.
    TimedOut,
}

#[derive(Clone, Debug)]
pub struct ModelSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Empty when no integer solution was found.
    pub values: Vec<f64>,
    pub nodes: u64,
}

/// Result of [`branch_and_bound`] on a prepared LP.
pub(crate) struct BnbOutcome {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub nodes: u64,
    pub root_bound: Option<f64>,
}

/// Depth-first branch and bound maximizing over a prepared relaxation.
///
/// `integers` lists the variables that must take integral values. With
/// `integral_objective` the bound is rounded down before comparing against
/// the incumbent.
pub(crate) fn branch_and_bound(
    problem: &Problem,
    vars: &[Variable],
    integers: &[usize],
    integral_objective: bool,
    limits: &SolveLimits,
) -> BnbOutcome {
    let started = Instant::now();
    let deadline = limits.deadline(started);
    let mut out = BnbOutcome {
        status: SolveStatus::Infeasible,
        objective: f64::NEG_INFINITY,
        values: Vec::new(),
        nodes: 0,
        root_bound: None,
    };
    let root = match problem.solve() {
        Ok(sol) => sol,
        Err(_) => return out,
    };
    out.root_bound = Some(root.objective());
    let mut stack: Vec<Solution> = vec![root];
    let mut stopped = false;

    while let Some(sol) = stack.pop() {
        out.nodes += 1;
        let bound = if integral_objective {
            (sol.objective() + INT_TOL).floor()
        } else {
            sol.objective()
        };
        if !out.values.is_empty() && bound <= out.objective + INT_TOL {
            continue;
        }
        let mut branch: Option<(usize, f64)> = None;
        let mut best_frac = INT_TOL;
        for &k in integers {
            let x = *sol.var_value(vars[k]);
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > best_frac {
                best_frac = frac;
                branch = Some((k, x));
            }
        }
        match branch {
            None => {
                out.objective = sol.objective();
                out.values = vars.iter().map(|&v| *sol.var_value(v)).collect();
                for &k in integers {
                    out.values[k] = out.values[k].round();
                }
            }
            Some((k, x)) => {
                // Down child first on the stack so the up child is explored first.
                if let Ok(child) = sol.clone().add_constraint(
                    [(vars[k], 1.0)],
                    ComparisonOp::Le,
                    x.floor(),
                ) {
                    stack.push(child);
                }
                if let Ok(child) = sol.add_constraint([(vars[k], 1.0)], ComparisonOp::Ge, x.ceil()) {
                    stack.push(child);
                }
            }
        }
        let over_nodes = limits.node_budget.is_some_and(|n| out.nodes >= n);
        let over_time = deadline.is_some_and(|d| Instant::now() >= d);
        if (over_nodes || over_time) && !stack.is_empty() {
            stopped = true;
            break;
        }
    }
    out.status = if stopped {
        SolveStatus::TimedOut
    } else if out.values.is_empty() {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Optimal
    };
    out
}

/// Solves a model to optimality (or until a limit is hit).
///
/// Intended for small models; the assignment model grows with EVs × tasks ×
/// time points.
pub fn solve_model(m: &MipModel, limits: &SolveLimits) -> ModelSolution {
    let mut objective = vec![0.0; m.variables.len()];
    for &(v, c) in &m.objective.terms {
        objective[v] += c;
    }
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = m
        .variables
        .iter()
        .zip(&objective)
        .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
        .collect();
    for row in &m.constraints {
        let op = match row.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        let terms: Vec<(Variable, f64)> = row.expr.terms.iter().map(|&(v, c)| (vars[v], c)).collect();
        problem.add_constraint(terms.as_slice(), op, row.rhs);
    }
    let integers: Vec<usize> = m
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind != VarKind::Continuous)
        .map(|(k, _)| k)
        .collect();
    let integral_objective = m.objective.terms.iter().all(|&(v, c)| {
        m.variables[v].kind != VarKind::Continuous && c.fract() == 0.0
    });
    let out = branch_and_bound(&problem, &vars, &integers, integral_objective, limits);
    ModelSolution {
        status: out.status,
        objective: if out.values.is_empty() { 0.0 } else { out.objective },
        values: out.values,
        nodes: out.nodes,
    }
}
