//! Fleet scheduling for mobility-on-demand schemes operated with electric
//! vehicles.
//!
//! * [`model`] holds the problem instance types and [`schedule`] the decision
//!   variables, with [`feasibility`] as an independent constraint checker.
//! * [`mip`] builds the mixed-integer model, reads and writes it as LP text
//!   and can solve small models directly.
//! * [`exact`] computes optimal offline assignments; [`online`] assigns
//!   customers one by one as their requests arrive.
//! * [`scenario_gen`] produces random instances and [`experiment`] runs the
//!   service-quality and runtime sweeps.

pub mod exact;
pub mod experiment;
pub mod feasibility;
pub mod mip;
pub mod model;
pub mod online;
pub mod scenario_gen;
pub mod schedule;

pub use feasibility::{check_feasibility, FeasibilityReport, Family, Violation};
pub use model::{
    validate_scenario, Customer, CustomerId, EvId, EvSpec, Network, Scenario, ScenarioIssue,
    Station, StationId, Task, TaskId, TimeGrid, Trip, TripMatrix,
};
pub use schedule::{objective, simulate_trace, Assignment, Schedule, TraceError};
