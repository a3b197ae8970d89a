//! Domain types for a mobility-on-demand scheme operated with electric vehicles.
//!
//! A [`Scenario`] is an immutable problem instance: the station network, the
//! discrete time grid, the EV fleet and the customers with their alternative
//! tasks. Energy is measured in battery percentage points throughout, so every
//! EV has a maximum of [`MAX_ENERGY`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Battery capacity of every EV, in percentage points.
pub const MAX_ENERGY: f64 = 100.0;

/// Version tag written into every scenario file.
pub const SCENARIO_FORMAT: u32 = 1;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Index of a station in [`Network::stations`].
    StationId,
    "station "
);
id_type!(
    /// Index of a task in [`Scenario::tasks`].
    TaskId,
    "task "
);
id_type!(
    /// Index of an EV in [`Scenario::evs`].
    EvId,
    "ev "
);
id_type!(
    /// Index of a customer in [`Scenario::customers`].
    CustomerId,
    "customer "
);

/// Discrete time axis shared by every agent. Point 0 is reserved for the
/// initial placement of the fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub num_points: usize,
    pub minutes_per_point: u32,
}

impl TimeGrid {
    pub fn points(&self) -> std::ops::Range<usize> {
        0..self.num_points
    }

    /// Last time point a task may end on.
    pub fn last_point(&self) -> usize {
        self.num_points.saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coords {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub name: String,
    /// Maximum number of EVs parked at the same time. Every spot has a charger.
    pub capacity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Coords>,
}

/// Travel cost between an ordered pair of stations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    /// Time points spent driving.
    pub duration: usize,
    /// Battery percentage points consumed.
    pub energy: f64,
}

/// Dense trip matrix over ordered station pairs. Missing entries mean the pair
/// cannot be travelled (the diagonal, or pairs dropped as too close).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TripMatrix {
    size: usize,
    cells: Vec<Option<Trip>>,
}

impl TripMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            cells: vec![None; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: StationId, to: StationId) -> Option<Trip> {
        if from.0 >= self.size || to.0 >= self.size {
            return None;
        }
        self.cells[from.0 * self.size + to.0]
    }

    pub fn set(&mut self, from: StationId, to: StationId, trip: Option<Trip>) {
        assert!(from.0 < self.size && to.0 < self.size, "trip outside matrix");
        self.cells[from.0 * self.size + to.0] = trip;
    }

    /// Present pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (StationId, StationId, Trip)> + '_ {
        self.cells.iter().enumerate().filter_map(move |(k, cell)| {
            cell.map(|trip| (StationId(k / self.size), StationId(k % self.size), trip))
        })
    }

    pub fn len(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Network {
    pub stations: Vec<Station>,
    pub trips: TripMatrix,
}

impl Network {
    pub fn num_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn capacity(&self, station: StationId) -> usize {
        self.stations[station.0].capacity
    }
}

/// One candidate trip: leave `origin` at `start`, drive for `duration`
/// points and arrive at `dest` at `start + duration`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub origin: StationId,
    pub dest: StationId,
    pub start: usize,
    pub duration: usize,
    pub energy: f64,
    pub customer: CustomerId,
}

impl Task {
    /// Time point at which the EV is parked again, at `dest`.
    pub fn end(&self) -> usize {
        self.start + self.duration
    }

    /// Driving window `[start, end)`.
    pub fn window(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: CustomerId,
    /// Alternative tasks; at most one of them may be executed.
    pub alternatives: Vec<TaskId>,
    /// Time point at which the request becomes known to an online scheduler.
    pub arrival: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub id: EvId,
    pub start_location: StationId,
    pub start_energy: f64,
    pub max_energy: f64,
    /// Percentage points consumed per driving time point.
    pub consumption: f64,
    /// Maximum percentage points gained per parked time point.
    pub charge_rate: f64,
}

impl EvSpec {
    /// Longest drive, in time points, a full battery allows.
    pub fn max_travel_time(&self) -> usize {
        (self.max_energy / self.consumption).floor() as usize
    }

    /// Energy after one parked point at the maximum charging rate.
    #[inline]
    pub fn charged(&self, energy: f64) -> f64 {
        (energy + self.charge_rate).min(self.max_energy)
    }
}

/// Immutable problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScenarioFile", try_from = "ScenarioFile")]
pub struct Scenario {
    pub grid: TimeGrid,
    pub network: Network,
    pub evs: Vec<EvSpec>,
    pub customers: Vec<Customer>,
    pub tasks: Vec<Task>,
    pub seed: u64,
}

impl Scenario {
    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0]
    }

    pub fn ev(&self, id: EvId) -> &EvSpec {
        &self.evs[id.0]
    }

    pub fn customer(&self, id: CustomerId) -> &Customer {
        &self.customers[id.0]
    }

    pub fn num_stations(&self) -> usize {
        self.network.num_stations()
    }

    /// Initial number of EVs per station.
    pub fn initial_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_stations()];
        for ev in &self.evs {
            if let Some(c) = counts.get_mut(ev.start_location.0) {
                *c += 1;
            }
        }
        counts
    }

    /// Consumption rate shared by the fleet, if there is a fleet.
    pub fn fleet_consumption(&self) -> Option<f64> {
        self.evs.first().map(|ev| ev.consumption)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Returns a copy with one more EV, fully charged, at `station`.
    pub fn with_extra_ev(&self, station: StationId) -> Scenario {
        let mut out = self.clone();
        let template = self.evs.first().cloned().unwrap_or(EvSpec {
            id: EvId(0),
            start_location: station,
            start_energy: MAX_ENERGY,
            max_energy: MAX_ENERGY,
            consumption: 10.0,
            charge_rate: 25.0,
        });
        out.evs.push(EvSpec {
            id: EvId(self.evs.len()),
            start_location: station,
            start_energy: template.max_energy,
            ..template
        });
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TripEntry {
    from: StationId,
    to: StationId,
    duration: usize,
    energy: f64,
}

/// On-disk layout of a scenario.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    format: u32,
    grid: TimeGrid,
    stations: Vec<Station>,
    trips: Vec<TripEntry>,
    evs: Vec<EvSpec>,
    customers: Vec<Customer>,
    tasks: Vec<Task>,
    seed: u64,
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        let trips = s
            .network
            .trips
            .iter()
            .map(|(from, to, trip)| TripEntry {
                from,
                to,
                duration: trip.duration,
                energy: trip.energy,
            })
            .collect();
        ScenarioFile {
            format: SCENARIO_FORMAT,
            grid: s.grid,
            stations: s.network.stations,
            trips,
            evs: s.evs,
            customers: s.customers,
            tasks: s.tasks,
            seed: s.seed,
        }
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = String;

    fn try_from(file: ScenarioFile) -> Result<Self, Self::Error> {
        if file.format != SCENARIO_FORMAT {
            return Err(format!(
                "unsupported scenario format {} (expected {SCENARIO_FORMAT})",
                file.format
            ));
        }
        let mut trips = TripMatrix::new(file.stations.len());
        for entry in file.trips {
            if entry.from.0 >= trips.size() || entry.to.0 >= trips.size() {
                return Err(format!(
                    "trip {} -> {} references a missing station",
                    entry.from, entry.to
                ));
            }
            trips.set(
                entry.from,
                entry.to,
                Some(Trip {
                    duration: entry.duration,
                    energy: entry.energy,
                }),
            );
        }
        Ok(Scenario {
            grid: file.grid,
            network: Network {
                stations: file.stations,
                trips,
            },
            evs: file.evs,
            customers: file.customers,
            tasks: file.tasks,
            seed: file.seed,
        })
    }
}

/// A broken structural invariant of a [`Scenario`].
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioIssue {
    #[error("time grid needs at least 2 points, has {0}")]
    GridTooShort(usize),
    #[error("minutes per time point must be positive")]
    ZeroMinutesPerPoint,
    #[error("{0} is stored at position {1}")]
    StationIdMismatch(StationId, usize),
    #[error("{0} has zero capacity")]
    ZeroCapacity(StationId),
    #[error("trip matrix is {found}x{found}, network has {expected} stations")]
    TripMatrixShape { expected: usize, found: usize },
    #[error("trip {0} -> {0} lies on the diagonal")]
    TripOnDiagonal(StationId),
    #[error("trip {0} -> {1} has zero duration")]
    TripZeroDuration(StationId, StationId),
    #[error("trip {from} -> {to} needs energy {found}, expected duration x consumption = {expected}")]
    TripEnergyMismatch {
        from: StationId,
        to: StationId,
        expected: f64,
        found: f64,
    },
    #[error("{0} is stored at position {1}")]
    TaskIdMismatch(TaskId, usize),
    #[error("{0} references an unknown station")]
    TaskUnknownStation(TaskId),
    #[error("{0} starts and ends at the same station")]
    TaskLoop(TaskId),
    #[error("{0} starts at time point 0")]
    TaskStartsAtZero(TaskId),
    #[error("{task} ends at {end}, after the last usable point {last}")]
    TaskPastHorizon { task: TaskId, end: usize, last: usize },
    #[error("{0} needs more than a full battery")]
    TaskEnergyTooHigh(TaskId),
    #[error("{0} has no trip in the network")]
    TaskNoTrip(TaskId),
    #[error("{0} disagrees with the trip matrix on duration or energy")]
    TaskTripMismatch(TaskId),
    #[error("{task} is listed by {owners} customers")]
    TaskOwnership { task: TaskId, owners: usize },
    #[error("{task} names {named} as owner but is listed by another customer")]
    TaskOwnerMismatch { task: TaskId, named: CustomerId },
    #[error("{0} is stored at position {1}")]
    CustomerIdMismatch(CustomerId, usize),
    #[error("{0} has no alternatives")]
    CustomerNoAlternatives(CustomerId),
    #[error("{0} references an unknown task")]
    CustomerUnknownTask(CustomerId),
    #[error("{customer} arrives at {arrival}, after its earliest alternative must be assigned ({latest})")]
    CustomerArrivalTooLate {
        customer: CustomerId,
        arrival: usize,
        latest: usize,
    },
    #[error("{0} is stored at position {1}")]
    EvIdMismatch(EvId, usize),
    #[error("{0} starts at an unknown station")]
    EvUnknownStation(EvId),
    #[error("{0} has start energy outside [0, max]")]
    EvEnergyOutOfRange(EvId),
    #[error("{0} must have a max energy of 100")]
    EvMaxEnergy(EvId),
    #[error("{0} needs positive consumption and charge rates")]
    EvNonPositiveRates(EvId),
    #[error("{0} differs from the rest of the fleet")]
    HeterogeneousFleet(EvId),
    #[error("{station} starts with {count} EVs, capacity {capacity}")]
    InitialOverCapacity {
        station: StationId,
        count: usize,
        capacity: usize,
    },
}

/// Checks every structural invariant; an empty list means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<ScenarioIssue> {
    use ScenarioIssue::*;
    let mut issues = Vec::new();
    let n_st = s.num_stations();

    if s.grid.num_points < 2 {
        issues.push(GridTooShort(s.grid.num_points));
    }
    if s.grid.minutes_per_point == 0 {
        issues.push(ZeroMinutesPerPoint);
    }

    for (k, st) in s.network.stations.iter().enumerate() {
        if st.id.0 != k {
            issues.push(StationIdMismatch(st.id, k));
        }
        if st.capacity == 0 {
            issues.push(ZeroCapacity(st.id));
        }
    }

    let consumption = s.fleet_consumption();
    if s.network.trips.size() != n_st {
        issues.push(TripMatrixShape {
            expected: n_st,
            found: s.network.trips.size(),
        });
    } else {
        for (from, to, trip) in s.network.trips.iter() {
            if from == to {
                issues.push(TripOnDiagonal(from));
            }
            if trip.duration == 0 {
                issues.push(TripZeroDuration(from, to));
            }
            if let Some(con) = consumption {
                let expected = trip.duration as f64 * con;
                if trip.energy != expected {
                    issues.push(TripEnergyMismatch {
                        from,
                        to,
                        expected,
                        found: trip.energy,
                    });
                }
            }
        }
    }

    for (k, ev) in s.evs.iter().enumerate() {
        if ev.id.0 != k {
            issues.push(EvIdMismatch(ev.id, k));
        }
        if ev.start_location.0 >= n_st {
            issues.push(EvUnknownStation(ev.id));
        }
        if ev.max_energy != MAX_ENERGY {
            issues.push(EvMaxEnergy(ev.id));
        }
        if !(0.0..=ev.max_energy).contains(&ev.start_energy) {
            issues.push(EvEnergyOutOfRange(ev.id));
        }
        if !(ev.consumption > 0.0 && ev.charge_rate > 0.0) {
            issues.push(EvNonPositiveRates(ev.id));
        }
        let first = &s.evs[0];
        if ev.consumption != first.consumption
            || ev.charge_rate != first.charge_rate
            || ev.max_energy != first.max_energy
        {
            issues.push(HeterogeneousFleet(ev.id));
        }
    }
    for (k, count) in s.initial_counts().into_iter().enumerate() {
        let capacity = s.network.stations[k].capacity;
        if count > capacity {
            issues.push(InitialOverCapacity {
                station: StationId(k),
                count,
                capacity,
            });
        }
    }

    let last = s.grid.last_point();
    for (k, task) in s.tasks.iter().enumerate() {
        if task.id.0 != k {
            issues.push(TaskIdMismatch(task.id, k));
        }
        if task.origin.0 >= n_st || task.dest.0 >= n_st {
            issues.push(TaskUnknownStation(task.id));
            continue;
        }
        if task.origin == task.dest {
            issues.push(TaskLoop(task.id));
        }
        if task.start == 0 {
            issues.push(TaskStartsAtZero(task.id));
        }
        if task.end() > last {
            issues.push(TaskPastHorizon {
                task: task.id,
                end: task.end(),
                last,
            });
        }
        if task.energy > MAX_ENERGY {
            issues.push(TaskEnergyTooHigh(task.id));
        }
        if task.origin != task.dest {
            match s.network.trips.get(task.origin, task.dest) {
                None => issues.push(TaskNoTrip(task.id)),
                Some(trip) => {
                    if trip.duration != task.duration || trip.energy != task.energy {
                        issues.push(TaskTripMismatch(task.id));
                    }
                }
            }
        }
    }

    let mut owners = vec![Vec::new(); s.tasks.len()];
    for (k, customer) in s.customers.iter().enumerate() {
        if customer.id.0 != k {
            issues.push(CustomerIdMismatch(customer.id, k));
        }
        if customer.alternatives.is_empty() {
            issues.push(CustomerNoAlternatives(customer.id));
            continue;
        }
        if customer.alternatives.iter().any(|r| r.0 >= s.tasks.len()) {
            issues.push(CustomerUnknownTask(customer.id));
            continue;
        }
        for r in &customer.alternatives {
            owners[r.0].push(customer.id);
        }
        let earliest = customer
            .alternatives
            .iter()
            .map(|r| s.tasks[r.0].start)
            .min()
            .unwrap_or(0);
        let latest = earliest.saturating_sub(1);
        if customer.arrival > latest {
            issues.push(CustomerArrivalTooLate {
                customer: customer.id,
                arrival: customer.arrival,
                latest,
            });
        }
    }
    for (k, listed) in owners.iter().enumerate() {
        let task = TaskId(k);
        if listed.len() != 1 {
            issues.push(TaskOwnership {
                task,
                owners: listed.len(),
            });
        } else if s.tasks[k].customer != listed[0] {
            issues.push(TaskOwnerMismatch {
                task,
                named: s.tasks[k].customer,
            });
        }
    }

    issues
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two stations A=0 and B=1, `num_points` points, fleet rates con=10, ch=25.
    pub fn two_station_scenario(num_points: usize, evs: &[(usize, f64)]) -> Scenario {
        let stations = (0..2)
            .map(|k| Station {
                id: StationId(k),
                name: ["A", "B"][k].to_string(),
                capacity: 10,
                coords: None,
            })
            .collect();
        let mut trips = TripMatrix::new(2);
        let trip = Some(Trip {
            duration: 2,
            energy: 20.0,
        });
        trips.set(StationId(0), StationId(1), trip);
        trips.set(StationId(1), StationId(0), trip);
        Scenario {
            grid: TimeGrid {
                num_points,
                minutes_per_point: 15,
            },
            network: Network { stations, trips },
            evs: evs
                .iter()
                .enumerate()
                .map(|(k, &(loc, energy))| EvSpec {
                    id: EvId(k),
                    start_location: StationId(loc),
                    start_energy: energy,
                    max_energy: MAX_ENERGY,
                    consumption: 10.0,
                    charge_rate: 25.0,
                })
                .collect(),
            customers: Vec::new(),
            tasks: Vec::new(),
            seed: 0,
        }
    }

    /// Adds a customer with one alternative per `(origin, start)`; trips use the
    /// two-station matrix (duration 2, energy 20).
    pub fn add_customer(s: &mut Scenario, alternatives: &[(usize, usize)], arrival: usize) {
        let customer = CustomerId(s.customers.len());
        let mut ids = Vec::new();
        for &(origin, start) in alternatives {
            let id = TaskId(s.tasks.len());
            s.tasks.push(Task {
                id,
                origin: StationId(origin),
                dest: StationId(1 - origin),
                start,
                duration: 2,
                energy: 20.0,
                customer,
            });
            ids.push(id);
        }
        s.customers.push(Customer {
            id: customer,
            alternatives: ids,
            arrival,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn fixture_is_valid() {
        let mut s = two_station_scenario(6, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        assert_eq!(validate_scenario(&s), vec![]);
    }

    #[test]
    fn loop_task_is_reported() {
        let mut s = two_station_scenario(6, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 1)], 0);
        s.tasks[0].dest = StationId(0);
        let issues = validate_scenario(&s);
        assert!(issues.contains(&ScenarioIssue::TaskLoop(TaskId(0))), "{issues:?}");
        // The diagonal has no trip either.
        assert!(issues.iter().all(|i| matches!(
            i,
            ScenarioIssue::TaskLoop(_)
        )));
    }

    #[test]
    fn over_capacity_start_is_reported() {
        let evs = vec![(0usize, 100.0); 11];
        let s = two_station_scenario(6, &evs);
        assert_eq!(
            validate_scenario(&s),
            vec![ScenarioIssue::InitialOverCapacity {
                station: StationId(0),
                count: 11,
                capacity: 10
            }]
        );
    }

    #[test]
    fn horizon_and_start_rules() {
        let mut s = two_station_scenario(4, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 0), (1, 2)], 0);
        let issues = validate_scenario(&s);
        assert!(issues.contains(&ScenarioIssue::TaskStartsAtZero(TaskId(0))));
        assert!(issues.contains(&ScenarioIssue::TaskPastHorizon {
            task: TaskId(1),
            end: 4,
            last: 3
        }));
    }

    #[test]
    fn late_arrival_is_reported() {
        let mut s = two_station_scenario(8, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 3)], 3);
        assert_eq!(
            validate_scenario(&s),
            vec![ScenarioIssue::CustomerArrivalTooLate {
                customer: CustomerId(0),
                arrival: 3,
                latest: 2
            }]
        );
    }

    #[test]
    fn shared_task_is_reported() {
        let mut s = two_station_scenario(8, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 3)], 0);
        add_customer(&mut s, &[(1, 3)], 0);
        s.customers[1].alternatives.push(TaskId(0));
        let issues = validate_scenario(&s);
        assert!(issues.contains(&ScenarioIssue::TaskOwnership {
            task: TaskId(0),
            owners: 2
        }));
    }

    #[test]
    fn energy_must_follow_duration() {
        let mut s = two_station_scenario(8, &[(0, 100.0)]);
        add_customer(&mut s, &[(0, 3)], 0);
        s.tasks[0].energy = 15.0;
        assert_eq!(
            validate_scenario(&s),
            vec![ScenarioIssue::TaskTripMismatch(TaskId(0))]
        );
    }

    #[test]
    fn json_round_trip() {
        let mut s = two_station_scenario(8, &[(0, 100.0), (1, 60.0)]);
        add_customer(&mut s, &[(0, 3), (1, 4)], 1);
        let text = s.to_json();
        assert!(text.contains("\"format\": 1"));
        assert_eq!(Scenario::from_json(&text).unwrap(), s);
    }

    #[test]
    fn unknown_format_is_rejected() {
        let s = two_station_scenario(4, &[(0, 100.0)]);
        let text = s.to_json().replace("\"format\": 1", "\"format\": 7");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn max_travel_time_rounds_down() {
        let s = two_station_scenario(4, &[(0, 100.0)]);
        let mut ev = s.evs[0].clone();
        assert_eq!(ev.max_travel_time(), 10);
        ev.consumption = 30.0;
        assert_eq!(ev.max_travel_time(), 3);
    }
}
