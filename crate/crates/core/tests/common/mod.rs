//! Shared fixtures for the integration suites.

#![allow(dead_code)]

pub mod props;

use modfleet::model::{
    Customer, CustomerId, EvId, EvSpec, Network, Scenario, Station, StationId, Task, TaskId,
    TimeGrid, Trip, TripMatrix,
};
use modfleet::validate_scenario;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a small random instance.
#[derive(Clone, Copy, Debug)]
pub struct SmallSpec {
    pub max_evs: usize,
    pub max_customers: usize,
    pub max_points: usize,
    pub max_stations: usize,
    /// Allow partial start energies, slow charging and longer trips, so that
    /// the battery can actually limit what an EV does.
    pub tight_energy: bool,
}

impl SmallSpec {
    pub const ORACLE: SmallSpec = SmallSpec {
        max_evs: 3,
        max_customers: 6,
        max_points: 10,
        max_stations: 4,
        tight_energy: false,
    };

    pub fn tight(self) -> Self {
        SmallSpec {
            tight_energy: true,
            ..self
        }
    }
}

/// Random valid scenario with at most the given sizes.
pub fn small_scenario(seed: u64, spec: SmallSpec) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_l = rng.gen_range(2..=spec.max_stations);
    let n_t = rng.gen_range(5..=spec.max_points);
    let n_a = rng.gen_range(1..=spec.max_evs);
    let n_c = rng.gen_range(0..=spec.max_customers);
    let consumption = 10.0;
    let charge_rate = if spec.tight_energy {
        *[5.0, 10.0, 25.0].choose(&mut rng).unwrap()
    } else {
        25.0
    };
    let max_duration = if spec.tight_energy { 3 } else { 2 };

    let mut capacities: Vec<usize> = (0..n_l).map(|_| rng.gen_range(1..=3)).collect();
    let mut counts = vec![0; n_l];
    let mut evs = Vec::new();
    for a in 0..n_a {
        let mut l = rng.gen_range(0..n_l);
        if counts[l] >= capacities[l] {
            match (0..n_l).find(|&m| counts[m] < capacities[m]) {
                Some(m) => l = m,
                None => capacities[l] += 1,
            }
        }
        counts[l] += 1;
        let start_energy = if spec.tight_energy {
            10.0 * rng.gen_range(0..=10) as f64
        } else {
            100.0
        };
        evs.push(EvSpec {
            id: EvId(a),
            start_location: StationId(l),
            start_energy,
            max_energy: 100.0,
            consumption,
            charge_rate,
        });
    }

    let stations = capacities
        .iter()
        .enumerate()
        .map(|(l, &capacity)| Station {
            id: StationId(l),
            name: format!("S{l}"),
            capacity,
            coords: None,
        })
        .collect();
    let mut trips = TripMatrix::new(n_l);
    let mut pairs = Vec::new();
    for from in 0..n_l {
        for to in 0..n_l {
            if from != to && rng.gen_bool(0.8) {
                let duration = rng.gen_range(1..=max_duration);
                let trip = Trip {
                    duration,
                    energy: duration as f64 * consumption,
                };
                trips.set(StationId(from), StationId(to), Some(trip));
                pairs.push((from, to, trip));
            }
        }
    }
    if pairs.is_empty() {
        let trip = Trip {
            duration: 1,
            energy: consumption,
        };
        trips.set(StationId(0), StationId(1), Some(trip));
        pairs.push((0, 1, trip));
    }

    let mut customers = Vec::new();
    let mut tasks = Vec::new();
    for c in 0..n_c {
        let k = rng.gen_range(1..=3);
        let mut ids = Vec::new();
        let mut earliest = usize::MAX;
        for _ in 0..k {
            let (from, to, trip) = *pairs.choose(&mut rng).unwrap();
            let start = rng.gen_range(1..=n_t - 1 - trip.duration);
            earliest = earliest.min(start);
            let id = TaskId(tasks.len());
            tasks.push(Task {
                id,
                origin: StationId(from),
                dest: StationId(to),
                start,
                duration: trip.duration,
                energy: trip.energy,
                customer: CustomerId(c),
            });
            ids.push(id);
        }
        customers.push(Customer {
            id: CustomerId(c),
            alternatives: ids,
            arrival: rng.gen_range(0..earliest),
        });
    }

    let s = Scenario {
        grid: TimeGrid {
            num_points: n_t,
            minutes_per_point: 15,
        },
        network: Network { stations, trips },
        evs,
        customers,
        tasks,
        seed,
    };
    let issues = validate_scenario(&s);
    assert!(issues.is_empty(), "seed {seed}: {issues:?}");
    s
}

/// Copy of `s` without customer `drop`, with ids renumbered densely.
pub fn without_customer(s: &Scenario, drop: usize) -> Scenario {
    let mut out = s.clone();
    out.customers.clear();
    out.tasks.clear();
    for c in s.customers.iter().filter(|c| c.id.0 != drop) {
        let id = CustomerId(out.customers.len());
        let mut ids = Vec::new();
        for &r in &c.alternatives {
            let mut task = s.task(r).clone();
            task.id = TaskId(out.tasks.len());
            task.customer = id;
            ids.push(task.id);
            out.tasks.push(task);
        }
        out.customers.push(Customer {
            id,
            alternatives: ids,
            arrival: c.arrival,
        });
    }
    out
}

/// Number of (EV, point, station) parking flips between consecutive points,
/// counted straight from the parking indicators.
pub fn location_changes(s: &Scenario, prk: &std::collections::BTreeSet<(EvId, usize, StationId)>) -> usize {
    let mut changes = 0;
    for a in 0..s.evs.len() {
        for t in 0..s.grid.num_points - 1 {
            for l in 0..s.num_stations() {
                let now = prk.contains(&(EvId(a), t, StationId(l)));
                let next = prk.contains(&(EvId(a), t + 1, StationId(l)));
                if now != next {
                    changes += 1;
                }
            }
        }
    }
    changes
}
