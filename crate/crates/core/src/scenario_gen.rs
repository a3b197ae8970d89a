//! Random instances on a station network.
//!
//! By default the network is eight car-sharing locations in Washington DC;
//! travel times come from great-circle distance at a fixed average speed.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Coords, Customer, CustomerId, EvId, EvSpec, Network, Scenario, Station, StationId, Task,
    TaskId, TimeGrid, Trip, TripMatrix, MAX_ENERGY,
};

const EARTH_RADIUS_KM: f64 = 6371.0088;

const DC_STATIONS: [(&str, f64, f64); 8] = [
    ("Union Station", 38.8973, -77.0063),
    ("Dupont Circle", 38.9096, -77.0434),
    ("Georgetown", 38.9097, -77.0654),
    ("Navy Yard", 38.8764, -77.0030),
    ("Columbia Heights", 38.9284, -77.0325),
    ("Eastern Market", 38.8844, -76.9960),
    ("Silver Spring", 38.9940, -77.0261),
    ("Clarendon", 38.8868, -77.0953),
];

/// Box that extra random stations are drawn from.
const DC_BOX: ((f64, f64), (f64, f64)) = ((38.86, 38.99), (-77.10, -76.99));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub num_stations: usize,
    pub station_capacity: usize,
    pub num_time_points: usize,
    pub minutes_per_point: u32,
    pub num_evs: usize,
    pub num_customers: usize,
    pub max_alternatives: usize,
    pub consumption: f64,
    pub charge_rate: f64,
    pub avg_speed_kmh: f64,
    pub min_trip_duration: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_stations: 8,
            station_capacity: 10,
            num_time_points: 58,
            minutes_per_point: 15,
            num_evs: 15,
            num_customers: 70,
            max_alternatives: 3,
            consumption: 10.0,
            charge_rate: 25.0,
            avg_speed_kmh: 40.0,
            min_trip_duration: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("{evs} EVs do not fit into a total station capacity of {capacity}")]
    ConfigInfeasible { evs: usize, capacity: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no trip fits into {0} time points")]
    NoTrips(usize),
    #[error("station file line {line}: {msg}")]
    StationFile { line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: &str| Err(GenError::InvalidConfig(msg.to_string()));
        if self.num_stations < 2 {
            return bad("num_stations must be at least 2");
        }
        if self.station_capacity == 0 {
            return bad("station_capacity must be positive");
        }
        if self.num_time_points < 3 {
            return bad("num_time_points must be at least 3");
        }
        if self.minutes_per_point == 0 {
            return bad("minutes_per_point must be positive");
        }
        if self.max_alternatives == 0 {
            return bad("max_alternatives must be at least 1");
        }
        if !(self.consumption > 0.0 && self.charge_rate > 0.0 && self.avg_speed_kmh > 0.0) {
            return bad("consumption, charge_rate and avg_speed_kmh must be positive");
        }
        Ok(())
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: Coords, b: Coords) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Directed trips between all station pairs. Durations round up to whole
/// time points; pairs shorter than `min_duration` points (coincident
/// stations always are) or needing more than a full battery are left out.
pub fn build_trip_matrix(
    stations: &[Station],
    avg_speed_kmh: f64,
    minutes_per_point: u32,
    consumption: f64,
    min_duration: usize,
) -> TripMatrix {
    let km_per_point = avg_speed_kmh * minutes_per_point as f64 / 60.0;
    let mut trips = TripMatrix::new(stations.len());
    for a in stations {
        for b in stations {
            if a.id == b.id {
                continue;
            }
            let (Some(pa), Some(pb)) = (a.coords, b.coords) else {
                continue;
            };
            // Tolerance keeps exact multiples (10 km at 10 km per point) at one point.
            let duration = (haversine_km(pa, pb) / km_per_point - 1e-9).ceil().max(0.0) as usize;
            let energy = duration as f64 * consumption;
            if duration == 0 || duration < min_duration || energy > MAX_ENERGY {
                continue;
            }
            trips.set(a.id, b.id, Some(Trip { duration, energy }));
        }
    }
    trips
}

#[derive(Deserialize)]
struct StationRow {
    id: usize,
    name: String,
    lat: f64,
    lon: f64,
    capacity: usize,
}

/// Reads stations from CSV with header `id,name,lat,lon,capacity`. Ids must
/// be `0..n` in any order.
pub fn load_stations(path: impl AsRef<Path>) -> Result<Vec<Station>, GenError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    parse_stations(&text)
}

pub fn parse_stations(text: &str) -> Result<Vec<Station>, GenError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_err = |msg: String| GenError::StationFile { line: 1, msg };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["id", "name", "lat", "lon", "capacity"] {
        return Err(header_err("expected header id,name,lat,lon,capacity".into()));
    }
    let mut rows: Vec<(u64, StationRow)> = Vec::new();
    for record in reader.deserialize::<StationRow>() {
        let record = record.map_err(|e| GenError::StationFile {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rows.len() as u64 + 2;
        if record.capacity == 0 {
            return Err(GenError::StationFile {
                line,
                msg: format!("station {} must have a positive capacity", record.id),
            });
        }
        if !(-90.0..=90.0).contains(&record.lat) || !(-180.0..=180.0).contains(&record.lon) {
            return Err(GenError::StationFile {
                line,
                msg: format!("station {} has coordinates out of range", record.id),
            });
        }
        if let Some((first, _)) = rows.iter().find(|(_, r)| r.id == record.id) {
            return Err(GenError::StationFile {
                line,
                msg: format!("duplicate station id {} (first on line {first})", record.id),
            });
        }
        rows.push((line, record));
    }
    let n = rows.len();
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.id >= n) {
        return Err(GenError::StationFile {
            line: *line,
            msg: format!("station id {} outside 0..{n}", r.id),
        });
    }
    rows.sort_by_key(|(_, r)| r.id);
    Ok(rows
        .into_iter()
        .map(|(_, r)| Station {
            id: StationId(r.id),
            name: r.name,
            capacity: r.capacity,
            coords: Some(Coords { lat: r.lat, lon: r.lon }),
        })
        .collect())
}

/// Built-in network: the DC locations first, then random points in the same
/// area if more are requested.
pub fn default_stations(cfg: &GenConfig) -> Vec<Station> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5bd1_e995);
    (0..cfg.num_stations)
        .map(|k| {
            let (name, coords) = match DC_STATIONS.get(k) {
                Some(&(name, lat, lon)) => (name.to_string(), Coords { lat, lon }),
                None => {
                    let ((lat0, lat1), (lon0, lon1)) = DC_BOX;
                    let coords = Coords {
                        lat: rng.gen_range(lat0..lat1),
                        lon: rng.gen_range(lon0..lon1),
                    };
                    (format!("Station {k}"), coords)
                }
            };
            Station {
                id: StationId(k),
                name,
                capacity: cfg.station_capacity,
                coords: Some(coords),
            }
        })
        .collect()
}

pub fn generate(cfg: &GenConfig) -> Result<Scenario, GenError> {
    cfg.validate()?;
    generate_on(cfg, default_stations(cfg))
}

/// Generates customers and fleet on the given stations; `cfg.num_stations`
/// and `cfg.station_capacity` are ignored.
pub fn generate_on(cfg: &GenConfig, stations: Vec<Station>) -> Result<Scenario, GenError> {
    cfg.validate()?;
    let total: usize = stations.iter().map(|s| s.capacity).sum();
    if cfg.num_evs > total {
        return Err(GenError::ConfigInfeasible {
            evs: cfg.num_evs,
            capacity: total,
        });
    }
    let horizon = cfg.num_time_points;
    let trips = build_trip_matrix(
        &stations,
        cfg.avg_speed_kmh,
        cfg.minutes_per_point,
        cfg.consumption,
        cfg.min_trip_duration,
    );
    // A task needs start >= 1 and start + duration <= horizon - 1.
    let usable: Vec<(StationId, StationId, Trip)> = trips
        .iter()
        .filter(|(_, _, trip)| trip.duration + 2 <= horizon)
        .collect();
    if usable.is_empty() && cfg.num_customers > 0 {
        return Err(GenError::NoTrips(horizon));
    }

    let mut evs = Vec::with_capacity(cfg.num_evs);
    let mut placed = vec![0; stations.len()];
    let mut next = 0;
    while evs.len() < cfg.num_evs {
        let l = next % stations.len();
        next += 1;
        if placed[l] < stations[l].capacity {
            placed[l] += 1;
            evs.push(EvSpec {
                id: EvId(evs.len()),
                start_location: StationId(l),
                start_energy: MAX_ENERGY,
                max_energy: MAX_ENERGY,
                consumption: cfg.consumption,
                charge_rate: cfg.charge_rate,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tasks = Vec::new();
    let mut customers = Vec::with_capacity(cfg.num_customers);
    for i in 0..cfg.num_customers {
        let id = CustomerId(i);
        let wanted = rng.gen_range(1..=cfg.max_alternatives);
        let mut seen = BTreeSet::new();
        let mut alternatives = Vec::with_capacity(wanted);
        let mut attempts = 0;
        while alternatives.len() < wanted && attempts < 100 * wanted {
            attempts += 1;
            let (origin, dest, trip) = usable[rng.gen_range(0..usable.len())];
            let start = rng.gen_range(1..=horizon - 1 - trip.duration);
            if !seen.insert((origin, dest, start)) {
                continue;
            }
            let task = TaskId(tasks.len());
            tasks.push(Task {
                id: task,
                origin,
                dest,
                start,
                duration: trip.duration,
                energy: trip.energy,
                customer: id,
            });
            alternatives.push(task);
        }
        let earliest = alternatives
            .iter()
            .map(|r| tasks[r.0].start)
            .min()
            .expect("at least one alternative");
        let arrival = rng.gen_range(0..earliest);
        customers.push(Customer {
            id,
            alternatives,
            arrival,
        });
    }

    Ok(Scenario {
        grid: TimeGrid {
            num_points: horizon,
            minutes_per_point: cfg.minutes_per_point,
        },
        network: Network { stations, trips },
        evs,
        customers,
        tasks,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;

    fn cfg(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            ..GenConfig::default()
        }
    }

    #[test]
    fn dc_network_has_all_56_trips() {
        let s = generate(&cfg(1)).unwrap();
        assert_eq!(s.network.trips.len(), 56);
        for (_, _, trip) in s.network.trips.iter() {
            assert!((1..=2).contains(&trip.duration), "{trip:?}");
            assert_eq!(trip.energy, trip.duration as f64 * 10.0);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        assert_eq!(generate(&cfg(7)).unwrap().to_json(), generate(&cfg(7)).unwrap().to_json());
        assert_ne!(generate(&cfg(7)).unwrap().to_json(), generate(&cfg(8)).unwrap().to_json());
    }

    #[test]
    fn generated_scenarios_validate() {
        for seed in 0..100 {
            let mut c = cfg(seed);
            c.num_stations = 2 + (seed as usize % 10);
            c.num_evs = 1 + (seed as usize % 40).min(c.num_stations * c.station_capacity - 1);
            c.num_customers = seed as usize;
            c.num_time_points = 5 + (seed as usize % 60);
            let s = generate(&c).unwrap();
            assert_eq!(validate_scenario(&s), vec![], "seed {seed}");
            for t in &s.tasks {
                assert!(t.end() < s.grid.num_points);
            }
        }
    }

    #[test]
    fn alternatives_average_two() {
        let mut total = 0;
        let mut customers = 0;
        for seed in 0..200 {
            let s = generate(&cfg(seed)).unwrap();
            total += s.tasks.len();
            customers += s.customers.len();
        }
        let mean = total as f64 / customers as f64;
        assert!((mean - 2.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn too_many_evs() {
        let mut c = cfg(0);
        c.num_evs = 81;
        assert!(matches!(
            generate(&c),
            Err(GenError::ConfigInfeasible { evs: 81, capacity: 80 })
        ));
    }

    fn at(k: usize, lat: f64, lon: f64) -> Station {
        Station {
            id: StationId(k),
            name: format!("s{k}"),
            capacity: 1,
            coords: Some(Coords { lat, lon }),
        }
    }

    #[test]
    fn ten_km_is_one_point() {
        let deg = 10.0 / (EARTH_RADIUS_KM * std::f64::consts::PI / 180.0);
        let st = [at(0, 0.0, 0.0), at(1, deg, 0.0)];
        assert!((haversine_km(st[0].coords.unwrap(), st[1].coords.unwrap()) - 10.0).abs() < 1e-9);
        let trips = build_trip_matrix(&st, 40.0, 15, 10.0, 1);
        assert_eq!(trips.get(StationId(0), StationId(1)).unwrap().duration, 1);
    }

    #[test]
    fn coincident_and_antipodal_pairs_are_dropped() {
        let st = [at(0, 10.0, 20.0), at(1, 10.0, 20.0), at(2, -10.0, -160.0)];
        let trips = build_trip_matrix(&st, 40.0, 15, 10.0, 1);
        assert!(trips.is_empty());
    }

    #[test]
    fn station_file() {
        let ok = "id,name,lat,lon,capacity\n1,B,38.9,-77.0,5\n0,A,38.8,-77.1,10\n";
        let st = parse_stations(ok).unwrap();
        assert_eq!(st[0].name, "A");
        assert_eq!(st[1].capacity, 5);

        let zero = "id,name,lat,lon,capacity\n0,A,38.8,-77.1,10\n1,B,38.9,-77.0,0\n";
        let err = parse_stations(zero).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("positive capacity"), "{err}");

        let dup = "id,name,lat,lon,capacity\n0,A,38.8,-77.1,10\n0,B,38.9,-77.0,4\n";
        assert!(parse_stations(dup).unwrap_err().to_string().contains("duplicate"));

        let junk = "id,name,lat,lon,capacity\n0,A,north,-77.1,10\n";
        assert!(parse_stations(junk).unwrap_err().to_string().contains("line 2"));
    }
}
