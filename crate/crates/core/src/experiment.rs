//! Parameter sweeps comparing the exact solver with the online heuristics.
//!
//! Every run is one row of `results.csv`; `series.csv` holds per grid point
//! means with 95% confidence half-widths and is derived from `results.csv`
//! alone.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::exact::{solve_exact, ExactConfig, ExactError, SolveStatus};
use crate::online::{run_online, HeuristicKind};
use crate::scenario_gen::{generate, GenConfig, GenError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Optimal,
    Square,
    Destination,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Optimal,
        Algorithm::Square,
        Algorithm::Destination,
        Algorithm::Random,
    ];
    pub const ONLINE: [Algorithm; 3] = [Algorithm::Square, Algorithm::Destination, Algorithm::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Optimal => "optimal",
            Algorithm::Square => "square",
            Algorithm::Destination => "destination",
            Algorithm::Random => "random",
        }
    }

    /// Online heuristic for this algorithm; `seed` feeds the random one.
    pub fn heuristic(self, seed: u64) -> Option<HeuristicKind> {
        match self {
            Algorithm::Optimal => None,
            Algorithm::Square => Some(HeuristicKind::Square),
            Algorithm::Destination => Some(HeuristicKind::Destination),
            Algorithm::Random => Some(HeuristicKind::Random(seed)),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    /// Online run, or exact run proven optimal.
    Complete,
    /// Exact run stopped by its budget; `serviced` is the incumbent.
    TimedOut,
    /// Exact run not attempted at this grid point.
    Skipped,
}

/// One algorithm on one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: Algorithm,
    pub evs: usize,
    pub customers: usize,
    pub seed: u64,
    pub serviced: usize,
    /// Serviced relative to the proven optimum of the same scenario.
    pub efficiency: Option<f64>,
    /// Seconds.
    pub wall_time: f64,
    pub nodes: Option<u64>,
    pub status: RunStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Everything but fleet size, customer count and seed.
    pub base: GenConfig,
    pub evs: Vec<usize>,
    pub customers: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub exact: ExactConfig,
    /// Grid points with more customers than this skip the exact solver.
    pub optimal_max_customers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: GenConfig::default(),
            evs: vec![15],
            customers: (1..=7).map(|k| 10 * k).collect(),
            seeds: (0..20).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            exact: ExactConfig {
                limits: crate::exact::SolveLimits {
                    time_budget: Some(Duration::from_secs(30)),
                    node_budget: None,
                },
                cuts: true,
            },
            optimal_max_customers: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{evs} EVs, {customers} customers, seed {seed}: {source}")]
    Generate {
        evs: usize,
        customers: usize,
        seed: u64,
        source: GenError,
    },
    #[error("{evs} EVs, {customers} customers, seed {seed}: {source}")]
    Solve {
        evs: usize,
        customers: usize,
        seed: u64,
        source: ExactError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SweepConfig {
    fn points(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for &evs in &self.evs {
            for &customers in &self.customers {
                for &seed in &self.seeds {
                    out.push((evs, customers, seed));
                }
            }
        }
        out
    }

    fn runs_optimal(&self, customers: usize) -> bool {
        self.algorithms.contains(&Algorithm::Optimal)
            && self.optimal_max_customers.map_or(true, |m| customers <= m)
    }
}

/// Every requested algorithm on one generated scenario.
pub fn run_point(
    cfg: &SweepConfig,
    evs: usize,
    customers: usize,
    seed: u64,
) -> Result<Vec<RunMetrics>, ExperimentError> {
    let gen = GenConfig {
        num_evs: evs,
        num_customers: customers,
        seed,
        ..cfg.base.clone()
    };
    let s = generate(&gen).map_err(|source| ExperimentError::Generate {
        evs,
        customers,
        seed,
        source,
    })?;
    let row = |algorithm, serviced, wall_time: Duration, nodes, status| RunMetrics {
        algorithm,
        evs,
        customers,
        seed,
        serviced,
        efficiency: None,
        wall_time: wall_time.as_secs_f64(),
        nodes,
        status,
    };

    let mut rows = Vec::new();
    let mut optimum = None;
    if cfg.algorithms.contains(&Algorithm::Optimal) {
        if cfg.runs_optimal(customers) {
            let res = solve_exact(&s, &cfg.exact).map_err(|source| ExperimentError::Solve {
                evs,
                customers,
                seed,
                source,
            })?;
            let status = match res.status {
                SolveStatus::TimedOut => RunStatus::TimedOut,
                _ => RunStatus::Complete,
            };
            if status == RunStatus::Complete {
                optimum = Some(res.objective);
            }
            let mut r = row(
                Algorithm::Optimal,
                res.objective,
                res.wall_time,
                Some(res.nodes_explored),
                status,
            );
            r.efficiency = optimum.map(|_| 1.0);
            rows.push(r);
        } else {
            rows.push(row(Algorithm::Optimal, 0, Duration::ZERO, None, RunStatus::Skipped));
        }
    }
    for &algorithm in &cfg.algorithms {
        let Some(kind) = algorithm.heuristic(seed) else {
            continue;
        };
        let run = run_online(&s, kind);
        let mut r = row(algorithm, run.serviced, run.wall_time, None, RunStatus::Complete);
        r.efficiency = optimum.map(|opt| efficiency(run.serviced, opt));
        rows.push(r);
    }
    Ok(rows)
}

/// Serviced relative to the optimum; two empty schedules are equally good.
pub fn efficiency(serviced: usize, optimal: usize) -> f64 {
    if optimal == 0 {
        1.0
    } else {
        serviced as f64 / optimal as f64
    }
}

/// Service-quality sweep. Grid points run in parallel; rows come back in
/// grid order.
pub fn run_exp1(cfg: &SweepConfig) -> Result<Vec<RunMetrics>, ExperimentError> {
    let per_point: Vec<Vec<RunMetrics>> = cfg
        .points()
        .into_par_iter()
        .map(|(evs, customers, seed)| run_point(cfg, evs, customers, seed))
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Runtime sweep: runs sequentially so timings do not compete for cores, and
/// fits a quadratic to the exact solver's mean time per customer count.
pub fn run_exp2(cfg: &SweepConfig) -> Result<(Vec<RunMetrics>, TimingFit), ExperimentError> {
    let mut rows = Vec::new();
    for (evs, customers, seed) in cfg.points() {
        rows.extend(run_point(cfg, evs, customers, seed)?);
    }
    let fit = timing_fit(&rows);
    Ok((rows, fit))
}

/// Quadratic fit of the exact solver's mean wall time against customers.
#[derive(Clone, Debug, PartialEq)]
pub enum TimingFit {
    Fitted {
        /// `c0 + c1 x + c2 x²`.
        coefficients: [f64; 3],
        r_squared: f64,
        points: Vec<(f64, f64)>,
    },
    /// Fewer than three distinct customer counts.
    Skipped { points: usize },
}

impl fmt::Display for TimingFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingFit::Fitted {
                coefficients: [c0, c1, c2],
                r_squared,
                points,
            } => write!(
                f,
                "time ~ {c0:.4e} + {c1:.4e} x + {c2:.4e} x^2 over {} points, R^2 = {r_squared:.4}",
                points.len()
            ),
            TimingFit::Skipped { points } => write!(
                f,
                "quadratic fit skipped: {points} customer count(s), at least 3 needed"
            ),
        }
    }
}

/// Mean completed exact-solver time per customer count, over every fleet size.
pub fn optimal_time_series(rows: &[RunMetrics]) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.algorithm == Algorithm::Optimal && r.status == RunStatus::Complete {
            groups.entry(r.customers).or_default().push(r.wall_time);
        }
    }
    groups
        .into_iter()
        .map(|(x, ys)| (x as f64, mean(&ys)))
        .collect()
}

pub fn timing_fit(rows: &[RunMetrics]) -> TimingFit {
    let points = optimal_time_series(rows);
    match fit_quadratic(&points) {
        Some((coefficients, r_squared)) => TimingFit::Fitted {
            coefficients,
            r_squared,
            points,
        },
        None => TimingFit::Skipped {
            points: points.len(),
        },
    }
}

/// Least-squares `y ~ c0 + c1 x + c2 x²` and its coefficient of
/// determination. `None` with fewer than three distinct `x`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Option<([f64; 3], f64)> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return None;
    }
    let n = points.len();
    let a = DMatrix::from_fn(n, 3, |i, j| points[i].0.powi(j as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let c = a.clone().svd(true, true).solve(&y, 1e-12).ok()?;
    let predicted = &a * &c;
    let y_mean = y.mean();
    let ss_res: f64 = (&y - predicted).iter().map(|e| e * e).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(([c[0], c[1], c[2]], r2))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Half-width of the two-sided 95% Student-t interval for the mean; zero
/// for fewer than two samples.
pub fn ci95_half_width(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

/// Per (algorithm, evs, customers) aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub algorithm: Algorithm,
    pub evs: usize,
    pub customers: usize,
    pub runs: usize,
    pub serviced_mean: f64,
    pub serviced_ci95: f64,
    pub efficiency_mean: Option<f64>,
    pub efficiency_ci95: Option<f64>,
    pub wall_time_mean: f64,
    pub wall_time_ci95: f64,
}

/// Aggregates runs per grid point and algorithm. Skipped exact runs are left
/// out; efficiency statistics use the runs that have one.
pub fn series(rows: &[RunMetrics]) -> Vec<SeriesRow> {
    let mut groups: BTreeMap<(usize, usize, Algorithm), Vec<&RunMetrics>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status != RunStatus::Skipped) {
        groups.entry((r.evs, r.customers, r.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((evs, customers, algorithm), runs)| {
            let serviced: Vec<f64> = runs.iter().map(|r| r.serviced as f64).collect();
            let eff: Vec<f64> = runs.iter().filter_map(|r| r.efficiency).collect();
            let time: Vec<f64> = runs.iter().map(|r| r.wall_time).collect();
            SeriesRow {
                algorithm,
                evs,
                customers,
                runs: runs.len(),
                serviced_mean: mean(&serviced),
                serviced_ci95: ci95_half_width(&serviced),
                efficiency_mean: (!eff.is_empty()).then(|| mean(&eff)),
                efficiency_ci95: (!eff.is_empty()).then(|| ci95_half_width(&eff)),
                wall_time_mean: mean(&time),
                wall_time_ci95: ci95_half_width(&time),
            }
        })
        .collect()
}

const RESULTS_HEADER: [&str; 9] = [
    "algorithm",
    "evs",
    "customers",
    "seed",
    "serviced",
    "efficiency",
    "wall_time",
    "nodes",
    "status",
];

const SERIES_HEADER: [&str; 10] = [
    "algorithm",
    "evs",
    "customers",
    "runs",
    "serviced_mean",
    "serviced_ci95",
    "efficiency_mean",
    "efficiency_ci95",
    "wall_time_mean",
    "wall_time_ci95",
];

pub fn write_results<W: std::io::Write>(rows: &[RunMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<RunMetrics>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn write_series<W: std::io::Write>(rows: &[SeriesRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, then derives `series.csv` from what was written.
pub fn emit_results(rows: &[RunMetrics], out_dir: impl AsRef<Path>) -> Result<(), ExperimentError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let results = dir.join("results.csv");
    write_results(rows, std::fs::File::create(&results)?)?;
    let parsed = read_results(std::fs::File::open(&results)?)?;
    write_series(&series(&parsed), std::fs::File::create(dir.join("series.csv"))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            evs: vec![3],
            customers: vec![0, 6],
            seeds: (0..5).collect(),
            base: GenConfig {
                num_time_points: 16,
                ..GenConfig::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn zero_customers_serve_nobody() {
        let rows = run_exp1(&small()).unwrap();
        for r in rows.iter().filter(|r| r.customers == 0) {
            assert_eq!(r.serviced, 0);
            assert_eq!(r.efficiency, Some(1.0));
        }
    }

    #[test]
    fn online_never_beats_optimal() {
        let rows = run_exp1(&small()).unwrap();
        assert_eq!(rows.len(), 2 * 5 * 4);
        for chunk in rows.chunks(4) {
            assert_eq!(chunk[0].algorithm, Algorithm::Optimal);
            for r in &chunk[1..] {
                assert!(r.serviced <= chunk[0].serviced);
                assert!((0.0..=1.0).contains(&r.efficiency.unwrap()));
            }
        }
    }

    #[test]
    fn optimal_can_be_skipped() {
        let cfg = SweepConfig {
            optimal_max_customers: Some(0),
            ..small()
        };
        let rows = run_exp1(&cfg).unwrap();
        let skipped: Vec<_> = rows.iter().filter(|r| r.status == RunStatus::Skipped).collect();
        assert_eq!(skipped.len(), 5);
        assert!(skipped.iter().all(|r| r.algorithm == Algorithm::Optimal && r.customers == 6));
        assert!(rows.iter().filter(|r| r.customers == 6).all(|r| r.efficiency.is_none()));
    }

    #[test]
    fn row_count_is_algorithms_by_points_by_seeds() {
        let cfg = SweepConfig {
            algorithms: Algorithm::ONLINE.to_vec(),
            ..small()
        };
        assert_eq!(run_exp1(&cfg).unwrap().len(), 3 * 2 * 5);
    }

    #[test]
    fn csv_round_trip_and_series() {
        let rows = run_exp1(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_results(&rows, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(text.starts_with("algorithm,evs,customers,seed,serviced,efficiency,wall_time,nodes,status\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
        let back = read_results(text.as_bytes()).unwrap();
        assert_eq!(back, rows);

        let series_text = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
        let mut again = Vec::new();
        write_series(&series(&back), &mut again).unwrap();
        assert_eq!(series_text.as_bytes(), again.as_slice());

        let before = std::fs::read(dir.path().join("results.csv")).unwrap();
        emit_results(&rows, dir.path()).unwrap();
        assert_eq!(before, std::fs::read(dir.path().join("results.csv")).unwrap());
    }

    #[test]
    fn empty_table_gives_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_results(&[], dir.path()).unwrap();
        for (file, header) in [("results.csv", RESULTS_HEADER.join(",")), ("series.csv", SERIES_HEADER.join(","))] {
            let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
            assert_eq!(text, format!("{header}\n"));
        }
    }

    #[test]
    fn ci_half_width_matches_table() {
        // n = 5, sd = 1: t(0.975, 4) = 2.776445 over sqrt(5).
        let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let sd = (2.5f64 / 4.0).sqrt();
        let expected = 2.776_445_105 * sd / 5f64.sqrt();
        assert!((ci95_half_width(&xs) - expected).abs() < 1e-6);
        assert_eq!(ci95_half_width(&[3.0]), 0.0);
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabola() {
        let pts: Vec<(f64, f64)> = (1..=7)
            .map(|k| {
                let x = 10.0 * k as f64;
                (x, 0.5 - 0.01 * x + 0.002 * x * x)
            })
            .collect();
        let (c, r2) = fit_quadratic(&pts).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-8 && (c[1] + 0.01).abs() < 1e-9 && (c[2] - 0.002).abs() < 1e-11);
        assert!((r2 - 1.0).abs() < 1e-12);
        // Noisy data, with R² from first principles.
        let noisy = [(1.0, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, 5.0)];
        // Normal equations by hand: y = 1.25 - 0.15 x + 0.25 x², residuals
        // -0.35, 1.05, -1.05, 0.35 -> SS_res 2.45; mean 2.75 -> SS_tot 8.75.
        let (c, r2) = fit_quadratic(&noisy).unwrap();
        assert!((c[0] - 1.25).abs() < 1e-9 && (c[1] + 0.15).abs() < 1e-9 && (c[2] - 0.25).abs() < 1e-9);
        assert!((r2 - (1.0 - 2.45 / 8.75)).abs() < 1e-9, "{r2}");
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(fit_quadratic(&[(1.0, 1.0), (2.0, 2.0), (2.0, 3.0)]).is_none());
        let rows = vec![RunMetrics {
            algorithm: Algorithm::Optimal,
            evs: 15,
            customers: 10,
            seed: 0,
            serviced: 3,
            efficiency: Some(1.0),
            wall_time: 0.1,
            nodes: Some(1),
            status: RunStatus::Complete,
        }];
        let fit = timing_fit(&rows);
        assert_eq!(fit, TimingFit::Skipped { points: 1 });
        assert!(fit.to_string().contains("skipped"));
    }
}
