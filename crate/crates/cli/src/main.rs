use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use modfleet::exact::{solve_exact, ExactConfig, SolveLimits};
use modfleet::experiment::{self, Algorithm, SweepConfig};
use modfleet::mip::{build_model, export_lp, BuildOptions};
use modfleet::online::run_online_logged;
use modfleet::scenario_gen::{generate, generate_on, load_stations, GenConfig};
use modfleet::{check_feasibility, objective, Scenario, Schedule};

#[derive(Parser)]
#[command(name = "modfleet", version, about = "EV fleet scheduling for one-way car sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario.
    Gen(GenArgs),
    /// Solve a scenario with the exact solver or an online heuristic.
    Solve(SolveArgs),
    /// Service-quality sweep.
    Exp1(SweepArgs),
    /// Runtime sweep with a quadratic fit of exact solve time.
    Exp2(SweepArgs),
    /// Write the scenario's mixed-integer model as an LP file.
    ExportLp {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Leave out the station-balance rows.
        #[arg(long)]
        no_cuts: bool,
    },
    /// Check a schedule against every constraint family.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
    },
}

/// Generator settings; flags override the config file, which overrides the
/// defaults.
#[derive(Args, Clone, Default)]
struct GenFlags {
    /// TOML or JSON file with generator fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Station CSV (`id,name,lat,lon,capacity`) replacing the built-in network.
    #[arg(long)]
    stations: Option<PathBuf>,
    #[arg(long)]
    num_stations: Option<usize>,
    #[arg(long)]
    station_capacity: Option<usize>,
    #[arg(long)]
    num_time_points: Option<usize>,
    #[arg(long)]
    minutes_per_point: Option<u32>,
    #[arg(long)]
    num_evs: Option<usize>,
    #[arg(long)]
    num_customers: Option<usize>,
    #[arg(long)]
    max_alternatives: Option<usize>,
    #[arg(long)]
    consumption: Option<f64>,
    #[arg(long)]
    charge_rate: Option<f64>,
    #[arg(long)]
    avg_speed_kmh: Option<f64>,
    #[arg(long)]
    min_trip_duration: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Optimal,
    Square,
    Destination,
    Random,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Optimal => Algorithm::Optimal,
            AlgoArg::Square => Algorithm::Square,
            AlgoArg::Destination => Algorithm::Destination,
            AlgoArg::Random => Algorithm::Random,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long)]
    scenario: PathBuf,
    /// Seed of the random heuristic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long)]
    no_cuts: bool,
    /// Schedule output (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// One JSON line per online decision.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    gen: GenFlags,
    /// Fleet sizes, e.g. `15` or `5,10,20`.
    #[arg(long, value_delimiter = ',', default_value = "15")]
    evs: Vec<usize>,
    /// Customer counts, e.g. `10,20,30` or `10..=70:10`.
    #[arg(long, default_value = "10..=70:10")]
    customers: String,
    /// Seed count `N` (seeds 0..N) or an explicit list `3,5,8`.
    #[arg(long, default_value = "20")]
    seeds: String,
    #[arg(long, value_enum, value_delimiter = ',')]
    algos: Option<Vec<AlgoArg>>,
    /// Exact solver budget per run, seconds.
    #[arg(long, default_value_t = 30.0)]
    time_budget: f64,
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long)]
    no_cuts: bool,
    /// Skip the exact solver above this many customers.
    #[arg(long)]
    optimal_max_customers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(args) => {
            let mut cfg = gen_config(&args.gen)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let s = scenario_for(&args.gen, &cfg)?;
            write_or_print(args.out.as_deref(), &s.to_json())?;
        }
        Command::Solve(args) => solve(args)?,
        Command::Exp1(args) => {
            let cfg = sweep_config(&args)?;
            let rows = experiment::run_exp1(&cfg)?;
            experiment::emit_results(&rows, &args.out)?;
            for r in experiment::series(&rows) {
                let eff = r.efficiency_mean.map_or("-".into(), |e| format!("{e:.4}"));
                println!(
                    "{:<12} evs {:>4} customers {:>5}  serviced {:>8.2} ± {:<6.2} efficiency {eff}",
                    r.algorithm, r.evs, r.customers, r.serviced_mean, r.serviced_ci95
                );
            }
            eprintln!("wrote {}", args.out.display());
        }
        Command::Exp2(args) => {
            let cfg = sweep_config(&args)?;
            let (rows, fit) = experiment::run_exp2(&cfg)?;
            experiment::emit_results(&rows, &args.out)?;
            for r in experiment::series(&rows) {
                println!(
                    "{:<12} evs {:>4} customers {:>5}  time {:.6}s ± {:.6}",
                    r.algorithm, r.evs, r.customers, r.wall_time_mean, r.wall_time_ci95
                );
            }
            println!("{fit}");
            eprintln!("wrote {}", args.out.display());
        }
        Command::ExportLp {
            scenario,
            out,
            no_cuts,
        } => {
            let s = read_scenario(&scenario)?;
            let issues = modfleet::validate_scenario(&s);
            if !issues.is_empty() {
                bail!("{}: {}", scenario.display(), join(&issues));
            }
            let m = build_model(&s, &BuildOptions { cuts: !no_cuts });
            export_lp(&m, &out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} ({} variables, {} rows)",
                out.display(),
                m.variables.len(),
                m.constraints.len()
            );
        }
        Command::Check { scenario, schedule } => {
            let s = read_scenario(&scenario)?;
            let text = fs::read_to_string(&schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let sch = Schedule::from_json(&text)
                .with_context(|| format!("parsing {}", schedule.display()))?;
            let report = check_feasibility(&s, &sch);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.ok {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(args: SolveArgs) -> Result<()> {
    let s = read_scenario(&args.scenario)?;
    let algo = Algorithm::from(args.algo);
    let (schedule, summary) = match algo.heuristic(args.seed) {
        None => {
            let cfg = ExactConfig {
                limits: SolveLimits {
                    time_budget: args.time_budget.map(Duration::from_secs_f64),
                    node_budget: args.node_budget,
                },
                cuts: !args.no_cuts,
            };
            let res = solve_exact(&s, &cfg)?;
            let summary = json!({
                "algorithm": algo.as_str(),
                "status": res.status,
                "objective": res.objective,
                "nodes": res.nodes_explored,
                "method": res.method,
                "wall_time": res.wall_time.as_secs_f64(),
            });
            (res.schedule, summary)
        }
        Some(kind) => {
            let issues = modfleet::validate_scenario(&s);
            if !issues.is_empty() {
                bail!("{}: {}", args.scenario.display(), join(&issues));
            }
            let mut log_file = match &args.log {
                Some(p) => Some(std::io::BufWriter::new(
                    fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
                )),
                None => None,
            };
            let run = run_online_logged(
                &s,
                kind,
                log_file.as_mut().map(|f| f as &mut dyn Write),
            )?;
            if let Some(mut f) = log_file {
                f.flush()?;
            }
            let summary = json!({
                "algorithm": algo.as_str(),
                "objective": objective(&run.schedule),
                "customers": s.customers.len(),
                "wall_time": run.wall_time.as_secs_f64(),
            });
            (Some(run.schedule), summary)
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let (Some(path), Some(sch)) = (&args.out, schedule) {
        fs::write(path, sch.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn join(issues: &[modfleet::ScenarioIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn gen_config(flags: &GenFlags) -> Result<GenConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            } else {
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
        }
        None => GenConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = flags.$field { cfg.$field = v; })*
        };
    }
    apply!(
        num_stations,
        station_capacity,
        num_time_points,
        minutes_per_point,
        num_evs,
        num_customers,
        max_alternatives,
        consumption,
        charge_rate,
        avg_speed_kmh,
        min_trip_duration
    );
    cfg.validate()?;
    Ok(cfg)
}

fn scenario_for(flags: &GenFlags, cfg: &GenConfig) -> Result<Scenario> {
    Ok(match &flags.stations {
        Some(path) => generate_on(cfg, load_stations(path)?)?,
        None => generate(cfg)?,
    })
}

/// `10,20,30`, a single `N`, or `a..=b:step`.
fn parse_counts(spec: &str) -> Result<Vec<usize>> {
    if let Some((range, step)) = spec.split_once(':') {
        let (lo, hi) = range
            .split_once("..=")
            .with_context(|| format!("expected a..=b:step, got {spec:?}"))?;
        let (lo, hi, step): (usize, usize, usize) = (lo.parse()?, hi.parse()?, step.parse()?);
        if step == 0 {
            bail!("step must be positive");
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    spec.split(',')
        .map(|p| p.trim().parse().with_context(|| format!("bad count {p:?}")))
        .collect()
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if spec.contains(',') {
        return spec
            .split(',')
            .map(|p| p.trim().parse().with_context(|| format!("bad seed {p:?}")))
            .collect();
    }
    let n: u64 = spec.parse().with_context(|| format!("bad seed count {spec:?}"))?;
    Ok((0..n).collect())
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    if args.gen.stations.is_some() {
        bail!("--stations is only supported by gen");
    }
    Ok(SweepConfig {
        base: gen_config(&args.gen)?,
        evs: args.evs.clone(),
        customers: parse_counts(&args.customers)?,
        seeds: parse_seeds(&args.seeds)?,
        algorithms: match &args.algos {
            Some(a) => a.iter().map(|&x| x.into()).collect(),
            None => Algorithm::ALL.to_vec(),
        },
        exact: ExactConfig {
            limits: SolveLimits {
                time_budget: Some(Duration::from_secs_f64(args.time_budget)),
                node_budget: args.node_budget,
            },
            cuts: !args.no_cuts,
        },
        optimal_max_customers: args.optimal_max_customers,
    })
}
