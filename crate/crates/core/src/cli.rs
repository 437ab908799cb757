//! Command-line front end.
//!
//! Exit status: 0 success, 1 infeasible model, 2 usage or input error,
//! 3 internal error. Failures also print one JSON line on standard error:
//! `{"error":"<kind>","message":"..."}`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench::{
    build_fleet_model, generate_catalogs, prefilter_designs, quad_subsystems, read_designs,
    read_packages, FleetParams, QuadVariant,
};
use crate::consistency::classify_all;
use crate::decompose::{
    build_aggregate, decompose_solve_traced, plan_subsystem, solve_plan, DecomposeConfig,
    DecomposeError, ExternalDirection, SubsystemCache,
};
use crate::io::{
    export_front, generate_catalog, load_model, load_subsystem_specs, write_aggregate,
    write_catalog, write_front, GeneratorSpec,
};
use crate::model::SystemModel;
use crate::oracle::{brute_force_front_par, EnumerationBudget};
use crate::pareto::{compute_front_traced, EngineConfig, FrontError, FrontStatistics, ParetoFront};
use crate::solver::{CpSolver, SolverConfig};

#[derive(Debug, Parser)]
#[command(
    name = "compsel",
    version,
    about = "Multi-objective component selection"
)]
pub struct Cli {
    /// Seed for every random choice (overrides seeds in spec files).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel modes; 1 is deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic catalog.
    GenCatalog {
        /// Generator spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of components.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Classify every property and, with a subsystem, check decomposability.
    CheckConsistency {
        #[arg(long)]
        model: PathBuf,
        /// Subsystem name from `--subsystems`.
        #[arg(long, requires = "subsystems")]
        subsystem: Option<String>,
        #[arg(long)]
        subsystems: Option<PathBuf>,
    },
    /// Compute the Pareto front of a model.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Front CSV; a provenance sidecar is written next to it. Standard
        /// output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use exhaustive enumeration instead of the solver.
        #[arg(long)]
        oracle: bool,
        /// Print search statistics on standard error.
        #[arg(long)]
        stats: bool,
        /// Enumeration budget for `--oracle`.
        #[arg(long, default_value_t = 10_000_000)]
        budget: u128,
    },
    /// Fold subsystems into aggregates, then solve the reduced model.
    DecomposeSolve {
        #[arg(long)]
        model: PathBuf,
        /// Subsystem file (TOML), innermost first.
        #[arg(long)]
        subsystems: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for aggregate catalogs and their provenance.
        #[arg(long)]
        aggregates: Option<PathBuf>,
        #[arg(long)]
        stats: bool,
    },
    /// Fleet design and package assignment from a quadcopter front.
    Fleet {
        /// Quadcopter front CSV with velocity, payload, cost and mass columns.
        #[arg(long)]
        quad_front: PathBuf,
        /// Packages CSV: id,mass,distance.
        #[arg(long)]
        packages: PathBuf,
        /// Fleet parameters (TOML).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        stats: bool,
    },
    /// Scaling sweep over generated quadcopter catalogs, as CSV.
    Benchmark {
        /// Largest catalog size of the sweep.
        #[arg(long)]
        scale: usize,
        #[arg(long, value_enum, default_value_t = Variant::Multi)]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Single,
    Multi,
    Component,
    Delivery,
}

impl From<Variant> for QuadVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Single => QuadVariant::SingleObjective,
            Variant::Multi => QuadVariant::MultiObjective,
            Variant::Component => QuadVariant::ComponentLevel,
            Variant::Delivery => QuadVariant::Delivery,
        }
    }
}

/// A failed run: exit status, error kind and message.
#[derive(Debug)]
pub struct Failure {
    pub status: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            status: 2,
            kind: "usage",
            message: message.to_string(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Failure {
            status: 2,
            kind: "input",
            message: message.to_string(),
        }
    }

    fn internal(message: impl ToString) -> Self {
        Failure {
            status: 3,
            kind: "internal",
            message: message.to_string(),
        }
    }

    fn infeasible(message: impl ToString) -> Self {
        Failure {
            status: 1,
            kind: "infeasible",
            message: message.to_string(),
        }
    }

    pub fn json_line(&self) -> String {
        json!({ "error": self.kind, "message": self.message }).to_string()
    }
}

/// Parses `args` and runs the command.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("{}", Failure::usage(e.kind()).json_line());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.json_line());
            ExitCode::from(f.status)
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let engine = EngineConfig {
        threads: cli.threads,
        max_points: None,
    };
    match &cli.command {
        Command::GenCatalog { spec, out, count } => gen_catalog(spec, out, *count, cli.seed),
        Command::CheckConsistency {
            model,
            subsystem,
            subsystems,
        } => check_consistency(model, subsystem.as_deref(), subsystems.as_deref()),
        Command::Solve {
            model,
            out,
            oracle,
            stats,
            budget,
        } => {
            let m = load_model(model).map_err(Failure::input)?;
            let t = Instant::now();
            let front = if *oracle {
                let budget = EnumerationBudget {
                    max_combinations: *budget,
                };
                brute_force_front_par(&m, budget, cli.threads).map_err(Failure::usage)?
            } else {
                match compute_front_traced(&m, &solver(cli), &engine) {
                    Ok((f, s)) => {
                        if *stats {
                            print_stats(&s, m.combinations());
                        }
                        f
                    }
                    Err(FrontError::InfeasibleModel) => ParetoFront::new(),
                    Err(e) => return Err(Failure::internal(e)),
                }
            };
            if *stats {
                eprintln!("wall_seconds={:.6}", t.elapsed().as_secs_f64());
            }
            emit_front(&front, &m, out.as_deref())
        }
        Command::DecomposeSolve {
            model,
            subsystems,
            out,
            aggregates,
            stats,
        } => {
            let m = load_model(model).map_err(Failure::input)?;
            let specs = load_subsystem_specs(subsystems).map_err(Failure::input)?;
            let cfg = DecomposeConfig {
                engine,
                ..DecomposeConfig::default()
            };
            let mut cache = SubsystemCache::new();
            let front = match decompose_solve_traced(&m, &specs, &solver(cli), &cfg, &mut cache) {
                Ok((f, trace)) => {
                    if *stats {
                        for s in &trace.stages {
                            eprintln!(
                                "stage={} aggregate={} columns={} front_size={} reused={} wall_seconds={:.6}",
                                s.subsystem,
                                s.aggregate,
                                s.external_columns,
                                s.front_size,
                                s.reused,
                                s.wall_time.as_secs_f64()
                            );
                        }
                        print_stats(&trace.final_stats, trace.reduced_combinations);
                        eprintln!("wall_seconds={:.6}", trace.wall_time.as_secs_f64());
                    }
                    f
                }
                Err(DecomposeError::Front(FrontError::InfeasibleModel))
                | Err(DecomposeError::EmptyFront(_)) => ParetoFront::new(),
                Err(e @ DecomposeError::Front(_)) => return Err(Failure::internal(e)),
                Err(e) => return Err(Failure::input(e)),
            };
            if let Some(dir) = aggregates {
                write_aggregates(&m, &specs, dir, cli, &cfg)?;
            }
            emit_front(&front, &m, out.as_deref())
        }
        Command::Fleet {
            quad_front,
            packages,
            params,
            out,
            oracle,
            stats,
        } => {
            let designs = read_designs(open(quad_front)?).map_err(Failure::input)?;
            let pkgs = read_packages(open(packages)?).map_err(Failure::input)?;
            let text = fs::read_to_string(params)
                .map_err(|e| Failure::input(format!("{}: {e}", params.display())))?;
            let params = FleetParams::from_toml(&text).map_err(Failure::input)?;
            let designs = prefilter_designs(&designs, &pkgs);
            let fleet = match build_fleet_model(&designs, &pkgs, &params) {
                Ok(f) => f,
                Err(e @ crate::bench::FleetError::InfeasiblePayload { .. }) => {
                    return Err(Failure::infeasible(e));
                }
                Err(e) => return Err(Failure::input(e)),
            };
            let front = if *oracle {
                brute_force_front_par(&fleet.model, EnumerationBudget::default(), cli.threads)
                    .map_err(Failure::usage)?
            } else {
                match compute_front_traced(&fleet.model, &solver(cli), &engine) {
                    Ok((f, s)) => {
                        if *stats {
                            eprintln!("designs={}", designs.len());
                            print_stats(&s, fleet.model.combinations());
                        }
                        f
                    }
                    Err(FrontError::InfeasibleModel) => ParetoFront::new(),
                    Err(e) => return Err(Failure::internal(e)),
                }
            };
            emit_front(&front, &fleet.model, out.as_deref())
        }
        Command::Benchmark {
            scale,
            variant,
            out,
        } => benchmark(*scale, (*variant).into(), cli, out.as_deref()),
    }
}

fn solver(cli: &Cli) -> CpSolver {
    CpSolver::new(SolverConfig {
        seed: cli.seed.unwrap_or(0),
        ..SolverConfig::default()
    })
}

fn open(path: &Path) -> Result<fs::File, Failure> {
    fs::File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn print_stats(s: &FrontStatistics, combinations: u128) {
    eprintln!(
        "combinations={combinations} solves={} nodes={} backtracks={} solver_seconds={:.6}",
        s.solves,
        s.nodes_expanded,
        s.backtracks,
        s.wall_time.as_secs_f64()
    );
}

/// Writes the front to `out` (plus sidecar) or standard output. An empty
/// front is still written, then reported as infeasible.
fn emit_front(front: &ParetoFront, m: &SystemModel, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => export_front(front, m, path).map_err(Failure::internal)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_front(front, m, &mut lock).map_err(Failure::internal)?;
            lock.flush().map_err(Failure::internal)?;
        }
    }
    if front.is_empty() {
        return Err(Failure::infeasible("no feasible assignment"));
    }
    Ok(())
}

fn gen_catalog(
    spec: &Path,
    out: &Path,
    count: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let text =
        fs::read_to_string(spec).map_err(|e| Failure::input(format!("{}: {e}", spec.display())))?;
    let mut g = GeneratorSpec::from_toml(&text).map_err(Failure::input)?;
    if let Some(s) = seed {
        g.seed = s;
    }
    if let Some(c) = count {
        g.count = c;
    }
    let cat = generate_catalog(&g).map_err(Failure::input)?;
    let f = fs::File::create(out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    write_catalog(&cat, std::io::BufWriter::new(f), &[g.header()]).map_err(Failure::internal)
}

fn check_consistency(
    model: &Path,
    subsystem: Option<&str>,
    specs: Option<&Path>,
) -> Result<(), Failure> {
    let m = load_model(model).map_err(Failure::input)?;
    let mut out = String::from("property,classification,witnesses\n");
    for c in classify_all(&m) {
        let w: Vec<String> = c
            .witnesses
            .iter()
            .map(|(f, p)| format!("{} {:?}", m.function_name(*f), p).to_lowercase())
            .collect();
        out.push_str(&format!("{},{},{}\n", c.property, c.kind, w.join("; ")));
    }
    print!("{out}");
    let Some(name) = subsystem else { return Ok(()) };
    let specs =
        load_subsystem_specs(specs.expect("clap requires --subsystems")).map_err(Failure::input)?;
    // Earlier subsystems are folded first so later specs can name their
    // aggregates.
    let mut current = m.clone();
    for spec in &specs {
        let plan = plan_subsystem(&current, spec);
        if spec.name == name {
            return match plan {
                Ok(p) => {
                    println!("subsystem {name}: fully consistent");
                    for e in &p.externals {
                        let dir = match e.direction {
                            ExternalDirection::MaximizeIt => "maximize",
                            ExternalDirection::MinimizeIt => "minimize",
                        };
                        println!("external {} {dir} {}", e.column, e.definition);
                    }
                    for (col, _) in &p.handles {
                        println!("handle {col}");
                    }
                    Ok(())
                }
                Err(DecomposeError::InconsistentSubsystem { violations, .. }) => {
                    println!("subsystem {name}: not fully consistent");
                    for v in &violations {
                        println!(
                            "violation {} in {} ({:?})",
                            v.property,
                            current.function_name(v.function),
                            v.polarity
                        );
                    }
                    Err(Failure {
                        status: 1,
                        kind: "inconsistent",
                        message: format!("subsystem `{name}` is not fully consistent"),
                    })
                }
                Err(e) => Err(Failure::input(e)),
            };
        }
        let plan = plan.map_err(Failure::input)?;
        let (front, _) = solve_plan(&plan, &CpSolver::default(), &DecomposeConfig::default())
            .map_err(Failure::input)?;
        let agg = build_aggregate(&front, &plan).map_err(Failure::internal)?;
        current = crate::decompose::compose(&current, &plan, &agg).map_err(Failure::internal)?;
    }
    Err(Failure::usage(format!("no subsystem named `{name}`")))
}

fn write_aggregates(
    m: &SystemModel,
    specs: &[crate::decompose::SubsystemSpec],
    dir: &Path,
    cli: &Cli,
    cfg: &DecomposeConfig,
) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let mut current = m.clone();
    let mut cache = SubsystemCache::new();
    for spec in specs {
        let plan = plan_subsystem(&current, spec).map_err(Failure::input)?;
        let (front, _) = cache
            .front_for(&plan, &solver(cli), cfg)
            .map_err(Failure::internal)?;
        let agg = build_aggregate(&front, &plan).map_err(Failure::internal)?;
        write_aggregate(&agg, dir).map_err(Failure::internal)?;
        current = crate::decompose::compose(&current, &plan, &agg).map_err(Failure::internal)?;
    }
    Ok(())
}

/// Catalog sizes of the sweep: 1, 2, 5 times powers of ten up to `scale`.
pub fn sweep_sizes(scale: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut base = 10;
    while base <= scale {
        for k in [1, 2, 5] {
            if k * base <= scale {
                out.push(k * base);
            }
        }
        base *= 10;
    }
    if out.last() != Some(&scale) && scale > 0 {
        out.push(scale);
    }
    out
}

fn benchmark(
    scale: usize,
    variant: QuadVariant,
    cli: &Cli,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if scale == 0 {
        return Err(Failure::usage("--scale must be positive"));
    }
    let seed = cli.seed.unwrap_or(0);
    let params = variant.params();
    let mut table = format!(
        "# benchmark variant={} scale={scale} seed={seed} threads={}\ncatalog_size,combinations,wall_seconds,front_size\n",
        variant.name(),
        cli.threads
    );
    for size in sweep_sizes(scale) {
        let cats: HashMap<_, _> =
            generate_catalogs(variant, &params, size, seed).map_err(Failure::input)?;
        let m = crate::bench::build_quadcopter_model(&cats, variant, &params)
            .map_err(Failure::internal)?;
        let engine = EngineConfig {
            threads: cli.threads,
            max_points: None,
        };
        let t = Instant::now();
        let front_size = if variant.is_component_level() {
            let cfg = DecomposeConfig {
                engine,
                ..DecomposeConfig::default()
            };
            let mut cache = SubsystemCache::new();
            match decompose_solve_traced(&m, &quad_subsystems(), &solver(cli), &cfg, &mut cache) {
                Ok((f, _)) => f.len(),
                Err(DecomposeError::Front(FrontError::InfeasibleModel))
                | Err(DecomposeError::EmptyFront(_)) => 0,
                Err(e) => return Err(Failure::internal(e)),
            }
        } else {
            match compute_front_traced(&m, &solver(cli), &engine) {
                Ok((f, _)) => f.len(),
                Err(FrontError::InfeasibleModel) => 0,
                Err(e) => return Err(Failure::internal(e)),
            }
        };
        let secs = t.elapsed().as_secs_f64();
        table.push_str(&format!(
            "{size},{},{secs:.6},{front_size}\n",
            m.combinations()
        ));
    }
    match out {
        Some(p) => fs::write(p, table).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep() {
        assert_eq!(sweep_sizes(100), vec![10, 20, 50, 100]);
        assert_eq!(sweep_sizes(300), vec![10, 20, 50, 100, 200, 300]);
        assert_eq!(sweep_sizes(5), vec![5]);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let code = main_with_args(["compsel", "solve", "--bogus"].map(String::from));
        assert_eq!(code, ExitCode::from(2));
    }
}
