//! One line per acceptance criterion, `PASS` or `FAIL` with measurements.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use compsel::bench::{
    benchmark_generator_specs, build_fleet_model, build_quadcopter_model, fleet_pipeline,
    generated_model, prefilter_designs, quad_subsystems, read_designs, read_packages,
    velocity_catalog, FleetParams, QuadVariant,
};
use compsel::consistency::{
    polarity, value_ranges, verify_polarity_exhaustive, FunctionId, Polarity,
};
use compsel::decompose::{
    decompose_solve, decompose_solve_traced, DecomposeConfig, DecomposeError, SubsystemCache,
};
use compsel::io::{generate_catalog, load_model};
use compsel::model::{is_feasible, Catalog, Objective, SystemModel};
use compsel::oracle::{brute_force_fleet_front, brute_force_front, EnumerationBudget};
use compsel::pareto::{compute_front, EngineConfig, FrontError, ParetoFront};
use compsel::solver::{solve_lexicographic, CpSolver, SolveError, SolverConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

/// Front vectors, with an infeasible model as the empty set.
fn vectors(r: Result<ParetoFront, FrontError>) -> Vec<Vec<f64>> {
    match r {
        Ok(f) => f.vectors(),
        Err(FrontError::InfeasibleModel) => Vec::new(),
        Err(e) => panic!("{e}"),
    }
}

fn dec_vectors(r: Result<ParetoFront, DecomposeError>) -> Result<Vec<Vec<f64>>, DecomposeError> {
    match r {
        Ok(f) => Ok(f.vectors()),
        Err(DecomposeError::Front(FrontError::InfeasibleModel))
        | Err(DecomposeError::EmptyFront(_)) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let solver = CpSolver::default();
    let mut bad = Vec::new();
    let mut points = 0;
    for seed in 0..200 {
        let m = common::consistent_instance(seed).model;
        let cp = vectors(compute_front(&m, &solver, &EngineConfig::default()));
        let bf = brute_force_front(&m, EnumerationBudget::default())
            .unwrap()
            .vectors();
        points += bf.len();
        if cp != bf {
            bad.push(seed);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 120.0,
        format!("200 models, {points} front points, mismatches {bad:?}, {secs:.1} s"),
    )
}

fn chain_models() -> Vec<SystemModel> {
    let mut out = Vec::new();
    for seed in 1..=6 {
        out.push(generated_model(QuadVariant::ComponentLevel, 2, seed).unwrap());
        out.push(generated_model(QuadVariant::Delivery, 3, seed).unwrap());
    }
    out
}

fn decomposition_validation() -> Outcome {
    let solver = CpSolver::default();
    let cfg = DecomposeConfig::default();
    let mut bad = Vec::new();
    let mut checked = 0;
    for seed in 0..200 {
        let inst = common::consistent_instance(seed);
        let flat = vectors(compute_front(
            &inst.model,
            &solver,
            &EngineConfig::default(),
        ));
        let front = decompose_solve(&inst.model, &[inst.spec.clone()], &solver, &cfg);
        let feasible = front
            .as_ref()
            .map(|f| {
                f.points()
                    .iter()
                    .all(|p| is_feasible(&inst.model, &p.assignment).unwrap())
            })
            .unwrap_or(true);
        match dec_vectors(front) {
            Ok(v) if v == flat && feasible => checked += 1,
            _ => bad.push(format!("random {seed}")),
        }
    }
    let mut chain_points = 0;
    for (i, m) in chain_models().iter().enumerate() {
        assert!(m.combinations() <= 1_000_000);
        let flat = vectors(compute_front(m, &solver, &EngineConfig::default()));
        let front = decompose_solve(m, &quad_subsystems(), &solver, &cfg);
        let feasible = front
            .as_ref()
            .map(|f| {
                f.points()
                    .iter()
                    .all(|p| is_feasible(m, &p.assignment).unwrap())
            })
            .unwrap_or(true);
        match dec_vectors(front) {
            Ok(v) if v == flat && feasible => {
                chain_points += v.len();
                checked += 1;
            }
            _ => bad.push(format!("chain {i}")),
        }
    }
    outcome(
        bad.is_empty() && chain_points > 0,
        format!(
            "{checked} models equal (chain fronts total {chain_points} points), failures {bad:?}"
        ),
    )
}

fn partition_correctness() -> Outcome {
    let solver = CpSolver::default();
    let mut bad = Vec::new();
    let mut points = 0;
    for seed in 0..50 {
        let inst = common::handle_instance(seed);
        let bf = brute_force_front(&inst.model, EnumerationBudget::default())
            .unwrap()
            .vectors();
        points += bf.len();
        match dec_vectors(decompose_solve(
            &inst.model,
            &[inst.spec.clone()],
            &solver,
            &DecomposeConfig::default(),
        )) {
            Ok(v) if v == bf => {}
            _ => bad.push(seed),
        }
    }
    outcome(
        bad.is_empty(),
        format!("50 handle instances, {points} front points, mismatches {bad:?}"),
    )
}

fn classifier_soundness() -> Outcome {
    let mut certified = 0;
    let mut violations = Vec::new();
    for seed in 0..500 {
        let mut r = common::rng(0xc1a55 + seed);
        let n = r.gen_range(1..=3);
        let vars: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
        let catalogs: Vec<Catalog> = vars
            .iter()
            .map(|v| {
                let rows = r.gen_range(2..=4);
                common::random_catalog(&mut r, v, rows, 3)
            })
            .collect();
        let e = common::random_expr(&mut r, &vars, 3);
        let m =
            SystemModel::new(catalogs, vec![], vec![Objective::minimize("f", e.clone())]).unwrap();
        let ranges = value_ranges(&m);
        let mut keys: Vec<_> = e.property_refs().into_iter().cloned().collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            let claimed = polarity(&e, &k, &ranges);
            if !matches!(claimed, Polarity::Monotone | Polarity::Antitone) {
                continue;
            }
            certified += 1;
            let actual =
                verify_polarity_exhaustive(&m, FunctionId::Objective(0), &k, 1_000_000).unwrap();
            if !actual.satisfies(claimed) {
                violations.push(format!("seed {seed} {k}: {claimed} vs {actual}"));
            }
        }
    }
    outcome(
        violations.is_empty() && certified > 0,
        format!("500 expressions, {certified} certified occurrences, violations {violations:?}"),
    )
}

fn quad_scaling() -> Outcome {
    let m = generated_model(QuadVariant::SingleObjective, 1000, 1).unwrap();
    let t = Instant::now();
    let sol = solve_lexicographic(&m, &[], &SolverConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let Some(sol) = sol else {
        return outcome(false, "no feasible design");
    };
    let ok = is_feasible(&m, &sol.assignment).unwrap();
    outcome(
        ok && secs < 60.0,
        format!(
            "10^3 per type ({:.1e} combinations), velocity {} m/s, {} nodes, {secs:.2} s",
            m.combinations() as f64,
            -sol.objectives.0[0],
            sol.stats.nodes_expanded
        ),
    )
}

/// The shipped delivery model with ESC and motor catalogs at the published
/// sizes (1000 and 250 parts) and small quadcopter-level catalogs.
fn speedup_model() -> SystemModel {
    let v = QuadVariant::Delivery;
    let params = v.params();
    let mut cats: HashMap<String, Catalog> = HashMap::new();
    for mut spec in benchmark_generator_specs(v, 1) {
        if !["HB", "MC", "VR", "P", "M"].contains(&spec.variable.as_str()) {
            spec.count = 10;
        }
        cats.insert(spec.variable.clone(), generate_catalog(&spec).unwrap());
    }
    cats.insert("V".into(), velocity_catalog(params.velocity_levels));
    let text = fs::read_to_string(models_dir().join("delivery/delivery.model")).unwrap();
    let shipped = compsel::parse::parse_model(&text, &cats).unwrap();
    assert_eq!(
        shipped.constraints(),
        build_quadcopter_model(&cats, v, &params)
            .unwrap()
            .constraints()
    );
    shipped
}

fn decomposition_speedup() -> Outcome {
    let m = speedup_model();
    let solver = CpSolver::default();
    let t = Instant::now();
    let mut cache = SubsystemCache::new();
    let (front, trace) = decompose_solve_traced(
        &m,
        &quad_subsystems(),
        &solver,
        &DecomposeConfig::default(),
        &mut cache,
    )
    .unwrap();
    let dec = t.elapsed();
    // The flat solve gets 1.5 times the decomposed time; running out of it
    // already settles the comparison.
    let limit = dec.mul_f64(1.5).max(Duration::from_secs(5));
    let flat_solver = CpSolver::new(SolverConfig {
        deadline: Some(Instant::now() + limit),
        ..SolverConfig::default()
    });
    let t = Instant::now();
    let flat = compute_front(&m, &flat_solver, &EngineConfig::default());
    let flat_time = t.elapsed();
    let stages: Vec<String> = trace
        .stages
        .iter()
        .map(|s| {
            format!(
                "{} {} pts {:.1} s",
                s.subsystem,
                s.front_size,
                s.wall_time.as_secs_f64()
            )
        })
        .collect();
    let head = format!(
        "{:.1e} combinations, decomposed {:.1} s ({}; final {} pts)",
        m.combinations() as f64,
        dec.as_secs_f64(),
        stages.join(", "),
        front.len()
    );
    match flat {
        Err(FrontError::Solve(SolveError::DeadlineReached)) => outcome(
            true,
            format!(
                "{head}, flat stopped unfinished at {:.1} s, ratio decomposed/flat < {:.2}",
                flat_time.as_secs_f64(),
                dec.as_secs_f64() / flat_time.as_secs_f64()
            ),
        ),
        Ok(f) => {
            let ratio = dec.as_secs_f64() / flat_time.as_secs_f64();
            outcome(
                ratio <= 1.0 && f.vectors() == front.vectors(),
                format!(
                    "{head}, flat {:.1} s, ratio decomposed/flat {ratio:.2}",
                    flat_time.as_secs_f64()
                ),
            )
        }
        Err(e) => outcome(false, format!("{head}, flat failed: {e}")),
    }
}

fn fleet_correctness() -> Outcome {
    let dir = models_dir().join("fleet");
    let designs = read_designs(fs::File::open(dir.join("quad_front.csv")).unwrap()).unwrap();
    let packages = read_packages(fs::File::open(dir.join("packages.csv")).unwrap()).unwrap();
    let solver = CpSolver::default();

    let t = Instant::now();
    let tiny_pkgs = &packages[..4];
    let two: Vec<_> = prefilter_designs(&designs, tiny_pkgs)
        .into_iter()
        .take(2)
        .collect();
    let params = FleetParams::new(2, 2);
    let fleet = build_fleet_model(&two, tiny_pkgs, &params).unwrap();
    let cp = vectors(compute_front(
        &fleet.model,
        &solver,
        &EngineConfig::default(),
    ));
    let bf =
        brute_force_fleet_front(&two, tiny_pkgs, &params, EnumerationBudget::default()).unwrap();
    let tiny_secs = t.elapsed().as_secs_f64();
    let tiny_ok = cp == bf && !cp.is_empty() && tiny_secs < 10.0;

    let t = Instant::now();
    let text = fs::read_to_string(dir.join("params.toml")).unwrap();
    let params = FleetParams::from_toml(&text).unwrap();
    let kept = prefilter_designs(&designs, &packages);
    let fleet = build_fleet_model(&kept, &packages, &params).unwrap();
    let front = compute_front(&fleet.model, &solver, &EngineConfig::default()).unwrap();
    let desk_secs = t.elapsed().as_secs_f64();
    let consistent = front.points().iter().all(|p| {
        let s = fleet.schedule_of(&p.assignment).unwrap();
        let (makespan, cost) = fleet.evaluate(&s).unwrap();
        p.objectives.0 == vec![makespan, cost]
    });
    let desk_ok = front.is_mutually_non_dominated() && consistent && !front.is_empty();
    outcome(
        tiny_ok && desk_ok,
        format!(
            "tiny: {} points equal to enumeration {}, {tiny_secs:.2} s; {} quads x {} packages over {} designs: {} points, {desk_secs:.1} s",
            cp.len(),
            cp == bf,
            params.fleet_size,
            packages.len(),
            kept.len(),
            front.len()
        ),
    )
}

fn replica_reuse() -> Outcome {
    let quad = load_model(&models_dir().join("delivery/delivery.model")).unwrap();
    let packages =
        read_packages(fs::File::open(models_dir().join("fleet/packages.csv")).unwrap()).unwrap();
    let solver = CpSolver::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [1, 2, 4] {
        let params = FleetParams::new(n, n.min(2));
        let mut cache = SubsystemCache::new();
        let quad_front = |m: &SystemModel| {
            decompose_solve(m, &quad_subsystems(), &solver, &DecomposeConfig::default())
        };
        let fleet_front =
            |m: &SystemModel| Ok(compute_front(m, &solver, &EngineConfig::default())?);
        let sol = fleet_pipeline(
            &quad,
            &packages[..6],
            &params,
            &mut cache,
            &quad_front,
            &fleet_front,
        )
        .unwrap();
        ok &= cache.solves() == 1 && !sol.front.is_empty();
        lines.push(format!(
            "{n} slots: {} quadcopter front computation(s)",
            cache.solves()
        ));
    }
    outcome(ok, lines.join(", "))
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_compsel"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn determinism() -> Outcome {
    let models = models_dir();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let p = |name: &str| d.path().join(name).to_str().unwrap().to_string();
        let spec = models.join("delivery/gen/hbridge.toml");
        run_cli(&[
            "--seed",
            "7",
            "gen-catalog",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            &p("hb.csv"),
            "--count",
            "200",
        ]);
        let multi = models.join("quadcopter/multi.model");
        run_cli(&[
            "solve",
            "--model",
            multi.to_str().unwrap(),
            "--out",
            &p("multi.csv"),
        ]);
        let comp = models.join("component/component.model");
        let subs = models.join("component/subsystems.toml");
        run_cli(&[
            "decompose-solve",
            "--model",
            comp.to_str().unwrap(),
            "--subsystems",
            subs.to_str().unwrap(),
            "--out",
            &p("component.csv"),
        ]);
    }
    let files = [
        "hb.csv",
        "multi.csv",
        "multi.csv.provenance.json",
        "component.csv",
        "component.csv.provenance.json",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            fs::read(dirs[0].path().join(f)).unwrap() != fs::read(dirs[1].path().join(f)).unwrap()
        })
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} output files compared across two runs, differing {differing:?}",
            files.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle front equivalence", oracle_equivalence),
        ("decomposition equals flat", decomposition_validation),
        ("handle partitions", partition_correctness),
        ("classifier soundness", classifier_soundness),
        ("quadcopter scaling", quad_scaling),
        ("decomposition speedup", decomposition_speedup),
        ("fleet correctness", fleet_correctness),
        ("replicated subsystem reuse", replica_reuse),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {} ({name}): {} | {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
