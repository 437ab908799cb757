mod common;

use compsel::consistency::is_fully_consistent;
use compsel::decompose::{
    build_aggregate, decompose_solve, plan_subsystem, solve_plan, DecomposeConfig,
    ExternalDirection,
};
use compsel::model::{evaluate, is_feasible, objective_vector, Assignment};
use compsel::oracle::{brute_force_front, EnumerationBudget};
use compsel::pareto::{compute_front, dominates, EngineConfig, ObjectiveVector};
use compsel::solver::CpSolver;

#[test]
fn random_consistent_instances_are_fully_consistent() {
    for seed in 0..50 {
        let inst = common::consistent_instance(seed);
        let (ok, v) =
            is_fully_consistent(&inst.model, inst.spec.variables.iter().map(String::as_str))
                .unwrap();
        assert!(ok, "seed {seed}: {v:?}");
    }
}

#[test]
fn decomposition_matches_flat_and_brute_force() {
    let solver = CpSolver::default();
    for seed in 0..40 {
        let inst = common::consistent_instance(seed);
        let flat =
            compute_front(&inst.model, &solver, &EngineConfig::default()).map(|f| f.vectors());
        let brute = brute_force_front(&inst.model, EnumerationBudget::default())
            .unwrap()
            .vectors();
        if brute.is_empty() {
            assert!(flat.is_err());
            continue;
        }
        assert_eq!(flat.as_ref().unwrap(), &brute, "seed {seed}");
        let dec = decompose_solve(
            &inst.model,
            &[inst.spec.clone()],
            &solver,
            &DecomposeConfig::default(),
        );
        let dec = match dec {
            Ok(f) => f,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        assert_eq!(dec.vectors(), brute, "seed {seed}");
        for p in dec.points() {
            assert!(is_feasible(&inst.model, &p.assignment).unwrap());
        }
    }
}

/// Every global front vector is reached by some solution whose subsystem
/// part is a subsystem front point.
#[test]
fn optimality_witnesses_exist() {
    let solver = CpSolver::default();
    for seed in 100..120 {
        let inst = common::consistent_instance(seed);
        let m = &inst.model;
        let Ok(plan) = plan_subsystem(m, &inst.spec) else {
            continue;
        };
        let Ok((sub_front, _)) = solve_plan(&plan, &solver, &DecomposeConfig::default()) else {
            continue;
        };
        let agg = build_aggregate(&sub_front, &plan).unwrap();
        let brute = brute_force_front(m, EnumerationBudget::default()).unwrap();
        // Enumerate complements combined with each aggregate row.
        for target in brute.points() {
            let rest: Vec<&str> = m
                .variable_names()
                .filter(|v| !inst.spec.variables.iter().any(|s| s == v))
                .collect();
            let mut found = false;
            for prov in &agg.provenance {
                let mut a: Assignment = prov.clone();
                for v in &rest {
                    a.set(*v, target.assignment.get(v).unwrap());
                }
                if is_feasible(m, &a).unwrap()
                    && objective_vector(m, &a).unwrap() == target.objectives.0
                {
                    found = true;
                    break;
                }
            }
            if !found {
                // The witness may need a different complement; search it.
                found = witness_with_any_complement(m, &agg.provenance, &rest, &target.objectives);
            }
            assert!(found, "seed {seed}: no witness for {:?}", target.objectives);
        }
    }
}

fn witness_with_any_complement(
    m: &compsel::model::SystemModel,
    provenance: &[Assignment],
    rest: &[&str],
    target: &ObjectiveVector,
) -> bool {
    let cats: Vec<_> = rest.iter().map(|v| m.catalog(v).unwrap()).collect();
    let mut idx = vec![0usize; rest.len()];
    loop {
        for prov in provenance {
            let mut a = prov.clone();
            for (k, v) in rest.iter().enumerate() {
                a.set(*v, cats[k].components[idx[k]].id.clone());
            }
            if is_feasible(m, &a).unwrap() && objective_vector(m, &a).unwrap() == target.0 {
                return true;
            }
        }
        let mut i = 0;
        loop {
            if i == rest.len() {
                return false;
            }
            idx[i] += 1;
            if idx[i] < cats[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn handle_partitions_match_brute_force() {
    let solver = CpSolver::default();
    for seed in 0..20 {
        let inst = common::handle_instance(seed);
        let brute = brute_force_front(&inst.model, EnumerationBudget::default())
            .unwrap()
            .vectors();
        let dec = decompose_solve(
            &inst.model,
            &[inst.spec.clone()],
            &solver,
            &DecomposeConfig::default(),
        );
        match dec {
            Ok(f) => assert_eq!(f.vectors(), brute, "seed {seed}"),
            Err(e) => assert!(brute.is_empty(), "seed {seed}: {e}"),
        }
    }
}

#[test]
fn aggregates_are_non_dominated_per_partition() {
    let solver = CpSolver::default();
    for seed in 0..20 {
        let inst = common::handle_instance(seed);
        let plan = plan_subsystem(&inst.model, &inst.spec).unwrap();
        let Ok((front, _)) = solve_plan(&plan, &solver, &DecomposeConfig::default()) else {
            continue;
        };
        let agg = build_aggregate(&front, &plan).unwrap();
        let n_ext = plan.externals.len();
        let canon: Vec<(Vec<f64>, Vec<f64>)> = agg
            .catalog
            .components
            .iter()
            .map(|c| {
                let ext = plan
                    .externals
                    .iter()
                    .zip(&c.values)
                    .map(|(e, &v)| {
                        if e.direction == ExternalDirection::MaximizeIt {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect();
                (ext, c.values[n_ext..].to_vec())
            })
            .collect();
        for (i, a) in canon.iter().enumerate() {
            for (j, b) in canon.iter().enumerate() {
                if i != j && a.1 == b.1 {
                    let (x, y) = (ObjectiveVector(a.0.clone()), ObjectiveVector(b.0.clone()));
                    assert!(!dominates(&x, &y).unwrap() && x != y, "seed {seed}");
                }
            }
        }
        // Provenance re-evaluates to the row values.
        for (c, prov) in agg.catalog.components.iter().zip(&agg.provenance) {
            for (e, &v) in plan.externals.iter().zip(&c.values) {
                assert_eq!(evaluate(&e.definition, prov, &inst.model).unwrap(), v);
            }
        }
    }
}
