//! Seeded random instances shared by the integration tests.
//!
//! Catalog values are small integers so sums and products are exact in
//! floating point and fronts can be compared without tolerance.
#![allow(dead_code)]

use compsel::decompose::SubsystemSpec;
use compsel::model::{Catalog, Component, Constraint, Expr, Objective, PropertyKey, SystemModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROPS: [&str; 5] = ["cost", "load", "supply", "perf", "k"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn var_name(i: usize) -> String {
    format!("V{i}")
}

/// Catalog with integer columns `cost, load, supply, perf, k`; `k` takes at
/// most `k_values` distinct values.
pub fn random_catalog(rng: &mut ChaCha8Rng, var: &str, rows: usize, k_values: u32) -> Catalog {
    let comps = (0..rows)
        .map(|r| {
            Component::new(
                format!("{}_{r}", var.to_lowercase()),
                vec![
                    rng.gen_range(1..=60) as f64,
                    rng.gen_range(1..=20) as f64,
                    rng.gen_range(1..=30) as f64,
                    rng.gen_range(1..=40) as f64,
                    rng.gen_range(1..=k_values) as f64,
                ],
            )
        })
        .collect();
    Catalog::new(var, PROPS.iter().map(|s| s.to_string()).collect(), comps).unwrap()
}

fn p(v: &str, prop: &str) -> Expr {
    Expr::prop(v, prop)
}

/// Catalog sizes in `lo..=hi` shrunk until the product is at most `cap`.
pub fn sizes(rng: &mut ChaCha8Rng, n: usize, lo: usize, hi: usize, cap: u128) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    while s.iter().map(|&x| x as u128).product::<u128>() > cap {
        let i = (0..n).max_by_key(|&i| s[i]).unwrap();
        s[i] -= 1;
    }
    s
}

pub struct Instance {
    pub model: SystemModel,
    pub spec: SubsystemSpec,
}

/// A model in which every property is consistent: `load` only grows left
/// sides and minimized objectives, `supply` and `perf` only grow right sides
/// and maximized objectives, `cost` is minimized. Comes with a random strict
/// subsystem whose cost terms are collapsed by a rewrite.
pub fn consistent_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.gen_range(3..=5);
    let sz = sizes(&mut r, n, 10, 30, 1_000_000);
    let vars: Vec<String> = (0..n).map(var_name).collect();
    let catalogs: Vec<Catalog> = vars
        .iter()
        .zip(&sz)
        .map(|(v, &s)| random_catalog(&mut r, v, s, 4))
        .collect();

    let mut constraints = Vec::new();
    for c in 0..r.gen_range(1..=3) {
        let mut lhs_vars = vars.clone();
        lhs_vars.shuffle(&mut r);
        lhs_vars.truncate(r.gen_range(1..=n.min(3)));
        let mut rhs_vars = vars.clone();
        rhs_vars.shuffle(&mut r);
        rhs_vars.truncate(r.gen_range(1..=2));
        let lhs = if r.gen_bool(0.3) && lhs_vars.len() >= 2 {
            p(&lhs_vars[0], "load") * p(&lhs_vars[1], "load")
        } else {
            Expr::sum(lhs_vars.iter().map(|v| p(v, "load")))
        };
        let rhs = match r.gen_range(0..3) {
            0 => Expr::sum(rhs_vars.iter().map(|v| p(v, "supply"))) * 2.0,
            1 => Expr::min(rhs_vars.iter().map(|v| p(v, "supply") * 3.0).collect()),
            _ => Expr::sum(rhs_vars.iter().map(|v| p(v, "supply") + p(v, "perf"))),
        };
        constraints.push(Constraint::less_eq(format!("c{c}"), lhs, rhs));
    }
    let budget: f64 = 25.0 * n as f64 + r.gen_range(0..40) as f64;
    if r.gen_bool(0.5) {
        constraints.push(Constraint::less_eq(
            "budget",
            Expr::sum(vars.iter().map(|v| p(v, "cost"))),
            Expr::Const(budget),
        ));
    }

    let mut objectives = vec![Objective::minimize(
        "cost",
        Expr::sum(vars.iter().map(|v| p(v, "cost"))),
    )];
    let mut perf_vars = vars.clone();
    perf_vars.shuffle(&mut r);
    perf_vars.truncate(r.gen_range(2..=n));
    objectives.push(if r.gen_bool(0.5) {
        Objective::maximize("perf", Expr::sum(perf_vars.iter().map(|v| p(v, "perf"))))
    } else {
        Objective::maximize(
            "perf",
            Expr::min(perf_vars.iter().map(|v| p(v, "perf")).collect()),
        )
    });
    if r.gen_bool(0.5) {
        objectives.push(Objective::minimize(
            "load",
            Expr::sum(vars.iter().map(|v| p(v, "load"))),
        ));
    }
    let model = SystemModel::new(catalogs, constraints, objectives).unwrap();

    let mut sub = vars.clone();
    sub.shuffle(&mut r);
    sub.truncate(r.gen_range(1..n));
    sub.sort();
    let mut spec = SubsystemSpec::new("sub", sub.clone());
    if sub.len() >= 2 {
        spec = spec.with_rewrite("sub_cost", Expr::sum(sub.iter().map(|v| p(v, "cost"))));
    }
    Instance { model, spec }
}

/// A consistent instance plus an equality `X.k == Y.k` across the subsystem
/// boundary; the subsystem declares `X.k` as a handle.
pub fn handle_instance(seed: u64) -> Instance {
    let mut r = rng(seed ^ 0x5eed);
    let k_values = r.gen_range(2..=8);
    let base = consistent_instance(seed);
    let x_var = base.spec.variables[0].clone();
    let y_var = base
        .model
        .variable_names()
        .find(|v| !base.spec.variables.iter().any(|s| s == v))
        .unwrap()
        .to_string();
    let catalogs: Vec<Catalog> = base
        .model
        .catalogs()
        .iter()
        .map(|c| {
            let comps = c
                .components
                .iter()
                .map(|comp| {
                    let mut v = comp.values.clone();
                    v[4] = r.gen_range(1..=k_values) as f64;
                    Component::new(comp.id.clone(), v)
                })
                .collect();
            Catalog::new(c.variable.clone(), c.properties.clone(), comps).unwrap()
        })
        .collect();
    let mut constraints = base.model.constraints().to_vec();
    constraints.push(Constraint::equal("match_k", p(&x_var, "k"), p(&y_var, "k")));
    let model = SystemModel::new(catalogs, constraints, base.model.objectives().to_vec()).unwrap();
    let spec = base.spec.with_handle(PropertyKey::new(x_var, "k"));
    Instance { model, spec }
}

/// A model with arbitrary (possibly non-monotone) expressions, equalities
/// and divisions by strictly positive columns, for solver differential tests.
pub fn wild_instance(seed: u64) -> SystemModel {
    let mut r = rng(seed);
    let n = r.gen_range(2..=4);
    let sz = sizes(&mut r, n, 2, 9, 20_000);
    let vars: Vec<String> = (0..n).map(var_name).collect();
    let catalogs: Vec<Catalog> = vars
        .iter()
        .zip(&sz)
        .map(|(v, &s)| random_catalog(&mut r, v, s, 3))
        .collect();
    let mut constraints = Vec::new();
    for c in 0..r.gen_range(0..=3) {
        let lhs = random_expr(&mut r, &vars, 2);
        let rhs = random_expr(&mut r, &vars, 2);
        constraints.push(if r.gen_bool(0.15) {
            Constraint::equal(
                format!("c{c}"),
                p(&vars[0], "k"),
                p(vars.last().unwrap(), "k"),
            )
        } else {
            Constraint::less_eq(format!("c{c}"), lhs, rhs)
        });
    }
    let objectives = (0..r.gen_range(1..=3))
        .map(|i| {
            let e = random_expr(&mut r, &vars, 3);
            if r.gen_bool(0.5) {
                Objective::minimize(format!("f{i}"), e)
            } else {
                Objective::maximize(format!("f{i}"), e)
            }
        })
        .collect();
    SystemModel::new(catalogs, constraints, objectives).unwrap()
}

/// Random expression over the catalog columns. Divisors are strictly
/// positive columns so evaluation never divides by zero.
pub fn random_expr(r: &mut ChaCha8Rng, vars: &[String], depth: u32) -> Expr {
    let leaf = |r: &mut ChaCha8Rng| {
        if r.gen_bool(0.2) {
            Expr::Const(r.gen_range(-5..=5) as f64)
        } else {
            let v = vars.choose(r).unwrap();
            p(v, PROPS[r.gen_range(0..4)])
        }
    };
    if depth == 0 || r.gen_bool(0.25) {
        return leaf(r);
    }
    let a = random_expr(r, vars, depth - 1);
    match r.gen_range(0..7) {
        0 => -a,
        1 => a + random_expr(r, vars, depth - 1),
        2 => a - random_expr(r, vars, depth - 1),
        3 => a * random_expr(r, vars, depth - 1),
        4 => {
            let v = vars.choose(r).unwrap();
            a / p(v, PROPS[r.gen_range(0..4)])
        }
        5 => Expr::min(vec![a, random_expr(r, vars, depth - 1)]),
        _ => Expr::max(vec![a, random_expr(r, vars, depth - 1)]),
    }
}
