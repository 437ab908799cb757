//! Fleet design and package delivery.
//!
//! A fleet has `fleet_size` quadcopter slots. Every slot picks a design from
//! the quadcopter Pareto front and every package is assigned to one slot.
//! Packages go to distinct locations and each delivery is a round trip from
//! the depot, so a slot's completion time is the sum of `2 * distance` over
//! its packages divided by the design velocity; order within a slot does not
//! matter. Objectives are the makespan and the fleet cost, where every
//! design beyond the first adds `design_penalty`.
//!
//! As a [`SystemModel`], slots are variables `Q1..QN` over the designs and
//! packages are variables `D1..Dn` over slots (one-hot columns `at1..atN`).
//! Slots are ordered by design index, which removes permutations of equal
//! fleets and makes the number of distinct designs a sum of `min(1, step)`.

use std::collections::BTreeSet;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

use crate::decompose::{DecomposeError, SubsystemCache};
use crate::io::catalog::{read_catalog, CatalogError};
use crate::model::{
    Assignment, Catalog, Component, Constraint, Expr, ModelError, Objective, SystemModel,
};
use crate::pareto::ParetoFront;

pub const DEFAULT_DESIGN_PENALTY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub id: String,
    pub velocity: f64,
    pub payload: f64,
    pub cost: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Package {
    pub id: String,
    pub mass: f64,
    /// Distance from the depot.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FleetObjectives {
    /// Makespan and cost.
    Multi,
    /// Cost only.
    Cost,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetParams {
    pub fleet_size: usize,
    pub max_designs: usize,
    #[serde(default = "default_penalty")]
    pub design_penalty: f64,
    #[serde(default = "default_objectives")]
    pub objectives: FleetObjectives,
}

fn default_penalty() -> f64 {
    DEFAULT_DESIGN_PENALTY
}

fn default_objectives() -> FleetObjectives {
    FleetObjectives::Multi
}

impl FleetParams {
    pub fn new(fleet_size: usize, max_designs: usize) -> Self {
        FleetParams {
            fleet_size,
            max_designs,
            design_penalty: DEFAULT_DESIGN_PENALTY,
            objectives: FleetObjectives::Multi,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, FleetError> {
        toml::from_str(text).map_err(|e| FleetError::Params(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("no quadcopter designs")]
    NoDesigns,
    #[error("no packages")]
    NoPackages,
    #[error("package `{package}` weighs {mass}, more than any design carries ({best})")]
    InfeasiblePayload {
        package: String,
        mass: f64,
        best: f64,
    },
    #[error("package `{package}` exceeds the payload of slot {slot}")]
    CapacityViolation { package: String, slot: usize },
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("fleet parameters: {0}")]
    Params(String),
    #[error("quadcopter front lacks objective `{0}`")]
    MissingObjective(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Designs from a quadcopter front whose model has objectives named
/// `velocity`, `payload`, `cost` and `mass`. Ids are `d1, d2, ..` in
/// lexicographic order of the front.
pub fn designs_from_front(
    front: &ParetoFront,
    quad: &SystemModel,
) -> Result<Vec<Design>, FleetError> {
    let pos = |name: &str| {
        quad.objectives()
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| FleetError::MissingObjective(name.to_string()))
    };
    let (iv, ip, ic, im) = (
        pos("velocity")?,
        pos("payload")?,
        pos("cost")?,
        pos("mass")?,
    );
    let user = |i: usize, p: &crate::pareto::ParetoPoint| {
        quad.objectives()[i].direction.canonical(p.objectives.0[i]) + 0.0
    };
    Ok(front
        .sorted()
        .into_iter()
        .enumerate()
        .map(|(k, p)| Design {
            id: format!("d{}", k + 1),
            velocity: user(iv, p),
            payload: user(ip, p),
            cost: user(ic, p),
            mass: user(im, p),
        })
        .collect())
}

/// Designs from a front CSV as written by `solve`: columns `velocity`,
/// `payload`, `cost` and `mass` are used, others ignored.
pub fn read_designs(reader: impl Read) -> Result<Vec<Design>, FleetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(CatalogError::from)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FleetError::MissingObjective(name.to_string()))
    };
    let idx = [
        col("velocity")?,
        col("payload")?,
        col("cost")?,
        col("mass")?,
    ];
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(CatalogError::from)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 4];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            let cell = rec.get(i).unwrap_or("");
            *slot = cell.parse::<f64>().map_err(|_| CatalogError::Parse {
                line,
                column: header[i].to_string(),
                value: cell.to_string(),
            })?;
        }
        out.push(Design {
            id: format!("d{}", k + 1),
            velocity: v[0],
            payload: v[1],
            cost: v[2],
            mass: v[3],
        });
    }
    Ok(out)
}

/// Packages from CSV with columns `id,mass,distance`.
pub fn read_packages(reader: impl Read) -> Result<Vec<Package>, FleetError> {
    let c = read_catalog(reader, "packages")?;
    let col = |name: &str| {
        c.property_index(name)
            .ok_or_else(|| FleetError::Params(format!("packages file lacks column `{name}`")))
    };
    let (im, id) = (col("mass")?, col("distance")?);
    Ok(c.components
        .iter()
        .map(|r| Package {
            id: r.id.clone(),
            mass: r.values[im],
            distance: r.values[id],
        })
        .collect())
}

/// Drops designs that another design matches or beats in velocity, cost
/// and carried packages at once. Payload only matters through the heaviest
/// package it admits, and mass plays no part in the fleet objectives.
pub fn prefilter_designs(designs: &[Design], packages: &[Package]) -> Vec<Design> {
    let carries = |d: &Design| {
        packages
            .iter()
            .map(|p| p.mass)
            .filter(|&m| m <= d.payload)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let class: Vec<f64> = designs.iter().map(carries).collect();
    let mut out: Vec<Design> = Vec::new();
    for (i, d) in designs.iter().enumerate() {
        let dominated = designs.iter().enumerate().any(|(j, e)| {
            let beats = e.velocity >= d.velocity && class[j] >= class[i] && e.cost <= d.cost;
            let same = e.velocity == d.velocity && class[j] == class[i] && e.cost == d.cost;
            j != i && beats && (!same || j < i)
        });
        if !dominated {
            out.push(d.clone());
        }
    }
    out
}

/// The scheduling model and the data it was built from.
#[derive(Debug, Clone)]
pub struct FleetModel {
    pub model: SystemModel,
    pub designs: Vec<Design>,
    pub packages: Vec<Package>,
    pub params: FleetParams,
}

fn slot_var(s: usize) -> String {
    format!("Q{}", s + 1)
}

fn package_var(p: usize) -> String {
    format!("D{}", p + 1)
}

fn at(s: usize) -> String {
    format!("at{}", s + 1)
}

fn check_inputs(
    designs: &[Design],
    packages: &[Package],
    params: &FleetParams,
) -> Result<(), FleetError> {
    if designs.is_empty() {
        return Err(FleetError::NoDesigns);
    }
    if packages.is_empty() {
        return Err(FleetError::NoPackages);
    }
    if params.fleet_size == 0 || params.max_designs == 0 {
        return Err(FleetError::Params(
            "fleet_size and max_designs must be positive".into(),
        ));
    }
    let best = designs
        .iter()
        .map(|d| d.payload)
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(p) = packages.iter().find(|p| p.mass > best) {
        return Err(FleetError::InfeasiblePayload {
            package: p.id.clone(),
            mass: p.mass,
            best,
        });
    }
    Ok(())
}

/// Builds the scheduling model. Designs are used as given; see
/// [`prefilter_designs`] to shrink them first.
pub fn build_fleet_model(
    designs: &[Design],
    packages: &[Package],
    params: &FleetParams,
) -> Result<FleetModel, FleetError> {
    check_inputs(designs, packages, params)?;
    let n = params.fleet_size;
    let design_rows: Vec<Component> = designs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            Component::new(
                d.id.clone(),
                vec![(i + 1) as f64, d.velocity, d.payload, d.cost, d.mass],
            )
        })
        .collect();
    let props: Vec<String> = ["index", "velocity", "payload", "cost", "mass"]
        .map(String::from)
        .to_vec();
    let mut catalogs = Vec::new();
    for s in 0..n {
        catalogs.push(Catalog::new(
            slot_var(s),
            props.clone(),
            design_rows.clone(),
        )?);
    }
    let slot_rows: Vec<Component> = (0..n)
        .map(|s| {
            Component::new(
                format!("q{}", s + 1),
                (0..n).map(|t| if t == s { 1.0 } else { 0.0 }).collect(),
            )
        })
        .collect();
    let at_props: Vec<String> = (0..n).map(at).collect();
    for p in 0..packages.len() {
        catalogs.push(Catalog::new(
            package_var(p),
            at_props.clone(),
            slot_rows.clone(),
        )?);
    }

    let q = |s: usize, prop: &str| Expr::prop(slot_var(s), prop);
    let mut constraints = Vec::new();
    let lightest = designs
        .iter()
        .map(|d| d.payload)
        .fold(f64::INFINITY, f64::min);
    for (p, pkg) in packages.iter().enumerate() {
        if pkg.mass <= lightest {
            continue;
        }
        for s in 0..n {
            constraints.push(Constraint::less_eq(
                format!("payload_{}_{}", pkg.id, s + 1),
                Expr::Const(pkg.mass) * Expr::prop(package_var(p), at(s)),
                q(s, "payload"),
            ));
        }
    }
    for s in 1..n {
        constraints.push(Constraint::less_eq(
            format!("order_{}", s + 1),
            q(s - 1, "index"),
            q(s, "index"),
        ));
    }
    let steps = Expr::sum(
        (1..n).map(|s| Expr::min(vec![Expr::Const(1.0), q(s, "index") - q(s - 1, "index")])),
    );
    if n > 1 && params.max_designs < n.min(designs.len()) {
        constraints.push(Constraint::less_eq(
            "designs",
            Expr::Const(1.0) + steps.clone(),
            Expr::Const(params.max_designs as f64),
        ));
    }

    let mut cost = Expr::sum((0..n).map(|s| q(s, "cost")));
    if n > 1 {
        cost = cost + Expr::Const(params.design_penalty) * steps;
    }
    let mut objectives = Vec::new();
    if params.objectives == FleetObjectives::Multi {
        let times: Vec<Expr> = (0..n)
            .map(|s| {
                let trips = Expr::sum(packages.iter().enumerate().map(|(p, pkg)| {
                    Expr::Const(2.0 * pkg.distance) * Expr::prop(package_var(p), at(s))
                }));
                trips / q(s, "velocity")
            })
            .collect();
        let makespan = if n == 1 {
            times.into_iter().next().expect("one slot")
        } else {
            Expr::max(times)
        };
        objectives.push(Objective::minimize("makespan", makespan));
    }
    objectives.push(Objective::minimize("cost", cost));
    let model = SystemModel::new(catalogs, constraints, objectives)?;
    Ok(FleetModel {
        model,
        designs: designs.to_vec(),
        packages: packages.to_vec(),
        params: params.clone(),
    })
}

/// A fleet plan: the design of every slot and the slot of every package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub slots: Vec<usize>,
    pub packages: Vec<usize>,
}

impl FleetModel {
    /// The schedule encoded by a complete assignment of the model.
    pub fn schedule_of(&self, a: &Assignment) -> Result<Schedule, FleetError> {
        let rows = a.to_rows(&self.model)?;
        let n = self.params.fleet_size;
        Ok(Schedule {
            slots: rows[..n].to_vec(),
            packages: rows[n..].to_vec(),
        })
    }

    pub fn evaluate(&self, schedule: &Schedule) -> Result<(f64, f64), FleetError> {
        schedule_cost_time(schedule, &self.designs, &self.packages, &self.params)
    }
}

/// Makespan and cost of a schedule. Costs are summed in order of design
/// index, matching the model's ordered slots.
pub fn schedule_cost_time(
    schedule: &Schedule,
    designs: &[Design],
    packages: &[Package],
    params: &FleetParams,
) -> Result<(f64, f64), FleetError> {
    let n = schedule.slots.len();
    if n != params.fleet_size || schedule.packages.len() != packages.len() {
        return Err(FleetError::BadSchedule(format!(
            "{} slots and {} packages, expected {} and {}",
            n,
            schedule.packages.len(),
            params.fleet_size,
            packages.len()
        )));
    }
    if let Some(&d) = schedule.slots.iter().find(|&&d| d >= designs.len()) {
        return Err(FleetError::BadSchedule(format!("design {d} out of range")));
    }
    let mut trips: Vec<Option<f64>> = vec![None; n];
    for (pkg, &s) in packages.iter().zip(&schedule.packages) {
        if s >= n {
            return Err(FleetError::BadSchedule(format!("slot {s} out of range")));
        }
        if pkg.mass > designs[schedule.slots[s]].payload {
            return Err(FleetError::CapacityViolation {
                package: pkg.id.clone(),
                slot: s + 1,
            });
        }
        let leg = 2.0 * pkg.distance;
        trips[s] = Some(trips[s].map_or(leg, |t| t + leg));
    }
    let makespan = trips
        .iter()
        .zip(&schedule.slots)
        .map(|(t, &d)| t.unwrap_or(0.0) / designs[d].velocity)
        .fold(0.0, f64::max);
    let mut order = schedule.slots.clone();
    order.sort_unstable();
    let mut cost = designs[order[0]].cost;
    for &d in &order[1..] {
        cost += designs[d].cost;
    }
    let distinct = order.iter().collect::<BTreeSet<_>>().len();
    if distinct > params.max_designs {
        return Err(FleetError::BadSchedule(format!(
            "{distinct} distinct designs, at most {} allowed",
            params.max_designs
        )));
    }
    if n > 1 {
        cost += params.design_penalty * (distinct - 1) as f64;
    }
    Ok((makespan, cost))
}

/// Result of [`fleet_pipeline`].
#[derive(Debug, Clone)]
pub struct FleetSolution {
    pub quad_front: ParetoFront,
    pub fleet: FleetModel,
    pub front: ParetoFront,
}

/// Fleet design from a quadcopter model: each slot asks `cache` for the
/// quadcopter front under the name `quadcopter`, so the front is computed
/// once whatever the fleet size. `quad_front` computes it on a miss; the
/// fleet front comes from `fleet_front`.
pub fn fleet_pipeline(
    quad: &SystemModel,
    packages: &[Package],
    params: &FleetParams,
    cache: &mut SubsystemCache,
    quad_front: &dyn Fn(&SystemModel) -> Result<ParetoFront, DecomposeError>,
    fleet_front: &dyn Fn(&SystemModel) -> Result<ParetoFront, DecomposeError>,
) -> Result<FleetSolution, FleetError> {
    let mut front = None;
    for _ in 0..params.fleet_size.max(1) {
        let (f, _) = cache.model_front("quadcopter", quad, |m| quad_front(m))?;
        front = Some(f);
    }
    let quad_front_points = front.expect("at least one slot");
    let designs = prefilter_designs(&designs_from_front(&quad_front_points, quad)?, packages);
    let fleet = build_fleet_model(&designs, packages, params)?;
    let front = fleet_front(&fleet.model)?;
    Ok(FleetSolution {
        quad_front: quad_front_points,
        fleet,
        front,
    })
}
