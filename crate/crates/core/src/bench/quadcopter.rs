//! Quadcopter design models.
//!
//! The original catalogs and the full constraint set behind this benchmark
//! are not public, so the model here is a reconstruction with the same
//! shape: a velocity to maximize under a $1000 budget, a power balance
//! between four motors and the battery, lift against weight plus drag,
//! propeller/frame fit, flight time from battery energy, and camera and
//! computer rates proportional to velocity. The velocity is a decision
//! variable `V` over a grid of levels.
//!
//! Velocity is deliberately non-monotone: it is maximized, yet it sits on
//! the left side of the camera, computer and lift constraints.
//!
//! [`QuadVariant::ComponentLevel`] and [`QuadVariant::Delivery`] split the
//! integrated motor into an ESC (H-bridge `HB`, microcontroller `MC`,
//! voltage regulator `VR`), a propeller `P` and a bare motor `M`, so the
//! ESC and motor subsystems can be folded into aggregates.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::decompose::SubsystemSpec;
use crate::io::catalog::{load_catalog, CatalogError};
use crate::io::generate::{generate_catalog, GenerateError, GeneratorSpec, PropertySpec};
use crate::model::{Catalog, Component, SystemModel};
use crate::parse::{parse_expr, parse_model, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadVariant {
    /// Integrated motors; maximize velocity.
    SingleObjective,
    /// Integrated motors; maximize velocity, minimize mass.
    MultiObjective,
    /// ESC, propeller and motor as separate components; maximize velocity,
    /// minimize mass.
    ComponentLevel,
    /// Component level with delivery constants; maximize velocity and
    /// payload, minimize cost and mass.
    Delivery,
}

impl QuadVariant {
    pub const ALL: [QuadVariant; 4] = [
        QuadVariant::SingleObjective,
        QuadVariant::MultiObjective,
        QuadVariant::ComponentLevel,
        QuadVariant::Delivery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuadVariant::SingleObjective => "single",
            QuadVariant::MultiObjective => "multi",
            QuadVariant::ComponentLevel => "component",
            QuadVariant::Delivery => "delivery",
        }
    }

    pub fn from_name(s: &str) -> Option<QuadVariant> {
        QuadVariant::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn is_component_level(self) -> bool {
        matches!(self, QuadVariant::ComponentLevel | QuadVariant::Delivery)
    }

    /// Variables in model order.
    pub fn variables(self) -> &'static [&'static str] {
        if self.is_component_level() {
            &["HB", "MC", "VR", "P", "M", "B", "F", "C", "K", "V"]
        } else {
            &["M", "B", "F", "C", "K", "V"]
        }
    }

    /// Default constants for this variant.
    pub fn params(self) -> QuadParams {
        match self {
            QuadVariant::Delivery => QuadParams::delivery(),
            _ => QuadParams::racing(),
        }
    }
}

/// Constants of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub budget: f64,
    /// Required ratio of static thrust to weight.
    pub thrust_margin: f64,
    /// Camera frames per second needed per m/s of velocity.
    pub camera_rate: f64,
    /// Computer throughput (frames per second) needed per m/s.
    pub computer_rate: f64,
    /// Hover draw as a fraction of the motors' rated power.
    pub hover_fraction: f64,
    pub flight_minutes: f64,
    /// Number of velocity levels; level `k` is `k` m/s.
    pub velocity_levels: usize,
}

impl QuadParams {
    pub fn racing() -> Self {
        QuadParams {
            budget: 1000.0,
            thrust_margin: 2.0,
            camera_rate: 3.0,
            computer_rate: 3.0,
            hover_fraction: 0.25,
            flight_minutes: 5.0,
            velocity_levels: 60,
        }
    }

    /// Delivery quadcopters land at low speed rather than corner at high
    /// speed, so the camera and computer constants are lower.
    pub fn delivery() -> Self {
        QuadParams {
            camera_rate: 1.0,
            computer_rate: 1.0,
            flight_minutes: 10.0,
            velocity_levels: 20,
            ..QuadParams::racing()
        }
    }
}

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("missing catalog for variable `{0}`")]
    MissingCatalog(String),
    #[error("{path}: {source}")]
    Catalog { path: String, source: CatalogError },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

/// Catalog file name for each variable.
pub fn catalog_file(variable: &str) -> String {
    let stem = match variable {
        "HB" => "hbridge",
        "MC" => "microcontroller",
        "VR" => "regulator",
        "P" => "propeller",
        "M" => "motor",
        "B" => "battery",
        "F" => "frame",
        "C" => "computer",
        "K" => "camera",
        "V" => "velocity",
        other => return format!("{}.csv", other.to_lowercase()),
    };
    format!("{stem}.csv")
}

fn n(x: f64) -> String {
    format!("{x}")
}

/// Model file text for `variant`. Catalog paths are the names from
/// [`catalog_file`], relative to the model file.
pub fn model_text(variant: QuadVariant, p: &QuadParams) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# Quadcopter ({}), reconstructed constraint set",
        variant.name()
    );
    for v in variant.variables() {
        let _ = writeln!(s, "var {v} = {}", catalog_file(v));
    }
    let _ = writeln!(s);
    let (unit_mass, unit_cost, thrust, unit_power);
    if variant.is_component_level() {
        let _ = writeln!(s, "# ESC");
        let _ = writeln!(s, "logic: HB.logic_voltage == MC.logic_voltage");
        let _ = writeln!(s, "regulator: VR.out_voltage == MC.logic_voltage");
        let _ = writeln!(s, "# motor");
        let _ = writeln!(s, "sensor: M.sensor_voltage == MC.logic_voltage");
        let _ = writeln!(s, "current_rating: M.current <= HB.max_current");
        let _ = writeln!(
            s,
            "voltage_rating: M.voltage <= min(HB.max_voltage, VR.max_in_voltage)"
        );
        let _ = writeln!(s, "torque: P.torque <= M.torque");
        let _ = writeln!(s, "# quadcopter");
        unit_mass = "4*(HB.mass + MC.mass + VR.mass + P.mass + M.mass)";
        unit_cost = "4*(HB.cost + MC.cost + VR.cost + P.cost + M.cost)";
        thrust = "min(M.max_thrust, P.max_thrust)";
        unit_power = "M.voltage*M.current";
    } else {
        unit_mass = "4*M.mass";
        unit_cost = "4*M.cost";
        thrust = "M.thrust";
        unit_power = "M.voltage*M.current";
    }
    let mass = format!("{unit_mass} + B.mass + F.mass + C.mass + K.mass");
    let cost = format!("{unit_cost} + B.cost + F.cost + C.cost + K.cost");
    let prop = if variant.is_component_level() {
        "P.diameter"
    } else {
        "M.prop_diameter"
    };
    let _ = writeln!(s, "power: 4*({unit_power}) <= B.voltage*B.current");
    let _ = writeln!(
        s,
        "lift: {}*({mass}) + F.drag*V.v*V.v <= 4*{thrust}",
        n(p.thrust_margin)
    );
    let _ = writeln!(s, "fit: {prop} <= F.max_prop");
    let _ = writeln!(s, "camera: {}*V.v <= K.frame_rate", n(p.camera_rate));
    let _ = writeln!(s, "computer: {}*V.v <= C.throughput", n(p.computer_rate));
    let _ = writeln!(s, "budget: {cost} <= {}", n(p.budget));
    let _ = writeln!(
        s,
        "endurance: {}*({}*(4*({unit_power})) + C.power + K.power) <= 60*B.energy",
        n(p.flight_minutes),
        n(p.hover_fraction)
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "maximize velocity: V.v");
    match variant {
        QuadVariant::SingleObjective => {}
        QuadVariant::MultiObjective | QuadVariant::ComponentLevel => {
            let _ = writeln!(s, "minimize mass: {mass}");
        }
        QuadVariant::Delivery => {
            let _ = writeln!(
                s,
                "maximize payload: 4*{thrust}/{} - ({mass})",
                n(p.thrust_margin)
            );
            let _ = writeln!(s, "minimize cost: {cost}");
            let _ = writeln!(s, "minimize mass: {mass}");
        }
    }
    s
}

/// Builds the model from catalogs keyed by variable name.
pub fn build_quadcopter_model(
    catalogs: &HashMap<String, Catalog>,
    variant: QuadVariant,
    params: &QuadParams,
) -> Result<SystemModel, QuadError> {
    for v in variant.variables() {
        if !catalogs.contains_key(*v) {
            return Err(QuadError::MissingCatalog(v.to_string()));
        }
    }
    Ok(parse_model(&model_text(variant, params), catalogs)?)
}

/// Loads the catalogs of `variant` from `dir` (file names from
/// [`catalog_file`]) and builds the model.
pub fn load_quadcopter_model(
    dir: &Path,
    variant: QuadVariant,
    params: &QuadParams,
) -> Result<SystemModel, QuadError> {
    let mut catalogs = HashMap::new();
    for v in variant.variables() {
        let path = dir.join(catalog_file(v));
        if !path.exists() {
            return Err(QuadError::MissingCatalog(v.to_string()));
        }
        let c = load_catalog(&path, v).map_err(|source| QuadError::Catalog {
            path: path.display().to_string(),
            source,
        })?;
        catalogs.insert(v.to_string(), c);
    }
    build_quadcopter_model(&catalogs, variant, params)
}

fn expr(s: &str) -> crate::model::Expr {
    parse_expr(s).expect("well-formed built-in expression")
}

/// ESC then motor subsystem, for the component-level variants. The motor
/// aggregate is called `MS`.
pub fn quad_subsystems() -> Vec<SubsystemSpec> {
    let esc = SubsystemSpec::new("esc", ["HB", "MC", "VR"])
        .with_handle(crate::model::PropertyKey::new("MC", "logic_voltage"))
        .with_rewrite("mass", expr("HB.mass + MC.mass + VR.mass"))
        .with_rewrite("cost", expr("HB.cost + MC.cost + VR.cost"))
        .with_rewrite(
            "voltage_rating",
            expr("min(HB.max_voltage, VR.max_in_voltage)"),
        );
    let motor = SubsystemSpec::new("motor", ["esc", "P", "M"])
        .with_alias("MS")
        .with_rewrite("thrust", expr("min(M.max_thrust, P.max_thrust)"))
        .with_rewrite("power", expr("M.voltage*M.current"))
        .with_rewrite("mass", expr("esc.mass + P.mass + M.mass"))
        .with_rewrite("cost", expr("esc.cost + P.cost + M.cost"));
    vec![esc, motor]
}

/// The subsystem file equivalent of [`quad_subsystems`].
pub fn subsystems_text() -> String {
    let mut s = String::from("# ESC first, then the motor subsystem that contains it\n");
    for spec in quad_subsystems() {
        let _ = writeln!(s, "\n[[subsystem]]");
        let _ = writeln!(s, "name = \"{}\"", spec.name);
        if let Some(a) = &spec.alias {
            let _ = writeln!(s, "alias = \"{a}\"");
        }
        let vars: Vec<String> = spec.variables.iter().map(|v| format!("\"{v}\"")).collect();
        let _ = writeln!(s, "variables = [{}]", vars.join(", "));
        if !spec.handles.is_empty() {
            let hs: Vec<String> = spec.handles.iter().map(|h| format!("\"{h}\"")).collect();
            let _ = writeln!(s, "handles = [{}]", hs.join(", "));
        }
        for rw in &spec.rewrites {
            let _ = writeln!(s, "\n[[subsystem.rewrite]]");
            let _ = writeln!(s, "name = \"{}\"", rw.name);
            let _ = writeln!(s, "expr = \"{}\"", rw.expr);
        }
    }
    s
}

fn normal(name: &str, mean: f64, std: f64, lower_bound: f64, resolution: f64) -> PropertySpec {
    PropertySpec {
        name: name.into(),
        mean,
        std,
        lower_bound: Some(lower_bound),
        resolution: Some(resolution),
        choices: None,
    }
}

fn choice(name: &str, values: &[f64]) -> PropertySpec {
    PropertySpec {
        name: name.into(),
        mean: 0.0,
        std: 0.0,
        lower_bound: None,
        resolution: None,
        choices: Some(values.to_vec()),
    }
}

const LOGIC: [f64; 2] = [3.3, 5.0];
const CELLS: [f64; 3] = [7.4, 11.1, 14.8];
const PROPS: [f64; 6] = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

fn properties(variable: &str) -> Vec<PropertySpec> {
    match variable {
        "HB" => vec![
            normal("max_current", 20.0, 8.0, 3.0, 1.0),
            choice("max_voltage", &[12.0, 16.0, 24.0, 30.0]),
            choice("logic_voltage", &LOGIC),
            normal("mass", 6.0, 2.0, 1.0, 1.0),
            normal("cost", 8.0, 3.0, 1.0, 1.0),
        ],
        "MC" => vec![
            choice("logic_voltage", &LOGIC),
            normal("mass", 3.0, 1.0, 1.0, 1.0),
            normal("cost", 5.0, 2.0, 1.0, 1.0),
        ],
        "VR" => vec![
            choice("out_voltage", &LOGIC),
            choice("max_in_voltage", &[12.0, 16.0, 24.0, 36.0]),
            normal("mass", 2.0, 1.0, 1.0, 1.0),
            normal("cost", 3.0, 1.5, 1.0, 1.0),
        ],
        "P" => vec![
            choice("diameter", &PROPS),
            normal("max_thrust", 900.0, 300.0, 200.0, 10.0),
            normal("torque", 80.0, 25.0, 20.0, 1.0),
            normal("mass", 8.0, 3.0, 2.0, 1.0),
            normal("cost", 4.0, 2.0, 1.0, 1.0),
        ],
        "M_component" => vec![
            choice("voltage", &CELLS),
            normal("current", 15.0, 5.0, 3.0, 0.5),
            normal("max_thrust", 900.0, 300.0, 200.0, 10.0),
            normal("torque", 100.0, 30.0, 20.0, 1.0),
            choice("sensor_voltage", &LOGIC),
            normal("mass", 35.0, 10.0, 10.0, 1.0),
            normal("cost", 18.0, 8.0, 4.0, 1.0),
        ],
        "M" => vec![
            choice("voltage", &CELLS),
            normal("current", 15.0, 5.0, 3.0, 0.5),
            normal("thrust", 900.0, 300.0, 200.0, 10.0),
            choice("prop_diameter", &PROPS),
            normal("mass", 45.0, 12.0, 10.0, 1.0),
            normal("cost", 30.0, 12.0, 5.0, 1.0),
        ],
        "B" => vec![
            choice("voltage", &[7.4, 11.1, 14.8, 22.2]),
            normal("current", 60.0, 25.0, 10.0, 1.0),
            normal("energy", 40.0, 15.0, 5.0, 1.0),
            normal("mass", 250.0, 100.0, 50.0, 1.0),
            normal("cost", 50.0, 20.0, 10.0, 1.0),
        ],
        "F" => vec![
            normal("mass", 150.0, 50.0, 40.0, 1.0),
            normal("cost", 40.0, 15.0, 10.0, 1.0),
            normal("drag", 1.0, 0.3, 0.25, 0.25),
            choice("max_prop", &PROPS),
        ],
        "C" => vec![
            normal("throughput", 60.0, 25.0, 10.0, 1.0),
            normal("power", 8.0, 4.0, 1.0, 0.5),
            normal("mass", 50.0, 20.0, 10.0, 1.0),
            normal("cost", 150.0, 80.0, 20.0, 1.0),
        ],
        "K" => vec![
            normal("frame_rate", 60.0, 25.0, 15.0, 1.0),
            normal("power", 2.0, 1.0, 0.5, 0.5),
            normal("mass", 30.0, 15.0, 5.0, 1.0),
            normal("cost", 60.0, 30.0, 10.0, 1.0),
        ],
        other => panic!("no generator for `{other}`"),
    }
}

/// Seeded generator specs for every component variable of `variant`
/// (everything except `V`). Each variable gets its own seed derived from
/// `seed` and its position.
pub fn generator_specs(variant: QuadVariant, count: usize, seed: u64) -> Vec<GeneratorSpec> {
    variant
        .variables()
        .iter()
        .filter(|v| **v != "V")
        .enumerate()
        .map(|(i, v)| {
            let key = if *v == "M" && variant.is_component_level() {
                "M_component"
            } else {
                v
            };
            GeneratorSpec {
                variable: v.to_string(),
                count,
                seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
                id_prefix: None,
                properties: properties(key),
            }
        })
        .collect()
}

/// Catalog size of `variable` in the published experiment: 1000 per ESC
/// part, 250 per motor-subsystem part, 500 per quadcopter-level part.
pub fn benchmark_count(variable: &str) -> usize {
    match variable {
        "HB" | "MC" | "VR" => 1000,
        "P" | "M" => 250,
        _ => 500,
    }
}

/// [`generator_specs`] with the counts of [`benchmark_count`].
pub fn benchmark_generator_specs(variant: QuadVariant, seed: u64) -> Vec<GeneratorSpec> {
    let mut specs = generator_specs(variant, 1, seed);
    for s in &mut specs {
        s.count = benchmark_count(&s.variable);
    }
    specs
}

/// Velocity levels `1..=levels` m/s.
pub fn velocity_catalog(levels: usize) -> Catalog {
    let width = levels.to_string().len();
    let rows = (1..=levels)
        .map(|k| Component::new(format!("v{k:0width$}"), vec![k as f64]))
        .collect();
    Catalog::new("V", vec!["v".into()], rows).expect("velocity grid is a valid catalog")
}

/// Generated catalogs for every variable of `variant`, including `V`.
pub fn generate_catalogs(
    variant: QuadVariant,
    params: &QuadParams,
    count: usize,
    seed: u64,
) -> Result<HashMap<String, Catalog>, QuadError> {
    let mut out = HashMap::new();
    for spec in generator_specs(variant, count, seed) {
        out.insert(spec.variable.clone(), generate_catalog(&spec)?);
    }
    out.insert("V".to_string(), velocity_catalog(params.velocity_levels));
    Ok(out)
}

/// Generated model in one call.
pub fn generated_model(
    variant: QuadVariant,
    count: usize,
    seed: u64,
) -> Result<SystemModel, QuadError> {
    let params = variant.params();
    let cats = generate_catalogs(variant, &params, count, seed)?;
    build_quadcopter_model(&cats, variant, &params)
}
