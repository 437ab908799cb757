//! The files under `models/` are renderings of the built-in models and
//! generator specs. `cargo test --test shipped_models -- --ignored` rewrites
//! them.

use std::fs;
use std::path::{Path, PathBuf};

use compsel::bench::{
    benchmark_generator_specs, catalog_file, generator_specs, model_text, quad_subsystems,
    subsystems_text, velocity_catalog, QuadVariant,
};
use compsel::io::{
    generate_catalog, load_catalog, load_model, parse_subsystem_specs, write_catalog, GeneratorSpec,
};

const SEED: u64 = 1;

struct Shipped {
    dir: &'static str,
    variants: &'static [QuadVariant],
    count: usize,
}

const SHIPPED: [Shipped; 3] = [
    Shipped {
        dir: "quadcopter",
        variants: &[QuadVariant::SingleObjective, QuadVariant::MultiObjective],
        count: 100,
    },
    Shipped {
        dir: "component",
        variants: &[QuadVariant::ComponentLevel],
        count: 30,
    },
    Shipped {
        dir: "delivery",
        variants: &[QuadVariant::Delivery],
        count: 12,
    },
];

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model_file(v: QuadVariant) -> String {
    format!("{}.model", v.name())
}

fn spec_file(spec: &GeneratorSpec) -> String {
    format!(
        "gen/{}",
        catalog_file(&spec.variable).replace(".csv", ".toml")
    )
}

#[test]
fn shipped_files_match_the_built_in_models() {
    let root = models_dir();
    for s in &SHIPPED {
        let dir = root.join(s.dir);
        let lead = s.variants[0];
        for &v in s.variants {
            let text = fs::read_to_string(dir.join(model_file(v))).unwrap();
            assert_eq!(text, model_text(v, &v.params()), "{}", v.name());
            let m = load_model(&dir.join(model_file(v))).unwrap();
            assert_eq!(
                m.objectives().len(),
                model_text(v, &v.params()).matches("imize ").count()
            );
        }
        for spec in benchmark_generator_specs(lead, SEED) {
            let text = fs::read_to_string(dir.join(spec_file(&spec))).unwrap();
            assert_eq!(GeneratorSpec::from_toml(&text).unwrap(), spec);
        }
        for spec in generator_specs(lead, s.count, SEED) {
            let shipped =
                load_catalog(&dir.join(catalog_file(&spec.variable)), &spec.variable).unwrap();
            assert_eq!(
                shipped,
                generate_catalog(&spec).unwrap(),
                "{}/{}",
                s.dir,
                spec.variable
            );
        }
        let v = load_catalog(&dir.join(catalog_file("V")), "V").unwrap();
        assert_eq!(v, velocity_catalog(lead.params().velocity_levels));
        if lead.is_component_level() {
            let text = fs::read_to_string(dir.join("subsystems.toml")).unwrap();
            assert_eq!(text, subsystems_text());
            assert_eq!(parse_subsystem_specs(&text).unwrap(), quad_subsystems());
        }
    }
}

#[test]
fn shipped_fleet_inputs_parse() {
    let dir = models_dir().join("fleet");
    let params = compsel::bench::FleetParams::from_toml(
        &fs::read_to_string(dir.join("params.toml")).unwrap(),
    )
    .unwrap();
    assert!(params.max_designs <= params.fleet_size);
    let pkgs =
        compsel::bench::read_packages(fs::File::open(dir.join("packages.csv")).unwrap()).unwrap();
    assert_eq!(pkgs.len(), 12);
    let designs =
        compsel::bench::read_designs(fs::File::open(dir.join("quad_front.csv")).unwrap()).unwrap();
    assert!(!designs.is_empty());
}

#[test]
#[ignore]
fn regenerate_shipped_models() {
    let root = models_dir();
    for s in &SHIPPED {
        let dir = root.join(s.dir);
        fs::create_dir_all(dir.join("gen")).unwrap();
        let lead = s.variants[0];
        for &v in s.variants {
            fs::write(dir.join(model_file(v)), model_text(v, &v.params())).unwrap();
        }
        for spec in benchmark_generator_specs(lead, SEED) {
            fs::write(dir.join(spec_file(&spec)), toml::to_string(&spec).unwrap()).unwrap();
        }
        for spec in generator_specs(lead, s.count, SEED) {
            let cat = generate_catalog(&spec).unwrap();
            let f = fs::File::create(dir.join(catalog_file(&spec.variable))).unwrap();
            write_catalog(&cat, f, &[spec.header()]).unwrap();
        }
        let f = fs::File::create(dir.join(catalog_file("V"))).unwrap();
        write_catalog(&velocity_catalog(lead.params().velocity_levels), f, &[]).unwrap();
        if lead.is_component_level() {
            fs::write(dir.join("subsystems.toml"), subsystems_text()).unwrap();
        }
    }
}
