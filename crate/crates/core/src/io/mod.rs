//! Files: catalogs, model files, generator and subsystem specs, fronts.

pub mod catalog;
pub mod export;
pub mod generate;
pub mod specs;

pub use catalog::{load_catalog, read_catalog, write_catalog, CatalogError};
pub use export::{export_front, write_aggregate, write_front, ExportError};
pub use generate::{generate_catalog, GenerateError, GeneratorSpec, PropertySpec};
pub use specs::{load_model, load_subsystem_specs, parse_subsystem_specs, LoadError};
