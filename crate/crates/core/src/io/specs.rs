use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::decompose::SubsystemSpec;
use crate::io::catalog::{load_catalog, CatalogError};
use crate::model::{Expr, SystemModel};
use crate::parse::{parse_expr, parse_model_source, ParseError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: {source}")]
    Catalog { path: String, source: CatalogError },
    #[error("{path}: {source}")]
    Toml {
        path: String,
        source: toml::de::Error,
    },
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a model file and its catalogs. Catalog paths are relative to the
/// model file's directory.
pub fn load_model(path: &Path) -> Result<SystemModel, LoadError> {
    let text = read(path)?;
    let at = |source| LoadError::Parse {
        path: path.display().to_string(),
        source,
    };
    let src = parse_model_source(&text).map_err(at)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut catalogs = HashMap::new();
    for (var, rel) in &src.variables {
        let p: PathBuf = base.join(rel);
        let cat = load_catalog(&p, var).map_err(|source| LoadError::Catalog {
            path: p.display().to_string(),
            source,
        })?;
        catalogs.insert(var.clone(), cat);
    }
    src.build(&catalogs).map_err(at)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default)]
    subsystem: Vec<SpecEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecEntry {
    name: String,
    alias: Option<String>,
    variables: Vec<String>,
    #[serde(default)]
    handles: Vec<String>,
    #[serde(default)]
    rewrite: Vec<RewriteEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RewriteEntry {
    name: String,
    expr: String,
}

/// Parses a subsystem file:
///
/// ```toml
/// [[subsystem]]
/// name = "esc"
/// variables = ["HB", "MC", "VR"]
/// handles = ["MC.logic_voltage"]
///
/// [[subsystem.rewrite]]
/// name = "cost"
/// expr = "HB.cost + MC.cost + VR.cost"
/// ```
///
/// Subsystems are listed innermost first.
pub fn parse_subsystem_specs(text: &str) -> Result<Vec<SubsystemSpec>, toml::de::Error> {
    let file: SpecFile = toml::from_str(text)?;
    let mut out = Vec::new();
    for e in file.subsystem {
        let spec_err = |message: String| {
            <toml::de::Error as serde::de::Error>::custom(format!(
                "subsystem `{}`: {message}",
                e.name
            ))
        };
        let mut spec = SubsystemSpec::new(e.name.clone(), e.variables.clone());
        spec.alias = e.alias.clone();
        for h in &e.handles {
            match parse_expr(h) {
                Ok(Expr::Prop(k)) => spec.handles.push(k),
                _ => return Err(spec_err(format!("handle `{h}` is not `Var.prop`"))),
            }
        }
        for r in &e.rewrite {
            let expr = parse_expr(&r.expr)
                .map_err(|err| spec_err(format!("rewrite `{}`: {err}", r.name)))?;
            spec = spec.with_rewrite(r.name.clone(), expr);
        }
        out.push(spec);
    }
    Ok(out)
}

pub fn load_subsystem_specs(path: &Path) -> Result<Vec<SubsystemSpec>, LoadError> {
    parse_subsystem_specs(&read(path)?).map_err(|source| LoadError::Toml {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PropertyKey;

    #[test]
    fn parses_specs() {
        let text = r#"
[[subsystem]]
name = "esc"
variables = ["HB", "MC", "VR"]
handles = ["MC.logic_voltage"]

[[subsystem.rewrite]]
name = "cost"
expr = "HB.cost + MC.cost + VR.cost"

[[subsystem]]
name = "motor"
alias = "MS"
variables = ["esc", "M"]
"#;
        let specs = parse_subsystem_specs(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(
            specs[0].handles,
            vec![PropertyKey::new("MC", "logic_voltage")]
        );
        assert_eq!(
            specs[0].rewrites[0].expr.to_string(),
            "HB.cost + MC.cost + VR.cost"
        );
        assert_eq!(specs[1].aggregate_variable(), "MS");
        assert!(parse_subsystem_specs(
            "[[subsystem]]\nname = \"x\"\nvariables = []\nhandles = [\"1+\"]\n"
        )
        .is_err());
    }

    #[test]
    fn loads_model_with_relative_catalogs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.csv"), "id,v,c\nb1,12,5\n").unwrap();
        std::fs::write(dir.path().join("m.txt"), "var B = b.csv\nminimize: B.c\n").unwrap();
        let m = load_model(&dir.path().join("m.txt")).unwrap();
        assert_eq!(m.catalogs()[0].variable, "B");
        std::fs::write(
            dir.path().join("bad.txt"),
            "var B = nope.csv\nminimize: B.c\n",
        )
        .unwrap();
        assert!(matches!(
            load_model(&dir.path().join("bad.txt")),
            Err(LoadError::Catalog { .. })
        ));
    }
}
