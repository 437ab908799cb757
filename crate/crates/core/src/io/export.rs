use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::decompose::AggregateComponent;
use crate::io::catalog::{write_catalog, CatalogError};
use crate::model::{Direction, SystemModel};
use crate::pareto::ParetoFront;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn user_value(direction: Direction, canonical: f64) -> f64 {
    // canonical(v) is its own inverse
    direction.canonical(canonical) + 0.0
}

/// Front as CSV: one column per objective (in the model's own directions)
/// and one per variable holding component ids, rows in lexicographic order
/// of the canonical objective vector. An empty front is a header followed
/// by `# infeasible`.
pub fn write_front(front: &ParetoFront, m: &SystemModel, w: impl Write) -> Result<(), ExportError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = m.objectives().iter().map(|o| o.name.clone()).collect();
    header.extend(m.variable_names().map(str::to_string));
    wtr.write_record(&header)?;
    for p in front.sorted() {
        let mut row: Vec<String> = m
            .objectives()
            .iter()
            .zip(&p.objectives.0)
            .map(|(o, &v)| user_value(o.direction, v).to_string())
            .collect();
        row.extend(
            m.variable_names()
                .map(|v| p.assignment.get(v).unwrap_or("").to_string()),
        );
        wtr.write_record(&row)?;
    }
    let mut inner = wtr.into_inner().map_err(|e| ExportError::Io {
        path: String::new(),
        source: e.into_error(),
    })?;
    if front.is_empty() {
        writeln!(inner, "# infeasible").map_err(io_err(Path::new("")))?;
    }
    Ok(())
}

/// Structured record of the front: objective values, full assignments and
/// partition tags per point, in the same order as [`write_front`].
pub fn provenance_json(front: &ParetoFront, m: &SystemModel) -> Value {
    let objectives: Vec<Value> = m
        .objectives()
        .iter()
        .map(|o| {
            json!({
                "name": o.name,
                "direction": match o.direction {
                    Direction::Minimize => "minimize",
                    Direction::Maximize => "maximize",
                },
            })
        })
        .collect();
    let points: Vec<Value> = front
        .sorted()
        .into_iter()
        .map(|p| {
            let values: Map<String, Value> = m
                .objectives()
                .iter()
                .zip(&p.objectives.0)
                .map(|(o, &v)| (o.name.clone(), json!(user_value(o.direction, v))))
                .collect();
            let assignment: Map<String, Value> = p
                .assignment
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect();
            let partition: Map<String, Value> = p
                .partition
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect();
            json!({ "objectives": values, "assignment": assignment, "partition": partition })
        })
        .collect();
    json!({ "objectives": objectives, "points": points, "infeasible": front.is_empty() })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

/// Writes the front CSV at `path` and its provenance next to it.
pub fn export_front(front: &ParetoFront, m: &SystemModel, path: &Path) -> Result<(), ExportError> {
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    write_front(front, m, std::io::BufWriter::new(f))?;
    let side = sidecar_path(path);
    let text =
        serde_json::to_string_pretty(&provenance_json(front, m)).expect("json values serialize");
    std::fs::write(&side, text + "\n").map_err(io_err(&side))?;
    Ok(())
}

/// Writes an aggregate as `{dir}/{variable}.csv` in catalog format plus a
/// provenance sidecar mapping each row id to its internal assignment.
pub fn write_aggregate(agg: &AggregateComponent, dir: &Path) -> Result<PathBuf, ExportError> {
    let path = dir.join(format!("{}.csv", agg.catalog.variable));
    let f = std::fs::File::create(&path).map_err(io_err(&path))?;
    write_catalog(
        &agg.catalog,
        std::io::BufWriter::new(f),
        &[format!("aggregate {}", agg.catalog.variable)],
    )?;
    let rows: Map<String, Value> = agg
        .catalog
        .components
        .iter()
        .zip(&agg.provenance)
        .map(|(c, a)| {
            let inner: Map<String, Value> =
                a.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            (c.id.clone(), Value::Object(inner))
        })
        .collect();
    let side = sidecar_path(&path);
    let text = serde_json::to_string_pretty(&Value::Object(rows)).expect("json values serialize");
    std::fs::write(&side, text + "\n").map_err(io_err(&side))?;
    Ok(path)
}
