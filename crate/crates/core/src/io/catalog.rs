use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::{Catalog, Component, ModelError};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a finite number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("header must start with `id`")]
    BadHeader,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reads a catalog: a header row starting with `id`, then one row per
/// component. Lines starting with `#` are comments.
pub fn read_catalog(reader: impl Read, variable: &str) -> Result<Catalog, CatalogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(CatalogError::BadHeader);
    }
    let properties: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    let mut components = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(CatalogError::RaggedRow {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(CatalogError::DuplicateId { line, id });
        }
        let values = rec
            .iter()
            .skip(1)
            .zip(&properties)
            .map(|(cell, col)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CatalogError::Parse {
                    line,
                    column: col.clone(),
                    value: cell.to_string(),
                }),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        components.push(Component::new(id, values));
    }
    Ok(Catalog::new(variable, properties, components)?)
}

pub fn load_catalog(path: &Path, variable: &str) -> Result<Catalog, CatalogError> {
    let file = std::fs::File::open(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_catalog(std::io::BufReader::new(file), variable)
}

/// Writes `comments` as `#` lines, then the header and rows. Values use the
/// shortest representation that parses back to the same number.
pub fn write_catalog(
    c: &Catalog,
    mut w: impl Write,
    comments: &[String],
) -> Result<(), CatalogError> {
    for line in comments {
        writeln!(w, "# {line}").map_err(|source| CatalogError::Io {
            path: String::new(),
            source,
        })?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend(c.properties.iter().cloned());
    wtr.write_record(&header)?;
    for comp in &c.components {
        let mut row = vec![comp.id.clone()];
        row.extend(comp.values.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| CatalogError::Io {
        path: String::new(),
        source,
    })?;
    Ok(())
}
