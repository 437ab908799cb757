//! Seeded synthetic catalogs.
//!
//! Every property draws from its own ChaCha8 stream (stream number = the
//! property's position), seeded with the spec seed. Normal variates come
//! from the Marsaglia polar method using IEEE `sqrt` and the pure-software
//! `libm::log`, so a seed yields the same catalog on every platform. Values
//! below `lower_bound` are redrawn, at most 1000 times per value. With a
//! `resolution` each value is rounded to a multiple of it; with `choices`
//! the property is drawn uniformly from the listed values instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Catalog, Component, ModelError};

pub const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub name: String,
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub std: f64,
    pub lower_bound: Option<f64>,
    pub resolution: Option<f64>,
    pub choices: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub variable: String,
    pub count: usize,
    pub seed: u64,
    /// Prefix of component ids; defaults to the lowercased variable name.
    pub id_prefix: Option<String>,
    #[serde(rename = "property")]
    pub properties: Vec<PropertySpec>,
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("count must be at least 1")]
    EmptyCount,
    #[error("property `{0}`: standard deviation must be finite and non-negative")]
    BadStd(String),
    #[error("property `{0}`: resolution must be positive")]
    BadResolution(String),
    #[error("property `{0}`: choices must be a non-empty list of finite values")]
    BadChoices(String),
    #[error("property `{property}`: no sample above {bound} after {MAX_RESAMPLES} draws")]
    TruncationFailed { property: String, bound: f64 },
    #[error("bad generator spec: {0}")]
    Spec(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl GeneratorSpec {
    pub fn from_toml(text: &str) -> Result<Self, GenerateError> {
        Ok(toml::from_str(text)?)
    }

    /// The header comment recorded in generated files.
    pub fn header(&self) -> String {
        format!(
            "generated variable={} count={} seed={}",
            self.variable, self.count, self.seed
        )
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * libm::log(s) / s).sqrt();
        }
    }
}

fn sample(p: &PropertySpec, rng: &mut ChaCha8Rng) -> Result<f64, GenerateError> {
    if let Some(choices) = &p.choices {
        return Ok(choices[rng.gen_range(0..choices.len())]);
    }
    let quantize = |x: f64| match p.resolution {
        Some(r) => (x / r).round() * r,
        None => x,
    };
    for _ in 0..MAX_RESAMPLES {
        let x = quantize(p.mean + p.std * standard_normal(rng));
        if p.lower_bound.map_or(true, |lb| x >= lb) {
            return Ok(x);
        }
    }
    Err(GenerateError::TruncationFailed {
        property: p.name.clone(),
        bound: p.lower_bound.unwrap_or(f64::NEG_INFINITY),
    })
}

pub fn generate_catalog(spec: &GeneratorSpec) -> Result<Catalog, GenerateError> {
    if spec.count == 0 {
        return Err(GenerateError::EmptyCount);
    }
    let mut columns = Vec::with_capacity(spec.properties.len());
    for (i, p) in spec.properties.iter().enumerate() {
        if !(p.std.is_finite() && p.std >= 0.0) {
            return Err(GenerateError::BadStd(p.name.clone()));
        }
        if p.resolution.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
            return Err(GenerateError::BadResolution(p.name.clone()));
        }
        if let Some(c) = &p.choices {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(GenerateError::BadChoices(p.name.clone()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let col = (0..spec.count)
            .map(|_| sample(p, &mut rng))
            .collect::<Result<Vec<f64>, _>>()?;
        columns.push(col);
    }
    let prefix = spec
        .id_prefix
        .clone()
        .unwrap_or_else(|| spec.variable.to_lowercase());
    let width = spec.count.to_string().len();
    let components = (0..spec.count)
        .map(|r| {
            Component::new(
                format!("{prefix}{:0width$}", r + 1),
                columns.iter().map(|c| c[r]).collect(),
            )
        })
        .collect();
    Ok(Catalog::new(
        spec.variable.clone(),
        spec.properties.iter().map(|p| p.name.clone()).collect(),
        components,
    )?)
}
