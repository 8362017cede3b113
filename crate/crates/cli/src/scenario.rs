//! Scenario files: a flat key-value text format with dotted sections.
//!
//! ```text
//! schema_version = 1
//! seed = 7
//! model.name = cylinder
//! model.base_topology = circle
//! model.base_samples = 16
//! model.fibre_resolution = 64,32
//! model.c_amplitude = 0.0
//! model.tubular_radius = 1.0
//! pipeline.1.op = liouville
//! pipeline.1.tol = 1e-6
//! output.lambda = lambda.csv
//! ```

use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub base_topology: String,
    pub base_samples: usize,
    pub fibre_resolution: Vec<usize>,
    pub c_amplitude: f64,
    pub tubular_radius: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            name: "cylinder".into(),
            base_topology: "circle".into(),
            base_samples: 16,
            fibre_resolution: vec![32, 32],
            c_amplitude: 0.0,
            tubular_radius: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepSpec {
    pub index: usize,
    pub op: String,
    pub tol: f64,
    pub params: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub model: ModelSpec,
    pub pipeline: Vec<StepSpec>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "scenario parse error: {}", self.0)
    }
}

impl std::error::Error for ParseError {}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut schema_version: Option<u32> = None;
    let mut seed = None;
    let mut model = ModelSpec::default();
    let mut steps: BTreeMap<usize, BTreeMap<String, String>> = BTreeMap::new();
    let mut outputs = BTreeMap::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ParseError(format!("line {}: expected `key = value`", ln + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let bad_num = |what: &str| ParseError(format!("line {}: invalid {what}: {value}", ln + 1));
        match key {
            "schema_version" => {
                schema_version = Some(value.parse().map_err(|_| bad_num("schema_version"))?)
            }
            "seed" => seed = Some(value.parse().map_err(|_| bad_num("seed"))?),
            "model.name" => model.name = value.into(),
            "model.base_topology" => model.base_topology = value.into(),
            "model.base_samples" => {
                model.base_samples = value.parse().map_err(|_| bad_num("base_samples"))?
            }
            "model.fibre_resolution" => {
                model.fibre_resolution = value
                    .split(',')
                    .map(|v| v.trim().parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad_num("fibre_resolution"))?
            }
            "model.c_amplitude" => {
                model.c_amplitude = value.parse().map_err(|_| bad_num("c_amplitude"))?
            }
            "model.tubular_radius" => {
                model.tubular_radius = value.parse().map_err(|_| bad_num("tubular_radius"))?
            }
            _ => {
                if let Some(rest) = key.strip_prefix("pipeline.") {
                    let (idx, field) = rest.split_once('.').ok_or_else(|| {
                        ParseError(format!("line {}: expected pipeline.N.field", ln + 1))
                    })?;
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| ParseError(format!("line {}: bad step index", ln + 1)))?;
                    steps.entry(idx).or_default().insert(field.into(), value.into());
                } else if let Some(name) = key.strip_prefix("output.") {
                    outputs.insert(name.to_string(), value.to_string());
                } else {
                    return Err(ParseError(format!("line {}: unknown key {key}", ln + 1)));
                }
            }
        }
    }

    let schema_version =
        schema_version.ok_or_else(|| ParseError("missing schema_version".into()))?;
    if schema_version != SCHEMA_VERSION {
        return Err(ParseError(format!(
            "unsupported schema_version {schema_version}, expected {SCHEMA_VERSION}"
        )));
    }

    let mut pipeline = Vec::new();
    for (index, mut fields) in steps {
        let op = fields
            .remove("op")
            .ok_or_else(|| ParseError(format!("pipeline step {index} has no op")))?;
        let tol = match fields.remove("tol") {
            Some(v) => v
                .parse()
                .map_err(|_| ParseError(format!("pipeline step {index}: bad tol")))?,
            None => 1e-6,
        };
        if tol <= 0.0 {
            return Err(ParseError(format!("pipeline step {index}: tol must be positive")));
        }
        pipeline.push(StepSpec { index, op, tol, params: fields });
    }

    Ok(Scenario {
        schema_version,
        seed,
        model,
        pipeline,
        outputs,
    })
}
