//! Model persistence as a single self-describing JSON document.
//!
//! Numbers are written in their shortest round-trip form and parsed with
//! correct rounding, so a saved model loads back bit-for-bit. On load the
//! priors and standard deviations are recomputed from the stored records and
//! must match exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeSchema, Dataset, Record};
use crate::error::{Error, Result};
use crate::factors::FactorTable;
use crate::wheel::{RandomWheelModel, WheelConfig};

pub const MODEL_FORMAT: &str = "random-wheel-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    config: WheelConfig,
    schema: Vec<AttributeSchema>,
    class_tokens: Vec<String>,
    priors: Vec<f64>,
    sigmas: Vec<Option<f64>>,
    factor_table: FactorTable,
    records: Vec<Record>,
}

pub fn to_json(model: &RandomWheelModel) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: model.config().clone(),
        schema: model.dataset().schema().to_vec(),
        class_tokens: model.dataset().class_tokens().to_vec(),
        priors: model.priors().to_vec(),
        sigmas: model.sigmas().to_vec(),
        factor_table: model.factor_table().clone(),
        records: model.dataset().records().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<RandomWheelModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Model(format!("unexpected format `{}`", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Model(format!("unsupported version {}", file.version)));
    }
    let records = file
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.values.len() != file.schema.len() {
                return Err(Error::Model(format!("record {i} has the wrong number of values")));
            }
            let values = r
                .values
                .into_iter()
                .zip(&file.schema)
                .map(|(v, a)| v.coerce(a.kind).map_err(|m| Error::Model(format!("record {i}: {m}"))))
                .collect::<Result<_>>()?;
            Ok(Record { values, label: r.label })
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = Dataset::new(file.schema, file.class_tokens, records).map_err(|e| Error::Model(e.to_string()))?;
    RandomWheelModel::from_parts(dataset, file.factor_table, file.priors, file.sigmas, file.config)
        .map_err(|e| match e {
            Error::Model(_) => e,
            other => Error::Model(other.to_string()),
        })
}

pub fn save(model: &RandomWheelModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<RandomWheelModel> {
    from_json(&std::fs::read_to_string(path)?)
}
