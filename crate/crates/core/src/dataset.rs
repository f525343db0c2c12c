//! Typed mixed-kind tabular data: schema, parsing, class priors, per-attribute
//! spread, stratified folds, and label-run ("bin") counting.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Marker for a missing value in data files.
pub const MISSING_MARKER: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Integer,
    Real,
}

impl AttributeKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, AttributeKind::Categorical)
    }
}

impl FromStr for AttributeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" | "nominal" => Ok(AttributeKind::Categorical),
            "integer" | "int" => Ok(AttributeKind::Integer),
            "real" | "float" | "continuous" => Ok(AttributeKind::Real),
            other => Err(format!("unknown attribute kind `{other}`")),
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::Categorical => "categorical",
            AttributeKind::Integer => "integer",
            AttributeKind::Real => "real",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub name: String,
    pub kind: AttributeKind,
    /// 0-based index among the attributes (the class column is not counted).
    pub position: usize,
}

impl AttributeSchema {
    pub fn new(name: impl Into<String>, kind: AttributeKind, position: usize) -> Self {
        Self { name: name.into(), kind, position }
    }
}

/// A single cell. In files and in JSON a missing value is `?` / `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Categorical(String),
    Integer(i64),
    Real(f64),
    Missing,
}

impl Value {
    /// Parses a raw token for a column of the given kind.
    pub fn parse(token: &str, kind: AttributeKind) -> std::result::Result<Value, String> {
        let token = token.trim();
        if token == MISSING_MARKER {
            return Ok(Value::Missing);
        }
        match kind {
            AttributeKind::Categorical => {
                if token.is_empty() {
                    Err("empty categorical token".to_string())
                } else {
                    Ok(Value::Categorical(token.to_string()))
                }
            }
            AttributeKind::Integer => token
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| format!("`{token}` is not an integer")),
            AttributeKind::Real => match token.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Value::Real(v)),
                Ok(_) => Err(format!("`{token}` is not a finite number")),
                Err(_) => Err(format!("`{token}` is not a number")),
            },
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Integer(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Value::Categorical(s) => Some(s),
            _ => None,
        }
    }

    /// Whether this value may live in a column of `kind`.
    pub fn fits(&self, kind: AttributeKind) -> bool {
        matches!(
            (self, kind),
            (Value::Missing, _)
                | (Value::Categorical(_), AttributeKind::Categorical)
                | (Value::Integer(_), AttributeKind::Integer)
                | (Value::Real(_), AttributeKind::Real)
        )
    }

    /// Brings a value decoded without schema knowledge (e.g. from JSON, where
    /// `3` and `3.0` may both appear) into the representation for `kind`.
    pub fn coerce(self, kind: AttributeKind) -> std::result::Result<Value, String> {
        match (self, kind) {
            (v, _) if v.is_missing() => Ok(Value::Missing),
            (Value::Categorical(s), _) if s == MISSING_MARKER => Ok(Value::Missing),
            (Value::Categorical(s), AttributeKind::Categorical) => Ok(Value::Categorical(s)),
            (Value::Integer(v), AttributeKind::Integer) => Ok(Value::Integer(v)),
            (Value::Integer(v), AttributeKind::Real) => Ok(Value::Real(v as f64)),
            (Value::Real(v), AttributeKind::Real) if v.is_finite() => Ok(Value::Real(v)),
            (Value::Real(v), AttributeKind::Integer)
                if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 =>
            {
                Ok(Value::Integer(v as i64))
            }
            (Value::Categorical(s), k) if k.is_numeric() => Value::parse(&s, k),
            (v, k) => Err(format!("value `{v}` does not fit a {k} attribute")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Categorical(s) => f.write_str(s),
            Value::Integer(v) => write!(f, "{v}"),
            // `Display` for f64 is the shortest string that parses back to the same bits.
            Value::Real(v) => write!(f, "{v}"),
            Value::Missing => f.write_str(MISSING_MARKER),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub values: Vec<Value>,
    /// Index into [`Dataset::class_tokens`].
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<AttributeSchema>,
    class_tokens: Vec<String>,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(
        schema: Vec<AttributeSchema>,
        class_tokens: Vec<String>,
        records: Vec<Record>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        if class_tokens.len() < 2 {
            return Err(Error::domain("a dataset needs at least two class labels"));
        }
        for (i, token) in class_tokens.iter().enumerate() {
            if class_tokens[..i].contains(token) {
                return Err(Error::domain(format!("duplicate class label `{token}`")));
            }
        }
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        for (r, record) in records.iter().enumerate() {
            if record.values.len() != schema.len() {
                return Err(Error::domain(format!(
                    "record {r} has {} values, expected {}",
                    record.values.len(),
                    schema.len()
                )));
            }
            if record.label >= class_tokens.len() {
                return Err(Error::domain(format!("record {r} has an unknown class label")));
            }
            for (value, attr) in record.values.iter().zip(&schema) {
                if !value.fits(attr.kind) {
                    return Err(Error::domain(format!(
                        "record {r}: value `{value}` does not fit {} attribute {}",
                        attr.kind, attr.name
                    )));
                }
                if let Value::Real(v) = value {
                    if !v.is_finite() {
                        return Err(Error::domain(format!("record {r}: non-finite value")));
                    }
                }
            }
        }
        Ok(Self { schema, class_tokens, records })
    }

    pub fn schema(&self) -> &[AttributeSchema] {
        &self.schema
    }

    pub fn class_tokens(&self) -> &[String] {
        &self.class_tokens
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn attribute_count(&self) -> usize {
        self.schema.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_tokens.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.label)
    }

    pub fn label_token(&self, label: usize) -> &str {
        &self.class_tokens[label]
    }

    pub fn class_index(&self, token: &str) -> Option<usize> {
        self.class_tokens.iter().position(|t| t == token)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeSchema> {
        self.schema.iter().find(|a| a.name == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_tokens.len()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// A dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::new(self.schema.clone(), self.class_tokens.clone(), records)
    }

    /// Same attribute values with the given labels (one per record).
    pub fn with_labels(&self, labels: &[usize]) -> Result<Dataset> {
        if labels.len() != self.records.len() {
            return Err(Error::domain("label count does not match record count"));
        }
        let records = self
            .records
            .iter()
            .zip(labels)
            .map(|(r, &label)| Record { values: r.values.clone(), label })
            .collect();
        Dataset::new(self.schema.clone(), self.class_tokens.clone(), records)
    }

    /// Writes the records back out as comma-separated lines with the class
    /// label last and `?` for missing values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            for v in &r.values {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&self.class_tokens[r.label]);
            out.push('\n');
        }
        out
    }
}

pub(crate) fn validate_schema(schema: &[AttributeSchema]) -> Result<()> {
    if schema.is_empty() {
        return Err(Error::domain("schema has no attributes"));
    }
    for (i, attr) in schema.iter().enumerate() {
        if attr.position != i {
            return Err(Error::domain(format!(
                "attribute {} has position {}, expected {i} (positions must be contiguous from 0)",
                attr.name, attr.position
            )));
        }
        if schema[..i].iter().any(|a| a.name == attr.name) {
            return Err(Error::domain(format!("duplicate attribute name {}", attr.name)));
        }
    }
    Ok(())
}

/// Contents of a sidecar schema file.
///
/// One `name,kind` line per column in file order, where kind is one of
/// `categorical`, `integer`, `real` or `class`. A `class` line may list the
/// allowed labels after the kind (`A16,class,+,-`). Without a `class` line the
/// label is the last column. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaFile {
    pub attributes: Vec<AttributeSchema>,
    pub class_name: String,
    pub options: ParseOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    /// Column index of the class label within each line.
    pub class_column: usize,
    /// Allowed labels in order. When `None`, labels are collected in order of
    /// first appearance.
    pub class_tokens: Option<Vec<String>>,
}

pub fn parse_schema(text: &str) -> Result<SchemaFile> {
    let mut attributes = Vec::new();
    let mut class: Option<(usize, String, Option<Vec<String>>)> = None;
    let mut column = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields[0].is_empty() {
            return Err(err(format!("expected `name,kind`, found `{line}`")));
        }
        if fields[1].eq_ignore_ascii_case("class") {
            if class.is_some() {
                return Err(err("more than one class column".to_string()));
            }
            let tokens = (fields.len() > 2)
                .then(|| fields[2..].iter().map(|t| t.to_string()).collect::<Vec<_>>());
            class = Some((column, fields[0].to_string(), tokens));
        } else {
            if fields.len() != 2 {
                return Err(err(format!("expected `name,kind`, found `{line}`")));
            }
            let kind = fields[1].parse::<AttributeKind>().map_err(err)?;
            let position = attributes.len();
            attributes.push(AttributeSchema::new(fields[0], kind, position));
        }
        column += 1;
    }
    validate_schema(&attributes)?;
    let (class_column, class_name, class_tokens) =
        class.unwrap_or((attributes.len(), "class".to_string(), None));
    Ok(SchemaFile { attributes, class_name, options: ParseOptions { class_column, class_tokens } })
}

/// Parses comma-separated records typed by `schema`.
pub fn parse_dataset(text: &str, schema: &[AttributeSchema], options: &ParseOptions) -> Result<Dataset> {
    validate_schema(schema)?;
    let n = schema.len();
    if options.class_column > n {
        return Err(Error::domain(format!(
            "class column {} is outside the {} columns",
            options.class_column,
            n + 1
        )));
    }
    let declared = options.class_tokens.is_some();
    let mut class_tokens = options.class_tokens.clone().unwrap_or_default();
    let mut records = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", n + 1, fields.len()),
            });
        }
        let token = fields[options.class_column];
        let label = match class_tokens.iter().position(|t| t == token) {
            Some(l) => l,
            None if !declared && !token.is_empty() && token != MISSING_MARKER => {
                class_tokens.push(token.to_string());
                class_tokens.len() - 1
            }
            None => {
                return Err(Error::Parse { line, message: format!("unknown class label `{token}`") })
            }
        };
        let values = schema
            .iter()
            .map(|attr| {
                let col = if attr.position < options.class_column { attr.position } else { attr.position + 1 };
                Value::parse(fields[col], attr.kind).map_err(|m| Error::Parse {
                    line,
                    message: format!("column {} ({}): {m}", col + 1, attr.name),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(Record { values, label });
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Dataset::new(schema.to_vec(), class_tokens, records)
}

/// Reads a schema file and a data file.
pub fn read_dataset(data_path: &Path, schema_path: &Path) -> Result<Dataset> {
    let schema = parse_schema(&std::fs::read_to_string(schema_path)?)?;
    let text = std::fs::read_to_string(data_path)?;
    parse_dataset(&text, &schema.attributes, &schema.options)
}

/// Relative frequency of each class, indexed like [`Dataset::class_tokens`].
pub fn class_prior(dataset: &Dataset) -> Vec<f64> {
    let total = dataset.len() as f64;
    dataset.class_counts().into_iter().map(|c| c as f64 / total).collect()
}

/// Population standard deviation of a numeric attribute over its non-missing values.
pub fn attribute_stddev(dataset: &Dataset, position: usize) -> Result<f64> {
    let attr = dataset
        .schema()
        .get(position)
        .ok_or_else(|| Error::domain(format!("no attribute at position {position}")))?;
    if !attr.kind.is_numeric() {
        return Err(Error::domain(format!("attribute {} is categorical", attr.name)));
    }
    let values: Vec<f64> = dataset.records().iter().filter_map(|r| r.values[position].as_f64()).collect();
    if values.is_empty() {
        return Err(Error::domain(format!("attribute {} has no values", attr.name)));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Fold index of every record.
    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Assigns records to `k` folds so that each class is spread as evenly as
/// possible (per-fold class counts differ by at most one).
pub fn stratified_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::domain(format!("k must be at least 2, got {k}")));
    }
    if k > dataset.len() {
        return Err(Error::domain(format!("k = {k} exceeds the {} records", dataset.len())));
    }
    let mut rng = rng::stream(&[rng::TAG_FOLDS, seed]);
    let mut order = Vec::with_capacity(dataset.len());
    for class in 0..dataset.class_count() {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.records()[i].label == class).collect();
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut folds = vec![0; dataset.len()];
    for (slot, &record) in order.iter().enumerate() {
        folds[record] = slot % k;
    }
    Ok(FoldAssignment { k, folds })
}

/// Number of maximal runs of equal labels.
pub fn count_bins<T: PartialEq>(labels: &[T]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::domain("cannot count bins of an empty label sequence"));
    }
    Ok(1 + labels.windows(2).filter(|w| w[0] != w[1]).count())
}
