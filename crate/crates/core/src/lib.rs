//! Random wheel: an interpretable, instance-based ensemble classifier for
//! mixed categorical and numeric tabular data.
//!
//! Training scores every attribute combination ("factor") up to a fixed depth
//! by how much sorting on it reduces the number of label runs ("bins"). At
//! recommendation time each randomized trial takes the top few factors, finds
//! the training records that agree with the observation on each of them, and
//! turns the class mix of those neighborhoods into forces on one wheel per
//! class. The fastest wheel on average wins; the margin over the runner-up is
//! the confidence, and the per-factor forces give a per-attribute explanation.

pub mod api;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod factors;
pub mod model_io;
pub mod rng;
pub mod wheel;

mod bitset;

pub use dataset::{AttributeKind, AttributeSchema, Dataset, FoldAssignment, Record, Value};
pub use error::{Error, Result};
pub use eval::{ConfidenceSplit, ConfusionMatrix, CrossValidation, MetricsReport};
pub use explain::{AttributionEntry, AttributionReport};
pub use factors::{Factor, FactorScore, FactorTable};
pub use wheel::{RandomWheelModel, Recommendation, TrialResult, WheelConfig};
