//! Field-matrixed factorization machines for sparse multi-field
//! categorical data.
//!
//! The crate covers the whole pipeline: building a vocabulary schema,
//! encoding and splitting raw logs, training LR, FM, FwFM, FvFM, FmFM and
//! FFM, picking per-field embedding dimensions from a trained model,
//! compiling a model into a cached scorer, and accounting for parameters
//! and FLOPs.
//!
//! ```
//! use fmfm_core::model::{Architecture, FmModel, Variant};
//!
//! let arch = Architecture::uniform(Variant::FmFm, vec![10, 20, 5], 4).unwrap();
//! let model = FmModel::zeros(arch, 0);
//! assert_eq!(model.score(&[1, 2, 3]).unwrap(), 0.0);
//! ```

pub mod analysis;
mod bin_io;
pub mod cache;
pub mod error;
pub mod ingest;
pub mod model;
pub mod reduce;
pub mod schema;
pub mod synth;
pub mod train;

pub use cache::{build_cache, CachedModel, TieBreak};
pub use error::{Error, Result};
pub use ingest::{Dataset, DatasetSplit, EncodedInstance};
pub use model::{Architecture, FieldPairMatrix, FmModel, LinearMode, MatrixKind, Variant};
pub use reduce::DimsPlan;
pub use schema::{FieldDescriptor, FieldSchema, GlobalFeatureId};
pub use train::{TrainConfig, TrainReport};
