//! Model parameters and scoring for the factorization-machine family.
//!
//! FM, FwFM, FvFM and FmFM share one scorer: look up each active feature's
//! embedding, transform it by the field-pair matrix, and dot it with the
//! partner's embedding. They differ only in the [`MatrixKind`] of the
//! field-pair matrices. LR has no interaction term and FFM keeps a separate
//! field-aware embedding per partner field.

mod io;
mod pair;
mod score;

pub use pair::{pair_score, transform, Direction, FieldPairMatrix};
pub use score::{predict_proba, sigmoid, LOGIT_CLAMP};

pub(crate) use pair::{dot, pair_backward, pair_forward};

use crate::error::{Error, Result};

/// Constraint class of the field-pair matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    /// Fixed identity, no trainable payload.
    Identity,
    /// `r * I`
    Scalar,
    /// `diag(d)`
    Diagonal,
    /// Unconstrained, possibly rectangular.
    Full,
}

impl MatrixKind {
    pub fn degrees_of_freedom(self) -> u8 {
        match self {
            MatrixKind::Identity => 0,
            MatrixKind::Scalar => 1,
            MatrixKind::Diagonal => 2,
            MatrixKind::Full => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Identity => "identity",
            MatrixKind::Scalar => "scalar",
            MatrixKind::Diagonal => "diagonal",
            MatrixKind::Full => "full",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "scalar" => Ok(Self::Scalar),
            "diagonal" => Ok(Self::Diagonal),
            "full" => Ok(Self::Full),
            _ => Err(Error::InvalidConfig(format!("unknown matrix kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Lr,
    Fm,
    FwFm,
    FvFm,
    FmFm,
    Ffm,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Lr,
        Variant::Fm,
        Variant::FwFm,
        Variant::FvFm,
        Variant::FmFm,
        Variant::Ffm,
    ];

    /// Kind of the shared field-pair matrices; `None` for LR and FFM.
    pub fn matrix_kind(self) -> Option<MatrixKind> {
        match self {
            Variant::Fm => Some(MatrixKind::Identity),
            Variant::FwFm => Some(MatrixKind::Scalar),
            Variant::FvFm => Some(MatrixKind::Diagonal),
            Variant::FmFm => Some(MatrixKind::Full),
            Variant::Lr | Variant::Ffm => None,
        }
    }

    pub fn from_kind(kind: MatrixKind) -> Self {
        match kind {
            MatrixKind::Identity => Variant::Fm,
            MatrixKind::Scalar => Variant::FwFm,
            MatrixKind::Diagonal => Variant::FvFm,
            MatrixKind::Full => Variant::FmFm,
        }
    }

    /// Field-shared linear terms for FwFM, FvFM and FmFM; per-feature weights otherwise.
    pub fn default_linear(self) -> LinearMode {
        match self {
            Variant::FwFm | Variant::FvFm | Variant::FmFm => LinearMode::FieldShared,
            Variant::Lr | Variant::Fm | Variant::Ffm => LinearMode::PerFeature,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lr => "lr",
            Variant::Fm => "fm",
            Variant::FwFm => "fwfm",
            Variant::FvFm => "fvfm",
            Variant::FmFm => "fmfm",
            Variant::Ffm => "ffm",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        Variant::ALL.iter().position(|v| *v == self).unwrap() as u8
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Variant::ALL.get(tag as usize).copied()
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinearMode {
    /// One weight `w_i` per feature.
    PerFeature,
    /// One vector `w_f` per field, dotted with the active feature's embedding.
    FieldShared,
}

impl std::str::FromStr for LinearMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-feature" => Ok(Self::PerFeature),
            "field-shared" => Ok(Self::FieldShared),
            _ => Err(Error::InvalidConfig(format!("unknown linear mode {s:?}"))),
        }
    }
}

/// Shape of a model: variant, linear mode, per-field vocabulary sizes and
/// embedding dimensions. Everything about parameter layout derives from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    variant: Variant,
    linear: LinearMode,
    feature_counts: Vec<usize>,
    dims: Vec<usize>,
}

impl Architecture {
    /// `dims` is ignored for LR. FFM and every matrix kind except `Full`
    /// require one uniform dimension.
    pub fn new(variant: Variant, linear: LinearMode, feature_counts: Vec<usize>, dims: Vec<usize>) -> Result<Self> {
        let n = feature_counts.len();
        if n == 0 {
            return Err(Error::InvalidDims("a model needs at least one field".into()));
        }
        if let Some(f) = feature_counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidDims(format!("field {f} has no features")));
        }
        let dims = if variant == Variant::Lr {
            vec![0; n]
        } else {
            if dims.len() != n {
                return Err(Error::InvalidDims(format!("{} dims for {n} fields", dims.len())));
            }
            if let Some(f) = dims.iter().position(|&d| d == 0) {
                return Err(Error::InvalidDims(format!("field {f} has dimension 0")));
            }
            if variant != Variant::FmFm && dims.iter().any(|&d| d != dims[0]) {
                return Err(Error::InvalidDims(format!(
                    "{variant} requires a uniform embedding dimension"
                )));
            }
            dims
        };
        if linear == LinearMode::FieldShared && matches!(variant, Variant::Lr | Variant::Ffm) {
            return Err(Error::InvalidConfig(format!("{variant} supports per-feature linear terms only")));
        }
        Ok(Self {
            variant,
            linear,
            feature_counts,
            dims,
        })
    }

    pub fn uniform(variant: Variant, feature_counts: Vec<usize>, k: usize) -> Result<Self> {
        let n = feature_counts.len();
        Self::new(variant, variant.default_linear(), feature_counts, vec![k; n])
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn matrix_kind(&self) -> Option<MatrixKind> {
        self.variant.matrix_kind()
    }

    pub fn linear_mode(&self) -> LinearMode {
        self.linear
    }

    pub fn field_count(&self) -> usize {
        self.feature_counts.len()
    }

    pub fn feature_counts(&self) -> &[usize] {
        &self.feature_counts
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn pair_count(&self) -> usize {
        let n = self.field_count();
        n * (n - 1) / 2
    }

    /// Unordered field pairs `(k, l)`, `k < l`, in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.field_count();
        (0..n).flat_map(move |k| (k + 1..n).map(move |l| (k, l)))
    }

    pub fn pair_index(&self, k: usize, l: usize) -> usize {
        debug_assert!(k < l);
        let n = self.field_count();
        k * n - k * (k + 1) / 2 + (l - k - 1)
    }

    /// Stored floats per feature row of field `f`.
    pub fn row_width(&self, f: usize) -> usize {
        match self.variant {
            Variant::Lr => 0,
            Variant::Ffm => (self.field_count() - 1) * self.dims[f],
            _ => self.dims[f],
        }
    }

    pub fn linear_len(&self, f: usize) -> usize {
        match self.linear {
            LinearMode::PerFeature => self.feature_counts[f],
            LinearMode::FieldShared => self.dims[f],
        }
    }

    pub fn payload_len(&self, k: usize, l: usize) -> usize {
        match self.matrix_kind() {
            None | Some(MatrixKind::Identity) => 0,
            Some(MatrixKind::Scalar) => 1,
            Some(MatrixKind::Diagonal) => self.dims[k],
            Some(MatrixKind::Full) => self.dims[k] * self.dims[l],
        }
    }

    pub fn zero_params(&self) -> Params {
        let n = self.field_count();
        Params {
            bias: 0.0,
            linear: (0..n).map(|f| vec![0.0; self.linear_len(f)]).collect(),
            embeddings: (0..n)
                .map(|f| vec![0.0; self.feature_counts[f] * self.row_width(f)])
                .collect(),
            matrices: self.pairs().map(|(k, l)| vec![0.0; self.payload_len(k, l)]).collect(),
        }
    }
}

/// All trainable numbers of a model. Gradients and optimizer state use the
/// same container.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub bias: f64,
    /// Per field: `feature_count` weights (per-feature) or `dim` weights (field-shared).
    pub linear: Vec<Vec<f64>>,
    /// Per field, row-major `feature_count x row_width`.
    pub embeddings: Vec<Vec<f64>>,
    /// Per unordered field pair in [`Architecture::pairs`] order. Full
    /// payloads are row-major `dims[k] x dims[l]`.
    pub matrices: Vec<Vec<f64>>,
}

impl Params {
    /// Number of stored parameters, bias excluded.
    pub fn count(&self) -> usize {
        let sum = |v: &Vec<Vec<f64>>| v.iter().map(Vec::len).sum::<usize>();
        sum(&self.linear) + sum(&self.embeddings) + sum(&self.matrices)
    }

    /// Squared L2 norm of everything except the bias.
    pub fn norm_sq(&self) -> f64 {
        self.non_bias().map(|x| x * x).sum()
    }

    fn non_bias(&self) -> impl Iterator<Item = f64> + '_ {
        self.linear
            .iter()
            .chain(&self.embeddings)
            .chain(&self.matrices)
            .flat_map(|v| v.iter().copied())
    }

    /// Visits every parameter, bias first.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        f(&mut self.bias);
        for v in self
            .linear
            .iter_mut()
            .chain(&mut self.embeddings)
            .chain(&mut self.matrices)
        {
            v.iter_mut().for_each(&mut f);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        std::iter::once(self.bias).chain(self.non_bias()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.non_bias().all(f64::is_finite)
    }
}

/// A model: its architecture, the hash of the schema it was built against,
/// and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FmModel {
    arch: Architecture,
    schema_hash: u64,
    pub params: Params,
}

impl FmModel {
    /// All-zero model. Use [`crate::train::init_model`] for a trainable start.
    pub fn zeros(arch: Architecture, schema_hash: u64) -> Self {
        let params = arch.zero_params();
        Self {
            arch,
            schema_hash,
            params,
        }
    }

    pub fn from_parts(arch: Architecture, schema_hash: u64, params: Params) -> Result<Self> {
        let expected = arch.zero_params();
        let shape = |p: &Params| {
            (
                p.linear.iter().map(Vec::len).collect::<Vec<_>>(),
                p.embeddings.iter().map(Vec::len).collect::<Vec<_>>(),
                p.matrices.iter().map(Vec::len).collect::<Vec<_>>(),
            )
        };
        if shape(&expected) != shape(&params) {
            return Err(Error::InvalidDims("parameter shapes do not match the architecture".into()));
        }
        Ok(Self {
            arch,
            schema_hash,
            params,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn variant(&self) -> Variant {
        self.arch.variant
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema_hash
    }

    pub fn field_count(&self) -> usize {
        self.arch.field_count()
    }

    /// Embedding row of `feature` in field `f`.
    pub fn embedding(&self, f: usize, feature: usize) -> &[f64] {
        let w = self.arch.row_width(f);
        &self.params.embeddings[f][feature * w..(feature + 1) * w]
    }

    /// The stored matrix for field pair `(k, l)`, `k < l`.
    pub fn pair_matrix(&self, k: usize, l: usize) -> Option<FieldPairMatrix> {
        let kind = self.arch.matrix_kind()?;
        let idx = self.arch.pair_index(k, l);
        Some(FieldPairMatrix::from_raw(
            (k, l),
            kind,
            self.arch.dims[k],
            self.arch.dims[l],
            self.params.matrices[idx].clone(),
        ))
    }

    /// Number of stored parameters, bias excluded.
    pub fn param_count(&self) -> usize {
        self.params.count()
    }
}
