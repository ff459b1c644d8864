//! Synthetic multi-field categorical data with a planted interaction model.
//!
//! Feature ranks are drawn per field from a Zipf law, so vocabularies are
//! long-tailed the way click logs are. The label comes from a planted model
//! of a chosen [`MatrixKind`], which makes the best achievable structure
//! known in advance.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};

use crate::error::{Error, Result};
use crate::ingest::{split_dataset, Dataset, DatasetSplit};
use crate::model::{sigmoid, Architecture, FmModel, LinearMode, MatrixKind, Variant};
use crate::schema::FieldSchema;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    /// Distinct values per field (the unknown slot is extra).
    pub vocab: Vec<usize>,
    pub zipf_exponent: f64,
    pub truth_kind: MatrixKind,
    /// Planted embedding dimension per field. Kinds other than `Full` need
    /// them all equal.
    pub truth_dims: Vec<usize>,
    pub embedding_scale: f64,
    pub matrix_scale: f64,
    pub linear_scale: f64,
    pub bias: f64,
    /// Probability of flipping each drawn label.
    pub label_noise: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            vocab: vec![100; 8],
            zipf_exponent: 1.1,
            truth_kind: MatrixKind::Full,
            truth_dims: vec![4; 8],
            embedding_scale: 0.7,
            matrix_scale: 0.7,
            linear_scale: 0.3,
            bias: -0.5,
            label_noise: 0.0,
            samples: 20_000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// The planted Full-kind benchmark: 8 long-tailed fields of at most 1000
    /// values, low planted dimensions, 200k samples.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            vocab: vec![1000, 500, 200, 1000, 50, 800, 300, 100],
            zipf_exponent: 1.05,
            truth_kind: MatrixKind::Full,
            truth_dims: vec![2, 3, 1, 4, 2, 3, 1, 2],
            embedding_scale: 0.7,
            matrix_scale: 0.7,
            linear_scale: 0.3,
            bias: -0.5,
            label_noise: 0.0,
            samples: 200_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.vocab.is_empty() {
            return bad("at least one field is required".into());
        }
        if let Some(f) = self.vocab.iter().position(|&v| v == 0) {
            return bad(format!("field {f} has vocabulary size 0"));
        }
        if self.truth_dims.len() != self.vocab.len() {
            return bad(format!("{} truth dims for {} fields", self.truth_dims.len(), self.vocab.len()));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("zipf exponent {} must be >= 0", self.zipf_exponent));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad(format!("label noise {} not in [0, 1]", self.label_noise));
        }
        if self.samples == 0 {
            return bad("sample count must be positive".into());
        }
        for (name, s) in [
            ("embedding", self.embedding_scale),
            ("matrix", self.matrix_scale),
            ("linear", self.linear_scale),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} scale {s} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub schema: FieldSchema,
    pub data: Dataset,
    pub split: DatasetSplit,
    pub truth: FmModel,
    /// Distinct (field pair, feature pair) combinations seen in validation
    /// but never in train.
    pub unseen_pairs: usize,
}

fn schema_for(vocab: &[usize], counts: &[Vec<u64>]) -> FieldSchema {
    let names = (0..vocab.len()).map(|f| format!("f{f}")).collect();
    let tokens = counts
        .iter()
        .enumerate()
        .map(|(f, c)| (1..c.len()).map(|r| (format!("f{f}_{r}"), c[r])).collect())
        .collect();
    FieldSchema::from_parts(names, tokens)
}

fn plant(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<FmModel> {
    let counts: Vec<usize> = spec.vocab.iter().map(|v| v + 1).collect();
    let arch = Architecture::new(
        Variant::from_kind(spec.truth_kind),
        LinearMode::PerFeature,
        counts,
        spec.truth_dims.clone(),
    )?;
    let mut truth = FmModel::zeros(arch, 0);
    let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidConfig(e.to_string()));
    let emb = normal(spec.embedding_scale)?;
    let mat = normal(spec.matrix_scale)?;
    let lin = normal(spec.linear_scale)?;
    for table in &mut truth.params.embeddings {
        table.iter_mut().for_each(|x| *x = emb.sample(rng));
    }
    for payload in &mut truth.params.matrices {
        payload.iter_mut().for_each(|x| *x = mat.sample(rng));
    }
    for table in &mut truth.params.linear {
        table.iter_mut().for_each(|x| *x = lin.sample(rng));
    }
    truth.params.bias = spec.bias;
    Ok(truth)
}

/// Number of distinct `(pair, i, j)` co-occurrences in `b` absent from `a`.
pub fn unseen_pair_count(a: &Dataset, b: &Dataset) -> usize {
    let n = a.field_count();
    let key = |x: u32, y: u32| ((x as u64) << 32) | y as u64;
    let mut total = 0;
    for k in 0..n {
        for l in k + 1..n {
            let seen: HashSet<u64> = a.iter().map(|(_, r)| key(r[k], r[l])).collect();
            let fresh: HashSet<u64> = b
                .iter()
                .map(|(_, r)| key(r[k], r[l]))
                .filter(|x| !seen.contains(x))
                .collect();
            total += fresh.len();
        }
    }
    total
}

/// Draws a dataset from the planted model and splits it 80/10/10.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut param_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = plant(spec, &mut param_rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let zipfs = spec
        .vocab
        .iter()
        .map(|&v| Zipf::new(v as f64, spec.zipf_exponent).map_err(|e| Error::InvalidConfig(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let n = spec.vocab.len();
    let mut counts: Vec<Vec<u64>> = spec.vocab.iter().map(|&v| vec![0; v + 1]).collect();
    let mut data = Dataset::new(n);
    let mut active = vec![0u32; n];
    for _ in 0..spec.samples {
        for (f, z) in zipfs.iter().enumerate() {
            let rank = (z.sample(&mut rng) as usize).clamp(1, spec.vocab[f]);
            counts[f][rank] += 1;
            active[f] = rank as u32;
        }
        let p = sigmoid(truth.logit(&active));
        let mut positive = rng.random::<f64>() < p;
        if rng.random::<f64>() < spec.label_noise {
            positive = !positive;
        }
        data.push(if positive { 1 } else { -1 }, &active)?;
    }
    let schema = schema_for(&spec.vocab, &counts);
    let mut truth = truth;
    truth = FmModel::from_parts(truth.arch().clone(), schema.hash(), truth.params)?;
    let split = split_dataset(&data, spec.seed);
    let unseen_pairs = unseen_pair_count(&split.train, &split.validation);
    Ok(SynthOutput {
        schema,
        data,
        split,
        truth,
        unseen_pairs,
    })
}
