//! Fixtures shared by the benchmarks under `benches/`.

use fmfm_core::{Architecture, Dataset, FmModel, LinearMode, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A model with every parameter drawn uniformly from `[-0.1, 0.1)`.
pub fn random_model(variant: Variant, feature_counts: Vec<usize>, dims: Vec<usize>, seed: u64) -> FmModel {
    let arch = Architecture::new(variant, LinearMode::PerFeature, feature_counts, dims).expect("valid architecture");
    let mut model = FmModel::zeros(arch, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.params.for_each_mut(|p| *p = rng.random_range(-0.1..0.1));
    model
}

/// `rows` instances with uniformly drawn features and balanced labels.
pub fn random_data(feature_counts: &[usize], rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::new(feature_counts.len());
    for _ in 0..rows {
        let active: Vec<u32> = feature_counts.iter().map(|&c| rng.random_range(0..c) as u32).collect();
        data.push(if rng.random_bool(0.5) { 1 } else { -1 }, &active).expect("row fits");
    }
    data
}
