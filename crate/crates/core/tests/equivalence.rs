//! Scoring identities checked against brute-force oracles.

use fmfm_core::cache::{build_cache, CachedModel, TieBreak};
use fmfm_core::model::{pair_score, transform, Direction, FieldPairMatrix};
use fmfm_core::{Architecture, FmModel, LinearMode, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(arch: Architecture, rng: &mut ChaCha8Rng) -> FmModel {
    let mut m = FmModel::zeros(arch, 0);
    m.params.for_each_mut(|p| *p = rng.random_range(-1.0..1.0));
    m
}

fn random_active(counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<u32> {
    counts.iter().map(|&c| rng.random_range(0..c) as u32).collect()
}

/// Error scaled by the reference magnitude, with unit floor so logits that
/// happen to land near zero are judged on absolute error.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// FM logit through the sum-of-squares identity, sharing no code with the
/// pairwise scorer.
fn fm_sum_of_squares(m: &FmModel, active: &[u32]) -> f64 {
    let k = m.arch().dims()[0];
    let mut s = m.params.bias;
    let mut sum = vec![0.0; k];
    let mut sq = 0.0;
    for (f, &a) in active.iter().enumerate() {
        s += m.params.linear[f][a as usize];
        let v = m.embedding(f, a as usize);
        for j in 0..k {
            sum[j] += v[j];
            sq += v[j] * v[j];
        }
    }
    s + 0.5 * (sum.iter().map(|x| x * x).sum::<f64>() - sq)
}

#[test]
fn shared_kinds_are_special_cases_of_full_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let counts = vec![7, 3, 11, 5, 2];
    let k = 4;
    for draw in 0..5 {
        for v in [Variant::Fm, Variant::FwFm, Variant::FvFm] {
            let linear = if draw % 2 == 0 { LinearMode::PerFeature } else { LinearMode::FieldShared };
            let arch = Architecture::new(v, linear, counts.clone(), vec![k; 5]).unwrap();
            let special = random_model(arch, &mut rng);
            let full_arch = Architecture::new(Variant::FmFm, linear, counts.clone(), vec![k; 5]).unwrap();
            let mut full = FmModel::zeros(full_arch.clone(), 0);
            full.params.bias = special.params.bias;
            full.params.linear = special.params.linear.clone();
            full.params.embeddings = special.params.embeddings.clone();
            for (pi, (a, b)) in full_arch.pairs().enumerate() {
                full.params.matrices[pi] = special.pair_matrix(a, b).unwrap().to_dense();
            }
            for _ in 0..200 {
                let act = random_active(&counts, &mut rng);
                let want = special.score(&act).unwrap();
                assert!(rel(full.score(&act).unwrap(), want) <= 1e-10, "{v}");
                if v == Variant::Fm && linear == LinearMode::PerFeature {
                    assert!(rel(fm_sum_of_squares(&special, &act), want) <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn ffm_matches_explicit_block_lookup() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let counts = vec![4, 6, 3, 5];
    let k = 3;
    let m = random_model(Architecture::uniform(Variant::Ffm, counts.clone(), k).unwrap(), &mut rng);
    let n = counts.len();
    for _ in 0..100 {
        let act = random_active(&counts, &mut rng);
        let mut want = m.params.bias;
        for (f, &a) in act.iter().enumerate() {
            want += m.params.linear[f][a as usize];
        }
        for i in 0..n {
            for j in i + 1..n {
                // field i's latent vector towards j, and j's towards i
                let slot = |own: usize, other: usize| if other < own { other } else { other - 1 };
                let row_i = m.embedding(i, act[i] as usize);
                let row_j = m.embedding(j, act[j] as usize);
                let (si, sj) = (slot(i, j), slot(j, i));
                want += (0..k).map(|c| row_i[si * k + c] * row_j[sj * k + c]).sum::<f64>();
            }
        }
        assert!(rel(m.score(&act).unwrap(), want) <= 1e-12);
    }
}

#[test]
fn transposed_interaction_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let (dk, dl) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let data: Vec<f64> = (0..dk * dl).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = FieldPairMatrix::full(dk, dl, data).unwrap();
        let v: Vec<f64> = (0..dk).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..dl).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = pair_score(&v, &u, &m).unwrap();
        let b = pair_score(&u, &v, &m.transposed()).unwrap();
        assert!(rel(b, a) <= 1e-12);
        let back = transform(&u, &m, Direction::Backward).unwrap();
        let c: f64 = back.iter().zip(&v).map(|(x, y)| x * y).sum();
        assert!(rel(c, a) <= 1e-12);
    }
}

#[test]
fn cached_scores_match_for_variable_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counts = vec![9, 4, 13, 6, 8, 3];
    let dims = vec![5, 1, 8, 3, 3, 12];
    for linear in [LinearMode::PerFeature, LinearMode::FieldShared] {
        let arch = Architecture::new(Variant::FmFm, linear, counts.clone(), dims.clone()).unwrap();
        let m = random_model(arch, &mut rng);
        let c64: CachedModel<f64> = build_cache(&m, TieBreak::LowerIndex).unwrap();
        let expected_len: usize = (0..6)
            .flat_map(|k| (k + 1..6).map(move |l| (k, l)))
            .map(|(k, l)| {
                let big = if dims[l] > dims[k] { l } else { k };
                counts[big] * dims[k].min(dims[l])
            })
            .sum();
        assert_eq!(c64.pair_table_len(), expected_len);
        for _ in 0..500 {
            let act = random_active(&counts, &mut rng);
            assert!(rel(c64.cached_score(&act).unwrap(), m.score(&act).unwrap()) <= 1e-10);
        }
    }
}
