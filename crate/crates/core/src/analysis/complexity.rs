//! Parameter counts and inference FLOPs.
//!
//! FLOPs convention:
//! - a dot product of length `d` costs `2d + 1`;
//! - a `a x b` matrix-vector product costs `2ab`;
//! - scaling by a scalar costs 1, an elementwise (Hadamard) product of length `d` costs `d`;
//! - each per-feature linear weight costs 2 (lookup-add), a field-shared
//!   linear term costs a dot product `2 D_f + 1`;
//! - FM uses the sum-of-squares identity: `3` per field per dimension
//!   (accumulate the sum, square, accumulate the squares); the O(K) combine
//!   is not counted.
//!
//! A cached model folds each feature's linear term into one stored scalar,
//! so cached scoring always pays 2 per field for the linear part.

use crate::model::{LinearMode, Variant};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dims {
    Uniform(usize),
    PerField(Vec<usize>),
}

impl Dims {
    fn get(&self, f: usize) -> usize {
        match self {
            Dims::Uniform(k) => *k,
            Dims::PerField(d) => d[f],
        }
    }

    fn expand(&self, n: usize) -> Vec<usize> {
        (0..n).map(|f| self.get(f)).collect()
    }

    fn uniform_k(&self) -> usize {
        match self {
            Dims::Uniform(k) => *k,
            Dims::PerField(d) => {
                assert!(d.iter().all(|&x| x == d[0]), "variant requires uniform dimensions");
                d.first().copied().unwrap_or(0)
            }
        }
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |k| (k + 1..n).map(move |l| (k, l)))
}

/// Stored parameters (bias excluded) of a model with the given per-field
/// vocabulary sizes.
///
/// With per-feature linear terms these are the usual formulas
/// (LR `m`, FM `m + mK`, FwFM `m + mK + n(n-1)/2`, FmFM `m + mK + n(n-1)K^2/2`,
/// FFM `m + m(n-1)K`); field-shared linear terms replace `m` by `sum D_f`.
pub fn count_params(variant: Variant, feature_counts: &[usize], dims: &Dims, linear: LinearMode) -> u64 {
    let n = feature_counts.len();
    let m: u64 = feature_counts.iter().map(|&c| c as u64).sum();
    let d = dims.expand(n);
    let linear_part = match (variant, linear) {
        (Variant::Lr, _) | (_, LinearMode::PerFeature) => m,
        (_, LinearMode::FieldShared) => d.iter().map(|&x| x as u64).sum(),
    };
    let emb: u64 = feature_counts.iter().zip(&d).map(|(&c, &x)| (c * x) as u64).sum();
    let p = (n * n.saturating_sub(1) / 2) as u64;
    linear_part
        + match variant {
            Variant::Lr => 0,
            Variant::Fm => emb,
            Variant::FwFm => emb + p,
            Variant::FvFm => emb + pairs(n).map(|(k, _)| d[k] as u64).sum::<u64>(),
            Variant::FmFm => emb + pairs(n).map(|(k, l)| (d[k] * d[l]) as u64).sum::<u64>(),
            Variant::Ffm => emb * n.saturating_sub(1) as u64,
        }
}

/// Closed forms with `m` total features and per-feature linear terms.
pub fn count_params_uniform(variant: Variant, m: u64, n: u64, k: u64) -> u64 {
    let p = n * n.saturating_sub(1) / 2;
    match variant {
        Variant::Lr => m,
        Variant::Fm => m + m * k,
        Variant::FwFm => m + m * k + p,
        Variant::FvFm => m + m * k + p * k,
        Variant::FmFm => m + m * k + p * k * k,
        Variant::Ffm => m + m * n.saturating_sub(1) * k,
    }
}

/// Building blocks of the FLOPs convention.
pub mod flops {
    pub fn dot(d: u64) -> u64 {
        2 * d + 1
    }

    pub fn matvec(rows: u64, cols: u64) -> u64 {
        2 * rows * cols
    }

    pub fn scale() -> u64 {
        1
    }

    pub fn hadamard(d: u64) -> u64 {
        d
    }

    pub fn linear_per_feature() -> u64 {
        2
    }

    pub fn linear_field_shared(d: u64) -> u64 {
        dot(d)
    }
}

/// Estimated FLOPs to score one instance.
///
/// `cached` applies to the shared-embedding variants with a trainable matrix
/// (FwFM, FvFM, FmFM): each pair then costs one dot product of length
/// `min(D_k, D_l)` and the linear part is per-feature. It is ignored for LR,
/// FM and FFM, which have no transformation step.
pub fn estimate_flops(variant: Variant, n: usize, dims: &Dims, cached: bool, linear: LinearMode) -> u64 {
    let d: Vec<u64> = dims.expand(n).into_iter().map(|x| x as u64).collect();
    let p = (n * n.saturating_sub(1) / 2) as u64;
    let linear_cost = |shared_allowed: bool| -> u64 {
        match linear {
            LinearMode::FieldShared if shared_allowed => d.iter().map(|&x| flops::linear_field_shared(x)).sum(),
            _ => n as u64 * flops::linear_per_feature(),
        }
    };
    let shared_matrix = matches!(variant, Variant::FwFm | Variant::FvFm | Variant::FmFm);
    if cached && shared_matrix {
        let pair: u64 = pairs(n).map(|(k, l)| flops::dot(d[k].min(d[l]))).sum();
        return pair + n as u64 * flops::linear_per_feature();
    }
    match variant {
        Variant::Lr => n as u64 * flops::linear_per_feature(),
        Variant::Fm => {
            let k = dims.uniform_k() as u64;
            3 * n as u64 * k + linear_cost(false)
        }
        Variant::Ffm => {
            let k = dims.uniform_k() as u64;
            p * flops::dot(k) + linear_cost(false)
        }
        Variant::FwFm => {
            let k = dims.uniform_k() as u64;
            p * (flops::dot(k) + flops::scale()) + linear_cost(true)
        }
        Variant::FvFm => {
            let k = dims.uniform_k() as u64;
            p * (flops::hadamard(k) + flops::dot(k)) + linear_cost(true)
        }
        Variant::FmFm => {
            let pair: u64 = pairs(n)
                .map(|(k, l)| {
                    let (lo, hi) = (d[k].min(d[l]), d[k].max(d[l]));
                    // project the larger side down, then dot in the smaller space
                    flops::matvec(hi, lo) + flops::dot(lo)
                })
                .sum();
            pair + linear_cost(true)
        }
    }
}

/// `min(D_k, D_l)` for every field pair; the diagonal holds `D_f`.
pub fn cross_dim_map(dims: &[usize]) -> Vec<Vec<usize>> {
    dims.iter()
        .map(|&a| dims.iter().map(|&b| a.min(b)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, FmModel};
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(count_params_uniform(Variant::Fm, 100, 4, 3), 400);
        assert_eq!(count_params_uniform(Variant::FwFm, 100, 4, 3), 406);
        assert_eq!(count_params_uniform(Variant::FmFm, 100, 4, 3), 454);
        assert_eq!(count_params_uniform(Variant::Ffm, 100, 4, 3), 1000);
        for v in [Variant::Lr, Variant::Fm, Variant::FmFm, Variant::Ffm] {
            assert_eq!(count_params_uniform(v, 100, 4, 0), 100);
        }
    }

    #[test]
    fn per_field_counts_agree_with_closed_forms() {
        let counts = [10, 40, 30, 20];
        for v in Variant::ALL {
            assert_eq!(
                count_params(v, &counts, &Dims::Uniform(3), LinearMode::PerFeature),
                count_params_uniform(v, 100, 4, 3)
            );
        }
    }

    #[test]
    fn fmfm_minus_fm_is_the_matrices() {
        for (n, k) in [(2u64, 1u64), (5, 4), (39, 16)] {
            let m = 1000;
            let diff = count_params_uniform(Variant::FmFm, m, n, k) - count_params_uniform(Variant::Fm, m, n, k);
            assert_eq!(diff, n * (n - 1) * k * k / 2);
        }
    }

    #[test]
    fn reduced_dims_shrink_the_count() {
        let counts = [50, 60, 70];
        let full = count_params(Variant::FmFm, &counts, &Dims::Uniform(8), LinearMode::FieldShared);
        let ones = count_params(Variant::FmFm, &counts, &Dims::PerField(vec![1, 1, 1]), LinearMode::FieldShared);
        assert!(ones < full);
    }

    #[test]
    fn flops_anchor_values() {
        let k16 = Dims::Uniform(16);
        let pf = LinearMode::PerFeature;
        assert_eq!(estimate_flops(Variant::Lr, 39, &k16, false, pf), 78);
        assert_eq!(estimate_flops(Variant::Ffm, 39, &k16, false, pf), 24_531);
        assert_eq!(estimate_flops(Variant::FwFm, 39, &k16, false, pf), 25_272);
        assert_eq!(estimate_flops(Variant::FmFm, 39, &k16, false, pf), 403_923);
        assert_eq!(estimate_flops(Variant::FmFm, 39, &k16, true, pf), 24_531);
        assert_eq!(estimate_flops(Variant::Fm, 39, &k16, false, pf), 1_950);
    }

    #[test]
    fn cross_dims() {
        let m = cross_dim_map(&[2, 14, 5]);
        assert_eq!(m[0][1], 2);
        assert_eq!(m[1][2], 5);
        assert_eq!(m, (0..3).map(|i| (0..3).map(|j| m[j][i]).collect::<Vec<_>>()).collect::<Vec<_>>());
        assert!(cross_dim_map(&[4; 5]).iter().flatten().all(|&x| x == 4));
    }

    proptest! {
        #[test]
        fn cached_uniform_equals_ffm(n in 1usize..60, k in 1usize..40) {
            let d = Dims::Uniform(k);
            prop_assert_eq!(
                estimate_flops(Variant::FmFm, n, &d, true, LinearMode::PerFeature),
                estimate_flops(Variant::Ffm, n, &d, false, LinearMode::PerFeature)
            );
        }

        #[test]
        fn cross_dim_map_is_monotone(
            dims in prop::collection::vec(1usize..20, 2..10), f in 0usize..10, bump in 1usize..5
        ) {
            let f = f % dims.len();
            let before = cross_dim_map(&dims);
            let mut grown = dims.clone();
            grown[f] += bump;
            let after = cross_dim_map(&grown);
            for (r0, r1) in before.iter().zip(&after) {
                for (a, b) in r0.iter().zip(r1) {
                    prop_assert!(b >= a);
                }
            }
        }

        #[test]
        fn count_matches_constructed_model(
            counts in prop::collection::vec(1usize..30, 1..6),
            k in 1usize..5,
            var in 0usize..6,
            shared in any::<bool>(),
        ) {
            let v = Variant::ALL[var];
            let linear = if shared && !matches!(v, Variant::Lr | Variant::Ffm) {
                LinearMode::FieldShared
            } else {
                LinearMode::PerFeature
            };
            let n = counts.len();
            let dims: Vec<usize> = if v == Variant::FmFm { (0..n).map(|f| 1 + (f + k) % 4).collect() } else { vec![k; n] };
            let arch = Architecture::new(v, linear, counts.clone(), dims.clone()).unwrap();
            let model = FmModel::zeros(arch, 0);
            prop_assert_eq!(model.param_count() as u64, count_params(v, &counts, &Dims::PerField(dims), linear));
        }
    }
}
