use fmfm_core::train::{gradients, loss};
use fmfm_core::{Architecture, Dataset, FmModel, LinearMode, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

fn toy_data(counts: &[usize], rows: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let mut ds = Dataset::new(counts.len());
    for _ in 0..rows {
        let act: Vec<u32> = counts.iter().map(|&c| rng.random_range(0..c) as u32).collect();
        ds.push(if rng.random_bool(0.5) { 1 } else { -1 }, &act).unwrap();
    }
    ds
}

/// Largest disagreement between analytic gradients and central differences,
/// relative to the larger magnitude (floored at 1e-4 so entries that are
/// zero on both sides count by absolute error).
fn max_fd_error(model: &FmModel, data: &Dataset, l2: f64) -> f64 {
    let analytic = gradients(model, data, l2).unwrap().values();
    let theta = model.params.values();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for idx in 0..analytic.len() {
        let set = |m: &mut FmModel, value: f64| {
            let mut j = 0;
            m.params.for_each_mut(|p| {
                if j == idx {
                    *p = value;
                }
                j += 1;
            });
        };
        let x = theta[idx];
        set(&mut probe, x + H);
        let up = loss(&probe, data, l2).unwrap();
        set(&mut probe, x - H);
        let down = loss(&probe, data, l2).unwrap();
        set(&mut probe, x);
        let numeric = (up - down) / (2.0 * H);
        let a = analytic[idx];
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let counts = vec![3, 4, 2, 3];
    for v in Variant::ALL {
        for linear in [LinearMode::PerFeature, LinearMode::FieldShared] {
            if linear == LinearMode::FieldShared && matches!(v, Variant::Lr | Variant::Ffm) {
                continue;
            }
            let dims = if v == Variant::FmFm { vec![2, 3, 1, 2] } else { vec![2; 4] };
            let arch = Architecture::new(v, linear, counts.clone(), dims).unwrap();
            let mut m = FmModel::zeros(arch, 0);
            m.params.for_each_mut(|p| *p = rng.random_range(-0.8..0.8));
            let data = toy_data(&counts, 12, &mut rng);
            for l2 in [0.0, 0.05] {
                let err = max_fd_error(&m, &data, l2);
                assert!(err <= 1e-6, "{v} {linear:?} l2={l2}: {err:e}");
            }
        }
    }
}
