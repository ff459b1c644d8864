//! Two-pass variable embedding dimensions.
//!
//! A model trained with one uniform dimension is inspected field by field:
//! the field's embedding rows are centered, the covariance spectrum is
//! computed, and the field keeps the smallest dimension whose leading
//! eigenvalues retain the requested fraction of the variance. The second
//! pass trains a fresh FmFM with those dimensions.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bin_io::read_header;
use crate::error::{format_err, Error, Result};
use crate::ingest::DatasetSplit;
use crate::model::{Architecture, FmModel, LinearMode, Variant};
use crate::train::{fit, init_model, TrainConfig, TrainReport};

pub const DIMS_MAGIC: &str = "fmfm-dims";
pub const DIMS_VERSION: u32 = 1;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DimsPlan {
    pub dims: Vec<usize>,
    pub variance_fraction: f64,
    /// Content hash of the model the plan was derived from; 0 when unknown.
    pub source_model_hash: u64,
}

impl DimsPlan {
    pub fn mean_dim(&self) -> f64 {
        self.dims.iter().sum::<usize>() as f64 / self.dims.len() as f64
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{DIMS_MAGIC} v{DIMS_VERSION} {}", self.variance_fraction)?;
        for (f, d) in self.dims.iter().enumerate() {
            writeln!(w, "{f}\t{d}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let rest = read_header(&mut r, "dims", DIMS_MAGIC, DIMS_VERSION)?;
        let variance_fraction: f64 = match rest.as_slice() {
            [f] => f.parse().map_err(|_| format_err("dims", format!("bad fraction {f:?}")))?,
            _ => return Err(format_err("dims", "header needs a variance fraction")),
        };
        let mut dims = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || format_err("dims", format!("bad line {line:?}"));
            let (f, d) = line.split_once('\t').ok_or_else(bad)?;
            let f: usize = f.parse().map_err(|_| bad())?;
            let d: usize = d.trim().parse().map_err(|_| bad())?;
            if f != dims.len() || d == 0 {
                return Err(bad());
            }
            dims.push(d);
        }
        if dims.is_empty() {
            return Err(format_err("dims", "no fields"));
        }
        Ok(Self {
            dims,
            variance_fraction,
            source_model_hash: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Eigen-decomposition of a field's embedding covariance.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Column `i` (row-major `width x width`) pairs with `eigenvalues[i]`.
    pub eigenvectors: Vec<f64>,
    pub covariance: Vec<f64>,
    pub width: usize,
}

/// Weighted covariance of `rows` (row-major, `width` columns). Each row's
/// weight defaults to 1.
pub fn covariance(rows: &[f64], width: usize, weights: Option<&[f64]>) -> Vec<f64> {
    let count = rows.len() / width;
    let w = |i: usize| weights.map_or(1.0, |ws| ws[i]);
    let total: f64 = (0..count).map(w).sum();
    let mut cov = vec![0.0; width * width];
    if count == 0 || total <= 0.0 {
        return cov;
    }
    let mut mean = vec![0.0; width];
    for (i, row) in rows.chunks_exact(width).enumerate() {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += w(i) * x);
    }
    mean.iter_mut().for_each(|m| *m /= total);
    for (i, row) in rows.chunks_exact(width).enumerate() {
        let wi = w(i);
        for a in 0..width {
            let da = row[a] - mean[a];
            for b in a..width {
                cov[a * width + b] += wi * da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..width {
        for b in a..width {
            let v = cov[a * width + b] / total;
            cov[a * width + b] = v;
            cov[b * width + a] = v;
        }
    }
    cov
}

pub fn field_spectrum(rows: &[f64], width: usize, weights: Option<&[f64]>) -> Spectrum {
    let covariance = covariance(rows, width, weights);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(width, width, &covariance));
    let mut order: Vec<usize> = (0..width).collect();
    // descending eigenvalue, ties by axis index
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut eigenvectors = vec![0.0; width * width];
    for (col, &i) in order.iter().enumerate() {
        for r in 0..width {
            eigenvectors[r * width + col] = eig.eigenvectors[(r, i)];
        }
    }
    Spectrum {
        eigenvalues,
        eigenvectors,
        covariance,
        width,
    }
}

/// Smallest `D >= 1` whose leading eigenvalues hold `fraction` of the total.
pub fn select_dim(eigenvalues: &[f64], fraction: f64) -> usize {
    let largest = eigenvalues.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 1;
    }
    let kept: Vec<f64> = eigenvalues
        .iter()
        .map(|&e| if e <= RANK_TOL * largest { 0.0 } else { e })
        .collect();
    let total: f64 = kept.iter().sum();
    let target = fraction * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (i, e) in kept.iter().enumerate() {
        cum += e;
        if cum >= target {
            return i + 1;
        }
    }
    kept.len().max(1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PcaWeighting {
    #[default]
    Unweighted,
    /// Rows weighted by feature frequency in the training stream.
    Frequency,
}

/// Per-field dimensions keeping `fraction` of each field's embedding variance.
///
/// `frequencies[f][i]` is required for [`PcaWeighting::Frequency`].
pub fn pca_field_dims_with(
    model: &FmModel,
    fraction: f64,
    weighting: PcaWeighting,
    frequencies: Option<&[Vec<u64>]>,
) -> Result<DimsPlan> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("variance fraction {fraction} not in (0, 1]")));
    }
    let arch = model.arch();
    if matches!(arch.variant(), Variant::Lr | Variant::Ffm) {
        return Err(Error::Unsupported(format!(
            "dimension reduction needs a shared-embedding model, got {}",
            arch.variant()
        )));
    }
    let dims = arch.dims();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::InvalidDims("source model must use one uniform dimension".into()));
    }
    let weights: Option<Vec<Vec<f64>>> = match weighting {
        PcaWeighting::Unweighted => None,
        PcaWeighting::Frequency => {
            let freq = frequencies
                .ok_or_else(|| Error::InvalidConfig("frequency weighting needs feature frequencies".into()))?;
            if freq.len() != arch.field_count()
                || freq.iter().zip(arch.feature_counts()).any(|(f, &c)| f.len() != c)
            {
                return Err(Error::SchemaMismatch("frequency table does not match the model".into()));
            }
            Some(freq.iter().map(|f| f.iter().map(|&c| c as f64).collect()).collect())
        }
    };
    let plan = (0..arch.field_count())
        .map(|f| {
            if arch.feature_counts()[f] < 2 {
                return 1;
            }
            let spectrum = field_spectrum(
                &model.params.embeddings[f],
                dims[f],
                weights.as_ref().map(|w| w[f].as_slice()),
            );
            select_dim(&spectrum.eigenvalues, fraction).min(dims[f])
        })
        .collect();
    Ok(DimsPlan {
        dims: plan,
        variance_fraction: fraction,
        source_model_hash: model.content_hash(),
    })
}

pub fn pca_field_dims(model: &FmModel, fraction: f64) -> Result<DimsPlan> {
    pca_field_dims_with(model, fraction, PcaWeighting::Unweighted, None)
}

/// Trains a fresh FmFM with the plan's per-field dimensions.
pub fn second_pass(
    feature_counts: Vec<usize>,
    schema_hash: u64,
    plan: &DimsPlan,
    linear: LinearMode,
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<(FmModel, TrainReport)> {
    let arch = Architecture::new(Variant::FmFm, linear, feature_counts, plan.dims.clone())?;
    let model = init_model(arch, schema_hash, config)?;
    fit(model, split, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_with_rows(rows_per_field: &[Vec<f64>], k: usize) -> FmModel {
        let counts = rows_per_field.iter().map(|r| r.len() / k).collect();
        let arch = Architecture::uniform(Variant::FmFm, counts, k).unwrap();
        let mut m = FmModel::zeros(arch, 0);
        m.params.embeddings = rows_per_field.to_vec();
        m
    }

    #[test]
    fn rank_one_field_gets_one_dimension() {
        let dir = [0.3, -1.0, 2.0, 0.5];
        let rows: Vec<f64> = (0..20).flat_map(|i| dir.map(|x| x * (i as f64 - 7.5))).collect();
        let m = model_with_rows(&[rows], 4);
        for frac in [0.5, 0.95, 1.0] {
            assert_eq!(pca_field_dims(&m, frac).unwrap().dims, vec![1]);
        }
    }

    #[test]
    fn full_fraction_keeps_the_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 6;
        let wide: Vec<f64> = (0..50 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let narrow: Vec<f64> = (0..4 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = model_with_rows(&[wide, narrow], k);
        // 4 rows span at most a 3-dimensional centered subspace
        assert_eq!(pca_field_dims(&m, 1.0).unwrap().dims, vec![6, 3]);
    }

    #[test]
    fn degenerate_fields_get_one() {
        let m = model_with_rows(&[vec![1.0, 2.0, 3.0], vec![0.5; 12]], 3);
        assert_eq!(pca_field_dims(&m, 0.9).unwrap().dims, vec![1, 1]);
    }

    #[test]
    fn fraction_is_validated() {
        let m = model_with_rows(&[vec![0.0; 6]], 3);
        assert!(pca_field_dims(&m, 0.0).is_err());
        assert!(pca_field_dims(&m, 1.5).is_err());
    }

    #[test]
    fn eigenpairs_reconstruct_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 1..=4 {
            for count in 2..=5 {
                let rows: Vec<f64> = (0..count * k).map(|_| rng.random_range(-2.0..2.0)).collect();
                let s = field_spectrum(&rows, k, None);
                // brute-force covariance
                let mean: Vec<f64> = (0..k)
                    .map(|a| (0..count).map(|i| rows[i * k + a]).sum::<f64>() / count as f64)
                    .collect();
                for a in 0..k {
                    for b in 0..k {
                        let brute: f64 = (0..count)
                            .map(|i| (rows[i * k + a] - mean[a]) * (rows[i * k + b] - mean[b]))
                            .sum::<f64>()
                            / count as f64;
                        let recon: f64 = (0..k)
                            .map(|c| s.eigenvalues[c] * s.eigenvectors[a * k + c] * s.eigenvectors[b * k + c])
                            .sum();
                        assert!((brute - recon).abs() <= 1e-10, "k={k} count={count}");
                    }
                }
                assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn frequency_weighting_changes_the_plan() {
        // heavy rows lie along one axis, the light rows spread in another
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.extend([i as f64, 0.0]);
        }
        for i in 0..10 {
            rows.extend([0.0, i as f64]);
        }
        let mut freq = vec![1000u64; 10];
        freq.extend([1u64; 10]);
        let m = model_with_rows(&[rows], 2);
        assert_eq!(pca_field_dims(&m, 0.9).unwrap().dims, vec![2]);
        let weighted = pca_field_dims_with(&m, 0.9, PcaWeighting::Frequency, Some(&[freq])).unwrap();
        assert_eq!(weighted.dims, vec![1]);
    }

    #[test]
    fn dims_file_round_trip() {
        let plan = DimsPlan {
            dims: vec![3, 1, 16],
            variance_fraction: 0.95,
            source_model_hash: 0,
        };
        let mut buf = Vec::new();
        plan.write(&mut buf).unwrap();
        assert_eq!(std::str::from_utf8(&buf).unwrap(), "fmfm-dims v1 0.95\n0\t3\n1\t1\n2\t16\n");
        assert_eq!(DimsPlan::read(&buf[..]).unwrap(), plan);
        assert!(DimsPlan::read(&b"fmfm-dims v1 0.9\n0\t0\n"[..]).is_err());
        assert!(DimsPlan::read(&b"fmfm-dims v2 0.9\n0\t1\n"[..]).is_err());
    }
}
