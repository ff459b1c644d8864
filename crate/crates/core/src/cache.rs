//! Precomputed intermediate vectors for shared-embedding models.
//!
//! For a pair `(k, l)` the interaction `<v_k M, v_l>` can be rewritten as a
//! plain dot product once one side's transformed vectors are stored. The
//! cache transforms the side with the larger embedding dimension, so every
//! stored vector and every dot product has length `min(D_k, D_l)`. The
//! resulting scorer has the shape of an FFM: one lookup and one dot product
//! per pair, and no matrix products at inference time.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::bin_io::*;
use crate::error::{format_err, Error, Result};
use crate::ingest::Dataset;
use crate::model::{dot, FmModel, LinearMode, MatrixKind, Variant};

pub const CACHE_MAGIC: &str = "fmfm-cache";
pub const CACHE_VERSION: u32 = 1;

/// Storage precision of cached tables.
pub trait CacheFloat: Copy + Send + Sync + std::fmt::Debug + PartialEq + 'static {
    const BYTES: u8;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn put<W: Write>(w: &mut W, xs: &[Self]) -> Result<()>;
    fn get<R: BufRead>(r: &mut R, len: usize) -> Result<Vec<Self>>;
}

impl CacheFloat for f32 {
    const BYTES: u8 = 4;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn put<W: Write>(w: &mut W, xs: &[Self]) -> Result<()> {
        put_f32s(w, xs)
    }
    fn get<R: BufRead>(r: &mut R, len: usize) -> Result<Vec<Self>> {
        get_f32s(r, len, "cache")
    }
}

impl CacheFloat for f64 {
    const BYTES: u8 = 8;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn put<W: Write>(w: &mut W, xs: &[Self]) -> Result<()> {
        put_f64s(w, xs)
    }
    fn get<R: BufRead>(r: &mut R, len: usize) -> Result<Vec<Self>> {
        get_f64s(r, len, "cache")
    }
}

/// Which field to cache when both sides of a pair share a dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    LowerIndex,
    /// The field with more features, lower index if those tie as well.
    MoreFeatures,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairCache {
    pub k: usize,
    pub l: usize,
    pub cached_side: usize,
    /// Length of every stored vector: the other side's dimension.
    pub dim: usize,
    /// Where this pair's vector starts inside each row of the cached side.
    pub offset: usize,
}

impl PairCache {
    pub fn other_side(&self) -> usize {
        if self.cached_side == self.k {
            self.l
        } else {
            self.k
        }
    }
}

/// An immutable FFM-shaped scorer built from a trained model.
///
/// Each feature owns one contiguous row: its folded linear weight, its raw
/// embedding, then the transformed vectors of every pair that caches its
/// field, in pair order. Scoring an instance therefore touches one row per
/// field rather than one table per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedModel<T: CacheFloat = f32> {
    source_hash: u64,
    schema_hash: u64,
    kind: MatrixKind,
    feature_counts: Vec<usize>,
    dims: Vec<usize>,
    bias: f64,
    pairs: Vec<PairCache>,
    widths: Vec<usize>,
    rows: Vec<Vec<T>>,
}

/// Row offset of the raw embedding; slot 0 holds the linear weight.
const EMBEDDING_AT: usize = 1;

/// Row layout for the given pair sides: per-field widths and each pair's offset.
fn layout(dims: &[usize], sides: &[(usize, usize, usize, usize)]) -> (Vec<usize>, Vec<PairCache>) {
    let mut widths: Vec<usize> = dims.iter().map(|d| EMBEDDING_AT + d).collect();
    let pairs = sides
        .iter()
        .map(|&(k, l, cached_side, dim)| {
            let offset = widths[cached_side];
            widths[cached_side] += dim;
            PairCache {
                k,
                l,
                cached_side,
                dim,
                offset,
            }
        })
        .collect();
    (widths, pairs)
}

/// Interleaves linear weights, embeddings and pair-major vectors into rows.
fn assemble<T: CacheFloat>(
    counts: &[usize],
    dims: &[usize],
    widths: &[usize],
    pairs: &[PairCache],
    linear: &[Vec<T>],
    embeddings: &[Vec<T>],
    vectors: &[Vec<T>],
) -> Vec<Vec<T>> {
    let mut rows: Vec<Vec<T>> = counts
        .iter()
        .zip(widths)
        .map(|(&c, &w)| vec![T::from_f64(0.0); c * w])
        .collect();
    for f in 0..counts.len() {
        let (w, d) = (widths[f], dims[f]);
        for i in 0..counts[f] {
            let row = &mut rows[f][i * w..(i + 1) * w];
            row[0] = linear[f][i];
            row[EMBEDDING_AT..EMBEDDING_AT + d].copy_from_slice(&embeddings[f][i * d..(i + 1) * d]);
        }
    }
    for (p, v) in pairs.iter().zip(vectors) {
        let w = widths[p.cached_side];
        for (i, src) in v.chunks_exact(p.dim.max(1)).enumerate().take(counts[p.cached_side]) {
            let at = i * w + p.offset;
            rows[p.cached_side][at..at + p.dim].copy_from_slice(&src[..p.dim]);
        }
    }
    rows
}

/// Picks the field whose vectors get transformed and stored.
pub fn cached_side(k: usize, l: usize, dims: &[usize], counts: &[usize], tie: TieBreak) -> usize {
    use std::cmp::Ordering::*;
    match dims[k].cmp(&dims[l]) {
        Greater => k,
        Less => l,
        Equal => match tie {
            TieBreak::LowerIndex => k,
            TieBreak::MoreFeatures if counts[l] > counts[k] => l,
            TieBreak::MoreFeatures => k,
        },
    }
}

/// The cached side, vector length and pair-major vectors of one pair.
fn build_pair<T: CacheFloat>(model: &FmModel, k: usize, l: usize, tie: TieBreak) -> (usize, usize, Vec<T>) {
    let arch = model.arch();
    let dims = arch.dims();
    let kind = arch.matrix_kind().expect("checked by the caller");
    let payload = &model.params.matrices[arch.pair_index(k, l)];
    let s = cached_side(k, l, dims, arch.feature_counts(), tie);
    let (dk, dl) = (dims[k], dims[l]);
    let dim = if s == k { dl } else { dk };
    let count = arch.feature_counts()[s];
    let mut vectors = Vec::with_capacity(count * dim);
    let mut out = vec![0.0; dim];
    for i in 0..count {
        let v = model.embedding(s, i);
        match kind {
            MatrixKind::Identity => out.copy_from_slice(v),
            MatrixKind::Scalar => out.iter_mut().zip(v).for_each(|(o, x)| *o = payload[0] * x),
            MatrixKind::Diagonal => out
                .iter_mut()
                .zip(v.iter().zip(payload))
                .for_each(|(o, (x, d))| *o = x * d),
            MatrixKind::Full if s == k => {
                // v M
                out.fill(0.0);
                for (a, &x) in v.iter().enumerate() {
                    let row = &payload[a * dl..(a + 1) * dl];
                    out.iter_mut().zip(row).for_each(|(o, m)| *o += x * m);
                }
            }
            MatrixKind::Full => {
                // v M^T
                for (o, row) in out.iter_mut().zip(payload.chunks_exact(dl)) {
                    *o = dot(row, v);
                }
            }
        }
        vectors.extend(out.iter().map(|&x| T::from_f64(x)));
    }
    (s, dim, vectors)
}

/// Materializes every pair table, building pairs on all available cores.
pub fn build_cache<T: CacheFloat>(model: &FmModel, tie: TieBreak) -> Result<CachedModel<T>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    build_cache_with_threads(model, tie, threads)
}

/// [`build_cache`] on at most `threads` worker threads. The result does not
/// depend on the thread count.
pub fn build_cache_with_threads<T: CacheFloat>(model: &FmModel, tie: TieBreak, threads: usize) -> Result<CachedModel<T>> {
    let arch = model.arch();
    let kind = arch.matrix_kind().ok_or_else(|| {
        Error::Unsupported(format!("{} has no field-pair matrices to cache", arch.variant()))
    })?;
    let pair_list: Vec<(usize, usize)> = arch.pairs().collect();
    let threads = threads.clamp(1, pair_list.len().max(1));
    let chunk = pair_list.len().div_ceil(threads).max(1);
    let built: Vec<(usize, usize, Vec<T>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = pair_list
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&(k, l)| build_pair(model, k, l, tie)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("cache worker panicked"))
            .collect()
    });

    let counts = arch.feature_counts();
    let linear: Vec<Vec<T>> = (0..arch.field_count())
        .map(|f| {
            (0..counts[f])
                .map(|i| {
                    T::from_f64(match arch.linear_mode() {
                        LinearMode::PerFeature => model.params.linear[f][i],
                        LinearMode::FieldShared => dot(model.embedding(f, i), &model.params.linear[f]),
                    })
                })
                .collect()
        })
        .collect();
    let embeddings: Vec<Vec<T>> = model
        .params
        .embeddings
        .iter()
        .map(|e| e.iter().map(|&x| T::from_f64(x)).collect())
        .collect();
    let sides: Vec<_> = pair_list
        .iter()
        .zip(&built)
        .map(|(&(k, l), &(side, dim, _))| (k, l, side, dim))
        .collect();
    let (widths, pairs) = layout(arch.dims(), &sides);
    let vectors: Vec<Vec<T>> = built.into_iter().map(|(_, _, v)| v).collect();
    let rows = assemble(counts, arch.dims(), &widths, &pairs, &linear, &embeddings, &vectors);
    Ok(CachedModel {
        source_hash: model.content_hash(),
        schema_hash: model.schema_hash(),
        kind,
        feature_counts: counts.to_vec(),
        dims: arch.dims().to_vec(),
        bias: model.params.bias,
        pairs,
        widths,
        rows,
    })
}

/// Dot product accumulated in f64 over four independent lanes.
#[inline]
fn dot_t<T: CacheFloat>(a: &[T], b: &[T]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x.to_f64() * y.to_f64())
        .sum();
    for (x, y) in ca.zip(cb) {
        for lane in 0..4 {
            acc[lane] += x[lane].to_f64() * y[lane].to_f64();
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl<T: CacheFloat> CachedModel<T> {
    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema_hash
    }

    pub fn matrix_kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn feature_counts(&self) -> &[usize] {
        &self.feature_counts
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn pairs(&self) -> &[PairCache] {
        &self.pairs
    }

    /// Total stored numbers across the pair tables.
    pub fn pair_table_len(&self) -> usize {
        self.pairs.iter().map(|p| self.feature_counts[p.cached_side] * p.dim).sum()
    }

    fn row(&self, f: usize, feature: usize) -> &[T] {
        let w = self.widths[f];
        &self.rows[f][feature * w..(feature + 1) * w]
    }

    /// Stored vector of pair `pair` for `feature` of its cached side.
    pub fn pair_vector(&self, pair: usize, feature: usize) -> &[T] {
        let p = &self.pairs[pair];
        &self.row(p.cached_side, feature)[p.offset..p.offset + p.dim]
    }

    /// Folded linear weight of `feature` in field `f`.
    pub fn linear_weight(&self, f: usize, feature: usize) -> T {
        self.row(f, feature)[0]
    }

    pub fn embedding(&self, f: usize, feature: usize) -> &[T] {
        &self.row(f, feature)[EMBEDDING_AT..EMBEDDING_AT + self.dims[f]]
    }

    fn check(&self, active: &[u32]) -> Result<()> {
        if active.len() != self.feature_counts.len() {
            return Err(Error::SchemaMismatch(format!(
                "instance has {} fields, cache expects {}",
                active.len(),
                self.feature_counts.len()
            )));
        }
        for (f, (&a, &c)) in active.iter().zip(&self.feature_counts).enumerate() {
            if a as usize >= c {
                return Err(Error::SchemaMismatch(format!("feature {a} out of range for field {f}")));
            }
        }
        Ok(())
    }

    fn logit(&self, active: &[u32]) -> f64 {
        let mut s = self.bias;
        for (f, &a) in active.iter().enumerate() {
            s += self.linear_weight(f, a as usize).to_f64();
        }
        for p in &self.pairs {
            let t = p.other_side();
            let cached = &self.row(p.cached_side, active[p.cached_side] as usize)[p.offset..p.offset + p.dim];
            let raw = &self.row(t, active[t] as usize)[EMBEDDING_AT..EMBEDDING_AT + p.dim];
            s += dot_t(cached, raw);
        }
        s
    }

    /// Logit of one instance: bias, folded linear terms, one dot per pair.
    pub fn cached_score(&self, active: &[u32]) -> Result<f64> {
        self.check(active)?;
        Ok(self.logit(active))
    }

    pub fn score_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.validate(&self.feature_counts)?;
        Ok(data.iter().map(|(_, a)| self.logit(a)).collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, CACHE_MAGIC, CACHE_VERSION)?;
        put_u64(&mut w, self.source_hash)?;
        put_u64(&mut w, self.schema_hash)?;
        put_u8(&mut w, T::BYTES)?;
        put_u8(&mut w, self.kind.degrees_of_freedom())?;
        put_u32(&mut w, self.feature_counts.len() as u32)?;
        for &c in &self.feature_counts {
            put_u64(&mut w, c as u64)?;
        }
        for &d in &self.dims {
            put_u32(&mut w, d as u32)?;
        }
        for p in &self.pairs {
            for x in [p.k, p.l, p.cached_side, p.dim] {
                put_u32(&mut w, x as u32)?;
            }
        }
        put_f64s(&mut w, &[self.bias])?;
        for (f, &c) in self.feature_counts.iter().enumerate() {
            let linear: Vec<T> = (0..c).map(|i| self.linear_weight(f, i)).collect();
            T::put(&mut w, &linear)?;
        }
        for (f, &c) in self.feature_counts.iter().enumerate() {
            for i in 0..c {
                T::put(&mut w, self.embedding(f, i))?;
            }
        }
        for (pi, p) in self.pairs.iter().enumerate() {
            for i in 0..self.feature_counts[p.cached_side] {
                T::put(&mut w, self.pair_vector(pi, i))?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        const WHAT: &str = "cache";
        let r = &mut r;
        read_header(r, WHAT, CACHE_MAGIC, CACHE_VERSION)?;
        let source_hash = get_u64(r, WHAT)?;
        let schema_hash = get_u64(r, WHAT)?;
        let bytes = get_u8(r, WHAT)?;
        if bytes != T::BYTES {
            return Err(format_err(WHAT, format!("stored as {}-byte floats, expected {}", bytes, T::BYTES)));
        }
        let kind = match get_u8(r, WHAT)? {
            0 => MatrixKind::Identity,
            1 => MatrixKind::Scalar,
            2 => MatrixKind::Diagonal,
            3 => MatrixKind::Full,
            t => return Err(format_err(WHAT, format!("matrix kind tag {t}"))),
        };
        let n = get_u32(r, WHAT)? as usize;
        if n == 0 {
            return Err(format_err(WHAT, "no fields"));
        }
        let feature_counts = (0..n)
            .map(|_| get_u64(r, WHAT).map(|c| c as usize))
            .collect::<Result<Vec<_>>>()?;
        let dims = (0..n)
            .map(|_| get_u32(r, WHAT).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut index = Vec::with_capacity(n * (n - 1) / 2);
        for k in 0..n {
            for l in k + 1..n {
                let mut e = [0usize; 4];
                for x in &mut e {
                    *x = get_u32(r, WHAT)? as usize;
                }
                let [ek, el, side, dim] = e;
                let other = if side == k { l } else { k };
                if ek != k || el != l || (side != k && side != l) || dim != dims[other] || dim > dims[side] {
                    return Err(format_err(WHAT, format!("bad index entry for pair ({k}, {l})")));
                }
                index.push((k, l, side, dim));
            }
        }
        let bias = get_f64s(r, 1, WHAT)?[0];
        let linear = feature_counts
            .iter()
            .map(|&c| T::get(r, c))
            .collect::<Result<Vec<_>>>()?;
        let embeddings = feature_counts
            .iter()
            .zip(&dims)
            .map(|(&c, &d)| T::get(r, c * d))
            .collect::<Result<Vec<_>>>()?;
        let vectors = index
            .iter()
            .map(|&(_, _, side, dim)| T::get(r, feature_counts[side] * dim))
            .collect::<Result<Vec<_>>>()?;
        expect_eof(r, WHAT)?;
        let (widths, pairs) = layout(&dims, &index);
        let rows = assemble(&feature_counts, &dims, &widths, &pairs, &linear, &embeddings, &vectors);
        Ok(Self {
            source_hash,
            schema_hash,
            kind,
            feature_counts,
            dims,
            bias,
            pairs,
            widths,
            rows,
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

/// Reads the float width recorded in a cache file without loading it.
pub fn peek_float_bytes(path: impl AsRef<Path>) -> Result<u8> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_header(&mut r, "cache", CACHE_MAGIC, CACHE_VERSION)?;
    get_u64(&mut r, "cache")?;
    get_u64(&mut r, "cache")?;
    get_u8(&mut r, "cache")
}

/// Whether `variant` can be cached.
pub fn is_cacheable(variant: Variant) -> bool {
    variant.matrix_kind().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(variant: Variant, linear: LinearMode, counts: Vec<usize>, dims: Vec<usize>, seed: u64) -> FmModel {
        let arch = Architecture::new(variant, linear, counts, dims).unwrap();
        let mut m = FmModel::zeros(arch, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params.for_each_mut(|p| *p = rng.random_range(-1.0..1.0));
        m
    }

    fn random_active(counts: &[usize], rng: &mut ChaCha8Rng) -> Vec<u32> {
        counts.iter().map(|&c| rng.random_range(0..c) as u32).collect()
    }

    #[test]
    fn narrow_side_is_cached() {
        // two fields with dims 2 and 14: the 14-dim side is cached as 2-vectors
        let counts = vec![30, 500];
        let m = random_model(Variant::FmFm, LinearMode::PerFeature, counts, vec![2, 14], 1);
        let c: CachedModel<f64> = build_cache(&m, TieBreak::LowerIndex).unwrap();
        let p = &c.pairs()[0];
        assert_eq!((p.cached_side, p.dim), (1, 2));
        assert_eq!(c.pair_table_len(), 500 * 2);
        // the uncached pair costs a 14x2 product plus a dot; the cached one a dot of 2
        assert_eq!(14 * 2 / (p.dim * 2), 7);
    }

    #[test]
    fn equivalence_for_every_kind() {
        let counts = vec![5, 9, 3, 7];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for v in [Variant::Fm, Variant::FwFm, Variant::FvFm, Variant::FmFm] {
            let dims = if v == Variant::FmFm { vec![3, 6, 1, 4] } else { vec![4; 4] };
            for linear in [LinearMode::PerFeature, LinearMode::FieldShared] {
                let m = random_model(v, linear, counts.clone(), dims.clone(), 3);
                let c64: CachedModel<f64> = build_cache(&m, TieBreak::LowerIndex).unwrap();
                let c32: CachedModel<f32> = build_cache(&m, TieBreak::MoreFeatures).unwrap();
                for _ in 0..200 {
                    let a = random_active(&counts, &mut rng);
                    let want = m.score(&a).unwrap();
                    let got = c64.cached_score(&a).unwrap();
                    assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{v} {got} {want}");
                    let got32 = c32.cached_score(&a).unwrap();
                    assert!((got32 - want).abs() <= 1e-5 * want.abs().max(1.0), "{v} {got32} {want}");
                }
            }
        }
    }

    #[test]
    fn identity_cache_copies_embeddings() {
        let m = random_model(Variant::Fm, LinearMode::PerFeature, vec![4, 6], vec![3, 3], 5);
        let c: CachedModel<f64> = build_cache(&m, TieBreak::LowerIndex).unwrap();
        assert_eq!(c.pairs()[0].cached_side, 0);
        for i in 0..4 {
            assert_eq!(c.pair_vector(0, i), m.embedding(0, i));
        }
    }

    #[test]
    fn side_choice_and_memory() {
        let counts = vec![10, 20, 30];
        let dims = vec![4, 2, 4];
        assert_eq!(cached_side(0, 1, &dims, &counts, TieBreak::LowerIndex), 0);
        assert_eq!(cached_side(1, 2, &dims, &counts, TieBreak::LowerIndex), 2);
        assert_eq!(cached_side(0, 2, &dims, &counts, TieBreak::LowerIndex), 0);
        assert_eq!(cached_side(0, 2, &dims, &counts, TieBreak::MoreFeatures), 2);
        let m = random_model(Variant::FmFm, LinearMode::FieldShared, counts, dims, 2);
        let c: CachedModel<f32> = build_cache(&m, TieBreak::LowerIndex).unwrap();
        // (0,1): 10 x 2, (0,2): 10 x 4, (1,2): 30 x 2
        assert_eq!(c.pair_table_len(), 20 + 40 + 60);
        for p in c.pairs() {
            assert_eq!(p.dim, dims_min(&[4, 2, 4], p.k, p.l));
        }
    }

    fn dims_min(d: &[usize], k: usize, l: usize) -> usize {
        d[k].min(d[l])
    }

    #[test]
    fn lr_and_ffm_are_rejected() {
        for v in [Variant::Lr, Variant::Ffm] {
            let m = random_model(v, LinearMode::PerFeature, vec![2, 2], vec![2, 2], 0);
            assert!(build_cache::<f32>(&m, TieBreak::LowerIndex).is_err());
        }
    }

    #[test]
    fn file_round_trip() {
        let m = random_model(Variant::FmFm, LinearMode::FieldShared, vec![3, 4, 2], vec![2, 3, 1], 11);
        let c: CachedModel<f32> = build_cache(&m, TieBreak::LowerIndex).unwrap();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"fmfm-cache v1\n"));
        assert_eq!(CachedModel::<f32>::read(&buf[..]).unwrap(), c);
        assert!(CachedModel::<f64>::read(&buf[..]).is_err());
        assert!(CachedModel::<f32>::read(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[12] = b'2';
        assert!(CachedModel::<f32>::read(&bad[..]).is_err());
    }
}
