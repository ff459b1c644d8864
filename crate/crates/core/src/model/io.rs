//! `fmfm-model v1`: a text header line, then little-endian binary:
//! schema hash (u64), variant tag (u8), linear mode (u8), field count (u32),
//! per-field feature counts (u64) and dims (u32), embeddings per field,
//! matrices in pair order, linear terms per field, bias. Floats are f64.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{Architecture, FmModel, LinearMode, Params, Variant};
use crate::bin_io::*;
use crate::error::{format_err, Result};
use crate::schema::hash_bytes;

pub const MODEL_MAGIC: &str = "fmfm-model";
pub const MODEL_VERSION: u32 = 1;

impl FmModel {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let arch = &self.arch;
        write_header(&mut w, MODEL_MAGIC, MODEL_VERSION)?;
        put_u64(&mut w, self.schema_hash)?;
        put_u8(&mut w, arch.variant().tag())?;
        put_u8(
            &mut w,
            match arch.linear_mode() {
                LinearMode::PerFeature => 0,
                LinearMode::FieldShared => 1,
            },
        )?;
        put_u32(&mut w, arch.field_count() as u32)?;
        for &c in arch.feature_counts() {
            put_u64(&mut w, c as u64)?;
        }
        for &d in arch.dims() {
            put_u32(&mut w, d as u32)?;
        }
        for e in &self.params.embeddings {
            put_f64s(&mut w, e)?;
        }
        for m in &self.params.matrices {
            put_f64s(&mut w, m)?;
        }
        for l in &self.params.linear {
            put_f64s(&mut w, l)?;
        }
        put_f64s(&mut w, &[self.params.bias])?;
        Ok(())
    }

    /// Reads a model and leaves the reader positioned after it.
    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Self> {
        const WHAT: &str = "model";
        read_header(r, WHAT, MODEL_MAGIC, MODEL_VERSION)?;
        let schema_hash = get_u64(r, WHAT)?;
        let tag = get_u8(r, WHAT)?;
        let variant = Variant::from_tag(tag).ok_or_else(|| format_err(WHAT, format!("variant tag {tag}")))?;
        let linear = match get_u8(r, WHAT)? {
            0 => LinearMode::PerFeature,
            1 => LinearMode::FieldShared,
            t => return Err(format_err(WHAT, format!("linear mode tag {t}"))),
        };
        let n = get_u32(r, WHAT)? as usize;
        let counts = (0..n)
            .map(|_| get_u64(r, WHAT).map(|c| c as usize))
            .collect::<Result<Vec<_>>>()?;
        let dims = (0..n)
            .map(|_| get_u32(r, WHAT).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let arch = Architecture::new(variant, linear, counts, dims).map_err(|e| format_err(WHAT, e.to_string()))?;
        let shape = arch.zero_params();
        let mut read_all = |blocks: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
            blocks.iter().map(|b| get_f64s(r, b.len(), WHAT)).collect()
        };
        let embeddings = read_all(&shape.embeddings)?;
        let matrices = read_all(&shape.matrices)?;
        let linear = read_all(&shape.linear)?;
        let bias = get_f64s(r, 1, WHAT)?[0];
        FmModel::from_parts(
            arch,
            schema_hash,
            Params {
                bias,
                linear,
                embeddings,
                matrices,
            },
        )
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let m = Self::read_from(&mut r)?;
        expect_eof(&mut r, "model")?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Truncated SHA-256 of the serialized model.
    pub fn content_hash(&self) -> u64 {
        hash_bytes(&self.to_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn round_trip_every_variant() {
        for v in Variant::ALL {
            let dims = if v == Variant::FmFm { vec![2, 3, 1] } else { vec![2; 3] };
            let arch = Architecture::new(v, v.default_linear(), vec![3, 2, 4], dims).unwrap();
            let mut m = FmModel::zeros(arch, 0xfeed);
            let mut x = 0.0;
            m.params.for_each_mut(|p| {
                x += 0.25;
                *p = x;
            });
            let bytes = m.to_bytes();
            assert!(bytes.starts_with(b"fmfm-model v1\n"));
            let back = FmModel::read(&bytes[..]).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn rejects_other_versions_and_truncation() {
        let arch = Architecture::uniform(Variant::Fm, vec![2, 2], 2).unwrap();
        let bytes = FmModel::zeros(arch, 1).to_bytes();
        let mut wrong = bytes.clone();
        wrong[12] = b'2';
        assert!(matches!(FmModel::read(&wrong[..]), Err(Error::Format { .. })));
        assert!(FmModel::read(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(FmModel::read(&extra[..]).is_err());
    }
}
