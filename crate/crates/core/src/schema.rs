//! Field and feature vocabularies.
//!
//! Every field owns a disjoint vocabulary. Local index 0 of each field is the
//! reserved "unknown" slot; retained tokens occupy `1..feature_count`.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{format_err, Error, Result};
use crate::ingest::transform_numeric;

pub const SCHEMA_MAGIC: &str = "fmfm-schema";
pub const SCHEMA_VERSION: u32 = 1;

/// Local index reserved for unseen or infrequent tokens in every field.
pub const UNKNOWN_INDEX: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Categorical,
    /// Integer column turned into a categorical token by [`transform_numeric`].
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldDescriptor {
    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FieldKind::Categorical,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FieldKind::Numeric,
        }
    }

    /// Maps a raw column value to the token that is counted and looked up.
    ///
    /// Missing categorical values have no token (they encode to the unknown
    /// slot); missing numeric values become the token `"missing"`.
    pub fn canonical_token(&self, raw: Option<&str>) -> Option<String> {
        let raw = raw.filter(|s| !s.is_empty());
        match self.kind {
            FieldKind::Categorical => raw.map(str::to_owned),
            FieldKind::Numeric => Some(match raw {
                None => transform_numeric(None),
                Some(s) => match s.trim().parse::<i64>() {
                    Ok(x) => transform_numeric(Some(x)),
                    Err(_) => s.to_owned(),
                },
            }),
        }
    }
}

/// A feature addressed by its field and its index inside that field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalFeatureId {
    pub field: u32,
    pub local: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSchema {
    names: Vec<String>,
    vocab: Vec<HashMap<String, u32>>,
    /// `tokens[f][i - 1]` is the token and its count for local index `i`.
    tokens: Vec<Vec<(String, u64)>>,
    hash: u64,
}

/// Frequency pass over raw rows. Counters built over shards can be merged.
#[derive(Clone, Debug)]
pub struct FrequencyCounter {
    fields: Vec<FieldDescriptor>,
    counts: Vec<HashMap<String, u64>>,
    rows: u64,
}

impl FrequencyCounter {
    pub fn new(fields: &[FieldDescriptor]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for f in fields {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateField(f.name.clone()));
            }
        }
        if fields.is_empty() {
            return Err(Error::InvalidConfig("field spec is empty".into()));
        }
        Ok(Self {
            fields: fields.to_vec(),
            counts: vec![HashMap::new(); fields.len()],
            rows: 0,
        })
    }

    pub fn observe<S: AsRef<str>>(&mut self, row: &[Option<S>]) -> Result<()> {
        if row.len() != self.fields.len() {
            return Err(Error::DimensionMismatch {
                expected: self.fields.len(),
                found: row.len(),
            });
        }
        for ((desc, counts), raw) in self.fields.iter().zip(&mut self.counts).zip(row) {
            if let Some(tok) = desc.canonical_token(raw.as_ref().map(AsRef::as_ref)) {
                if tok.contains(['\t', '\n', '\r']) {
                    return Err(Error::Malformed(format!(
                        "token {tok:?} in field `{}` contains a separator",
                        desc.name
                    )));
                }
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        self.rows += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: FrequencyCounter) -> Result<()> {
        if other.fields != self.fields {
            return Err(Error::SchemaMismatch("merging counters over different fields".into()));
        }
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts) {
            for (tok, c) in theirs {
                *mine.entry(tok).or_insert(0) += c;
            }
        }
        self.rows += other.rows;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// Keeps tokens seen at least `min_frequency[f]` times. A single-element
    /// slice applies the same threshold to every field.
    pub fn finish(self, min_frequency: &[u64]) -> Result<FieldSchema> {
        if self.rows == 0 {
            return Err(Error::EmptyInput);
        }
        let n = self.fields.len();
        let threshold = |f: usize| -> Result<u64> {
            let t = match min_frequency.len() {
                1 => min_frequency[0],
                len if len == n => min_frequency[f],
                len => {
                    return Err(Error::InvalidConfig(format!(
                        "{len} frequency thresholds for {n} fields"
                    )))
                }
            };
            if t == 0 {
                return Err(Error::InvalidConfig("min_frequency must be >= 1".into()));
            }
            Ok(t)
        };
        let mut tokens = Vec::with_capacity(n);
        for (f, counts) in self.counts.into_iter().enumerate() {
            let t = threshold(f)?;
            let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= t).collect();
            // frequent tokens first, ties by token text
            kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            tokens.push(kept);
        }
        let names = self.fields.into_iter().map(|f| f.name).collect();
        Ok(FieldSchema::from_parts(names, tokens))
    }
}

/// One frequency pass over `rows`, then thresholding.
pub fn build_schema<I, R, S>(rows: I, fields: &[FieldDescriptor], min_frequency: &[u64]) -> Result<FieldSchema>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[Option<S>]>,
    S: AsRef<str>,
{
    let mut counter = FrequencyCounter::new(fields)?;
    for row in rows {
        counter.observe(row.as_ref())?;
    }
    counter.finish(min_frequency)
}

impl FieldSchema {
    /// `tokens[f]` lists the retained tokens of field `f` in local-index order
    /// starting at 1.
    pub fn from_parts(names: Vec<String>, tokens: Vec<Vec<(String, u64)>>) -> Self {
        let vocab = tokens
            .iter()
            .map(|toks| {
                toks.iter()
                    .enumerate()
                    .map(|(i, (t, _))| (t.clone(), i as u32 + 1))
                    .collect()
            })
            .collect();
        let mut schema = Self {
            names,
            vocab,
            tokens,
            hash: 0,
        };
        let mut buf = Vec::new();
        schema.write(&mut buf).expect("writing to a Vec cannot fail");
        schema.hash = hash_bytes(&buf);
        schema
    }

    pub fn field_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn field_names(&self) -> &[String] {
        &self.names
    }

    /// Number of features in field `f`, unknown slot included.
    pub fn feature_count(&self, f: usize) -> usize {
        self.tokens[f].len() + 1
    }

    pub fn feature_counts(&self) -> Vec<usize> {
        (0..self.field_count()).map(|f| self.feature_count(f)).collect()
    }

    pub fn total_features(&self) -> usize {
        self.tokens.iter().map(|t| t.len() + 1).sum()
    }

    /// Training-stream occurrence count of each feature, unknown slot = 0.
    pub fn frequencies(&self, f: usize) -> Vec<u64> {
        std::iter::once(0).chain(self.tokens[f].iter().map(|(_, c)| *c)).collect()
    }

    /// Truncated SHA-256 of the serialized schema.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn encode_token(&self, field: usize, token: &str) -> Result<GlobalFeatureId> {
        let vocab = self.vocab.get(field).ok_or(Error::FieldOutOfRange {
            field,
            n: self.field_count(),
        })?;
        Ok(GlobalFeatureId {
            field: field as u32,
            local: vocab.get(token).copied().unwrap_or(UNKNOWN_INDEX),
        })
    }

    /// Inverse of [`encode_token`](Self::encode_token) for retained features.
    pub fn token(&self, id: GlobalFeatureId) -> Option<&str> {
        let local = id.local as usize;
        if local == 0 {
            return None;
        }
        self.tokens
            .get(id.field as usize)?
            .get(local - 1)
            .map(|(t, _)| t.as_str())
    }

    /// Encodes one raw row to local indices, one per field.
    pub fn encode_row<S: AsRef<str>>(&self, fields: &[FieldDescriptor], row: &[Option<S>]) -> Result<Vec<u32>> {
        if fields.len() != self.field_count() {
            return Err(Error::SchemaMismatch(format!(
                "{} field descriptors for a {}-field schema",
                fields.len(),
                self.field_count()
            )));
        }
        if row.len() != fields.len() {
            return Err(Error::DimensionMismatch {
                expected: fields.len(),
                found: row.len(),
            });
        }
        Ok(fields
            .iter()
            .zip(row)
            .enumerate()
            .map(|(f, (desc, raw))| match desc.canonical_token(raw.as_ref().map(AsRef::as_ref)) {
                Some(tok) => self.vocab[f].get(&tok).copied().unwrap_or(UNKNOWN_INDEX),
                None => UNKNOWN_INDEX,
            })
            .collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{SCHEMA_MAGIC} v{SCHEMA_VERSION} {} {}",
            self.field_count(),
            self.total_features()
        )?;
        for (f, toks) in self.tokens.iter().enumerate() {
            for (i, (tok, count)) in toks.iter().enumerate() {
                writeln!(w, "{f}\t{tok}\t{}\t{count}", i + 1)?;
            }
        }
        Ok(())
    }

    /// Field names are not part of the file; loaded schemas name fields `f<index>`.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| format_err("schema", "missing header"))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (n, m) = match parts.as_slice() {
            [magic, version, n, m] if *magic == SCHEMA_MAGIC => {
                if *version != format!("v{SCHEMA_VERSION}") {
                    return Err(format_err("schema", format!("unsupported version {version}")));
                }
                let n: usize = n.parse().map_err(|_| format_err("schema", "bad field count"))?;
                let m: usize = m.parse().map_err(|_| format_err("schema", "bad feature count"))?;
                (n, m)
            }
            _ => return Err(format_err("schema", format!("bad header {header:?}"))),
        };
        let mut tokens: Vec<Vec<(String, u64)>> = vec![Vec::new(); n];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = || format_err("schema", format!("line {}: {line:?}", lineno + 2));
            let cols: Vec<&str> = line.split('\t').collect();
            let [f, tok, local, count] = cols.as_slice() else {
                return Err(bad());
            };
            let f: usize = f.parse().map_err(|_| bad())?;
            let local: usize = local.parse().map_err(|_| bad())?;
            let count: u64 = count.parse().map_err(|_| bad())?;
            let field = tokens.get_mut(f).ok_or_else(bad)?;
            if local != field.len() + 1 {
                return Err(format_err(
                    "schema",
                    format!("line {}: local index {local} out of order", lineno + 2),
                ));
            }
            field.push(((*tok).to_owned(), count));
        }
        let names = (0..n).map(|f| format!("f{f}")).collect();
        let schema = Self::from_parts(names, tokens);
        if schema.total_features() != m {
            return Err(format_err(
                "schema",
                format!("header says {m} features, body has {}", schema.total_features()),
            ));
        }
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub(crate) fn hash_bytes(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(tokens: &[&str]) -> Vec<Vec<Option<String>>> {
        tokens.iter().map(|t| vec![Some(t.to_string())]).collect()
    }

    #[test]
    fn threshold_drops_rare_tokens() {
        let spec = [FieldDescriptor::categorical("c")];
        let s = build_schema(rows(&["a", "a", "b"]), &spec, &[2]).unwrap();
        assert_eq!(s.feature_count(0), 2);
        assert_eq!(s.encode_token(0, "a").unwrap().local, 1);
        assert_eq!(s.encode_token(0, "b").unwrap().local, UNKNOWN_INDEX);
        assert_eq!(s.total_features(), 2);
    }

    #[test]
    fn absent_token_is_unknown_and_stable() {
        let spec = [FieldDescriptor::categorical("c")];
        let s = build_schema(rows(&["x", "y"]), &spec, &[1]).unwrap();
        let a = s.encode_token(0, "zzz").unwrap();
        let b = s.encode_token(0, "zzz").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.local, 0);
        assert!(matches!(s.encode_token(3, "x"), Err(Error::FieldOutOfRange { .. })));
    }

    #[test]
    fn empty_stream_and_duplicate_names_are_errors() {
        let spec = [FieldDescriptor::categorical("c")];
        let none: Vec<Vec<Option<String>>> = vec![];
        assert!(matches!(build_schema(none, &spec, &[1]), Err(Error::EmptyInput)));
        let dup = [FieldDescriptor::categorical("c"), FieldDescriptor::numeric("c")];
        assert!(matches!(
            build_schema(vec![vec![Some("1"), Some("2")]], &dup, &[1]),
            Err(Error::DuplicateField(_))
        ));
    }

    #[test]
    fn numeric_fields_are_transformed_before_counting() {
        let spec = [FieldDescriptor::numeric("i"), FieldDescriptor::categorical("c")];
        let data = vec![
            vec![Some("100"), Some("q")],
            vec![Some("101"), None],
            vec![None, Some("")],
        ];
        let s = build_schema(data, &spec, &[1]).unwrap();
        // 100 and 101 both floor to 21
        let id = s.encode_token(0, "21").unwrap();
        assert_eq!(id.local, 1);
        assert_eq!(s.frequencies(0)[1], 2);
        assert_ne!(s.encode_token(0, "missing").unwrap().local, 0);
        // empty and absent categorical values are never counted
        assert_eq!(s.feature_count(1), 2);
        let encoded = s.encode_row(&spec, &[Some("102"), None::<&str>]).unwrap();
        assert_eq!(encoded, vec![1, 0]);
    }

    #[test]
    fn file_round_trip_and_determinism() {
        let spec = [FieldDescriptor::categorical("a"), FieldDescriptor::categorical("b")];
        let data: Vec<Vec<Option<&str>>> = (0..50)
            .map(|i| vec![Some(["x", "y", "z"][i % 3]), Some(["p", "q"][i % 2])])
            .collect();
        let s1 = build_schema(&data, &spec, &[1]).unwrap();
        let s2 = build_schema(&data, &spec, &[1]).unwrap();
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        s1.write(&mut b1).unwrap();
        s2.write(&mut b2).unwrap();
        assert_eq!(b1, b2);
        let text = String::from_utf8(b1.clone()).unwrap();
        assert!(text.starts_with("fmfm-schema v1 2 7\n"));
        let back = FieldSchema::read(&b1[..]).unwrap();
        assert_eq!(back.hash(), s1.hash());
        assert_eq!(back.feature_counts(), s1.feature_counts());
        for f in 0..2 {
            for local in 1..s1.feature_count(f) as u32 {
                let id = GlobalFeatureId { field: f as u32, local };
                let tok = back.token(id).unwrap();
                assert_eq!(back.encode_token(f, tok).unwrap(), id);
            }
        }
    }

    #[test]
    fn rejects_wrong_version() {
        let err = FieldSchema::read(&b"fmfm-schema v2 1 1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn sharded_counting_matches_single_pass() {
        let spec = [FieldDescriptor::categorical("a")];
        let data = rows(&["a", "b", "a", "c", "b", "a"]);
        let whole = build_schema(&data, &spec, &[2]).unwrap();
        let mut left = FrequencyCounter::new(&spec).unwrap();
        let mut right = FrequencyCounter::new(&spec).unwrap();
        for r in &data[..3] {
            left.observe(r).unwrap();
        }
        for r in &data[3..] {
            right.observe(r).unwrap();
        }
        right.merge(left).unwrap();
        assert_eq!(right.finish(&[2]).unwrap(), whole);
    }
}
