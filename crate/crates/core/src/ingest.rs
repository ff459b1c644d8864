//! Raw Criteo/Avazu parsing, encoded record streams and the random
//! train/validation/test split.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{format_err, Error, Result};
use crate::schema::{FieldDescriptor, FieldSchema};

pub const DATA_MAGIC: &str = "fmfm-data";
pub const DATA_VERSION: u32 = 1;

/// Turns an integer column into a categorical token.
///
/// Values above 2 collapse to `floor(ln(x)^2)`; smaller values (including
/// zero and negatives) keep their literal text.
pub fn transform_numeric(x: Option<i64>) -> String {
    match x {
        None => "missing".to_owned(),
        Some(x) if x <= 2 => x.to_string(),
        Some(x) => {
            let l = (x as f64).ln();
            ((l * l).floor() as i64).to_string()
        }
    }
}

/// Splits an Avazu `YYMMDDHH` timestamp into (day-of-week, hour) tokens.
/// Day of week counts from Monday = 0.
pub fn expand_avazu_hour(raw: &str) -> Result<(String, String)> {
    let bad = || Error::Malformed(format!("timestamp {raw:?}"));
    if raw.len() != 8 || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let num = |r: std::ops::Range<usize>| raw[r].parse::<u32>().map_err(|_| bad());
    let (yy, mm, dd, hh) = (num(0..2)?, num(2..4)?, num(4..6)?, num(6..8)?);
    let date = NaiveDate::from_ymd_opt(2000 + yy as i32, mm, dd).ok_or_else(bad)?;
    if hh > 23 {
        return Err(bad());
    }
    Ok((date.weekday().num_days_from_monday().to_string(), hh.to_string()))
}

/// One parsed raw row: label in {+1, -1} and one raw value per field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub label: i8,
    pub values: Vec<Option<String>>,
}

pub fn criteo_fields() -> Vec<FieldDescriptor> {
    (1..=13)
        .map(|i| FieldDescriptor::numeric(format!("I{i}")))
        .chain((1..=26).map(|i| FieldDescriptor::categorical(format!("C{i}"))))
        .collect()
}

fn parse_label(s: &str) -> Option<i8> {
    match s.trim() {
        "1" => Some(1),
        "0" | "-1" => Some(-1),
        _ => None,
    }
}

/// Parses one Criteo TSV line: label, 13 integer columns, 26 categorical columns.
pub fn parse_criteo_line(line: &str) -> Result<RawRecord> {
    let line = line.trim_end_matches(['\n', '\r']);
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 40 {
        return Err(Error::Malformed(format!("criteo row has {} columns, expected 40", cols.len())));
    }
    let label = parse_label(cols[0]).ok_or_else(|| Error::Malformed(format!("label {:?}", cols[0])))?;
    let values = cols[1..]
        .iter()
        .map(|c| (!c.is_empty()).then(|| (*c).to_owned()))
        .collect();
    Ok(RawRecord { label, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawFormat {
    Criteo,
    Avazu,
}

impl std::str::FromStr for RawFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "criteo" => Ok(Self::Criteo),
            "avazu" => Ok(Self::Avazu),
            _ => Err(Error::InvalidConfig(format!("unknown format {s:?}"))),
        }
    }
}

/// Streaming reader over a raw Criteo or Avazu file. Malformed rows are
/// skipped and counted in [`rejected`](Self::rejected).
pub struct RawReader<R: Read> {
    inner: Inner<R>,
    fields: Vec<FieldDescriptor>,
    rejected: u64,
}

enum Inner<R: Read> {
    Criteo(std::io::Lines<std::io::BufReader<R>>),
    Avazu {
        records: csv::StringRecordsIntoIter<R>,
        click: usize,
        hour: usize,
        keep: Vec<usize>,
    },
}

impl<R: Read> RawReader<R> {
    pub fn new(format: RawFormat, reader: R) -> Result<Self> {
        match format {
            RawFormat::Criteo => Ok(Self {
                inner: Inner::Criteo(std::io::BufReader::new(reader).lines()),
                fields: criteo_fields(),
                rejected: 0,
            }),
            RawFormat::Avazu => {
                let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
                let header = csv
                    .headers()
                    .map_err(|e| format_err("avazu", e.to_string()))?
                    .clone();
                let pos = |name: &str| {
                    header
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| format_err("avazu", format!("missing `{name}` column")))
                };
                let click = pos("click")?;
                let hour = pos("hour")?;
                let keep: Vec<usize> = (0..header.len())
                    .filter(|&i| i != click && i != hour && &header[i] != "id")
                    .collect();
                let mut fields = vec![
                    FieldDescriptor::categorical("day_of_week"),
                    FieldDescriptor::categorical("hour_of_day"),
                ];
                fields.extend(keep.iter().map(|&i| FieldDescriptor::categorical(&header[i])));
                Ok(Self {
                    inner: Inner::Avazu {
                        records: csv.into_records(),
                        click,
                        hour,
                        keep,
                    },
                    fields,
                    rejected: 0,
                })
            }
        }
    }

    pub fn open(format: RawFormat, path: impl AsRef<Path>) -> Result<RawReader<std::fs::File>> {
        RawReader::new(format, std::fs::File::open(path)?)
    }

    pub fn fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    fn parse_next(&mut self) -> Option<Result<Result<RawRecord>>> {
        match &mut self.inner {
            Inner::Criteo(lines) => {
                let line = lines.next()?;
                Some(line.map_err(Error::from).map(|l| parse_criteo_line(&l)))
            }
            Inner::Avazu {
                records,
                click,
                hour,
                keep,
            } => {
                let rec = match records.next()? {
                    Ok(r) => r,
                    Err(e) => return Some(Ok(Err(Error::Malformed(e.to_string())))),
                };
                let parsed = (|| {
                    let label = rec
                        .get(*click)
                        .and_then(parse_label)
                        .ok_or_else(|| Error::Malformed("click column".into()))?;
                    let (dow, hh) = expand_avazu_hour(rec.get(*hour).unwrap_or(""))?;
                    let mut values = vec![Some(dow), Some(hh)];
                    for &i in keep.iter() {
                        let v = rec.get(i).ok_or_else(|| Error::Malformed("short row".into()))?;
                        values.push((!v.is_empty()).then(|| v.to_owned()));
                    }
                    Ok(RawRecord { label, values })
                })();
                Some(Ok(parsed))
            }
        }
    }
}

impl<R: Read> Iterator for RawReader<R> {
    type Item = Result<RawRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.parse_next()? {
                Err(io) => return Some(Err(io)),
                Ok(Ok(rec)) => return Some(Ok(rec)),
                Ok(Err(_)) => self.rejected += 1,
            }
        }
    }
}

/// A label in {+1, -1} and exactly one active local index per field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInstance {
    pub label: i8,
    pub active: Vec<u32>,
}

/// Column-packed encoded instances: `features[i * n .. (i + 1) * n]` holds
/// instance `i`'s active local indices in field order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    n: usize,
    labels: Vec<i8>,
    features: Vec<u32>,
}

impl Dataset {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            labels: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn field_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, label: i8, active: &[u32]) -> Result<()> {
        if label != 1 && label != -1 {
            return Err(Error::Malformed(format!("label {label} not in {{+1, -1}}")));
        }
        if active.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: active.len(),
            });
        }
        self.labels.push(label);
        self.features.extend_from_slice(active);
        Ok(())
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn active(&self, i: usize) -> &[u32] {
        &self.features[i * self.n..(i + 1) * self.n]
    }

    pub fn instance(&self, i: usize) -> EncodedInstance {
        EncodedInstance {
            label: self.label(i),
            active: self.active(i).to_vec(),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (i8, &[u32])> + '_ {
        self.labels.iter().copied().zip(self.features.chunks_exact(self.n.max(1)))
    }

    /// Checks every index against the schema's per-field feature counts.
    pub fn validate(&self, feature_counts: &[usize]) -> Result<()> {
        if feature_counts.len() != self.n {
            return Err(Error::SchemaMismatch(format!(
                "dataset has {} fields, schema {}",
                self.n,
                feature_counts.len()
            )));
        }
        for (_, active) in self.iter() {
            for (f, (&a, &c)) in active.iter().zip(feature_counts).enumerate() {
                if a as usize >= c {
                    return Err(Error::SchemaMismatch(format!(
                        "feature index {a} in field {f} exceeds vocabulary of {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{DATA_MAGIC} v{DATA_VERSION} {}", self.n)?;
        let mut buf = Vec::with_capacity(1 + 4 * self.n);
        for (label, active) in self.iter() {
            buf.clear();
            buf.push(label as u8);
            for &a in active {
                buf.extend_from_slice(&a.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let n = match parts.as_slice() {
            [magic, version, n] if *magic == DATA_MAGIC => {
                if *version != format!("v{DATA_VERSION}") {
                    return Err(format_err("data", format!("unsupported version {version}")));
                }
                n.parse::<usize>().map_err(|_| format_err("data", "bad field count"))?
            }
            _ => return Err(format_err("data", format!("bad header {:?}", header.trim_end()))),
        };
        let mut ds = Dataset::new(n);
        let mut rec = vec![0u8; 1 + 4 * n];
        let mut active = vec![0u32; n];
        loop {
            let got = read_full(&mut r, &mut rec)?;
            if got == 0 {
                break;
            }
            if got != rec.len() {
                return Err(format_err("data", "truncated record"));
            }
            for (a, chunk) in active.iter_mut().zip(rec[1..].chunks_exact(4)) {
                *a = u32::from_le_bytes(chunk.try_into().unwrap());
            }
            ds.push(rec[0] as i8, &active)
                .map_err(|e| format_err("data", e.to_string()))?;
        }
        Ok(ds)
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

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Encodes every record of a raw stream against `schema`.
pub fn encode_records<I>(schema: &FieldSchema, fields: &[FieldDescriptor], records: I) -> Result<Dataset>
where
    I: IntoIterator<Item = Result<RawRecord>>,
{
    let mut ds = Dataset::new(schema.field_count());
    for rec in records {
        let rec = rec?;
        let active = schema.encode_row(fields, &rec.values)?;
        ds.push(rec.label, &active)?;
    }
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Streaming 80/10/10 assignment: one independent uniform draw per instance.
pub struct Splitter {
    rng: ChaCha8Rng,
}

impl Splitter {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_part(&mut self) -> Part {
        let u: f64 = self.rng.random();
        if u < 0.8 {
            Part::Train
        } else if u < 0.9 {
            Part::Validation
        } else {
            Part::Test
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

pub fn split_dataset(data: &Dataset, seed: u64) -> DatasetSplit {
    let n = data.field_count();
    let mut split = DatasetSplit {
        train: Dataset::new(n),
        validation: Dataset::new(n),
        test: Dataset::new(n),
        seed,
    };
    let mut splitter = Splitter::new(seed);
    for (label, active) in data.iter() {
        let part = match splitter.next_part() {
            Part::Train => &mut split.train,
            Part::Validation => &mut split.validation,
            Part::Test => &mut split.test,
        };
        part.labels.push(label);
        part.features.extend_from_slice(active);
    }
    split
}
