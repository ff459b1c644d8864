//! Little-endian helpers shared by the binary artifact formats.

use std::io::{BufRead, Read, Write};

use crate::error::{format_err, Error, Result};

pub(crate) fn write_header<W: Write>(w: &mut W, magic: &str, version: u32) -> Result<()> {
    writeln!(w, "{magic} v{version}")?;
    Ok(())
}

/// Reads a `<magic> v<version>` line and returns any trailing words.
pub(crate) fn read_header<R: BufRead>(
    r: &mut R,
    what: &'static str,
    magic: &str,
    version: u32,
) -> Result<Vec<String>> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut words = line.split_whitespace();
    if words.next() != Some(magic) {
        return Err(format_err(what, format!("expected `{magic}` header, found {:?}", line.trim_end())));
    }
    let v = words.next().unwrap_or("");
    if v != format!("v{version}") {
        return Err(format_err(what, format!("unsupported version {v:?}")));
    }
    Ok(words.map(str::to_owned).collect())
}

pub(crate) fn put_u8<W: Write>(w: &mut W, x: u8) -> Result<()> {
    w.write_all(&[x])?;
    Ok(())
}

pub(crate) fn put_u32<W: Write>(w: &mut W, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn put_f32s<W: Write>(w: &mut W, xs: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => format_err(what, "truncated"),
        _ => Error::Io(e),
    })
}

pub(crate) fn get_u8<R: Read>(r: &mut R, what: &'static str) -> Result<u8> {
    let mut b = [0u8; 1];
    fill(r, &mut b, what)?;
    Ok(b[0])
}

pub(crate) fn get_u32<R: Read>(r: &mut R, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    fill(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64<R: Read>(r: &mut R, what: &'static str) -> Result<u64> {
    let mut b = [0u8; 8];
    fill(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64s<R: Read>(r: &mut R, len: usize, what: &'static str) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 8];
    fill(r, &mut buf, what)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn get_f32s<R: Read>(r: &mut R, len: usize, what: &'static str) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; len * 4];
    fill(r, &mut buf, what)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Fails unless the reader is exhausted.
pub(crate) fn expect_eof<R: Read>(r: &mut R, what: &'static str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(format_err(what, "trailing bytes")),
    }
}
