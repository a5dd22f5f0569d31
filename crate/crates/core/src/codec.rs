//! Little-endian binary helpers shared by the checkpoint sections.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_u64::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(r.read_u64::<LittleEndian>()?)
}

pub(crate) fn write_usize<W: Write>(w: &mut W, v: usize) -> Result<()> {
    write_u64(w, v as u64)
}

pub(crate) fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v).map_err(|_| Error::Parse(format!("length {v} does not fit in usize")))
}

/// Reads a length and rejects values above `max` (guards against corrupt input).
pub(crate) fn read_len<R: Read>(r: &mut R, max: usize) -> Result<usize> {
    let n = read_usize(r)?;
    if n > max {
        return Err(Error::Parse(format!("length {n} exceeds limit {max}")));
    }
    Ok(n)
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_f64::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(r.read_f64::<LittleEndian>()?)
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    write_usize(w, v.len())?;
    for &x in v {
        write_f64(w, x)?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, max: usize) -> Result<Vec<f64>> {
    let n = read_len(r, max)?;
    (0..n).map(|_| read_f64(r)).collect()
}

pub(crate) fn write_bytes<W: Write>(w: &mut W, v: &[u8]) -> Result<()> {
    write_usize(w, v.len())?;
    w.write_all(v)?;
    Ok(())
}

pub(crate) fn read_bytes<R: Read>(r: &mut R, max: usize) -> Result<Vec<u8>> {
    let n = read_len(r, max)?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub(crate) fn write_tag<W: Write>(w: &mut W, tag: &[u8; 4]) -> Result<()> {
    w.write_all(tag)?;
    Ok(())
}

pub(crate) fn expect_tag<R: Read>(r: &mut R, tag: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != tag {
        return Err(Error::Parse(format!(
            "expected section {:?}, found {:?}",
            String::from_utf8_lossy(tag),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

/// Seed, stream and word position fully determine a ChaCha generator.
pub(crate) fn write_rng<W: Write>(w: &mut W, rng: &ChaCha8Rng) -> Result<()> {
    w.write_all(&rng.get_seed())?;
    write_u64(w, rng.get_stream())?;
    w.write_u128::<LittleEndian>(rng.get_word_pos())?;
    Ok(())
}

pub(crate) fn read_rng<R: Read>(r: &mut R) -> Result<ChaCha8Rng> {
    let mut seed = [0u8; 32];
    r.read_exact(&mut seed)?;
    let stream = read_u64(r)?;
    let pos = r.read_u128::<LittleEndian>()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(pos);
    Ok(rng)
}
