//! Little-endian primitives shared by the binary file formats.

use std::io::{self, Read, Write};

pub(crate) fn put_u16<W: Write>(w: &mut W, v: u16) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_f32<W: Write>(w: &mut W, v: f32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

/// Null-terminated UTF-8 string.
pub(crate) fn put_cstr<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(s.as_bytes())?;
    w.write_all(&[0])
}

pub(crate) fn put_f32_slice<W: Write>(w: &mut W, values: impl IntoIterator<Item = f32>) -> io::Result<()> {
    let mut buf = Vec::new();
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn get_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub(crate) fn get_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    get_array::<2, _>(r).map(u16::from_le_bytes)
}

pub(crate) fn get_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    get_array::<4, _>(r).map(u32::from_le_bytes)
}

pub(crate) fn get_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    get_array::<8, _>(r).map(u64::from_le_bytes)
}

pub(crate) fn get_f32<R: Read>(r: &mut R) -> io::Result<f32> {
    get_array::<4, _>(r).map(f32::from_le_bytes)
}

pub(crate) fn get_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    get_array::<8, _>(r).map(f64::from_le_bytes)
}

/// Reads a null-terminated string, refusing anything longer than `max` bytes.
pub(crate) fn get_cstr<R: Read>(r: &mut R, max: usize) -> io::Result<String> {
    let mut bytes = Vec::new();
    loop {
        let [b] = get_array::<1, _>(r)?;
        if b == 0 {
            break;
        }
        if bytes.len() == max {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "unterminated string"));
        }
        bytes.push(b);
    }
    String::from_utf8(bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub(crate) fn get_f32_vec<R: Read>(r: &mut R, n: usize) -> io::Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
