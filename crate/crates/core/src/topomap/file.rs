//! `TOPO` tensor files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::TopoMap;
use crate::codec::*;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"TOPO";
pub const TENSOR_VERSION: u16 = 1;

pub(crate) fn write_tensor_header<W: Write>(w: &mut W, grid: usize, bands: usize, count: usize) -> std::io::Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    put_u16(w, TENSOR_VERSION)?;
    put_u16(w, grid as u16)?;
    put_u16(w, bands as u16)?;
    put_u64(w, count as u64)
}

pub(crate) fn read_tensor_header<R: Read>(r: &mut R) -> Result<(usize, usize, usize)> {
    let fmt = |e: std::io::Error| Error::Format(format!("tensor header: {e}"));
    let magic = get_array::<4, _>(r).map_err(fmt)?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad tensor magic {magic:?}")));
    }
    let version = get_u16(r).map_err(fmt)?;
    if version != TENSOR_VERSION {
        return Err(Error::Format(format!("unsupported tensor version {version}")));
    }
    let grid = get_u16(r).map_err(fmt)? as usize;
    let bands = get_u16(r).map_err(fmt)? as usize;
    let count = get_u64(r).map_err(fmt)? as usize;
    Ok((grid, bands, count))
}

pub(crate) fn write_tensor_body<W: Write>(w: &mut W, map: &TopoMap) -> std::io::Result<()> {
    put_f32_slice(w, map.data.iter().copied())
}

pub(crate) fn read_tensor_body<R: Read>(r: &mut R, grid: usize, bands: usize) -> Result<Array3<f32>> {
    let values = get_f32_vec(r, grid * grid * bands).map_err(|e| Error::Format(format!("tensor body: {e}")))?;
    Ok(Array3::from_shape_vec((grid, grid, bands), values).expect("sized above"))
}

/// Encodes maps that all share one shape.
pub fn write_tensors<W: Write>(w: &mut W, maps: &[TopoMap]) -> Result<()> {
    let (grid, bands) = maps.first().map_or((0, 0), |m| (m.grid(), m.bands()));
    if grid > u16::MAX as usize || bands > u16::MAX as usize {
        return Err(Error::Shape(format!("tensor {grid}x{grid}x{bands} too large")));
    }
    if let Some(m) = maps.iter().find(|m| m.data.dim() != (grid, grid, bands)) {
        return Err(Error::Shape(format!("mixed tensor shapes: {:?}", m.data.dim())));
    }
    let io = |e| Error::Format(format!("write: {e}"));
    write_tensor_header(w, grid, bands, maps.len()).map_err(io)?;
    for m in maps {
        write_tensor_body(w, m).map_err(io)?;
    }
    Ok(())
}

/// Decodes a tensor stream. The format carries no provenance: `trial_id` is
/// empty and `window_start` zero on the returned maps.
pub fn read_tensors<R: Read>(r: &mut R) -> Result<Vec<TopoMap>> {
    let (grid, bands, count) = read_tensor_header(r)?;
    (0..count)
        .map(|_| {
            Ok(TopoMap {
                data: read_tensor_body(r, grid, bands)?,
                trial_id: String::new(),
                window_start: 0,
            })
        })
        .collect()
}

pub fn save_tensors(maps: &[TopoMap], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensors(&mut w, maps)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_tensors(path: impl AsRef<Path>) -> Result<Vec<TopoMap>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensors(&mut BufReader::new(file))
}
