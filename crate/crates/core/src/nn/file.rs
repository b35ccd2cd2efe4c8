//! `NRMD` model files.
//!
//! ```text
//! "NRMD" u16 version  u8 kind (0 cnn, 1 full)
//! architecture: u16 grid  u16 bands  u16 sequence  u16 blocks
//!               per block: u16 convs, u32 filters per conv
//!               u32 lstm hidden  u32 variation filters  u32 dense  f64 dropout
//! layer list:   u32 groups, per group: name\0 u8 rank u32 dims…
//! normalization: u16 bands, f64 means, f64 stds, f64 target mean, f64 target std
//! parameters:   f32 per scalar, groups in layer-list order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Architecture, Network, NetworkKind, Normalization};
use crate::codec::*;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"NRMD";
pub const MODEL_VERSION: u16 = 1;

pub fn write_model<W: Write>(w: &mut W, net: &Network) -> Result<()> {
    let io = |e| Error::Format(format!("write model: {e}"));
    let arch = net.architecture();
    (|| -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        put_u16(w, MODEL_VERSION)?;
        w.write_all(&[net.kind().code()])?;
        put_u16(w, arch.grid as u16)?;
        put_u16(w, arch.bands as u16)?;
        put_u16(w, arch.sequence as u16)?;
        put_u16(w, arch.blocks.len() as u16)?;
        for b in &arch.blocks {
            put_u16(w, b.len() as u16)?;
            for &f in b {
                put_u32(w, f as u32)?;
            }
        }
        put_u32(w, arch.lstm_hidden as u32)?;
        put_u32(w, arch.variation_filters as u32)?;
        put_u32(w, arch.dense as u32)?;
        put_f64(w, arch.dropout)?;

        let groups = net.layout().groups();
        put_u32(w, groups.len() as u32)?;
        for g in groups {
            put_cstr(w, &g.name)?;
            w.write_all(&[g.shape.len() as u8])?;
            for &d in &g.shape {
                put_u32(w, d as u32)?;
            }
        }

        let n = net.normalization();
        put_u16(w, n.band_mean.len() as u16)?;
        for v in n.band_mean.iter().chain(&n.band_std) {
            put_f64(w, *v)?;
        }
        put_f64(w, n.target_mean)?;
        put_f64(w, n.target_std)?;
        put_f32_slice(w, net.params().iter().map(|&v| v as f32))
    })()
    .map_err(io)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<Network> {
    let fmt = |e: std::io::Error| Error::Format(format!("model: {e}"));
    let magic = get_array::<4, _>(r).map_err(fmt)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format(format!("bad model magic {magic:?}")));
    }
    let version = get_u16(r).map_err(fmt)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let code = get_array::<1, _>(r).map_err(fmt)?[0];
    let kind = NetworkKind::from_code(code).ok_or_else(|| Error::Format(format!("network kind {code}")))?;
    let grid = get_u16(r).map_err(fmt)? as usize;
    let bands = get_u16(r).map_err(fmt)? as usize;
    let sequence = get_u16(r).map_err(fmt)? as usize;
    let nblocks = get_u16(r).map_err(fmt)? as usize;
    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let n = get_u16(r).map_err(fmt)? as usize;
        blocks.push((0..n).map(|_| get_u32(r).map(|v| v as usize)).collect::<std::io::Result<Vec<_>>>().map_err(fmt)?);
    }
    let arch = Architecture {
        grid,
        bands,
        sequence,
        blocks,
        lstm_hidden: get_u32(r).map_err(fmt)? as usize,
        variation_filters: get_u32(r).map_err(fmt)? as usize,
        dense: get_u32(r).map_err(fmt)? as usize,
        dropout: get_f64(r).map_err(fmt)?,
    };
    let mut net = Network::zeros(kind, arch).map_err(|e| Error::Format(format!("model architecture: {e}")))?;

    let ngroups = get_u32(r).map_err(fmt)? as usize;
    if ngroups != net.layout().groups().len() {
        return Err(Error::Format(format!(
            "{ngroups} parameter groups, architecture has {}",
            net.layout().groups().len()
        )));
    }
    for g in net.layout().groups() {
        let name = get_cstr(r, 256).map_err(fmt)?;
        let rank = get_array::<1, _>(r).map_err(fmt)?[0] as usize;
        let shape = (0..rank).map(|_| get_u32(r).map(|v| v as usize)).collect::<std::io::Result<Vec<_>>>().map_err(fmt)?;
        if name != g.name || shape != g.shape {
            return Err(Error::Format(format!("group {name} {shape:?}, expected {} {:?}", g.name, g.shape)));
        }
    }

    let nb = get_u16(r).map_err(fmt)? as usize;
    let mut stats = get_f64_vec(r, 2 * nb).map_err(fmt)?;
    let band_std = stats.split_off(nb);
    let norm = Normalization {
        band_mean: stats,
        band_std,
        target_mean: get_f64(r).map_err(fmt)?,
        target_std: get_f64(r).map_err(fmt)?,
    };
    net.set_normalization(norm).map_err(|e| Error::Format(e.to_string()))?;

    let n = net.params().len();
    let values = get_f32_vec(r, n).map_err(fmt)?;
    for (p, v) in net.params_mut().iter_mut().zip(values) {
        *p = v as f64;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(fmt)? != 0 {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    Ok(net)
}

fn get_f64_vec<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    (0..n).map(|_| get_f64(r)).collect()
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_model(&mut w, net)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut BufReader::new(file))
}
