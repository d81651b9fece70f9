//! Versioned binary container for built-in networks.
//!
//! Layout (all integers and floats little-endian):
//! magic "PADN" | version u32 | alpha f64 | unit count u32 | units.
//! Each unit is a kind tag (u8) followed by its parameter payload as
//! 64-bit floats; round-trips are bit-exact.

use std::io::{Read, Write};

use super::{BuiltInNetwork, ConvRbf, DirectionUnit};
use crate::error::{Error, Result};
use crate::tensor::Kernel;

pub const MAGIC: &[u8; 4] = b"PADN";
pub const VERSION: u32 = 1;

const TAG_CONV_RBF: u8 = 0;
const TAG_LINEAR_DIFFUSION: u8 = 1;
const TAG_SMOOTHED_PRIOR_GRAD: u8 = 2;

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        put_f64(w, v)?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Container(format!("truncated u32: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)
        .map_err(|e| Error::Container(format!("truncated tag: {e}")))?;
    Ok(b[0])
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|e| Error::Container(format!("truncated f64: {e}")))?;
    Ok(f64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| get_f64(r)).collect()
}

fn write_kernel<W: Write>(w: &mut W, k: &Kernel) -> Result<()> {
    put_u32(w, k.height() as u32)?;
    put_u32(w, k.width() as u32)?;
    put_f64s(w, k.taps())
}

fn read_kernel<R: Read>(r: &mut R) -> Result<Kernel> {
    let h = get_u32(r)? as usize;
    let w = get_u32(r)? as usize;
    if h == 0 || w == 0 || h * w > 1 << 20 {
        return Err(Error::Container(format!("implausible kernel {h}x{w}")));
    }
    Kernel::new(h, w, get_f64s(r, h * w)?)
        .map_err(|e| Error::Container(format!("bad kernel payload: {e}")))
}

/// Serializes a network; the inverse of [`read_network`].
pub fn write_network<W: Write>(net: &BuiltInNetwork, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    put_f64(&mut w, net.alpha)?;
    put_u32(&mut w, net.units.len() as u32)?;
    for unit in &net.units {
        match unit {
            DirectionUnit::ConvRbf(u) => {
                w.write_all(&[TAG_CONV_RBF])?;
                put_u32(&mut w, u.filters_in.len() as u32)?;
                for f in u.filters_in.iter().chain(&u.filters_out) {
                    write_kernel(&mut w, f)?;
                }
                put_u32(&mut w, u.rbf_centers.len() as u32)?;
                put_f64s(&mut w, &u.rbf_centers)?;
                put_f64s(&mut w, &u.rbf_weights)?;
                put_f64(&mut w, u.rbf_sigma)?;
            }
            DirectionUnit::LinearDiffusion { kernel, gain } => {
                w.write_all(&[TAG_LINEAR_DIFFUSION])?;
                write_kernel(&mut w, kernel)?;
                put_f64(&mut w, *gain)?;
            }
            DirectionUnit::SmoothedPriorGrad { p, weight, epsilon } => {
                w.write_all(&[TAG_SMOOTHED_PRIOR_GRAD])?;
                put_f64(&mut w, *p)?;
                put_f64(&mut w, *weight)?;
                put_f64(&mut w, *epsilon)?;
            }
        }
    }
    Ok(())
}

/// Reads a network container written by [`write_network`].
pub fn read_network<R: Read>(mut r: R) -> Result<BuiltInNetwork> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Container(format!("truncated magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Container(format!("bad magic {magic:?}")));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let alpha = get_f64(&mut r)?;
    let count = get_u32(&mut r)? as usize;
    if count > 1 << 16 {
        return Err(Error::Container(format!("implausible unit count {count}")));
    }
    let mut units = Vec::with_capacity(count);
    for _ in 0..count {
        let unit = match get_u8(&mut r)? {
            TAG_CONV_RBF => {
                let pairs = get_u32(&mut r)? as usize;
                if pairs == 0 || pairs > 1 << 12 {
                    return Err(Error::Container(format!("implausible pair count {pairs}")));
                }
                let mut filters = Vec::with_capacity(2 * pairs);
                for _ in 0..2 * pairs {
                    filters.push(read_kernel(&mut r)?);
                }
                let filters_out = filters.split_off(pairs);
                let n = get_u32(&mut r)? as usize;
                if n == 0 || n > 1 << 16 {
                    return Err(Error::Container(format!("implausible center count {n}")));
                }
                let centers = get_f64s(&mut r, n)?;
                let weights = get_f64s(&mut r, n)?;
                let sigma = get_f64(&mut r)?;
                DirectionUnit::ConvRbf(
                    ConvRbf::new(filters, filters_out, weights, centers, sigma)
                        .map_err(|e| Error::Container(format!("bad conv-rbf payload: {e}")))?,
                )
            }
            TAG_LINEAR_DIFFUSION => DirectionUnit::LinearDiffusion {
                kernel: read_kernel(&mut r)?,
                gain: get_f64(&mut r)?,
            },
            TAG_SMOOTHED_PRIOR_GRAD => {
                let p = get_f64(&mut r)?;
                let weight = get_f64(&mut r)?;
                let epsilon = get_f64(&mut r)?;
                DirectionUnit::smoothed_prior_grad(p, weight, epsilon)
                    .map_err(|e| Error::Container(format!("bad prior-grad payload: {e}")))?
            }
            tag => return Err(Error::Container(format!("unknown unit tag {tag}"))),
        };
        units.push(unit);
    }
    Ok(BuiltInNetwork { units, alpha })
}
