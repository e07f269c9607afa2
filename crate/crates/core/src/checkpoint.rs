//! Versioned binary model checkpoints.
//!
//! Layout (all integers little-endian): an 8-byte magic, a format version,
//! the build seed and optimizer step counter, then each layer with its spec,
//! trainable flag, parameter tensors (64-bit reals), and optimizer moment
//! slots when present. Writing the same network twice produces identical
//! bytes.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::nn::{Activation, Conv1dSpec, Conv2dSpec, DenseSpec, Layer, LayerOp, Network};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"NILMCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub fn save_checkpoint(path: &Path, network: &Network) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, network)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}

pub fn write_checkpoint<W: Write>(w: &mut W, network: &Network) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    write_u64(w, network.seed())?;
    write_u64(w, network.step())?;
    write_u32(w, network.layers().len() as u32)?;
    for (layer, slot) in network.layers().iter().zip(&network.slots) {
        write_str(w, &layer.name)?;
        w.write_all(&[layer.trainable as u8])?;
        match &layer.op {
            LayerOp::Conv1d {
                spec,
                weights,
                bias,
                relu,
            } => {
                w.write_all(&[0u8])?;
                for v in [
                    spec.in_channels,
                    spec.out_channels,
                    spec.kernel_size,
                    spec.stride,
                    spec.padding,
                ] {
                    write_u32(w, v as u32)?;
                }
                w.write_all(&[*relu as u8])?;
                write_tensor(w, weights)?;
                write_tensor(w, bias)?;
            }
            LayerOp::Conv2d {
                spec,
                weights,
                bias,
                relu,
            } => {
                w.write_all(&[1u8])?;
                for v in [
                    spec.in_channels,
                    spec.out_channels,
                    spec.kernel.0,
                    spec.kernel.1,
                    spec.stride.0,
                    spec.stride.1,
                    spec.padding.0,
                    spec.padding.1,
                ] {
                    write_u32(w, v as u32)?;
                }
                w.write_all(&[*relu as u8])?;
                write_tensor(w, weights)?;
                write_tensor(w, bias)?;
            }
            LayerOp::Dense {
                spec,
                weights,
                bias,
            } => {
                w.write_all(&[2u8])?;
                write_u32(w, spec.in_features as u32)?;
                write_u32(w, spec.out_features as u32)?;
                let act = match spec.activation {
                    Activation::Relu => 0u8,
                    Activation::Softmax => 1,
                    Activation::None => 2,
                };
                w.write_all(&[act])?;
                write_tensor(w, weights)?;
                write_tensor(w, bias)?;
            }
            LayerOp::MaxPool2d { size } => {
                w.write_all(&[3u8])?;
                write_u32(w, size.0 as u32)?;
                write_u32(w, size.1 as u32)?;
            }
            LayerOp::Flatten => {
                w.write_all(&[4u8])?;
            }
        }
        match slot {
            Some(s) => {
                w.write_all(&[1u8])?;
                write_tensor(w, &s.m_weights)?;
                write_tensor(w, &s.v_weights)?;
                write_tensor(w, &s.m_bias)?;
                write_tensor(w, &s.v_bias)?;
            }
            None => w.write_all(&[0u8])?,
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Network, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let seed = read_u64(r)?;
    let step = read_u64(r)?;
    let layer_count = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    let mut slots = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let name = read_str(r)?;
        let trainable = read_u8(r)? != 0;
        let kind = read_u8(r)?;
        let op = match kind {
            0 => {
                let dims: Vec<usize> = (0..5)
                    .map(|_| read_u32(r).map(|v| v as usize))
                    .collect::<Result<_, _>>()?;
                let relu = read_u8(r)? != 0;
                let weights = read_tensor(r)?;
                let bias = read_tensor(r)?;
                let spec = Conv1dSpec::new(dims[0], dims[1], dims[2], dims[3], dims[4])
                    .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
                expect_shape(&weights, &[dims[1], dims[0], dims[2]])?;
                expect_shape(&bias, &[dims[1]])?;
                LayerOp::Conv1d {
                    spec,
                    weights,
                    bias,
                    relu,
                }
            }
            1 => {
                let d: Vec<usize> = (0..8)
                    .map(|_| read_u32(r).map(|v| v as usize))
                    .collect::<Result<_, _>>()?;
                let relu = read_u8(r)? != 0;
                let weights = read_tensor(r)?;
                let bias = read_tensor(r)?;
                let spec = Conv2dSpec::new(d[0], d[1], (d[2], d[3]), (d[4], d[5]), (d[6], d[7]))
                    .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
                expect_shape(&weights, &[d[1], d[0], d[2], d[3]])?;
                expect_shape(&bias, &[d[1]])?;
                LayerOp::Conv2d {
                    spec,
                    weights,
                    bias,
                    relu,
                }
            }
            2 => {
                let in_features = read_u32(r)? as usize;
                let out_features = read_u32(r)? as usize;
                let activation = match read_u8(r)? {
                    0 => Activation::Relu,
                    1 => Activation::Softmax,
                    2 => Activation::None,
                    a => return Err(CheckpointError::Corrupt(format!("unknown activation {a}"))),
                };
                let weights = read_tensor(r)?;
                let bias = read_tensor(r)?;
                let spec = DenseSpec::new(in_features, out_features, activation)
                    .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
                expect_shape(&weights, &[in_features, out_features])?;
                expect_shape(&bias, &[out_features])?;
                LayerOp::Dense {
                    spec,
                    weights,
                    bias,
                }
            }
            3 => {
                let h = read_u32(r)? as usize;
                let w_ = read_u32(r)? as usize;
                LayerOp::MaxPool2d { size: (h, w_) }
            }
            4 => LayerOp::Flatten,
            k => return Err(CheckpointError::Corrupt(format!("unknown layer kind {k}"))),
        };
        let slot = if read_u8(r)? != 0 {
            Some(crate::nn::MomentSlots {
                m_weights: read_tensor(r)?,
                v_weights: read_tensor(r)?,
                m_bias: read_tensor(r)?,
                v_bias: read_tensor(r)?,
            })
        } else {
            None
        };
        layers.push(Layer {
            name,
            op,
            trainable,
        });
        slots.push(slot);
    }
    Ok(Network::from_parts(layers, slots, step, seed))
}

fn expect_shape(t: &Tensor, shape: &[usize]) -> Result<(), CheckpointError> {
    if t.shape() != shape {
        return Err(CheckpointError::Corrupt(format!(
            "tensor shape {:?} does not match spec shape {:?}",
            t.shape(),
            shape
        )));
    }
    Ok(())
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> io::Result<()> {
    write_u32(w, t.shape().len() as u32)?;
    for &d in t.shape() {
        write_u32(w, d as u32)?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(CheckpointError::Corrupt(format!("string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CheckpointError::Corrupt("non-utf8 name".into()))
}

fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor, CheckpointError> {
    let ndim = read_u32(r)? as usize;
    if ndim > 8 {
        return Err(CheckpointError::Corrupt(format!("tensor rank {ndim}")));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u32(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}
