//! The `XNN1` network file.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "XNN1" | version u32 | classes u32 | height u32 | width u32 | channels u32 | layers u32
//! per layer: tag u8, spec u32s
//!     1 Conv2D    filters, kh, kw, sh, sw, activation
//!     2 MaxPool2D ph, pw, sh, sw
//!     3 Flatten
//!     4 Dense     units, activation
//!     5 Softmax
//!   then, for Conv2D and Dense: u64 n + n f64 weights, u64 n + n f64 biases
//! per parameterised layer: m_w, v_w, m_b, v_b blobs (u64 n + n f64)
//! adam step u64 | init seed u64
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::adam::AdamState;
use super::layers::{Activation, LayerSpec};
use super::network::{Layer, Network};
use super::Shape;
use crate::{Error, Result};

pub const NETWORK_MAGIC: &[u8; 4] = b"XNN1";
pub const NETWORK_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Shape(format!("{v} does not fit a u32 field")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_blob<W: Write>(w: &mut W, blob: &[f64]) -> Result<()> {
    w.write_all(&(blob.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(blob.len() * 8);
    for v in blob {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn activation_code(a: Activation) -> usize {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
    }
}

pub fn write_network<W: Write>(net: &Network, mut w: W) -> Result<()> {
    let input = net.input_shape();
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&NETWORK_VERSION.to_le_bytes())?;
    for v in [net.classes(), input.height, input.width, input.channels, net.layers().len()] {
        put_u32(&mut w, v)?;
    }
    for layer in net.layers() {
        let (tag, ints): (u8, Vec<usize>) = match layer.spec {
            LayerSpec::Conv2D { filters, kernel, stride, activation } => {
                (1, vec![filters, kernel[0], kernel[1], stride[0], stride[1], activation_code(activation)])
            }
            LayerSpec::MaxPool2D { pool, stride } => (2, vec![pool[0], pool[1], stride[0], stride[1]]),
            LayerSpec::Flatten => (3, vec![]),
            LayerSpec::Dense { units, activation } => (4, vec![units, activation_code(activation)]),
            LayerSpec::Softmax => (5, vec![]),
        };
        w.write_all(&[tag])?;
        for v in ints {
            put_u32(&mut w, v)?;
        }
        if layer.spec.has_params() {
            put_blob(&mut w, &layer.weights)?;
            put_blob(&mut w, &layer.biases)?;
        }
    }
    let adam = &net.adam;
    for (i, layer) in net.layers().iter().enumerate() {
        if layer.spec.has_params() {
            for blob in [&adam.m_w[i], &adam.v_w[i], &adam.m_b[i], &adam.v_b[i]] {
                put_blob(&mut w, blob)?;
            }
        }
    }
    w.write_all(&adam.step.to_le_bytes())?;
    w.write_all(&net.seed().to_le_bytes())?;
    Ok(())
}

pub fn network_to_bytes(net: &Network) -> Vec<u8> {
    let mut buf = Vec::new();
    write_network(net, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated network file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn blob(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let n = self.u64()?;
        if n != expected as u64 {
            return Err(Error::Shape(format!("{what} blob has {n} values, expected {expected}")));
        }
        let raw = self.take(expected * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn pair(&mut self) -> Result<[usize; 2]> {
        Ok([self.u32()?, self.u32()?])
    }

    fn activation(&mut self) -> Result<Activation> {
        match self.u32()? {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }
}

/// Parses a complete network; nothing is returned unless every byte checks out.
pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes };
    if r.take(4)? != NETWORK_MAGIC {
        return Err(Error::Format("not an XNN1 network file".into()));
    }
    let version = r.u32()? as u32;
    if version != NETWORK_VERSION {
        return Err(Error::Format(format!("unsupported network format version {version}")));
    }
    let classes = r.u32()?;
    let input = Shape::new(r.u32()?, r.u32()?, r.u32()?);
    let n_layers = r.u32()?;
    let mut shape = input;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for i in 0..n_layers {
        let spec = match r.u8()? {
            1 => LayerSpec::Conv2D {
                filters: r.u32()?,
                kernel: r.pair()?,
                stride: r.pair()?,
                activation: r.activation()?,
            },
            2 => LayerSpec::MaxPool2D {
                pool: r.pair()?,
                stride: r.pair()?,
            },
            3 => LayerSpec::Flatten,
            4 => LayerSpec::Dense {
                units: r.u32()?,
                activation: r.activation()?,
            },
            5 => LayerSpec::Softmax,
            tag => return Err(Error::Format(format!("unknown layer tag {tag}"))),
        };
        let output = spec
            .output_shape(shape)
            .map_err(|why| Error::Shape(format!("layer {} ({}): {why}", i + 1, spec.name())))?;
        let (nw, nb) = spec.param_counts(shape);
        let (weights, biases) = if spec.has_params() {
            (r.blob(nw, "weight")?, r.blob(nb, "bias")?)
        } else {
            (Vec::new(), Vec::new())
        };
        layers.push(Layer {
            spec,
            input: shape,
            output,
            weights,
            biases,
        });
        shape = output;
    }
    let mut adam = AdamState::for_layers(&layers);
    for (i, layer) in layers.iter().enumerate() {
        if layer.spec.has_params() {
            adam.m_w[i] = r.blob(layer.weights.len(), "moment")?;
            adam.v_w[i] = r.blob(layer.weights.len(), "moment")?;
            adam.m_b[i] = r.blob(layer.biases.len(), "moment")?;
            adam.v_b[i] = r.blob(layer.biases.len(), "moment")?;
        }
    }
    adam.step = r.u64()?;
    let seed = r.u64()?;
    if !r.bytes.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after network", r.bytes.len())));
    }
    let net = Network::from_parts(input, seed, layers, adam)?;
    if net.classes() != classes {
        return Err(Error::Shape(format!("header says {classes} classes, chain produces {}", net.classes())));
    }
    Ok(net)
}

pub fn read_network<R: Read>(mut r: R) -> Result<Network> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    network_from_bytes(&bytes)
}

/// Writes via a temporary sibling file and a rename.
pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let tmp = path.with_extension("xnn.tmp");
    fs::write(&tmp, network_to_bytes(net))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    network_from_bytes(&fs::read(path)?)
}
