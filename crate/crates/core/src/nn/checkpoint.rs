//! `GANM` checkpoint files.
//!
//! Little-endian layout:
//!
//! ```text
//! "GANM"  u32 version
//! u32 n_meta   { u16 key_len, key, u32 value_len, value }*
//! u32 n_nets   { u32 n_layers, layer* }*      -- architecture descriptors
//!              layer = u8 0, u32 in, u32 out  -- dense
//!                    | u8 1, u8 kind, f64 arg -- activation (kind: 0 leaky, 1 tanh, 2 sigmoid, 3 identity)
//!                    | u8 2, f64 rate         -- dropout
//! for each net, for each dense layer: out*in f64 weights (row-major), out f64 biases
//! u32 n_blocks { u64 len, len*f64 }*          -- auxiliary state (optimizer moments, ...)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{ActivationKind, DenseLayer, Layer, NnError, Result, Sequential};

pub const MAGIC: &[u8; 4] = b"GANM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub networks: Vec<Sequential>,
    pub state_blocks: Vec<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(bad(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }
}

enum Shape {
    Dense(usize, usize),
    Other(Layer),
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            out.extend_from_slice(&(k.len() as u16).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.extend_from_slice(&(v.len() as u32).to_le_bytes());
            out.extend_from_slice(v.as_bytes());
        }
        out.extend_from_slice(&(self.networks.len() as u32).to_le_bytes());
        for net in &self.networks {
            out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
            for layer in net.layers() {
                match layer {
                    Layer::Dense(d) => {
                        out.push(0);
                        out.extend_from_slice(&(d.input_dim() as u32).to_le_bytes());
                        out.extend_from_slice(&(d.output_dim() as u32).to_le_bytes());
                    }
                    Layer::Activation(a) => {
                        out.push(1);
                        let (kind, arg) = match a {
                            ActivationKind::LeakyRelu(s) => (0u8, *s),
                            ActivationKind::Tanh => (1, 0.0),
                            ActivationKind::Sigmoid => (2, 0.0),
                            ActivationKind::Identity => (3, 0.0),
                        };
                        out.push(kind);
                        out.extend_from_slice(&arg.to_le_bytes());
                    }
                    Layer::Dropout(rate) => {
                        out.push(2);
                        out.extend_from_slice(&rate.to_le_bytes());
                    }
                }
            }
        }
        for net in &self.networks {
            for d in net.dense_layers() {
                for v in d.weight.iter().chain(d.bias.iter()) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&(self.state_blocks.len() as u32).to_le_bytes());
        for block in &self.state_blocks {
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4).map_err(|_| bad("missing magic"))? != MAGIC {
            return Err(bad("bad magic, expected GANM"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..r.u32()? {
            let kl = r.u16()? as usize;
            let k = r.string(kl)?;
            let vl = r.u32()? as usize;
            let v = r.string(vl)?;
            metadata.insert(k, v);
        }
        let n_nets = r.u32()? as usize;
        let mut shapes: Vec<Vec<Shape>> = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let n_layers = r.u32()? as usize;
            let mut layers = Vec::with_capacity(n_layers.min(1024));
            for _ in 0..n_layers {
                layers.push(match r.u8()? {
                    0 => Shape::Dense(r.u32()? as usize, r.u32()? as usize),
                    1 => {
                        let kind = r.u8()?;
                        let arg = r.f64()?;
                        Shape::Other(Layer::Activation(match kind {
                            0 => ActivationKind::LeakyRelu(arg),
                            1 => ActivationKind::Tanh,
                            2 => ActivationKind::Sigmoid,
                            3 => ActivationKind::Identity,
                            k => return Err(bad(format!("unknown activation kind {k}"))),
                        }))
                    }
                    2 => Shape::Other(Layer::Dropout(r.f64()?)),
                    t => return Err(bad(format!("unknown layer tag {t}"))),
                });
            }
            shapes.push(layers);
        }
        let mut networks = Vec::with_capacity(n_nets);
        for layers in shapes {
            let mut built = Vec::with_capacity(layers.len());
            for shape in layers {
                built.push(match shape {
                    Shape::Dense(input, output) => {
                        let w = r.f64s(input * output)?;
                        let b = r.f64s(output)?;
                        Layer::Dense(DenseLayer {
                            weight: Array2::from_shape_vec((output, input), w).map_err(|e| bad(e.to_string()))?,
                            bias: Array1::from(b),
                        })
                    }
                    Shape::Other(l) => l,
                });
            }
            networks.push(Sequential::new(built)?);
        }
        let mut state_blocks = Vec::new();
        for _ in 0..r.u32()? {
            let len = r.u64()? as usize;
            state_blocks.push(r.f64s(len)?);
        }
        if r.pos != buf.len() {
            return Err(bad(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint { metadata, networks, state_blocks })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample() -> Checkpoint {
        let mut r = rng::from_seed(4);
        let a = Sequential::builder(3)
            .dense(4, &mut r)
            .activation(ActivationKind::LeakyRelu(0.01))
            .dropout(0.3)
            .dense(1, &mut r)
            .activation(ActivationKind::Sigmoid)
            .build()
            .unwrap();
        let b = Sequential::builder(2).dense(2, &mut r).activation(ActivationKind::Tanh).build().unwrap();
        Checkpoint {
            metadata: [("head".to_string(), "sigmoid".to_string())].into_iter().collect(),
            networks: vec![a, b],
            state_blocks: vec![vec![1.5, -0.25], vec![]],
        }
    }

    #[test]
    fn exact_round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
