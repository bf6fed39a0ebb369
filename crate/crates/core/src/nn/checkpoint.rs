//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `KMGRMODL`, u32 version, u32 length + JSON
//! topology, u32 parameter count and per-parameter records (u32 name length,
//! name, u32 rank, u32 dims, f32 values), u8 flag + buffer records in the same
//! format, u8 flag + optimizer state, trailing CRC-32 of everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, AdamConfig, LayerConfig, NnError, Sequential, Tensor};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"KMGRMODL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Topology {
    input_shape: Vec<usize>,
    layers: Vec<LayerConfig>,
    #[serde(default)]
    meta: serde_json::Value,
}

/// A decoded checkpoint.
#[derive(Debug)]
pub struct Checkpoint<T: Scalar> {
    pub net: Sequential<T>,
    pub meta: serde_json::Value,
    pub optimizer: Option<Adam<T>>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_values<T: Scalar>(out: &mut Vec<u8>, values: &[T]) {
    for v in values {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
}

fn put_record<T: Scalar>(out: &mut Vec<u8>, name: &str, t: &Tensor<T>) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.rank());
    for &d in t.shape() {
        put_u32(out, d);
    }
    put_values(out, t.data());
}

/// Serializes a network with optional optimizer state. `meta` is stored
/// verbatim in the topology block.
pub fn encode<T: Scalar>(
    net: &Sequential<T>,
    meta: &serde_json::Value,
    optimizer: Option<&Adam<T>>,
) -> Result<Vec<u8>, NnError> {
    let topo = Topology {
        input_shape: net.input_shape().to_vec(),
        layers: net.configs(),
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&topo)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, json.len());
    out.extend_from_slice(&json);

    let params = net.named_params();
    put_u32(&mut out, params.len());
    for (name, p) in &params {
        put_record(&mut out, name, &p.value);
    }
    let buffers = net.named_buffers();
    out.push(u8::from(!buffers.is_empty()));
    if !buffers.is_empty() {
        put_u32(&mut out, buffers.len());
        for (name, t) in &buffers {
            put_record(&mut out, name, t);
        }
    }
    match optimizer {
        None => out.push(0),
        Some(opt) => {
            out.push(1);
            out.extend_from_slice(&opt.step_count().to_le_bytes());
            let c = opt.config;
            for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let (first, second) = opt.moments();
            put_u32(&mut out, first.len());
            for (m, v) in first.iter().zip(second) {
                put_u32(&mut out, m.len());
                put_values(&mut out, m);
                put_values(&mut out, v);
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn values<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, NnError> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| bad("length overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect())
    }

    fn record<T: Scalar>(&mut self) -> Result<(String, Tensor<T>), NnError> {
        let len = self.u32()?;
        let name = String::from_utf8(self.take(len)?.to_vec()).map_err(|_| bad("non-utf8 name"))?;
        let rank = self.u32()?;
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| bad("shape overflow"))?;
        let data = self.values(count)?;
        Ok((name, Tensor::new(shape, data)?))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, NnError> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..8] != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(bad("checksum mismatch"));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let json_len = r.u32()?;
    let topo: Topology = serde_json::from_slice(r.take(json_len)?)?;
    let mut net = Sequential::<T>::from_configs(topo.input_shape, &topo.layers, 0)?;

    let expected: Vec<(String, Vec<usize>)> = net
        .named_params()
        .into_iter()
        .map(|(n, p)| (n, p.value.shape().to_vec()))
        .collect();
    if r.u32()? != expected.len() {
        return Err(bad("parameter count differs from topology"));
    }
    let mut values = Vec::with_capacity(expected.len());
    for (name, shape) in &expected {
        let (n, t) = r.record::<T>()?;
        if &n != name || t.shape() != &shape[..] {
            return Err(bad(format!("parameter {n} does not match {name} {shape:?}")));
        }
        values.push(t);
    }
    for (p, v) in net.params_mut().into_iter().zip(values) {
        p.value = v;
    }

    let expected_buf: Vec<(String, Vec<usize>)> = net
        .named_buffers()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if r.u8()? == 1 {
        if r.u32()? != expected_buf.len() {
            return Err(bad("buffer count differs from topology"));
        }
        let mut bufs = Vec::with_capacity(expected_buf.len());
        for (name, shape) in &expected_buf {
            let (n, t) = r.record::<T>()?;
            if &n != name || t.shape() != &shape[..] {
                return Err(bad(format!("buffer {n} does not match {name} {shape:?}")));
            }
            bufs.push(t);
        }
        let mut bufs = bufs.into_iter();
        for layer in net.layers_mut() {
            for (_, t) in layer.buffers_mut() {
                *t = bufs.next().unwrap();
            }
        }
    }

    let optimizer = if r.u8()? == 1 {
        let step = r.u64()?;
        let config = AdamConfig {
            learning_rate: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        };
        let n = r.u32()?;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.u32()?;
            first.push(r.values(len)?);
            second.push(r.values(len)?);
        }
        Some(Adam::from_state(config, step, first, second))
    } else {
        None
    };
    if r.pos != body.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(Checkpoint {
        net,
        meta: topo.meta,
        optimizer,
    })
}

pub fn save<T: Scalar>(
    path: &Path,
    net: &Sequential<T>,
    meta: &serde_json::Value,
    optimizer: Option<&Adam<T>>,
) -> Result<(), NnError> {
    std::fs::write(path, encode(net, meta, optimizer)?)?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, NnError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mode;

    fn small_cnn() -> Sequential<f32> {
        let layers = vec![
            LayerConfig::Conv2d {
                kernel: [3, 3],
                in_channels: 1,
                filters: 4,
            },
            LayerConfig::Relu,
            LayerConfig::BatchNorm2d {
                channels: 4,
                eps: 1e-3,
                momentum: 0.99,
            },
            LayerConfig::Flatten,
            LayerConfig::Dense {
                inputs: 4 * 5 * 3,
                units: 3,
            },
            LayerConfig::Softmax,
        ];
        Sequential::from_configs(vec![5, 3, 1], &layers, 11).unwrap()
    }

    #[test]
    fn roundtrip_preserves_outputs_and_optimizer() {
        let mut net = small_cnn();
        let x = Tensor::from_fn(vec![4, 5, 3, 1], |i| (i as f32 * 0.37).sin());
        let mut opt = Adam::new(AdamConfig::default());
        net.train_batch(&x, &[0, 1, 2, 1], &mut opt).unwrap();
        let meta = serde_json::json!({"model": "test"});
        let bytes = encode(&net, &meta, Some(&opt)).unwrap();
        let mut back = decode::<f32>(&bytes).unwrap();
        assert_eq!(back.meta, meta);
        assert_eq!(back.optimizer.as_ref().unwrap(), &opt);
        let a = net.forward(&x, Mode::Inference).unwrap();
        let b = back.net.forward(&x, Mode::Inference).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(encode(&back.net, &meta, back.optimizer.as_ref()).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let net = small_cnn();
        let mut bytes = encode(&net, &serde_json::Value::Null, None).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode::<f32>(&bytes), Err(NnError::Checkpoint(_))));
        assert!(decode::<f32>(b"KMGRFEAT0000").is_err());
        assert!(decode::<f32>(&bytes[..20]).is_err());
    }
}
