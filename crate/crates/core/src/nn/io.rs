//! Binary model file.
//!
//! Layout (all integers little-endian `u32`):
//!
//! | field          | size                                             |
//! |----------------|--------------------------------------------------|
//! | magic          | 8 bytes, `b"MISHNET\0"`                          |
//! | version        | 4 bytes, currently 1                             |
//! | header length  | 4 bytes, `H`                                     |
//! | header         | `H` bytes of UTF-8 `key=value\n` lines           |
//! | tensor count   | 4 bytes, `N`                                     |
//! | tensors        | `N` records                                      |
//!
//! Header keys appear in this order: `input_len`, `conv_filters`,
//! `conv_kernel`, `pool_size`, `gru_units`, `dense_units`, `head`
//! (`dense`/`gap`), `hidden_activation` (canonical name), then
//! `activation_alpha` for lrelu/elu/prelu and `prelu_learnable` for prelu,
//! then `output` (`softmax`/`sigmoid`), `classes` and `class_names`
//! (a JSON string array).
//!
//! Each tensor record is: name length, name bytes, rank, one `u32` per
//! extent, then the values as `f32` little-endian. Tensors follow
//! [`ModelParams::named_tensors`] order.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::model::Model;
use super::params::ModelParams;
use super::spec::{Head, ModelSpec, OutputLayer};
use crate::activation::ActivationKind;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MISHNET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("unsupported model file version {0}")]
    Version(u32),
}

fn format_err(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Format(msg.into())
}

pub fn encode(model: &Model) -> Vec<u8> {
    let header = header_text(model);
    let tensors = model.params.named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn header_text(model: &Model) -> String {
    let s = &model.spec;
    let mut lines = vec![
        format!("input_len={}", s.input_len),
        format!("conv_filters={}", s.conv_filters),
        format!("conv_kernel={}", s.conv_kernel),
        format!("pool_size={}", s.pool_size),
        format!("gru_units={}", s.gru_units),
        format!("dense_units={}", s.dense_units),
        format!("head={}", s.head.name()),
        format!("hidden_activation={}", s.hidden_activation.name()),
    ];
    if let Some(alpha) = s.hidden_activation.alpha() {
        lines.push(format!("activation_alpha={alpha:?}"));
    }
    if let ActivationKind::PReLU { learnable, .. } = s.hidden_activation {
        lines.push(format!("prelu_learnable={learnable}"));
    }
    lines.push(format!("output={}", s.output.name()));
    lines.push(format!("classes={}", s.num_classes()));
    lines.push(format!(
        "class_names={}",
        serde_json::to_string(&model.class_names).expect("string list serializes")
    ));
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model, ModelFileError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::Version(version));
    }
    let header_len = r.u32()? as usize;
    let header = std::str::from_utf8(r.take(header_len)?).map_err(|_| format_err("header is not UTF-8"))?;
    let (spec, class_names) = parse_header(header)?;

    let mut params = ModelParams::zeros(&spec);
    let count = r.u32()? as usize;
    let mut slots = params.named_tensors_mut();
    if count != slots.len() {
        return Err(format_err(format!(
            "expected {} tensors for this spec, found {count}",
            slots.len()
        )));
    }
    for (expected_name, slot) in slots.iter_mut() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| format_err("tensor name is not UTF-8"))?;
        if name != *expected_name {
            return Err(format_err(format!("expected tensor {expected_name}, found {name}")));
        }
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != slot.shape() {
            return Err(format_err(format!(
                "tensor {name}: expected shape {:?}, found {shape:?}",
                slot.shape()
            )));
        }
        let raw = r.take(slot.len() * 4)?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(format_err(format!("tensor {name} holds non-finite values")));
        }
        **slot = Tensor::new(shape, data).map_err(|e| format_err(e.to_string()))?;
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(format_err("trailing bytes after last tensor"));
    }
    Model::from_parts(spec, params, class_names).map_err(|e| format_err(e.to_string()))
}

fn parse_header(text: &str) -> Result<(ModelSpec, Vec<String>), ModelFileError> {
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(format!("bad header line `{line}`")))?;
        map.insert(k, v);
    }
    let get = |k: &str| {
        map.get(k)
            .copied()
            .ok_or_else(|| format_err(format!("header lacks `{k}`")))
    };
    let int = |k: &str| -> Result<usize, ModelFileError> {
        get(k)?
            .parse()
            .map_err(|_| format_err(format!("header `{k}` is not an integer")))
    };

    let name = get("hidden_activation")?;
    let mut act: ActivationKind = name
        .parse()
        .map_err(|e: crate::activation::ActivationError| format_err(e.to_string()))?;
    if let Some(a) = map.get("activation_alpha") {
        let alpha: f64 = a.parse().map_err(|_| format_err("activation_alpha is not a number"))?;
        let learnable = map.get("prelu_learnable").is_none_or(|v| *v == "true");
        act = match act {
            ActivationKind::LReLU { .. } => ActivationKind::lrelu(alpha),
            ActivationKind::ELU { .. } => ActivationKind::elu(alpha),
            ActivationKind::PReLU { .. } => ActivationKind::prelu(alpha, learnable),
            other => Ok(other),
        }
        .map_err(|e| format_err(e.to_string()))?;
    }
    let head: Head = get("head")?.parse().map_err(format_err)?;
    let classes = int("classes")?;
    let output = match get("output")? {
        "softmax" => OutputLayer::Softmax { classes },
        "sigmoid" if classes == 2 => OutputLayer::Sigmoid,
        other => return Err(format_err(format!("bad output `{other}` for {classes} classes"))),
    };
    let spec = ModelSpec {
        input_len: int("input_len")?,
        conv_filters: int("conv_filters")?,
        conv_kernel: int("conv_kernel")?,
        pool_size: int("pool_size")?,
        gru_units: int("gru_units")?,
        dense_units: int("dense_units")?,
        head,
        hidden_activation: act,
        output,
    };
    spec.validate().map_err(|e| format_err(e.to_string()))?;
    let class_names: Vec<String> =
        serde_json::from_str(get("class_names")?).map_err(|e| format_err(format!("class_names: {e}")))?;
    Ok((spec, class_names))
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelFileError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(act: ActivationKind, head: Head, output: OutputLayer) -> Model {
        let spec = ModelSpec::tiny(10, output, act).with_head(head);
        let names = (0..output.num_classes()).map(|i| format!("k{i}")).collect();
        Model::new(spec, names, 11).unwrap()
    }

    #[test]
    fn encode_decode_encode_is_byte_identical() {
        for (act, head, out) in [
            (ActivationKind::Mish, Head::Dense, OutputLayer::Softmax { classes: 3 }),
            (ActivationKind::ReLU, Head::GlobalAveragePool, OutputLayer::Sigmoid),
            (
                ActivationKind::prelu(0.3, true).unwrap(),
                Head::Dense,
                OutputLayer::Sigmoid,
            ),
            (
                ActivationKind::lrelu(0.05).unwrap(),
                Head::Dense,
                OutputLayer::Softmax { classes: 4 },
            ),
        ] {
            let bytes = encode(&model(act, head, out));
            let back = decode(&bytes).unwrap();
            assert_eq!(back.spec, model(act, head, out).spec);
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn f32_rounded_model_round_trips_exactly() {
        let mut m = model(ActivationKind::Mish, Head::Dense, OutputLayer::Softmax { classes: 3 });
        m.params.round_to_f32();
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn header_is_readable() {
        let m = model(ActivationKind::elu(0.5).unwrap(), Head::Dense, OutputLayer::Sigmoid);
        let bytes = encode(&m);
        let len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + len]).unwrap();
        assert!(header.starts_with("input_len=10\nconv_filters=2\n"));
        assert!(header.contains("hidden_activation=elu\nactivation_alpha=0.5\n"));
        assert!(header.ends_with("class_names=[\"k0\",\"k1\"]\n"));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode(&model(ActivationKind::TanH, Head::Dense, OutputLayer::Sigmoid));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(decode(&v2), Err(ModelFileError::Version(2))));
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
