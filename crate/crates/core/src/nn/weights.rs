//! Weight files: an 8-byte magic, a little-endian `u64` header length, a
//! JSON header (model spec plus tensor byte offsets into the payload), then
//! the payload of little-endian `f32` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TADWGT01";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    layer: usize,
    name: String,
    shape: Vec<usize>,
    offset: usize,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelSpec,
    tensors: Vec<TensorEntry>,
    payload_bytes: usize,
}

pub fn encode_weights(model: &Model) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for (i, (layer, params)) in model.spec().layers.iter().zip(model.params()).enumerate() {
        for ((name, _, _), t) in layer.param_shapes().into_iter().zip(params) {
            tensors.push(TensorEntry {
                layer: i,
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset: payload.len(),
                count: t.len(),
            });
            for &v in t.data() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let header = serde_json::to_vec(&Header {
        model: model.spec().clone(),
        tensors,
        payload_bytes: payload.len(),
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::WeightFormat("bad magic bytes".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::WeightFormat("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::WeightFormat(format!("header: {e}")))?;
    let payload = &bytes[header_end..];
    if payload.len() != header.payload_bytes {
        return Err(Error::WeightFormat(format!(
            "payload is {} bytes, header declares {}",
            payload.len(),
            header.payload_bytes
        )));
    }

    let spec = header.model;
    let mut entries = header.tensors.iter();
    let mut params = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let mut layer_params = Vec::new();
        for (name, shape, _) in layer.param_shapes() {
            let e = entries.next().ok_or_else(|| {
                Error::WeightFormat(format!("missing tensor {name} of layer {i}"))
            })?;
            if e.layer != i || e.name != name || e.shape != shape {
                return Err(Error::WeightFormat(format!(
                    "tensor {} of layer {} does not match the model (expected {name} {shape:?} of layer {i})",
                    e.name, e.layer
                )));
            }
            let count: usize = shape.iter().product();
            let end = e.offset + count * 4;
            if e.count != count || end > payload.len() {
                return Err(Error::WeightFormat(format!(
                    "tensor {name} of layer {i} out of bounds"
                )));
            }
            let data = payload[e.offset..end]
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            layer_params.push(Tensor::new(shape, data)?);
        }
        params.push(layer_params);
    }
    if entries.next().is_some() {
        return Err(Error::WeightFormat(
            "header lists more tensors than the model has".into(),
        ));
    }
    Model::from_params(spec, params)
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(model)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Model> {
    decode_weights(&fs::read(path)?)
}
