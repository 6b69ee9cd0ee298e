//! Byte-exact model serialization.
//!
//! Layout: `u16` layer count, then per layer `u32` input dim, `u32` output
//! dim, `u8` activation, the weight matrix row-major, then the bias vector.
//! Integers are big-endian to match the store wire protocol; floats are
//! little-endian IEEE 754 doubles. This buffer is exactly the PUT_MODEL wire
//! body.

use simorch_linalg::Matrix;

use crate::{Activation, Layer, MlpError, MlpModel};

pub fn serialize(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(model.layers().len() as u16).to_be_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.input_dim() as u32).to_be_bytes());
        out.extend_from_slice(&(layer.output_dim() as u32).to_be_bytes());
        out.push(layer.activation as u8);
        for v in layer.weights.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<MlpModel, MlpError> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let n_layers = cursor.u16()? as usize;
    if n_layers == 0 {
        return Err(MlpError::MalformedModel("zero layers".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let n_in = cursor.u32()? as usize;
        let n_out = cursor.u32()? as usize;
        let act_byte = cursor.u8()?;
        let activation = Activation::from_byte(act_byte)
            .ok_or_else(|| MlpError::MalformedModel(format!("bad activation byte {act_byte}")))?;
        if n_in == 0 || n_out == 0 {
            return Err(MlpError::MalformedModel("zero layer dimension".into()));
        }
        // Check the remaining length before allocating anything.
        let need = (n_in as u64)
            .checked_mul(n_out as u64)
            .and_then(|w| w.checked_add(n_out as u64))
            .and_then(|d| d.checked_mul(8))
            .ok_or_else(|| MlpError::MalformedModel("layer size overflow".into()))?;
        if (cursor.remaining() as u64) < need {
            return Err(MlpError::MalformedModel("truncated layer payload".into()));
        }
        let weights = Matrix::new(n_out, n_in, cursor.f64s(n_in * n_out)?)
            .map_err(|e| MlpError::MalformedModel(e.to_string()))?;
        let bias = cursor.f64s(n_out)?;
        layers.push(
            Layer::new(weights, bias, activation)
                .map_err(|e| MlpError::MalformedModel(e.to_string()))?,
        );
    }
    if cursor.remaining() != 0 {
        return Err(MlpError::MalformedModel("trailing bytes".into()));
    }
    MlpModel::new(layers).map_err(|e| MlpError::MalformedModel(e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&[u8], MlpError> {
        if self.remaining() < n {
            return Err(MlpError::MalformedModel("unexpected end of buffer".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, MlpError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MlpError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, MlpError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, MlpError> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
