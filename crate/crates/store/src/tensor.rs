use std::collections::BTreeMap;

use simorch_linalg::Matrix;

use crate::StoreError;

/// Element type of stored tensors. Only 64-bit floats exist today; the wire
/// format reserves a byte so other widths can be added without breaking
/// clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    Float64 = 0,
}

/// Namespace selector for keyed operations. The four namespaces are
/// disjoint: a tensor named "x" never answers a dataset lookup of "x".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Tensor = 0,
    Dataset = 1,
    List = 2,
    Model = 3,
}

impl Kind {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Kind::Tensor),
            1 => Some(Kind::Dataset),
            2 => Some(Kind::List),
            3 => Some(Kind::Model),
            _ => None,
        }
    }
}

/// N-dimensional row-major array of doubles; the store's atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dtype: Dtype,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Construct with full validation: dims non-empty, no zero dim, data
    /// length equal to the dim product.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, StoreError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(StoreError::ZeroSized);
        }
        if dims.is_empty() {
            return Err(StoreError::Malformed("tensor dims must be non-empty".into()));
        }
        let expect: usize = dims.iter().product();
        if data.len() != expect {
            return Err(StoreError::Malformed(format!(
                "data length {} does not match dims {:?} (expected {expect})",
                data.len(),
                dims
            )));
        }
        Ok(Self {
            dtype: Dtype::Float64,
            dims,
            data,
        })
    }

    /// One-element tensor; with value 1.0 this is the store's flag idiom.
    pub fn scalar(value: f64) -> Self {
        Self {
            dtype: Dtype::Float64,
            dims: vec![1],
            data: vec![value],
        }
    }

    pub fn flag() -> Self {
        Self::scalar(1.0)
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            dtype: Dtype::Float64,
            dims: vec![m.rows(), m.cols()],
            data: m.data().to_vec(),
        }
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interpret as a 2-D matrix; requires exactly two dims.
    pub fn as_matrix(&self) -> Result<Matrix, StoreError> {
        if self.dims.len() != 2 {
            return Err(StoreError::ShapeMismatch(format!(
                "expected a 2-D tensor, got dims {:?}",
                self.dims
            )));
        }
        Matrix::new(self.dims[0], self.dims[1], self.data.clone())
            .map_err(|e| StoreError::ShapeMismatch(e.to_string()))
    }

    /// Flatten to `[len/width, width]` rows; the shape rule for model
    /// inference inputs.
    pub fn flatten_rows(&self, width: usize) -> Result<Matrix, StoreError> {
        if width == 0 || self.data.len() % width != 0 {
            return Err(StoreError::ShapeMismatch(format!(
                "{} elements do not flatten to rows of width {width}",
                self.data.len()
            )));
        }
        Matrix::new(self.data.len() / width, width, self.data.clone())
            .map_err(|e| StoreError::ShapeMismatch(e.to_string()))
    }
}

/// Named collection of tensors plus ordered string metadata; the unit of
/// per-rank, per-timestep exchange.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    name: String,
    tensors: BTreeMap<String, Tensor>,
    meta: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            tensors: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rename(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Insert or replace a field tensor. Field names are unique by map
    /// semantics.
    pub fn put_tensor(&mut self, field: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(field.into(), tensor);
    }

    pub fn get_tensor(&self, field: &str) -> Option<&Tensor> {
        self.tensors.get(field)
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn tensor_count(&self) -> usize {
        self.tensors.len()
    }

    /// Append onto the named metadata list, preserving insertion order.
    pub fn add_meta_string(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.entry(key.into()).or_default().push(value.into());
    }

    pub fn meta_strings(&self, key: &str) -> Option<&[String]> {
        self.meta.get(key).map(|v| v.as_slice())
    }

    pub fn meta(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.meta.iter()
    }
}
