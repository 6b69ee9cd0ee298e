//! The hub's shared state: four disjoint key namespaces behind one lock.
//!
//! Every public operation takes `&self` and is linearizable per key. Model
//! inference clones the model and its inputs under a read lock, computes
//! outside any lock, and publishes all outputs under one write lock so other
//! sessions never observe a partial result.

use std::collections::HashMap;
use std::sync::RwLock;

use simorch_mlp::MlpModel;

use crate::{Dataset, Kind, StoreError, Tensor};

#[derive(Default)]
struct Inner {
    tensors: HashMap<String, Tensor>,
    datasets: HashMap<String, Dataset>,
    lists: HashMap<String, Vec<String>>,
    models: HashMap<String, MlpModel>,
}

/// Thread-safe in-memory store shared by all server sessions.
#[derive(Default)]
pub struct Store {
    inner: RwLock<Inner>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_tensor(&self, key: impl Into<String>, tensor: Tensor) {
        self.inner
            .write()
            .unwrap()
            .tensors
            .insert(key.into(), tensor);
    }

    pub fn get_tensor(&self, key: &str) -> Option<Tensor> {
        self.inner.read().unwrap().tensors.get(key).cloned()
    }

    pub fn put_dataset(&self, dataset: Dataset) {
        let mut inner = self.inner.write().unwrap();
        inner.datasets.insert(dataset.name().to_string(), dataset);
    }

    pub fn get_dataset(&self, key: &str) -> Option<Dataset> {
        self.inner.read().unwrap().datasets.get(key).cloned()
    }

    /// Idempotent: deleting a missing key is an ack, which keeps multi-rank
    /// deletion after a barrier race-free.
    pub fn delete(&self, kind: Kind, key: &str) {
        let mut inner = self.inner.write().unwrap();
        match kind {
            Kind::Tensor => {
                inner.tensors.remove(key);
            }
            Kind::Dataset => {
                inner.datasets.remove(key);
            }
            Kind::List => {
                inner.lists.remove(key);
            }
            Kind::Model => {
                inner.models.remove(key);
            }
        }
    }

    pub fn exists(&self, kind: Kind, key: &str) -> bool {
        let inner = self.inner.read().unwrap();
        match kind {
            Kind::Tensor => inner.tensors.contains_key(key),
            Kind::Dataset => inner.datasets.contains_key(key),
            Kind::List => inner.lists.contains_key(key),
            Kind::Model => inner.models.contains_key(key),
        }
    }

    /// Append a dataset key to an aggregation list, creating the list on
    /// first use. Returns the post-append length.
    pub fn list_append(&self, list_key: &str, dataset_key: &str) -> Result<usize, StoreError> {
        let mut inner = self.inner.write().unwrap();
        if !inner.datasets.contains_key(dataset_key) {
            return Err(StoreError::Dangling(dataset_key.to_string()));
        }
        let list = inner.lists.entry(list_key.to_string()).or_default();
        list.push(dataset_key.to_string());
        Ok(list.len())
    }

    pub fn list_length(&self, key: &str) -> Option<usize> {
        self.inner.read().unwrap().lists.get(key).map(|l| l.len())
    }

    pub fn list_get(&self, key: &str) -> Option<Vec<String>> {
        self.inner.read().unwrap().lists.get(key).cloned()
    }

    /// Store a model from its serialized bytes, validating the format.
    pub fn put_model(&self, key: impl Into<String>, bytes: &[u8]) -> Result<(), StoreError> {
        let model = simorch_mlp::deserialize(bytes)
            .map_err(|e| StoreError::MalformedModel(e.to_string()))?;
        self.inner.write().unwrap().models.insert(key.into(), model);
        Ok(())
    }

    pub fn model_exists(&self, key: &str) -> bool {
        self.exists(Kind::Model, key)
    }

    /// Run the stored model on each input tensor, writing one output tensor
    /// per input key. Inputs are flattened to `[n, in_dim]`; outputs have
    /// shape `[n, out_dim]` and become visible atomically as a group.
    pub fn run_model(
        &self,
        model_key: &str,
        input_keys: &[String],
        output_keys: &[String],
    ) -> Result<(), StoreError> {
        if input_keys.len() != output_keys.len() {
            return Err(StoreError::ShapeMismatch(format!(
                "{} inputs vs {} outputs",
                input_keys.len(),
                output_keys.len()
            )));
        }

        let (model, inputs) = {
            let inner = self.inner.read().unwrap();
            let model = inner
                .models
                .get(model_key)
                .cloned()
                .ok_or(StoreError::NotFound)?;
            let mut inputs = Vec::with_capacity(input_keys.len());
            for key in input_keys {
                inputs.push(inner.tensors.get(key).cloned().ok_or(StoreError::NotFound)?);
            }
            (model, inputs)
        };

        let in_dim = model.input_dim();
        let out_dim = model.output_dim();
        let mut results = Vec::with_capacity(inputs.len());
        for (tensor, out_key) in inputs.iter().zip(output_keys) {
            let x = tensor.flatten_rows(in_dim)?;
            let y = model
                .forward(&x)
                .map_err(|e| StoreError::ShapeMismatch(e.to_string()))?;
            let out = Tensor::new(vec![y.rows(), out_dim], y.into_data())
                .expect("forward output is well-formed");
            results.push((out_key.clone(), out));
        }

        let mut inner = self.inner.write().unwrap();
        for (key, tensor) in results {
            inner.tensors.insert(key, tensor);
        }
        Ok(())
    }
}
