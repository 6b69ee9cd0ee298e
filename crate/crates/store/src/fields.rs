//! Field publishing: the three-layer surface over raw tensor puts.
//!
//! Service layer: [`StoreClient::send_fields`] renders names, packs and
//! ships everything for one (time index, rank). Developer layer:
//! [`pack_fields`] fills a caller-owned [`Dataset`] and never touches the
//! database. Generic layer: [`StoreClient::send_list`] ships one tensor
//! under an explicit name.

use crate::client::{ClientError, StoreClient};
use crate::naming::{NamingConvention, META_KEY_DATASET, META_KEY_FIELD};
use crate::{Dataset, Kind, Polled, PollSpec, StoreError, Tensor};

/// The pseudo-patch carrying interior (non-boundary) values.
pub const INTERNAL_PATCH: &str = "internal";

/// One field on one patch: an `[n, components]` tensor with `n >= 1`.
/// Empty patches must be filtered out before construction; the store
/// rejects zero-sized tensors outright.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldBlock {
    pub field_name: String,
    pub patch_name: String,
    pub values: Tensor,
}

impl FieldBlock {
    pub fn new(
        field_name: impl Into<String>,
        patch_name: impl Into<String>,
        values: Tensor,
    ) -> Result<Self, StoreError> {
        if values.dims().len() != 2 {
            return Err(StoreError::ShapeMismatch(format!(
                "field block wants [n, components], got dims {:?}",
                values.dims()
            )));
        }
        Ok(Self {
            field_name: field_name.into(),
            patch_name: patch_name.into(),
            values,
        })
    }

    /// Build from rows, skipping construction entirely for an empty patch.
    pub fn from_rows(
        field_name: &str,
        patch_name: &str,
        rows: &[f64],
        components: usize,
    ) -> Result<Option<Self>, StoreError> {
        if rows.is_empty() {
            return Ok(None);
        }
        let tensor = Tensor::new(vec![rows.len() / components, components], rows.to_vec())?;
        Ok(Some(Self::new(field_name, patch_name, tensor)?))
    }
}

/// Developer layer: pack blocks into a dataset under the convention's field
/// names. Pure local mutation; database interaction happens elsewhere.
pub fn pack_fields(
    dataset: &mut Dataset,
    convention: &NamingConvention,
    blocks: &[FieldBlock],
) -> Result<(), StoreError> {
    for block in blocks {
        let field = convention.field_name(&block.field_name, &block.patch_name)?;
        dataset.put_tensor(field, block.values.clone());
    }
    Ok(())
}

impl StoreClient {
    /// Generic layer: one tensor under an explicit, fully rendered name.
    pub fn send_list(&mut self, values: &Tensor, name: &str) -> Result<(), ClientError> {
        self.put_tensor(name, values)
    }

    /// Publish the naming templates in the `<publisher>_metadata` dataset so
    /// consumers can derive every key without out-of-band configuration.
    pub fn publish_metadata(&mut self, convention: &NamingConvention) -> Result<(), ClientError> {
        let mut meta = Dataset::new(convention.metadata_key());
        meta.add_meta_string(META_KEY_DATASET, &convention.dataset_template);
        meta.add_meta_string(META_KEY_FIELD, &convention.field_template);
        meta.add_meta_string("publisher", &convention.publisher);
        self.put_dataset(&meta)
    }

    /// Service layer: ship one (time index, rank) worth of field blocks.
    ///
    /// Writes each block as a standalone tensor under its composed
    /// `{dataset}.field` key, then the dataset object itself, so both access
    /// paths see the data; the dataset write lands last and signals
    /// completeness. Returns the rendered dataset name.
    pub fn send_fields(
        &mut self,
        convention: &NamingConvention,
        time_index: u64,
        mpi_rank: u64,
        blocks: &[FieldBlock],
    ) -> Result<String, ClientError> {
        if blocks.is_empty() {
            return Err(ClientError::Invalid(StoreError::Malformed(
                "no field blocks left after empty-patch filtering".into(),
            )));
        }
        let ds_name = convention.dataset_name(time_index, mpi_rank)?;
        let mut dataset = Dataset::new(&ds_name);
        pack_fields(&mut dataset, convention, blocks)?;
        dataset.add_meta_string("time_index", time_index.to_string());
        dataset.add_meta_string("mpi_rank", mpi_rank.to_string());

        for block in blocks {
            let key = convention.full_key(
                time_index,
                mpi_rank,
                &block.field_name,
                &block.patch_name,
            )?;
            self.send_list(&block.values, &key)?;
        }
        self.put_dataset(&dataset)?;
        Ok(ds_name)
    }

    /// Consumer side: poll for a publisher's metadata dataset and rebuild
    /// its naming convention from the stored templates.
    pub fn fetch_naming(
        &mut self,
        publisher: &str,
        spec: &PollSpec,
    ) -> Result<NamingConvention, ClientError> {
        let key = format!("{publisher}_metadata");
        match self.poll_key(Kind::Dataset, &key, spec)? {
            Polled::Found { .. } => {}
            Polled::Timeout { .. } => return Err(ClientError::NotFound),
        }
        let meta = self.get_dataset(&key)?.ok_or(ClientError::NotFound)?;
        let dataset_template = meta
            .meta_strings(META_KEY_DATASET)
            .and_then(|v| v.first())
            .ok_or_else(|| ClientError::Protocol("metadata lacks dataset template".into()))?;
        let field_template = meta
            .meta_strings(META_KEY_FIELD)
            .and_then(|v| v.first())
            .ok_or_else(|| ClientError::Protocol("metadata lacks field template".into()))?;
        Ok(NamingConvention::from_templates(
            publisher,
            dataset_template,
            field_template,
        )?)
    }
}
