//! Key naming conventions and the minimal template engine behind them.
//!
//! Templates support exactly one feature: `{{ identifier }}` substitution,
//! with optional spaces inside the braces. Producers publish their templates
//! in a metadata dataset so a consumer that knows only the publisher name
//! can reconstruct every key.

use crate::StoreError;

/// Substitute `{{ var }}` placeholders from `bindings`. Anything that does
/// not parse as a placeholder is copied verbatim, so rendering is idempotent
/// on its own output.
pub fn render(template: &str, bindings: &[(&str, &str)]) -> Result<String, StoreError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' && i + 1 < bytes.len() && bytes[i + 1] == b'{' {
            if let Some((name, end)) = parse_placeholder(template, i + 2) {
                let value = bindings
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| StoreError::UnboundPlaceholder(name.to_string()))?;
                out.push_str(value);
                i = end;
                continue;
            }
        }
        // Not a placeholder start; copy one UTF-8 character.
        let ch = template[i..].chars().next().unwrap();
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

/// Parse `ident }}` starting just after `{{`; returns the identifier and the
/// byte offset past the closing braces.
fn parse_placeholder(template: &str, mut pos: usize) -> Option<(&str, usize)> {
    let bytes = template.as_bytes();
    while pos < bytes.len() && bytes[pos] == b' ' {
        pos += 1;
    }
    let start = pos;
    while pos < bytes.len()
        && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
    {
        pos += 1;
    }
    if pos == start || !bytes[start].is_ascii_alphabetic() && bytes[start] != b'_' {
        return None;
    }
    let name = &template[start..pos];
    while pos < bytes.len() && bytes[pos] == b' ' {
        pos += 1;
    }
    if pos + 1 < bytes.len() && bytes[pos] == b'}' && bytes[pos + 1] == b'}' {
        Some((name, pos + 2))
    } else {
        None
    }
}

/// Per-publisher key naming: a dataset template over `time_index` and
/// `mpi_rank`, and a field template over `name` and `patch`. The composed
/// tensor key keeps the `{...}` hash-tag braces around the dataset part so
/// keys stay valid under cluster-style sharding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingConvention {
    pub publisher: String,
    pub dataset_template: String,
    pub field_template: String,
}

pub const META_KEY_DATASET: &str = "dataset";
pub const META_KEY_FIELD: &str = "field";

impl NamingConvention {
    /// Default templates for a publisher.
    pub fn for_publisher(publisher: &str) -> Result<Self, StoreError> {
        if publisher.is_empty() {
            return Err(StoreError::InvalidName("publisher name is empty".into()));
        }
        Ok(Self {
            publisher: publisher.to_string(),
            dataset_template: format!(
                "{publisher}_time_index_{{{{ time_index }}}}_mpi_rank_{{{{ mpi_rank }}}}"
            ),
            field_template: "field_name_{{ name }}_patch_{{ patch }}".to_string(),
        })
    }

    /// Rebuild a convention from templates fetched out of a metadata
    /// dataset.
    pub fn from_templates(
        publisher: &str,
        dataset_template: &str,
        field_template: &str,
    ) -> Result<Self, StoreError> {
        if publisher.is_empty() {
            return Err(StoreError::InvalidName("publisher name is empty".into()));
        }
        Ok(Self {
            publisher: publisher.to_string(),
            dataset_template: dataset_template.to_string(),
            field_template: field_template.to_string(),
        })
    }

    pub fn metadata_key(&self) -> String {
        format!("{}_metadata", self.publisher)
    }

    pub fn dataset_name(&self, time_index: u64, mpi_rank: u64) -> Result<String, StoreError> {
        let t = time_index.to_string();
        let r = mpi_rank.to_string();
        render(
            &self.dataset_template,
            &[("time_index", &t), ("mpi_rank", &r)],
        )
    }

    pub fn field_name(&self, name: &str, patch: &str) -> Result<String, StoreError> {
        render(&self.field_template, &[("name", name), ("patch", patch)])
    }

    /// Full tensor key: `{dataset}.field`.
    pub fn full_key(
        &self,
        time_index: u64,
        mpi_rank: u64,
        name: &str,
        patch: &str,
    ) -> Result<String, StoreError> {
        Ok(format!(
            "{{{}}}.{}",
            self.dataset_name(time_index, mpi_rank)?,
            self.field_name(name, patch)?
        ))
    }
}
