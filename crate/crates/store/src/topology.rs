//! Connection-count diagnostics for the hub topology.

use crate::StoreError;

/// Number of client connections in a hub deployment.
///
/// `client_counts` lists per-application rank counts with the hub's own size
/// as the last entry; every non-hub application connects each of its ranks
/// to every hub shard, so the total is `sum(count * hub_size)`. A
/// fully-connected (peer-to-peer) count is deliberately not offered; the hub
/// is the supported topology.
pub fn topology_connections(hub: bool, client_counts: &[u64]) -> Result<u64, StoreError> {
    if !hub {
        return Err(StoreError::Unsupported(
            "only the hub topology is supported".into(),
        ));
    }
    let (&hub_size, apps) = client_counts
        .split_last()
        .ok_or_else(|| StoreError::Malformed("client counts must include the hub size".into()))?;
    let mut total: u64 = 0;
    for &count in apps {
        let c = count
            .checked_mul(hub_size)
            .and_then(|c| total.checked_add(c))
            .ok_or_else(|| StoreError::Malformed("connection count overflow".into()))?;
        total = c;
    }
    Ok(total)
}
