//! Polling: the workflows' only blocking primitive.
//!
//! A poll performs repeated existence (or length) queries at a fixed
//! interval up to a maximum attempt count. Exhausting the budget is an
//! ordinary outcome, not a transport fault.

use std::time::Duration;

use crate::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollSpec {
    pub interval: Duration,
    pub max_attempts: u32,
}

impl PollSpec {
    /// Interval must be at least one millisecond, attempts at least one.
    pub fn millis(interval_ms: u64, max_attempts: u32) -> Result<Self, StoreError> {
        if interval_ms < 1 {
            return Err(StoreError::Malformed(
                "poll interval must be >= 1 ms".into(),
            ));
        }
        if max_attempts < 1 {
            return Err(StoreError::Malformed("poll attempts must be >= 1".into()));
        }
        Ok(Self {
            interval: Duration::from_millis(interval_ms),
            max_attempts,
        })
    }
}

/// Outcome of a poll, with the number of queries actually issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polled {
    Found { attempts: u32 },
    Timeout { attempts: u32 },
}

impl Polled {
    pub fn found(&self) -> bool {
        matches!(self, Polled::Found { .. })
    }

    pub fn attempts(&self) -> u32 {
        match self {
            Polled::Found { attempts } | Polled::Timeout { attempts } => *attempts,
        }
    }
}
