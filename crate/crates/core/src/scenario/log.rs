//! Per-realization run log.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cir::ChannelSnapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: u64,
    pub delay: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub distance: f64,
    pub cluster_count: usize,
    pub clusters: Vec<ClusterRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDigest {
    pub time: f64,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub realization: u64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<SnapshotDigest>,
}

impl RunLog {
    pub fn new(realization: u64) -> Self {
        Self {
            realization,
            ..Self::default()
        }
    }

    /// Appends a record; times must strictly increase.
    pub fn push(&mut self, record: StepRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.time > last.time) {
                return Err(Error::InvalidParameter {
                    name: "time",
                    reason: format!("log time {} does not follow {}", record.time, last.time),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn push_snapshot(&mut self, snapshot: &ChannelSnapshot) -> Result<()> {
        self.snapshots.push(SnapshotDigest {
            time: snapshot.time,
            sha256: snapshot_digest(snapshot)?,
        });
        Ok(())
    }
}

/// SHA-256 of the snapshot's JSON form.
pub fn snapshot_digest(snapshot: &ChannelSnapshot) -> Result<String> {
    let bytes = serde_json::to_vec(snapshot)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
