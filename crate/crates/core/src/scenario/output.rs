//! CSV and JSON writers. Every CSV file starts with a header row and ends
//! with a `#` footer carrying the seed, config digest and overrides.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::cir::ChannelSnapshot;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_sha256: String,
    pub overrides: Vec<String>,
}

impl Provenance {
    /// Provenance of a table joined from several runs: the seed of the
    /// first, a SHA-256 over the member digests in order, and the union of
    /// overrides in first-seen order.
    pub fn combined(parts: &[Provenance]) -> Provenance {
        let mut hasher = Sha256::new();
        let mut overrides: Vec<String> = Vec::new();
        for p in parts {
            hasher.update(p.config_sha256.as_bytes());
            hasher.update(b"\n");
            for o in &p.overrides {
                if !overrides.contains(o) {
                    overrides.push(o.clone());
                }
            }
        }
        Provenance {
            seed: parts.first().map_or(0, |p| p.seed),
            config_sha256: hex::encode(hasher.finalize()),
            overrides,
        }
    }

    pub fn footer(&self) -> String {
        let overrides = if self.overrides.is_empty() {
            "none".to_string()
        } else {
            self.overrides.join(";")
        };
        format!(
            "# seed={} config_sha256={} overrides={}",
            self.seed, self.config_sha256, overrides
        )
    }
}

/// In-memory table; numbers are written with their shortest round-trip
/// decimal form.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| fmt_f64(*x)).collect());
    }

    /// Row with a leading pair of numbers followed by `re, im, abs`.
    pub fn push_complex(&mut self, a: f64, b: f64, z: Complex64) {
        self.push_numbers(&[a, b, z.re, z.im, z.norm()]);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out.push_str(&provenance.footer());
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        write_file(path, self.render(provenance).as_bytes())
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        x.to_string()
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Full component dump of one snapshot, with the provenance alongside.
pub fn write_snapshot_json(path: &Path, snapshot: &ChannelSnapshot, provenance: &Provenance) -> Result<()> {
    let doc = serde_json::json!({
        "seed": provenance.seed,
        "config_sha256": provenance.config_sha256,
        "overrides": provenance.overrides,
        "snapshot": snapshot,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
