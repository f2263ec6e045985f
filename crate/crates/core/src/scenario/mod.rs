//! Configuration, presets, RNG streams, run logs and output files.

pub mod commands;
mod config;
mod log;
mod output;
mod rng;
mod runner;

pub use config::{
    canonical_key, load_config, load_config_with, parse_override, ArraySection, ConfigError, EvolutionSection, MotionSection,
    RicianSection, RunSection, ScenarioConfig, SceneSection, StatsSection, KEYS, PRESETS,
};
pub use log::{snapshot_digest, ClusterRecord, RunLog, SnapshotDigest, StepRecord};
pub use output::{fmt_f64, write_snapshot_json, Provenance, Table};
pub use rng::{rng_streams, RngStreams, DOMAIN_EVOLUTION, DOMAIN_PHASES};
pub use runner::{cluster_log, cluster_logs, instant_stats, realization_stats, streams, InstantStats, RealizationStats};
