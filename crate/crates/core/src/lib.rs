//! Non-stationary 3D mmWave MIMO channel simulator for a train moving
//! inside a vacuum tube.
//!
//! A [`ChannelModel`] holds the scene, arrays and cluster-process
//! parameters. [`ChannelModel::realize`] starts a [`Realization`] whose
//! cluster set evolves by birth and death as the receiver moves; snapshots
//! of it feed the statistics in [`stats`].

pub mod channel;
pub mod cir;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod scenario;
pub mod stats;
pub mod vonmises;

pub use channel::{ChannelModel, Realization};
pub use cir::{ChannelSnapshot, ChannelView, PathComponent, PathKind, RicianModel};
pub use error::{Error, Result};
pub use evolution::{Cluster, EvolutionParams, Forcing, Ray};
pub use geometry::{AntennaArray, TubeScene, Vector3, SPEED_OF_LIGHT};
pub use scenario::{load_config, ScenarioConfig};
