//! Particle-resolved simulation of digital molecular communication in a
//! blood vessel.
//!
//! A mobile transmitter cell releases bursts of carrier molecules into a
//! cylindrical vessel. Carriers move by laminar drift and Brownian motion,
//! bounce off blood cells and the wall, and are assimilated by
//! receptor-bearing receiver cells tiling the wall. Each receiver runs a
//! digital chain (windowed counter, moving-sum filter, synchronization and
//! threshold detector) that recovers on-off-keyed frames from the
//! assimilation stream. The experiment layer reproduces impulse-response
//! maps, per-window count traces, detector parameter sweeps and full frame
//! transmissions, emitting CSV files plus a run manifest.

pub mod chain;
pub mod collision;
pub mod config;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod geometry;
pub mod output;
pub mod particle;
pub mod reception;
pub mod rng;
pub mod world;

pub use chain::{
    decode_frames, encode_ook, ChainOutput, EncoderConfig, Frame, PulseTrain, ReceiverChain,
    ReceiverChainConfig, StdMode,
};
pub use config::{load_config, stokes_einstein_diffusivity, SimulationConfig};
pub use error::{ChainError, ConfigError, ExperimentError, SimError};
pub use experiment::{ExperimentKind, ExperimentSpec, ExperimentSummary};
pub use geometry::{CylindricalPosition, Vec3, VesselGeometry};
pub use reception::{ReceptionMap, ReceiverArray};
pub use world::{Ledger, World};

/// Build/version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
