//! Discrete-time simulator of popular content distribution in
//! cognitive-radio VANETs.
//!
//! A roadside unit broadcasts a popular file to vehicles driving past;
//! vehicles complement their missing packets over vehicle-to-vehicle links
//! on sensed cognitive-radio channels. Link selection is driven by a
//! coalitional graph game whose myopic best-response dynamics form the
//! per-slot transmission graph; pure broadcasting, an uncoordinated P2P
//! scheme, and exact enumeration serve as baselines.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod engine;
pub mod game;
pub mod mobility;
pub mod spectrum;

pub use config::{load_config, Config, ConfigError, MobilityConfig, OptimalObjective};
