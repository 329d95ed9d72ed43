//! Toolkit for building and scoring weather-diverse road-anomaly datasets:
//! perspective-aware box placement, copy-paste compositing, a client for
//! external generation services, pixel-level OoD metrics and dataset
//! management.

pub mod compositor;
pub mod dataset;
pub mod genclient;
pub mod hashing;
pub mod imageio;
pub mod metrics;
pub mod pipeline;
pub mod placer;
pub mod scalar;
pub mod scene;

pub use scalar::{Cost, Real};

pub type Box64 = placer::PseudoBox<f64>;
pub type Box32 = placer::PseudoBox<f32>;
