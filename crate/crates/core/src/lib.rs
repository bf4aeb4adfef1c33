//! Multi-bit quantized weak-target detection for colocated MIMO radar.
//!
//! The crate is organised along the processing chain:
//!
//! ```text
//! SceneConfig ──► effective_signal (z = vec(A(φ)S))
//!      │                      │
//!      └─► synthesize_observation ──► quantize ──► rao_statistic ──► decide
//!                             │
//!                             └──────────────────► glrt_unquantized
//! ```
//!
//! [`theory`] provides the Fisher information, non-centrality parameters and
//! the asymptotic χ² detection curves, [`optimizer`] designs the quantizer
//! thresholds with a particle swarm, and [`montecarlo`] runs seeded trials
//! that are reproducible regardless of the number of worker threads.

pub mod crosscheck;
pub mod detectors;
mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod quantizer;
pub mod scene;
pub mod special;
pub mod theory;

pub use error::{Error, Result};
