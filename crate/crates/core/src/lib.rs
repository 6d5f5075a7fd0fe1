//! Reconstruction of sparse signals from scalar-quantized compressive
//! measurements.
//!
//! The central algorithm is quantized iterative hard thresholding (QIHT):
//!
//! ```text
//! x(n+1) = H_K[ x(n) + mu * Phi^T (y - Q_b(Phi x(n))) ]
//! ```
//!
//! where `Q_b` is a `b`-bit Lloyd-Max quantizer designed for a standard
//! normal source. At `b = 1` the recursion is binary IHT; as `b` grows it
//! approaches plain IHT. The crate also ships IHT, a basis pursuit denoise
//! solver, the one-shot hard-thresholding estimator for 1-bit data, Monte
//! Carlo checks of the sign-product embedding, and a seeded experiment
//! harness that sweeps bit depth against total bit budget.

pub mod consistency;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod quantizer;
pub mod recon;
pub mod signal_model;

pub use consistency::ConsistencyCost;
pub use error::{Error, Result};
pub use quantizer::Quantizer;
pub use recon::{ReconConfig, ReconResult, Termination};
pub use signal_model::{BitVector, SensingMatrix, SparseSignal};
