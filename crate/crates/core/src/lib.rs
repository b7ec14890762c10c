//! Analytic Hanning-window controls for simultaneous single-qubit gates on two
//! frequency-crowded transmon qutrits, with exact propagation, fidelity metrics,
//! Nelder–Mead synthesis, hardware filtering and batch experiments.

pub mod error;
pub mod experiments;
pub mod hardware;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod propagator;
pub mod pulses;
pub mod quadrature;

pub use error::{Error, Result};
