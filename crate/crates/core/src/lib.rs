//! Peak cancellation for OFDM and eigen-beam MIMO transmitters.
//!
//! The crate is organised bottom-up:
//!
//! * [`ofdm`] constellations, modulation, demodulation and AWGN.
//! * [`pc`] the windowed cancellation kernel, the threshold solver and the
//!   budget-tracked cancellation loop.
//! * [`metrics`] measured EVM, ACLR, PSD, CCDF and multiplication counts.
//! * [`baselines`] clipping and filtering, adaptive-threshold C&F and companding.
//! * [`mimo`] multipath channels, per-subcarrier SVD and the E-SDM link.
//! * [`ber`] Gaussian distortion model and theoretical bit error rates.
//!
//! All randomness flows through [`seed`], so every result is a pure function
//! of its inputs and a 64-bit seed.

pub mod baselines;
pub mod ber;
pub mod error;
pub mod metrics;
pub mod mimo;
pub mod numeric;
pub mod ofdm;
pub mod pc;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;
