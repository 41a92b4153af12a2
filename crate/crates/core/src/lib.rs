//! Accelerometer event classification for battery-powered package trackers.
//!
//! The crate covers the whole desk-side pipeline: synthetic data generation and
//! CSV ingestion ([`dataio`]), minority oversampling ([`augment`]), a
//! self-contained 1D-CNN with exact backpropagation ([`nnet`]), threshold-gated
//! rejection into a "Dummy" class ([`decide`]), the pruning / quantization
//! compression chain ([`compress`]), and the deployment side: binary model
//! format, canonical Huffman codec, integer-only inference engine, and an
//! analytic energy model ([`runtime`]).

pub mod augment;
pub mod compress;
pub mod config;
pub mod dataio;
pub mod decide;
pub mod error;
pub mod nnet;
pub mod rng;
pub mod runtime;

pub use error::{Error, Result};
