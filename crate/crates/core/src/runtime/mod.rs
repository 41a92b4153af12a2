//! Deployment runtime: binary model container, canonical Huffman codec,
//! integer-only inference engine, and the analytic energy model.

pub mod energy;
pub mod engine;
pub mod format;
pub mod huffman;

pub use energy::{
    estimate_inference_energy, estimate_wake_budget, EnergyEstimate, EnergyProfile,
};
pub use engine::{
    measured_latency, quantized_forward, FixedPointMultiplier, LatencyStats, QEngine,
};
pub use format::{deserialize, serialize, serialize_float, serialize_quantized, Model};
pub use huffman::{huffman_decode, huffman_encode, EncodedModel};
