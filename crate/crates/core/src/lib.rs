//! Layered graphic-design parsing: a text rendering protocol, a deterministic
//! renderer, a renderer-grounded reward, GRPO training numerics, layer token
//! attention, and evaluation utilities.

pub mod protocol;
pub mod raster;
pub mod render;
pub mod reward;
pub mod grpo;
pub mod lta;
pub mod eval;
