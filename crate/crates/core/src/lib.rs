//! Simulated prosthetic vision toolkit.
//!
//! - [`geometry`]: head orientation, ray casting and equirectangular mapping.
//! - [`phosphene`]: phosphene layout, quantization and Gaussian splats.
//! - [`renderer`]: ray-table frame pipeline.
//! - [`experiment`]: trial plans, headless sessions and event logs.
//! - [`analysis`]: angular resolution, normalization, regression and ANOVA.

pub mod analysis;
pub mod condition;
pub mod experiment;
pub mod geometry;
pub mod phosphene;
pub mod renderer;

pub use condition::Condition;
