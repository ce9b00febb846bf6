//! Command-line entry points and the frame service for the simulated
//! prosthetic vision toolkit.

pub mod commands;
pub mod corpus;
pub mod protocol;
pub mod service;
pub mod settings;

pub use commands::{run, Cli};
