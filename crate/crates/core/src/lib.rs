//! Synthetic 2D+t fluorescence microscopy of cell nuclei.
//!
//! The pipeline samples mitotic stage sequences, turns them into smoothly
//! changing nucleus outlines with per-stage statistical shape models, moves
//! and divides cells on a canvas, textures each cell from a three-channel
//! conditioning patch and finally simulates the camera. Every output comes
//! with instance masks, lineage and per-frame stage ground truth.

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod defaults;
pub mod error;
pub mod filter;
pub mod imageio;
pub mod population_sim;
pub mod rng;
pub mod shape_model;
pub mod stage_model;
pub mod texture;

pub use error::{Error, Result};
