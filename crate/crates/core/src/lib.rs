//! Synthetic pedestrian-detection data from a sequence of three GANs.
//!
//! Stage 1 ([`semgan`]) samples a one-hot semantic map from a latent vector,
//! stage 2 ([`instafill`]) decides where a person goes and what silhouette it
//! has, and stage 3 ([`pixsynth`]) translates the map into an RGB image with
//! spatially-adaptive normalization. [`pipeline`] chains the stages and
//! exports an annotated dataset; [`bench`] scores detections against ground
//! truth with IoU matching and precision/recall/F-score per range split.
//!
//! Everything is seeded. A fixed seed reproduces every artifact bit-for-bit
//! on the same platform.

pub mod bench;
pub mod cli;
pub mod error;
pub mod instafill;
pub mod nn;
pub mod pipeline;
pub mod pixsynth;
pub mod seeds;
pub mod semgan;
pub mod semmap;

pub use error::{Error, Result};
