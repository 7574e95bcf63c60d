//! Stage two: person insertion. A placement ("where") network proposes a
//! center and scale on a quarter-resolution map, a silhouette ("what")
//! network draws a 128x128 binary mask from the surrounding context, and
//! the mask is composited into the full-resolution map.

mod config;
mod insert;
mod networks;
mod train;

pub use config::{threshold_mask, InsertionConfig, WhatMask, WhereProposal, MASK_SIZE};
pub use insert::{
    context_window, generate_raw_shape, generate_shape, insert_instance, insert_with_retries, propose_location,
    where_input, Insertion,
};
pub use networks::{render_footprint, PatchCritic, Placement, WhatGenerator, WhereGenerator};
pub use train::{
    metrics_csv, real_shape, train_insertion, train_insertion_more, Checkpoint, InsertionStep, CHECKPOINT_MAGIC,
    METRICS_HEADER,
};
