//! Semantic maps: palettes, one-hot encoding, label-safe resizing,
//! instance compositing, toy scenes and PNG I/O.

mod instance;
pub mod io;
mod map;
mod palette;
pub mod toy;

pub use instance::{composite_instance, mask_to_bbox, BoundingBox, InstanceMask};
pub use map::{
    decode_argmax, encode_one_hot, encode_one_hot_k, one_hot_chw, resize_nearest, OneHotTensor, SemanticMap,
};
pub use palette::{LabelPalette, PaletteEntry, SceneRoles};
pub use toy::{generate_toy_scene, generate_toy_scene_with, ToyScene, ToySceneConfig};
