//! Stage three: semantic map to RGB image. Residual generator blocks with
//! spatially adaptive normalization, trained against two patch
//! discriminators at full and half resolution.

mod config;
mod losses;
mod networks;
mod train;

pub use config::SynthConfig;
pub use losses::{
    discriminator_hinge_grad, discriminator_hinge_loss, discriminator_hinge_value, feature_matching_l1,
    generator_hinge_grad, generator_hinge_loss, generator_hinge_value,
};
pub use networks::{
    downsample_nearest, spatially_adaptive_norm, MultiScaleDiscriminator, ScaleOutput, SpadeNorm, SynthGenerator,
    NUM_SCALES,
};
pub use train::{
    metrics_csv, toy_target, train_translation, train_translation_more, train_translation_steps, translate, Checkpoint,
    ImageTensor, SynthStep, CHECKPOINT_MAGIC, METRICS_HEADER,
};

#[cfg(test)]
mod tests;
