//! Stage one: a GAN over one-hot semantic maps. Self-normalizing
//! activations, feature matching for the generator, a fully convolutional
//! discriminator with dropout after every block.

mod config;
mod losses;
mod networks;
mod train;

pub use config::SemGanConfig;
pub use losses::{
    discriminator_bce_loss, discriminator_bce_value, feature_matching_grad, feature_matching_loss,
    feature_matching_value, BCE_EPS,
};
pub use networks::{DiscOutput, Discriminator, Generator};
pub use train::{
    class_frequencies, js_divergence, sample, sample_latent, train, train_more, Checkpoint, StepLoss, TrainReport,
    CHECKPOINT_MAGIC, METRICS_HEADER,
};

#[cfg(test)]
mod tests;
