use super::*;
use crate::nn::{randn, tensor, to_vec, LayerKind, Mode, TrainConfig};
use crate::semmap::{generate_toy_scene, LabelPalette};
use crate::{seeds, Error};

fn small() -> SemGanConfig {
    SemGanConfig { resolution: 32, base_channels: 8, latent_dim: 16, ..SemGanConfig::toy(8) }
}

fn toy_maps(n: usize, r: usize) -> Vec<crate::semmap::SemanticMap> {
    let palette = LabelPalette::toy();
    (0..n).map(|i| generate_toy_scene(i as u64, r, r, &palette).unwrap()).collect()
}

#[test]
fn generator_output_is_a_distribution() {
    let cfg = SemGanConfig::toy(8);
    let g = Generator::new(&cfg, &mut seeds::rng(1)).unwrap();
    let z = tensor(randn(&mut seeds::rng(2), 2 * cfg.latent_dim), &[2, cfg.latent_dim]).unwrap();
    let out = g.forward(&z, &Mode::Eval).unwrap();
    assert_eq!(out.dims(), &[2, 8, 64, 64]);
    let sums = to_vec(&out.sum(1).unwrap()).unwrap();
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-5));
    let again = to_vec(&g.forward(&z, &Mode::Eval).unwrap()).unwrap();
    assert_eq!(to_vec(&out).unwrap(), again);
}

#[test]
fn discriminator_contract() {
    let cfg = SemGanConfig::toy(8);
    let d = Discriminator::new(&cfg, &mut seeds::rng(3)).unwrap();
    let x = tensor(randn(&mut seeds::rng(4), 3 * 8 * 64 * 64), &[3, 8, 64, 64]).unwrap();
    let a = d.forward(&x, &mut Mode::Eval).unwrap();
    let b = d.forward(&x, &mut Mode::Eval).unwrap();
    assert_eq!(a.scores.dims(), &[3]);
    assert!(to_vec(&a.scores).unwrap().iter().all(|s| *s > 0.0 && *s < 1.0));
    assert_eq!(to_vec(&a.scores).unwrap(), to_vec(&b.scores).unwrap());
    let (c, h, w) = Discriminator::tap_shape(&cfg).unwrap();
    assert_eq!((c, h, w), (64, 8, 8));
    assert_eq!(a.features.dims(), &[3, c, h, w]);
    let layers = d.layers();
    assert!(layers.iter().any(|l| l.name == "conv6"));
    assert!(layers
        .iter()
        .all(|l| !matches!(l.kind, LayerKind::Conv2d { .. }) || l.name.starts_with("conv") || l.name == "score"));
    assert_eq!(layers.iter().filter(|l| matches!(l.kind, LayerKind::AlphaDropout { .. })).count(), cfg.num_blocks());
}

#[test]
fn too_small_for_six_convolutions() {
    let cfg = SemGanConfig { resolution: 16, ..SemGanConfig::toy(8) };
    assert!(matches!(Discriminator::new(&cfg, &mut seeds::rng(0)), Err(Error::Config(_))));
}

#[test]
fn empty_dataset() {
    let r = train(&[], &small(), &TrainConfig::default());
    assert!(matches!(r, Err(Error::DatasetEmpty)));
}

#[test]
fn wrong_resolution_is_rejected() {
    let maps = toy_maps(2, 16);
    assert!(matches!(train(&maps, &small(), &TrainConfig::default()), Err(Error::Contract(_))));
}

#[test]
fn js_divergence_basics() {
    let p = [0.5, 0.5, 0.0];
    assert_eq!(js_divergence(&p, &p), 0.0);
    let q = [0.0, 0.0, 1.0];
    assert!((js_divergence(&p, &q) - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn training_is_finite_seeded_and_checkpoint_roundtrips() {
    let cfg = small();
    let maps = toy_maps(8, 32);
    let tc = TrainConfig { batch_size: 4, epochs: 2, seed: 9, ..TrainConfig::default() };
    let (ckpt, report) = train(&maps, &cfg, &tc).unwrap();
    assert_eq!(report.log.len(), 4);
    assert!(report.log.iter().all(|s| s.d_loss.is_finite() && s.g_loss.is_finite()));
    assert_eq!(report.histograms.len(), 3);
    assert!(report.metrics_csv().starts_with(METRICS_HEADER));

    let (_, again) = train(&maps, &cfg, &tc).unwrap();
    assert_eq!(report.log, again.log);

    let z = randn(&mut seeds::rng(5), cfg.latent_dim);
    let before = sample(&ckpt, &z).unwrap();
    assert_eq!(before.size(), (32, 32));
    assert!(before.labels().iter().all(|&l| l < 8));
    let bytes = ckpt.to_bytes().unwrap();
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(loaded.epoch, 2);
    assert_eq!(sample(&loaded, &z).unwrap(), before);
    assert_eq!(loaded.to_bytes().unwrap(), bytes);
    assert!(matches!(sample(&loaded, &z[1..]), Err(Error::Contract(_))));
}
