use super::*;
use crate::nn::{randn, tensor, to_vec, ParamStore, TrainConfig};
use crate::semmap::{generate_toy_scene, LabelPalette, SemanticMap};
use crate::{seeds, Error};

fn tiny() -> SynthConfig {
    SynthConfig {
        operating_size: (32, 16),
        base_channels: 4,
        num_upsample_blocks: 2,
        norm_hidden: 4,
        disc_channels: 4,
        ..SynthConfig::toy()
    }
}

fn pairs(n: usize, cfg: &SynthConfig) -> Vec<(SemanticMap, ImageTensor)> {
    let p = LabelPalette::toy();
    let (w, h) = cfg.operating_size;
    (0..n)
        .map(|i| {
            let m = generate_toy_scene(i as u64, w, h, &p).unwrap();
            let t = toy_target(&m, &p, 100 + i as u64, 0.05).unwrap();
            (m, t)
        })
        .collect()
}

#[test]
fn identity_and_annihilating_modulation() {
    let mut rng = seeds::rng(0);
    let x = tensor(randn(&mut rng, 2 * 3 * 4 * 5), &[2, 3, 4, 5]).unwrap();
    let ones = x.ones_like().unwrap();
    let zeros = x.zeros_like().unwrap();
    let plain = to_vec(&spatially_adaptive_norm(&x, &ones, &zeros).unwrap()).unwrap();
    let raw = to_vec(&x).unwrap();
    // Independent normalization per channel over (n, h, w).
    for c in 0..3 {
        let idx: Vec<usize> = (0..2).flat_map(|n| (0..20).map(move |p| n * 60 + c * 20 + p)).collect();
        let mean = idx.iter().map(|&i| f64::from(raw[i])).sum::<f64>() / 40.0;
        let var = idx.iter().map(|&i| (f64::from(raw[i]) - mean).powi(2)).sum::<f64>() / 40.0;
        for &i in &idx {
            let want = (f64::from(raw[i]) - mean) / (var + 1e-5).sqrt();
            assert!((f64::from(plain[i]) - want).abs() < 1e-5);
        }
    }
    let beta = tensor(randn(&mut rng, 120), &[2, 3, 4, 5]).unwrap();
    let out = spatially_adaptive_norm(&x, &zeros, &beta).unwrap();
    assert_eq!(to_vec(&out).unwrap(), to_vec(&beta).unwrap());
}

#[test]
fn spade_layer_identity_when_heads_are_constant() {
    let mut store = ParamStore::new();
    let mut rng = seeds::rng(1);
    let norm = SpadeNorm::new(&mut store, "n", 3, 8, 4, &mut rng).unwrap();
    for conv in [&norm.gamma, &norm.beta] {
        conv.weight.set(&conv.weight.zeros_like().unwrap()).unwrap();
    }
    norm.beta.fill_bias(0.0).unwrap();
    norm.gamma.fill_bias(1.0).unwrap();
    let x = tensor(randn(&mut rng, 3 * 6 * 6), &[1, 3, 6, 6]).unwrap();
    let seg = tensor(randn(&mut rng, 8 * 6 * 6), &[1, 8, 6, 6]).unwrap();
    let out = to_vec(&norm.forward(&x, &seg).unwrap()).unwrap();
    let plain =
        to_vec(&spatially_adaptive_norm(&x, &x.ones_like().unwrap(), &x.zeros_like().unwrap()).unwrap()).unwrap();
    for (a, b) in out.iter().zip(&plain) {
        assert!((a - b).abs() <= 1e-6);
    }
    let wrong = tensor(vec![0.0; 8 * 3 * 3], &[1, 8, 3, 3]).unwrap();
    assert!(matches!(norm.forward(&x, &wrong), Err(Error::Contract(_))));
}

#[test]
fn nearest_downsampling_matches_map_resize() {
    let p = LabelPalette::toy();
    let m = generate_toy_scene(4, 32, 16, &p).unwrap();
    let seg = tensor(crate::semmap::one_hot_chw(&m, 8).unwrap(), &[1, 8, 16, 32]).unwrap();
    let down = to_vec(&downsample_nearest(&seg, 4).unwrap()).unwrap();
    let small = crate::semmap::resize_nearest(&m, 8, 4).unwrap();
    assert_eq!(down, crate::semmap::one_hot_chw(&small, 8).unwrap());
}

#[test]
fn translate_contract() {
    let cfg = tiny();
    let ckpt = Checkpoint::new(cfg.clone(), TrainConfig::default()).unwrap();
    let map = pairs(1, &cfg).remove(0).0;
    let img = translate(&ckpt, &map, None).unwrap();
    assert_eq!(img.shape(), (16, 32, 3));
    assert!(img.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert_eq!(translate(&ckpt, &map, None).unwrap(), img);
    let mut bad = map.clone();
    bad.set(0, 0, 9);
    assert!(matches!(translate(&ckpt, &bad, None), Err(Error::InvalidLabel { .. })));
    let wrong = SemanticMap::filled(16, 16, 0).unwrap();
    assert!(matches!(translate(&ckpt, &wrong, None), Err(Error::Contract(_))));
    assert!(matches!(translate(&ckpt, &map, Some(&[0.0])), Err(Error::Contract(_))));
}

#[test]
fn latent_input() {
    let cfg = SynthConfig { latent_dim: 4, ..tiny() };
    let ckpt = Checkpoint::new(cfg.clone(), TrainConfig::default()).unwrap();
    let map = pairs(1, &cfg).remove(0).0;
    let a = translate(&ckpt, &map, Some(&[1.0, 0.0, -1.0, 2.0])).unwrap();
    let b = translate(&ckpt, &map, Some(&[0.0; 4])).unwrap();
    assert_ne!(a, b);
    assert_eq!(translate(&ckpt, &map, None).unwrap(), b);
}

#[test]
fn two_scales_with_documented_grids() {
    let cfg = tiny();
    let mut rng = seeds::rng(2);
    let d = MultiScaleDiscriminator::new(&cfg, &mut rng).unwrap();
    let img = tensor(vec![0.0; 2 * 3 * 16 * 32], &[2, 3, 16, 32]).unwrap();
    let seg = tensor(vec![0.0; 2 * 8 * 16 * 32], &[2, 8, 16, 32]).unwrap();
    let inputs = MultiScaleDiscriminator::scale_inputs(&img, &seg).unwrap();
    assert_eq!(inputs[0].dims(), &[2, 11, 16, 32]);
    assert_eq!(inputs[1].dims(), &[2, 11, 8, 16]);
    let out = d.forward(&img, &seg).unwrap();
    assert_eq!(out.len(), NUM_SCALES);
    assert_eq!(out[0].scores.dims(), &[2, 1, 4, 8]);
    assert_eq!(out[1].scores.dims(), &[2, 1, 2, 4]);
    assert_eq!(out[0].features.len(), 3);
    let misaligned = tensor(vec![0.0; 2 * 8 * 8 * 32], &[2, 8, 8, 32]).unwrap();
    assert!(matches!(d.forward(&img, &misaligned), Err(Error::Contract(_))));
}

#[test]
fn toy_targets_and_png() {
    let p = LabelPalette::toy();
    let m = SemanticMap::filled(4, 2, 1).unwrap();
    let t = toy_target(&m, &p, 0, 0.0).unwrap();
    let c = p.color(1).unwrap();
    assert_eq!(&t.to_rgb8()[..3], &c);
    assert_eq!(toy_target(&m, &p, 3, 0.1).unwrap(), toy_target(&m, &p, 3, 0.1).unwrap());
    let png = t.to_png().unwrap();
    assert_eq!(&png[1..4], b"PNG");
    let edge = ImageTensor::new(1, 1, vec![-1.0, 0.0, 1.0]).unwrap();
    assert_eq!(edge.to_rgb8(), vec![0, 128, 255]);
    assert!(ImageTensor::new(1, 1, vec![0.0, 2.0, 0.0]).is_err());
}

#[test]
fn training_smoke_and_roundtrip() {
    let cfg = tiny();
    let tc = TrainConfig { batch_size: 2, epochs: 2, seed: 4, ..TrainConfig::default() };
    assert!(matches!(train_translation(&[], &cfg, &tc), Err(Error::DatasetEmpty)));
    let data = pairs(4, &cfg);
    let (ckpt, log) = train_translation(&data, &cfg, &tc).unwrap();
    assert_eq!(log.len(), 4);
    assert!(log.iter().all(|s| s.d_loss.is_finite() && s.g_loss.is_finite() && s.fm_loss.is_finite()));
    assert!(metrics_csv(&log).starts_with(METRICS_HEADER));
    let (_, again) = train_translation(&data, &cfg, &tc).unwrap();
    assert_eq!(log, again);
    let before = translate(&ckpt, &data[0].0, None).unwrap();
    let loaded = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
    assert_eq!(translate(&loaded, &data[0].0, None).unwrap(), before);
}

#[test]
fn step_budget_is_exact() {
    let cfg = tiny();
    let tc = TrainConfig { batch_size: 3, seed: 1, ..TrainConfig::default() };
    let data = pairs(4, &cfg);
    let mut ckpt = Checkpoint::new(cfg, tc).unwrap();
    let log = train_translation_steps(&mut ckpt, &data, 5).unwrap();
    assert_eq!(log.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    assert_eq!(ckpt.epoch, 3);
}
