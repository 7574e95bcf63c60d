use ganseq::bench::{iou, match_detections, DetectionRecord, GroundTruthRecord, RangeTag};
use ganseq::instafill::{InsertionConfig, WhereProposal};
use ganseq::pixsynth::{discriminator_hinge_value, spatially_adaptive_norm};
use ganseq::semgan::feature_matching_value;
use ganseq::semmap::{composite_instance, mask_to_bbox, resize_nearest, BoundingBox, InstanceMask, SemanticMap};
use ganseq::{nn, seeds};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (0u32..200, 0u32..200, 1u32..80, 1u32..80).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

fn records(max: usize) -> impl Strategy<Value = (Vec<DetectionRecord>, Vec<GroundTruthRecord>)> {
    let det = (0u8..2, bbox(), 0.0f64..1.0).prop_map(|(img, b, c)| DetectionRecord {
        image_id: format!("i{img}"),
        class_id: 24,
        bbox: b,
        confidence: c,
    });
    let gt = (0u8..2, bbox(), any::<bool>()).prop_map(|(img, b, near)| GroundTruthRecord {
        image_id: format!("i{img}"),
        class_id: 24,
        bbox: b,
        range: if near { RangeTag::Near } else { RangeTag::Far },
    });
    (prop::collection::vec(det, 0..max), prop::collection::vec(gt, 0..max))
}

fn instance() -> impl Strategy<Value = (SemanticMap, InstanceMask)> {
    (1usize..10, 1usize..10, 0.5f64..2.0, any::<u64>())
        .prop_flat_map(|(mw, mh, scale, seed)| {
            let probe = InstanceMask::new(mw, mh, vec![1; mw * mh], (0, 0), scale).unwrap();
            let (sw, sh) = probe.scaled_size();
            (Just((mw, mh, scale, seed)), sw..sw + 20, sh..sh + 20)
                .prop_flat_map(move |(p, w, h)| (Just(p), Just((w, h)), 0..=w - sw, 0..=h - sh))
        })
        .prop_map(|((mw, mh, scale, seed), (w, h), ax, ay)| {
            use rand::Rng;
            let mut rng = seeds::rng(seed);
            let mask = (0..mw * mh).map(|_| rng.gen_bool(0.5) as u8).collect();
            let labels = (0..w * h).map(|_| rng.gen_range(0..8)).collect();
            (SemanticMap::new(w, h, labels).unwrap(), InstanceMask::new(mw, mh, mask, (ax, ay), scale).unwrap())
        })
}

proptest! {
    #[test]
    fn iou_symmetric_bounded_reflexive(a in bbox(), b in bbox()) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn greedy_assigns_each_ground_truth_once((dets, gts) in records(8), t in 0.0f64..1.0) {
        let r = match_detections(&dets, &gts, t);
        let mut seen = std::collections::HashSet::new();
        for m in &r.matches {
            prop_assert!(seen.insert(m.ground_truth));
            prop_assert!(m.iou >= t);
        }
        prop_assert_eq!(r.tp + r.fp, dets.len());
        prop_assert_eq!(r.tp + r.fn_, gts.len());
    }

    #[test]
    fn raising_threshold_never_adds_true_positives((dets, gts) in records(8), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(match_detections(&dets, &gts, hi).tp <= match_detections(&dets, &gts, lo).tp);
    }

    #[test]
    fn compositing_is_idempotent((map, inst) in instance(), class in 0u32..8) {
        let once = composite_instance(&map, &inst, class, 8).unwrap();
        prop_assert_eq!(composite_instance(&once, &inst, class, 8).unwrap(), once);
    }

    #[test]
    fn mask_box_is_tight((_map, inst) in instance()) {
        let placed: Vec<(usize, usize)> = inst.placed_pixels().collect();
        match mask_to_bbox(&inst) {
            Err(_) => prop_assert!(placed.is_empty()),
            Ok(b) => {
                prop_assert!(placed.iter().all(|&(x, y)| b.contains(x, y)));
                prop_assert!(placed.iter().any(|&(x, _)| x == b.x as usize));
                prop_assert!(placed.iter().any(|&(x, _)| x as u64 == b.x2() - 1));
                prop_assert!(placed.iter().any(|&(_, y)| y == b.y as usize));
                prop_assert!(placed.iter().any(|&(_, y)| y as u64 == b.y2() - 1));
            }
        }
    }

    #[test]
    fn halving_covers_the_source_box(x in 0u32..1023, y in 0u32..511, w in 1u32..200, h in 1u32..200) {
        let (w, h) = (w.min(1024 - x), h.min(512 - y));
        let b = BoundingBox::new(x, y, w, h).unwrap();
        let s = b.rescale((1024, 512), (512, 256));
        prop_assert!(s.w >= 1 && s.h >= 1 && s.fits_within(512, 256));
        prop_assert_eq!(s.x, x / 2);
        prop_assert_eq!(s.y, y / 2);
        prop_assert_eq!(s.x2(), (u64::from(x + w) + 1) / 2);
        prop_assert_eq!(s.y2(), (u64::from(y + h) + 1) / 2);
    }

    #[test]
    fn resize_keeps_label_subset(w in 1usize..30, h in 1usize..30, nw in 1usize..50, nh in 1usize..50, seed: u64) {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let m = SemanticMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0..34)).collect()).unwrap();
        prop_assert!(resize_nearest(&m, nw, nh).unwrap().label_set().is_subset(&m.label_set()));
    }

    #[test]
    fn feature_matching_is_nonnegative_and_zero_on_self(n in 1usize..5, d in 1usize..6, seed: u64) {
        use rand::Rng;
        let mut rng = seeds::rng(seed);
        let a: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        prop_assert_eq!(feature_matching_value(&a, &a, n).unwrap(), 0.0);
        prop_assert!(feature_matching_value(&a, &b, n).unwrap() >= 0.0);
    }

    #[test]
    fn saturated_hinge_is_zero(margin in 0.0f64..10.0, n in 1usize..6) {
        let real = vec![1.0 + margin; n];
        let fake = vec![-1.0 - margin; n];
        prop_assert_eq!(discriminator_hinge_value(&real, &fake), 0.0);
    }

    #[test]
    fn proposals_stay_in_range(box_x in 0u32..1000, box_y in 0u32..500, w in 1u32..24, h in 1u32..12) {
        let cfg = InsertionConfig::default();
        let b = BoundingBox::new(box_x, box_y, w, h).unwrap();
        let p = WhereProposal::from_box(&b, cfg.full_size);
        prop_assert!((0.0..=1.0).contains(&p.cx) && (0.0..=1.0).contains(&p.cy));
        prop_assert!(p.scale() > 0.0);
    }

    #[test]
    fn identity_modulation_is_plain_normalization(c in 1usize..4, hw in 1usize..5, seed: u64) {
        let x = nn::tensor(nn::randn(&mut seeds::rng(seed), 2 * c * hw * hw), &[2, c, hw, hw]).unwrap();
        let ones = nn::tensor(vec![1.0; 2 * c * hw * hw], &[2, c, hw, hw]).unwrap();
        let zeros = nn::tensor(vec![0.0; 2 * c * hw * hw], &[2, c, hw, hw]).unwrap();
        let y = nn::to_vec(&spatially_adaptive_norm(&x, &ones, &zeros).unwrap()).unwrap();
        let xs = nn::to_vec(&x).unwrap();
        let per = hw * hw;
        for ch in 0..c {
            let idx: Vec<usize> = (0..2).flat_map(|n| (0..per).map(move |i| (n * c + ch) * per + i)).collect();
            let vals: Vec<f64> = idx.iter().map(|&i| f64::from(xs[i])).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            for (&i, v) in idx.iter().zip(&vals) {
                let expected = (v - mean) / (var + 1e-5).sqrt();
                prop_assert!((f64::from(y[i]) - expected).abs() <= 1e-5, "{} vs {}", y[i], expected);
            }
        }
    }
}
