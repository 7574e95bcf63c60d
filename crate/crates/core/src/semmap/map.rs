use std::collections::BTreeSet;

use crate::semmap::LabelPalette;
use crate::{Error, Result};

/// Row-major grid of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!("map size {width}x{height} must be at least 1x1")));
        }
        if labels.len() != width * height {
            return Err(Error::Contract(format!("{} labels for a {width}x{height} map", labels.len())));
        }
        Ok(Self { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, class_id: u8) -> Result<Self> {
        Self::new(width, height, vec![class_id; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class_id: u8) {
        self.labels[y * self.width + x] = class_id;
    }

    /// Fills the half-open rectangle `[x0, x1) x [y0, y1)`, clipped to the map.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, class_id: u8) {
        let (x1, y1) = (x1.min(self.width), y1.min(self.height));
        for y in y0..y1 {
            self.labels[y * self.width + x0.min(x1)..y * self.width + x1].fill(class_id);
        }
    }

    pub fn label_set(&self) -> BTreeSet<u8> {
        self.labels.iter().copied().collect()
    }

    /// Per-class pixel counts over `k` classes.
    pub fn class_histogram(&self, k: usize) -> Vec<u64> {
        let mut hist = vec![0u64; k];
        for &l in &self.labels {
            if let Some(slot) = hist.get_mut(l as usize) {
                *slot += 1;
            }
        }
        hist
    }

    /// First pixel whose label is not below `k`.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= k) {
            None => Ok(()),
            Some(i) => {
                Err(Error::InvalidLabel { x: i % self.width, y: i / self.width, label: u32::from(self.labels[i]), k })
            }
        }
    }
}

/// Per-pixel class distribution with shape `(h, w, k)`, stored row-major
/// with the class axis innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotTensor {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<f32>,
}

impl OneHotTensor {
    /// Wraps raw channel data without checking the distribution invariants;
    /// [`decode_argmax`] accepts any finite values.
    pub fn from_raw(height: usize, width: usize, classes: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * classes {
            return Err(Error::MalformedTensor(format!(
                "{} values for shape ({height}, {width}, {classes})",
                data.len()
            )));
        }
        Ok(Self { height, width, classes, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.classes)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.classes;
        &self.data[start..start + self.classes]
    }

    /// Channel-first copy, `(k, h, w)`, as consumed by the networks.
    pub fn to_chw(&self) -> Vec<f32> {
        let plane = self.height * self.width;
        let mut out = vec![0f32; self.data.len()];
        for (p, px) in self.data.chunks_exact(self.classes).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                out[c * plane + p] = v;
            }
        }
        out
    }

    /// Builds a tensor from channel-first `(k, h, w)` data.
    pub fn from_chw(classes: usize, height: usize, width: usize, chw: &[f32]) -> Result<Self> {
        let plane = height * width;
        if chw.len() != plane * classes {
            return Err(Error::MalformedTensor(format!(
                "{} values for shape ({classes}, {height}, {width})",
                chw.len()
            )));
        }
        let mut data = vec![0f32; chw.len()];
        for c in 0..classes {
            for p in 0..plane {
                data[p * classes + c] = chw[c * plane + p];
            }
        }
        Ok(Self { height, width, classes, data })
    }
}

pub fn encode_one_hot(map: &SemanticMap, palette: &LabelPalette) -> Result<OneHotTensor> {
    encode_one_hot_k(map, palette.num_classes())
}

/// [`encode_one_hot`] against a bare class count.
pub fn encode_one_hot_k(map: &SemanticMap, k: usize) -> Result<OneHotTensor> {
    map.validate(k)?;
    let mut data = vec![0f32; map.labels.len() * k];
    for (p, &l) in map.labels.iter().enumerate() {
        data[p * k + l as usize] = 1.0;
    }
    OneHotTensor::from_raw(map.height, map.width, k, data)
}

/// Channel-first one-hot planes of a map, `(k, h, w)`, ready for a network.
pub fn one_hot_chw(map: &SemanticMap, k: usize) -> Result<Vec<f32>> {
    map.validate(k)?;
    let plane = map.width * map.height;
    let mut out = vec![0f32; plane * k];
    for (p, &l) in map.labels.iter().enumerate() {
        out[l as usize * plane + p] = 1.0;
    }
    Ok(out)
}

/// Arg-max over the class axis. Ties go to the lowest class index.
pub fn decode_argmax(t: &OneHotTensor) -> Result<SemanticMap> {
    if t.classes == 0 {
        return Err(Error::MalformedTensor("tensor has zero classes".into()));
    }
    if t.classes > 256 {
        return Err(Error::MalformedTensor(format!("{} classes exceed 8-bit labels", t.classes)));
    }
    let mut labels = Vec::with_capacity(t.width * t.height);
    for (p, px) in t.data.chunks_exact(t.classes).enumerate() {
        let mut best = 0usize;
        for (c, &v) in px.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MalformedTensor(format!(
                    "non-finite value {v} at pixel ({}, {}), channel {c}",
                    p % t.width,
                    p / t.width
                )));
            }
            if v > px[best] {
                best = c;
            }
        }
        labels.push(best as u8);
    }
    SemanticMap::new(t.width, t.height, labels)
}

/// Nearest-neighbor resize with `src = floor(dst * src_size / dst_size)`.
pub fn resize_nearest(map: &SemanticMap, new_w: usize, new_h: usize) -> Result<SemanticMap> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::Contract(format!("target size {new_w}x{new_h} must be at least 1x1")));
    }
    let xs: Vec<usize> = (0..new_w).map(|x| x * map.width / new_w).collect();
    let mut labels = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let row = &map.labels[(y * map.height / new_h) * map.width..][..map.width];
        labels.extend(xs.iter().map(|&sx| row[sx]));
    }
    SemanticMap::new(new_w, new_h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_map(rng: &mut impl Rng, w: usize, h: usize, k: usize) -> SemanticMap {
        let labels = (0..w * h).map(|_| rng.gen_range(0..k) as u8).collect();
        SemanticMap::new(w, h, labels).unwrap()
    }

    #[test]
    fn one_hot_single_pixel() {
        let m = SemanticMap::new(1, 1, vec![2]).unwrap();
        let t = encode_one_hot_k(&m, 4).unwrap();
        assert_eq!(t.shape(), (1, 1, 4));
        assert_eq!(t.pixel(0, 0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_hot_shape_and_sums() {
        let m = SemanticMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let t = encode_one_hot_k(&m, 4).unwrap();
        assert_eq!(t.shape(), (2, 2, 4));
        for y in 0..2 {
            for x in 0..2 {
                assert_eq!(t.pixel(x, y).iter().sum::<f32>(), 1.0);
            }
        }
    }

    #[test]
    fn invalid_label_names_pixel() {
        let m = SemanticMap::new(3, 2, vec![0, 0, 0, 0, 9, 0]).unwrap();
        match encode_one_hot_k(&m, 4) {
            Err(Error::InvalidLabel { x: 1, y: 1, label: 9, k: 4 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn roundtrip_random_maps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_map(&mut rng, 16, 16, 8);
            let t = encode_one_hot_k(&m, 8).unwrap();
            assert_eq!(decode_argmax(&t).unwrap(), m);
        }
    }

    #[test]
    fn argmax_and_ties() {
        let t = OneHotTensor::from_raw(1, 1, 3, vec![0.1, 0.7, 0.2]).unwrap();
        assert_eq!(decode_argmax(&t).unwrap().labels(), &[1]);
        let t = OneHotTensor::from_raw(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(decode_argmax(&t).unwrap().labels(), &[0]);
    }

    #[test]
    fn argmax_rejects_malformed() {
        let t = OneHotTensor::from_raw(1, 1, 0, vec![]).unwrap();
        assert!(matches!(decode_argmax(&t), Err(Error::MalformedTensor(_))));
        let t = OneHotTensor::from_raw(1, 1, 2, vec![f32::NAN, 0.2]).unwrap();
        assert!(matches!(decode_argmax(&t), Err(Error::MalformedTensor(_))));
    }

    #[test]
    fn chw_layout_roundtrip() {
        let m = SemanticMap::new(3, 2, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let t = encode_one_hot_k(&m, 3).unwrap();
        let chw = t.to_chw();
        assert_eq!(chw, one_hot_chw(&m, 3).unwrap());
        assert_eq!(OneHotTensor::from_chw(3, 2, 3, &chw).unwrap(), t);
    }

    #[test]
    fn integer_upscale_duplicates_blocks() {
        let m = SemanticMap::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let r = resize_nearest(&m, 4, 4).unwrap();
        #[rustfmt::skip]
        let expected = vec![
            1, 1, 2, 2,
            1, 1, 2, 2,
            3, 3, 4, 4,
            3, 3, 4, 4,
        ];
        assert_eq!(r.labels(), expected.as_slice());
    }

    #[test]
    fn step_one_to_insertion_size() {
        let m = SemanticMap::filled(256, 256, 3).unwrap();
        let r = resize_nearest(&m, 1024, 512).unwrap();
        assert_eq!(r.size(), (1024, 512));
    }

    #[test]
    fn resize_label_subset_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
            let m = random_map(&mut rng, w, h, 6);
            let r = resize_nearest(&m, rng.gen_range(1..80), rng.gen_range(1..80)).unwrap();
            assert!(r.label_set().is_subset(&m.label_set()));
        }
    }

    #[test]
    fn resize_rejects_zero() {
        let m = SemanticMap::filled(2, 2, 0).unwrap();
        assert!(resize_nearest(&m, 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(w in 1usize..12, h in 1usize..12, k in 1usize..40, seed: u64) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_map(&mut rng, w, h, k);
            let t = encode_one_hot_k(&m, k).unwrap();
            prop_assert_eq!(decode_argmax(&t).unwrap(), m);
        }
    }
}
