use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::semmap::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeTag {
    Near,
    Far,
}

impl fmt::Display for RangeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeTag::Near => "near",
            RangeTag::Far => "far",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub range: RangeTag,
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = a.x2().min(b.x2()).saturating_sub(u64::from(a.x.max(b.x)));
    let iy = a.y2().min(b.y2()).saturating_sub(u64::from(a.y.max(b.y)));
    let inter = ix * iy;
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.area() + b.area() - inter) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matches: Vec<Match>,
}

/// Greedy matching in descending confidence order (input order breaks
/// confidence ties). Each detection takes the unmatched ground truth of the
/// same image and class with the highest IoU, lowest index on ties, if that
/// IoU reaches `threshold`. Unmatched detections are false positives,
/// unmatched ground truths false negatives.
pub fn match_detections(dets: &[DetectionRecord], gts: &[GroundTruthRecord], threshold: f64) -> MatchResult {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.image_id.as_str()).or_default().push(i);
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));

    let mut taken = vec![false; gts.len()];
    let mut matches = Vec::new();
    for di in order {
        let d = &dets[di];
        let Some(candidates) = by_image.get(d.image_id.as_str()) else { continue };
        let mut best: Option<(usize, f64)> = None;
        for &gi in candidates {
            if taken[gi] || gts[gi].class_id != d.class_id {
                continue;
            }
            let v = iou(&d.bbox, &gts[gi].bbox);
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best.filter(|&(_, v)| v >= threshold) {
            taken[gi] = true;
            matches.push(Match { detection: di, ground_truth: gi, iou: v });
        }
    }
    matches.sort_by_key(|m| m.detection);
    let tp = matches.len();
    MatchResult { tp, fp: dets.len() - tp, fn_: gts.len() - tp, matches }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: u32, y: u32, w: u32, h: u32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn det(img: &str, b: BoundingBox, conf: f64) -> DetectionRecord {
        DetectionRecord { image_id: img.into(), class_id: 24, bbox: b, confidence: conf }
    }

    fn gt(img: &str, b: BoundingBox) -> GroundTruthRecord {
        GroundTruthRecord { image_id: img.into(), class_id: 24, bbox: b, range: RangeTag::Near }
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&bx(3, 4, 5, 6), &bx(3, 4, 5, 6)), 1.0);
        assert_eq!(iou(&bx(0, 0, 2, 2), &bx(5, 5, 2, 2)), 0.0);
        assert_eq!(iou(&bx(0, 0, 2, 2), &bx(2, 0, 2, 2)), 0.0);
        assert!((iou(&bx(0, 0, 2, 2), &bx(1, 0, 2, 2)) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_silent_detectors() {
        let gts = vec![gt("a", bx(0, 0, 10, 10)), gt("a", bx(20, 0, 10, 10)), gt("b", bx(5, 5, 3, 8))];
        let dets: Vec<_> = gts.iter().map(|g| det(&g.image_id, g.bbox, 0.9)).collect();
        let r = match_detections(&dets, &gts, 0.5);
        assert_eq!((r.tp, r.fp, r.fn_), (3, 0, 0));
        let r = match_detections(&[], &gts, 0.5);
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 3));
    }

    #[test]
    fn half_shifted_box_is_a_miss() {
        let r = match_detections(&[det("a", bx(0, 5, 10, 10), 0.8)], &[gt("a", bx(0, 0, 10, 10))], 0.5);
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    }

    #[test]
    fn duplicate_detection_becomes_fp() {
        let g = bx(0, 0, 10, 10);
        let r = match_detections(&[det("a", g, 0.9), det("a", g, 0.9)], &[gt("a", g)], 0.5);
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
        assert_eq!(r.matches[0].detection, 0);
    }

    #[test]
    fn higher_confidence_goes_first() {
        let g = bx(0, 0, 10, 10);
        let r =
            match_detections(&[det("a", bx(1, 0, 10, 10), 0.2), det("a", bx(2, 0, 10, 10), 0.7)], &[gt("a", g)], 0.5);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].detection, 1);
    }

    #[test]
    fn class_and_image_must_agree() {
        let g = bx(0, 0, 10, 10);
        let mut other_class = det("a", g, 0.9);
        other_class.class_id = 26;
        let r = match_detections(&[other_class, det("b", g, 0.9)], &[gt("a", g)], 0.5);
        assert_eq!((r.tp, r.fp, r.fn_), (0, 2, 1));
    }

    #[test]
    fn greedy_can_fall_short_of_optimal() {
        // The confident detection prefers g0 even though only it can reach g1.
        let g0 = bx(0, 0, 10, 10);
        let g1 = bx(4, 0, 10, 10);
        let strong = det("a", bx(2, 0, 10, 10), 0.9);
        let weak = det("a", bx(0, 0, 9, 10), 0.5);
        assert!(iou(&strong.bbox, &g0) >= 0.5 && iou(&strong.bbox, &g1) >= 0.5);
        assert!(iou(&weak.bbox, &g0) >= 0.5 && iou(&weak.bbox, &g1) < 0.5);
        let r = match_detections(&[strong, weak], &[gt("a", g0), gt("a", g1)], 0.5);
        assert_eq!(r.tp, 1);
    }
}
