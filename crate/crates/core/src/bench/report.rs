use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bench::{
    compute_metrics, match_detections, parse_detections, parse_ground_truth, round1, DetectionRecord,
    GroundTruthRecord, Metrics, RangeTag,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl RangeReport {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let Metrics { precision, recall, f_score } = compute_metrics(tp, fp, fn_);
        Self { tp, fp, fn_, precision, recall, f_score }
    }
}

/// Per-range results. Detections on images absent from the ground truth
/// carry no range; they count as false positives in `overall` only and are
/// listed in `warnings`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub near: RangeReport,
    pub far: RangeReport,
    pub overall: RangeReport,
    pub warnings: Vec<String>,
}

pub fn evaluate_records(dets: &[DetectionRecord], gts: &[GroundTruthRecord], threshold: f64) -> Result<EvalReport> {
    let mut image_range: BTreeMap<&str, RangeTag> = BTreeMap::new();
    for g in gts {
        match image_range.insert(&g.image_id, g.range) {
            Some(prev) if prev != g.range => {
                return Err(Error::Contract(format!("image {} has both near and far ground truth", g.image_id)));
            }
            _ => {}
        }
    }
    let mut warnings = Vec::new();
    let mut unknown = 0;
    for d in dets {
        if !image_range.contains_key(d.image_id.as_str()) {
            unknown += 1;
            let msg = format!("detection references unknown image_id {:?}; counted as false positive", d.image_id);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let partition = |tag: RangeTag| {
        let g: Vec<GroundTruthRecord> = gts.iter().filter(|g| g.range == tag).cloned().collect();
        let d: Vec<DetectionRecord> =
            dets.iter().filter(|d| image_range.get(d.image_id.as_str()) == Some(&tag)).cloned().collect();
        let r = match_detections(&d, &g, threshold);
        (r.tp, r.fp, r.fn_)
    };
    let (ntp, nfp, nfn) = partition(RangeTag::Near);
    let (ftp, ffp, ffn) = partition(RangeTag::Far);
    Ok(EvalReport {
        threshold,
        near: RangeReport::from_counts(ntp, nfp, nfn),
        far: RangeReport::from_counts(ftp, ffp, ffn),
        overall: RangeReport::from_counts(ntp + ftp, nfp + ffp + unknown, nfn + ffn),
        warnings,
    })
}

pub fn evaluate(det_file: &Path, gt_file: &Path, threshold: f64) -> Result<EvalReport> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::path(p, e));
    let dets = parse_detections(&read(det_file)?)?;
    let gts = parse_ground_truth(&read(gt_file)?)?;
    evaluate_records(&dets, &gts, threshold)
}

impl EvalReport {
    /// Plain-text table with the near/far column groups, followed by one
    /// summary line per range.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let r = |v: f64| format!("{:.1}", round1(v));
        writeln!(s, "{:<10}| {:^26} | {:^26}", "", "Near Range Images", "Far Range Images").unwrap();
        writeln!(
            s,
            "{:<10}| {:>8} {:>9} {:>7} | {:>8} {:>9} {:>7}",
            "", "F-Score", "Precision", "Recall", "F-Score", "Precision", "Recall"
        )
        .unwrap();
        writeln!(s, "{}", "-".repeat(66)).unwrap();
        writeln!(
            s,
            "{:<10}| {:>8} {:>9} {:>7} | {:>8} {:>9} {:>7}",
            format!("IoU>={}", self.threshold),
            r(self.near.f_score),
            r(self.near.precision),
            r(self.near.recall),
            r(self.far.f_score),
            r(self.far.precision),
            r(self.far.recall)
        )
        .unwrap();
        writeln!(s).unwrap();
        for (name, rr) in [("near", &self.near), ("far", &self.far), ("overall", &self.overall)] {
            writeln!(
                s,
                "{name}: F={} P={} R={} TP={} FP={} FN={}",
                r(rr.f_score),
                r(rr.precision),
                r(rr.recall),
                rr.tp,
                rr.fp,
                rr.fn_
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semmap::BoundingBox;

    fn gt(img: &str, x: u32, range: RangeTag) -> GroundTruthRecord {
        GroundTruthRecord { image_id: img.into(), class_id: 24, bbox: BoundingBox { x, y: 0, w: 10, h: 10 }, range }
    }

    fn det(img: &str, x: u32) -> DetectionRecord {
        DetectionRecord {
            image_id: img.into(),
            class_id: 24,
            bbox: BoundingBox { x, y: 0, w: 10, h: 10 },
            confidence: 0.9,
        }
    }

    #[test]
    fn near_only_leaves_far_empty() {
        let gts = vec![gt("a", 0, RangeTag::Near), gt("b", 0, RangeTag::Near)];
        let r = evaluate_records(&[det("a", 0)], &gts, 0.5).unwrap();
        assert_eq!((r.near.tp, r.near.fp, r.near.fn_), (1, 0, 1));
        assert_eq!((r.far.tp, r.far.fp, r.far.fn_), (0, 0, 0));
        assert_eq!((r.far.precision, r.far.recall, r.far.f_score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_image_is_warned_and_counted() {
        let gts = vec![gt("a", 0, RangeTag::Far)];
        let r = evaluate_records(&[det("a", 0), det("zzz", 0)], &gts, 0.5).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert_eq!((r.far.tp, r.far.fp), (1, 0));
        assert_eq!((r.overall.tp, r.overall.fp), (1, 1));
    }

    #[test]
    fn mixed_range_image_rejected() {
        let gts = vec![gt("a", 0, RangeTag::Far), gt("a", 20, RangeTag::Near)];
        assert!(evaluate_records(&[], &gts, 0.5).is_err());
    }

    #[test]
    fn table_has_both_groups() {
        let r = evaluate_records(&[det("a", 0)], &[gt("a", 0, RangeTag::Far)], 0.5).unwrap();
        let t = r.render_table();
        assert!(t.contains("Near Range Images") && t.contains("Far Range Images"));
        assert!(t.contains("far: F=100.0 P=100.0 R=100.0 TP=1 FP=0 FN=0"), "{t}");
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(json["far"]["fn"], 0);
    }
}
