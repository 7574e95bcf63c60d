//! Line-oriented CSV formats shared by the exporter and the evaluator.
//!
//! ```text
//! ground truth: image_id,class_id,x,y,w,h,range      (range = near | far)
//! detections:   image_id,class_id,x,y,w,h,confidence
//! annotations:  image_id,class_id,x,y,w,h
//! ```
//!
//! A leading header line is optional. Blank lines are skipped. Line numbers
//! in errors are 1-based.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bench::{DetectionRecord, GroundTruthRecord, RangeTag};
use crate::semmap::BoundingBox;
use crate::{Error, Result};

pub const GROUND_TRUTH_HEADER: &str = "image_id,class_id,x,y,w,h,range";
pub const DETECTION_HEADER: &str = "image_id,class_id,x,y,w,h,confidence";
pub const ANNOTATION_HEADER: &str = "image_id,class_id,x,y,w,h";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BoundingBox,
}

fn records(text: &str, columns: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>)>> {
    let mut first = true;
    text.lines().enumerate().filter_map(move |(i, line)| {
        let line = line.trim();
        if line.is_empty() {
            return None;
        }
        let is_header = first && line.starts_with("image_id");
        first = false;
        if is_header {
            return None;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        Some(if fields.len() == columns {
            Ok((i + 1, fields))
        } else {
            Err(Error::Parse { line: i + 1, msg: format!("expected {columns} fields, found {}", fields.len()) })
        })
    })
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse { line, msg: format!("invalid {what} {field:?}") })
}

fn head(line: usize, f: &[&str]) -> Result<(String, u32, BoundingBox)> {
    if f[0].is_empty() {
        return Err(Error::Parse { line, msg: "empty image_id".into() });
    }
    let class_id = num(line, f[1], "class_id")?;
    let (x, y, w, h) = (num(line, f[2], "x")?, num(line, f[3], "y")?, num(line, f[4], "w")?, num(line, f[5], "h")?);
    let bbox = BoundingBox::new(x, y, w, h).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
    Ok((f[0].to_string(), class_id, bbox))
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthRecord>> {
    records(text, 7)
        .map(|r| {
            let (line, f) = r?;
            let (image_id, class_id, bbox) = head(line, &f)?;
            let range = match f[6] {
                "near" => RangeTag::Near,
                "far" => RangeTag::Far,
                other => return Err(Error::Parse { line, msg: format!("range must be near or far, found {other:?}") }),
            };
            Ok(GroundTruthRecord { image_id, class_id, bbox, range })
        })
        .collect()
}

pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>> {
    records(text, 7)
        .map(|r| {
            let (line, f) = r?;
            let (image_id, class_id, bbox) = head(line, &f)?;
            let confidence: f64 = num(line, f[6], "confidence")?;
            if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
                return Err(Error::Parse { line, msg: format!("confidence {confidence} outside [0, 1]") });
            }
            Ok(DetectionRecord { image_id, class_id, bbox, confidence })
        })
        .collect()
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationRecord>> {
    records(text, 6)
        .map(|r| {
            let (line, f) = r?;
            let (image_id, class_id, bbox) = head(line, &f)?;
            Ok(AnnotationRecord { image_id, class_id, bbox })
        })
        .collect()
}

pub fn format_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::from(ANNOTATION_HEADER);
    out.push('\n');
    for r in records {
        let b = r.bbox;
        writeln!(out, "{},{},{},{},{},{}", r.image_id, r.class_id, b.x, b.y, b.w, b.h).expect("string write");
    }
    out
}
