//! Precision and success measures against ground-truth boxes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Sequence;
use crate::tracker::FrameResult;

/// Center error (pixels) at which the precision score is read.
pub const PRECISION_THRESHOLD: f64 = 20.0;
/// Largest center-error threshold of the precision curve.
pub const PRECISION_CURVE_MAX: u32 = 50;
/// Number of overlap thresholds `0, 0.05, ..., 1` of the success curve.
pub const SUCCESS_STEPS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetric {
    pub frame: u32,
    pub iou: f64,
    pub center_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision_at_20: f64,
    pub success_auc: f64,
    pub mean_iou: f64,
    pub mean_center_error: f64,
    pub per_frame: Vec<FrameMetric>,
}

/// One point of a precision or success curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub curve: Curve,
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    Precision,
    Success,
}

impl Curve {
    pub fn name(self) -> &'static str {
        match self {
            Curve::Precision => "precision",
            Curve::Success => "success",
        }
    }
}

fn fraction(per_frame: &[FrameMetric], pass: impl Fn(&FrameMetric) -> bool) -> f64 {
    if per_frame.is_empty() {
        return 0.0;
    }
    per_frame.iter().filter(|m| pass(m)).count() as f64 / per_frame.len() as f64
}

fn success_threshold(step: u32) -> f64 {
    f64::from(step) / f64::from(SUCCESS_STEPS)
}

pub fn evaluate(results: &[FrameResult], seq: &Sequence) -> Result<Metrics> {
    if results.len() != seq.frames.len() {
        return Err(Error::Evaluation(format!(
            "{} result rows for {} frames",
            results.len(),
            seq.frames.len()
        )));
    }
    let mut per_frame = Vec::with_capacity(results.len());
    for (r, f) in results.iter().zip(&seq.frames) {
        if r.frame != f.index {
            return Err(Error::Evaluation(format!(
                "result frame {} against frame {}",
                r.frame, f.index
            )));
        }
        let gt = f
            .gt_box
            .ok_or_else(|| Error::Evaluation(format!("frame {} has no ground truth", f.index)))?;
        per_frame.push(FrameMetric {
            frame: f.index,
            iou: r.bbox.iou(&gt),
            center_error: r.bbox.center().distance(&gt.center()),
        });
    }
    let n = per_frame.len().max(1) as f64;
    let success_auc = (0..=SUCCESS_STEPS)
        .map(|s| fraction(&per_frame, |m| m.iou >= success_threshold(s)))
        .sum::<f64>()
        / f64::from(SUCCESS_STEPS + 1);
    Ok(Metrics {
        precision_at_20: fraction(&per_frame, |m| m.center_error <= PRECISION_THRESHOLD),
        success_auc,
        mean_iou: per_frame.iter().map(|m| m.iou).sum::<f64>() / n,
        mean_center_error: per_frame.iter().map(|m| m.center_error).sum::<f64>() / n,
        per_frame,
    })
}

impl Metrics {
    pub fn curves(&self) -> Vec<CurvePoint> {
        let precision = (0..=PRECISION_CURVE_MAX).map(|t| CurvePoint {
            curve: Curve::Precision,
            threshold: f64::from(t),
            value: fraction(&self.per_frame, |m| m.center_error <= f64::from(t)),
        });
        let success = (0..=SUCCESS_STEPS).map(|s| CurvePoint {
            curve: Curve::Success,
            threshold: success_threshold(s),
            value: fraction(&self.per_frame, |m| m.iou >= success_threshold(s)),
        });
        precision.chain(success).collect()
    }
}

pub const CURVES_HEADER: &str = "curve,threshold,value";

pub fn write_curves(points: &[CurvePoint], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CURVES_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", p.curve.name(), p.threshold, p.value)?;
    }
    Ok(())
}

pub fn read_curves(reader: impl BufRead) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fail = |message: &str| Error::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        if i == 0 {
            if line.trim() != CURVES_HEADER {
                return Err(fail("expected curve header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [curve, threshold, value] = fields[..] else {
            return Err(fail("expected 3 fields"));
        };
        let curve = match curve {
            "precision" => Curve::Precision,
            "success" => Curve::Success,
            _ => return Err(fail("unknown curve")),
        };
        out.push(CurvePoint {
            curve,
            threshold: threshold.parse().map_err(|_| fail("bad threshold"))?,
            value: value.parse().map_err(|_| fail("bad value"))?,
        });
    }
    Ok(out)
}
