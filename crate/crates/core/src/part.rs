//! Parts, frames and the geometric primitives shared by the tracker.
//!
//! A part is a superpixel-like region summarised by its center, its area and
//! an L1-normalised appearance histogram. Parts carry no pixel mask; wherever a
//! region is needed the part is rasterised as an axis-aligned square of side
//! `sqrt(area)` centred on the part center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PartId = u32;

/// Tolerance on the L1 norm of a feature histogram.
pub const FEATURE_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Displacement vector `other - self`.
    pub fn to(&self, other: &Point) -> Point {
        Point::new(other.x - self.x, other.y - self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned box in center + size convention.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.left() && p.x <= self.right() && p.y >= self.top() && p.y <= self.bottom()
    }

    /// Intersection over union; zero when either box is empty.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// A superpixel-like region of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub id: PartId,
    pub center: Point,
    pub area: f64,
    /// Coarse foreground probability; `None` is read as 1.0.
    pub fg_prob: Option<f64>,
    pub feature: Vec<f64>,
}

impl Part {
    /// Side of the square the part is rasterised as.
    pub fn diameter(&self) -> f64 {
        self.area.sqrt()
    }

    pub fn foreground(&self) -> f64 {
        self.fg_prob.unwrap_or(1.0)
    }

    /// Checks every per-part invariant against the declared feature dimension.
    pub fn validate(&self, frame: u32, feature_dim: usize) -> Result<()> {
        let fail = |message: String| Error::InvalidPart {
            frame,
            part: self.id,
            message,
        };
        if !self.center.is_finite() {
            return Err(fail("center is not finite".into()));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(fail(format!("area must be positive, got {}", self.area)));
        }
        if let Some(p) = self.fg_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(fail(format!("fg probability {p} outside [0,1]")));
            }
        }
        if self.feature.len() != feature_dim {
            return Err(fail(format!(
                "feature has {} bins, header declares {feature_dim}",
                self.feature.len()
            )));
        }
        if self.feature.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(fail("feature has a negative or non-finite bin".into()));
        }
        let sum: f64 = self.feature.iter().sum();
        if (sum - 1.0).abs() > FEATURE_SUM_TOL {
            return Err(fail(format!("feature sums to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u32,
    pub parts: Vec<Part>,
    pub gt_box: Option<BoundingBox>,
}

impl Frame {
    pub fn validate(&self, feature_dim: usize) -> Result<()> {
        let mut ids: Vec<PartId> = self.parts.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidPart {
                frame: self.index,
                part: w[0],
                message: "duplicate part id".into(),
            });
        }
        for part in &self.parts {
            part.validate(self.index, feature_dim)?;
        }
        if let Some(b) = &self.gt_box {
            if !(b.w > 0.0 && b.h > 0.0) {
                return Err(Error::InvalidSequence(format!(
                    "frame {}: ground-truth box must have positive size",
                    self.index
                )));
            }
        }
        Ok(())
    }

    pub fn part(&self, id: PartId) -> Option<&Part> {
        self.parts.iter().find(|p| p.id == id)
    }
}

/// A member of the target part set with its tracking history.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPart {
    pub part: Part,
    pub last_seen_frame: u32,
    pub last_center: Point,
    /// Consecutive frames without a structural correspondence.
    pub miss_count: u32,
}

impl TargetPart {
    pub fn new(part: Part, frame: u32) -> Self {
        let last_center = part.center;
        Self {
            part,
            last_seen_frame: frame,
            last_center,
            miss_count: 0,
        }
    }

    pub fn id(&self) -> PartId {
        self.part.id
    }
}

/// Rectangular searching area on the pixel grid. All fields are integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchArea {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl SearchArea {
    /// Area `scale` times the previous box, centred on it and clipped to the canvas.
    pub fn around(prev: &BoundingBox, canvas: (u32, u32), scale: f64) -> Self {
        let (cw, ch) = (f64::from(canvas.0), f64::from(canvas.1));
        let cx = prev.cx.clamp(0.0, cw);
        let cy = prev.cy.clamp(0.0, ch);
        let span = |c: f64, len: f64, limit: f64| {
            let lo = (c - scale * len / 2.0).floor().clamp(0.0, limit);
            let hi = (c + scale * len / 2.0).ceil().clamp(0.0, limit);
            // keep at least one pixel covering the center
            if hi - lo >= 1.0 {
                (lo, hi - lo)
            } else {
                let lo = c.floor().min(limit - 1.0).max(0.0);
                (lo, 1.0)
            }
        };
        let (x0, width) = span(cx, prev.w, cw);
        let (y0, height) = span(cy, prev.h, ch);
        Self { x0, y0, width, height }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x0 + self.width && p.y >= self.y0 && p.y <= self.y0 + self.height
    }

    pub fn cols(&self) -> usize {
        self.width as usize
    }

    pub fn rows(&self) -> usize {
        self.height as usize
    }
}

/// Searching area at three times the previous box size.
pub fn search_area_of(prev: &BoundingBox, canvas: (u32, u32)) -> SearchArea {
    SearchArea::around(prev, canvas, 3.0)
}
