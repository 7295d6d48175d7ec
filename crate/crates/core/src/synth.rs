//! Synthetic part sequences: a deformable rectangular target tiled by
//! foreground parts, moving and scaling over a cluttered background.
//!
//! Foreground parts sit on a jittered grid covering the target, the way
//! superpixels cover an object, so the painted parts fill the ground-truth
//! box rather than leaving empty corners.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correspondence::chi2_distance;
use crate::error::{Error, Result};
use crate::part::{BoundingBox, Frame, Part, Point};
use crate::sequence::Sequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    /// First occluded frame.
    pub start: u32,
    /// Last occluded frame (inclusive).
    pub end: u32,
    /// Fraction of foreground parts hidden.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub canvas: [u32; 2],
    pub frames: u32,
    pub fg_parts: usize,
    pub bg_parts: usize,
    /// Target center in the first frame.
    pub start_center: [f64; 2],
    /// Half width and half height of the target at scale 1.
    pub target_half_size: [f64; 2],
    /// Translation per frame.
    pub translation: [f64; 2],
    /// Target scale in the first and the last frame, linearly ramped.
    pub scale: [f64; 2],
    /// Standard deviation of the per-frame part displacement (pixels).
    pub jitter: f64,
    pub bg_area: f64,
    pub occlusion: Option<Occlusion>,
    pub feature_dim: usize,
    /// Chi-squared distance between the foreground and background prototypes.
    pub prototype_distance: f64,
    /// Persistent per-part feature noise.
    pub part_noise: f64,
    /// Per-frame feature noise.
    pub frame_noise: f64,
    /// Foreground probability ranges of foreground and background parts.
    pub fg_prob: [f64; 2],
    pub bg_prob: [f64; 2],
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            canvas: [400, 400],
            frames: 60,
            fg_parts: 30,
            bg_parts: 90,
            start_center: [120.0, 200.0],
            target_half_size: [30.0, 22.0],
            translation: [2.0, 0.0],
            scale: [1.0, 1.5],
            jitter: 1.5,
            bg_area: 120.0,
            occlusion: None,
            feature_dim: 16,
            prototype_distance: 0.4,
            part_noise: 1.0,
            frame_noise: 0.05,
            fg_prob: [0.6, 1.0],
            bg_prob: [0.0, 0.6],
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn scale_at(&self, frame: u32) -> f64 {
        if self.frames <= 1 {
            return self.scale[0];
        }
        let t = f64::from(frame) / f64::from(self.frames - 1);
        self.scale[0] + t * (self.scale[1] - self.scale[0])
    }

    pub fn center_at(&self, frame: u32) -> Point {
        let f = f64::from(frame);
        Point::new(
            self.start_center[0] + f * self.translation[0],
            self.start_center[1] + f * self.translation[1],
        )
    }

    /// Columns, rows and cell size of the foreground grid at scale 1.
    fn grid(&self) -> (usize, usize, f64, f64) {
        let [hw, hh] = self.target_half_size;
        let n = self.fg_parts.max(1);
        let cols = ((n as f64 * hw / hh).sqrt().round() as usize).clamp(1, n);
        let rows = n.div_ceil(cols);
        (cols, rows, 2.0 * hw / cols as f64, 2.0 * hh / rows as f64)
    }

    /// Number of foreground parts hidden in `frame`.
    pub fn occluded_count(&self, frame: u32) -> usize {
        match &self.occlusion {
            Some(o) if (o.start..=o.end).contains(&frame) => {
                ((o.fraction * self.fg_parts as f64) + 0.5).floor() as usize
            }
            _ => 0,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleSpec(m));
        if self.canvas[0] == 0 || self.canvas[1] == 0 {
            return bad("empty canvas".into());
        }
        if self.fg_parts < 1 {
            return bad("at least one foreground part is required".into());
        }
        if self.feature_dim < 2 {
            return bad("feature_dim must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.prototype_distance) || self.prototype_distance == 0.0 {
            return bad("prototype_distance must lie in (0, 1)".into());
        }
        if !(self.bg_area > 0.0 && self.jitter >= 0.0) {
            return bad("background area must be positive and jitter non-negative".into());
        }
        if !self.target_half_size.iter().all(|h| *h > 0.0) {
            return bad("target size must be positive".into());
        }
        if self.scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return bad("scales must be positive".into());
        }
        for range in [self.fg_prob, self.bg_prob] {
            if !(0.0 <= range[0] && range[0] <= range[1] && range[1] <= 1.0) {
                return bad("probability ranges must lie in [0, 1]".into());
            }
        }
        if let Some(o) = &self.occlusion {
            if !(0.0..=1.0).contains(&o.fraction) || o.end < o.start {
                return bad("occlusion needs start <= end and a fraction in [0, 1]".into());
            }
        }
        let (w, h) = (f64::from(self.canvas[0]), f64::from(self.canvas[1]));
        let (_, _, cell_w, cell_h) = self.grid();
        for frame in 0..self.frames {
            let c = self.center_at(frame);
            let s = self.scale_at(frame);
            let margin = 4.0 * self.jitter + s * (1.1 * cell_w * cell_h).sqrt();
            let (rx, ry) = (
                s * self.target_half_size[0] + margin,
                s * self.target_half_size[1] + margin,
            );
            if c.x - rx < 0.0 || c.x + rx > w || c.y - ry < 0.0 || c.y + ry > h {
                return bad(format!("target leaves the canvas in frame {frame}"));
            }
            if 4.0 * rx * ry > 0.8 * w * h && self.bg_parts > 0 {
                return bad(format!("target leaves no room for background in frame {frame}"));
            }
        }
        Ok(())
    }
}

fn normalised(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Multiplicative log-normal noise on every bin; empty bins stay empty.
fn noisy(base: &[f64], amount: f64, rng: &mut impl Rng) -> Vec<f64> {
    normalised(
        base.iter()
            .map(|b| {
                let z: f64 = StandardNormal.sample(rng);
                b * (amount * z).exp()
            })
            .collect(),
    )
}

/// Foreground and background prototypes at exactly `distance` apart.
fn prototypes(dim: usize, distance: f64, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let half = dim / 2;
    let fg = normalised(
        (0..dim)
            .map(|i| if i < half { 0.2 + rng.random::<f64>() } else { 0.0 })
            .collect(),
    );
    let bg0 = normalised(
        (0..dim)
            .map(|i| if i >= half { 0.2 + rng.random::<f64>() } else { 0.0 })
            .collect(),
    );
    let mix = |m: f64| -> Vec<f64> { bg0.iter().zip(&fg).map(|(b, f)| (1.0 - m) * b + m * f).collect() };
    // disjoint supports are at distance 1; blending bg towards fg shrinks it monotonically
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi2_distance(&fg, &mix(mid)).expect("same length") > distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bg = mix(lo);
    (fg, bg)
}

fn uniform_in(range: [f64; 2], rng: &mut impl Rng) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Generates a sequence; `init_box` is the first frame's ground truth.
pub fn generate(spec: &SynthSpec) -> Result<Sequence> {
    generate_labeled(spec).map(|(seq, _)| seq)
}

/// Like [`generate`], also returning per frame which parts are visible
/// foreground parts.
pub fn generate_labeled(spec: &SynthSpec) -> Result<(Sequence, Vec<Vec<bool>>)> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.feature_dim;
    let (fg_proto, bg_proto) = prototypes(dim, spec.prototype_distance, &mut rng);
    let jitter = Normal::new(0.0, spec.jitter).map_err(|e| Error::InfeasibleSpec(e.to_string()))?;

    // template: one part per grid cell, centers jittered within the cell
    let (cols, _, cell_w, cell_h) = spec.grid();
    let [hw, hh] = spec.target_half_size;
    let template: Vec<(Point, f64, Vec<f64>)> = (0..spec.fg_parts)
        .map(|i| {
            let (c, r) = ((i % cols) as f64, (i / cols) as f64);
            let offset = Point::new(
                -hw + (c + 0.5 + rng.random_range(-0.1..0.1)) * cell_w,
                -hh + (r + 0.5 + rng.random_range(-0.1..0.1)) * cell_h,
            );
            let area = cell_w * cell_h * rng.random_range(0.9..1.1);
            (offset, area, noisy(&fg_proto, spec.part_noise, &mut rng))
        })
        .collect();
    // occlusion hides the leftmost parts of the template
    let mut by_x: Vec<usize> = (0..spec.fg_parts).collect();
    by_x.sort_by(|&a, &b| template[a].0.x.total_cmp(&template[b].0.x).then(a.cmp(&b)));

    let (cw, ch) = (f64::from(spec.canvas[0]), f64::from(spec.canvas[1]));
    let mut frames = Vec::with_capacity(spec.frames as usize);
    let mut init_box = BoundingBox::default();
    let mut labels = Vec::with_capacity(spec.frames as usize);
    for index in 0..spec.frames {
        let center = spec.center_at(index);
        let s = spec.scale_at(index);
        let hidden: Vec<bool> = {
            let mut h = vec![false; spec.fg_parts];
            for &i in &by_x[..spec.occluded_count(index)] {
                h[i] = true;
            }
            h
        };

        let mut parts: Vec<(Part, bool)> = Vec::new();
        let mut fg_centers: Vec<Point> = Vec::new();
        let mut diameters = 0.0;
        for (i, (offset, area, feature)) in template.iter().enumerate() {
            let p = Point::new(
                center.x + s * offset.x + jitter.sample(&mut rng),
                center.y + s * offset.y + jitter.sample(&mut rng),
            );
            let area = area * s * s;
            fg_centers.push(p);
            diameters += area.sqrt();
            let (feature, fg_prob) = if hidden[i] {
                (
                    noisy(&bg_proto, spec.part_noise, &mut rng),
                    uniform_in(spec.bg_prob, &mut rng),
                )
            } else {
                (
                    noisy(feature, spec.frame_noise, &mut rng),
                    uniform_in(spec.fg_prob, &mut rng),
                )
            };
            let part = Part {
                id: 0,
                center: p,
                area,
                fg_prob: Some(fg_prob),
                feature,
            };
            parts.push((part, !hidden[i]));
        }

        let (rx, ry) = (s * hw, s * hh);
        let mut placed = 0;
        while placed < spec.bg_parts {
            let p = Point::new(rng.random_range(0.0..cw), rng.random_range(0.0..ch));
            if (p.x - center.x).abs() <= rx && (p.y - center.y).abs() <= ry {
                continue;
            }
            let part = Part {
                id: 0,
                center: p,
                area: spec.bg_area * rng.random_range(0.8..1.2),
                fg_prob: Some(uniform_in(spec.bg_prob, &mut rng)),
                feature: noisy(&bg_proto, spec.part_noise, &mut rng),
            };
            parts.push((part, false));
            placed += 1;
        }
        parts.shuffle(&mut rng);
        for (id, (p, _)) in parts.iter_mut().enumerate() {
            p.id = id as u32;
        }
        let (parts, visible): (Vec<Part>, Vec<bool>) = parts.into_iter().unzip();
        labels.push(visible);

        let mean_d = diameters / spec.fg_parts as f64;
        let (x0, x1) = fg_centers
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
        let (y0, y1) = fg_centers
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
        let gt = BoundingBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0 + mean_d, y1 - y0 + mean_d);
        if index == 0 {
            init_box = gt;
        }
        frames.push(Frame {
            index,
            parts,
            gt_box: Some(gt),
        });
    }
    if spec.frames == 0 {
        let c = spec.center_at(0);
        init_box = BoundingBox::new(c.x, c.y, 2.0 * hw, 2.0 * hh);
    }

    let total = (spec.fg_parts + spec.bg_parts) as u32;
    let seq = Sequence {
        feature_dim: dim,
        canvas: (spec.canvas[0], spec.canvas[1]),
        init_box,
        superpixel_range: (total, total),
        frames,
    };
    seq.validate()?;
    Ok((seq, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still() -> SynthSpec {
        SynthSpec {
            frames: 5,
            translation: [0.0, 0.0],
            scale: [1.0, 1.0],
            jitter: 0.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn static_spec_has_constant_ground_truth() {
        let seq = generate(&still()).unwrap();
        let first = seq.frames[0].gt_box.unwrap();
        assert_eq!(seq.init_box, first);
        for f in &seq.frames {
            let gt = f.gt_box.unwrap();
            assert!((gt.cx - first.cx).abs() < 1e-9 && (gt.w - first.w).abs() < 1e-9);
        }
    }

    #[test]
    fn prototypes_hit_requested_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (fg, bg) = prototypes(16, 0.4, &mut rng);
        let d = chi2_distance(&fg, &bg).unwrap();
        assert!((0.4..0.4 + 1e-9).contains(&d), "{d}");
    }

    #[test]
    fn scale_ramp_grows_area() {
        let seq = generate(&SynthSpec::default()).unwrap();
        let first = seq.frames[0].gt_box.unwrap();
        let last = seq.frames.last().unwrap().gt_box.unwrap();
        let ratio = last.area() / first.area();
        assert!((ratio / 2.25 - 1.0).abs() <= 0.10, "{ratio}");
    }

    #[test]
    fn occlusion_halves_foreground() {
        let spec = SynthSpec {
            occlusion: Some(Occlusion {
                start: 20,
                end: 30,
                fraction: 0.5,
            }),
            ..SynthSpec::default()
        };
        let (seq, labels) = generate_labeled(&spec).unwrap();
        for (f, visible) in seq.frames.iter().zip(&labels) {
            let expected = if (20..=30).contains(&f.index) { 15 } else { 30 };
            assert_eq!(visible.iter().filter(|&&v| v).count(), expected);
            assert_eq!(f.parts.len(), 120);
        }
    }

    #[test]
    fn overflow_is_infeasible() {
        let spec = SynthSpec {
            translation: [10.0, 0.0],
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(&still()).unwrap(), generate(&still()).unwrap());
    }
}
