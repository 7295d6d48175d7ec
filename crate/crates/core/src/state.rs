//! Target state estimation: confidence map, box scoring and voting.

use rand::Rng;

use crate::mode_parsing::ReliablePart;
use crate::part::{BoundingBox, Part, Point, SearchArea, TargetPart};

/// Half-open range of grid cells whose centers fall in `[lo, hi)`.
fn cell_span(lo: f64, hi: f64, origin: f64, len: usize) -> (usize, usize) {
    let clip = |v: f64| (v - origin - 0.5).ceil().clamp(0.0, len as f64) as usize;
    (clip(lo), clip(hi))
}

/// Per-pixel confidence over a searching area, with its integral image.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    area: SearchArea,
    cols: usize,
    rows: usize,
    grid: Vec<f64>,
    integral: Vec<f64>,
}

impl ConfidenceMap {
    /// Map filled with `background`.
    pub fn filled(area: SearchArea, background: f64) -> Self {
        let (cols, rows) = (area.cols(), area.rows());
        let mut map = Self {
            area,
            cols,
            rows,
            grid: vec![background; cols * rows],
            integral: Vec::new(),
        };
        map.rebuild_integral();
        map
    }

    fn rebuild_integral(&mut self) {
        let stride = self.cols + 1;
        let mut integral = vec![0.0; stride * (self.rows + 1)];
        for r in 0..self.rows {
            let mut row_sum = 0.0;
            for c in 0..self.cols {
                row_sum += self.grid[r * self.cols + c];
                integral[(r + 1) * stride + c + 1] = integral[r * stride + c + 1] + row_sum;
            }
        }
        self.integral = integral;
    }

    /// Paints the `sqrt(area)` square of a part.
    fn paint(&mut self, center: Point, area: f64, value: f64) {
        let half = area.sqrt() / 2.0;
        let (c0, c1) = cell_span(center.x - half, center.x + half, self.area.x0, self.cols);
        let (r0, r1) = cell_span(center.y - half, center.y + half, self.area.y0, self.rows);
        for r in r0..r1 {
            self.grid[r * self.cols + c0..r * self.cols + c1].fill(value);
        }
    }

    pub fn area(&self) -> &SearchArea {
        &self.area
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cell(&self, col: usize, row: usize) -> f64 {
        self.grid[row * self.cols + col]
    }

    fn box_cells(&self, bbox: &BoundingBox) -> (usize, usize, usize, usize) {
        let (c0, c1) = cell_span(bbox.left(), bbox.right(), self.area.x0, self.cols);
        let (r0, r1) = cell_span(bbox.top(), bbox.bottom(), self.area.y0, self.rows);
        (c0, c1, r0, r1)
    }

    /// Sum of the map over the box (clipped to the map), by integral image.
    pub fn box_score(&self, bbox: &BoundingBox) -> f64 {
        let (c0, c1, r0, r1) = self.box_cells(bbox);
        if c0 >= c1 || r0 >= r1 {
            return 0.0;
        }
        let s = self.cols + 1;
        let at = |r: usize, c: usize| self.integral[r * s + c];
        at(r1, c1) - at(r0, c1) - at(r1, c0) + at(r0, c0)
    }

    /// Reference double loop for [`box_score`](Self::box_score).
    pub fn box_score_naive(&self, bbox: &BoundingBox) -> f64 {
        let (c0, c1, r0, r1) = self.box_cells(bbox);
        let mut sum = 0.0;
        for r in r0..r1 {
            for c in c0..c1 {
                sum += self.grid[r * self.cols + c];
            }
        }
        sum
    }
}

/// Confidence map: `lambda[0]` on reliable regions, `lambda[1]` on other
/// candidate regions, `lambda[2]` elsewhere.
pub fn build_confidence_map(
    area: SearchArea,
    reliable: &[&Part],
    candidates: &[&Part],
    lambda: [f64; 3],
) -> ConfidenceMap {
    let mut map = ConfidenceMap::filled(area, lambda[2]);
    for p in candidates {
        map.paint(p.center, p.area, lambda[1]);
    }
    for p in reliable {
        map.paint(p.center, p.area, lambda[0]);
    }
    map.rebuild_integral();
    map
}

/// Weighted vote of the reliable parts' displacements applied to the
/// previous center. Falls back to the previous center when nothing votes.
pub fn rough_center(
    reliable: &[ReliablePart],
    prev_center: Point,
    targets: &[TargetPart],
    candidates: &[Part],
) -> Point {
    let mut total = 0.0;
    let mut acc = Point::default();
    for r in reliable {
        let Some(t) = targets.iter().find(|t| t.id() == r.target_part) else {
            continue;
        };
        let Some(c) = candidates.iter().find(|c| c.id == r.candidate_part) else {
            continue;
        };
        let d = t.last_center.to(&c.center);
        acc.x += (prev_center.x + d.x) * r.weight;
        acc.y += (prev_center.y + d.y) * r.weight;
        total += r.weight;
    }
    if total > 0.0 {
        Point::new(acc.x / total, acc.y / total)
    } else {
        prev_center
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Best of the unperturbed box and `samples` random perturbations with every
/// component uniform in `[-delta, delta]`. Ties keep the smaller perturbation.
pub fn refine_state<R: Rng + ?Sized>(
    map: &ConfidenceMap,
    center: Point,
    size: (f64, f64),
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> (BoundingBox, f64) {
    let base = BoundingBox::new(center.x, center.y, size.0, size.1);
    let mut best = (base, map.box_score(&base), 0.0);
    if delta.is_nan() || delta <= 0.0 {
        return (best.0, best.1);
    }
    for _ in 0..samples {
        let d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-delta..=delta));
        let candidate = BoundingBox::new(
            center.x + d[0],
            center.y + d[1],
            (size.0 + d[2]).max(1.0),
            (size.1 + d[3]).max(1.0),
        );
        let score = map.box_score(&candidate);
        let norm = d.iter().map(|v| v * v).sum::<f64>();
        if score > best.1 || (score == best.1 && norm < best.2) {
            best = (candidate, score, norm);
        }
    }
    (best.0, best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: [f64; 3] = [3.25, 1.0, -1.0];

    fn area(w: f64, h: f64) -> SearchArea {
        SearchArea {
            x0: 0.0,
            y0: 0.0,
            width: w,
            height: h,
        }
    }

    fn part(id: u32, x: f64, y: f64, a: f64) -> Part {
        Part {
            id,
            center: Point::new(x, y),
            area: a,
            fg_prob: None,
            feature: vec![1.0],
        }
    }

    fn count(map: &ConfidenceMap, value: f64) -> usize {
        (0..map.rows())
            .flat_map(|r| (0..map.cols()).map(move |c| (c, r)))
            .filter(|&(c, r)| map.cell(c, r) == value)
            .count()
    }

    #[test]
    fn empty_map_is_background() {
        let map = build_confidence_map(area(20.0, 10.0), &[], &[], LAMBDA);
        assert_eq!(count(&map, -1.0), 200);
        assert_eq!(map.box_score(&BoundingBox::new(10.0, 5.0, 20.0, 10.0)), -200.0);
    }

    #[test]
    fn reliable_region_counts_and_precedence() {
        let p = part(0, 25.3, 30.7, 100.0);
        let q = part(1, 28.0, 30.0, 100.0);
        let map = build_confidence_map(area(60.0, 60.0), &[&p], &[], LAMBDA);
        assert_eq!(count(&map, 3.25), 100);
        let map = build_confidence_map(area(60.0, 60.0), &[&p], &[&q, &p], LAMBDA);
        assert_eq!(count(&map, 3.25), 100);
        assert!(count(&map, 1.0) > 0 && count(&map, 1.0) < 100);
    }

    #[test]
    fn box_scores() {
        let p = part(0, 30.0, 30.0, 400.0);
        let map = build_confidence_map(area(60.0, 60.0), &[&p], &[], LAMBDA);
        assert_eq!(map.box_score(&BoundingBox::new(30.0, 30.0, 10.0, 10.0)), 325.0);
        assert_eq!(map.box_score(&BoundingBox::new(5.0, 5.0, 10.0, 10.0)), -100.0);
        // clipped at the map border
        assert_eq!(map.box_score(&BoundingBox::new(0.0, 0.0, 10.0, 10.0)), -25.0);
    }

    #[test]
    fn rough_center_votes() {
        let t = |id, x, y| TargetPart::new(part(id, x, y, 4.0), 0);
        let targets = [t(1, 10.0, 10.0), t(2, 20.0, 10.0)];
        let cands = [part(7, 14.0, 10.0, 4.0), part(8, 20.0, 14.0, 4.0)];
        let rel = |t, c, w| ReliablePart {
            target_part: t,
            candidate_part: c,
            weight: w,
        };
        let prev = Point::new(50.0, 50.0);
        let c = rough_center(&[rel(1, 7, 3.0), rel(2, 8, 3.0)], prev, &targets, &cands);
        assert_eq!(c, Point::new(52.0, 52.0));
        let single = rough_center(&[rel(1, 7, 0.01)], prev, &targets, &cands);
        assert_eq!(single, Point::new(54.0, 50.0));
        assert_eq!(rough_center(&[], prev, &targets, &cands), prev);
    }

    #[test]
    fn refine_without_samples_is_identity() {
        let map = build_confidence_map(area(60.0, 60.0), &[], &[], LAMBDA);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (b, _) = refine_state(&map, Point::new(30.0, 30.0), (10.0, 12.0), 5.0, 0, &mut rng);
        assert_eq!(b, BoundingBox::new(30.0, 30.0, 10.0, 12.0));
    }

    #[test]
    fn refine_finds_blob() {
        let blob = part(0, 40.0, 35.0, 144.0);
        let map = build_confidence_map(area(80.0, 80.0), &[&blob], &[], LAMBDA);
        let start = Point::new(36.0, 31.0);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            refine_state(&map, start, (12.0, 12.0), 6.0, 200, &mut rng)
        };
        let (b, score) = run(5);
        assert_eq!(run(5), (b, score));
        assert!(b.center().distance(&Point::new(40.0, 35.0)) <= 6.0);
        assert!(score >= map.box_score(&BoundingBox::new(36.0, 31.0, 12.0, 12.0)));
    }

    proptest! {
        #[test]
        fn integral_matches_naive(
            parts in proptest::collection::vec((0.0f64..50.0, 0.0f64..40.0, 1.0f64..200.0, any::<bool>()), 0..12),
            bx in -10.0f64..60.0, by in -10.0f64..50.0, bw in 0.0f64..70.0, bh in 0.0f64..70.0,
        ) {
            let all: Vec<Part> = parts.iter().enumerate().map(|(i, &(x, y, a, _))| part(i as u32, x, y, a)).collect();
            let rel: Vec<&Part> = all.iter().zip(&parts).filter(|(_, p)| p.3).map(|(p, _)| p).collect();
            let cand: Vec<&Part> = all.iter().collect();
            let map = build_confidence_map(
                SearchArea { x0: 3.0, y0: -2.0, width: 47.0, height: 41.0 }, &rel, &cand, LAMBDA);
            let b = BoundingBox::new(bx, by, bw, bh);
            prop_assert_eq!(map.box_score(&b), map.box_score_naive(&b));
        }

        #[test]
        fn rough_center_translation_equivariant(
            moves in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0, 0.1f64..10.0), 1..6),
            vx in -50.0f64..50.0, vy in -50.0f64..50.0,
        ) {
            let targets: Vec<TargetPart> = (0..moves.len())
                .map(|i| TargetPart::new(part(i as u32, 10.0 * i as f64, 5.0, 4.0), 0))
                .collect();
            let cands: Vec<Part> = moves.iter().enumerate()
                .map(|(i, m)| part(100 + i as u32, 10.0 * i as f64 + m.0, 5.0 + m.1, 4.0))
                .collect();
            let rel: Vec<ReliablePart> = moves.iter().enumerate()
                .map(|(i, m)| ReliablePart { target_part: i as u32, candidate_part: 100 + i as u32, weight: m.2 })
                .collect();
            let prev = Point::new(100.0, 80.0);
            let base = rough_center(&rel, prev, &targets, &cands);
            let shifted: Vec<Part> = cands.iter()
                .map(|c| Part { center: Point::new(c.center.x + vx, c.center.y + vy), ..c.clone() })
                .collect();
            let moved_targets: Vec<TargetPart> = targets.iter()
                .map(|t| TargetPart { last_center: Point::new(t.last_center.x + vx, t.last_center.y + vy), ..t.clone() })
                .collect();
            let out = rough_center(&rel, Point::new(prev.x + vx, prev.y + vy), &moved_targets, &shifted);
            prop_assert!((out.x - (base.x + vx)).abs() < 1e-9);
            prop_assert!((out.y - (base.y + vy)).abs() < 1e-9);
        }
    }
}
