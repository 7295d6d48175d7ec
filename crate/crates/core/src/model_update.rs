//! Online maintenance of the target part set.

use std::collections::{HashMap, HashSet};

use crate::config::TrackerConfig;
use crate::mode_parsing::ReliablePart;
use crate::part::{BoundingBox, Part, PartId, TargetPart};

/// Mean `sqrt(area)` of a set of parts, zero when empty.
pub fn mean_diameter<'a>(parts: impl IntoIterator<Item = &'a Part>) -> f64 {
    let (sum, n) = parts
        .into_iter()
        .fold((0.0, 0usize), |(s, n), p| (s + p.diameter(), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn blend_feature(old: &[f64], new: &[f64], keep: f64) -> Vec<f64> {
    let mut out: Vec<f64> = old.iter().zip(new).map(|(a, b)| keep * a + (1.0 - keep) * b).collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Updates the target part set after an accepted frame.
///
/// Matched parts take the candidate position and blend its feature in;
/// unmatched parts age and expire after `miss_limit` consecutive misses.
/// Candidates inside `bbox` that belong to no accepted mode are admitted in
/// ascending id order when they lie farther than twice the mean candidate
/// diameter from every target part, including ones admitted before them.
pub fn update_target_set(
    targets: Vec<TargetPart>,
    reliable: &[ReliablePart],
    candidates: &[Part],
    in_modes: &HashSet<PartId>,
    bbox: &BoundingBox,
    frame: u32,
    config: &TrackerConfig,
) -> Vec<TargetPart> {
    let by_id: HashMap<PartId, &Part> = candidates.iter().map(|c| (c.id, c)).collect();
    let matches: HashMap<PartId, PartId> = reliable.iter().map(|r| (r.target_part, r.candidate_part)).collect();

    let mut next: Vec<TargetPart> = Vec::with_capacity(targets.len());
    for mut t in targets {
        match matches.get(&t.id()).and_then(|c| by_id.get(c)) {
            Some(c) => {
                t.last_center = c.center;
                t.last_seen_frame = frame;
                t.miss_count = 0;
                t.part.feature = blend_feature(&t.part.feature, &c.feature, config.feature_ema);
                next.push(t);
            }
            None => {
                t.miss_count += 1;
                if t.miss_count < config.miss_limit {
                    next.push(t);
                }
            }
        }
    }

    let radius = 2.0 * mean_diameter(candidates);
    let mut next_id = next.iter().map(TargetPart::id).max().map_or(0, |m| m + 1);
    let mut fresh: Vec<&Part> = candidates
        .iter()
        .filter(|c| !in_modes.contains(&c.id) && bbox.contains(&c.center))
        .collect();
    fresh.sort_by_key(|c| c.id);
    for c in fresh {
        if next.iter().all(|t| t.last_center.distance(&c.center) > radius) {
            let mut part = c.clone();
            part.id = next_id;
            next_id += 1;
            next.push(TargetPart::new(part, frame));
        }
    }
    next
}
