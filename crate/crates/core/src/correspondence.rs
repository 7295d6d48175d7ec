//! Correspondence hypotheses between target parts and candidate parts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::part::{Part, PartId, Point, SearchArea, TargetPart};

const CHI2_EPS: f64 = 1e-12;

/// Chi-squared distance `1/2 * sum (a-b)^2 / (a+b)` between two histograms.
pub fn chi2_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::LengthMismatch(h1.len(), h2.len()));
    }
    let sum: f64 = h1
        .iter()
        .zip(h2)
        .map(|(a, b)| {
            let d = a - b;
            d * d / (a + b + CHI2_EPS)
        })
        .sum();
    Ok(0.5 * sum)
}

/// Association confidence `exp(-d / sigma_sq)` of a chi-squared distance.
pub fn confidence_from_distance(distance: f64, sigma_sq: f64) -> f64 {
    (-distance / sigma_sq).exp()
}

pub fn association_confidence(p: &Part, q: &Part, sigma_sq: f64) -> Result<f64> {
    Ok(confidence_from_distance(
        chi2_distance(&p.feature, &q.feature)?,
        sigma_sq,
    ))
}

/// Gate radius `3 * sqrt(W * H / rho)` for `rho` parts in the searching area.
pub fn distance_threshold(search: &SearchArea, rho: usize) -> f64 {
    3.0 * (search.width * search.height / rho.max(1) as f64).sqrt()
}

/// A target/candidate pair that passed the distance gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub target: usize,
    pub candidate: usize,
    pub distance: f64,
}

/// All pairs whose centers lie within the gate radius. Indices refer to the
/// input slices; target positions are their last observed centers.
pub fn distance_gate(
    targets: &[TargetPart],
    candidates: &[Part],
    search: &SearchArea,
    rho: usize,
) -> Vec<CandidatePair> {
    let tau = distance_threshold(search, rho);
    let mut pairs = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        for (ci, c) in candidates.iter().enumerate() {
            let distance = t.last_center.distance(&c.center);
            if distance <= tau {
                pairs.push(CandidatePair {
                    target: ti,
                    candidate: ci,
                    distance,
                });
            }
        }
    }
    pairs
}

/// A gated pair with its association confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub target_part: PartId,
    pub candidate_part: PartId,
    pub target_center: Point,
    pub candidate_center: Point,
    pub gamma: f64,
}

pub fn score_pairs(
    pairs: &[CandidatePair],
    targets: &[TargetPart],
    candidates: &[Part],
    sigma_sq: f64,
) -> Result<Vec<ScoredPair>> {
    pairs
        .iter()
        .map(|pair| {
            let t = &targets[pair.target];
            let c = &candidates[pair.candidate];
            Ok(ScoredPair {
                target_part: t.id(),
                candidate_part: c.id,
                target_center: t.last_center,
                candidate_center: c.center,
                gamma: association_confidence(&t.part, c, sigma_sq)?,
            })
        })
        .collect()
}

/// Correspondence hypothesis `p ~ q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    /// Position in the owning [`VertexSet`].
    pub id: usize,
    pub target_part: PartId,
    pub candidate_part: PartId,
    pub target_center: Point,
    pub candidate_center: Point,
    pub gamma: f64,
    /// `gamma` divided by the largest `gamma` of the set.
    pub gamma_hat: f64,
}

impl Vertex {
    /// Two hypotheses conflict when they share a target or a candidate part.
    pub fn conflicts_with(&self, other: &Vertex) -> bool {
        self.target_part == other.target_part || self.candidate_part == other.candidate_part
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VertexSet {
    vertices: Vec<Vertex>,
    by_target: BTreeMap<PartId, Vec<usize>>,
    by_candidate: BTreeMap<PartId, Vec<usize>>,
}

impl VertexSet {
    /// Builds a set from vertices in their final order, re-assigning ids and
    /// the normalised confidence.
    pub fn from_vertices(mut vertices: Vec<Vertex>) -> Self {
        let max_gamma = vertices.iter().map(|v| v.gamma).fold(0.0, f64::max);
        let mut by_target: BTreeMap<PartId, Vec<usize>> = BTreeMap::new();
        let mut by_candidate: BTreeMap<PartId, Vec<usize>> = BTreeMap::new();
        for (id, v) in vertices.iter_mut().enumerate() {
            v.id = id;
            v.gamma_hat = if max_gamma > 0.0 { v.gamma / max_gamma } else { 0.0 };
            by_target.entry(v.target_part).or_default().push(id);
            by_candidate.entry(v.candidate_part).or_default().push(id);
        }
        Self {
            vertices,
            by_target,
            by_candidate,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn get(&self, id: usize) -> &Vertex {
        &self.vertices[id]
    }

    pub fn for_target(&self, part: PartId) -> &[usize] {
        self.by_target.get(&part).map_or(&[], Vec::as_slice)
    }

    pub fn for_candidate(&self, part: PartId) -> &[usize] {
        self.by_candidate.get(&part).map_or(&[], Vec::as_slice)
    }

    pub fn conflict(&self, a: usize, b: usize) -> bool {
        self.vertices[a].conflicts_with(&self.vertices[b])
    }
}

/// Deterministic vertex reduction: per target part, the `max_per_part`
/// highest-confidence pairs with confidence at least `threshold`. Ties go to
/// the smaller candidate id; vertices are ordered by target id, then rank.
pub fn reduce_vertices(pairs: Vec<ScoredPair>, threshold: f64, max_per_part: usize) -> VertexSet {
    let mut grouped: BTreeMap<PartId, Vec<ScoredPair>> = BTreeMap::new();
    for pair in pairs {
        if pair.gamma >= threshold {
            grouped.entry(pair.target_part).or_default().push(pair);
        }
    }
    let mut vertices = Vec::new();
    for (_, mut group) in grouped {
        group.sort_by(|a, b| {
            b.gamma
                .total_cmp(&a.gamma)
                .then(a.candidate_part.cmp(&b.candidate_part))
        });
        let mut seen = std::collections::BTreeSet::new();
        group.retain(|p| seen.insert(p.candidate_part));
        vertices.extend(group.into_iter().take(max_per_part).map(|p| Vertex {
            id: 0,
            target_part: p.target_part,
            candidate_part: p.candidate_part,
            target_center: p.target_center,
            candidate_center: p.candidate_center,
            gamma: p.gamma,
            gamma_hat: 0.0,
        }));
    }
    VertexSet::from_vertices(vertices)
}
