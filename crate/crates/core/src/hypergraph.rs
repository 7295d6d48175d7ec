//! Geometric hypergraph over correspondence hypotheses.
//!
//! Hyperedges are sampled around each vertex with a budget proportional to
//! its normalised association confidence. Order 2 scores a pair of
//! hypotheses by the agreement of their displacement vectors; order 3 scores a
//! triplet by comparing the sines of the interior angles of the two triangles,
//! which is invariant to similarity transforms of either side.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::correspondence::{Vertex, VertexSet};
use crate::part::{PartId, Point};

/// Minimum interior angle (radians) of a usable triangle.
pub const MIN_TRIANGLE_ANGLE: f64 = 1e-6;

/// Draw attempts per unit of budget before a vertex gives up.
pub const DRAWS_PER_BUDGET: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    /// Strictly increasing vertex ids.
    pub vertices: Vec<usize>,
    pub xi: f64,
    /// Vertex whose sampling budget this hyperedge was charged to.
    pub owner: usize,
}

#[derive(Debug, Clone)]
pub struct Hypergraph {
    order: usize,
    vertices: VertexSet,
    hyperedges: Vec<Hyperedge>,
    incidence: Vec<Vec<usize>>,
}

/// `exp(-|L(p1,p2) - L(q1,q2)| / sigma_sq)` with `L(a, b) = b - a`.
pub fn pairwise_geometric_confidence(v1: &Vertex, v2: &Vertex, sigma_sq: f64) -> f64 {
    let lp = v1.target_center.to(&v2.target_center);
    let lq = v1.candidate_center.to(&v2.candidate_center);
    let diff = (lp.x - lq.x).hypot(lp.y - lq.y);
    (-diff / sigma_sq).exp()
}

/// Interior angles of triangle `(a, b, c)` at `a`, `b` and `c`, or `None` for
/// a degenerate triangle.
pub fn interior_angles(a: Point, b: Point, c: Point) -> Option<[f64; 3]> {
    let angle_at = |o: Point, u: Point, v: Point| {
        let d1 = o.to(&u);
        let d2 = o.to(&v);
        let cross = d1.x * d2.y - d1.y * d2.x;
        let dot = d1.x * d2.x + d1.y * d2.y;
        cross.abs().atan2(dot)
    };
    if a == b || b == c || a == c {
        return None;
    }
    let angles = [angle_at(a, b, c), angle_at(b, c, a), angle_at(c, a, b)];
    if angles.iter().any(|t| !(t.is_finite() && *t >= MIN_TRIANGLE_ANGLE)) {
        return None;
    }
    Some(angles)
}

/// `exp(-sum_i |sin(theta_i^P) - sin(theta_i^Q)| / sigma_sq)`; `None` when
/// either triangle is degenerate.
pub fn triangle_geometric_confidence(v1: &Vertex, v2: &Vertex, v3: &Vertex, sigma_sq: f64) -> Option<f64> {
    let tp = interior_angles(v1.target_center, v2.target_center, v3.target_center)?;
    let tq = interior_angles(v1.candidate_center, v2.candidate_center, v3.candidate_center)?;
    let sum: f64 = tp.iter().zip(&tq).map(|(a, b)| (a.sin() - b.sin()).abs()).sum();
    Some((-sum / sigma_sq).exp())
}

/// Geometric confidence of a tuple of 2 or 3 hypotheses.
pub fn geometric_confidence(tuple: &[&Vertex], sigma_sq: f64) -> Option<f64> {
    match tuple {
        [a, b] => Some(pairwise_geometric_confidence(a, b, sigma_sq)),
        [a, b, c] => triangle_geometric_confidence(a, b, c, sigma_sq),
        _ => None,
    }
}

/// Hyperedge budget `[gamma_hat * n]`, rounding half up.
pub fn hyperedge_budget(gamma_hat: f64, max_per_vertex: usize) -> usize {
    (gamma_hat * max_per_vertex as f64 + 0.5).floor() as usize
}

/// Size of the largest set of pairwise non-conflicting hypotheses (a maximum
/// bipartite matching between target and candidate parts).
pub fn max_conflict_free(vertices: &[&Vertex]) -> usize {
    let mut targets: Vec<PartId> = vertices.iter().map(|v| v.target_part).collect();
    targets.sort_unstable();
    targets.dedup();
    let mut candidates: Vec<PartId> = vertices.iter().map(|v| v.candidate_part).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mut adj = vec![Vec::new(); targets.len()];
    for v in vertices {
        let t = targets.binary_search(&v.target_part).unwrap();
        let c = candidates.binary_search(&v.candidate_part).unwrap();
        adj[t].push(c);
    }

    fn augment(t: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &c in &adj[t] {
            if seen[c] {
                continue;
            }
            seen[c] = true;
            if owner[c].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[c] = Some(t);
                return true;
            }
        }
        false
    }

    let mut owner = vec![None; candidates.len()];
    (0..targets.len())
        .filter(|&t| augment(t, &adj, &mut vec![false; candidates.len()], &mut owner))
        .count()
}

impl Hypergraph {
    /// Assembles a graph from explicit hyperedges. Vertex ids inside each
    /// hyperedge are sorted; no conflict or budget checks are made.
    ///
    /// # Panics
    ///
    /// If a hyperedge has fewer than two or more than three vertices, or
    /// names a vertex outside `vertices`.
    pub fn from_parts(order: usize, vertices: VertexSet, mut hyperedges: Vec<Hyperedge>) -> Self {
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (e, edge) in hyperedges.iter_mut().enumerate() {
            assert!(
                (2..=3).contains(&edge.vertices.len()),
                "hyperedges join two or three vertices"
            );
            edge.vertices.sort_unstable();
            for &v in &edge.vertices {
                incidence[v].push(e);
            }
        }
        Self {
            order,
            vertices,
            hyperedges,
            incidence,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vertex_set(&self) -> &VertexSet {
        &self.vertices
    }

    pub fn vertices(&self) -> &[Vertex] {
        self.vertices.vertices()
    }

    pub fn vertex(&self, id: usize) -> &Vertex {
        self.vertices.get(id)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    /// Hyperedges containing vertex `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    /// Number of hyperedges charged to each vertex.
    pub fn sampled_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        for e in &self.hyperedges {
            counts[e.owner] += 1;
        }
        counts
    }

    /// Vertices sharing at least one hyperedge with `v`, ascending.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.incidence[v]
            .iter()
            .flat_map(|&e| self.hyperedges[e].vertices.iter().copied())
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Hyperedges whose vertices all lie in `members` (a membership mask).
    pub fn interior_hyperedges<'a>(&'a self, members: &'a [bool]) -> impl Iterator<Item = &'a Hyperedge> + 'a {
        self.hyperedges
            .iter()
            .filter(move |e| e.vertices.iter().all(|&v| members[v]))
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct VertexDump {
            id: usize,
            target: PartId,
            candidate: PartId,
            gamma: f64,
            gamma_hat: f64,
        }
        #[derive(Serialize)]
        struct EdgeDump<'a> {
            vertices: &'a [usize],
            xi: f64,
        }
        #[derive(Serialize)]
        struct GraphDump<'a> {
            order: usize,
            vertices: Vec<VertexDump>,
            hyperedges: Vec<EdgeDump<'a>>,
        }
        let dump = GraphDump {
            order: self.order,
            vertices: self
                .vertices()
                .iter()
                .map(|v| VertexDump {
                    id: v.id,
                    target: v.target_part,
                    candidate: v.candidate_part,
                    gamma: v.gamma,
                    gamma_hat: v.gamma_hat,
                })
                .collect(),
            hyperedges: self
                .hyperedges
                .iter()
                .map(|e| EdgeDump {
                    vertices: &e.vertices,
                    xi: e.xi,
                })
                .collect(),
        };
        serde_json::to_value(dump).expect("graph dump is plain data")
    }
}

/// Confidence of a mode: `omega1 * sum gamma + omega2 * sum xi` over its
/// vertices and the hyperedges lying entirely inside it.
pub fn mode_confidence(vertex_ids: &[usize], graph: &Hypergraph, omega1: f64, omega2: f64) -> f64 {
    if vertex_ids.is_empty() {
        return 0.0;
    }
    let mut members = vec![false; graph.len()];
    for &v in vertex_ids {
        members[v] = true;
    }
    let association: f64 = vertex_ids.iter().map(|&v| graph.vertex(v).gamma).sum();
    let geometric: f64 = graph.interior_hyperedges(&members).map(|e| e.xi).sum();
    omega1 * association + omega2 * geometric
}

/// Confidence-aware hyperedge sampling.
///
/// From every vertex `v`, up to `hyperedge_budget(gamma_hat(v), max_per_vertex)`
/// hyperedges are formed by drawing `order - 1` companions uniformly from the
/// whole vertex set. Draws that conflict at part level, repeat an existing
/// hyperedge or form a degenerate triangle are rejected; each vertex stops
/// after `DRAWS_PER_BUDGET` draws per unit of budget.
pub fn sample_hyperedges<R: Rng + ?Sized>(
    vertices: VertexSet,
    order: usize,
    max_per_vertex: usize,
    sigma_sq: f64,
    rng: &mut R,
) -> Hypergraph {
    let n = vertices.len();
    let all: Vec<&Vertex> = vertices.vertices().iter().collect();
    if order < 2 || n < order || max_conflict_free(&all) < order {
        return Hypergraph::from_parts(order, vertices, Vec::new());
    }

    let mut edges: Vec<Hyperedge> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut tuple = Vec::with_capacity(order);
    for start in 0..n {
        let budget = hyperedge_budget(vertices.get(start).gamma_hat, max_per_vertex);
        let mut count = 0;
        let mut draws = 0;
        while count < budget && draws < DRAWS_PER_BUDGET * budget {
            draws += 1;
            tuple.clear();
            tuple.push(start);
            while tuple.len() < order {
                tuple.push(rng.random_range(0..n));
            }
            let conflict_free = (0..order)
                .all(|i| (i + 1..order).all(|j| tuple[i] != tuple[j] && !vertices.conflict(tuple[i], tuple[j])));
            if !conflict_free {
                continue;
            }
            let mut key = tuple.clone();
            key.sort_unstable();
            if seen.contains(&key) {
                continue;
            }
            let members: Vec<&Vertex> = key.iter().map(|&v| vertices.get(v)).collect();
            let Some(xi) = geometric_confidence(&members, sigma_sq) else {
                continue;
            };
            seen.insert(key.clone());
            edges.push(Hyperedge {
                vertices: key,
                xi,
                owner: start,
            });
            count += 1;
        }
    }
    Hypergraph::from_parts(order, vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vertex(t: PartId, c: PartId, p: (f64, f64), q: (f64, f64), gamma: f64) -> Vertex {
        Vertex {
            id: 0,
            target_part: t,
            candidate_part: c,
            target_center: Point::new(p.0, p.1),
            candidate_center: Point::new(q.0, q.1),
            gamma,
            gamma_hat: 0.0,
        }
    }

    #[test]
    fn pairwise_examples() {
        let a = vertex(0, 0, (0.0, 0.0), (10.0, 10.0), 1.0);
        let b = vertex(1, 1, (3.0, 4.0), (13.0, 14.0), 1.0);
        assert_eq!(pairwise_geometric_confidence(&a, &b, 1.0), 1.0);
        let c = vertex(1, 1, (3.0, 4.0), (13.5, 14.0), 1.0);
        let xi = pairwise_geometric_confidence(&a, &c, 1.0);
        assert!((xi - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_not_scale_invariant() {
        let a = vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0);
        let b = vertex(1, 1, (3.0, 4.0), (3.0, 4.0), 1.0);
        let scaled = |v: &Vertex| Vertex {
            candidate_center: Point::new(v.candidate_center.x * 2.0, v.candidate_center.y * 2.0),
            ..v.clone()
        };
        let before = pairwise_geometric_confidence(&a, &b, 1.0);
        let after = pairwise_geometric_confidence(&scaled(&a), &scaled(&b), 1.0);
        assert!(after < before);
    }

    #[test]
    fn triangle_examples() {
        // right isosceles (90, 45, 45) against (90, 60, 30)
        let s3 = 3f64.sqrt();
        let v1 = vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0);
        let v2 = vertex(1, 1, (1.0, 0.0), (1.0, 0.0), 1.0);
        let v3 = vertex(2, 2, (0.0, 1.0), (0.0, s3), 1.0);
        let xi = triangle_geometric_confidence(&v1, &v2, &v3, 1.0).unwrap();
        // |sin 45 - sin 60| + |sin 45 - sin 30| = sqrt(3)/2 - 1/2
        let expected = (-(s3 / 2.0 - 0.5)).exp();
        assert!((xi - expected).abs() < 1e-12);
        assert!((xi - 0.693_485).abs() < 1e-6);
        let same = triangle_geometric_confidence(&v1, &v2, &vertex(2, 2, (0.0, 1.0), (0.0, 1.0), 1.0), 1.0);
        assert!((same.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangles_are_rejected() {
        let v1 = vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0);
        let v2 = vertex(1, 1, (1.0, 0.0), (1.0, 0.0), 1.0);
        let line = vertex(2, 2, (2.0, 0.0), (0.0, 1.0), 1.0);
        assert!(triangle_geometric_confidence(&v1, &v2, &line, 1.0).is_none());
        let dup = vertex(2, 2, (0.0, 1.0), (1.0, 0.0), 1.0);
        assert!(triangle_geometric_confidence(&v1, &v2, &dup, 1.0).is_none());
    }

    #[test]
    fn budget_rounds_half_up() {
        assert_eq!(hyperedge_budget(0.5, 100), 50);
        assert_eq!(hyperedge_budget(0.005, 100), 1);
        assert_eq!(hyperedge_budget(0.0049, 100), 0);
        assert_eq!(hyperedge_budget(1.0, 100), 100);
    }

    #[test]
    fn matching_size() {
        let vs = [
            vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(0, 1, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(1, 0, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(2, 0, (0.0, 0.0), (0.0, 0.0), 1.0),
        ];
        let refs: Vec<&Vertex> = vs.iter().collect();
        assert_eq!(max_conflict_free(&refs), 2);
        assert_eq!(max_conflict_free(&refs[2..]), 1);
    }

    fn grid_set(n: usize) -> VertexSet {
        let mut vs = Vec::new();
        for t in 0..n as u32 {
            for c in 0..3u32 {
                let p = (f64::from(t * 7 % 11), f64::from(t * 3 % 13));
                let q = (p.0 + f64::from(c) + 0.3 * f64::from(t), p.1 - f64::from(c * c));
                vs.push(vertex(t, t * 3 + c, p, q, 1.0 - 0.1 * f64::from(c)));
            }
        }
        VertexSet::from_vertices(vs)
    }

    #[test]
    fn order_one_has_no_hyperedges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = sample_hyperedges(grid_set(6), 1, 100, 1.0, &mut rng);
        assert!(g.hyperedges().is_empty());
        assert_eq!(g.len(), 18);
    }

    #[test]
    fn shared_candidate_never_cooccurs() {
        let vs = vec![
            vertex(0, 9, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(1, 9, (5.0, 0.0), (5.0, 0.0), 1.0),
            vertex(2, 2, (0.0, 5.0), (0.0, 5.0), 1.0),
            vertex(3, 3, (5.0, 5.0), (5.0, 5.0), 1.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_hyperedges(VertexSet::from_vertices(vs), 3, 100, 1.0, &mut rng);
        assert!(!g.hyperedges().is_empty());
        for e in g.hyperedges() {
            assert!(!(e.vertices.contains(&0) && e.vertices.contains(&1)));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        for order in [2, 3] {
            let a = sample_hyperedges(grid_set(8), order, 20, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
            let b = sample_hyperedges(grid_set(8), order, 20, 1.0, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(a.hyperedges(), b.hyperedges());
            for (v, &count) in a.sampled_counts().iter().enumerate() {
                assert!(count <= hyperedge_budget(a.vertex(v).gamma_hat, 20));
            }
            let mut keys: Vec<_> = a.hyperedges().iter().map(|e| e.vertices.clone()).collect();
            keys.sort();
            keys.dedup();
            assert_eq!(keys.len(), a.hyperedges().len());
            for e in a.hyperedges() {
                assert_eq!(e.vertices.len(), order);
                assert!(e.vertices.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn mode_confidence_sums() {
        let vs = vec![
            vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(1, 1, (5.0, 0.0), (5.0, 0.0), 0.5),
            vertex(2, 2, (0.0, 5.0), (0.0, 5.0), 0.5),
        ];
        let set = VertexSet::from_vertices(vs);
        let empty = Hypergraph::from_parts(3, set.clone(), vec![]);
        assert_eq!(mode_confidence(&[], &empty, 10.0, 15.0), 0.0);
        assert_eq!(mode_confidence(&[0], &empty, 10.0, 15.0), 10.0);
        let edge = Hyperedge {
            vertices: vec![2, 0, 1],
            xi: 0.5,
            owner: 0,
        };
        let g = Hypergraph::from_parts(3, set, vec![edge]);
        let without = mode_confidence(&[0, 1], &g, 10.0, 15.0);
        let with = mode_confidence(&[0, 1, 2], &g, 10.0, 15.0);
        assert_eq!(without, 15.0);
        assert_eq!(with - without, 5.0 + 7.5);
        assert_eq!(g.incident(1), &[0]);
        assert_eq!(g.neighbors(0), vec![1, 2]);
    }

    #[test]
    fn too_few_compatible_vertices_gives_no_edges() {
        let vs = vec![
            vertex(0, 0, (0.0, 0.0), (0.0, 0.0), 1.0),
            vertex(0, 1, (5.0, 0.0), (5.0, 0.0), 1.0),
            vertex(1, 1, (0.0, 5.0), (0.0, 5.0), 1.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_hyperedges(VertexSet::from_vertices(vs), 3, 100, 1.0, &mut rng);
        assert!(g.hyperedges().is_empty());
    }
}
