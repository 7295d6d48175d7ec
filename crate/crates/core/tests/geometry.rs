use hypertrack::correspondence::Vertex;
use hypertrack::hypergraph::{pairwise_geometric_confidence, triangle_geometric_confidence};
use hypertrack::part::Point;
use proptest::prelude::*;

fn vertex(id: usize, p: Point, q: Point) -> Vertex {
    Vertex {
        id,
        target_part: id as u32,
        candidate_part: id as u32,
        target_center: p,
        candidate_center: q,
        gamma: 1.0,
        gamma_hat: 1.0,
    }
}

/// Similarity transform of the candidate side about `origin`.
fn transform(q: Point, origin: Point, scale: f64, angle: f64, shift: Point) -> Point {
    let (s, c) = angle.sin_cos();
    let (dx, dy) = (q.x - origin.x, q.y - origin.y);
    Point::new(
        origin.x + scale * (c * dx - s * dy) + shift.x,
        origin.y + scale * (s * dx + c * dy) + shift.y,
    )
}

fn point() -> impl Strategy<Value = Point> {
    (0.0..200.0f64, 0.0..200.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn well_shaped(a: Point, b: Point, c: Point) -> bool {
    let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    cross.abs() > 50.0 && a.distance(&b) > 1.0 && b.distance(&c) > 1.0 && a.distance(&c) > 1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn triangle_confidence_ignores_similarity_of_candidates(
        p in [point(), point(), point()],
        q in [point(), point(), point()],
        origin in point(),
        scale in prop_oneof![Just(0.5), Just(2.0), Just(5.0), 0.1..10.0f64],
        angle in -std::f64::consts::PI..std::f64::consts::PI,
        shift in point(),
    ) {
        prop_assume!(well_shaped(p[0], p[1], p[2]) && well_shaped(q[0], q[1], q[2]));
        let before: Vec<Vertex> = (0..3).map(|i| vertex(i, p[i], q[i])).collect();
        let after: Vec<Vertex> = (0..3)
            .map(|i| vertex(i, p[i], transform(q[i], origin, scale, angle, shift)))
            .collect();
        let xi0 = triangle_geometric_confidence(&before[0], &before[1], &before[2], 1.0).unwrap();
        let xi1 = triangle_geometric_confidence(&after[0], &after[1], &after[2], 1.0).unwrap();
        prop_assert!((xi0 - xi1).abs() <= 1e-9, "{xi0} vs {xi1}");
        prop_assert!(xi0 > 0.0 && xi0 <= 1.0);
    }

    #[test]
    fn pairwise_confidence_drops_when_candidates_double(
        p in [point(), point()],
        noise in [(-1.0..1.0f64, -1.0..1.0f64), (-1.0..1.0f64, -1.0..1.0f64)],
        origin in point(),
    ) {
        prop_assume!(p[0].distance(&p[1]) > 10.0);
        let q: Vec<Point> = (0..2).map(|i| Point::new(p[i].x + noise[i].0, p[i].y + noise[i].1)).collect();
        let v = |q0: Point, q1: Point| {
            pairwise_geometric_confidence(&vertex(0, p[0], q0), &vertex(1, p[1], q1), 1.0)
        };
        let doubled: Vec<Point> = q.iter().map(|&qi| transform(qi, origin, 2.0, 0.0, Point::default())).collect();
        prop_assert!(v(doubled[0], doubled[1]) < v(q[0], q[1]));
    }
}

#[test]
fn collinear_candidates_are_rejected() {
    let p = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(0.0, 10.0)];
    let q = [Point::new(0.0, 0.0), Point::new(5.0, 5.0), Point::new(10.0, 10.0)];
    let v: Vec<Vertex> = (0..3).map(|i| vertex(i, p[i], q[i])).collect();
    assert!(triangle_geometric_confidence(&v[0], &v[1], &v[2], 1.0).is_none());
}
