//! Mode seeking on the relaxed membership simplex.
//!
//! A mode is found by maximising
//!
//! ```text
//! f(x) = omega1 * sum_v gamma(v) x_v + omega2 * sum_e xi(e) prod_{v in e} x_v
//! ```
//!
//! over `sum x = 1, 0 <= x_v <= mu`. Each step moves mass between two
//! coordinates: with every other coordinate fixed, `f` restricted to the
//! pair is a polynomial of degree at most two in the transferred mass, so the
//! best split is found in closed form. The pair is the one with the most
//! violated first-order optimality condition.

use rayon::prelude::*;

use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::hypergraph::{max_conflict_free, mode_confidence, Hypergraph};

/// Largest graph the brute-force oracle accepts.
pub const ORACLE_MAX_VERTICES: usize = 14;

/// Mass below which a coordinate counts as empty (or, measured from `mu`, as
/// full) when choosing the update pair.
const ACTIVE_EPS: f64 = 1e-13;

/// Full gradient recomputation period, bounding incremental drift.
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeekParams {
    pub omega1: f64,
    pub omega2: f64,
    pub mu: f64,
    pub tolerance: f64,
    pub max_updates_factor: usize,
    pub support_threshold: f64,
}

impl SeekParams {
    pub fn from_config(config: &TrackerConfig) -> Self {
        Self {
            omega1: config.omega1,
            omega2: config.omega2,
            mu: config.mu(),
            tolerance: config.tolerance,
            max_updates_factor: config.max_updates_factor,
            support_threshold: config.support_threshold,
        }
    }

    /// Smallest support a feasible point can have.
    pub fn min_support(&self) -> usize {
        (1.0 / self.mu - 1e-9).ceil() as usize
    }
}

impl Default for SeekParams {
    fn default() -> Self {
        Self::from_config(&TrackerConfig::default())
    }
}

/// Converged membership vector of one ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub x: Vec<f64>,
    /// Vertices with mass above the support threshold, ascending.
    pub support: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

/// A structural correspondence mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// Ascending vertex ids.
    pub vertex_ids: Vec<usize>,
    pub omega: f64,
    pub start_vertex: usize,
    pub iterations: usize,
}

pub fn objective(x: &[f64], graph: &Hypergraph, omega1: f64, omega2: f64) -> f64 {
    let association: f64 = graph.vertices().iter().zip(x).map(|(v, xv)| v.gamma * xv).sum();
    let geometric: f64 = graph
        .hyperedges()
        .iter()
        .map(|e| e.xi * e.vertices.iter().map(|&v| x[v]).product::<f64>())
        .sum();
    omega1 * association + omega2 * geometric
}

/// Partial derivatives of [`objective`].
pub fn gradient(x: &[f64], graph: &Hypergraph, omega1: f64, omega2: f64) -> Vec<f64> {
    let mut grad: Vec<f64> = graph.vertices().iter().map(|v| omega1 * v.gamma).collect();
    for e in graph.hyperedges() {
        for (pos, &v) in e.vertices.iter().enumerate() {
            let rest: f64 = e
                .vertices
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != pos)
                .map(|(_, &u)| x[u])
                .product();
            grad[v] += omega2 * e.xi * rest;
        }
    }
    grad
}

/// Optimal redistribution of `x_i + x_j` between coordinates `i` and `j`.
///
/// Returns the objective gain, which is never negative; `x` is left
/// untouched when no split improves on the current one.
pub fn pairwise_update(x: &mut [f64], i: usize, j: usize, graph: &Hypergraph, params: &SeekParams) -> f64 {
    let flat = FlatGraph::new(graph);
    let mut padded = flat.pad(x);
    let gain = flat.pairwise_update(&mut padded, i, j, params);
    x.copy_from_slice(&padded[..x.len()]);
    gain
}

/// Starting point for an ascent from `start`: `mu` on the start vertex, the
/// remaining mass spread uniformly over its hypergraph neighbours (capped at
/// `mu`), any overflow spread over the other vertices.
pub fn initial_point(graph: &Hypergraph, start: usize, mu: f64) -> Vec<f64> {
    let n = graph.len();
    let mut x = vec![0.0; n];
    x[start] = mu;
    let mut remaining = 1.0 - mu;
    let neighbors = graph.neighbors(start);
    let mut is_neighbor = vec![false; n];
    for &v in &neighbors {
        is_neighbor[v] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| v != start && !is_neighbor[v]).collect();
    for group in [neighbors, rest] {
        if group.is_empty() || remaining <= 0.0 {
            continue;
        }
        let share = (remaining / group.len() as f64).min(mu);
        for &v in &group {
            x[v] = share;
        }
        remaining -= share * group.len() as f64;
    }
    x
}

/// One hyperedge as seen from one of its vertices.
#[derive(Debug, Clone, Copy)]
struct Incidence {
    xi: f64,
    others: [u32; 2],
}

/// Per-vertex incidence lists laid out contiguously for the inner loops.
///
/// Membership vectors used with it carry one extra coordinate fixed at 1,
/// which pads pairwise hyperedges to triplets so every product has the same
/// shape.
struct FlatGraph {
    gamma: Vec<f64>,
    entries: Vec<Incidence>,
    offsets: Vec<usize>,
}

impl FlatGraph {
    fn new(graph: &Hypergraph) -> Self {
        let n = graph.len();
        let pad = n as u32;
        let mut entries = Vec::with_capacity(graph.hyperedges().len() * 3);
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for v in 0..n {
            for &e in graph.incident(v) {
                let edge = &graph.hyperedges()[e];
                let mut others = [pad; 2];
                for (slot, &u) in others.iter_mut().zip(edge.vertices.iter().filter(|&&u| u != v)) {
                    *slot = u as u32;
                }
                entries.push(Incidence { xi: edge.xi, others });
            }
            offsets.push(entries.len());
        }
        Self {
            gamma: graph.vertices().iter().map(|v| v.gamma).collect(),
            entries,
            offsets,
        }
    }

    fn pad(&self, x: &[f64]) -> Vec<f64> {
        let mut padded = Vec::with_capacity(x.len() + 1);
        padded.extend_from_slice(x);
        padded.push(1.0);
        padded
    }

    fn incident(&self, v: usize) -> &[Incidence] {
        &self.entries[self.offsets[v]..self.offsets[v + 1]]
    }

    fn gradient(&self, x: &[f64], omega1: f64, omega2: f64, grad: &mut [f64]) {
        for (v, g) in grad.iter_mut().enumerate().take(self.gamma.len()) {
            let product: f64 = self
                .incident(v)
                .iter()
                .map(|e| e.xi * x[e.others[0] as usize] * x[e.others[1] as usize])
                .sum();
            *g = omega1 * self.gamma[v] + omega2 * product;
        }
    }

    /// Closed-form best split of `x_i + x_j`; see [`pairwise_update`].
    fn pairwise_update(&self, x: &mut [f64], i: usize, j: usize, params: &SeekParams) -> f64 {
        debug_assert_ne!(i, j);
        let mu = params.mu;
        let total = x[i] + x[j];
        let (ju, iu) = (j as u32, i as u32);

        // coefficients of g(t) = a t^2 + b t, t = x_i, x_j = total - t
        let mut only_i = 0.0;
        let mut only_j = 0.0;
        let mut both = 0.0;
        for e in self.incident(i) {
            let [u, w] = e.others;
            if u == ju {
                both += e.xi * x[w as usize];
            } else if w == ju {
                both += e.xi * x[u as usize];
            } else {
                only_i += e.xi * x[u as usize] * x[w as usize];
            }
        }
        for e in self.incident(j) {
            let [u, w] = e.others;
            if u != iu && w != iu {
                only_j += e.xi * x[u as usize] * x[w as usize];
            }
        }
        let a = -params.omega2 * both;
        let b = params.omega1 * (self.gamma[i] - self.gamma[j]) + params.omega2 * (only_i - only_j + both * total);
        let g = |t: f64| a * t * t + b * t;

        let lo = (total - mu).max(0.0);
        let hi = total.min(mu);
        let current = x[i];
        let mut best = current;
        let mut best_value = g(current);
        let mut consider = |t: f64| {
            let value = g(t);
            if value > best_value {
                best = t;
                best_value = value;
            }
        };
        consider(lo);
        consider(hi);
        if a < 0.0 {
            consider((-b / (2.0 * a)).clamp(lo, hi));
        }
        let gain = best_value - g(current);
        if best != current && gain > 0.0 {
            x[i] = best;
            x[j] = if best == hi && hi == total { 0.0 } else { total - best };
            gain
        } else {
            0.0
        }
    }

    /// Updates `grad` after `x_i, x_j` moved from `old`; every other
    /// coordinate of `x` must be unchanged.
    fn apply_pair_delta(&self, x: &[f64], grad: &mut [f64], i: usize, j: usize, old: [f64; 2], omega2: f64) {
        let iu = i as u32;
        let di = omega2 * (x[i] - old[0]);
        let dj = omega2 * (x[j] - old[1]);
        let dij = omega2 * (x[i] * x[j] - old[0] * old[1]);
        for e in self.incident(i) {
            let [u, w] = e.others;
            let (u, w) = (u as usize, w as usize);
            if u == j || w == j {
                let other = if u == j { w } else { u };
                grad[other] += e.xi * dij;
                grad[i] += e.xi * x[other] * dj;
                grad[j] += e.xi * x[other] * di;
            } else {
                grad[u] += e.xi * di * x[w];
                grad[w] += e.xi * di * x[u];
            }
        }
        for e in self.incident(j) {
            let [u, w] = e.others;
            if u == iu || w == iu {
                continue;
            }
            let (u, w) = (u as usize, w as usize);
            grad[u] += e.xi * dj * x[w];
            grad[w] += e.xi * dj * x[u];
        }
    }
}

/// Incrementally maintained ascent state.
struct Ascent<'g> {
    graph: &'g FlatGraph,
    params: SeekParams,
    /// Padded membership vector.
    x: Vec<f64>,
    grad: Vec<f64>,
    n: usize,
}

impl<'g> Ascent<'g> {
    fn new(graph: &'g FlatGraph, params: SeekParams, x: &[f64]) -> Self {
        let n = x.len();
        let x = graph.pad(x);
        let grad = vec![0.0; n + 1];
        let mut state = Self {
            graph,
            params,
            x,
            grad,
            n,
        };
        state.refresh();
        state
    }

    fn refresh(&mut self) {
        self.graph
            .gradient(&self.x, self.params.omega1, self.params.omega2, &mut self.grad);
    }

    fn membership(&self) -> &[f64] {
        &self.x[..self.n]
    }

    /// Most violating pair: largest gradient among non-full coordinates,
    /// smallest among non-empty ones.
    fn select_pair(&self) -> Option<(usize, usize)> {
        let mu = self.params.mu;
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for (v, (&xv, &gv)) in self.membership().iter().zip(&self.grad).enumerate() {
            if xv < mu - ACTIVE_EPS && up.is_none_or(|u| gv > self.grad[u]) {
                up = Some(v);
            }
            if xv > ACTIVE_EPS && down.is_none_or(|d| gv < self.grad[d]) {
                down = Some(v);
            }
        }
        match (up, down) {
            (Some(i), Some(j)) if i != j && self.grad[i] > self.grad[j] => Some((i, j)),
            _ => None,
        }
    }

    fn step(&mut self, i: usize, j: usize) -> (f64, bool) {
        let old = [self.x[i], self.x[j]];
        let gain = self.graph.pairwise_update(&mut self.x, i, j, &self.params);
        let moved = self.x[i] != old[0] || self.x[j] != old[1];
        if moved {
            self.graph
                .apply_pair_delta(&self.x, &mut self.grad, i, j, old, self.params.omega2);
        }
        let mu = self.params.mu;
        let hit_bound = moved && (self.x[j] <= ACTIVE_EPS || self.x[i] >= mu - ACTIVE_EPS);
        (gain, hit_bound)
    }
}

/// Runs pairwise coordinate ascent from `x0`, calling `observe` after every
/// applied update. Stops when the best pair gains less than the tolerance
/// without changing the active set, or when the update budget is spent.
pub fn ascend(graph: &Hypergraph, x0: Vec<f64>, params: &SeekParams, observe: impl FnMut(&[f64])) -> ModeState {
    ascend_flat(graph, &FlatGraph::new(graph), x0, params, observe)
}

fn ascend_flat(
    graph: &Hypergraph,
    flat: &FlatGraph,
    x0: Vec<f64>,
    params: &SeekParams,
    mut observe: impl FnMut(&[f64]),
) -> ModeState {
    let mut state = Ascent::new(flat, *params, &x0);
    let budget = params.max_updates_factor * graph.len();
    let mut iterations = 0;
    while iterations < budget {
        if iterations % REFRESH_EVERY == 0 {
            state.refresh();
        }
        let Some((i, j)) = state.select_pair() else {
            break;
        };
        let (gain, hit_bound) = state.step(i, j);
        iterations += 1;
        observe(state.membership());
        if gain < params.tolerance && !hit_bound {
            break;
        }
    }
    let x = state.membership().to_vec();
    let support = (0..x.len()).filter(|&v| x[v] > params.support_threshold).collect();
    let objective = objective(&x, graph, params.omega1, params.omega2);
    ModeState {
        x,
        support,
        objective,
        iterations,
    }
}

/// True when the graph can hold a non-degenerate mode.
pub fn admits_modes(graph: &Hypergraph, params: &SeekParams) -> bool {
    let all: Vec<_> = graph.vertices().iter().collect();
    graph.len() >= params.min_support() && max_conflict_free(&all) > graph.order()
}

/// Ascent from a single starting vertex.
pub fn seek_mode(graph: &Hypergraph, start: usize, params: &SeekParams) -> Option<Mode> {
    if start >= graph.len() || !admits_modes(graph, params) {
        return None;
    }
    Some(ascend_to_mode(graph, &FlatGraph::new(graph), start, params))
}

fn ascend_to_mode(graph: &Hypergraph, flat: &FlatGraph, start: usize, params: &SeekParams) -> Mode {
    let state = ascend_flat(graph, flat, initial_point(graph, start, params.mu), params, |_| {});
    let omega = mode_confidence(&state.support, graph, params.omega1, params.omega2);
    Mode {
        vertex_ids: state.support,
        omega,
        start_vertex: start,
        iterations: state.iterations,
    }
}

/// One ascent per vertex, deduplicated by support and sorted by confidence
/// (descending), then by start vertex.
pub fn seek_all_modes(graph: &Hypergraph, params: &SeekParams) -> Vec<Mode> {
    if !admits_modes(graph, params) {
        return Vec::new();
    }
    let flat = FlatGraph::new(graph);
    let found: Vec<Mode> = (0..graph.len())
        .into_par_iter()
        .map(|start| ascend_to_mode(graph, &flat, start, params))
        .collect();
    let mut modes: Vec<Mode> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for mode in found {
        if !mode.vertex_ids.is_empty() && seen.insert(mode.vertex_ids.clone()) {
            modes.push(mode);
        }
    }
    modes.sort_by(|a, b| b.omega.total_cmp(&a.omega).then(a.start_vertex.cmp(&b.start_vertex)));
    modes
}

/// Exhaustive search over supports of size `1/mu` carrying mass `mu` each.
/// Returns the best support (lexicographically first on ties) and its
/// objective.
pub fn brute_force_oracle(graph: &Hypergraph, params: &SeekParams) -> Result<(Vec<usize>, f64)> {
    let n = graph.len();
    if n > ORACLE_MAX_VERTICES {
        return Err(Error::OracleTooLarge {
            vertices: n,
            limit: ORACLE_MAX_VERTICES,
        });
    }
    let size = (1.0 / params.mu).round() as usize;
    if ((size as f64) * params.mu - 1.0).abs() > 1e-9 || size == 0 || size > n {
        return Ok((Vec::new(), f64::NEG_INFINITY));
    }
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::NEG_INFINITY);
    let mut x = vec![0.0; n];
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        for (v, xv) in x.iter_mut().enumerate() {
            *xv = if mask & (1 << v) != 0 { params.mu } else { 0.0 };
        }
        let value = objective(&x, graph, params.omega1, params.omega2);
        let support: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        if value > best.1 || (value == best.1 && support < best.0) {
            best = (support, value);
        }
    }
    Ok(best)
}
