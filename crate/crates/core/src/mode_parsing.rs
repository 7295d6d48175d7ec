//! Conflict removal among overlapping modes.
//!
//! Modes are visited by decreasing confidence. A mode sharing no vertex with
//! the modes already visited is kept whole; otherwise its contested vertices
//! are removed and the remainder is kept when it still has at least
//! [`MIN_TRIMMED_SIZE`] vertices. The kept modes yield the reliable target parts.

use crate::hypergraph::{mode_confidence, Hypergraph};
use crate::mode_seeking::Mode;
use crate::part::PartId;

pub const MIN_TRIMMED_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliablePart {
    pub target_part: PartId,
    pub candidate_part: PartId,
    /// Confidence of the mode the part was matched in.
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedModes {
    /// Pairwise vertex-disjoint modes, in acceptance order.
    pub modes: Vec<Mode>,
    pub reliable: Vec<ReliablePart>,
}

pub fn parse_modes(modes: &[Mode], graph: &Hypergraph, omega1: f64, omega2: f64) -> ParsedModes {
    let mut order: Vec<&Mode> = modes.iter().collect();
    order.sort_by(|a, b| b.omega.total_cmp(&a.omega).then(a.start_vertex.cmp(&b.start_vertex)));

    let mut claimed = vec![false; graph.len()];
    let mut accepted: Vec<Mode> = Vec::new();
    for mode in order {
        if mode.vertex_ids.is_empty() {
            continue;
        }
        let remainder: Vec<usize> = mode.vertex_ids.iter().copied().filter(|&v| !claimed[v]).collect();
        // every vertex of a visited mode is claimed, kept or not
        for &v in &mode.vertex_ids {
            claimed[v] = true;
        }
        if remainder.len() == mode.vertex_ids.len() {
            accepted.push(mode.clone());
        } else if remainder.len() >= MIN_TRIMMED_SIZE {
            let omega = mode_confidence(&remainder, graph, omega1, omega2);
            accepted.push(Mode {
                vertex_ids: remainder,
                omega,
                ..mode.clone()
            });
        }
    }

    let mut reliable: Vec<ReliablePart> = Vec::new();
    let mut used_targets = std::collections::HashSet::new();
    let mut used_candidates = std::collections::HashSet::new();
    for mode in &accepted {
        if mode.omega <= 0.0 {
            continue;
        }
        let mut members: Vec<usize> = mode.vertex_ids.clone();
        members.sort_by(|&a, &b| graph.vertex(b).gamma.total_cmp(&graph.vertex(a).gamma).then(a.cmp(&b)));
        for v in members {
            let vertex = graph.vertex(v);
            if used_targets.contains(&vertex.target_part) || used_candidates.contains(&vertex.candidate_part) {
                continue;
            }
            used_targets.insert(vertex.target_part);
            used_candidates.insert(vertex.candidate_part);
            reliable.push(ReliablePart {
                target_part: vertex.target_part,
                candidate_part: vertex.candidate_part,
                weight: mode.omega,
            });
        }
    }
    ParsedModes {
        modes: accepted,
        reliable,
    }
}
