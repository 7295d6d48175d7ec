//! Per-frame tracking pipeline and the results CSV.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::TrackerConfig;
use crate::correspondence::{distance_gate, reduce_vertices, score_pairs};
use crate::error::{Error, Result};
use crate::hypergraph::{sample_hyperedges, Hypergraph};
use crate::mode_parsing::{parse_modes, ParsedModes};
use crate::mode_seeking::{seek_all_modes, Mode, SeekParams};
use crate::model_update::{mean_diameter, update_target_set};
use crate::part::{BoundingBox, Frame, Part, PartId, SearchArea, TargetPart};
use crate::sequence::Sequence;
use crate::state::{build_confidence_map, refine_state, rough_center};

pub const RESULTS_HEADER: &str = "frame,cx,cy,w,h,score,n_reliable";

/// One row of the results CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResult {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
    pub n_reliable: usize,
}

/// Intermediate products of one frame, for debugging dumps.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub frame: u32,
    pub graph: Option<Hypergraph>,
    pub modes: Vec<Mode>,
    pub parsed: ParsedModes,
}

#[derive(Serialize)]
struct ModeDump<'a> {
    vertices: &'a [usize],
    omega: f64,
    start: usize,
    iterations: usize,
}

impl FrameTrace {
    pub fn graph_json(&self) -> serde_json::Value {
        serde_json::json!({
            "frame": self.frame,
            "graph": self.graph.as_ref().map(Hypergraph::to_json),
        })
    }

    pub fn modes_json(&self) -> serde_json::Value {
        let dump = |modes: &[Mode]| -> Vec<serde_json::Value> {
            modes
                .iter()
                .map(|m| {
                    serde_json::to_value(ModeDump {
                        vertices: &m.vertex_ids,
                        omega: m.omega,
                        start: m.start_vertex,
                        iterations: m.iterations,
                    })
                    .expect("plain data")
                })
                .collect()
        };
        serde_json::json!({
            "frame": self.frame,
            "modes": dump(&self.modes),
            "parsed": dump(&self.parsed.modes),
        })
    }
}

/// Stateful tracker; feed it frames in order.
pub struct Tracker {
    config: TrackerConfig,
    params: SeekParams,
    canvas: (u32, u32),
    targets: Vec<TargetPart>,
    bbox: BoundingBox,
    rng: ChaCha8Rng,
}

impl Tracker {
    /// Initialises the target part set from the parts inside `init_box`.
    pub fn new(config: TrackerConfig, canvas: (u32, u32), first: &Frame, init_box: BoundingBox) -> Result<Self> {
        config.validate()?;
        let targets = first
            .parts
            .iter()
            .filter(|p| init_box.contains(&p.center))
            .map(|p| TargetPart::new(p.clone(), first.index))
            .collect();
        Ok(Self {
            params: SeekParams::from_config(&config),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            canvas,
            targets,
            bbox: init_box,
        })
    }

    pub fn targets(&self) -> &[TargetPart] {
        &self.targets
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    fn lost(&self, frame: u32, graph: Option<Hypergraph>, modes: Vec<Mode>) -> (FrameResult, FrameTrace) {
        (
            FrameResult {
                frame,
                bbox: self.bbox,
                score: 0.0,
                n_reliable: 0,
            },
            FrameTrace {
                frame,
                graph,
                modes,
                parsed: ParsedModes::default(),
            },
        )
    }

    pub fn step(&mut self, frame: &Frame) -> Result<(FrameResult, FrameTrace)> {
        let config = &self.config;
        let search = SearchArea::around(&self.bbox, self.canvas, config.search_scale);
        let in_area: Vec<&Part> = frame.parts.iter().filter(|p| search.contains(&p.center)).collect();
        let rho = in_area.len();
        if rho == 0 {
            return Ok(self.lost(frame.index, None, Vec::new()));
        }
        let candidates: Vec<Part> = in_area
            .into_iter()
            .filter(|p| p.foreground() >= config.fg_threshold)
            .cloned()
            .collect();

        let pairs = distance_gate(&self.targets, &candidates, &search, rho);
        let scored = score_pairs(&pairs, &self.targets, &candidates, config.sigma_nu_sq)?;
        let vertices = reduce_vertices(scored, config.appearance_threshold, config.max_hypotheses_per_part);
        let graph = sample_hyperedges(
            vertices,
            config.order,
            config.max_hyperedges_per_vertex,
            config.sigma_psi_sq,
            &mut self.rng,
        );
        let modes = seek_all_modes(&graph, &self.params);
        let parsed = parse_modes(&modes, &graph, config.omega1, config.omega2);
        if parsed.reliable.is_empty() {
            return Ok(self.lost(frame.index, Some(graph), modes));
        }

        let in_modes: HashSet<PartId> = parsed
            .modes
            .iter()
            .flat_map(|m| m.vertex_ids.iter().map(|&v| graph.vertex(v).candidate_part))
            .collect();
        let in_graph: HashSet<PartId> = graph.vertices().iter().map(|v| v.candidate_part).collect();
        let reliable_regions: Vec<&Part> = candidates.iter().filter(|c| in_modes.contains(&c.id)).collect();
        let candidate_regions: Vec<&Part> = candidates.iter().filter(|c| in_graph.contains(&c.id)).collect();
        let map = build_confidence_map(search, &reliable_regions, &candidate_regions, config.lambda);

        let center = rough_center(&parsed.reliable, self.bbox.center(), &self.targets, &candidates);
        let delta = mean_diameter(&candidates);
        let (bbox, score) = refine_state(
            &map,
            center,
            (self.bbox.w, self.bbox.h),
            delta,
            config.perturbation_samples,
            &mut self.rng,
        );

        let targets = std::mem::take(&mut self.targets);
        self.targets = update_target_set(
            targets,
            &parsed.reliable,
            &candidates,
            &in_modes,
            &bbox,
            frame.index,
            config,
        );
        self.bbox = bbox;

        let result = FrameResult {
            frame: frame.index,
            bbox,
            score,
            n_reliable: parsed.reliable.len(),
        };
        let trace = FrameTrace {
            frame: frame.index,
            graph: Some(graph),
            modes,
            parsed,
        };
        Ok((result, trace))
    }
}

/// Tracks a whole sequence, handing every frame's trace to `observe`.
pub fn track_with(
    seq: &Sequence,
    config: &TrackerConfig,
    mut observe: impl FnMut(&FrameTrace),
) -> Result<Vec<FrameResult>> {
    let Some(first) = seq.frames.first() else {
        return Ok(Vec::new());
    };
    let mut tracker = Tracker::new(config.clone(), seq.canvas, first, seq.init_box)?;
    let mut results = vec![FrameResult {
        frame: first.index,
        bbox: seq.init_box,
        score: 0.0,
        n_reliable: 0,
    }];
    for frame in &seq.frames[1..] {
        let (result, trace) = tracker.step(frame)?;
        observe(&trace);
        results.push(result);
    }
    Ok(results)
}

pub fn track(seq: &Sequence, config: &TrackerConfig) -> Result<Vec<FrameResult>> {
    track_with(seq, config, |_| {})
}

pub fn write_results(results: &[FrameResult], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.frame, r.bbox.cx, r.bbox.cy, r.bbox.w, r.bbox.h, r.score, r.n_reliable
        )?;
    }
    Ok(())
}

pub fn read_results(reader: impl BufRead) -> Result<Vec<FrameResult>> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RESULTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{RESULTS_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| Error::Parse { line: i + 2, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(fail(format!("expected 7 fields, found {}", fields.len())));
        }
        let real = |s: &str| s.trim().parse::<f64>().map_err(|e| fail(e.to_string()));
        out.push(FrameResult {
            frame: fields[0]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| fail(e.to_string()))?,
            bbox: BoundingBox::new(real(fields[1])?, real(fields[2])?, real(fields[3])?, real(fields[4])?),
            score: real(fields[5])?,
            n_reliable: fields[6]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| fail(e.to_string()))?,
        });
    }
    Ok(out)
}
