//! Part-based visual tracking by mode seeking on geometric hypergraphs.
//!
//! Each frame, target parts and candidate parts are paired into
//! correspondence hypotheses, a sparse hypergraph is sampled over the
//! hypotheses, modes of mutually consistent hypotheses are found by simplex
//! constrained coordinate ascent, and the surviving modes vote for the target
//! box on a confidence map.

pub mod config;
pub mod correspondence;
pub mod error;
pub mod eval;
pub mod hypergraph;
pub mod mode_parsing;
pub mod mode_seeking;
pub mod model_update;
pub mod part;
pub mod plot;
pub mod sequence;
pub mod state;
pub mod synth;
pub mod tracker;

pub use config::TrackerConfig;
pub use error::{Error, Result};
