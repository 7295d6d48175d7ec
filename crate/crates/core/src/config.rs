use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every tunable of the tracker. Serialised as a flat JSON object; missing
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Hypergraph order (1, 2 or 3).
    pub order: usize,
    /// Weight of the association term.
    pub omega1: f64,
    /// Weight of the geometric term.
    pub omega2: f64,
    pub sigma_nu_sq: f64,
    pub sigma_psi_sq: f64,
    /// Minimum association confidence of a kept hypothesis.
    pub appearance_threshold: f64,
    /// Hypotheses kept per target part.
    pub max_hypotheses_per_part: usize,
    /// Hyperedge budget of a vertex with normalised confidence 1.
    pub max_hyperedges_per_vertex: usize,
    /// Confidence-map values for reliable, candidate and background cells.
    pub lambda: [f64; 3],
    /// Per-coordinate cap of the relaxed membership vector; defaults to `1/(order+1)`.
    pub mu: Option<f64>,
    pub seed: u64,
    pub tolerance: f64,
    /// Pairwise-update budget per start, as a multiple of the vertex count.
    pub max_updates_factor: usize,
    pub support_threshold: f64,
    pub perturbation_samples: usize,
    /// Weight of the old feature in the target-part feature update.
    pub feature_ema: f64,
    /// Consecutive misses after which a target part is dropped.
    pub miss_limit: u32,
    /// Candidates need at least this foreground probability.
    pub fg_threshold: f64,
    /// Searching area size relative to the previous box.
    pub search_scale: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            order: 3,
            omega1: 10.0,
            omega2: 15.0,
            sigma_nu_sq: 1.0,
            sigma_psi_sq: 1.0,
            appearance_threshold: 0.3,
            max_hypotheses_per_part: 5,
            max_hyperedges_per_vertex: 100,
            lambda: [3.25, 1.0, -1.0],
            mu: None,
            seed: 0,
            tolerance: 1e-8,
            max_updates_factor: 200,
            support_threshold: 1e-6,
            perturbation_samples: 200,
            feature_ema: 0.9,
            miss_limit: 5,
            fg_threshold: 0.5,
            search_scale: 3.0,
        }
    }
}

impl TrackerConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(1.0 / (self.order as f64 + 1.0))
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // negations also reject NaN
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(1..=3).contains(&self.order) {
            return bad("order must be 1, 2 or 3");
        }
        let mu = self.mu();
        if !(mu > 0.0 && mu <= 1.0) {
            return bad("mu must lie in (0, 1]");
        }
        // 1/mu >= k+1, with slack for the default 1/(k+1) computed in floating point
        if 1.0 / mu < self.order as f64 + 1.0 - 1e-9 {
            return bad("mu must satisfy 1/mu >= order + 1");
        }
        if !(self.sigma_nu_sq > 0.0 && self.sigma_psi_sq > 0.0) {
            return bad("scaling parameters must be positive");
        }
        if self.max_hypotheses_per_part < 1 {
            return bad("max_hypotheses_per_part must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.feature_ema) {
            return bad("feature_ema must lie in [0, 1]");
        }
        if !(self.search_scale > 0.0) {
            return bad("search_scale must be positive");
        }
        if self.omega1 < 0.0 || self.omega2 < 0.0 {
            return bad("weights must be non-negative");
        }
        if !(self.tolerance >= 0.0) || !(self.support_threshold >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrackerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.mu(), 0.25);
        assert_eq!(TrackerConfig::with_order(1).mu(), 0.5);
    }

    #[test]
    fn mu_too_large_is_rejected() {
        let c = TrackerConfig {
            mu: Some(0.3),
            ..TrackerConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrackerConfig {
            sigma_psi_sq: 0.0,
            ..TrackerConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_takes_defaults() {
        let c: TrackerConfig = serde_json::from_str(r#"{"order":2,"seed":7}"#).unwrap();
        assert_eq!(c.order, 2);
        assert_eq!(c.seed, 7);
        assert_eq!(c.omega2, 15.0);
        assert!(serde_json::from_str::<TrackerConfig>(r#"{"bogus":1}"#).is_err());
    }
}
