use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighborhood aggregator used by every propagation layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Gcn,
    #[serde(rename = "sage")]
    GraphSage,
    #[serde(rename = "bi")]
    BiInteraction,
    Gin,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] =
        [Aggregator::Gcn, Aggregator::GraphSage, Aggregator::BiInteraction, Aggregator::Gin];

    pub fn short_name(self) -> &'static str {
        match self {
            Aggregator::Gcn => "gcn",
            Aggregator::GraphSage => "sage",
            Aggregator::BiInteraction => "bi",
            Aggregator::Gin => "gin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.short_name() == s)
            .ok_or_else(|| Error::Config(format!("unknown aggregator `{s}` (expected gcn, sage, bi or gin)")))
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

/// The ε of the GIN update `(1 + ε)·h + h_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum GinEpsilon {
    Fixed(f64),
    /// Trained per layer, starting from the given value.
    Learnable(f64),
}

/// Shape and behaviour of the propagation stack.
///
/// A single width `dim` is shared by entity embeddings, relation
/// embeddings, every layer and the output head: the attention matrix is
/// one square matrix applied at every layer, and the residual path mixes
/// layer outputs with the layer-0 input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub aggregator: Aggregator,
    pub layers: usize,
    pub dim: usize,
    pub dropout: f64,
    pub residual_identity: bool,
    pub alpha: f64,
    pub lambda_rc: f64,
    pub gin_epsilon: GinEpsilon,
    /// Hidden width of the fine-tune classifier.
    pub classifier_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            aggregator: Aggregator::BiInteraction,
            layers: 2,
            dim: 300,
            dropout: 0.1,
            residual_identity: false,
            alpha: 0.1,
            lambda_rc: 3.0,
            gin_epsilon: GinEpsilon::Fixed(0.0),
            classifier_hidden: 32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.dim == 0 || self.classifier_hidden == 0 {
            return bad("dim and classifier_hidden must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.lambda_rc > 0.0 && self.lambda_rc.is_finite()) {
            return bad(format!("lambda_rc must be positive, got {}", self.lambda_rc));
        }
        let eps = match self.gin_epsilon {
            GinEpsilon::Fixed(e) | GinEpsilon::Learnable(e) => e,
        };
        if !eps.is_finite() {
            return bad("gin epsilon must be finite".into());
        }
        if self.residual_identity {
            for l in 1..=self.layers {
                let raw = raw_beta(self.lambda_rc, l);
                if !(0.0..=1.0).contains(&raw) {
                    log::warn!("beta for layer {l} is {raw:.4}, clamped to [0, 1]");
                }
            }
        }
        Ok(())
    }

    /// Identity-mapping strength of layer `l` (1-based).
    pub fn beta(&self, l: usize) -> f64 {
        raw_beta(self.lambda_rc, l).clamp(0.0, 1.0)
    }
}

fn raw_beta(lambda: f64, l: usize) -> f64 {
    (lambda / (1.0 + l as f64)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_is_clamped() {
        let c = ModelConfig { lambda_rc: 1.0, ..Default::default() };
        assert_eq!(c.beta(1), 0.0);
        let c = ModelConfig { lambda_rc: 2.0 * std::f64::consts::E, ..Default::default() };
        assert!((c.beta(1) - 1.0).abs() < 1e-12);
        let c = ModelConfig { lambda_rc: 100.0, ..Default::default() };
        assert_eq!(c.beta(1), 1.0);
    }

    #[test]
    fn invalid_configs() {
        let ok = ModelConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ModelConfig { layers: 0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { dropout: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { alpha: 1.5, ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn aggregator_names_round_trip() {
        for a in Aggregator::ALL {
            assert_eq!(Aggregator::parse(a.short_name()).unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.short_name()));
        }
        assert!(Aggregator::parse("gat").is_err());
    }
}
