use serde::{Deserialize, Serialize};

use crate::audio::N_MELS;
use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderVariant {
    /// One encoder yields both the content map and the per-layer statistics.
    SingleEncoder,
    /// Content and style come from two encoders with disjoint weights.
    DualEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_mels: usize,
    pub n_blocks: usize,
    /// Channel width of each encoder block; the decoder mirrors them in reverse.
    pub widths: Vec<usize>,
    pub bottleneck_channels: usize,
    pub kernel_size: usize,
    pub epsilon: f64,
    pub activation: Activation,
    pub variant: EncoderVariant,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_mels: N_MELS,
            n_blocks: 4,
            widths: vec![256; 4],
            bottleneck_channels: 4,
            kernel_size: 5,
            epsilon: 1e-5,
            activation: Activation::Sigmoid { alpha: 0.1 },
            variant: EncoderVariant::SingleEncoder,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Reduced widths that train in minutes on a laptop CPU.
    pub fn desk() -> Self {
        Self { n_blocks: 3, widths: vec![32; 3], ..Self::default() }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_bottleneck(mut self, channels: usize) -> Self {
        self.bottleneck_channels = channels;
        self
    }

    pub fn with_variant(mut self, variant: EncoderVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_init_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_blocks == 0 {
            return fail("n_blocks must be at least 1".into());
        }
        if self.widths.len() != self.n_blocks {
            return fail(format!("{} widths given for {} blocks", self.widths.len(), self.n_blocks));
        }
        if self.widths.iter().any(|&w| w == 0) || self.bottleneck_channels == 0 || self.n_mels == 0 {
            return fail("channel counts must be positive".into());
        }
        if self.kernel_size % 2 == 0 {
            return fail(format!("kernel size must be odd, got {}", self.kernel_size));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return fail(format!("epsilon must lie in (0, 1e-3], got {}", self.epsilon));
        }
        self.activation.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let base = ModelConfig::default();
        for bad in [
            ModelConfig { n_blocks: 0, widths: vec![], ..base.clone() },
            ModelConfig { n_blocks: 3, ..base.clone() },
            ModelConfig { kernel_size: 4, ..base.clone() },
            ModelConfig { epsilon: 0.0, ..base.clone() },
            ModelConfig { epsilon: 1e-2, ..base.clone() },
            ModelConfig { activation: Activation::Sigmoid { alpha: 0.0 }, ..base.clone() },
            ModelConfig { widths: vec![256, 0, 256, 256], ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ModelConfig::desk().with_variant(EncoderVariant::DualEncoder);
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"dual_encoder\""));
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), cfg);
    }
}
