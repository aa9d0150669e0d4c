use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Token selection and replacement probabilities for masked-LM corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub p_select: f64,
    pub p_mask: f64,
    pub p_random: f64,
    pub p_keep: f64,
    pub seed: u64,
    pub mask_token: String,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            p_select: 0.15,
            p_mask: 0.80,
            p_random: 0.10,
            p_keep: 0.10,
            seed: 0,
            mask_token: "[MASK]".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskingError {
    #[error("p_mask + p_random + p_keep must equal 1, got {0}")]
    ProbabilitiesDoNotSum(f64),
    #[error("probability {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("vocabulary is empty but p_random > 0")]
    EmptyVocabulary,
}

impl MaskingConfig {
    pub fn with_seed(seed: u64) -> MaskingConfig {
        MaskingConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MaskingError> {
        for (name, value) in [
            ("p_select", self.p_select),
            ("p_mask", self.p_mask),
            ("p_random", self.p_random),
            ("p_keep", self.p_keep),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(MaskingError::OutOfRange { name, value });
            }
        }
        let sum = self.p_mask + self.p_random + self.p_keep;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MaskingError::ProbabilitiesDoNotSum(sum));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskOutput {
    pub masked: Vec<String>,
    /// Every selected position with the token it originally held.
    pub targets: Vec<(usize, String)>,
}

/// Selects each token independently with `p_select`, then replaces it with
/// the mask token, a uniformly drawn vocabulary token, or leaves it as is.
pub fn mask_tokens<S: AsRef<str>>(tokens: &[S], vocab: &[S], cfg: &MaskingConfig) -> Result<MaskOutput, MaskingError> {
    cfg.validate()?;
    if vocab.is_empty() && cfg.p_random > 0.0 {
        return Err(MaskingError::EmptyVocabulary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut masked = Vec::with_capacity(tokens.len());
    let mut targets = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if rng.random::<f64>() >= cfg.p_select {
            masked.push(tok.to_string());
            continue;
        }
        targets.push((i, tok.to_string()));
        let action: f64 = rng.random();
        let replacement = if action < cfg.p_mask {
            cfg.mask_token.clone()
        } else if action < cfg.p_mask + cfg.p_random {
            vocab[rng.random_range(0..vocab.len())].as_ref().to_string()
        } else {
            tok.to_string()
        };
        masked.push(replacement);
    }
    Ok(MaskOutput { masked, targets })
}
