use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Dropout applied to an encoder's output vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: DropoutMode,
    pub seed: u64,
}

impl DropoutSpec {
    pub fn train(rate: f64, seed: u64) -> Self {
        Self { rate, mode: DropoutMode::Train, seed }
    }

    pub fn infer(rate: f64) -> Self {
        Self { rate, mode: DropoutMode::Infer, seed: 0 }
    }
}

/// Inverted dropout. Returns the output and the per-component scale factor
/// applied (0 for dropped components, `1 / (1 - rate)` for survivors).
pub fn dropout(v: &[f64], spec: &DropoutSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&spec.rate) {
        return Err(Error::InvalidParameter(format!("dropout rate {} must lie in [0, 1)", spec.rate)));
    }
    if spec.mode == DropoutMode::Infer || spec.rate == 0.0 {
        return Ok((v.to_vec(), vec![1.0; v.len()]));
    }
    let keep = 1.0 / (1.0 - spec.rate);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mask: Vec<f64> = v.iter().map(|_| if rng.random::<f64>() < spec.rate { 0.0 } else { keep }).collect();
    let out = v.iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((out, mask))
}
