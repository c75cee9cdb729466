//! How a single large error propagates through normalization.
//!
//! Hidden states are mostly near zero with a handful of large outliers, and
//! those outliers dominate the mean and variance. An injected error large
//! enough to act as a new outlier shifts both statistics and so changes
//! nearly every normalized element, while without normalization only the hit
//! element moves.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Relative change above which an element counts as altered.
pub const CHANGE_THRESHOLD: f64 = 0.01;

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    LayerNorm,
    RmsNorm,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormPipelineConfig {
    pub dim: usize,
    pub outlier_count: usize,
    pub outlier_value: f64,
    pub base_noise_scale: f64,
    pub norm_kind: NormKind,
    pub seed: u64,
}

impl Default for NormPipelineConfig {
    fn default() -> Self {
        Self {
            dim: 4096,
            outlier_count: 8,
            outlier_value: 50.0,
            base_noise_scale: 1.0,
            norm_kind: NormKind::LayerNorm,
            seed: 0,
        }
    }
}

impl NormPipelineConfig {
    pub fn with_kind(mut self, kind: NormKind) -> Self {
        self.norm_kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.outlier_count >= self.dim {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= outlier_count < dim, got {} and {}",
                self.outlier_count, self.dim
            )));
        }
        if !(self.base_noise_scale > 0.0 && self.outlier_value.abs() >= 10.0 * self.base_noise_scale) {
            return Err(Error::InvalidConfig(format!(
                "outlier_value ({}) must be at least 10x base_noise_scale ({})",
                self.outlier_value, self.base_noise_scale
            )));
        }
        Ok(())
    }

    /// Gaussian background with `outlier_count` evenly spaced outliers.
    pub fn hidden_state(&self) -> Vec<f64> {
        let mut rng = SplitMix64::new(self.seed);
        let noise = Normal::new(0.0, self.base_noise_scale).expect("positive scale");
        let mut h: Vec<f64> = (0..self.dim).map(|_| noise.sample(&mut rng)).collect();
        for i in 0..self.outlier_count {
            h[i * self.dim / self.outlier_count] = self.outlier_value;
        }
        h
    }
}

pub fn normalize(kind: NormKind, h: &[f64]) -> Vec<f64> {
    let n = h.len() as f64;
    match kind {
        NormKind::None => h.to_vec(),
        NormKind::LayerNorm => {
            let mu = h.iter().sum::<f64>() / n;
            let var = h.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            h.iter().map(|v| (v - mu) * inv).collect()
        }
        NormKind::RmsNorm => {
            let ms = h.iter().map(|v| v * v).sum::<f64>() / n;
            let inv = 1.0 / (ms + NORM_EPS).sqrt();
            h.iter().map(|v| v * inv).collect()
        }
    }
}

/// Relative change of each element, guarded against exact zeros.
pub(crate) fn relative_changes<'a>(
    before: &'a [f64],
    after: &'a [f64],
) -> impl Iterator<Item = f64> + 'a {
    before
        .iter()
        .zip(after)
        .map(|(b, a)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplification {
    /// Fraction of normalized elements whose relative change exceeds 1%.
    pub changed_fraction: f64,
    pub max_rel_change: f64,
}

/// Normalizes the synthetic hidden state with and without `error_mag` added at
/// `error_index` and measures how many outputs moved.
pub fn norm_amplification(
    cfg: &NormPipelineConfig,
    error_mag: f64,
    error_index: usize,
) -> Result<Amplification> {
    cfg.validate()?;
    if error_index >= cfg.dim {
        return Err(Error::InvalidConfig(format!(
            "error_index {error_index} out of range for dim {}",
            cfg.dim
        )));
    }
    let clean = cfg.hidden_state();
    let mut hit = clean.clone();
    hit[error_index] += error_mag;

    let before = normalize(cfg.norm_kind, &clean);
    let after = normalize(cfg.norm_kind, &hit);
    let mut changed = 0usize;
    let mut max_rel = 0.0f64;
    for r in relative_changes(&before, &after) {
        if r > CHANGE_THRESHOLD {
            changed += 1;
        }
        max_rel = max_rel.max(r);
    }
    Ok(Amplification {
        changed_fraction: changed as f64 / cfg.dim as f64,
        max_rel_change: max_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pipeline_changes_one_element() {
        let cfg = NormPipelineConfig::default().with_kind(NormKind::None);
        let a = norm_amplification(&cfg, 32768.0, 17).unwrap();
        assert_eq!(a.changed_fraction, 1.0 / 4096.0);
        let a = norm_amplification(&cfg, 5.0, 0).unwrap();
        assert_eq!(a.changed_fraction, 1.0 / 4096.0);
    }

    #[test]
    fn zero_error_changes_nothing() {
        for kind in [NormKind::LayerNorm, NormKind::RmsNorm, NormKind::None] {
            let cfg = NormPipelineConfig::default().with_kind(kind);
            let a = norm_amplification(&cfg, 0.0, 3).unwrap();
            assert_eq!(a.changed_fraction, 0.0);
            assert_eq!(a.max_rel_change, 0.0);
        }
    }

    #[test]
    fn layer_norm_amplifies_large_error() {
        let cfg = NormPipelineConfig::default();
        let a = norm_amplification(&cfg, 32768.0, 100).unwrap();
        assert!(a.changed_fraction > 0.9, "{a:?}");
    }

    #[test]
    fn outliers_placed_and_validated() {
        let cfg = NormPipelineConfig::default();
        let h = cfg.hidden_state();
        assert_eq!(h.iter().filter(|&&v| v == 50.0).count(), 8);
        assert_eq!(h[0], 50.0);
        assert_eq!(h[512], 50.0);

        let bad = NormPipelineConfig {
            outlier_value: 5.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
        let bad = NormPipelineConfig {
            outlier_count: 4096,
            ..cfg
        };
        assert!(bad.validate().is_err());
        assert!(norm_amplification(&cfg, 1.0, 4096).is_err());
    }

    #[test]
    fn normalized_statistics() {
        let h = NormPipelineConfig::default().hidden_state();
        let ln = normalize(NormKind::LayerNorm, &h);
        let mean = ln.iter().sum::<f64>() / ln.len() as f64;
        let var = ln.iter().map(|v| v * v).sum::<f64>() / ln.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4);
        let rms = normalize(NormKind::RmsNorm, &h);
        let ms = rms.iter().map(|v| v * v).sum::<f64>() / rms.len() as f64;
        assert!((ms - 1.0).abs() < 1e-4);
    }
}
