//! Synthetic INT8 operands for experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::QuantMatrix;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputDistribution {
    /// Uniform over the full INT8 range.
    Uniform,
    /// Mostly small values in `[-small, small]`, with probability `outlier_prob`
    /// a large value of magnitude in `[large_min, 127]` and random sign.
    Outlier {
        outlier_prob: f64,
        small: u8,
        large_min: u8,
    },
}

impl Default for InputDistribution {
    fn default() -> Self {
        Self::Uniform
    }
}

impl InputDistribution {
    pub fn outlier_default() -> Self {
        Self::Outlier {
            outlier_prob: 0.01,
            small: 8,
            large_min: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Outlier {
            outlier_prob,
            small,
            large_min,
        } = *self
        {
            if !(0.0..=1.0).contains(&outlier_prob) {
                return Err(Error::InvalidConfig(format!(
                    "outlier_prob must lie in [0, 1], got {outlier_prob}"
                )));
            }
            if small > 127 || large_min > 127 || large_min < small {
                return Err(Error::InvalidConfig(format!(
                    "outlier distribution needs small <= large_min <= 127, got {small} and {large_min}"
                )));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SplitMix64) -> i8 {
        match *self {
            Self::Uniform => (rng.below(256) as i64 - 128) as i8,
            Self::Outlier {
                outlier_prob,
                small,
                large_min,
            } => {
                if rng.unit_f64() < outlier_prob {
                    let span = u64::from(127 - large_min) + 1;
                    let v = i64::from(large_min) + rng.below(span) as i64;
                    if rng.next() & 1 == 1 {
                        -v as i8
                    } else {
                        v as i8
                    }
                } else {
                    let span = 2 * u64::from(small) + 1;
                    (rng.below(span) as i64 - i64::from(small)) as i8
                }
            }
        }
    }

    pub fn matrix(&self, rows: usize, cols: usize, rng: &mut SplitMix64) -> QuantMatrix {
        let data = (0..rows * cols).map(|_| self.sample(rng)).collect();
        QuantMatrix::new(rows, cols, data).expect("shape matches")
    }
}

/// GEMM shape and count for energy/latency accounting and trial generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Workload {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub gemm_count: u64,
    pub input_distribution: InputDistribution,
    pub seed: u64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            m: 64,
            k: 64,
            n: 64,
            gemm_count: 1,
            input_distribution: InputDistribution::Uniform,
            seed: 0,
        }
    }
}

/// Seed-domain separator so operand and fault streams never coincide.
const OPERAND_DOMAIN: u64 = 0x6f70_6572_616e_6473;

impl Workload {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("workload dimensions must be nonzero".into()));
        }
        self.input_distribution.validate()
    }

    pub fn macs_per_gemm(&self) -> u64 {
        (self.m * self.k * self.n) as u64
    }

    pub fn total_macs(&self) -> u64 {
        self.macs_per_gemm() * self.gemm_count
    }

    /// Operands for a given trial, deterministic in `(seed, trial)`.
    pub fn operands(&self, trial: u64) -> (QuantMatrix, QuantMatrix) {
        let mut rng = SplitMix64::new(crate::rng::derive_seed(self.seed ^ OPERAND_DOMAIN, trial, 0));
        let w = self.input_distribution.matrix(self.m, self.k, &mut rng);
        let x = self.input_distribution.matrix(self.k, self.n, &mut rng);
        (w, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_covers_int8_range() {
        let mut rng = SplitMix64::new(1);
        let m = InputDistribution::Uniform.matrix(64, 64, &mut rng);
        assert!(m.data().contains(&-128));
        assert!(m.data().contains(&127));
    }

    #[test]
    fn outlier_distribution_is_mostly_small() {
        let mut rng = SplitMix64::new(2);
        let m = InputDistribution::outlier_default().matrix(100, 100, &mut rng);
        let large = m.data().iter().filter(|v| v.unsigned_abs() >= 64).count();
        let small = m.data().iter().filter(|v| v.unsigned_abs() <= 8).count();
        assert_eq!(large + small, 10_000);
        assert!((50..200).contains(&large), "{large}");
    }

    #[test]
    fn operands_are_deterministic_per_trial() {
        let w = Workload::default();
        assert_eq!(w.operands(3), w.operands(3));
        assert_ne!(w.operands(3).0, w.operands(4).0);
    }

    #[test]
    fn invalid_distributions_rejected() {
        let bad = InputDistribution::Outlier {
            outlier_prob: 2.0,
            small: 8,
            large_min: 64,
        };
        assert!(bad.validate().is_err());
        let bad = InputDistribution::Outlier {
            outlier_prob: 0.1,
            small: 80,
            large_min: 64,
        };
        assert!(bad.validate().is_err());
    }
}
