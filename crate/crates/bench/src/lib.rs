//! Shared fixtures for the kernel benchmarks.

use realm_core::{QuantMatrix, SplitMix64, InputDistribution};

/// Deterministic uniform INT8 operands of shape `m x k` and `k x n`.
pub fn operands(m: usize, k: usize, n: usize, seed: u64) -> (QuantMatrix, QuantMatrix) {
    let mut rng = SplitMix64::new(seed);
    let w = InputDistribution::Uniform.matrix(m, k, &mut rng);
    let x = InputDistribution::Uniform.matrix(k, n, &mut rng);
    (w, x)
}
