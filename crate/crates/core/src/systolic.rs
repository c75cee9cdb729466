//! Behavioral model of a checksum-augmented systolic array.
//!
//! The array is not simulated PE by PE. Outputs come from the exact GEMM,
//! faults from the fault model, and latency from a closed-form cycle model:
//! each tile costs `m + n + k - 2` fill-to-drain cycles plus one cycle for the
//! checksum accumulation.
//!
//! Weight-stationary (WS): the array holds a `K x M` weight tile (rows index
//! the reduction dimension, columns the output rows) and streams X. An extra
//! PE column stores `e^T W` for the tile and produces the predicted checksum
//! `e^T W X` as X streams past.
//!
//! Output-stationary (OS): the array holds an `M x N` output tile and streams
//! K. A column of adders on the left sums the weight rows into `e^T W`, and an
//! extra PE row at the bottom multiplies it with X.
//!
//! In both cases a row of adders accumulates the observed `e^T Y` from the
//! (possibly faulted) outputs, and the statistical unit compares the two.

use serde::{Deserialize, Serialize};

use crate::detect::{msd_of, CriticalRegionParams, Decision, DetectionVerdict, DetectorKind};
use crate::error::{Error, Result};
use crate::fault::{self, EventLog, FaultConfig};
use crate::gemm::{checksum, gemm, MAX_INNER_DIM};
use crate::matrix::{AccumMatrix, ChecksumVector, QuantMatrix, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataflowKind {
    WeightStationary,
    OutputStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub array_rows: usize,
    pub array_cols: usize,
    pub dataflow: DataflowKind,
    pub tiling: bool,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            array_rows: 256,
            array_cols: 256,
            dataflow: DataflowKind::WeightStationary,
            tiling: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Log2Mode {
    /// Real-valued `log2`, identical to the reference detector.
    Exact,
    /// Leading-zero-count floor of `log2 |d|` against a fixed-point threshold.
    Lzc,
}

pub const DEFAULT_FRAC_BITS: u32 = 4;
pub const MAX_FRAC_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatUnitConfig {
    pub params: CriticalRegionParams,
    pub log2_mode: Log2Mode,
    pub fixed_point_frac_bits: u32,
}

impl StatUnitConfig {
    pub fn exact(params: CriticalRegionParams) -> Self {
        Self {
            params,
            log2_mode: Log2Mode::Exact,
            fixed_point_frac_bits: DEFAULT_FRAC_BITS,
        }
    }

    pub fn lzc(params: CriticalRegionParams, frac_bits: u32) -> Result<Self> {
        let cfg = Self {
            params,
            log2_mode: Log2Mode::Lzc,
            fixed_point_frac_bits: frac_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fixed_point_frac_bits > MAX_FRAC_BITS {
            return Err(Error::InvalidConfig(format!(
                "fixed_point_frac_bits must be <= {MAX_FRAC_BITS}, got {}",
                self.fixed_point_frac_bits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub output: AccumMatrix,
    pub predicted: ChecksumVector,
    pub observed: ChecksumVector,
    pub cycles: u64,
    pub verdict: DetectionVerdict,
    pub events: EventLog,
}

/// Tile extents along the two stationary dimensions.
fn tiles(extent: usize, tile: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..extent)
        .step_by(tile.max(1))
        .map(move |start| (start, (start + tile).min(extent)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystolicArray {
    config: ArrayConfig,
}

impl SystolicArray {
    pub fn new(config: ArrayConfig) -> Result<Self> {
        if config.array_rows == 0 || config.array_cols == 0 {
            return Err(Error::InvalidConfig("array dimensions must be nonzero".into()));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    /// Stationary dimensions `(along array rows, along array cols)` and the
    /// streamed dimension for a GEMM of shape `m x k x n`.
    fn mapping(&self, m: usize, k: usize, n: usize) -> (usize, usize, usize) {
        match self.config.dataflow {
            DataflowKind::WeightStationary => (k, m, n),
            DataflowKind::OutputStationary => (m, n, k),
        }
    }

    fn check_fit(&self, m: usize, k: usize, n: usize) -> Result<()> {
        let (r, c, _) = self.mapping(m, k, n);
        if !self.config.tiling && (r > self.config.array_rows || c > self.config.array_cols) {
            return Err(Error::ArrayOverflow {
                m,
                k,
                n,
                rows: self.config.array_rows,
                cols: self.config.array_cols,
            });
        }
        Ok(())
    }

    /// Closed-form latency of the checksum-augmented array.
    pub fn cycles(&self, m: usize, k: usize, n: usize) -> Result<u64> {
        self.check_fit(m, k, n)?;
        Ok(self.tile_cycles(m, k, n, 1))
    }

    /// Same array without the checksum-accumulate stage.
    pub fn base_cycles(&self, m: usize, k: usize, n: usize) -> Result<u64> {
        self.check_fit(m, k, n)?;
        Ok(self.tile_cycles(m, k, n, 0))
    }

    fn tile_cycles(&self, m: usize, k: usize, n: usize, extra: u64) -> u64 {
        let (r, c, streamed) = self.mapping(m, k, n);
        let mut total = 0u64;
        for (r0, r1) in tiles(r, self.config.array_rows) {
            for (c0, c1) in tiles(c, self.config.array_cols) {
                let span = (r1 - r0) + (c1 - c0) + streamed;
                total += span.saturating_sub(2) as u64 + extra;
            }
        }
        total
    }

    /// Predicted column checksum produced by the augmented row/column,
    /// accumulated tile by tile from the operands only.
    fn predicted_checksum(&self, w: &QuantMatrix, x: &QuantMatrix) -> ChecksumVector {
        let (m, k, n) = (w.rows(), w.cols(), x.cols());
        let mut pred = ChecksumVector::zeros(Side::Row, n);
        let (rows, cols) = (self.config.array_rows, self.config.array_cols);
        match self.config.dataflow {
            DataflowKind::WeightStationary => {
                // tile over (k along rows, m along cols); the extra PE column
                // holds sum_m W[m][k] for the tile
                for (k0, k1) in tiles(k, rows) {
                    for (m0, m1) in tiles(m, cols) {
                        for kk in k0..k1 {
                            let ew: i64 = (m0..m1).map(|i| i64::from(w.get(i, kk))).sum();
                            if ew == 0 {
                                continue;
                            }
                            for (p, &xv) in pred.data_mut().iter_mut().zip(x.row(kk)) {
                                *p += ew * i64::from(xv);
                            }
                        }
                    }
                }
            }
            DataflowKind::OutputStationary => {
                // tile over (m along rows, n along cols); the left adder column
                // reduces the weight rows of the tile, the bottom PE row
                // multiplies with the streamed X columns of the tile
                for (m0, m1) in tiles(m, rows) {
                    let ew: Vec<i64> = (0..k)
                        .map(|kk| (m0..m1).map(|i| i64::from(w.get(i, kk))).sum())
                        .collect();
                    for (n0, n1) in tiles(n, cols) {
                        for j in n0..n1 {
                            let dot: i64 = ew
                                .iter()
                                .enumerate()
                                .map(|(kk, &e)| e * i64::from(x.get(kk, j)))
                                .sum();
                            pred.data_mut()[j] += dot;
                        }
                    }
                }
            }
        }
        pred
    }

    /// Fault-free pass: clean product, predicted checksum and latency. The
    /// result can be reused for many fault draws on the same operands.
    pub fn pass(&self, w: &QuantMatrix, x: &QuantMatrix) -> Result<ArrayPass> {
        if w.cols() != x.rows() {
            return Err(Error::DimensionMismatch(format!(
                "W is {}x{} but X is {}x{}",
                w.rows(),
                w.cols(),
                x.rows(),
                x.cols()
            )));
        }
        if w.cols() > MAX_INNER_DIM {
            return Err(Error::InnerDimTooLarge {
                k: w.cols(),
                max: MAX_INNER_DIM,
            });
        }
        let (m, k, n) = (w.rows(), w.cols(), x.cols());
        let cycles = self.cycles(m, k, n)?;
        Ok(ArrayPass {
            clean: gemm(w, x)?,
            predicted: self.predicted_checksum(w, x),
            cycles,
        })
    }

    /// Runs one GEMM through the array with optional fault injection
    /// (seeded by `fault.seed`) and evaluates the statistical unit.
    pub fn run(
        &self,
        w: &QuantMatrix,
        x: &QuantMatrix,
        fault: Option<&FaultConfig>,
        stat: &StatUnitConfig,
    ) -> Result<SimResult> {
        let pass = self.pass(w, x)?;
        match fault {
            Some(cfg) => pass.finish(cfg, cfg.seed, stat),
            None => pass.finish_with(pass.clean.clone(), EventLog::default(), stat),
        }
    }
}

/// The fault-independent half of an array run.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayPass {
    pub clean: AccumMatrix,
    pub predicted: ChecksumVector,
    pub cycles: u64,
}

impl ArrayPass {
    pub fn finish(&self, fault: &FaultConfig, seed: u64, stat: &StatUnitConfig) -> Result<SimResult> {
        let (output, events) = fault::inject(&self.clean, fault, seed)?;
        self.finish_with(output, events, stat)
    }

    pub fn finish_with(
        &self,
        output: AccumMatrix,
        events: EventLog,
        stat: &StatUnitConfig,
    ) -> Result<SimResult> {
        let observed = checksum(&output, Side::Row);
        let verdict = statistical_unit(&self.predicted, &observed, stat)?;
        Ok(SimResult {
            output,
            predicted: self.predicted.clone(),
            observed,
            cycles: self.cycles,
            verdict,
            events,
        })
    }
}

/// Hardware statistical unit: subtract, accumulate MSD, compute `theta_mag`,
/// then count buffered differences above it.
pub fn statistical_unit(
    predicted: &ChecksumVector,
    observed: &ChecksumVector,
    stat: &StatUnitConfig,
) -> Result<DetectionVerdict> {
    stat.validate()?;
    if predicted.len() != observed.len() {
        return Err(Error::DimensionMismatch(format!(
            "predicted checksum has {} entries, observed has {}",
            predicted.len(),
            observed.len()
        )));
    }
    // subtractor + n buffers
    let buffers: Vec<i64> = predicted
        .as_slice()
        .iter()
        .zip(observed.as_slice())
        .map(|(p, o)| p.wrapping_sub(*o))
        .collect();
    // accumulator
    let msd = msd_of(&buffers);
    let p = &stat.params;

    let (theta, freq_eff) = match stat.log2_mode {
        Log2Mode::Exact => {
            if msd == 0 {
                (f64::INFINITY, 0)
            } else {
                let theta = p.b - (p.a - 1.0) * (msd as f64).log2();
                let count = buffers
                    .iter()
                    .filter(|&&d| d != 0 && (d.unsigned_abs() as f64).log2() > theta)
                    .count();
                (theta, count)
            }
        }
        Log2Mode::Lzc => {
            let f = stat.fixed_point_frac_bits;
            match theta_mag_fixed(msd, p, f) {
                None => (f64::INFINITY, 0),
                Some(theta_fx) => {
                    let count = buffers
                        .iter()
                        .filter(|&&d| d != 0 && (i64::from(floor_log2(d.unsigned_abs())) << f) > theta_fx)
                        .count();
                    (theta_fx as f64 / f64::from(1u32 << f), count)
                }
            }
        }
    };

    Ok(DetectionVerdict {
        msd,
        theta_mag: theta,
        freq_eff,
        decision: if freq_eff > p.theta_freq as usize {
            Decision::Recover
        } else {
            Decision::Pass
        },
        detector: DetectorKind::Statistical,
    })
}

/// `63 - lzc(v)` for nonzero `v`.
#[inline]
pub fn floor_log2(v: u64) -> u32 {
    debug_assert!(v != 0);
    63 - v.leading_zeros()
}

/// `log2(v)` in fixed point with `frac_bits` fractional bits, truncated.
/// Integer part from the leading-zero count; fraction bits by repeated
/// squaring of the normalized mantissa.
pub fn log2_fixed(v: u64, frac_bits: u32) -> i64 {
    debug_assert!(v != 0);
    let int = floor_log2(v);
    // mantissa in [1, 2) as Q1.62
    let mut y: u128 = if int >= 62 {
        u128::from(v >> (int - 62))
    } else {
        u128::from(v) << (62 - int)
    };
    let one = 1u128 << 62;
    let mut out = i64::from(int);
    for _ in 0..frac_bits {
        y = (y * y) >> 62;
        out <<= 1;
        if y >= 2 * one {
            out |= 1;
            y >>= 1;
        }
    }
    out
}

/// Fixed-point `theta_mag` in units of `2^-frac_bits`; `None` when `msd == 0`.
pub fn theta_mag_fixed(msd: u64, p: &CriticalRegionParams, frac_bits: u32) -> Option<i64> {
    if msd == 0 {
        return None;
    }
    let scale = f64::from(1u32 << frac_bits);
    let b_fx = (p.b * scale).round() as i64;
    let slope_fx = ((p.a - 1.0) * scale).round() as i64;
    let log_fx = log2_fixed(msd, frac_bits);
    Some(b_fx - ((slope_fx * log_fx) >> frac_bits))
}
