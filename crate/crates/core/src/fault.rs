//! Seeded injection of computational errors into INT32 GEMM outputs.
//!
//! Two models are supported: independent per-bit flips at a given bit error
//! rate (restricted to a window of higher bits), and `freq` identical additive
//! errors of size `mag` at distinct positions. Both return the corrupted copy
//! together with an exact event log.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::AccumMatrix;
use crate::rng::{BernoulliThreshold, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    Ber,
    Uniform,
}

/// Inclusive range of bit indices (within 0..=31) eligible for flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct BitWindow {
    lo: u8,
    hi: u8,
}

impl BitWindow {
    pub fn new(lo: u8, hi: u8) -> Result<Self> {
        if lo > hi || hi > 31 {
            return Err(Error::InvalidConfig(format!(
                "bit window [{lo}, {hi}] must satisfy lo <= hi <= 31"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> u8 {
        self.lo
    }

    pub fn hi(&self) -> u8 {
        self.hi
    }

    pub fn width(&self) -> u32 {
        u32::from(self.hi - self.lo) + 1
    }
}

/// Upper half of the accumulator word.
impl Default for BitWindow {
    fn default() -> Self {
        Self { lo: 16, hi: 31 }
    }
}

impl TryFrom<[u8; 2]> for BitWindow {
    type Error = Error;
    fn try_from(v: [u8; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<BitWindow> for [u8; 2] {
    fn from(w: BitWindow) -> Self {
        [w.lo, w.hi]
    }
}

/// Where uniform-mode errors may land.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Any `freq` distinct output elements.
    #[default]
    Anywhere,
    /// `freq` distinct columns, one element each.
    DistinctColumns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultConfig {
    pub mode: FaultMode,
    pub ber: f64,
    pub bit_window: BitWindow,
    pub mag: i32,
    pub freq: usize,
    pub placement: Placement,
    /// Give each uniform-mode error an independent random sign.
    pub signed_mix: bool,
    pub seed: u64,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            mode: FaultMode::Ber,
            ber: 0.0,
            bit_window: BitWindow::default(),
            mag: 0,
            freq: 0,
            placement: Placement::Anywhere,
            signed_mix: false,
            seed: 0,
        }
    }
}

impl FaultConfig {
    pub fn ber(ber: f64, bit_window: BitWindow) -> Self {
        Self {
            mode: FaultMode::Ber,
            ber,
            bit_window,
            ..Self::default()
        }
    }

    pub fn uniform(mag: i32, freq: usize) -> Self {
        Self {
            mode: FaultMode::Uniform,
            mag,
            freq,
            ..Self::default()
        }
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == FaultMode::Ber && !(0.0..=1.0).contains(&self.ber) {
            return Err(Error::InvalidConfig(format!(
                "ber must lie in [0, 1], got {}",
                self.ber
            )));
        }
        Ok(())
    }
}

/// One corrupted output element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub row: usize,
    pub col: usize,
    pub before: i32,
    pub after: i32,
    /// Mask of flipped bits; zero for additive (uniform-mode) errors.
    pub flipped: u32,
}

impl ErrorEvent {
    /// Signed deviation `after - before`, exact in 64 bits.
    pub fn delta(&self) -> i64 {
        i64::from(self.after) - i64::from(self.before)
    }

    pub fn flipped_bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..32u8).filter(move |b| self.flipped & (1 << b) != 0)
    }
}

/// Ground-truth record of every injected error, in row-major order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog(Vec<ErrorEvent>);

impl EventLog {
    pub fn events(&self) -> &[ErrorEvent] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ErrorEvent> {
        self.0.iter()
    }

    /// Applies the logged corruption to a clean output.
    pub fn replay(&self, clean: &AccumMatrix) -> Result<AccumMatrix> {
        let mut out = clean.clone();
        for e in &self.0 {
            if e.row >= out.rows() || e.col >= out.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "event at ({}, {}) outside {}x{} output",
                    e.row,
                    e.col,
                    out.rows(),
                    out.cols()
                )));
            }
            if out.get(e.row, e.col) != e.before {
                return Err(Error::InvalidMatrix(format!(
                    "event at ({}, {}) expects {} but found {}",
                    e.row,
                    e.col,
                    e.before,
                    out.get(e.row, e.col)
                )));
            }
            out.set(e.row, e.col, e.after);
        }
        Ok(out)
    }
}

impl<'a> IntoIterator for &'a EventLog {
    type Item = &'a ErrorEvent;
    type IntoIter = std::slice::Iter<'a, ErrorEvent>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Dispatches on `cfg.mode`.
pub fn inject(y: &AccumMatrix, cfg: &FaultConfig, seed: u64) -> Result<(AccumMatrix, EventLog)> {
    match cfg.mode {
        FaultMode::Ber => sample_bitflips(y, cfg, seed),
        FaultMode::Uniform => inject_uniform(y, cfg, seed),
    }
}

/// Flips each bit in the window of each element independently with
/// probability `cfg.ber`. Draws are taken element by element in row-major
/// order, bits ascending, one draw per (element, bit).
pub fn sample_bitflips(
    y: &AccumMatrix,
    cfg: &FaultConfig,
    seed: u64,
) -> Result<(AccumMatrix, EventLog)> {
    if cfg.mode != FaultMode::Ber {
        return Err(Error::InvalidConfig("sample_bitflips needs mode=ber".into()));
    }
    cfg.validate()?;
    let threshold = BernoulliThreshold::new(cfg.ber);
    let mut out = y.clone();
    let mut log = Vec::new();
    if threshold == BernoulliThreshold::Never {
        return Ok((out, EventLog(log)));
    }

    let mut rng = SplitMix64::new(seed);
    let (lo, hi) = (cfg.bit_window.lo, cfg.bit_window.hi);
    let cols = y.cols();
    for (idx, v) in out.data_mut().iter_mut().enumerate() {
        let mut mask = 0u32;
        for bit in lo..=hi {
            if rng.bernoulli(threshold) {
                mask |= 1 << bit;
            }
        }
        if mask != 0 {
            let before = *v;
            let after = ((before as u32) ^ mask) as i32;
            *v = after;
            log.push(ErrorEvent {
                row: idx / cols,
                col: idx % cols,
                before,
                after,
                flipped: mask,
            });
        }
    }
    Ok((out, EventLog(log)))
}

/// Adds `cfg.mag` (wrapping) to exactly `cfg.freq` distinct positions chosen
/// uniformly without replacement.
pub fn inject_uniform(
    y: &AccumMatrix,
    cfg: &FaultConfig,
    seed: u64,
) -> Result<(AccumMatrix, EventLog)> {
    if cfg.mode != FaultMode::Uniform {
        return Err(Error::InvalidConfig("inject_uniform needs mode=uniform".into()));
    }
    let (rows, cols) = (y.rows(), y.cols());
    let mut rng = SplitMix64::new(seed);

    let mut positions: Vec<usize> = match cfg.placement {
        Placement::Anywhere => {
            let slots = rows * cols;
            if cfg.freq > slots {
                return Err(Error::FreqTooLarge {
                    freq: cfg.freq,
                    slots,
                });
            }
            partial_shuffle(slots, cfg.freq, &mut rng)
        }
        Placement::DistinctColumns => {
            if cfg.freq > cols || (cfg.freq > 0 && rows == 0) {
                return Err(Error::FreqTooLarge {
                    freq: cfg.freq,
                    slots: if rows == 0 { 0 } else { cols },
                });
            }
            partial_shuffle(cols, cfg.freq, &mut rng)
                .into_iter()
                .map(|c| rng.below(rows as u64) as usize * cols + c)
                .collect()
        }
    };
    positions.sort_unstable();

    let mut out = y.clone();
    let mut log = Vec::with_capacity(positions.len());
    for idx in positions {
        let mag = if cfg.signed_mix && rng.next() & 1 == 1 {
            cfg.mag.wrapping_neg()
        } else {
            cfg.mag
        };
        let before = out.data()[idx];
        let after = before.wrapping_add(mag);
        if after == before {
            continue;
        }
        out.data_mut()[idx] = after;
        log.push(ErrorEvent {
            row: idx / cols,
            col: idx % cols,
            before,
            after,
            flipped: 0,
        });
    }
    Ok((out, EventLog(log)))
}

/// First `k` entries of a Fisher-Yates shuffle of `0..n`.
fn partial_shuffle(n: usize, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gemm::checksum;
    use crate::matrix::Side;

    fn ramp(rows: usize, cols: usize) -> AccumMatrix {
        AccumMatrix::new(rows, cols, (0..(rows * cols) as i32).map(|v| v * 37 - 500).collect())
            .unwrap()
    }

    #[test]
    fn zero_ber_is_identity() {
        let y = ramp(4, 5);
        let (out, log) = sample_bitflips(&y, &FaultConfig::ber(0.0, BitWindow::default()), 9).unwrap();
        assert_eq!(out, y);
        assert!(log.is_empty());
    }

    #[test]
    fn certain_flip_on_bit_30() {
        let y = ramp(3, 3);
        let cfg = FaultConfig::ber(1.0, BitWindow::new(30, 30).unwrap());
        let (out, log) = sample_bitflips(&y, &cfg, 1).unwrap();
        assert_eq!(log.len(), 9);
        for (a, b) in out.data().iter().zip(y.data()) {
            assert_eq!(*a, b ^ (1 << 30));
        }
        for e in &log {
            assert_eq!(e.flipped_bits().collect::<Vec<_>>(), vec![30]);
        }
    }

    #[test]
    fn ber_mode_event_invariants() {
        let y = ramp(8, 8);
        let cfg = FaultConfig::ber(0.05, BitWindow::new(0, 31).unwrap());
        let (out, log) = sample_bitflips(&y, &cfg, 77).unwrap();
        assert!(!log.is_empty());
        for e in &log {
            assert_ne!(e.before, e.after);
            assert_eq!(e.after, ((e.before as u32) ^ e.flipped) as i32);
        }
        assert_eq!(log.replay(&y).unwrap(), out);
    }

    #[test]
    fn invalid_ber_rejected() {
        let cfg = FaultConfig::ber(1.5, BitWindow::default());
        assert!(sample_bitflips(&ramp(2, 2), &cfg, 0).is_err());
        assert!(BitWindow::new(10, 5).is_err());
        assert!(BitWindow::new(0, 32).is_err());
    }

    #[test]
    fn uniform_three_errors_on_zero_matrix() {
        let y = AccumMatrix::zeros(4, 4);
        let mag = 1 << 20;
        let (out, log) = inject_uniform(&y, &FaultConfig::uniform(mag, 3), 5).unwrap();
        assert_eq!(out.data().iter().filter(|&&v| v == mag).count(), 3);
        assert_eq!(out.data().iter().filter(|&&v| v == 0).count(), 13);
        assert_eq!(log.len(), 3);
        let dev: i64 = checksum(&out, Side::Row).as_slice().iter().sum();
        assert_eq!(dev, 3 * i64::from(mag));
    }

    #[test]
    fn uniform_edge_frequencies() {
        let y = ramp(4, 4);
        let (out, log) = inject_uniform(&y, &FaultConfig::uniform(123, 0), 5).unwrap();
        assert_eq!(out, y);
        assert!(log.is_empty());

        let (out, _) = inject_uniform(&y, &FaultConfig::uniform(1, 16), 5).unwrap();
        for (a, b) in out.data().iter().zip(y.data()) {
            assert_eq!(*a, b + 1);
        }

        let err = inject_uniform(&y, &FaultConfig::uniform(1, 17), 5).unwrap_err();
        assert!(matches!(err, Error::FreqTooLarge { freq: 17, slots: 16 }));
    }

    #[test]
    fn distinct_columns_placement() {
        let y = AccumMatrix::zeros(6, 10);
        let cfg = FaultConfig::uniform(7, 10).with_placement(Placement::DistinctColumns);
        let (_, log) = inject_uniform(&y, &cfg, 11).unwrap();
        let mut cols: Vec<_> = log.iter().map(|e| e.col).collect();
        cols.sort_unstable();
        assert_eq!(cols, (0..10).collect::<Vec<_>>());
        let too_many = FaultConfig::uniform(7, 11).with_placement(Placement::DistinctColumns);
        assert!(inject_uniform(&y, &too_many, 11).is_err());
    }

    #[test]
    fn uniform_wraps_at_32_bits() {
        let y = AccumMatrix::from_rows(&[[i32::MAX]]).unwrap();
        let (out, log) = inject_uniform(&y, &FaultConfig::uniform(1, 1), 0).unwrap();
        assert_eq!(out.get(0, 0), i32::MIN);
        assert_eq!(log.events()[0].delta(), 1 - (1i64 << 32));
    }

    #[test]
    fn signed_mix_produces_both_signs() {
        let y = AccumMatrix::zeros(8, 8);
        let mut cfg = FaultConfig::uniform(100, 64);
        cfg.signed_mix = true;
        let (out, _) = inject_uniform(&y, &cfg, 3).unwrap();
        assert!(out.data().contains(&100));
        assert!(out.data().contains(&-100));
    }

    #[test]
    fn replay_rejects_mismatched_log() {
        let y = ramp(2, 2);
        let (_, log) = inject_uniform(&y, &FaultConfig::uniform(5, 2), 1).unwrap();
        assert!(log.replay(&AccumMatrix::zeros(2, 2)).is_err());
        assert!(log.replay(&AccumMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn mode_mismatch_rejected() {
        let y = ramp(2, 2);
        assert!(inject_uniform(&y, &FaultConfig::ber(0.1, BitWindow::default()), 0).is_err());
        assert!(sample_bitflips(&y, &FaultConfig::uniform(1, 1), 0).is_err());
    }
}
