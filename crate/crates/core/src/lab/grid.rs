//! Quality sweeps over (error magnitude, error frequency).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::CriticalRegionParams;
use crate::error::{Error, Result};
use crate::fault::{inject_uniform, EventLog, FaultConfig, Placement};
use crate::gemm::gemm;
use crate::lab::norm::{normalize, relative_changes, NormKind};
use crate::matrix::AccumMatrix;
use crate::report::fmt_real;
use crate::rng::{derive_seed, SplitMix64};
use crate::workload::InputDistribution;

/// A workload whose quality can be scored after its GEMM output is corrupted.
///
/// `degradation` returns a non-negative number where larger is worse; a cell
/// is acceptable when its mean degradation is at most the grid's epsilon. It
/// must return 0 for an uncorrupted output.
pub trait QualityOracle: Sync {
    fn clean_output(&self) -> &AccumMatrix;
    fn degradation(&self, corrupted: &AccumMatrix, events: &EventLog) -> Result<f64>;
}

/// Step function over the planted critical region: 1 when the injected error
/// set is critical under `params`, else 0.
#[derive(Debug, Clone)]
pub struct PlantedStepOracle {
    params: CriticalRegionParams,
    clean: AccumMatrix,
}

impl PlantedStepOracle {
    /// `rows x cols` must cover the largest frequency on the grid.
    pub fn new(params: CriticalRegionParams, rows: usize, cols: usize) -> Self {
        Self {
            params,
            clean: AccumMatrix::zeros(rows, cols),
        }
    }

    pub fn params(&self) -> &CriticalRegionParams {
        &self.params
    }
}

impl QualityOracle for PlantedStepOracle {
    fn clean_output(&self) -> &AccumMatrix {
        &self.clean
    }

    fn degradation(&self, _corrupted: &AccumMatrix, events: &EventLog) -> Result<f64> {
        Ok(if self.params.events_critical(events) { 1.0 } else { 0.0 })
    }
}

/// A small GEMM followed by row-wise normalization. Degradation is the
/// fraction of normalized outputs whose relative change exceeds 1%.
#[derive(Debug, Clone)]
pub struct NormPipelineOracle {
    kind: NormKind,
    clean: AccumMatrix,
    clean_norm: Vec<Vec<f64>>,
}

impl NormPipelineOracle {
    pub fn new(kind: NormKind, rows: usize, k: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        let dist = InputDistribution::outlier_default();
        let w = dist.matrix(rows, k, &mut rng);
        let x = dist.matrix(k, cols, &mut rng);
        let clean = gemm(&w, &x)?;
        let clean_norm = rows_normalized(kind, &clean);
        Ok(Self {
            kind,
            clean,
            clean_norm,
        })
    }
}

fn rows_normalized(kind: NormKind, y: &AccumMatrix) -> Vec<Vec<f64>> {
    (0..y.rows())
        .map(|r| {
            let h: Vec<f64> = y.row(r).iter().map(|&v| f64::from(v)).collect();
            normalize(kind, &h)
        })
        .collect()
}

impl QualityOracle for NormPipelineOracle {
    fn clean_output(&self) -> &AccumMatrix {
        &self.clean
    }

    fn degradation(&self, corrupted: &AccumMatrix, _events: &EventLog) -> Result<f64> {
        if corrupted.rows() != self.clean.rows() || corrupted.cols() != self.clean.cols() {
            return Err(Error::Oracle("corrupted output has the wrong shape".into()));
        }
        let after = rows_normalized(self.kind, corrupted);
        let total = corrupted.len().max(1) as f64;
        let changed = self
            .clean_norm
            .iter()
            .zip(&after)
            .flat_map(|(b, a)| relative_changes(b, a))
            .filter(|&r| r > super::norm::CHANGE_THRESHOLD)
            .count();
        Ok(changed as f64 / total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// log2 of each injected magnitude; the magnitude is `round(2^x)`.
    pub mag_axis: Vec<f64>,
    pub freq_axis: Vec<usize>,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub placement: Placement,
}

impl GridSpec {
    /// 16 x 16 grid: frequencies `2^0 .. 2^15`, magnitudes `2^8 .. 2^23`.
    pub fn power_of_two_16() -> Self {
        Self {
            mag_axis: (8..24).map(f64::from).collect(),
            freq_axis: (0..16).map(|i| 1usize << i).collect(),
            epsilon: 0.5,
            trials: 32,
            seed: 0,
            placement: Placement::Anywhere,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub quality: f64,
    pub acceptable: bool,
}

/// Mean degradation per (freq, mag) cell, row-major with frequency as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityGrid {
    pub mag_axis: Vec<f64>,
    pub freq_axis: Vec<usize>,
    pub epsilon: f64,
    cells: Vec<GridCell>,
}

impl QualityGrid {
    pub fn from_cells(
        mag_axis: Vec<f64>,
        freq_axis: Vec<usize>,
        epsilon: f64,
        cells: Vec<GridCell>,
    ) -> Result<Self> {
        if cells.len() != mag_axis.len() * freq_axis.len() {
            return Err(Error::InvalidConfig(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                freq_axis.len(),
                mag_axis.len()
            )));
        }
        Ok(Self {
            mag_axis,
            freq_axis,
            epsilon,
            cells,
        })
    }

    /// Grid whose acceptability is given directly by a predicate.
    pub fn from_predicate(
        mag_axis: Vec<f64>,
        freq_axis: Vec<usize>,
        acceptable: impl Fn(usize, f64) -> bool,
    ) -> Self {
        let cells = freq_axis
            .iter()
            .flat_map(|&f| mag_axis.iter().map(move |&m| (f, m)))
            .map(|(f, m)| {
                let ok = acceptable(f, m);
                GridCell {
                    quality: if ok { 0.0 } else { 1.0 },
                    acceptable: ok,
                }
            })
            .collect();
        Self {
            mag_axis,
            freq_axis,
            epsilon: 0.5,
            cells,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.freq_axis.len(), self.mag_axis.len())
    }

    pub fn cell(&self, freq_idx: usize, mag_idx: usize) -> &GridCell {
        &self.cells[freq_idx * self.mag_axis.len() + mag_idx]
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    /// CSV with header `freq,mag_log2,quality,acceptable`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq", "mag_log2", "quality", "acceptable"])?;
        for (fi, f) in self.freq_axis.iter().enumerate() {
            for (mi, m) in self.mag_axis.iter().enumerate() {
                let c = self.cell(fi, mi);
                wtr.write_record([
                    f.to_string(),
                    fmt_real(*m),
                    fmt_real(c.quality),
                    c.acceptable.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn magnitude(mag_log2: f64) -> Result<i32> {
    let m = 2f64.powf(mag_log2).round();
    if !(1.0..=f64::from(i32::MAX)).contains(&m) {
        return Err(Error::InvalidConfig(format!(
            "magnitude 2^{mag_log2} does not fit a signed 32-bit error"
        )));
    }
    Ok(m as i32)
}

/// Runs `trials` uniform injections per cell through `oracle` and averages
/// the degradation. Cells are independent and evaluated in parallel.
pub fn quality_grid<O: QualityOracle + ?Sized>(oracle: &O, spec: &GridSpec) -> Result<QualityGrid> {
    if spec.mag_axis.is_empty() || spec.freq_axis.is_empty() {
        return Err(Error::InvalidConfig("grid axes must be non-empty".into()));
    }
    if spec.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if spec.epsilon.is_nan() || spec.epsilon < 0.0 {
        return Err(Error::InvalidConfig(format!("epsilon must be >= 0, got {}", spec.epsilon)));
    }
    let mags = spec
        .mag_axis
        .iter()
        .map(|&m| magnitude(m))
        .collect::<Result<Vec<_>>>()?;

    let n_mag = spec.mag_axis.len();
    let clean = oracle.clean_output();
    let cells = (0..spec.freq_axis.len() * n_mag)
        .into_par_iter()
        .map(|idx| {
            let (fi, mi) = (idx / n_mag, idx % n_mag);
            let freq = spec.freq_axis[fi];
            let cfg = FaultConfig::uniform(mags[mi], freq).with_placement(spec.placement);
            let mut total = 0.0;
            for t in 0..spec.trials {
                let seed = derive_seed(spec.seed, t as u64, idx as u64);
                let q = inject_uniform(clean, &cfg, seed)
                    .and_then(|(out, log)| oracle.degradation(&out, &log))
                    .map_err(|e| Error::OracleCell {
                        freq,
                        mag_log2: spec.mag_axis[mi],
                        source: Box::new(e),
                    })?;
                total += q;
            }
            let quality = total / spec.trials as f64;
            Ok(GridCell {
                quality,
                acceptable: quality <= spec.epsilon,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    QualityGrid::from_cells(spec.mag_axis.clone(), spec.freq_axis.clone(), spec.epsilon, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted() -> CriticalRegionParams {
        CriticalRegionParams::new(2.0, 40.0, 4).unwrap()
    }

    fn small_spec() -> GridSpec {
        GridSpec {
            mag_axis: vec![10.0, 16.0, 22.0, 28.0],
            freq_axis: vec![1, 4, 8, 32],
            epsilon: 0.5,
            trials: 2,
            seed: 3,
            placement: Placement::Anywhere,
        }
    }

    #[test]
    fn infinite_epsilon_accepts_everything() {
        let oracle = PlantedStepOracle::new(planted(), 8, 8);
        let spec = GridSpec {
            epsilon: f64::INFINITY,
            ..small_spec()
        };
        let g = quality_grid(&oracle, &spec).unwrap();
        assert!(g.cells().iter().all(|c| c.acceptable));
    }

    #[test]
    fn zero_frequency_row_is_acceptable() {
        let oracle = NormPipelineOracle::new(NormKind::LayerNorm, 4, 16, 16, 1).unwrap();
        let spec = GridSpec {
            freq_axis: vec![0],
            epsilon: 0.0,
            ..small_spec()
        };
        let g = quality_grid(&oracle, &spec).unwrap();
        assert!(g.cells().iter().all(|c| c.acceptable && c.quality == 0.0));
    }

    #[test]
    fn planted_pattern_reproduced_exactly() {
        let p = planted();
        let oracle = PlantedStepOracle::new(p, 8, 8);
        let g = quality_grid(&oracle, &small_spec()).unwrap();
        for (fi, &f) in g.freq_axis.iter().enumerate() {
            for (mi, &m) in g.mag_axis.iter().enumerate() {
                let mag = 2f64.powf(m);
                let expected = !(f > 4 && m > 40.0 - (f as f64 * mag).log2());
                assert_eq!(g.cell(fi, mi).acceptable, expected, "freq={f} mag=2^{m}");
            }
        }
    }

    #[test]
    fn grid_is_deterministic() {
        let oracle = NormPipelineOracle::new(NormKind::RmsNorm, 4, 16, 16, 5).unwrap();
        let a = quality_grid(&oracle, &small_spec()).unwrap();
        let b = quality_grid(&oracle, &small_spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn norm_oracle_degrades_with_magnitude() {
        let oracle = NormPipelineOracle::new(NormKind::LayerNorm, 4, 16, 16, 5).unwrap();
        let spec = GridSpec {
            mag_axis: vec![0.0, 2.0, 4.0, 10.0],
            ..small_spec()
        };
        let g = quality_grid(&oracle, &spec).unwrap();
        // one error: larger magnitudes disturb at least as many outputs
        let row: Vec<f64> = (0..4).map(|mi| g.cell(0, mi).quality).collect();
        assert!(row.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{row:?}");
        assert!(row[3] > row[0], "{row:?}");
    }

    #[test]
    fn oracle_errors_carry_cell_coordinates() {
        let oracle = PlantedStepOracle::new(planted(), 2, 2);
        let err = quality_grid(&oracle, &small_spec()).unwrap_err();
        match err {
            Error::OracleCell { freq, .. } => assert!(freq == 8 || freq == 32),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_specs_rejected() {
        let oracle = PlantedStepOracle::new(planted(), 8, 8);
        let mut s = small_spec();
        s.trials = 0;
        assert!(quality_grid(&oracle, &s).is_err());
        let mut s = small_spec();
        s.mag_axis.clear();
        assert!(quality_grid(&oracle, &s).is_err());
        let mut s = small_spec();
        s.mag_axis = vec![40.0];
        assert!(quality_grid(&oracle, &s).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = QualityGrid::from_predicate(vec![1.0, 2.5], vec![0, 3], |f, _| f == 0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "freq,mag_log2,quality,acceptable\n0,1,0,true\n0,2.5,0,true\n3,1,1,false\n3,2.5,1,false\n"
        );
    }
}
