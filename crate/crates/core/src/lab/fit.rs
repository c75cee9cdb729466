//! Fitting the critical region `(a, b, theta_freq)` from a quality grid.
//!
//! `theta_freq` is the largest frequency at or below which every cell is
//! acceptable. The inclined boundary `log2 mag = b - (a - 1) log2 MSD` is
//! fitted on the boundary cells above `theta_freq` (acceptable cells with an
//! unacceptable 4-neighbor). With equal errors `MSD = freq * mag`, so the
//! boundary is the line `log2 mag = b/a - ((a - 1)/a) log2 freq`. The least
//! squares fit runs in `(log2 freq, log2 mag)`, where only the magnitude
//! coordinate carries grid quantization, and is mapped back to `(a, b)`.

use crate::detect::CriticalRegionParams;
use crate::error::{Error, Result};
use crate::lab::grid::QualityGrid;

/// Smallest slope reported; the region must have `a > 1`.
pub const MIN_SLOPE: f64 = 1.0 + 1e-6;
/// Largest slope reported for nearly vertical boundaries.
pub const MAX_SLOPE: f64 = 1e6;

/// Boundary points `(log2 freq, log2 mag)` on the inclined segment.
pub fn boundary_points(grid: &QualityGrid, theta_freq: usize) -> Vec<(f64, f64)> {
    let (nf, nm) = grid.shape();
    let mut pts = Vec::new();
    for fi in 0..nf {
        let freq = grid.freq_axis[fi];
        if freq <= theta_freq || freq == 0 {
            continue;
        }
        for mi in 0..nm {
            if !grid.cell(fi, mi).acceptable {
                continue;
            }
            let neighbors = [
                (fi.checked_sub(1), Some(mi)),
                (Some(fi + 1).filter(|&i| i < nf), Some(mi)),
                (Some(fi), mi.checked_sub(1)),
                (Some(fi), Some(mi + 1).filter(|&j| j < nm)),
            ];
            let on_boundary = neighbors.iter().any(|n| match *n {
                (Some(i), Some(j)) => !grid.cell(i, j).acceptable,
                _ => false,
            });
            if on_boundary {
                pts.push(((freq as f64).log2(), grid.mag_axis[mi]));
            }
        }
    }
    pts
}

/// Largest axis frequency with every cell at or below it acceptable; 0 when
/// even the lowest row has an unacceptable cell.
pub fn fit_theta_freq(grid: &QualityGrid) -> usize {
    let (nf, nm) = grid.shape();
    let mut order: Vec<usize> = (0..nf).collect();
    order.sort_by_key(|&i| grid.freq_axis[i]);
    let mut theta = 0;
    for fi in order {
        if (0..nm).all(|mi| grid.cell(fi, mi).acceptable) {
            theta = grid.freq_axis[fi];
        } else {
            break;
        }
    }
    theta
}

pub fn fit_critical_region(grid: &QualityGrid) -> Result<CriticalRegionParams> {
    let any_ok = grid.cells().iter().any(|c| c.acceptable);
    let any_bad = grid.cells().iter().any(|c| !c.acceptable);
    if !(any_ok && any_bad) {
        return Err(Error::NoBoundary(if any_ok {
            "every cell is acceptable".into()
        } else {
            "no cell is acceptable".into()
        }));
    }

    let theta_freq = fit_theta_freq(grid);
    let pts = boundary_points(grid, theta_freq);
    let theta_freq_u32 = u32::try_from(theta_freq)
        .map_err(|_| Error::InvalidConfig(format!("theta_freq {theta_freq} too large")))?;

    if pts.is_empty() {
        // Pure horizontal boundary: every magnitude on the grid is significant.
        let floor = grid.mag_axis.iter().copied().fold(f64::INFINITY, f64::min);
        return CriticalRegionParams::new(MIN_SLOPE, floor - 1.0, theta_freq_u32);
    }

    let n = pts.len() as f64;
    let mean_u = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_u).powi(2)).sum();
    if sxx <= f64::EPSILON {
        return Err(Error::NoBoundary(format!(
            "inclined boundary spans a single frequency ({} points); widen the frequency axis",
            pts.len()
        )));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_u) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_u;

    // slope = -(a - 1)/a, intercept = b/a
    let a = if slope <= -1.0 {
        MAX_SLOPE
    } else {
        (1.0 / (1.0 + slope)).clamp(MIN_SLOPE, MAX_SLOPE)
    };
    CriticalRegionParams::new(a, intercept * a, theta_freq_u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_grid(a: f64, b: f64, theta: usize) -> QualityGrid {
        let mags: Vec<f64> = (8..24).map(f64::from).collect();
        let freqs: Vec<usize> = (0..16).map(|i| 1usize << i).collect();
        QualityGrid::from_predicate(mags, freqs, |f, m| {
            let msd = (f as f64).log2() + m;
            !(f > theta && m > b - (a - 1.0) * msd)
        })
    }

    #[test]
    fn recovers_planted_parameters() {
        let p = fit_critical_region(&planted_grid(2.0, 40.0, 4)).unwrap();
        assert_eq!(p.theta_freq, 4);
        assert!((p.a - 2.0).abs() <= 0.1, "{p:?}");
        assert!((p.b - 40.0).abs() <= 1.0, "{p:?}");
    }

    #[test]
    fn horizontal_boundary_only() {
        let mags: Vec<f64> = (8..24).map(f64::from).collect();
        let freqs: Vec<usize> = vec![1, 2, 4, 8, 16, 32];
        let g = QualityGrid::from_predicate(mags, freqs, |f, _| f <= 8);
        let p = fit_critical_region(&g).unwrap();
        assert_eq!(p.theta_freq, 8);
        // every grid magnitude exceeds the fitted threshold
        assert!(p.theta_mag(1 << 40) < 8.0);
    }

    #[test]
    fn degenerate_grids_rejected() {
        let mags: Vec<f64> = (8..24).map(f64::from).collect();
        let single_row = QualityGrid::from_predicate(mags.clone(), vec![8], |_, _| true);
        assert!(matches!(fit_critical_region(&single_row), Err(Error::NoBoundary(_))));
        let all_bad = QualityGrid::from_predicate(mags.clone(), vec![1, 2], |_, _| false);
        assert!(matches!(fit_critical_region(&all_bad), Err(Error::NoBoundary(_))));
        let one_freq = QualityGrid::from_predicate(mags, vec![8], |_, m| m < 12.0);
        assert!(matches!(fit_critical_region(&one_freq), Err(Error::NoBoundary(_))));
    }

    #[test]
    fn theta_freq_zero_when_first_row_fails() {
        let mags: Vec<f64> = (8..24).map(f64::from).collect();
        let g = QualityGrid::from_predicate(mags, vec![1, 2, 4, 8, 16], |f, m| {
            m + (f as f64).log2() <= 20.0
        });
        assert_eq!(fit_theta_freq(&g), 0);
        let p = fit_critical_region(&g).unwrap();
        assert_eq!(p.theta_freq, 0);
        assert!(p.a > 1.0);
    }

    #[test]
    fn refit_is_stable() {
        let first = fit_critical_region(&planted_grid(2.0, 40.0, 4)).unwrap();
        let second = fit_critical_region(&planted_grid(first.a, first.b, first.theta_freq as usize)).unwrap();
        assert_eq!(second.theta_freq, first.theta_freq);
        assert!((second.a - first.a).abs() <= 0.1);
        assert!((second.b - first.b).abs() <= 1.0);
    }
}
