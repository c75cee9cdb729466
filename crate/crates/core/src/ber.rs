//! Voltage to bit-error-rate lookup.
//!
//! Tables are CSV files with a `voltage,ber` header, voltages strictly
//! descending and BER non-decreasing. Between rows the BER is interpolated
//! linearly in `(voltage, log10 BER)`; zero entries take a floor of 1e-15 in
//! the log domain and only report exactly zero on their own row.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-domain stand-in for a zero BER.
pub const BER_LOG_FLOOR: f64 = 1e-15;

/// Voltages closer than this are treated as the same table row.
const VOLTAGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub voltage: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<BerPoint>", into = "Vec<BerPoint>")]
pub struct VoltageBerTable {
    points: Vec<BerPoint>,
}

impl VoltageBerTable {
    pub fn new(points: Vec<BerPoint>) -> Result<Self> {
        Self::validate(&points, |i| i + 1)?;
        Ok(Self { points })
    }

    fn validate(points: &[BerPoint], line_of: impl Fn(usize) -> usize) -> Result<()> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("voltage/BER table is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            let bad = |message: String| Error::Parse {
                line: line_of(i),
                message,
            };
            if !(p.voltage.is_finite() && p.voltage > 0.0) {
                return Err(bad(format!("voltage must be positive, got {}", p.voltage)));
            }
            if !(0.0..=1.0).contains(&p.ber) {
                return Err(bad(format!("ber must lie in [0, 1], got {}", p.ber)));
            }
            if i > 0 {
                let prev = &points[i - 1];
                if p.voltage >= prev.voltage {
                    return Err(bad(format!(
                        "voltages must be strictly descending ({} after {})",
                        p.voltage, prev.voltage
                    )));
                }
                if p.ber < prev.ber {
                    return Err(bad(format!(
                        "ber must be non-decreasing as voltage falls ({} after {})",
                        p.ber, prev.ber
                    )));
                }
            }
        }
        Ok(())
    }

    /// 0.90 V down to 0.60 V in 10 mV steps, BER log-linear from 1e-12 to 1e-4.
    pub fn default_synthetic() -> Self {
        let steps = 30;
        let points = (0..=steps)
            .map(|i| {
                let t = f64::from(i) / f64::from(steps);
                BerPoint {
                    voltage: round_mv(0.90 - 0.30 * t),
                    ber: 10f64.powf(-12.0 + 8.0 * t),
                }
            })
            .collect();
        Self { points }
    }

    pub fn from_csv_reader<R: Read>(rdr: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["voltage", "ber"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must be `voltage,ber`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut points = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize, name: &str| -> Result<f64> {
                let raw = rec.get(i).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing {name}"),
                })?;
                raw.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad {name} {raw:?}: {e}"),
                })
            };
            points.push(BerPoint {
                voltage: field(0, "voltage")?,
                ber: field(1, "ber")?,
            });
            lines.push(line);
        }
        Self::validate(&points, |i| lines[i])?;
        Ok(Self { points })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("voltage,ber\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\n", p.voltage, p.ber));
        }
        s
    }

    pub fn points(&self) -> &[BerPoint] {
        &self.points
    }

    pub fn max_voltage(&self) -> f64 {
        self.points[0].voltage
    }

    pub fn min_voltage(&self) -> f64 {
        self.points[self.points.len() - 1].voltage
    }

    /// BER at voltage `v`; exact at table rows, log-linear between them.
    pub fn ber_at(&self, v: f64) -> Result<f64> {
        let (lo, hi) = (self.min_voltage(), self.max_voltage());
        if !(v >= lo - VOLTAGE_EPS && v <= hi + VOLTAGE_EPS) {
            return Err(Error::VoltageOutOfRange {
                voltage: v,
                min: lo,
                max: hi,
            });
        }
        if let Some(p) = self
            .points
            .iter()
            .find(|p| (p.voltage - v).abs() <= VOLTAGE_EPS)
        {
            return Ok(p.ber);
        }
        // points[i].voltage > v > points[i + 1].voltage
        let i = self
            .points
            .windows(2)
            .position(|w| w[0].voltage > v && v > w[1].voltage)
            .expect("v lies strictly inside the span");
        let (upper, lower) = (&self.points[i], &self.points[i + 1]);
        let t = (upper.voltage - v) / (upper.voltage - lower.voltage);
        let log_hi = upper.ber.max(BER_LOG_FLOOR).log10();
        let log_lo = lower.ber.max(BER_LOG_FLOOR).log10();
        Ok(10f64.powf(log_hi + t * (log_lo - log_hi)))
    }
}

impl TryFrom<Vec<BerPoint>> for VoltageBerTable {
    type Error = Error;
    fn try_from(points: Vec<BerPoint>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<VoltageBerTable> for Vec<BerPoint> {
    fn from(t: VoltageBerTable) -> Self {
        t.points
    }
}

/// Rounds to the nearest millivolt so generated grids compare exactly.
pub fn round_mv(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}
