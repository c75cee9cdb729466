//! Built-in oracle suite: each check runs randomized cases against an
//! independent reference and reports its case count.

use realm_core::lab::{norm_amplification, NormKind, NormPipelineConfig};
use realm_core::{
    checksum, detect_classical, detect_msd, detect_statistical, gemm, inject, inject_uniform,
    predicted_output_checksum, statistical_unit, theta_mag, AccumMatrix, ArrayConfig, BitWindow,
    ChecksumPair, CriticalRegionParams, DataflowKind, FaultConfig, InputDistribution, Placement,
    QuantMatrix, Side, SplitMix64, StatUnitConfig, SystolicArray, VoltageBerTable,
};

use crate::error::{CliError, CliResult};
use crate::output::Table;
use crate::Ctx;

type CheckFn = fn(&mut SplitMix64, usize, bool) -> Result<usize, String>;

/// Name and body of every check; the body returns the number of cases run.
const CHECKS: &[(&str, CheckFn)] = &[
    ("gemm_reference", gemm_reference),
    ("checksum_identity", checksum_identity),
    ("dataflow_equivalence", dataflow_equivalence),
    ("event_replay", event_replay),
    ("uniform_msd", uniform_msd),
    ("detector_conservativeness", detector_conservativeness),
    ("stat_unit_equivalence", stat_unit_equivalence),
    ("theta_mag_analytics", theta_mag_analytics),
    ("ber_table_monotone", ber_table_monotone),
    ("norm_amplification", norm_amplification_check),
];

pub fn run(ctx: &Ctx, cases: Option<usize>, corrupt: Option<&str>) -> CliResult<()> {
    let cases = cases.unwrap_or(ctx.cfg().verify.min_cases);
    if cases == 0 {
        return Err(CliError::Config("--cases must be at least 1".into()));
    }
    if let Some(name) = corrupt {
        if !CHECKS.iter().any(|(n, _)| *n == name) {
            let names: Vec<&str> = CHECKS.iter().map(|(n, _)| *n).collect();
            return Err(CliError::Config(format!(
                "unknown check {name:?}; known checks: {}",
                names.join(", ")
            )));
        }
    }

    let mut table = Table::new("verify", &["check", "cases", "status", "detail"]);
    let mut failed = Vec::new();
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        let mut rng = SplitMix64::new(realm_core::derive_seed(ctx.cfg().seed, i as u64, 0));
        let result = check(&mut rng, cases, corrupt == Some(*name));
        let (n, status, detail) = match result {
            Ok(n) if n >= cases => (n, "pass", String::new()),
            Ok(n) => (n, "fail", format!("only {n} of {cases} cases ran")),
            Err(msg) => (0, "fail", msg),
        };
        if status == "fail" {
            failed.push(*name);
        }
        table.push(vec![(*name).into(), n.into(), status.into(), detail.into()]);
    }

    print!("{}", table.render());
    if ctx.out_explicit() {
        ctx.output("verify")?.write_table(&table)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}

fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> QuantMatrix {
    InputDistribution::Uniform.matrix(rows, cols, rng)
}

fn random_shape(rng: &mut SplitMix64, max: u64) -> (usize, usize, usize) {
    let mut d = || 1 + rng.below(max) as usize;
    (d(), d(), d())
}

fn tamper(y: &mut AccumMatrix) {
    y.data_mut()[0] ^= 1;
}

fn naive_gemm(w: &QuantMatrix, x: &QuantMatrix) -> Vec<i64> {
    let mut out = vec![0i64; w.rows() * x.cols()];
    for i in 0..w.rows() {
        for j in 0..x.cols() {
            out[i * x.cols() + j] = (0..w.cols())
                .map(|p| i64::from(w.get(i, p)) * i64::from(x.get(p, j)))
                .sum();
        }
    }
    out
}

fn gemm_reference(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    for case in 0..cases {
        let (m, k, n) = random_shape(rng, 24);
        let (w, x) = (random_matrix(rng, m, k), random_matrix(rng, k, n));
        let mut y = gemm(&w, &x).map_err(|e| e.to_string())?;
        if corrupt && case == 0 {
            tamper(&mut y);
        }
        let got: Vec<i64> = y.data().iter().map(|&v| i64::from(v)).collect();
        if got != naive_gemm(&w, &x) {
            return Err(format!("case {case}: {m}x{k}x{n} product differs from the triple loop"));
        }
    }
    Ok(cases)
}

fn checksum_identity(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    for case in 0..cases {
        let (m, k, n) = random_shape(rng, 64);
        let (w, x) = (random_matrix(rng, m, k), random_matrix(rng, k, n));
        let mut y = gemm(&w, &x).map_err(|e| e.to_string())?;
        if corrupt && case == 0 {
            tamper(&mut y);
        }
        let predicted = predicted_output_checksum(&w, &x).map_err(|e| e.to_string())?;
        if checksum(&y, Side::Row) != predicted {
            return Err(format!("case {case}: e^T Y != (e^T W) X for {m}x{k}x{n}"));
        }
    }
    Ok(cases)
}

fn dataflow_equivalence(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    let stat = StatUnitConfig::exact(CriticalRegionParams::new(2.0, 40.0, 4).map_err(|e| e.to_string())?);
    for case in 0..cases {
        let (m, k, n) = random_shape(rng, 20);
        let (w, x) = (random_matrix(rng, m, k), random_matrix(rng, k, n));
        let tile = 1 + rng.below(8) as usize;
        let ber = rng.unit_f64() * 0.02;
        let fault = FaultConfig::ber(ber, BitWindow::default()).with_seed(rng.next());
        let sim = |dataflow| {
            let cfg = ArrayConfig {
                array_rows: tile,
                array_cols: tile,
                dataflow,
                tiling: true,
            };
            SystolicArray::new(cfg)
                .and_then(|a| a.run(&w, &x, Some(&fault), &stat))
                .map_err(|e| e.to_string())
        };
        let ws = sim(DataflowKind::WeightStationary)?;
        let mut os = sim(DataflowKind::OutputStationary)?;
        if corrupt && case == 0 {
            tamper(&mut os.output);
        }
        if ws.output != os.output || ws.predicted != os.predicted || ws.observed != os.observed || ws.verdict != os.verdict {
            return Err(format!("case {case}: WS and OS disagree on {m}x{k}x{n}, tile {tile}"));
        }
    }
    Ok(cases)
}

fn event_replay(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    for case in 0..cases {
        let (m, k, n) = random_shape(rng, 16);
        let y = gemm(&random_matrix(rng, m, k), &random_matrix(rng, k, n)).map_err(|e| e.to_string())?;
        let cfg = FaultConfig::ber(rng.unit_f64() * 0.05, BitWindow::new(0, 31).map_err(|e| e.to_string())?);
        let (mut out, log) = inject(&y, &cfg, rng.next()).map_err(|e| e.to_string())?;
        if corrupt && case == 0 {
            tamper(&mut out);
        }
        let replayed = log.replay(&y).map_err(|e| e.to_string())?;
        let changed = y.data().iter().zip(out.data()).filter(|(a, b)| a != b).count();
        if replayed != out || changed != log.len() {
            return Err(format!("case {case}: event log does not reproduce the corrupted output"));
        }
    }
    Ok(cases)
}

fn uniform_msd(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    let (rows, cols) = (4, 128);
    for case in 0..cases {
        let y = AccumMatrix::zeros(rows, cols);
        let mag = 1i32 << rng.below(20);
        let freq = 1 + rng.below(cols as u64) as usize;
        let cfg = FaultConfig::uniform(mag, freq).with_placement(Placement::DistinctColumns);
        let (mut out, _) = inject_uniform(&y, &cfg, rng.next()).map_err(|e| e.to_string())?;
        if corrupt && case == 0 {
            tamper(&mut out);
        }
        let pair = ChecksumPair::new(checksum(&y, Side::Row), checksum(&out, Side::Row)).map_err(|e| e.to_string())?;
        if u128::from(pair.msd()) != freq as u128 * mag as u128 {
            return Err(format!("case {case}: MSD {} != {freq} * {mag}", pair.msd()));
        }
    }
    Ok(cases)
}

fn random_diffs(rng: &mut SplitMix64) -> Vec<i64> {
    let len = 1 + rng.below(64) as usize;
    (0..len)
        .map(|_| match rng.below(4) {
            0 | 1 => 0,
            2 => {
                let v = 1i64 << rng.below(36);
                if rng.next() & 1 == 1 {
                    -v
                } else {
                    v
                }
            }
            _ => rng.below(1 << 20) as i64 - (1 << 19),
        })
        .collect()
}

fn random_params(rng: &mut SplitMix64) -> Result<CriticalRegionParams, String> {
    let a = 1.01 + rng.unit_f64() * 3.0;
    let b = rng.unit_f64() * 60.0;
    let t = rng.below(16) as u32;
    CriticalRegionParams::new(a, b, t).map_err(|e| e.to_string())
}

fn detector_conservativeness(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    for case in 0..cases {
        let d = random_diffs(rng);
        let p = random_params(rng)?;
        let cs = ChecksumPair::from_diff(&d);
        let mut classical = detect_classical(&cs).recover();
        if corrupt && case == 0 {
            classical = false;
        }
        let stat = detect_statistical(&cs, &p).recover();
        let msd = detect_msd(&cs, 0).recover();
        let any = d.iter().any(|&v| v != 0);
        if (stat && !classical) || (msd && !classical) || classical != any {
            return Err(format!("case {case}: a detector recovered where classical passed"));
        }
    }
    Ok(cases)
}

fn stat_unit_equivalence(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    for case in 0..cases {
        let d = random_diffs(rng);
        let p = random_params(rng)?;
        let cs = ChecksumPair::from_diff(&d);
        let hw = statistical_unit(cs.predicted(), cs.observed(), &StatUnitConfig::exact(p))
            .map_err(|e| e.to_string())?;
        let mut sw = detect_statistical(&cs, &p);
        if corrupt && case == 0 {
            sw.freq_eff += 1;
        }
        if hw.decision != sw.decision || hw.freq_eff != sw.freq_eff || hw.msd != sw.msd {
            return Err(format!("case {case}: statistical unit and reference detector disagree"));
        }
    }
    Ok(cases)
}

fn theta_mag_analytics(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    let p = CriticalRegionParams::new(2.0, 40.0, 4).map_err(|e| e.to_string())?;
    let fixed = [(1u64 << 20, 20.0), (1, 40.0), (0, f64::INFINITY)];
    for (msd, want) in fixed {
        let got = theta_mag(msd, &p) + if corrupt { 1.0 } else { 0.0 };
        if got != want {
            return Err(format!("theta_mag({msd}) = {got}, expected {want}"));
        }
    }
    for case in 0..cases {
        let p = random_params(rng)?;
        let lo = 1 + rng.below(1 << 40);
        let hi = lo + 1 + rng.below(1 << 40);
        if theta_mag(hi, &p) >= theta_mag(lo, &p) {
            return Err(format!("case {case}: theta_mag not decreasing between {lo} and {hi}"));
        }
    }
    Ok(cases)
}

fn ber_table_monotone(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    let t = VoltageBerTable::default_synthetic();
    let (lo, hi) = (t.min_voltage(), t.max_voltage());
    for case in 0..cases {
        let a = lo + rng.unit_f64() * (hi - lo);
        let b = lo + rng.unit_f64() * (hi - lo);
        let (v1, v2) = if a <= b { (a, b) } else { (b, a) };
        let (b1, b2) = (t.ber_at(v1).map_err(|e| e.to_string())?, t.ber_at(v2).map_err(|e| e.to_string())?);
        let ok = b1 >= b2 && !(corrupt && case == 0);
        if !ok {
            return Err(format!("case {case}: BER at {v1} V below BER at {v2} V"));
        }
    }
    Ok(cases)
}

fn norm_amplification_check(rng: &mut SplitMix64, cases: usize, corrupt: bool) -> Result<usize, String> {
    let base = NormPipelineConfig {
        dim: 256,
        ..NormPipelineConfig::default()
    };
    for case in 0..cases {
        let cfg = NormPipelineConfig {
            seed: rng.next(),
            ..base
        };
        let index = rng.below(cfg.dim as u64) as usize;
        let mag = 1.0 + rng.unit_f64() * 1e4;
        let identity = norm_amplification(&cfg.with_kind(NormKind::None), mag, index).map_err(|e| e.to_string())?;
        let mut expected = 1.0 / cfg.dim as f64;
        if corrupt && case == 0 {
            expected *= 2.0;
        }
        if identity.changed_fraction != expected {
            return Err(format!("case {case}: identity pipeline changed {} of outputs", identity.changed_fraction));
        }
        let zero = norm_amplification(&cfg.with_kind(NormKind::LayerNorm), 0.0, index).map_err(|e| e.to_string())?;
        if zero.changed_fraction != 0.0 {
            return Err(format!("case {case}: zero error changed the layer-norm output"));
        }
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes_clean() {
        for (i, (name, check)) in CHECKS.iter().enumerate() {
            let mut rng = SplitMix64::new(i as u64);
            assert_eq!(check(&mut rng, 20, false), Ok(20), "{name}");
        }
    }

    #[test]
    fn every_check_detects_corruption() {
        for (i, (name, check)) in CHECKS.iter().enumerate() {
            let mut rng = SplitMix64::new(i as u64);
            assert!(check(&mut rng, 5, true).is_err(), "{name}");
        }
    }
}
