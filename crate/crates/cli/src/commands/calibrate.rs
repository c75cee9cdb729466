use realm_core::lab::{fit_critical_region, quality_grid, NormPipelineOracle, PlantedStepOracle, QualityOracle};
use realm_core::{CriticalRegionParams, Error};

use crate::config::OracleSection;
use crate::error::{CliError, CliResult};
use crate::output::Table;
use crate::Ctx;

pub const PARAMS_FILE: &str = "params.json";

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg();
    let cal = &cfg.calibrate;
    let oracle: Box<dyn QualityOracle> = match cal.oracle {
        OracleSection::Planted {
            a,
            b,
            theta_freq,
            rows,
            cols,
        } => Box::new(PlantedStepOracle::new(CriticalRegionParams::new(a, b, theta_freq)?, rows, cols)),
        OracleSection::NormPipeline {
            norm_kind,
            rows,
            k,
            cols,
        } => Box::new(NormPipelineOracle::new(norm_kind, rows, k, cols, cfg.seed)?),
    };
    let spec = cal.grid_spec(cfg.seed);
    let grid = quality_grid(oracle.as_ref(), &spec)?;

    let mut table = Table::new("grid", &["freq", "mag_log2", "quality", "acceptable"]);
    for (fi, &f) in grid.freq_axis.iter().enumerate() {
        for (mi, &m) in grid.mag_axis.iter().enumerate() {
            let c = grid.cell(fi, mi);
            table.push(vec![f.into(), m.into(), c.quality.into(), c.acceptable.into()]);
        }
    }
    let out = ctx.output("calibrate")?;
    out.write_table(&table)?;

    let params = fit_critical_region(&grid).map_err(|e| match e {
        Error::NoBoundary(why) => CliError::Failed(format!(
            "no critical-region boundary in the grid ({why}); widen mag_axis/freq_axis or adjust epsilon"
        )),
        other => other.into(),
    })?;
    let provenance = format!(
        "fitted from a {}x{} grid, epsilon {}, {} trials per cell, seed {}",
        grid.freq_axis.len(),
        grid.mag_axis.len(),
        realm_core::report::fmt_real(spec.epsilon),
        spec.trials,
        spec.seed
    );
    out.write_bytes(PARAMS_FILE, params.to_json(&provenance)?.as_bytes())?;
    println!(
        "a = {}\nb = {}\ntheta_freq = {}",
        params.a, params.b, params.theta_freq
    );
    Ok(())
}
