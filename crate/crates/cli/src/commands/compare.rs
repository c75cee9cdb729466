use realm_core::{evaluate_trials, FaultConfig};

use crate::error::CliResult;
use crate::output::Table;
use crate::Ctx;

/// Per-detector recovery and undetected-critical rates over `gemm_count`
/// faulted GEMMs shared by every detector.
pub fn run(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg();
    let detectors = ctx.res.detectors()?;
    let fault = match cfg.compare.voltage {
        Some(v) => {
            let energy = ctx.res.energy()?;
            FaultConfig::ber(energy.table.ber_at(v)?, cfg.fault.bit_window)
        }
        None => cfg.fault.to_fault(cfg.seed),
    };
    let trials = usize::try_from(cfg.workload.gemm_count).unwrap_or(usize::MAX);
    let setup = ctx.res.trial_setup(trials)?;
    let tallies = evaluate_trials(&cfg.workload, &setup, &detectors, std::slice::from_ref(&fault))?;

    let mut table = Table::new(
        "compare",
        &[
            "detector",
            "trials",
            "recovery_rate",
            "undetected_critical_rate",
            "mean_freq_eff",
            "mean_msd",
        ],
    );
    for t in &tallies[0] {
        table.push(vec![
            t.kind.label().into(),
            t.trials.into(),
            t.recovery_rate().into(),
            t.undetected_critical_rate().into(),
            t.mean_freq_eff().into(),
            t.mean_msd().into(),
        ]);
    }
    let out = ctx.output("compare")?;
    out.write_table(&table)?;
    print!("{}", table.render());
    Ok(())
}
