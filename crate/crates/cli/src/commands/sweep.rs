use realm_core::{summarize, sweep_detectors, SweepSpec};

use crate::error::CliResult;
use crate::output::{Cell, Table};
use crate::Ctx;

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let cfg = ctx.cfg();
    let energy = ctx.res.energy()?;
    let detectors = ctx.res.detectors()?;
    let spec = SweepSpec {
        voltages: ctx.res.voltages(&energy.table)?,
        bit_window: cfg.fault.bit_window,
        setup: ctx.res.trial_setup(cfg.sweep.trials)?,
    };
    let sweeps = sweep_detectors(&cfg.workload, &detectors, &spec, &energy)?;
    let summary = summarize(&sweeps, cfg.workload.total_macs(), &energy)?;

    let mut points = Table::new(
        "sweep",
        &[
            "voltage",
            "ber",
            "recovery_rate",
            "energy_total",
            "latency_factor",
            "quality_proxy",
            "detector",
        ],
    );
    for s in &sweeps {
        for p in &s.points {
            points.push(vec![
                p.voltage.into(),
                p.ber.into(),
                p.recovery_rate.into(),
                p.energy_total.into(),
                p.latency_factor.into(),
                p.quality_proxy.into(),
                s.detector.kind().label().into(),
            ]);
        }
    }

    let mut best = Table::new(
        "sweep_summary",
        &[
            "detector",
            "optimal_voltage",
            "energy_total",
            "saving_vs_nominal",
            "saving_vs_classical",
        ],
    );
    for s in &summary {
        best.push(vec![
            s.detector.label().into(),
            s.optimal_voltage.into(),
            s.energy_total.into(),
            s.saving_vs_nominal.into(),
            s.saving_vs_classical.map_or(Cell::Empty, Cell::Real),
        ]);
    }

    let out = ctx.output("sweep")?;
    out.write_table(&points)?;
    out.write_table(&best)?;
    print!("{}", best.render());
    Ok(())
}
