use std::path::Path;

use realm_core::{ChecksumPair, DetectorKind, QuantMatrix, SystolicArray};

use crate::error::{CliError, CliResult};
use crate::output::Table;
use crate::Ctx;

fn read_matrix(path: &Path) -> CliResult<QuantMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn run(ctx: &Ctx, w: Option<&Path>, x: Option<&Path>, trial: u64) -> CliResult<()> {
    let cfg = ctx.cfg();
    let (w, x) = match (w, x) {
        (Some(w), Some(x)) => (read_matrix(w)?, read_matrix(x)?),
        _ => cfg.workload.operands(trial),
    };
    let array = SystolicArray::new(cfg.array)?;
    let fault = cfg.fault.to_fault(cfg.seed);
    let sim = array.run(&w, &x, Some(&fault), &ctx.res.stat_unit()?)?;
    let pair = ChecksumPair::new(sim.predicted.clone(), sim.observed.clone())?;

    let mut events = Table::new(
        "inject_events",
        &["row", "col", "before", "after", "delta", "flipped_bits"],
    );
    for e in sim.events.iter() {
        let bits: Vec<String> = e.flipped_bits().map(|b| b.to_string()).collect();
        events.push(vec![
            e.row.into(),
            e.col.into(),
            e.before.into(),
            e.after.into(),
            e.delta().into(),
            bits.join(" ").into(),
        ]);
    }

    let mut checksums = Table::new("inject_checksums", &["col", "predicted", "observed", "diff"]);
    for (j, d) in pair.diff().iter().enumerate() {
        checksums.push(vec![
            j.into(),
            sim.predicted.get(j).into(),
            sim.observed.get(j).into(),
            (*d).into(),
        ]);
    }

    let mut verdicts = Table::new(
        "inject_verdicts",
        &["detector", "decision", "msd", "theta_mag", "freq_eff"],
    );
    for det in ctx.res.detectors()? {
        let v = if det.kind() == DetectorKind::Statistical {
            sim.verdict
        } else {
            det.evaluate(&pair, &sim.events)
        };
        verdicts.push(vec![
            det.kind().label().into(),
            if v.recover() { "recover" } else { "pass" }.into(),
            v.msd.into(),
            v.theta_mag.into(),
            v.freq_eff.into(),
        ]);
    }

    let out = ctx.output("inject")?;
    for t in [&events, &checksums, &verdicts] {
        out.write_table(t)?;
    }
    println!(
        "{}x{}x{} GEMM, {} cycles, {} corrupted elements",
        w.rows(),
        w.cols(),
        x.cols(),
        sim.cycles,
        sim.events.len()
    );
    print!("{}", verdicts.render());
    Ok(())
}
