use realm_core::*;

fn planted() -> CriticalRegionParams {
    CriticalRegionParams::new(2.0, 40.0, 4).unwrap()
}

fn spec(trials: usize, voltages: Vec<f64>) -> SweepSpec {
    let mut setup = TrialSetup::new(planted());
    setup.trials = trials;
    setup.seed = 11;
    SweepSpec {
        voltages,
        bit_window: BitWindow::default(),
        setup,
    }
}

fn detectors() -> Vec<Detector> {
    vec![
        Detector::None,
        Detector::Dmr,
        Detector::Classical,
        Detector::Msd { threshold: 0 },
        Detector::Statistical(planted()),
    ]
}

#[test]
fn recovery_ordering_and_energy_dominance() {
    let voltages: Vec<f64> = (0..13).map(|i| 0.72 - 0.01 * f64::from(i)).collect();
    let sweeps = sweep_detectors(&Workload::default(), &detectors(), &spec(200, voltages), &EnergyConfig::default()).unwrap();
    let by = |k: DetectorKind| sweeps.iter().find(|s| s.detector.kind() == k).unwrap();
    let (none, classical, msd, stat) = (
        by(DetectorKind::None),
        by(DetectorKind::Classical),
        by(DetectorKind::Msd),
        by(DetectorKind::Statistical),
    );
    for i in 0..classical.points.len() {
        let (c, m, s, n) = (&classical.points[i], &msd.points[i], &stat.points[i], &none.points[i]);
        assert!(s.recovery_rate <= m.recovery_rate, "{s:?} {m:?}");
        // cancelling errors can hide from the summed deviation
        assert!(m.recovery_rate <= c.recovery_rate);
        assert!(s.energy_total <= c.energy_total);
        assert_eq!(n.recovery_rate, 0.0);
        assert!(n.quality_proxy >= s.quality_proxy);
        assert_eq!(c.quality_proxy, 0.0);
        for p in [c, m, s] {
            let compute = compute_energy(p.voltage, Workload::default().total_macs(), &EnergyConfig::default()).unwrap();
            assert!(p.energy_total >= compute);
            assert!((0.0..=1.0).contains(&p.recovery_rate));
        }
    }
}

#[test]
fn high_ber_forces_classical_recovery() {
    let sw = sweep_voltage(&Workload::default(), Detector::Classical, &spec(50, vec![0.6]), &EnergyConfig::default()).unwrap();
    let table = EnergyConfig {
        table: VoltageBerTable::new(vec![
            BerPoint { voltage: 0.9, ber: 1e-12 },
            BerPoint { voltage: 0.5, ber: 1e-2 },
        ])
        .unwrap(),
        ..EnergyConfig::default()
    };
    let hot = sweep_voltage(&Workload::default(), Detector::Classical, &spec(50, vec![0.5]), &table).unwrap();
    assert_eq!(hot.points[0].recovery_rate, 1.0);
    let nominal = compute_energy(0.9, Workload::default().total_macs(), &table).unwrap();
    assert!(hot.points[0].energy_total > nominal);
    assert!(sw.points[0].recovery_rate > 0.9);
}

#[test]
fn unprotected_optimum_is_lowest_voltage() {
    let voltages = vec![0.9, 0.8, 0.7, 0.6];
    let sw = sweep_voltage(&Workload::default(), Detector::None, &spec(10, voltages), &EnergyConfig::default()).unwrap();
    assert_eq!(sw.optimum_point().voltage, 0.6);
    assert!(sw.points.windows(2).all(|w| w[1].energy_total < w[0].energy_total));
    assert!(sw.points.iter().all(|p| p.latency_factor == 1.0));
}

#[test]
fn sweep_is_deterministic_and_rejects_bad_input() {
    let s = spec(20, vec![0.65, 0.62]);
    let a = sweep_detectors(&Workload::default(), &detectors(), &s, &EnergyConfig::default()).unwrap();
    let b = sweep_detectors(&Workload::default(), &detectors(), &s, &EnergyConfig::default()).unwrap();
    assert_eq!(a, b);
    assert!(sweep_voltage(&Workload::default(), Detector::Classical, &spec(5, vec![]), &EnergyConfig::default()).is_err());
    assert!(sweep_voltage(&Workload::default(), Detector::Classical, &spec(5, vec![0.95]), &EnergyConfig::default()).is_err());
    assert!(sweep_voltage(&Workload::default(), Detector::Classical, &spec(0, vec![0.7]), &EnergyConfig::default()).is_err());
}

#[test]
fn summary_savings() {
    let sweeps = sweep_detectors(
        &Workload::default(),
        &[Detector::None, Detector::Classical],
        &spec(10, vec![0.9]),
        &EnergyConfig::default(),
    )
    .unwrap();
    let summary = summarize(&sweeps, Workload::default().total_macs(), &EnergyConfig::default()).unwrap();
    assert_eq!(summary[0].saving_vs_nominal, 0.0);
    assert!((summary[1].saving_vs_nominal + 0.0179).abs() < 1e-12);
    assert_eq!(summary[1].saving_vs_classical, Some(0.0));
}

#[test]
fn latency_includes_checksum_stage_and_recovery() {
    let sw = sweep_voltage(&Workload::default(), Detector::Classical, &spec(40, vec![0.9, 0.62]), &EnergyConfig::default()).unwrap();
    let array = SystolicArray::new(ArrayConfig::default()).unwrap();
    let base = array.cycles(64, 64, 64).unwrap() as f64 / array.base_cycles(64, 64, 64).unwrap() as f64;
    assert_eq!(sw.points[0].latency_factor, base);
    let p = &sw.points[1];
    assert!((p.latency_factor - base * (1.0 + p.recovery_rate)).abs() < 1e-12);
}
