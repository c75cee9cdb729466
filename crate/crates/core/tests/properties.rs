use proptest::prelude::*;
use realm_core::*;

fn quant(rows: usize, cols: usize) -> impl Strategy<Value = QuantMatrix> {
    proptest::collection::vec(any::<i8>(), rows * cols)
        .prop_map(move |d| QuantMatrix::new(rows, cols, d).unwrap())
}

fn operands() -> impl Strategy<Value = (QuantMatrix, QuantMatrix)> {
    (1usize..24, 1usize..24, 1usize..24).prop_flat_map(|(m, k, n)| (quant(m, k), quant(k, n)))
}

fn params() -> impl Strategy<Value = CriticalRegionParams> {
    (1.01f64..4.0, 0.0f64..64.0, 0u32..16)
        .prop_map(|(a, b, t)| CriticalRegionParams::new(a, b, t).unwrap())
}

fn diffs() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(
        prop_oneof![
            3 => Just(0i64),
            2 => -(1i64 << 20)..(1i64 << 20),
            1 => (0u32..40).prop_map(|b| 1i64 << b),
            1 => (0u32..40).prop_map(|b| -(1i64 << b)),
        ],
        1..64,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn output_checksum_matches_prediction((w, x) in operands()) {
        let y = gemm(&w, &x).unwrap();
        prop_assert_eq!(checksum(&y, Side::Row), predicted_output_checksum(&w, &x).unwrap());
    }

    #[test]
    fn column_checksum_of_product((w, x) in operands()) {
        // Y e = W (X e)
        let y = gemm(&w, &x).unwrap();
        let xe = checksum(&x, Side::Column);
        let expected: Vec<i64> = (0..w.rows())
            .map(|i| (0..w.cols()).map(|p| i64::from(w.get(i, p)) * xe.get(p)).sum())
            .collect();
        let ye = checksum(&y, Side::Column);
        prop_assert_eq!(ye.as_slice(), &expected[..]);
    }

    #[test]
    fn dataflows_agree((w, x) in operands(), seed in any::<u64>(), ber in 0.0f64..0.05, tile in 1usize..9) {
        let stat = StatUnitConfig::exact(CriticalRegionParams::new(2.0, 40.0, 4).unwrap());
        let fault = FaultConfig::ber(ber, BitWindow::default()).with_seed(seed);
        let run = |dataflow| {
            let cfg = ArrayConfig { array_rows: tile, array_cols: tile, dataflow, tiling: true };
            SystolicArray::new(cfg).unwrap().run(&w, &x, Some(&fault), &stat).unwrap()
        };
        let ws = run(DataflowKind::WeightStationary);
        let os = run(DataflowKind::OutputStationary);
        prop_assert_eq!(&ws.output, &os.output);
        prop_assert_eq!(&ws.predicted, &os.predicted);
        prop_assert_eq!(&ws.observed, &os.observed);
        prop_assert_eq!(ws.verdict, os.verdict);
    }

    #[test]
    fn injection_is_deterministic_and_replayable((w, x) in operands(), seed in any::<u64>(), ber in 0.0f64..0.1) {
        let y = gemm(&w, &x).unwrap();
        let cfg = FaultConfig::ber(ber, BitWindow::new(8, 31).unwrap());
        let (a, log_a) = inject(&y, &cfg, seed).unwrap();
        let (b, log_b) = inject(&y, &cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&log_a, &log_b);
        prop_assert_eq!(log_a.replay(&y).unwrap(), a.clone());
        let changed = y.data().iter().zip(a.data()).filter(|(p, q)| p != q).count();
        prop_assert_eq!(changed, log_a.len());
    }

    #[test]
    fn uniform_injection_sum_of_deltas(
        rows in 1usize..16, cols in 1usize..16, mag_log2 in 0u32..20, freq_frac in 0.0f64..1.0, seed in any::<u64>()
    ) {
        let y = AccumMatrix::zeros(rows, cols);
        let freq = ((rows * cols) as f64 * freq_frac) as usize;
        let mag = 1i32 << mag_log2;
        let (out, log) = inject_uniform(&y, &FaultConfig::uniform(mag, freq), seed).unwrap();
        prop_assert_eq!(log.len(), freq);
        let total: i64 = out.data().iter().map(|&v| i64::from(v)).sum();
        prop_assert_eq!(total, freq as i64 * i64::from(mag));
    }

    #[test]
    fn detectors_are_conservative(d in diffs(), p in params()) {
        let cs = ChecksumPair::from_diff(&d);
        let classical = detect_classical(&cs).recover();
        let msd0 = detect_msd(&cs, 0).recover();
        let stat = detect_statistical(&cs, &p).recover();
        prop_assert!(!stat || classical);
        prop_assert!(!msd0 || classical);
        prop_assert_eq!(classical, d.iter().any(|&v| v != 0));
    }

    #[test]
    fn statistical_unit_exact_matches_reference(d in diffs(), p in params()) {
        let cs = ChecksumPair::from_diff(&d);
        let hw = statistical_unit(cs.predicted(), cs.observed(), &StatUnitConfig::exact(p)).unwrap();
        let sw = detect_statistical(&cs, &p);
        prop_assert_eq!(hw.decision, sw.decision);
        prop_assert_eq!(hw.freq_eff, sw.freq_eff);
        prop_assert_eq!(hw.msd, sw.msd);
    }

    #[test]
    fn theta_mag_decreases_with_msd(p in params(), lo in 1u64..u64::MAX / 2) {
        let hi = lo * 2;
        prop_assert!(theta_mag(hi, &p) < theta_mag(lo, &p));
        prop_assert_eq!(theta_mag(0, &p), f64::INFINITY);
    }

    #[test]
    fn ber_monotone_in_voltage(v1 in 0.6f64..0.9, v2 in 0.6f64..0.9) {
        let t = VoltageBerTable::default_synthetic();
        let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        prop_assert!(t.ber_at(lo).unwrap() >= t.ber_at(hi).unwrap());
    }

    #[test]
    fn energy_bounds(v in 0.3f64..0.9, r in 0.0f64..1.0, n_mac in 1u64..1_000_000) {
        let cfg = EnergyConfig::default();
        let compute = compute_energy(v, n_mac, &cfg).unwrap();
        let total = total_energy(v, r, n_mac, &cfg).unwrap();
        prop_assert!(total >= compute);
        prop_assert!(detector_energy(DetectorKind::None, v, r, n_mac, &cfg).unwrap() <= total);
        let floor = total_energy(0.9, 0.0, n_mac, &cfg).unwrap();
        prop_assert!(detector_energy(DetectorKind::None, 0.9, 0.0, n_mac, &cfg).unwrap() <= floor);
    }

    #[test]
    fn matrix_text_round_trip(m in (1usize..8, 1usize..8).prop_flat_map(|(r, c)| quant(r, c))) {
        let parsed: QuantMatrix = m.to_string().parse().unwrap();
        prop_assert_eq!(parsed, m);
    }

    #[test]
    fn params_json_round_trip(p in params()) {
        let (back, prov) = CriticalRegionParams::from_json(&p.to_json("test").unwrap()).unwrap();
        prop_assert_eq!(back, p);
        prop_assert_eq!(prov, "test");
    }
}
