use chrono::NaiveDate;
use proptest::prelude::*;

use narrashock::causality::{
    binomial_group_test, evaluate_pair, make_static_split, make_windows, temporal_deviation, DeltaMode,
    DtConvention, WindowParams,
};
use narrashock::features::{FeatureKind, FeatureSeries};
use narrashock::models::{ModelKind, ModelParams};
use narrashock::seed;

fn series(id: &str, values: Vec<f64>) -> FeatureSeries {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    FeatureSeries::new(id, FeatureKind::Auxiliary, start.iter_days().take(values.len()).collect(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn differential_sums_to_mse_gap(
        ys in prop::collection::vec(-5.0f64..5.0, 40..90),
        xs_seed in any::<u64>(),
        lag in 1usize..4,
        krr in any::<bool>(),
    ) {
        let n = ys.len();
        let xs: Vec<f64> = (0..n).map(|i| ((xs_seed.wrapping_add(i as u64 * 2654435761) % 1000) as f64) / 100.0).collect();
        let rows = make_static_split(n - lag).unwrap().rows();
        let kind = if krr { ModelKind::Krr } else { ModelKind::Linear };
        let ev = evaluate_pair(&series("y", ys), &series("x", xs), lag, kind, &ModelParams::default(), &rows, DtConvention::Squared).unwrap();
        let sum: f64 = ev.differential.iter().sum();
        let gap = ev.n_test as f64 * (ev.mse_base - ev.mse_enhanced);
        prop_assert!((sum - gap).abs() <= 1e-9 * (1.0 + gap.abs()));
        prop_assert!((0.0..=1.0).contains(&ev.p_value));
    }

    #[test]
    fn deviations_sum_to_zero(pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..30), relative in any::<bool>()) {
        let mode = if relative { DeltaMode::Relative } else { DeltaMode::Absolute };
        let d = temporal_deviation(&pairs, mode).unwrap();
        prop_assert_eq!(d.deviation.len(), pairs.len());
        prop_assert!(d.deviation.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn rho_hat_counts_significant(ps in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let g = binomial_group_test(&ps, 0.05).unwrap();
        let k = ps.iter().filter(|&&p| p < 0.05).count();
        prop_assert_eq!(g.n_significant, k);
        prop_assert_eq!(g.rho_hat, k as f64 / ps.len() as f64);
        prop_assert!((0.0..=1.0).contains(&g.binomial_p));
        prop_assert_eq!(g.significant, g.binomial_p < 0.05);
    }

    #[test]
    fn static_split_partitions_rows(n in 20usize..5000) {
        let s = make_static_split(n).unwrap();
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.validation.start);
        prop_assert_eq!(s.validation.end, s.test.start);
        prop_assert_eq!(s.test.end, n);
        prop_assert_eq!(s.test.start, n * 7 / 10);
        prop_assert!(!s.train.is_empty() && !s.test.is_empty());
    }

    #[test]
    fn windows_are_disjoint_within_and_in_bounds(n in 100usize..3000, span in 20usize..400, test in 1usize..100, step in 1usize..300) {
        prop_assume!(test < span && span <= n);
        let ws = make_windows(n, &WindowParams { span, test, step }).unwrap();
        prop_assert!(!ws.is_empty());
        for (i, w) in ws.iter().enumerate() {
            prop_assert_eq!(w.index, i);
            prop_assert_eq!(w.span.start, i * step);
            prop_assert!(w.span.end <= n);
            prop_assert_eq!(w.train.end, w.test.start);
            prop_assert_eq!(w.test.len(), test);
            prop_assert_eq!(w.train.start, w.span.start);
            prop_assert_eq!(w.test.end, w.span.end);
        }
        // no further window fits
        prop_assert!(ws.len() * step + span > n);
    }

    #[test]
    fn seed_derivation_is_stable(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assert_eq!(seed::derive(master, a), seed::derive(master, a));
        if a != b {
            prop_assert_ne!(seed::derive(master, a), seed::derive(master, b));
        }
    }
}
