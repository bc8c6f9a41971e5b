use proptest::prelude::*;

use turnwise::correction::{
    bh_fdr, chelton_neff, run_two_stage, ConversationRecord, PairResult, PairStatus, RobustStatus, RunConfig,
    StudyDataset,
};
use turnwise::stats::{
    cumulative_sum, ewma, first_difference, fisher_ci, lag1_autocorrelation, point_biserial, t_two_sided_p,
};

fn varying(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, len).prop_filter("needs spread", |v| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

fn labelled(len: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    varying(len).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), prop::collection::vec(any::<bool>(), n))
            .prop_filter("both classes", |(_, l)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
    })
}

proptest! {
    #[test]
    fn lag1_is_affine_invariant(x in varying(6..60), a in 0.1f64..10.0, b in -50.0f64..50.0, flip in any::<bool>()) {
        let Ok(base) = lag1_autocorrelation(&x) else { return Ok(()) };
        let a = if flip { -a } else { a };
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let got = lag1_autocorrelation(&y).unwrap();
        prop_assert!((got - base).abs() < 1e-9, "{got} vs {base}");
    }

    #[test]
    fn label_flip_negates_point_biserial((x, l) in labelled(4..80)) {
        let r = point_biserial(&l, &x).unwrap().r;
        let flipped: Vec<bool> = l.iter().map(|b| !b).collect();
        let s = point_biserial(&flipped, &x).unwrap().r;
        prop_assert!((r + s).abs() < 1e-12);
        prop_assert!(r.abs() <= 1.0);
    }

    #[test]
    fn p_is_monotone_in_abs_t(t1 in 0.0f64..8.0, dt in 0.0f64..4.0, df in 1.0f64..5000.0, neg in any::<bool>()) {
        let t2 = t1 + dt;
        let sign = if neg { -1.0 } else { 1.0 };
        let p1 = t_two_sided_p(sign * t1, df).unwrap();
        let p2 = t_two_sided_p(t2, df).unwrap();
        prop_assert!(p2 <= p1 + 1e-12, "p({t2}) = {p2} > p({t1}) = {p1}");
        prop_assert!((0.0..=1.0).contains(&p1));
    }

    #[test]
    fn ci_contains_r_and_shrinks(r in -0.95f64..0.95, n in 4.5f64..20000.0, extra in 1.0f64..5000.0) {
        let a = fisher_ci(r, n, 0.95).unwrap();
        let b = fisher_ci(r, n + extra, 0.95).unwrap();
        prop_assert!(a.contains(r));
        prop_assert!(b.contains(r));
        prop_assert!(b.width() < a.width());
    }

    #[test]
    fn bh_rejections_grow_with_q(p in prop::collection::vec(1e-8f64..=1.0, 1..30), q1 in 0.001f64..0.5, dq in 0.0f64..0.4) {
        let q2 = (q1 + dq).min(0.99);
        let a = bh_fdr(&p, q1).unwrap();
        let b = bh_fdr(&p, q2).unwrap();
        for (i, &pi) in p.iter().enumerate() {
            prop_assert!(!a.rejected[i] || b.rejected[i]);
            prop_assert!(a.q_values[i] >= pi - 1e-15);
            prop_assert_eq!(a.q_values[i], b.q_values[i]);
        }
    }

    #[test]
    fn neff_bounds_and_monotonicity(n in 10usize..100000, k in 1usize..10, rho in -0.99f64..0.99, d in 0.0f64..0.5) {
        let k = k.min(n);
        let v: f64 = chelton_neff(n, rho, k).unwrap();
        prop_assert!(v >= k as f64 && v <= n as f64);
        let w: f64 = chelton_neff(n, (rho + d).min(0.99), k).unwrap();
        prop_assert!(w <= v + 1e-9);
    }

    #[test]
    fn ewma_alpha_one_is_identity(x in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        prop_assert_eq!(ewma(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn diff_inverts_cumsum(x in prop::collection::vec(-1e3f64..1e3, 2..100)) {
        let d = first_difference(&cumulative_sum(&x)).unwrap();
        prop_assert_eq!(d.len(), x.len() - 1);
        for (a, b) in d.iter().zip(&x[1..]) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn lag1_f32_tracks_f64(x in varying(8..40)) {
        let Ok(wide) = lag1_autocorrelation(&x) else { return Ok(()) };
        let narrow: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let got = lag1_autocorrelation(&narrow).unwrap();
        prop_assert!((f64::from(got) - wide).abs() < 1e-3);
    }
}

fn random_study(convs: Vec<(Vec<f64>, Vec<bool>)>) -> StudyDataset<f64> {
    let records = convs
        .into_iter()
        .enumerate()
        .map(|(i, (m, l))| {
            let shifted: Vec<f64> = m.iter().zip(&l).map(|(v, &b)| v + if b { 25.0 } else { 0.0 }).collect();
            ConversationRecord::complete(format!("c{i}"), vec![("m".into(), m), ("s".into(), shifted)], vec![("y".into(), l)])
                .unwrap()
        })
        .collect();
    StudyDataset::new(records).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn protocol_status_is_consistent(convs in prop::collection::vec(labelled(6..40), 3..8), seed in any::<u64>()) {
        let ds = random_study(convs);
        let config = RunConfig { bootstrap_b: 100, seed, ..RunConfig::default() };
        let report = run_two_stage(&ds, &config).unwrap();
        prop_assert_eq!(report.results.len(), 2);
        prop_assert!(report.n_robust <= report.n_pooled_sig);
        let mut sig = 0;
        let mut robust = 0;
        for result in &report.results {
            let pooled = result.pooled().unwrap();
            prop_assert_eq!(pooled.pooled_significant, pooled.q_value <= config.q);
            sig += usize::from(pooled.pooled_significant);
            match result {
                PairResult::Confirmed(c) => {
                    prop_assert!(pooled.pooled_significant);
                    prop_assert_eq!(c.p_final, c.p_chelton.max(c.p_boot));
                    prop_assert!(c.p_final >= c.p_chelton.min(c.p_boot));
                    prop_assert_eq!(c.status == RobustStatus::Robust, c.p_final < config.alpha);
                    prop_assert!(c.n_eff >= 1.0 && c.n_eff <= pooled.n as f64);
                    robust += usize::from(c.status == RobustStatus::Robust);
                }
                PairResult::Skipped(_) => prop_assert!(matches!(result.status(), PairStatus::Skipped(_))),
            }
        }
        prop_assert_eq!(sig, report.n_pooled_sig);
        prop_assert_eq!(robust, report.n_robust);
        match report.inflation_rate {
            Some(ir) => prop_assert!((ir - (sig - robust) as f64 / sig as f64).abs() < 1e-15),
            None => prop_assert_eq!(sig, 0),
        }
    }
}
