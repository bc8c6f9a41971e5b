use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turnwise::correction::bootstrap::draw_conversations;
use turnwise::correction::{
    audit, mean_lag1_rho, run_two_stage, AuditRow, ConversationRecord, PairResult, PairStatus, ProtocolReport,
    RhoOptions, RhoSummary, RobustStatus, RunConfig, StudyDataset,
};
use turnwise::dataset_io::{write_audit, write_checklist, write_results, AUDIT_COLUMNS, RESULTS_COLUMNS};
use turnwise::stats::lag1_autocorrelation;
use turnwise::synthetic::{build_synthetic_study, generate_ar1, SyntheticSpec};

fn study(convs: Vec<(Vec<f64>, Vec<bool>)>) -> StudyDataset<f64> {
    let records = convs
        .into_iter()
        .enumerate()
        .map(|(i, (m, l))| ConversationRecord::complete(format!("c{i:02}"), vec![("m".into(), m)], vec![("y".into(), l)]).unwrap())
        .collect();
    StudyDataset::new(records).unwrap()
}

#[test]
fn one_dominant_conversation_is_weak() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut convs = Vec::new();
    for _ in 0..19 {
        let m: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let l: Vec<bool> = (0..30).map(|_| rng.random_bool(0.3)).collect();
        convs.push((m, l));
    }
    let m: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
    let l: Vec<bool> = m.iter().map(|&v| v + rng.random_range(-0.3..0.3) > 0.7).collect();
    convs.push((m, l));
    let ds = study(convs);
    let report = run_two_stage(&ds, &RunConfig { bootstrap_b: 1000, ..RunConfig::default() }).unwrap();
    let PairResult::Confirmed(c) = &report.results[0] else { panic!("expected a confirmed pair") };
    assert!(c.pooled.pooled_significant);
    assert!(c.p_chelton < 0.05, "p_chelton {}", c.p_chelton);
    assert!(c.p_boot >= 0.05, "p_boot {}", c.p_boot);
    assert_eq!(c.status, RobustStatus::Weak);
    assert_eq!(report.inflation_rate, Some(1.0));
}

#[test]
fn conversation_resampling_keeps_autocorrelation() {
    let spec = SyntheticSpec { rho_levels: vec![0.7], conversations_per_level: 40, n_conversations: 40, ..SyntheticSpec::default() };
    let ds = build_synthetic_study(&spec).unwrap();
    let metric = &ds.metric_names()[0];
    let series: Vec<Vec<f64>> = ds.conversations().iter().map(|c| c.observed(metric)).collect();
    let rho_bar = mean_lag1_rho(&ds, metric, &RhoOptions::default()).unwrap().rho_bar;
    let mean_rho = |set: &[Vec<f64>]| set.iter().map(|s| lag1_autocorrelation(s).unwrap()).sum::<f64>() / set.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let blocks: Vec<Vec<f64>> = draw_conversations(&mut rng, series.len()).into_iter().map(|i| series[i].clone()).collect();
        assert!((mean_rho(&blocks) - rho_bar).abs() < 0.05);

        // turn-level resampling: pooled turns drawn independently, cut back to the same lengths
        let pooled: Vec<f64> = series.iter().flatten().copied().collect();
        let mut cursor = pooled.clone();
        cursor.shuffle(&mut rng);
        let mut turns = Vec::new();
        let mut at = 0;
        for s in &series {
            turns.push(cursor[at..at + s.len()].to_vec());
            at += s.len();
        }
        assert!(mean_rho(&turns) < 0.1);
    }
}

fn csv_rows(bytes: &[u8]) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(bytes).records().map(Result::unwrap).collect()
}

#[test]
fn results_have_one_row_per_pair() {
    let spec = SyntheticSpec { rho_levels: vec![0.2, 0.8], conversations_per_level: 10, n_conversations: 20, ..SyntheticSpec::default() };
    let mut ds = build_synthetic_study(&spec).unwrap();
    for conv in ds.conversations_mut() {
        let m = conv.observed(&conv.metrics().keys().next().unwrap().clone());
        conv.set_metric("len", m.iter().map(|v| Some(v * v)).collect()).unwrap();
    }
    ds.refresh_registries();
    let report = run_two_stage(&ds, &RunConfig { bootstrap_b: 200, ..RunConfig::default() }).unwrap();
    let mut out = Vec::new();
    write_results(&report, &mut out).unwrap();
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), ds.metric_names().len() * ds.label_names().len());
    for (row, result) in rows.iter().zip(&report.results) {
        assert_eq!(&row[0], result.metric());
        assert_eq!(&row[7], result.status().to_string());
    }
}

#[test]
fn empty_report_keeps_headers() {
    let report = ProtocolReport::<f64> {
        results: Vec::new(),
        audit: Vec::new(),
        n_pooled_sig: 0,
        n_robust: 0,
        inflation_rate: None,
        k: 0,
        total_turns: 0,
        config: RunConfig::default(),
    };
    let mut out = Vec::new();
    write_results(&report, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().trim_end(), RESULTS_COLUMNS.join(","));
    let mut out = Vec::new();
    write_audit::<f64, _>(&[], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().trim_end(), AUDIT_COLUMNS.join(","));
    let mut out = Vec::new();
    write_checklist(&report, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().contains("inflation rate: n/a"));
}

#[test]
fn high_autocorrelation_audit_row_shows_27x() {
    let n = 11639;
    let n_eff: f64 = turnwise::correction::chelton_neff(n, 0.928, 202).unwrap();
    let row = AuditRow {
        metric: "response_length".to_string(),
        n,
        k: 202,
        rho: Some(RhoSummary { rho_bar: 0.928, used_conversations: 202 }),
        n_eff: Some(n_eff),
        reduction: Some(n as f64 / n_eff),
        high_risk: true,
    };
    let mut out = Vec::new();
    write_audit(&[row], &mut out).unwrap();
    let rows = csv_rows(&out);
    let display = AUDIT_COLUMNS.iter().position(|&c| c == "reduction_display").unwrap();
    assert_eq!(&rows[0][display], "27×");
    assert_eq!(&rows[0][AUDIT_COLUMNS.len() - 1], "true");
}

#[test]
fn audit_matches_report_and_flags_risk() {
    let convs: Vec<(Vec<f64>, Vec<bool>)> = (0..10)
        .map(|i| {
            let m = generate_ar1(100, 0.85, i).unwrap().into_inner();
            let l = (0..100).map(|t| t % 4 == 0).collect();
            (m, l)
        })
        .collect();
    let ds = study(convs);
    let rows = audit(&ds, &RunConfig::default());
    assert_eq!(rows.len(), 1);
    assert!(rows[0].high_risk);
    assert_eq!(rows[0].k, 10);
    assert_eq!(rows[0].n, 1000);

    let report = run_two_stage(&ds, &RunConfig { bootstrap_b: 200, ..RunConfig::default() }).unwrap();
    assert_eq!(report.audit, rows);
    if !report.results[0].pooled().unwrap().pooled_significant {
        assert_eq!(report.results[0].status(), PairStatus::Skipped(turnwise::correction::SkipReason::NotPooledSignificant));
    }
}
