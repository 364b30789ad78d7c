use outagecast::datastore::{generate_synthetic, GenConfig, SplitSpec};
use outagecast::evalreport::*;
use outagecast::features::FeatureSet;
use outagecast::gammadist::GammaParams;
use outagecast::netmodel::{RealtimeConfig, RealtimeModel};
use outagecast::textprep::{build_vocab, log_tokens};
use outagecast::training::{onset_examples, train_initial, Dataset, PreparedLog, Target, TrainConfig};
use proptest::prelude::*;

fn gp(k: f64, theta: f64) -> GammaParams {
    GammaParams::new(k, theta).unwrap()
}

#[test]
fn perfect_point_predictions() {
    let truth = [0.5, 1.25, 3.0, 7.5, 2.0];
    let preds: Vec<_> = truth.iter().map(|&d| gp(2.0, d / 2.0)).collect();
    let row = metrics(&preds, &truth, "test", "none").unwrap();
    assert_eq!(row.rmse, 0.0);
    assert!((row.corr - 100.0).abs() < 1e-9);
    assert!(!row.zero_variance);
    assert_eq!(row.n, 5);
}

#[test]
fn unit_exponential_nll_is_one() {
    let preds = vec![gp(1.0, 1.0); 4];
    let row = metrics(&preds, &[1.0; 4], "test", "none").unwrap();
    assert!((row.nll - 1.0).abs() < 1e-12, "{}", row.nll);
}

#[test]
fn constant_predictions_flag_zero_variance() {
    let preds = vec![gp(2.0, 1.5); 3];
    let row = metrics(&preds, &[1.0, 2.0, 4.0], "test", "none").unwrap();
    assert_eq!(row.corr, 0.0);
    assert!(row.zero_variance);
    assert!(row.to_tsv_line().ends_with("\ttrue"));
    assert!(metrics_tsv(&[row]).starts_with(METRIC_HEADER));
}

#[test]
fn metrics_reject_mismatched_or_empty_input() {
    assert!(metrics(&[gp(1.0, 1.0)], &[1.0, 2.0], "", "").is_err());
    assert!(metrics(&[], &[], "", "").is_err());
    assert!(point_metrics(&[1.0], &[]).is_err());
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn constant_value_with_inexact_mean_is_zero_variance() {
    let c = 2.348269123456789;
    let pred = vec![c; 69];
    let truth: Vec<f64> = (0..69).map(|i| i as f64 * 0.3 + 0.1).collect();
    let (_, corr, flag) = point_metrics(&pred, &truth).unwrap();
    assert!(flag);
    assert_eq!(corr, 0.0);
}

proptest! {
    #[test]
    fn pearson_matches_textbook(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let oracle = textbook_pearson(&x, &y);
        prop_assume!(oracle.is_finite());
        let r = pearson(&x, &y).unwrap();
        prop_assert!((r - oracle).abs() < 1e-12, "{} vs {}", r, oracle);
    }

    #[test]
    fn metrics_ignore_ordering(rows in prop::collection::vec((0.3f64..5.0, 0.2f64..4.0, 0.05f64..20.0), 2..30), rot in 0usize..30) {
        let preds: Vec<_> = rows.iter().map(|r| gp(r.0, r.1)).collect();
        let truth: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let a = metrics(&preds, &truth, "t", "f").unwrap();
        let mut p2 = preds.clone();
        let mut t2 = truth.clone();
        p2.rotate_left(rot % rows.len());
        t2.rotate_left(rot % rows.len());
        p2.reverse();
        t2.reverse();
        let b = metrics(&p2, &t2, "t", "f").unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
        prop_assert!(close(a.nll, b.nll) && close(a.rmse, b.rmse) && close(a.corr, b.corr));
        prop_assert!(a.rmse >= 0.0 && a.corr.abs() <= 100.0);
        prop_assert_eq!(a, metrics(&preds, &truth, "t", "f").unwrap());
    }

    #[test]
    fn report_row_orders_mode_median_q80(k in 0.05f64..30.0, theta in 0.01f64..50.0) {
        let p = gp(k, theta);
        let row = report_row(&p).unwrap();
        let median = p.quantile(0.5).unwrap();
        prop_assert!(row.mode <= row.mean);
        prop_assert!(row.q80 >= median);
        prop_assert!(row.q80 >= row.mode);
        prop_assert!(row.mode >= 0.0);
    }
}

#[test]
fn report_row_examples() {
    let r = report_row(&gp(1.0, 2.0)).unwrap();
    assert_eq!(r.mode, 0.0);
    assert_eq!(r.mean, 2.0);
    assert!((r.q80 - (-2.0 * 0.2f64.ln())).abs() < 1e-9);
    assert!((r.q80 - 3.219).abs() < 1e-3);

    // CDF of Gamma(2, 1) is 1 - (1 + x) e^-x; bisect for the 0.8 quantile
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - (1.0 + mid) * (-mid).exp() < 0.8 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = report_row(&gp(2.0, 1.0)).unwrap();
    assert_eq!((r.mode, r.mean), (1.0, 2.0));
    assert!((r.q80 - lo).abs() < 1e-8, "{} vs {lo}", r.q80);
    assert!((r.q80 - 2.994).abs() < 1e-3);
}

fn outcome(duration: f64, reports: usize) -> SequenceOutcome {
    SequenceOutcome {
        duration,
        initial: gp(1.5, duration / 1.5),
        updates: (0..reports)
            .map(|i| {
                let t = duration * (i + 1) as f64 / (reports + 1) as f64;
                (t, gp(2.0, (duration - t) / 2.0 + 0.1 * i as f64))
            })
            .collect(),
    }
}

#[test]
fn per_report_table_uses_outages_with_three_reports() {
    let outcomes = vec![outcome(4.0, 3), outcome(2.0, 2), outcome(6.0, 5), outcome(1.0, 0)];
    let rows = per_report_metrics(&outcomes, Target::Remaining).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.n == 2));
    assert_eq!(rows.iter().map(|r| r.reports).collect::<Vec<_>>(), vec![0, 1, 2, 3]);

    // row 0 scores the onset forecast against the full duration
    let kept = [&outcomes[0], &outcomes[2]];
    let initial: Vec<_> = kept.iter().map(|o| o.initial).collect();
    let durations: Vec<_> = kept.iter().map(|o| o.duration).collect();
    assert_eq!(rows[0].nll, metrics(&initial, &durations, "", "").unwrap().nll);
    // later rows score against the remaining time
    let second: Vec<_> = kept.iter().map(|o| o.updates[1].1).collect();
    let remaining: Vec<_> = kept.iter().map(|o| o.duration - o.updates[1].0).collect();
    assert_eq!(rows[2].rmse, metrics(&second, &remaining, "", "").unwrap().rmse);

    let tsv = report_count_tsv(&rows);
    assert_eq!(tsv.lines().count(), 5);

    let short = vec![outcome(2.0, 2), outcome(3.0, 1)];
    assert!(per_report_metrics(&short, Target::Remaining).is_err());
}

#[test]
fn ols_recovers_exact_linear_relation() {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i % 7) as f64 - 3.0]).collect();
    let y: Vec<f64> = x.iter().map(|r| 1.5 + 2.0 * r[0] - 0.75 * r[1]).collect();
    let m = fit_linear(&x, &y).unwrap();
    assert!((m.intercept - 1.5).abs() < 1e-5);
    assert!((m.weights[0] - 2.0).abs() < 1e-5 && (m.weights[1] + 0.75).abs() < 1e-5);
    let preds = linear_baseline(&x, &y, &x).unwrap();
    let (rmse, corr, _) = point_metrics(&preds, &y).unwrap();
    assert!(rmse < 1e-5 && corr > 99.999);
}

#[test]
fn ols_on_constant_target_predicts_mean() {
    let x: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 5.0 - 2.5, ((i * 3) % 5) as f64]).collect();
    let y = vec![4.2; 25];
    let m = fit_linear(&x, &y).unwrap();
    assert!(m.weights.iter().all(|w| w.abs() < 1e-6), "{m:?}");
    assert!(linear_baseline(&x, &y, &[vec![10.0, -3.0]]).unwrap()[0] - 4.2 < 1e-5);
}

#[test]
fn ols_ridge_rescues_duplicate_columns_and_rejects_bad_shapes() {
    let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
    let preds = linear_baseline(&x, &y, &x).unwrap();
    assert!(preds.iter().zip(&y).all(|(p, t)| (p - t).abs() < 1e-4));
    assert!(fit_linear(&x, &y[..3]).is_err());
    assert!(fit_linear(&[], &[]).is_err());
    assert!(fit_linear(&[vec![1.0], vec![1.0, 2.0]], &[1.0, 2.0]).is_err());
}

#[test]
fn smoothing_of_single_token_is_identity() {
    assert_eq!(smooth(&[1.0]), vec![1.0]);
}

proptest! {
    #[test]
    fn smoothing_preserves_mass(raw in prop::collection::vec(0.0f64..1.0, 2..20)) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let s = smooth(&w);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
    }
}

fn export(tokens: &[&str], raw: Vec<Vec<f64>>) -> AttentionExport {
    AttentionExport {
        outage_id: 1,
        report_index: 1,
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        offsets: (0..tokens.len()).collect(),
        smoothed: raw.iter().map(|h| smooth(h)).collect(),
        raw,
    }
}

#[test]
fn bigram_counts() {
    let exports = vec![
        export(&["found", "crow", "<end>"], vec![vec![0.2, 0.7, 0.1], vec![0.6, 0.3, 0.1]]),
        export(&["dead", "crow", "<end>"], vec![vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]]),
        export(&["<end>"], vec![vec![1.0], vec![1.0]]),
    ];
    let table = top_bigrams(&exports);
    assert_eq!(table.len(), 2);
    let head1: std::collections::HashMap<_, _> = table[0].iter().cloned().collect();
    assert_eq!(head1["crow <end>"], 2);
    assert_eq!(head1["found crow"], 1);
    assert_eq!(head1["dead crow"], 1);
    // boundary argmax contributes one bigram, single-token report none
    let head2: usize = table[1].iter().map(|(_, c)| c).sum();
    assert_eq!(head2, 2);
    for h in &table {
        assert!(h.iter().map(|(_, c)| c).sum::<usize>() <= 2 * exports.len());
        assert!(h.windows(2).all(|w| w[0].1 >= w[1].1));
    }
    let tsv = bigram_tsv(&table, 5);
    assert!(tsv.starts_with("rank\thead1_bigram\thead1_count\thead2_bigram\thead2_count\n"));
    assert_eq!(tsv.lines().nth(1).unwrap(), "1\tcrow <end>\t2\tcrow <end>\t1");
}

#[test]
fn attention_export_records() {
    let logs: Vec<PreparedLog> = ["J Smith reports dead crow", "restored"]
        .iter()
        .enumerate()
        .map(|(i, raw)| PreparedLog {
            elapsed_hours: 0.5 + i as f64,
            raw: raw.to_string(),
            tokens: log_tokens(raw),
        })
        .collect();
    let corpus: Vec<Vec<String>> = logs.iter().map(|l| l.tokens.iter().map(|t| t.text.clone()).collect()).collect();
    let vocab = build_vocab(&corpus, 1).unwrap();
    let cfg = RealtimeConfig {
        vocab_size: vocab.len(),
        feature_dim: 2,
        embed: 4,
        cell: 3,
        state: 4,
        heads: 2,
        layer_norm: true,
        context_free: false,
    };
    let model = RealtimeModel::new(cfg, 3).unwrap();
    let exports = attention_export(&model, 42, &[0.1, -0.2], &logs, &vocab).unwrap();
    assert_eq!(exports.len(), 2);
    assert_eq!(exports[1].report_index, 2);
    assert_eq!(exports[0].tokens, vec!["j", "smith", "reports", "dead", "crow", "<end>"]);
    assert_eq!(exports[0].offsets[3], "J Smith reports ".len());
    for e in &exports {
        for h in &e.raw {
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(h.iter().all(|&v| v >= 0.0));
        }
    }
    let jsonl = attention_jsonl(&exports).unwrap();
    assert_eq!(jsonl.lines().count(), 2 * (6 + 2));
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["outage_id"], 42);
    assert_eq!(first["token"], "j");
    assert_eq!(first["head"], 1);
}

/// Newton fit of a single Gamma by maximum likelihood.
fn gamma_mle(xs: &[f64]) -> GammaParams {
    fn digamma(mut x: f64) -> f64 {
        let mut acc = 0.0;
        while x < 10.0 {
            acc -= 1.0 / x;
            x += 1.0;
        }
        let f = 1.0 / (x * x);
        acc + x.ln() - 0.5 / x - f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f / 240.0)))
    }
    fn trigamma(mut x: f64) -> f64 {
        let mut acc = 0.0;
        while x < 10.0 {
            acc += 1.0 / (x * x);
            x += 1.0;
        }
        let f = 1.0 / (x * x);
        acc + 1.0 / x + 0.5 * f + (f / x) * (1.0 / 6.0 - f * (1.0 / 30.0 - f / 42.0))
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let s = mean.ln() - xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..50 {
        k -= (k.ln() - digamma(k) - s) / (1.0 / k - trigamma(k));
    }
    gp(k, mean / k)
}

#[test]
fn no_feature_model_matches_single_gamma_fit() {
    let mut gen = GenConfig::default();
    gen.n_outages = 3000;
    let corpus = generate_synthetic(&gen, 11).unwrap();
    let ds = Dataset::build(&corpus, &SplitSpec::default()).unwrap();
    let train = onset_examples(&ds.splits.train, FeatureSet::None).unwrap();
    let valid = onset_examples(&ds.splits.validation, FeatureSet::None).unwrap();
    let test = onset_examples(&ds.splits.test, FeatureSet::None).unwrap();
    let cfg = TrainConfig {
        features: FeatureSet::None,
        ..TrainConfig::default()
    };
    let fitted = train_initial(&train, &valid, &cfg).unwrap();
    let truth: Vec<f64> = test.iter().map(|e| e.duration).collect();
    let model_row = metrics(&vec![fitted.model.predict(&[]).unwrap(); test.len()], &truth, "test", "none").unwrap();
    let fit = gamma_mle(&train.iter().map(|e| e.duration).collect::<Vec<_>>());
    let oracle_row = metrics(&vec![fit; test.len()], &truth, "test", "none").unwrap();
    assert!(
        (model_row.nll - oracle_row.nll).abs() < 0.01,
        "model {} vs single fit {}",
        model_row.nll,
        oracle_row.nll
    );
}
