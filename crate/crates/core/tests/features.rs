use chrono::Duration;
use outagecast::datastore::{filter_outages, generate_synthetic, split_by_date, GenConfig, SplitSpec};
use outagecast::features::{
    is_exempt, FeatureBuilder, FeatureVector, FeederStats, RecentIndex, StandardizationStats, WeatherIndex,
    FEEDER_PSEUDO_COUNT, NUM_CAUSES, NUM_ONSET,
};
use outagecast::training::Dataset;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn builder(seed: u64, include_cause: bool) -> (FeatureBuilder, Vec<outagecast::datastore::OutageRecord>) {
    let corpus = generate_synthetic(&GenConfig::default(), seed).unwrap();
    let kept = filter_outages(&corpus.outages);
    let train = split_by_date(&kept, &SplitSpec::standard()).train;
    let b = FeatureBuilder {
        weather: WeatherIndex::new(corpus.weather.clone()),
        recent: RecentIndex::from_outages(&corpus.outages),
        stats: FeederStats::from_outages(&train).unwrap(),
        include_cause,
    };
    (b, train)
}

#[test]
fn vector_lengths_and_flags() {
    let (b, train) = builder(3, false);
    for o in &train {
        let v = b.build(o).unwrap();
        assert_eq!(v.len(), NUM_ONSET);
        assert!(v.values.iter().all(|x| x.is_finite()));
        assert!(v.values[4] == 0.0 || v.values[4] == 1.0);
        assert!(v.values[14] == 0.0 || v.values[14] == 1.0);
        assert!(v.values[17] <= v.values[18]);
    }
    let (b, train) = builder(3, true);
    let v = b.build(&train[0]).unwrap();
    assert_eq!(v.len(), NUM_ONSET + NUM_CAUSES);
    assert_eq!(v.values[NUM_ONSET..].iter().sum::<f64>(), 1.0);
    assert_eq!(v.values[NUM_ONSET + train[0].cause.index()], 1.0);
}

#[test]
fn extraction_is_pure() {
    let (b, train) = builder(4, true);
    for o in train.iter().take(50) {
        let a = b.build(o).unwrap();
        let c = b.build(o).unwrap();
        assert!(a.values.iter().zip(&c.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn training_moments_after_standardization() {
    let (b, train) = builder(5, true);
    let raw: Vec<FeatureVector> = train.iter().map(|o| b.build(o).unwrap()).collect();
    let stats = StandardizationStats::fit(&raw).unwrap();
    let z: Vec<FeatureVector> = raw.iter().map(|v| stats.standardize(v).unwrap()).collect();
    let n = z.len() as f64;
    for d in 0..stats.dim() {
        let col: Vec<f64> = z.iter().map(|v| v.values[d]).collect();
        if is_exempt(d) {
            assert!(col.iter().zip(&raw).all(|(x, r)| *x == r.values[d]), "dim {d} changed");
            continue;
        }
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-6, "dim {d} mean {mean}");
        if stats.std[d] > 1e-6 {
            assert!((var.sqrt() - 1.0).abs() < 1e-6, "dim {d} std {}", var.sqrt());
        }
    }
}

#[test]
fn mean_vector_maps_to_zero() {
    let (b, train) = builder(6, false);
    let raw: Vec<FeatureVector> = train.iter().map(|o| b.build(o).unwrap()).collect();
    let stats = StandardizationStats::fit(&raw).unwrap();
    let z = stats
        .standardize(&FeatureVector {
            values: stats.mean.clone(),
        })
        .unwrap();
    for (d, x) in z.values.iter().enumerate() {
        if !is_exempt(d) {
            assert!(x.abs() < 1e-12);
        }
    }
    assert!(stats.standardize(&FeatureVector { values: vec![0.0; 3] }).is_err());
}

#[test]
fn leakage_canary_feeder_stats_ignore_held_out_durations() {
    let cfg = GenConfig::default();
    let corpus = generate_synthetic(&cfg, 7).unwrap();
    let spec = SplitSpec::standard();
    let base = Dataset::build(&corpus, &spec).unwrap();
    let mut perturbed = corpus.clone();
    let cut = spec.train_end.and_hms_opt(0, 0, 0).unwrap();
    for o in &mut perturbed.outages {
        if o.start >= cut {
            o.end = o.start + (o.end - o.start) / 2 + Duration::minutes(3);
        }
    }
    let other = Dataset::build(&perturbed, &spec).unwrap();
    assert_eq!(base.feeder_stats, other.feeder_stats);
    assert_eq!(base.standardization, other.standardization);
    assert_ne!(
        base.splits.test.iter().map(|o| o.outage.end).collect::<Vec<_>>(),
        other.splits.test.iter().map(|o| o.outage.end).collect::<Vec<_>>()
    );
}

#[test]
fn feeder_stats_text_round_trip() {
    let (b, _) = builder(8, false);
    let back = FeederStats::parse(&b.stats.to_text()).unwrap();
    assert_eq!(back, b.stats);
}

proptest! {
    #[test]
    fn standardize_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, NUM_ONSET), 2..20)) {
        let vs: Vec<FeatureVector> = rows.into_iter().map(|values| FeatureVector { values }).collect();
        let stats = StandardizationStats::fit(&vs).unwrap();
        for v in &vs {
            let back = stats.unstandardize(&stats.standardize(v).unwrap()).unwrap();
            for (a, b) in back.values.iter().zip(&v.values) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn smoothed_mean_lies_between_feeder_and_global(n in 0usize..500, m in 0.1f64..20.0, g in 0.1f64..20.0) {
        let mut per = BTreeMap::new();
        per.insert(1u32, (n, m));
        let s = FeederStats::from_parts(per, g);
        let got = s.smoothed_mean(1);
        let want = (n as f64 * m + FEEDER_PSEUDO_COUNT * g) / (n as f64 + FEEDER_PSEUDO_COUNT);
        prop_assert!((got - want).abs() < 1e-12 * want);
        prop_assert!(got >= m.min(g) - 1e-12 && got <= m.max(g) + 1e-12);
        prop_assert_eq!(s.smoothed_mean(2), g);
    }
}
