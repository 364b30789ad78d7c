use outagecast::netmodel::{
    predict_sequence, Gru, GruMask, InitialConfig, InitialPredictor, LogStep, RealtimeConfig, RealtimeMasks,
    RealtimeModel,
};
use outagecast::numcore::{grad_check, Checkpoint, Graph, ParamSet, Tensor};
use proptest::prelude::*;

fn zero_all(params: &mut ParamSet) {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        params.value_mut(id).fill(0.0);
    }
}

fn small_config(context_free: bool, layer_norm: bool, heads: usize) -> RealtimeConfig {
    RealtimeConfig {
        vocab_size: 9,
        feature_dim: 3,
        embed: 4,
        cell: 3,
        state: 5,
        heads,
        layer_norm,
        context_free,
    }
}

#[test]
fn zero_initial_predictor_gives_ln2() {
    let mut m = InitialPredictor::new(InitialConfig::new(4), 1).unwrap();
    zero_all(&mut m.params);
    let p = m.predict(&[0.3, -1.0, 2.0, 0.0]).unwrap();
    assert!((p.k() - 2f64.ln()).abs() < 1e-15);
    assert!((p.theta() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn zero_gru_stays_at_zero_state() {
    for ln in [true, false] {
        let mut params = ParamSet::new(4);
        let gru = Gru::new(&mut params, "g", 3, 4, ln).unwrap();
        zero_all(&mut params);
        let mut g = Graph::with_params(&params);
        let nodes = gru.nodes(&mut g, None).unwrap();
        let mut h = g.constant(Tensor::zeros(1, 4)).unwrap();
        for _ in 0..3 {
            let x = g.constant(Tensor::row(vec![1.0, -2.0, 0.5])).unwrap();
            h = gru.step(&mut g, &nodes, x, h).unwrap();
        }
        assert!(g.value(h).data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_gru_halves_previous_state() {
    let mut params = ParamSet::new(4);
    let gru = Gru::new(&mut params, "g", 2, 3, true).unwrap();
    zero_all(&mut params);
    let mut g = Graph::with_params(&params);
    let nodes = gru.nodes(&mut g, None).unwrap();
    let h0 = g.constant(Tensor::row(vec![0.8, -0.4, 0.2])).unwrap();
    let x = g.constant(Tensor::row(vec![1.0, 1.0])).unwrap();
    let h1 = gru.step(&mut g, &nodes, x, h0).unwrap();
    assert_eq!(g.value(h1).data(), &[0.4, -0.2, 0.1]);
}

#[test]
fn zero_realtime_model_uniform_attention() {
    for cf in [false, true] {
        let mut m = RealtimeModel::new(small_config(cf, true, 2), 3).unwrap();
        zero_all(&mut m.params);
        let toks = [1usize, 4, 4, 7];
        let logs = [
            LogStep {
                elapsed_hours: 0.5,
                tokens: &toks,
            },
            LogStep {
                elapsed_hours: 1.0,
                tokens: &toks[..2],
            },
        ];
        let out = m.predict(&[0.1, 0.2, 0.3], &logs).unwrap();
        assert_eq!(out.len(), 2);
        for (i, (p, attn)) in out.iter().enumerate() {
            assert!((p.k() - 2f64.ln()).abs() < 1e-15);
            assert!((p.theta() - 2f64.ln()).abs() < 1e-15);
            assert_eq!(attn.len(), 2);
            let n = logs[i].tokens.len();
            for head in attn {
                assert_eq!(head.len(), n);
                for &a in head {
                    assert!((a - 1.0 / n as f64).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn heads_stay_positive_when_saturated() {
    let mut m = InitialPredictor::new(InitialConfig::new(2), 9).unwrap();
    let ids: Vec<_> = m.params.ids().collect();
    for id in ids {
        m.params.value_mut(id).fill(-50.0);
    }
    let p = m.predict(&[100.0, 100.0]).unwrap();
    assert!(p.k() > 0.0 && p.theta() > 0.0);
    assert!(p.k().is_finite() && p.theta().is_finite());
}

#[test]
fn initial_predictor_grad_check() {
    let mut m = InitialPredictor::new(
        InitialConfig {
            input_dim: 3,
            h1: 4,
            h2: 3,
        },
        11,
    )
    .unwrap();
    // shift biases away from ReLU kinks
    let ids: Vec<_> = m.params.ids().collect();
    for id in ids {
        if m.params.name(id).starts_with("init.b") {
            m.params.value_mut(id).fill(0.3);
        }
    }
    let model = m.clone();
    let report = grad_check(&mut m.params, 1e-5, |g| {
        let (k, t) = model.forward(g, &[0.4, -0.7, 1.1])?;
        outagecast::gammadist::nll_node(g, k, t, 2.5)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-5, "{report:?}");
}

#[test]
fn chained_gru_grad_check() {
    for ln in [true, false] {
        let mut params = ParamSet::new(21);
        let gru = Gru::new(&mut params, "g", 2, 3, ln).unwrap();
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            if params.name(id).contains("ln_gain") || params.name(id).contains(".b_") {
                let n = params.value(id).len();
                for (i, v) in params.value_mut(id).data_mut().iter_mut().enumerate() {
                    *v += 0.1 * (i as f64 - n as f64 / 2.0);
                }
            }
        }
        let xs = [[0.5, -1.0], [1.5, 0.2], [-0.3, 0.9]];
        let report = grad_check(&mut params, 1e-5, |g| {
            let nodes = gru.nodes(g, None)?;
            let mut h = g.constant(Tensor::row(vec![0.1, -0.2, 0.3]))?;
            for x in &xs {
                let x = g.constant(Tensor::row(x.to_vec()))?;
                h = gru.step(g, &nodes, x, h)?;
            }
            let sq = g.mul(h, h)?;
            g.sum(sq)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-5, "layer_norm={ln}: {report:?}");
    }
}

fn sequence_grad_check(cfg: RealtimeConfig, with_masks: bool) {
    let mut m = RealtimeModel::new(cfg, 5).unwrap();
    let ids: Vec<_> = m.params.ids().collect();
    for id in ids {
        let name = m.params.name(id).to_string();
        if name.starts_with("att") && name.contains(".b") {
            m.params.value_mut(id).fill(0.2);
        }
    }
    let model = m.clone();
    let masks = with_masks.then(|| {
        let [a, b, c] = model.mask_shapes();
        let mk = |(i, h): (usize, usize)| GruMask {
            input: (0..i).map(|j| if j % 3 == 0 { 0.0 } else { 1.5 }).collect(),
            recurrent: (0..h).map(|j| if j % 2 == 0 { 2.0 } else { 0.0 }).collect(),
        };
        RealtimeMasks {
            encoder_forward: mk(a),
            encoder_backward: mk(b),
            update: mk(c),
        }
    });
    let t1 = [1usize, 5, 2, 8];
    let t2 = [3usize, 3, 8];
    let t3 = [0usize, 8];
    let logs = [
        LogStep {
            elapsed_hours: 0.25,
            tokens: &t1,
        },
        LogStep {
            elapsed_hours: 1.0,
            tokens: &t2,
        },
        LogStep {
            elapsed_hours: 2.5,
            tokens: &t3,
        },
    ];
    let report = grad_check(&mut m.params, 1e-5, |g| {
        model.sequence_loss(g, &[0.3, -0.5, 1.2], &logs, &[3.0, 2.2, 0.6], masks.as_ref())
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{cfg:?}: {report:?}");
}

#[test]
fn realtime_sequence_grad_check() {
    for cfg in [
        small_config(false, true, 2),
        small_config(true, true, 2),
    ] {
        sequence_grad_check(cfg, false);
    }
    sequence_grad_check(small_config(false, true, 2), true);
}

#[test]
fn rejects_bad_inputs() {
    let m = RealtimeModel::new(small_config(false, true, 2), 1).unwrap();
    let t = [1usize, 8];
    let step = |h| LogStep {
        elapsed_hours: h,
        tokens: &t,
    };
    let f = [0.0; 3];
    assert!(m.predict(&f, &[step(-0.1)]).is_err());
    assert!(m.predict(&f, &[step(2.0), step(1.0)]).is_err());
    assert!(m.predict(&f, &[step(f64::NAN)]).is_err());
    assert!(m.predict(&[0.0; 2], &[step(1.0)]).is_err());
    let oov = [99usize];
    assert!(m
        .predict(
            &f,
            &[LogStep {
                elapsed_hours: 1.0,
                tokens: &oov
            }]
        )
        .is_err());
    let empty: [usize; 0] = [];
    assert!(m
        .predict(
            &f,
            &[LogStep {
                elapsed_hours: 1.0,
                tokens: &empty
            }]
        )
        .is_err());
    assert!(RealtimeModel::new(small_config(false, true, 3), 1).is_err());
    let init = InitialPredictor::new(InitialConfig::new(3), 1).unwrap();
    assert!(predict_sequence(&init, &f, &m, &f, &[step(2.0), step(1.0)]).is_err());
    assert!(init.predict(&[1.0]).is_err());
}

#[test]
fn predict_sequence_without_logs_is_onset_only() {
    let m = RealtimeModel::new(small_config(false, true, 2), 1).unwrap();
    let init = InitialPredictor::new(InitialConfig::new(3), 1).unwrap();
    let out = predict_sequence(&init, &[0.1, 0.2, 0.3], &m, &[0.0; 3], &[]).unwrap();
    assert!(out.updates.is_empty() && out.attention.is_empty());
    assert_eq!(out.initial, init.predict(&[0.1, 0.2, 0.3]).unwrap());
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let cfg = small_config(false, true, 2);
    let m = RealtimeModel::new(cfg, 17).unwrap();
    let ck = Checkpoint {
        seed: 17,
        config_hash: "abc".into(),
        meta: cfg.to_meta(),
        params: m.params.clone(),
    };
    let back = Checkpoint::parse(&ck.to_text()).unwrap();
    let cfg2 = RealtimeConfig::from_meta(&back.meta).unwrap();
    assert_eq!(cfg, cfg2);
    let m2 = RealtimeModel::from_params(cfg2, &back.params).unwrap();
    let t = [2usize, 3, 8];
    let logs = [LogStep {
        elapsed_hours: 0.7,
        tokens: &t,
    }];
    let a = m.predict(&[1.0, 2.0, 3.0], &logs).unwrap();
    let b = m2.predict(&[1.0, 2.0, 3.0], &logs).unwrap();
    assert_eq!(a[0].0, b[0].0);
    assert!(InitialConfig::from_meta(&back.meta).is_err());
    let other = RealtimeModel::new(small_config(true, true, 2), 1).unwrap();
    assert!(RealtimeModel::from_params(cfg, &other.params).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // without recurrence, attention pooling cannot see token order
    #[test]
    fn context_free_encoder_is_permutation_invariant(
        tokens in prop::collection::vec(0usize..9, 1..8),
        seed in 0u64..1000,
        shift in 0usize..8,
    ) {
        let m = RealtimeModel::new(small_config(true, true, 2), seed).unwrap();
        let mut perm = tokens.clone();
        perm.rotate_left(shift % tokens.len());
        perm.reverse();
        let f = [0.2, -0.1, 0.4];
        let a = m.predict(&f, &[LogStep { elapsed_hours: 1.0, tokens: &tokens }]).unwrap();
        let b = m.predict(&f, &[LogStep { elapsed_hours: 1.0, tokens: &perm }]).unwrap();
        prop_assert!((a[0].0.k() - b[0].0.k()).abs() < 1e-12);
        prop_assert!((a[0].0.theta() - b[0].0.theta()).abs() < 1e-12);
        for head in 0..2 {
            let mut x = a[0].1[head].clone();
            let mut y = b[0].1[head].clone();
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            for (p, q) in x.iter().zip(&y) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_are_distributions(
        tokens in prop::collection::vec(0usize..9, 1..10),
        seed in 0u64..1000,
        t in 0.0f64..30.0,
    ) {
        let m = RealtimeModel::new(small_config(false, true, 2), seed).unwrap();
        let out = m.predict(&[0.0, 1.0, -1.0], &[LogStep { elapsed_hours: t, tokens: &tokens }]).unwrap();
        for head in &out[0].1 {
            prop_assert_eq!(head.len(), tokens.len());
            prop_assert!((head.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(head.iter().all(|&a| (0.0..=1.0).contains(&a)));
        }
        prop_assert!(out[0].0.k() > 0.0 && out[0].0.theta() > 0.0);
    }
}

#[test]
fn closed_update_gate_keeps_previous_state() {
    let mut params = ParamSet::new(4);
    let gru = Gru::new(&mut params, "g", 2, 3, true).unwrap();
    zero_all(&mut params);
    let bz = params.id("g.b_z").unwrap();
    params.value_mut(bz).fill(-60.0);
    let mut g = Graph::with_params(&params);
    let nodes = gru.nodes(&mut g, None).unwrap();
    let h0 = g.constant(Tensor::row(vec![0.8, -0.4, 0.2])).unwrap();
    let x = g.constant(Tensor::row(vec![3.0, -1.0])).unwrap();
    let h1 = gru.step(&mut g, &nodes, x, h0).unwrap();
    for (a, b) in g.value(h1).data().iter().zip([0.8, -0.4, 0.2]) {
        assert!((a - b).abs() < 1e-20);
    }
}

#[test]
fn single_token_attention_is_one() {
    let m = RealtimeModel::new(small_config(false, true, 2), 8).unwrap();
    let t = [4usize];
    let out = m
        .predict(
            &[0.0; 3],
            &[LogStep {
                elapsed_hours: 0.0,
                tokens: &t,
            }],
        )
        .unwrap();
    assert_eq!(out[0].1, vec![vec![1.0], vec![1.0]]);
}
