use outagecast::datastore::{generate_synthetic, GenConfig, SplitSpec};
use outagecast::features::FeatureSet;
use outagecast::gammadist::GammaParams;
use outagecast::netmodel::RealtimeModel;
use outagecast::numcore::{grad_check, Graph, ParamSet, Tensor};
use outagecast::training::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let corpus = generate_synthetic(&GenConfig::default(), 3).unwrap();
        Dataset::build(&corpus, &SplitSpec::default()).unwrap()
    })
}

fn scalar_param(value: f64) -> ParamSet {
    let mut p = ParamSet::new(0);
    p.insert("p", Tensor::scalar(value)).unwrap();
    p
}

/// Accumulates d/dp of `(p - target)^2` and returns the loss.
fn quadratic_grad(params: &mut ParamSet, target: f64) -> f64 {
    let id = params.id("p").unwrap();
    let (loss, grads) = {
        let mut g = Graph::with_params(params);
        let p = g.param(id);
        let c = g.scalar(target).unwrap();
        let d = g.sub(p, c).unwrap();
        let sq = g.mul(d, d).unwrap();
        g.backward(sq).unwrap();
        (g.value(sq).item(), g.param_grads())
    };
    params.accumulate(&grads);
    loss
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut params = scalar_param(1.25);
    let mut adam = AdamState::new(&params);
    assert!(adam.step(&mut params, 0.001).unwrap());
    assert_eq!(params.value(params.id("p").unwrap()).item(), 1.25);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let mut params = scalar_param(0.0);
    let mut adam = AdamState::new(&params);
    // d/dp (p - 0.5)^2 at 0 is -1
    quadratic_grad(&mut params, 0.5);
    adam.step(&mut params, 0.001).unwrap();
    let p = params.value(params.id("p").unwrap()).item();
    assert!((p - 0.001).abs() < 1e-9, "{p}");
    assert_eq!(params.grad(params.id("p").unwrap()).item(), 0.0);
    assert_eq!(adam.t, 1);
}

#[test]
fn adam_converges_on_quadratic() {
    let mut params = scalar_param(0.0);
    let mut adam = AdamState::new(&params);
    let mut losses = Vec::new();
    for _ in 0..200 {
        losses.push(quadratic_grad(&mut params, 3.0));
        adam.step(&mut params, 0.1).unwrap();
    }
    let p = params.value(params.id("p").unwrap()).item();
    assert!((p - 3.0).abs() < 0.5, "{p}");
    assert!(losses.last().unwrap() < &(0.1 * losses[0]));
    // monotone over the approach phase
    for w in losses[..20].windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn adam_skips_non_finite_gradients() {
    let mut params = scalar_param(1e-300);
    let mut adam = AdamState::new(&params);
    let id = params.id("p").unwrap();
    let grads = {
        let mut g = Graph::with_params(&params);
        let p = g.param(id);
        let s = g.scale(p, 1.5e308).unwrap();
        g.backward(s).unwrap();
        g.param_grads()
    };
    // two finite gradients whose sum overflows
    params.accumulate(&grads);
    params.accumulate(&grads);
    assert!(!adam.step(&mut params, 0.001).unwrap());
    assert_eq!(adam.skipped, 1);
    assert_eq!(adam.t, 0);
    assert_eq!(params.value(id).item(), 1e-300);
    assert_eq!(params.grad(id).item(), 0.0);
    assert!(adam.moments_finite());
}

#[test]
fn clipping_rescales_to_ceiling() {
    let mut params = scalar_param(0.0);
    quadratic_grad(&mut params, 10.0);
    let before = clip_grad_norm(&mut params, 5.0);
    assert!((before - 20.0).abs() < 1e-12);
    assert!((params.grad_norm() - 5.0).abs() < 1e-12);
    quadratic_grad(&mut params, 10.0);
    clip_grad_norm(&mut params, 0.0);
    assert!(params.grad_norm() > 5.0);
}

#[test]
fn dropout_rate_zero_is_all_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let masks = variational_dropout_masks(&[(4, 3), (2, 5)], 0.0, &mut rng).unwrap();
    assert_eq!(masks.len(), 2);
    assert_eq!(masks[0].input, vec![1.0; 4]);
    assert_eq!(masks[1].recurrent, vec![1.0; 5]);
}

#[test]
fn dropout_mask_mean_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let masks = variational_dropout_masks(&[(50_000, 50_000)], 0.3, &mut rng).unwrap();
    let all: Vec<f64> = masks[0].input.iter().chain(&masks[0].recurrent).copied().collect();
    assert_eq!(all.len(), 100_000);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
    assert!(all.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-15));
}

#[test]
fn dropout_rejects_bad_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for rate in [1.0, -0.1, f64::NAN] {
        assert!(variational_dropout_masks(&[(2, 2)], rate, &mut rng).is_err(), "{rate}");
    }
}

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

/// Maximum-likelihood Gamma fit: Newton on `ln k - digamma(k) = ln(mean) - mean(ln x)`.
fn gamma_mle(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let s = mean.ln() - xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..50 {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        k -= f / df;
    }
    (k, mean / k)
}

#[test]
fn no_feature_model_recovers_gamma() {
    let truth = GammaParams::new(2.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut draw = |n: usize, offset: u64| -> Vec<OnsetExample> {
        (0..n)
            .map(|i| OnsetExample {
                id: offset + i as u64,
                x: Vec::new(),
                duration: truth.sample(&mut rng),
            })
            .collect()
    };
    let train = draw(10_000, 0);
    let valid = draw(2_000, 10_000);
    let cfg = TrainConfig {
        features: FeatureSet::None,
        ..TrainConfig::default()
    };
    let fitted = train_initial(&train, &valid, &cfg).unwrap();
    let p = fitted.model.predict(&[]).unwrap();
    let (k_mle, theta_mle) = gamma_mle(&train.iter().map(|e| e.duration).collect::<Vec<_>>());

    assert!((p.k() - 2.0).abs() / 2.0 < 0.05, "k {}", p.k());
    assert!((p.theta() - 3.0).abs() / 3.0 < 0.05, "theta {}", p.theta());
    assert!((p.mean() - 6.0).abs() / 6.0 < 0.02, "mean {}", p.mean());
    assert!((p.k() - k_mle).abs() / k_mle < 0.03, "k {} vs mle {k_mle}", p.k());
    assert!((p.mean() - k_mle * theta_mle).abs() / (k_mle * theta_mle) < 0.02);
}

#[test]
fn gamma_mle_oracle_is_stationary() {
    let xs = [0.5, 1.7, 2.2, 3.9, 4.4, 7.0, 0.9];
    let (k, theta) = gamma_mle(&xs);
    // d/dk and d/dtheta of the summed log-likelihood vanish
    let n = xs.len() as f64;
    let dk: f64 = xs.iter().map(|x| x.ln()).sum::<f64>() - n * digamma(k) - n * theta.ln();
    let dtheta: f64 = xs.iter().sum::<f64>() / (theta * theta) - n * k / theta;
    assert!(dk.abs() < 1e-9 && dtheta.abs() < 1e-9, "{dk} {dtheta}");
    assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-12);
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        max_epochs: 4,
        patience: 2,
        h1: 8,
        h2: 4,
        embed: 6,
        cell: 4,
        state: 6,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn onset(fs: FeatureSet) -> (Vec<OnsetExample>, Vec<OnsetExample>) {
    let ds = dataset();
    (
        onset_examples(&ds.splits.train, fs).unwrap(),
        onset_examples(&ds.splits.validation, fs).unwrap(),
    )
}

#[test]
fn early_stopping_keeps_best_snapshot() {
    let (train, valid) = onset(FeatureSet::AllOnset);
    let cfg = TrainConfig {
        max_epochs: 8,
        ..small_cfg()
    };
    let fitted = train_initial(&train, &valid, &cfg).unwrap();
    let h = &fitted.history;
    let min = h.epochs.iter().map(|e| e.valid_nll).fold(f64::INFINITY, f64::min);
    assert_eq!(h.best_valid_nll, min);
    assert_eq!(h.epochs[h.best_epoch - 1].valid_nll, min);
    assert!(h.best_valid_nll <= h.epochs.last().unwrap().valid_nll);
    assert_eq!(evaluate_initial(&fitted.model, &valid).unwrap(), h.best_valid_nll);
    let after_best = h.epochs.len() - h.best_epoch;
    assert!(h.epochs.len() == cfg.max_epochs || after_best == cfg.patience);
    assert!(h.to_tsv().starts_with("epoch\ttrain_nll\tvalid_nll\n"));
}

#[test]
fn initial_training_is_deterministic() {
    let (train, valid) = onset(FeatureSet::AllOnset);
    let a = train_initial(&train, &valid, &small_cfg()).unwrap();
    let b = train_initial(&train, &valid, &small_cfg()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params.snapshot(), b.model.params.snapshot());
    let c = train_initial(&train, &valid, &TrainConfig { seed: 6, ..small_cfg() }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn updates_never_read_validation_targets() {
    let (train, valid) = onset(FeatureSet::AllOnset);
    let cfg = TrainConfig {
        max_epochs: 1,
        ..small_cfg()
    };
    let shifted: Vec<OnsetExample> = valid
        .iter()
        .map(|e| OnsetExample {
            duration: e.duration * 7.0 + 1.0,
            ..e.clone()
        })
        .collect();
    let a = train_initial(&train, &valid, &cfg).unwrap();
    let b = train_initial(&train, &shifted, &cfg).unwrap();
    assert_eq!(a.model.params.snapshot(), b.model.params.snapshot());
    assert_ne!(a.history.best_valid_nll, b.history.best_valid_nll);

    let ds = dataset();
    let vocab = ds.vocab(2).unwrap();
    let tr = sequence_examples(&ds.splits.train, FeatureSet::AllOnset, &vocab).unwrap();
    let va = sequence_examples(&ds.splits.validation, FeatureSet::AllOnset, &vocab).unwrap();
    let va_shifted: Vec<SequenceExample> = va
        .iter()
        .map(|e| SequenceExample {
            duration: e.duration * 3.0,
            ..e.clone()
        })
        .collect();
    let tr = &tr[..60];
    let a = train_realtime(tr, &va, vocab.len(), &cfg).unwrap();
    let b = train_realtime(tr, &va_shifted, vocab.len(), &cfg).unwrap();
    assert_eq!(a.model.params.snapshot(), b.model.params.snapshot());
}

#[test]
fn training_rejects_empty_splits() {
    let (train, valid) = onset(FeatureSet::AllOnset);
    assert!(train_initial(&[], &valid, &small_cfg()).is_err());
    assert!(train_initial(&train, &[], &small_cfg()).is_err());
    assert!(train_realtime(&[], &[], 10, &small_cfg()).is_err());
}

#[test]
fn realtime_rejects_outage_without_logs() {
    let ds = dataset();
    let vocab = ds.vocab(2).unwrap();
    let tr = sequence_examples(&ds.splits.train, FeatureSet::AllOnset, &vocab).unwrap();
    let mut empty = tr[0].clone();
    empty.elapsed.clear();
    empty.tokens.clear();
    let err = train_realtime(&[empty], &tr[1..3], vocab.len(), &small_cfg());
    assert!(err.is_err());
}

#[test]
fn realtime_loss_is_finite_at_initialization() {
    let ds = dataset();
    let vocab = ds.vocab(2).unwrap();
    let examples = sequence_examples(&ds.splits.train, FeatureSet::AllOnset, &vocab).unwrap();
    assert!(examples.len() >= 100);
    let cfg = TrainConfig::default();
    let model = RealtimeModel::new(cfg.realtime_config(vocab.len(), examples[0].x.len()), 9).unwrap();
    for e in &examples[..100] {
        let mut g = Graph::with_params(&model.params);
        let loss = model
            .sequence_loss(&mut g, &e.x, &e.steps(), &e.targets(cfg.target), None)
            .unwrap();
        assert!(g.value(loss).item().is_finite(), "outage {}", e.id);
    }
}

#[test]
fn realtime_grad_check_on_synthetic_outage() {
    let ds = dataset();
    let vocab = ds.vocab(2).unwrap();
    let examples = sequence_examples(&ds.splits.train, FeatureSet::Time, &vocab).unwrap();
    let e = examples.iter().find(|e| e.tokens.len() >= 2).unwrap();
    let cfg = TrainConfig {
        embed: 4,
        cell: 3,
        state: 4,
        ..TrainConfig::default()
    };
    let mut m = RealtimeModel::new(cfg.realtime_config(vocab.len(), e.x.len()), 0).unwrap();
    let model = m.clone();
    let steps = e.steps();
    let targets = e.targets(cfg.target);
    let report = grad_check(&mut m.params, 1e-5, |g| model.sequence_loss(g, &e.x, &steps, &targets, None)).unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn realtime_training_keeps_moments_finite() {
    let ds = dataset();
    let vocab = ds.vocab(2).unwrap();
    let tr = sequence_examples(&ds.splits.train, FeatureSet::AllOnset, &vocab).unwrap();
    let va = sequence_examples(&ds.splits.validation, FeatureSet::AllOnset, &vocab).unwrap();
    let cfg = TrainConfig {
        max_epochs: 2,
        dropout: 0.25,
        ..small_cfg()
    };
    let fitted = train_realtime(&tr, &va, vocab.len(), &cfg).unwrap();
    assert!(fitted.history.best_valid_nll.is_finite());
    assert!(fitted.model.params.snapshot().iter().all(Tensor::is_finite));
    let again = train_realtime(&tr, &va, vocab.len(), &cfg).unwrap();
    assert_eq!(fitted.history, again.history);

    // the same moments, driven by hand, stay finite
    let mut model = RealtimeModel::new(cfg.realtime_config(vocab.len(), tr[0].x.len()), 1).unwrap();
    let mut adam = AdamState::new(&model.params);
    for e in &tr[..50] {
        let grads = {
            let mut g = Graph::with_params(&model.params);
            let l = model.sequence_loss(&mut g, &e.x, &e.steps(), &e.targets(cfg.target), None).unwrap();
            g.backward(l).unwrap();
            g.param_grads()
        };
        model.params.accumulate(&grads);
        adam.step(&mut model.params, cfg.lr).unwrap();
    }
    assert!(adam.moments_finite());
    assert_eq!(adam.t, 50);
}

fn search_trial(cfg: &TrainConfig) -> outagecast::error::Result<f64> {
    let (train, valid) = onset(FeatureSet::AllOnset);
    Ok(train_initial(&train, &valid, cfg)?.history.best_valid_nll)
}

#[test]
fn search_with_budget_one() {
    let space = SearchSpace {
        lr: vec![0.002],
        max_epochs: vec![2],
        ..SearchSpace::default()
    };
    let board = random_search(&space, &small_cfg(), 1, 4, search_trial).unwrap();
    assert_eq!(board.trials.len(), 1);
    assert_eq!(board.best().config.lr, 0.002);
    assert!(board.best().valid_nll.is_finite());
    assert!(random_search(&space, &small_cfg(), 0, 4, search_trial).is_err());
}

#[test]
fn search_prefers_sane_learning_rate() {
    let space = SearchSpace {
        lr: vec![10.0, 0.001],
        max_epochs: vec![2],
        dropout: vec![0.0],
        ..SearchSpace::default()
    };
    let board = random_search(&space, &small_cfg(), 6, 8, search_trial).unwrap();
    assert!(board.trials.iter().any(|t| t.config.lr == 10.0));
    assert_eq!(board.best().config.lr, 0.001);
    for w in board.trials.windows(2) {
        assert!(w[0].valid_nll <= w[1].valid_nll);
    }
    let again = random_search(&space, &small_cfg(), 6, 8, search_trial).unwrap();
    let nll = |b: &Leaderboard| b.trials.iter().map(|t| (t.index, t.valid_nll.to_bits())).collect::<Vec<_>>();
    assert_eq!(nll(&board), nll(&again));
    assert!(board.to_tsv().lines().count() == 7);
}

#[test]
fn search_space_parses_lists() {
    let kv = outagecast::kv::KvFile::parse("search.lr = 0.01, 0.001\nsearch.heads = 1\nsearch.layer_norm = true,false\n").unwrap();
    let space = SearchSpace::from_kv(&kv).unwrap();
    assert_eq!(space.lr, vec![0.01, 0.001]);
    assert_eq!(space.heads, vec![1]);
    assert_eq!(space.layer_norm, vec![true, false]);
    let empty = SearchSpace {
        embed: vec![],
        ..SearchSpace::default()
    };
    assert!(empty.validate().is_err());
}

#[test]
fn saved_statistics_reproduce_held_out_features() {
    let ds = dataset();
    let corpus = generate_synthetic(&GenConfig::default(), 3).unwrap();
    let again = Dataset::prepare_with_stats(&corpus, &SplitSpec::default(), &ds.feeder_stats, &ds.standardization).unwrap();
    assert_eq!(again.counts(), ds.splits.counts());
    for (a, b) in again.test.iter().zip(&ds.splits.test) {
        assert_eq!(a.outage, b.outage);
        assert_eq!(a.features, b.features);
        assert_eq!(a.logs.len(), b.logs.len());
    }
}
