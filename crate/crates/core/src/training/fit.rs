use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Target, TrainConfig};
use super::data::{OnsetExample, SequenceExample};
use super::optim::{clip_grad_norm, variational_dropout_masks, AdamState};
use crate::error::{Error, Result};
use crate::gammadist::nll_node;
use crate::netmodel::{InitialPredictor, RealtimeMasks, RealtimeModel};
use crate::numcore::{Graph, ParamSet, Tensor, Var};

/// Models whose parameters the epoch loop can update.
pub trait Trainable {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
}

impl Trainable for InitialPredictor {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

impl Trainable for RealtimeModel {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub valid_nll: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_valid_nll: f64,
    pub skipped_steps: u64,
}

impl History {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_nll\tvalid_nll\n");
        for e in &self.epochs {
            out.push_str(&format!("{}\t{:.6}\t{:.6}\n", e.epoch, e.train_nll, e.valid_nll));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainedInitial {
    pub model: InitialPredictor,
    pub history: History,
}

#[derive(Clone, Debug)]
pub struct TrainedRealtime {
    pub model: RealtimeModel,
    pub history: History,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Shared epoch loop: shuffled single-example Adam steps, validation after
/// each epoch, best-snapshot early stopping.
///
/// `loss` builds one example's loss and returns it with the number of
/// predictions it covers; `validate` returns mean validation NLL.
fn run_epochs<M: Trainable, L, V>(
    model: &mut M,
    n_train: usize,
    cfg: &TrainConfig,
    mut loss: L,
    validate: V,
) -> Result<History>
where
    L: FnMut(&M, &mut Graph<'_>, usize, &mut ChaCha8Rng) -> Result<(Var, usize)>,
    V: Fn(&M) -> Result<f64>,
{
    let mut adam = AdamState::new(model.params());
    let mut shuffle = stream(cfg.seed, SHUFFLE_STREAM);
    let mut dropout = stream(cfg.seed, DROPOUT_STREAM);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        best_valid_nll: f64::INFINITY,
        skipped_steps: 0,
    };
    let mut best: Option<Vec<Tensor>> = None;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut count = 0usize;
        for &i in &order {
            let (value, grads) = {
                let mut g = Graph::with_params(model.params());
                let (root, n) = loss(model, &mut g, i, &mut dropout)?;
                let value = g.value(root).item();
                if value.is_finite() {
                    total += value;
                    count += n;
                }
                g.backward(root)?;
                (value, g.param_grads())
            };
            let params = model.params_mut();
            params.accumulate(&grads);
            if value.is_finite() {
                clip_grad_norm(params, cfg.clip);
            }
            adam.step(params, cfg.lr)?;
        }
        let valid = validate(model)?;
        let train_nll = if count > 0 { total / count as f64 } else { f64::NAN };
        history.epochs.push(EpochRecord {
            epoch,
            train_nll,
            valid_nll: valid,
        });
        log::info!("epoch {epoch}: train {train_nll:.4} valid {valid:.4}");
        if valid < history.best_valid_nll {
            history.best_valid_nll = valid;
            history.best_epoch = epoch;
            best = Some(model.params().snapshot());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    history.skipped_steps = adam.skipped;
    match best {
        Some(snapshot) => model.params_mut().restore(&snapshot)?,
        None => return Err(Error::NonFinite { op: "validation" }),
    }
    Ok(history)
}

pub fn evaluate_initial(model: &InitialPredictor, examples: &[OnsetExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let mut total = 0.0;
    for e in examples {
        total += model.predict(&e.x)?.nll(e.duration)?;
    }
    Ok(total / examples.len() as f64)
}

/// Mean NLL over every log of every example.
pub fn evaluate_realtime(model: &RealtimeModel, examples: &[SequenceExample], target: Target) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for e in examples {
        let preds = model.predict(&e.x, &e.steps())?;
        for ((p, _), d) in preds.iter().zip(e.targets(target)) {
            total += p.nll(d)?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    Ok(total / n as f64)
}

fn check_widths(widths: impl Iterator<Item = usize>) -> Result<usize> {
    let mut dim = None;
    for w in widths {
        match dim {
            None => dim = Some(w),
            Some(d) if d != w => return Err(Error::data(format!("feature widths differ: {d} and {w}"))),
            _ => {}
        }
    }
    dim.ok_or_else(|| Error::data("empty split"))
}

pub fn train_initial(train: &[OnsetExample], valid: &[OnsetExample], cfg: &TrainConfig) -> Result<TrainedInitial> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::data("initial training needs non-empty train and validation splits"));
    }
    let dim = check_widths(train.iter().chain(valid).map(|e| e.x.len()))?;
    let mut model = InitialPredictor::new(cfg.initial_config(dim), cfg.seed)?;
    let history = run_epochs(
        &mut model,
        train.len(),
        cfg,
        |m, g, i, _| {
            let e = &train[i];
            let (k, theta) = m.forward(g, &e.x)?;
            Ok((nll_node(g, k, theta, e.duration)?, 1))
        },
        |m| evaluate_initial(m, valid),
    )?;
    Ok(TrainedInitial { model, history })
}

pub fn train_realtime(
    train: &[SequenceExample],
    valid: &[SequenceExample],
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<TrainedRealtime> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::data("real-time training needs non-empty train and validation splits"));
    }
    if let Some(e) = train.iter().chain(valid).find(|e| e.tokens.is_empty()) {
        return Err(Error::data(format!("outage {} has no repair logs", e.id)));
    }
    let dim = check_widths(train.iter().chain(valid).map(|e| e.x.len()))?;
    let mut model = RealtimeModel::new(cfg.realtime_config(vocab_size, dim), cfg.seed)?;
    let shapes = model.mask_shapes();
    let history = run_epochs(
        &mut model,
        train.len(),
        cfg,
        |m, g, i, rng| {
            let e = &train[i];
            let masks = if cfg.dropout > 0.0 {
                let [a, b, c] = <[_; 3]>::try_from(variational_dropout_masks(&shapes, cfg.dropout, rng)?).unwrap();
                Some(RealtimeMasks {
                    encoder_forward: a,
                    encoder_backward: b,
                    update: c,
                })
            } else {
                None
            };
            let steps = e.steps();
            let loss = m.sequence_loss(g, &e.x, &steps, &e.targets(cfg.target), masks.as_ref())?;
            Ok((loss, steps.len()))
        },
        |m| evaluate_realtime(m, valid, cfg.target),
    )?;
    Ok(TrainedRealtime { model, history })
}
