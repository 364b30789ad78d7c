//! Adam with batch size one, early stopping, variational dropout and random search.

mod config;
mod data;
mod fit;
mod optim;
mod search;

pub use config::{Target, TrainConfig, TRAIN_KEYS};
pub use data::{onset_examples, sequence_examples, Dataset, OnsetExample, PreparedLog, PreparedOutage, SequenceExample};
pub use fit::{
    evaluate_initial, evaluate_realtime, train_initial, train_realtime, EpochRecord, History, Trainable,
    TrainedInitial, TrainedRealtime,
};
pub use optim::{clip_grad_norm, variational_dropout_masks, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use search::{random_search, Leaderboard, SearchSpace, Trial};
