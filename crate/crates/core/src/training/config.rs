use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::io_util::sha256_hex;
use crate::kv::{parse_bool, parse_value, KvFile};
use crate::netmodel::{InitialConfig, RealtimeConfig};

/// What the real-time model predicts at each report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    /// Hours still to elapse, `d - T`.
    Remaining,
    /// Total outage duration `d`.
    Total,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Remaining => "remaining",
            Target::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "remaining" => Ok(Target::Remaining),
            "total" => Ok(Target::Total),
            _ => Err(Error::Config(format!("target must be remaining or total, got {s:?}"))),
        }
    }

    /// Target value in hours for an outage of `duration` at `elapsed`.
    pub fn value(self, duration: f64, elapsed: f64) -> f64 {
        match self {
            Target::Remaining => duration - elapsed,
            Target::Total => duration,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub vocab_cutoff: u64,
    pub h1: usize,
    pub h2: usize,
    pub embed: usize,
    pub cell: usize,
    pub state: usize,
    pub heads: usize,
    pub layer_norm: bool,
    pub context_free: bool,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip: f64,
    pub target: Target,
    pub features: FeatureSet,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            max_epochs: 30,
            patience: 5,
            dropout: 0.0,
            vocab_cutoff: 2,
            h1: 32,
            h2: 32,
            embed: 32,
            cell: 32,
            state: 64,
            heads: 2,
            layer_norm: true,
            context_free: false,
            clip: 0.0,
            target: Target::Remaining,
            features: FeatureSet::AllOnset,
            seed: 0,
        }
    }
}

pub const TRAIN_KEYS: [&str; 17] = [
    "lr",
    "max_epochs",
    "patience",
    "dropout",
    "vocab_cutoff",
    "h1",
    "h2",
    "embed",
    "cell",
    "state",
    "heads",
    "layer_norm",
    "context_free",
    "clip",
    "target",
    "features",
    "seed",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(1..=2).contains(&self.heads) {
            return Err(Error::Config(format!("heads must be 1 or 2, got {}", self.heads)));
        }
        if !(self.clip >= 0.0) {
            return Err(Error::Config(format!("clip must be non-negative, got {}", self.clip)));
        }
        if [self.h1, self.h2, self.embed, self.state].contains(&0) || (!self.context_free && self.cell == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }

    /// Apply `key = value` overrides on top of `self`. Unknown keys are errors.
    pub fn with_kv(&self, kv: &KvFile) -> Result<Self> {
        let mut c = self.clone();
        for (k, v) in kv.iter() {
            match k {
                "lr" => c.lr = parse_value(k, v)?,
                "max_epochs" => c.max_epochs = parse_value(k, v)?,
                "patience" => c.patience = parse_value(k, v)?,
                "dropout" => c.dropout = parse_value(k, v)?,
                "vocab_cutoff" => c.vocab_cutoff = parse_value(k, v)?,
                "h1" => c.h1 = parse_value(k, v)?,
                "h2" => c.h2 = parse_value(k, v)?,
                "embed" => c.embed = parse_value(k, v)?,
                "cell" => c.cell = parse_value(k, v)?,
                "state" => c.state = parse_value(k, v)?,
                "heads" => c.heads = parse_value(k, v)?,
                "layer_norm" => c.layer_norm = parse_bool(k, v)?,
                "context_free" => c.context_free = parse_bool(k, v)?,
                "clip" => c.clip = parse_value(k, v)?,
                "target" => c.target = Target::parse(v)?,
                "features" => c.features = FeatureSet::parse(v).map_err(|e| Error::Config(e.to_string()))?,
                "seed" => c.seed = parse_value(k, v)?,
                _ => return Err(Error::Config(format!("unknown training key {k}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        TrainConfig::default().with_kv(kv)
    }

    pub fn to_kv(&self) -> KvFile {
        KvFile::from_pairs([
            ("lr", format!("{:?}", self.lr)),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("dropout", format!("{:?}", self.dropout)),
            ("vocab_cutoff", self.vocab_cutoff.to_string()),
            ("h1", self.h1.to_string()),
            ("h2", self.h2.to_string()),
            ("embed", self.embed.to_string()),
            ("cell", self.cell.to_string()),
            ("state", self.state.to_string()),
            ("heads", self.heads.to_string()),
            ("layer_norm", self.layer_norm.to_string()),
            ("context_free", self.context_free.to_string()),
            ("clip", format!("{:?}", self.clip)),
            ("target", self.target.name().to_string()),
            ("features", self.features.name().to_string()),
            ("seed", self.seed.to_string()),
        ])
    }

    /// SHA-256 of the canonical key-value text.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_kv().to_text().as_bytes())
    }

    pub fn initial_config(&self, input_dim: usize) -> InitialConfig {
        InitialConfig {
            input_dim,
            h1: self.h1,
            h2: self.h2,
        }
    }

    pub fn realtime_config(&self, vocab_size: usize, feature_dim: usize) -> RealtimeConfig {
        RealtimeConfig {
            vocab_size,
            feature_dim,
            embed: self.embed,
            cell: self.cell,
            state: self.state,
            heads: self.heads,
            layer_norm: self.layer_norm,
            context_free: self.context_free,
        }
    }
}
