use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::kv::{parse_bool, parse_value, KvFile};

/// Candidate values per hyperparameter; each trial draws one uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub lr: Vec<f64>,
    pub vocab_cutoff: Vec<u64>,
    pub embed: Vec<usize>,
    pub state: Vec<usize>,
    pub cell: Vec<usize>,
    pub dropout: Vec<f64>,
    pub max_epochs: Vec<usize>,
    pub heads: Vec<usize>,
    pub layer_norm: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lr: vec![0.001],
            vocab_cutoff: vec![1, 2, 5],
            embed: vec![16, 32, 64],
            state: vec![32, 64],
            cell: vec![16, 32],
            dropout: vec![0.0, 0.1, 0.25],
            max_epochs: vec![10, 20, 30],
            heads: vec![1, 2],
            layer_norm: vec![true, false],
        }
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            self.lr.len(),
            self.vocab_cutoff.len(),
            self.embed.len(),
            self.state.len(),
            self.cell.len(),
            self.dropout.len(),
            self.max_epochs.len(),
            self.heads.len(),
            self.layer_norm.len(),
        ];
        if sizes.contains(&0) {
            return Err(Error::Config("every search dimension needs at least one choice".into()));
        }
        Ok(())
    }

    /// Keys are `search.<field>` with comma-separated choices; other keys are ignored.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut s = SearchSpace::default();
        for (k, v) in kv.iter() {
            let Some(field) = k.strip_prefix("search.") else {
                continue;
            };
            match field {
                "lr" => s.lr = list(k, v)?,
                "vocab_cutoff" => s.vocab_cutoff = list(k, v)?,
                "embed" => s.embed = list(k, v)?,
                "state" => s.state = list(k, v)?,
                "cell" => s.cell = list(k, v)?,
                "dropout" => s.dropout = list(k, v)?,
                "max_epochs" => s.max_epochs = list(k, v)?,
                "heads" => s.heads = list(k, v)?,
                "layer_norm" => s.layer_norm = v.split(',').map(|x| parse_bool(k, x.trim())).collect::<Result<_>>()?,
                _ => return Err(Error::Config(format!("unknown search key {k}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn sample(&self, base: &TrainConfig, rng: &mut ChaCha8Rng) -> TrainConfig {
        let mut c = base.clone();
        c.lr = *self.lr.choose(rng).unwrap();
        c.vocab_cutoff = *self.vocab_cutoff.choose(rng).unwrap();
        c.embed = *self.embed.choose(rng).unwrap();
        c.state = *self.state.choose(rng).unwrap();
        c.cell = *self.cell.choose(rng).unwrap();
        c.dropout = *self.dropout.choose(rng).unwrap();
        c.max_epochs = *self.max_epochs.choose(rng).unwrap();
        c.heads = *self.heads.choose(rng).unwrap();
        c.layer_norm = *self.layer_norm.choose(rng).unwrap();
        c
    }
}

#[derive(Clone, Debug)]
pub struct Trial {
    pub index: usize,
    pub config: TrainConfig,
    /// Validation NLL, infinite if training failed.
    pub valid_nll: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Leaderboard {
    /// Sorted by validation NLL ascending, ties by trial index.
    pub trials: Vec<Trial>,
}

impl Leaderboard {
    pub fn best(&self) -> &Trial {
        &self.trials[0]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\ttrial");
        for key in super::config::TRAIN_KEYS {
            out.push('\t');
            out.push_str(key);
        }
        out.push_str("\tvalid_nll\n");
        for (rank, t) in self.trials.iter().enumerate() {
            out.push_str(&format!("{}\t{}", rank + 1, t.index));
            let kv = t.config.to_kv();
            for key in super::config::TRAIN_KEYS {
                out.push('\t');
                out.push_str(kv.get(key).unwrap_or(""));
            }
            out.push_str(&format!("\t{:.6}\n", t.valid_nll));
        }
        out
    }
}

/// Draw `budget` configurations and score each with `trial` (validation NLL).
///
/// Trial seeds are derived from `seed` and the trial index, and trials may run
/// on any thread; the leaderboard does not depend on scheduling.
pub fn random_search<F>(space: &SearchSpace, base: &TrainConfig, budget: usize, seed: u64, trial: F) -> Result<Leaderboard>
where
    F: Fn(&TrainConfig) -> Result<f64> + Sync,
{
    space.validate()?;
    if budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<TrainConfig> = (0..budget)
        .map(|i| {
            let mut c = space.sample(base, &mut rng);
            c.seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            c
        })
        .collect();
    let mut trials: Vec<Trial> = configs
        .into_par_iter()
        .enumerate()
        .map(|(index, config)| {
            let outcome = config.validate().and_then(|_| trial(&config));
            let (valid_nll, error) = match outcome {
                Ok(v) if v.is_finite() => (v, None),
                Ok(v) => (f64::INFINITY, Some(format!("validation NLL {v}"))),
                Err(e) => (f64::INFINITY, Some(e.to_string())),
            };
            if let Some(e) = &error {
                log::warn!("trial {index} failed: {e}");
            }
            Trial {
                index,
                config,
                valid_nll,
                error,
            }
        })
        .collect();
    trials.sort_by(|a, b| a.valid_nll.total_cmp(&b.valid_nll).then(a.index.cmp(&b.index)));
    Ok(Leaderboard { trials })
}
