//! Resolved settings and the on-disk layout of a model directory.

use std::path::{Path, PathBuf};

use outagecast::datastore::SplitSpec;
use outagecast::features::{FeatureSet, FeederStats, StandardizationStats};
use outagecast::io_util::write_atomic;
use outagecast::kv::KvFile;
use outagecast::netmodel::{InitialConfig, InitialPredictor, RealtimeConfig, RealtimeModel};
use outagecast::numcore::{Checkpoint, ParamSet};
use outagecast::textprep::Vocab;
use outagecast::training::{Dataset, History, TrainConfig};
use outagecast::{Error, Result};

use crate::args::{TargetArg, TrainArgs};

pub const SPLIT_KEY: &str = "split_spec";

pub fn read_kv(path: &Path) -> Result<KvFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    KvFile::parse(&text)
}

pub fn split_text(spec: &SplitSpec) -> String {
    format!("{},{}", spec.train_end, spec.valid_end)
}

/// Training settings after applying defaults, the config file and flags, in that order.
#[derive(Clone, Debug)]
pub struct Settings {
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// `search.*` keys from the config file.
    pub search: KvFile,
}

impl Settings {
    pub fn resolve(args: &TrainArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_kv(p)?,
            None => KvFile::default(),
        };
        let mut train_kv = KvFile::default();
        let mut search = KvFile::default();
        let mut split = None;
        for (k, v) in file.iter() {
            if k.starts_with("search.") {
                search.set(k, v);
            } else if k == SPLIT_KEY {
                split = Some(v.to_string());
            } else {
                train_kv.set(k, v);
            }
        }
        let mut flags = KvFile::default();
        if let Some(s) = args.seed {
            flags.set("seed", s.to_string());
        }
        if let Some(f) = &args.features {
            flags.set("features", f.clone());
        }
        if let Some(t) = args.target {
            flags.set(
                "target",
                match t {
                    TargetArg::Remaining => "remaining",
                    TargetArg::Total => "total",
                },
            );
        }
        if let Some(h) = args.heads {
            flags.set("heads", h.to_string());
        }
        if let Some(lr) = args.lr {
            flags.set("lr", format!("{lr:?}"));
        }
        if let Some(e) = args.max_epochs {
            flags.set("max_epochs", e.to_string());
        }
        if let Some(d) = args.dropout {
            flags.set("dropout", format!("{d:?}"));
        }
        let mut train = TrainConfig::from_kv(&train_kv.merged(&flags))?;
        if args.include_cause && !train.features.needs_cause() {
            train.features = match train.features {
                FeatureSet::AllOnset => FeatureSet::CauseOnset,
                FeatureSet::None => FeatureSet::CauseOnly,
                other => {
                    return Err(Error::Config(format!(
                        "--include-cause needs feature set onset or none, got {}",
                        other.name()
                    )))
                }
            };
        }
        let split = match args.split_spec.as_deref().or(split.as_deref()) {
            Some(s) => SplitSpec::parse(s)?,
            None => SplitSpec::default(),
        };
        Ok(Settings { train, split, search })
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = self.train.to_kv();
        kv.set(SPLIT_KEY, split_text(&self.split));
        kv
    }

    fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut train_kv = KvFile::default();
        let mut split = SplitSpec::default();
        for (k, v) in kv.iter() {
            if k == SPLIT_KEY {
                split = SplitSpec::parse(v)?;
            } else {
                train_kv.set(k, v);
            }
        }
        Ok(Settings {
            train: TrainConfig::from_kv(&train_kv)?,
            split,
            search: KvFile::default(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Initial,
    Realtime,
}

impl Kind {
    pub fn prefix(self) -> &'static str {
        match self {
            Kind::Initial => "initial",
            Kind::Realtime => "realtime",
        }
    }

    pub fn command(self) -> &'static str {
        match self {
            Kind::Initial => "train-initial",
            Kind::Realtime => "train-realtime",
        }
    }
}

pub fn file(dir: &Path, kind: Kind, suffix: &str) -> PathBuf {
    dir.join(format!("{}.{suffix}", kind.prefix()))
}

pub fn vocab_path(dir: &Path) -> PathBuf {
    file(dir, Kind::Realtime, "vocab.txt")
}

/// A trained model with everything needed to featurize new outages.
pub struct SavedModel<M> {
    pub settings: Settings,
    pub feeder_stats: FeederStats,
    pub standardization: StandardizationStats,
    pub model: M,
    pub vocab: Option<Vocab>,
}

/// Write a model directory entry; returns every file written.
#[allow(clippy::too_many_arguments)]
pub fn save(
    dir: &Path,
    kind: Kind,
    settings: &Settings,
    ds: &Dataset,
    params: &ParamSet,
    meta: std::collections::BTreeMap<String, String>,
    history: &History,
    vocab: Option<&Vocab>,
) -> Result<Vec<PathBuf>> {
    let ckpt = Checkpoint {
        seed: settings.train.seed,
        config_hash: settings.train.hash(),
        meta,
        params: params.clone(),
    };
    let paths = [
        file(dir, kind, "ckpt"),
        file(dir, kind, "config"),
        file(dir, kind, "standardization.tsv"),
        file(dir, kind, "feeders.tsv"),
        file(dir, kind, "history.tsv"),
    ];
    ckpt.save(&paths[0])?;
    write_atomic(&paths[1], settings.to_kv().to_text().as_bytes())?;
    ds.standardization.save(&paths[2])?;
    write_atomic(&paths[3], ds.feeder_stats.to_text().as_bytes())?;
    write_atomic(&paths[4], history.to_tsv().as_bytes())?;
    let mut out = paths.to_vec();
    if let Some(v) = vocab {
        let p = vocab_path(dir);
        v.save(&p)?;
        out.push(p);
    }
    Ok(out)
}

fn load_common(dir: &Path, kind: Kind) -> Result<Option<(Settings, Checkpoint, FeederStats, StandardizationStats)>> {
    let ckpt_path = file(dir, kind, "ckpt");
    if !ckpt_path.exists() {
        return Ok(None);
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let config_path = file(dir, kind, "config");
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", config_path.display())))?;
    let settings = Settings::from_kv(&KvFile::parse(&text)?)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", config_path.display())))?;
    if settings.train.hash() != ckpt.config_hash {
        return Err(Error::Checkpoint(format!(
            "{} does not match the configuration hash in {}",
            config_path.display(),
            ckpt_path.display()
        )));
    }
    let feeders_path = file(dir, kind, "feeders.tsv");
    let feeders = std::fs::read_to_string(&feeders_path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", feeders_path.display())))?;
    let feeder_stats = FeederStats::parse(&feeders)?;
    let standardization = StandardizationStats::load(&file(dir, kind, "standardization.tsv"))?;
    Ok(Some((settings, ckpt, feeder_stats, standardization)))
}

pub fn load_initial(dir: &Path) -> Result<Option<SavedModel<InitialPredictor>>> {
    let Some((settings, ckpt, feeder_stats, standardization)) = load_common(dir, Kind::Initial)? else {
        return Ok(None);
    };
    let model = InitialPredictor::from_params(InitialConfig::from_meta(&ckpt.meta)?, &ckpt.params)?;
    Ok(Some(SavedModel {
        settings,
        feeder_stats,
        standardization,
        model,
        vocab: None,
    }))
}

pub fn load_realtime(dir: &Path) -> Result<Option<SavedModel<RealtimeModel>>> {
    let Some((settings, ckpt, feeder_stats, standardization)) = load_common(dir, Kind::Realtime)? else {
        return Ok(None);
    };
    let model = RealtimeModel::from_params(RealtimeConfig::from_meta(&ckpt.meta)?, &ckpt.params)?;
    let vocab = Vocab::load(&vocab_path(dir))?;
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {} entries but the model expects {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    Ok(Some(SavedModel {
        settings,
        feeder_stats,
        standardization,
        model,
        vocab: Some(vocab),
    }))
}

pub fn missing(dir: &Path, kind: Kind) -> Error {
    Error::Data(format!(
        "no trained {} model in {} (expected {}); run `outagecast {}` first",
        kind.prefix(),
        dir.display(),
        file(dir, kind, "ckpt").display(),
        kind.command()
    ))
}
