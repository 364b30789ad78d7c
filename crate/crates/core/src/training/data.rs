use crate::datastore::{align_logs, filter_outages, split_by, AlignedLog, Corpus, OutageRecord, SplitSpec, Splits};
use crate::error::{Error, Result};
use crate::features::{
    FeatureBuilder, FeatureSet, FEEDER_MEAN_DIM, FeatureVector, FeederStats, RecentIndex, StandardizationStats, WeatherIndex,
};
use crate::netmodel::LogStep;
use crate::textprep::{build_vocab, encode_spans, log_tokens, Token, TokenSeq, Vocab};

use super::config::Target;

#[derive(Clone, Debug)]
pub struct PreparedLog {
    pub elapsed_hours: f64,
    pub raw: String,
    /// Normalized tokens, terminated by `<end>`.
    pub tokens: Vec<Token>,
}

/// A filtered outage with standardized features (cause block included) and
/// its aligned logs.
#[derive(Clone, Debug)]
pub struct PreparedOutage {
    pub outage: OutageRecord,
    pub features: FeatureVector,
    pub logs: Vec<PreparedLog>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub splits: Splits<PreparedOutage>,
    pub standardization: StandardizationStats,
    pub feeder_stats: FeederStats,
}

/// One outage for the initial predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct OnsetExample {
    pub id: u64,
    pub x: Vec<f64>,
    pub duration: f64,
}

/// One outage with at least one log for the real-time model.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceExample {
    pub id: u64,
    pub x: Vec<f64>,
    pub duration: f64,
    pub elapsed: Vec<f64>,
    pub tokens: Vec<TokenSeq>,
}

impl SequenceExample {
    pub fn steps(&self) -> Vec<LogStep<'_>> {
        self.elapsed
            .iter()
            .zip(&self.tokens)
            .map(|(&t, seq)| LogStep {
                elapsed_hours: t,
                tokens: &seq.ids,
            })
            .collect()
    }

    pub fn targets(&self, target: Target) -> Vec<f64> {
        self.elapsed.iter().map(|&t| target.value(self.duration, t)).collect()
    }
}

fn prepare_logs(aligned: Vec<AlignedLog>) -> Vec<PreparedLog> {
    aligned
        .into_iter()
        .map(|a| PreparedLog {
            elapsed_hours: a.elapsed_hours,
            tokens: log_tokens(&a.log.text),
            raw: a.log.text,
        })
        .collect()
}

impl Dataset {
    /// Filter, align, split by date, extract features and fit standardization
    /// and feeder statistics on the training partition only.
    pub fn build(corpus: &Corpus, spec: &SplitSpec) -> Result<Self> {
        let kept = filter_outages(&corpus.outages);
        if kept.is_empty() {
            return Err(Error::data("no outages survive filtering"));
        }
        let aligned = align_logs(&kept, &corpus.logs);
        let pairs: Vec<(OutageRecord, Vec<AlignedLog>)> = kept.into_iter().zip(aligned).collect();
        let splits = split_by(pairs, spec, |p| p.0.start);
        if splits.train.is_empty() {
            return Err(Error::data("training split is empty"));
        }
        let train_outages: Vec<OutageRecord> = splits.train.iter().map(|p| p.0.clone()).collect();
        let feeder_stats = FeederStats::from_outages(&train_outages)?;
        let builder = FeatureBuilder {
            weather: WeatherIndex::new(corpus.weather.clone()),
            recent: RecentIndex::from_outages(&corpus.outages),
            stats: feeder_stats.clone(),
            include_cause: true,
        };
        // training outages must not see their own duration through the feeder mean
        let extract = |o: &OutageRecord, in_train: bool| -> Result<FeatureVector> {
            let mut v = builder.build(o)?;
            if in_train {
                v.values[FEEDER_MEAN_DIM] = feeder_stats.smoothed_mean_excluding(o.feeder, o.duration_hours());
            }
            Ok(v)
        };
        let train_raw: Vec<FeatureVector> = splits.train.iter().map(|p| extract(&p.0, true)).collect::<Result<_>>()?;
        let standardization = StandardizationStats::fit(&train_raw)?;
        let finish = |part: Vec<(OutageRecord, Vec<AlignedLog>)>, in_train: bool| -> Result<Vec<PreparedOutage>> {
            part.into_iter()
                .map(|(outage, logs)| {
                    let features = standardization.standardize(&extract(&outage, in_train)?)?;
                    Ok(PreparedOutage {
                        outage,
                        features,
                        logs: prepare_logs(logs),
                    })
                })
                .collect()
        };
        let Splits {
            train,
            validation,
            test,
        } = splits;
        let splits = Splits {
            train: finish(train, true)?,
            validation: finish(validation, false)?,
            test: finish(test, false)?,
        };
        Ok(Dataset {
            splits,
            standardization,
            feeder_stats,
        })
    }

    /// Filter, align and split `corpus`, featurizing every outage with
    /// previously fitted statistics. No leave-one-out adjustment is applied.
    pub fn prepare_with_stats(
        corpus: &Corpus,
        spec: &SplitSpec,
        feeder_stats: &FeederStats,
        standardization: &StandardizationStats,
    ) -> Result<Splits<PreparedOutage>> {
        let kept = filter_outages(&corpus.outages);
        let aligned = align_logs(&kept, &corpus.logs);
        let builder = FeatureBuilder {
            weather: WeatherIndex::new(corpus.weather.clone()),
            recent: RecentIndex::from_outages(&corpus.outages),
            stats: feeder_stats.clone(),
            include_cause: true,
        };
        let prepared = kept
            .into_iter()
            .zip(aligned)
            .map(|(outage, logs)| {
                Ok(PreparedOutage {
                    features: standardization.standardize(&builder.build(&outage)?)?,
                    outage,
                    logs: prepare_logs(logs),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(split_by(prepared, spec, |o| o.outage.start))
    }

    /// Vocabulary over the training logs.
    pub fn vocab(&self, cutoff: u64) -> Result<Vocab> {
        let corpus: Vec<Vec<&str>> = self
            .splits
            .train
            .iter()
            .flat_map(|o| &o.logs)
            .map(|l| l.tokens.iter().map(|t| t.text.as_str()).collect())
            .collect();
        if corpus.is_empty() {
            return Err(Error::data("training split has no repair logs"));
        }
        build_vocab(&corpus, cutoff)
    }
}

pub fn onset_examples(part: &[PreparedOutage], features: FeatureSet) -> Result<Vec<OnsetExample>> {
    part.iter()
        .map(|o| {
            Ok(OnsetExample {
                id: o.outage.id,
                x: features.select(&o.features)?,
                duration: o.outage.duration_hours(),
            })
        })
        .collect()
}

/// Outages with at least one log, encoded against `vocab`.
pub fn sequence_examples(part: &[PreparedOutage], features: FeatureSet, vocab: &Vocab) -> Result<Vec<SequenceExample>> {
    part.iter()
        .filter(|o| !o.logs.is_empty())
        .map(|o| {
            Ok(SequenceExample {
                id: o.outage.id,
                x: features.select(&o.features)?,
                duration: o.outage.duration_hours(),
                elapsed: o.logs.iter().map(|l| l.elapsed_hours).collect(),
                tokens: o.logs.iter().map(|l| encode_spans(&l.tokens, vocab)).collect(),
            })
        })
        .collect()
}
