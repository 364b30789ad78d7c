use std::collections::HashMap;
use std::io::{BufRead, IsTerminal, Write};
use std::path::Path;

use outagecast::datastore::{generate_synthetic, Corpus, GenConfig, SplitSpec, Splits};
use outagecast::evalreport::{
    attention_export, attention_jsonl, bigram_tsv, fit_linear, metrics, metrics_tsv, per_report_metrics,
    point_metrics, report_count_tsv, report_row, top_bigrams, AttentionExport, MetricRow, SequenceOutcome,
};
use outagecast::features::{FeatureBuilder, FeatureSet, RecentIndex, WeatherIndex};
use outagecast::gammadist::GammaParams;
use outagecast::io_util::write_atomic;
use outagecast::kv::KvFile;
use outagecast::netmodel::{InitialPredictor, LogStep, RealtimeModel};
use outagecast::textprep::{encode_spans, log_tokens, TokenSeq};
use outagecast::training::{
    onset_examples, random_search, sequence_examples, train_initial, train_realtime, Dataset, PreparedOutage,
    SearchSpace, SequenceExample,
};
use outagecast::{Error, Result};

use crate::args::{AttentionArgs, BigramArgs, EvalArgs, GenDataArgs, ModelKind, PredictArgs, SearchArgs, TrainArgs};
use crate::bundle::{self, split_text, Kind, SavedModel, Settings};
use crate::manifest::Recorder;

fn write_output(rec: &mut Recorder, path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    rec.produced(path.to_path_buf());
    Ok(())
}

fn load_corpus(dir: &Path, rec: &mut Recorder) -> Result<Corpus> {
    rec.hash_data_dir(dir)?;
    let (corpus, report) = Corpus::load_dir(dir)?;
    let skipped = report.outage_errors.len() + report.log_errors.len() + report.weather_errors.len();
    if skipped > 0 {
        log::warn!("skipped {skipped} malformed records in {}", dir.display());
    }
    Ok(corpus)
}

pub fn gen_data(a: &GenDataArgs, rec: &mut Recorder) -> Result<()> {
    let mut kv = match &a.config {
        Some(p) => {
            rec.hash_file(p)?;
            bundle::read_kv(p)?
        }
        None => KvFile::default(),
    };
    let mut seed = 0;
    if let Some(s) = kv.get("seed") {
        seed = outagecast::kv::parse_value("seed", s)?;
        kv = KvFile::from_pairs(kv.iter().filter(|(k, _)| *k != "seed"));
    }
    if let Some(n) = a.n_outages {
        kv.set("n_outages", n.to_string());
    }
    let seed = a.seed.unwrap_or(seed);
    let cfg = GenConfig::from_kv(&kv)?;
    rec.seed = seed;
    let mut resolved = cfg.to_kv();
    resolved.set("seed", seed.to_string());
    rec.set_config(&resolved);
    let corpus = generate_synthetic(&cfg, seed)?;
    corpus.save_dir(&a.out)?;
    for name in [
        outagecast::datastore::OUTAGES_FILE,
        outagecast::datastore::LOGS_FILE,
        outagecast::datastore::WEATHER_FILE,
    ] {
        rec.produced(a.out.join(name));
    }
    write_output(rec, &a.out.join("generator.config"), &resolved.to_text())?;
    println!(
        "wrote {} outages, {} repair logs, {} weather rows to {}",
        corpus.outages.len(),
        corpus.logs.len(),
        corpus.weather.len(),
        a.out.display()
    );
    Ok(())
}

fn setup(a: &TrainArgs, rec: &mut Recorder) -> Result<(Settings, Dataset)> {
    let settings = Settings::resolve(a)?;
    if let Some(p) = &a.config {
        rec.hash_file(p)?;
    }
    rec.seed = settings.train.seed;
    rec.set_config(&settings.to_kv().merged(&settings.search));
    let corpus = load_corpus(&a.data_dir, rec)?;
    let ds = Dataset::build(&corpus, &settings.split)?;
    let [tr, va, te] = ds.splits.counts();
    println!("outages: train {tr}, validation {va}, test {te}");
    Ok((settings, ds))
}

pub fn train_initial_cmd(a: &TrainArgs, rec: &mut Recorder) -> Result<()> {
    let (settings, ds) = setup(a, rec)?;
    let fs = settings.train.features;
    let train = onset_examples(&ds.splits.train, fs)?;
    let valid = onset_examples(&ds.splits.validation, fs)?;
    let trained = train_initial(&train, &valid, &settings.train)?;
    let h = &trained.history;
    println!(
        "initial predictor ({}): best epoch {} of {}, validation NLL {:.4}",
        fs.name(),
        h.best_epoch,
        h.epochs.len(),
        h.best_valid_nll
    );
    let files = bundle::save(
        &a.out,
        Kind::Initial,
        &settings,
        &ds,
        &trained.model.params,
        trained.model.config.to_meta(),
        h,
        None,
    )?;
    files.into_iter().for_each(|p| rec.produced(p));
    Ok(())
}

pub fn train_realtime_cmd(a: &TrainArgs, rec: &mut Recorder) -> Result<()> {
    let (settings, ds) = setup(a, rec)?;
    let cfg = &settings.train;
    let vocab = ds.vocab(cfg.vocab_cutoff)?;
    let train = sequence_examples(&ds.splits.train, cfg.features, &vocab)?;
    let valid = sequence_examples(&ds.splits.validation, cfg.features, &vocab)?;
    println!("vocabulary {} tokens; outages with logs: train {}, validation {}", vocab.len(), train.len(), valid.len());
    let trained = train_realtime(&train, &valid, vocab.len(), cfg)?;
    let h = &trained.history;
    println!(
        "update model ({} target): best epoch {} of {}, validation NLL {:.4}",
        cfg.target.name(),
        h.best_epoch,
        h.epochs.len(),
        h.best_valid_nll
    );
    let files = bundle::save(
        &a.out,
        Kind::Realtime,
        &settings,
        &ds,
        &trained.model.params,
        trained.model.config.to_meta(),
        h,
        Some(&vocab),
    )?;
    files.into_iter().for_each(|p| rec.produced(p));
    Ok(())
}

pub fn search(a: &SearchArgs, rec: &mut Recorder) -> Result<()> {
    let (settings, ds) = setup(&a.train, rec)?;
    let space = SearchSpace::from_kv(&settings.search)?;
    rec.config.insert("trials".into(), a.trials.to_string());
    rec.config.insert(
        "model".into(),
        match a.model {
            ModelKind::Initial => "initial",
            ModelKind::Realtime => "realtime",
        }
        .into(),
    );
    let board = random_search(&space, &settings.train, a.trials, settings.train.seed, |c| match a.model {
        ModelKind::Initial => {
            let train = onset_examples(&ds.splits.train, c.features)?;
            let valid = onset_examples(&ds.splits.validation, c.features)?;
            Ok(train_initial(&train, &valid, c)?.history.best_valid_nll)
        }
        ModelKind::Realtime => {
            let vocab = ds.vocab(c.vocab_cutoff)?;
            let train = sequence_examples(&ds.splits.train, c.features, &vocab)?;
            let valid = sequence_examples(&ds.splits.validation, c.features, &vocab)?;
            Ok(train_realtime(&train, &valid, vocab.len(), c)?.history.best_valid_nll)
        }
    })?;
    write_output(rec, &a.train.out.join("leaderboard.tsv"), &board.to_tsv())?;
    let best = board.best();
    if !best.valid_nll.is_finite() {
        return Err(Error::NonFinite { op: "search" });
    }
    let best_settings = Settings {
        train: best.config.clone(),
        split: settings.split,
        search: KvFile::default(),
    };
    write_output(rec, &a.train.out.join("best.config"), &best_settings.to_kv().to_text())?;
    println!("best of {} trials: trial {} with validation NLL {:.4}", a.trials, best.index, best.valid_nll);
    Ok(())
}

fn builder(corpus: &Corpus, saved_stats: &outagecast::features::FeederStats) -> FeatureBuilder {
    FeatureBuilder {
        weather: WeatherIndex::new(corpus.weather.clone()),
        recent: RecentIndex::from_outages(&corpus.outages),
        stats: saved_stats.clone(),
        include_cause: true,
    }
}

fn features_for<M>(saved: &SavedModel<M>, b: &FeatureBuilder, o: &outagecast::datastore::OutageRecord) -> Result<Vec<f64>> {
    let raw = b.build(o)?;
    saved.settings.train.features.select(&saved.standardization.standardize(&raw)?)
}

const PREDICT_HEADER: &str = "report\telapsed_hours\ttarget\tk\ttheta\tmode_hours\tmean_hours\tq80_hours";

fn predict_line(report: usize, elapsed: f64, target: &str, p: &GammaParams) -> Result<String> {
    let r = report_row(p)?;
    Ok(format!(
        "{report}\t{elapsed:.3}\t{target}\t{:.4}\t{:.4}\t{:.3}\t{:.3}\t{:.3}",
        p.k(),
        p.theta(),
        r.mode,
        r.mean,
        r.q80
    ))
}

/// One `hours<whitespace>text` line of streamed input.
fn parse_log_line(n: usize, line: &str) -> Result<(f64, String)> {
    let line = line.trim();
    let (hours, text) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let hours: f64 = hours
        .parse()
        .map_err(|_| Error::Data(format!("stdin line {n}: expected '<elapsed hours> <log text>', got {line:?}")))?;
    if !(hours >= 0.0 && hours.is_finite()) {
        return Err(Error::Data(format!("stdin line {n}: elapsed hours must be non-negative")));
    }
    Ok((hours, text.trim().to_string()))
}

pub fn predict(a: &PredictArgs, rec: &mut Recorder) -> Result<()> {
    rec.seed = a.seed.unwrap_or(0);
    rec.config.insert("checkpoint".into(), a.checkpoint.display().to_string());
    rec.config.insert("outage_id".into(), a.outage_id.to_string());
    let initial = bundle::load_initial(&a.checkpoint)?.ok_or_else(|| bundle::missing(&a.checkpoint, Kind::Initial))?;
    let realtime = bundle::load_realtime(&a.checkpoint)?;
    let corpus = load_corpus(&a.data_dir, rec)?;
    let outage = corpus
        .outages
        .iter()
        .find(|o| o.id == a.outage_id)
        .ok_or_else(|| Error::Data(format!("outage {} not found in {}", a.outage_id, a.data_dir.display())))?;
    let x0 = features_for(&initial, &builder(&corpus, &initial.feeder_stats), outage)?;
    let mut lines = vec![PREDICT_HEADER.to_string()];
    let mut stdout = std::io::stdout().lock();
    let mut emit = |line: String, lines: &mut Vec<String>| -> Result<()> {
        writeln!(stdout, "{line}")?;
        stdout.flush()?;
        lines.push(line);
        Ok(())
    };
    emit(PREDICT_HEADER.to_string(), &mut Vec::new())?;
    emit(predict_line(0, 0.0, "total", &initial.model.predict(&x0)?)?, &mut lines)?;

    let stdin = std::io::stdin();
    if !stdin.is_terminal() {
        let mut rt_state: Option<(&SavedModel<RealtimeModel>, Vec<f64>)> = None;
        let mut seqs: Vec<(f64, TokenSeq)> = Vec::new();
        for (n, line) in stdin.lock().lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (hours, text) = parse_log_line(n + 1, &line)?;
            if seqs.last().is_some_and(|(t, _)| hours < *t) {
                return Err(Error::Data(format!("stdin line {}: logs must arrive in time order", n + 1)));
            }
            if rt_state.is_none() {
                let rt = realtime.as_ref().ok_or_else(|| bundle::missing(&a.checkpoint, Kind::Realtime))?;
                let x = features_for(rt, &builder(&corpus, &rt.feeder_stats), outage)?;
                rt_state = Some((rt, x));
            }
            let (rt, x) = rt_state.as_ref().unwrap();
            let vocab = rt.vocab.as_ref().expect("real-time models carry a vocabulary");
            seqs.push((hours, encode_spans(&log_tokens(&text), vocab)));
            let steps: Vec<LogStep<'_>> = seqs
                .iter()
                .map(|(t, s)| LogStep {
                    elapsed_hours: *t,
                    tokens: &s.ids,
                })
                .collect();
            let preds = rt.model.predict(x, &steps)?;
            let (p, _) = preds.last().expect("one prediction per log");
            emit(predict_line(seqs.len(), hours, rt.settings.train.target.name(), p)?, &mut lines)?;
        }
    }
    if let Some(out) = &a.out {
        let mut text = lines.join("\n");
        text.push('\n');
        write_output(rec, &out.join("predictions.tsv"), &text)?;
    }
    Ok(())
}

fn eval_split(a: &EvalArgs, fallback: Option<&Settings>) -> Result<SplitSpec> {
    match (&a.split_spec, fallback) {
        (Some(s), _) => SplitSpec::parse(s),
        (None, Some(st)) => Ok(st.split),
        (None, None) => Ok(SplitSpec::default()),
    }
}

fn prepared<M>(corpus: &Corpus, saved: &SavedModel<M>, split: &SplitSpec) -> Result<Splits<PreparedOutage>> {
    Dataset::prepare_with_stats(corpus, split, &saved.feeder_stats, &saved.standardization)
}

fn onset_predictions(model: &InitialPredictor, part: &[PreparedOutage], fs: FeatureSet) -> Result<Vec<(u64, f64, GammaParams)>> {
    onset_examples(part, fs)?
        .into_iter()
        .map(|e| Ok((e.id, e.duration, model.predict(&e.x)?)))
        .collect()
}

pub fn evaluate(a: &EvalArgs, rec: &mut Recorder) -> Result<()> {
    rec.seed = a.seed.unwrap_or(0);
    rec.config.insert("checkpoint".into(), a.checkpoint.display().to_string());
    let initial = bundle::load_initial(&a.checkpoint)?;
    let realtime = bundle::load_realtime(&a.checkpoint)?;
    if initial.is_none() && realtime.is_none() {
        return Err(bundle::missing(&a.checkpoint, Kind::Initial));
    }
    let split = eval_split(a, initial.as_ref().map(|m| &m.settings).or(realtime.as_ref().map(|m| &m.settings)))?;
    rec.config.insert(bundle::SPLIT_KEY.into(), split_text(&split));
    let corpus = load_corpus(&a.data_dir, rec)?;
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut onset_by_id: HashMap<u64, GammaParams> = HashMap::new();
    if let Some(m) = &initial {
        let fs = m.settings.train.features;
        let splits = prepared(&corpus, m, &split)?;
        for (name, part) in [("validation", &splits.validation), ("test", &splits.test)] {
            if part.is_empty() {
                log::warn!("{name} split is empty; skipping");
                continue;
            }
            let preds = onset_predictions(&m.model, part, fs)?;
            let (p, d): (Vec<GammaParams>, Vec<f64>) = preds.iter().map(|(_, d, p)| (*p, *d)).unzip();
            rows.push(metrics(&p, &d, name, &format!("initial:{}", fs.name()))?);
            if name == "test" {
                onset_by_id = preds.into_iter().map(|(id, _, p)| (id, p)).collect();
            }
        }
    }
    let mut outcomes = Vec::new();
    if let Some(m) = &realtime {
        let cfg = &m.settings.train;
        let vocab = m.vocab.as_ref().expect("real-time models carry a vocabulary");
        let splits = prepared(&corpus, m, &split)?;
        for (name, part) in [("validation", &splits.validation), ("test", &splits.test)] {
            let examples: Vec<SequenceExample> = sequence_examples(part, cfg.features, vocab)?;
            if examples.is_empty() {
                log::warn!("{name} split has no outages with logs; skipping");
                continue;
            }
            let mut p = Vec::new();
            let mut d = Vec::new();
            for e in &examples {
                let preds = m.model.predict(&e.x, &e.steps())?;
                let targets = e.targets(cfg.target);
                if name == "test" {
                    if let Some(init) = onset_by_id.get(&e.id) {
                        outcomes.push(SequenceOutcome {
                            duration: e.duration,
                            initial: *init,
                            updates: e.elapsed.iter().zip(&preds).map(|(t, (g, _))| (*t, *g)).collect(),
                        });
                    }
                }
                p.extend(preds.into_iter().map(|(g, _)| g));
                d.extend(targets);
            }
            rows.push(metrics(&p, &d, name, &format!("realtime:{}:{}", cfg.features.name(), cfg.target.name()))?);
        }
        if initial.is_some() {
            match per_report_metrics(&outcomes, cfg.target) {
                Ok(table) => {
                    let text = report_count_tsv(&table);
                    print!("{text}");
                    write_output(rec, &a.out.join("report_counts.tsv"), &text)?;
                }
                Err(e) => log::warn!("per-report table skipped: {e}"),
            }
        }
    }
    let text = metrics_tsv(&rows);
    print!("{text}");
    write_output(rec, &a.out.join("metrics.tsv"), &text)?;
    Ok(())
}

fn exports(a: &EvalArgs, rec: &mut Recorder, outage: Option<u64>) -> Result<Vec<AttentionExport>> {
    rec.seed = a.seed.unwrap_or(0);
    rec.config.insert("checkpoint".into(), a.checkpoint.display().to_string());
    let m = bundle::load_realtime(&a.checkpoint)?.ok_or_else(|| bundle::missing(&a.checkpoint, Kind::Realtime))?;
    let split = eval_split(a, Some(&m.settings))?;
    rec.config.insert(bundle::SPLIT_KEY.into(), split_text(&split));
    let corpus = load_corpus(&a.data_dir, rec)?;
    let splits = prepared(&corpus, &m, &split)?;
    let chosen: Vec<&PreparedOutage> = match outage {
        Some(id) => {
            let o = splits
                .train
                .iter()
                .chain(&splits.validation)
                .chain(&splits.test)
                .find(|o| o.outage.id == id)
                .ok_or_else(|| Error::Data(format!("outage {id} is not among the filtered outages")))?;
            if o.logs.is_empty() {
                return Err(Error::Data(format!("outage {id} has no aligned repair logs")));
            }
            vec![o]
        }
        None => splits.test.iter().filter(|o| !o.logs.is_empty()).collect(),
    };
    let vocab = m.vocab.as_ref().expect("real-time models carry a vocabulary");
    let mut out = Vec::new();
    for o in chosen {
        let x = m.settings.train.features.select(&o.features)?;
        out.extend(attention_export(&m.model, o.outage.id, &x, &o.logs, vocab)?);
    }
    Ok(out)
}

pub fn attention(a: &AttentionArgs, rec: &mut Recorder) -> Result<()> {
    let ex = exports(&a.eval, rec, a.outage_id)?;
    if let Some(id) = a.outage_id {
        rec.config.insert("outage_id".into(), id.to_string());
    }
    let path = a.eval.out.join("attention.jsonl");
    write_output(rec, &path, &attention_jsonl(&ex)?)?;
    println!("wrote attention for {} reports to {}", ex.len(), path.display());
    Ok(())
}

pub fn bigrams(a: &BigramArgs, rec: &mut Recorder) -> Result<()> {
    let ex = exports(&a.eval, rec, None)?;
    rec.config.insert("top".into(), a.top.to_string());
    let text = bigram_tsv(&top_bigrams(&ex), a.top);
    print!("{text}");
    write_output(rec, &a.eval.out.join("bigrams.tsv"), &text)?;
    Ok(())
}

pub fn report(a: &TrainArgs, rec: &mut Recorder) -> Result<()> {
    let (settings, ds) = setup(a, rec)?;
    if ds.splits.test.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    let mut rows = Vec::new();
    let mut onset_rmse = None;
    for fs in FeatureSet::ALL {
        let mut cfg = settings.train.clone();
        cfg.features = fs;
        let train = onset_examples(&ds.splits.train, fs)?;
        let valid = onset_examples(&ds.splits.validation, fs)?;
        let model = train_initial(&train, &valid, &cfg)?.model;
        let preds = onset_predictions(&model, &ds.splits.test, fs)?;
        let (p, d): (Vec<GammaParams>, Vec<f64>) = preds.iter().map(|(_, d, p)| (*p, *d)).unzip();
        let row = metrics(&p, &d, "test", fs.name())?;
        if fs == FeatureSet::AllOnset {
            onset_rmse = Some((row.rmse, row.corr));
        }
        rows.push(row);
    }
    let text = metrics_tsv(&rows);
    print!("{text}");
    write_output(rec, &a.out.join("feature_sets.tsv"), &text)?;

    let train = onset_examples(&ds.splits.train, FeatureSet::AllOnset)?;
    let test = onset_examples(&ds.splits.test, FeatureSet::AllOnset)?;
    let xs: Vec<Vec<f64>> = train.iter().map(|e| e.x.clone()).collect();
    let ys: Vec<f64> = train.iter().map(|e| e.duration).collect();
    let ols = fit_linear(&xs, &ys)?;
    let pred: Vec<f64> = test.iter().map(|e| ols.predict(&e.x)).collect();
    let truth: Vec<f64> = test.iter().map(|e| e.duration).collect();
    let (rmse, corr, _) = point_metrics(&pred, &truth)?;
    let (g_rmse, g_corr) = onset_rmse.expect("onset set is always trained");
    let text = format!(
        "model\tfeatures\trmse\tcorr\ngamma_mean\tonset\t{g_rmse:.6}\t{g_corr:.6}\nleast_squares\tonset\t{rmse:.6}\t{corr:.6}\n"
    );
    print!("{text}");
    write_output(rec, &a.out.join("baseline.tsv"), &text)?;
    Ok(())
}
