//! Onset feature vectors: 5 time, 9 weather, 2 location and 3 load features,
//! optionally followed by a one-hot cause block.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike, Weekday};

use crate::datastore::{Cause, LineType, OutageRecord, WeatherRow};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;

pub const NUM_ONSET: usize = 19;
pub const NUM_CAUSES: usize = 6;
/// Pseudo-count pulling a feeder's mean repair time toward the global mean.
pub const FEEDER_PSEUDO_COUNT: f64 = 10.0;
pub const STD_FLOOR: f64 = 1e-6;
/// Position of the smoothed feeder mean in the feature vector.
pub const FEEDER_MEAN_DIM: usize = 15;
/// Weather farther than this from the outage start counts as missing.
pub const MAX_WEATHER_GAP_HOURS: i64 = 6;

pub const FEATURE_NAMES: [&str; NUM_ONSET + NUM_CAUSES] = [
    "month",
    "day_of_week",
    "day_of_year",
    "hour_of_day",
    "weekend",
    "temperature",
    "apparent_temperature",
    "cloud_cover",
    "dew_point",
    "humidity",
    "precip_intensity",
    "precip_probability",
    "pressure",
    "wind_speed",
    "overhead",
    "feeder_mean_hours",
    "log_customers",
    "outages_last_3h",
    "outages_last_8h",
    "cause_equipment_failure",
    "cause_bird_animal",
    "cause_tree_wind",
    "cause_vehicle",
    "cause_dig_in",
    "cause_other",
];

/// Dimensions passed through standardization unchanged: the ordinal time
/// features (already in `[0, 1)`) and every binary flag.
pub fn is_exempt(dim: usize) -> bool {
    dim <= 4 || dim == 14 || dim >= NUM_ONSET
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_cause(&self) -> bool {
        self.values.len() == NUM_ONSET + NUM_CAUSES
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeederStats {
    per_feeder: BTreeMap<u32, (usize, f64)>,
    global_mean: f64,
}

impl FeederStats {
    /// Build from training outages only.
    pub fn from_outages(train: &[OutageRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("feeder statistics need at least one training outage"));
        }
        let mut sums: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
        let mut total = 0.0;
        for o in train {
            let d = o.duration_hours();
            let e = sums.entry(o.feeder).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
            total += d;
        }
        let per_feeder = sums.into_iter().map(|(f, (n, s))| (f, (n, s / n as f64))).collect();
        Ok(FeederStats {
            per_feeder,
            global_mean: total / train.len() as f64,
        })
    }

    pub fn from_parts(per_feeder: BTreeMap<u32, (usize, f64)>, global_mean: f64) -> Self {
        FeederStats { per_feeder, global_mean }
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn feeder(&self, feeder: u32) -> Option<(usize, f64)> {
        self.per_feeder.get(&feeder).copied()
    }

    /// `(n m_feeder + m0 m_global) / (n + m0)`; the global mean for unknown feeders.
    pub fn smoothed_mean(&self, feeder: u32) -> f64 {
        match self.per_feeder.get(&feeder) {
            Some(&(n, m)) => {
                let n = n as f64;
                (n * m + FEEDER_PSEUDO_COUNT * self.global_mean) / (n + FEEDER_PSEUDO_COUNT)
            }
            None => self.global_mean,
        }
    }

    /// [`smoothed_mean`](Self::smoothed_mean) with one training outage of
    /// `duration` hours taken out of both the feeder and global means.
    pub fn smoothed_mean_excluding(&self, feeder: u32, duration: f64) -> f64 {
        let total_n: usize = self.per_feeder.values().map(|v| v.0).sum();
        let Some(&(n, m)) = self.per_feeder.get(&feeder) else {
            return self.global_mean;
        };
        if total_n <= 1 {
            return self.global_mean;
        }
        let global = (self.global_mean * total_n as f64 - duration) / (total_n - 1) as f64;
        let n = n as f64 - 1.0;
        let feeder_sum = m * (n + 1.0) - duration;
        (feeder_sum + FEEDER_PSEUDO_COUNT * global) / (n + FEEDER_PSEUDO_COUNT)
    }

    /// `global<TAB>mean` then `feeder<TAB>n<TAB>mean` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("global\t{:?}\n", self.global_mean);
        for (f, (n, m)) in &self.per_feeder {
            out.push_str(&format!("{f}\t{n}\t{m:?}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |n: usize| Error::Data(format!("feeder stats line {}: malformed", n + 1));
        let mut lines = text.lines().enumerate();
        let global_mean = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("global\t"))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(0))?;
        let mut per_feeder = BTreeMap::new();
        for (n, line) in lines {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(bad(n));
            }
            let f = parts[0].parse().map_err(|_| bad(n))?;
            let c = parts[1].parse().map_err(|_| bad(n))?;
            let m = parts[2].parse().map_err(|_| bad(n))?;
            per_feeder.insert(f, (c, m));
        }
        Ok(FeederStats { per_feeder, global_mean })
    }
}

/// Sorted outage start times for the crew-load features.
#[derive(Clone, Debug, Default)]
pub struct RecentIndex {
    times: Vec<NaiveDateTime>,
}

impl RecentIndex {
    pub fn new(mut times: Vec<NaiveDateTime>) -> Self {
        times.sort();
        RecentIndex { times }
    }

    /// Unplanned outage starts, including those later removed by filtering.
    pub fn from_outages(outages: &[OutageRecord]) -> Self {
        RecentIndex::new(outages.iter().filter(|o| !o.planned).map(|o| o.start).collect())
    }

    /// Starts strictly inside `(t - hours, t)`.
    pub fn count_before(&self, t: NaiveDateTime, hours: i64) -> usize {
        let lo = t - Duration::hours(hours);
        let a = self.times.partition_point(|&x| x <= lo);
        let b = self.times.partition_point(|&x| x < t);
        b.saturating_sub(a)
    }
}

/// Weather rows sorted by time for nearest-in-time lookup.
#[derive(Clone, Debug, Default)]
pub struct WeatherIndex {
    rows: Vec<WeatherRow>,
}

impl WeatherIndex {
    pub fn new(mut rows: Vec<WeatherRow>) -> Self {
        rows.sort_by_key(|r| r.time);
        WeatherIndex { rows }
    }

    /// Closest row to `t`, ties going to the earlier row; `None` past the gap limit.
    pub fn nearest(&self, t: NaiveDateTime) -> Option<&WeatherRow> {
        let i = self.rows.partition_point(|r| r.time < t);
        let after = self.rows.get(i);
        let before = i.checked_sub(1).and_then(|j| self.rows.get(j));
        let best = match (before, after) {
            (Some(b), Some(a)) => {
                if (t - b.time) <= (a.time - t) {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => return None,
        };
        let gap = (best.time - t).num_seconds().abs();
        (gap <= MAX_WEATHER_GAP_HOURS * 3600).then_some(best)
    }
}

/// Build the onset feature vector for one outage.
pub fn extract(
    outage: &OutageRecord,
    weather: Option<&WeatherRow>,
    recent: &RecentIndex,
    stats: &FeederStats,
    include_cause: bool,
) -> Result<FeatureVector> {
    let weather = weather.ok_or_else(|| Error::Data(format!("missing weather row for outage {}", outage.id)))?;
    if outage.customers < 0 {
        return Err(Error::Data(format!(
            "outage {} has negative customer count {}",
            outage.id, outage.customers
        )));
    }
    let t = outage.start;
    let weekend = matches!(t.weekday(), Weekday::Sat | Weekday::Sun);
    let mut v = Vec::with_capacity(NUM_ONSET + NUM_CAUSES);
    v.push(t.month0() as f64 / 12.0);
    v.push(t.weekday().num_days_from_monday() as f64 / 7.0);
    v.push(t.ordinal0() as f64 / 366.0);
    v.push(t.hour() as f64 / 24.0);
    v.push(if weekend { 1.0 } else { 0.0 });
    v.extend(weather.values());
    v.push(if outage.line_type == LineType::Overhead { 1.0 } else { 0.0 });
    v.push(stats.smoothed_mean(outage.feeder));
    v.push((outage.customers as f64).ln_1p());
    v.push(recent.count_before(t, 3) as f64);
    v.push(recent.count_before(t, 8) as f64);
    if include_cause {
        v.extend(Cause::ALL.iter().map(|&c| if c == outage.cause { 1.0 } else { 0.0 }));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Data(format!(
            "outage {}: non-finite feature {}",
            outage.id, FEATURE_NAMES[i]
        )));
    }
    Ok(FeatureVector { values: v })
}

/// Everything needed to extract features for any outage of a corpus.
#[derive(Clone, Debug)]
pub struct FeatureBuilder {
    pub weather: WeatherIndex,
    pub recent: RecentIndex,
    pub stats: FeederStats,
    pub include_cause: bool,
}

impl FeatureBuilder {
    pub fn build(&self, outage: &OutageRecord) -> Result<FeatureVector> {
        extract(
            outage,
            self.weather.nearest(outage.start),
            &self.recent,
            &self.stats,
            self.include_cause,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Population moments of the training vectors; exempt dims get `(0, 1)`.
    pub fn fit(train: &[FeatureVector]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::invalid("standardization needs at least one vector"))?;
        let dim = first.len();
        let n = train.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in train {
            check_dim(v, dim)?;
            for (m, x) in mean.iter_mut().zip(&v.values) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in train {
            for ((s, x), m) in var.iter_mut().zip(&v.values).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let mut std: Vec<f64> = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        for d in 0..dim {
            if is_exempt(d) {
                mean[d] = 0.0;
                std[d] = 1.0;
            }
        }
        Ok(StandardizationStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn standardize(&self, v: &FeatureVector) -> Result<FeatureVector> {
        check_dim(v, self.dim())?;
        Ok(FeatureVector {
            values: v
                .values
                .iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
        })
    }

    pub fn unstandardize(&self, v: &FeatureVector) -> Result<FeatureVector> {
        check_dim(v, self.dim())?;
        Ok(FeatureVector {
            values: v
                .values
                .iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(x, (m, s))| x * s + m)
                .collect(),
        })
    }

    /// `name<TAB>mean<TAB>std` per dimension, with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature\tmean\tstd\n");
        for (i, (m, s)) in self.mean.iter().zip(&self.std).enumerate() {
            out.push_str(&format!("{}\t{m:?}\t{s:?}\n", FEATURE_NAMES[i]));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let parts: Vec<&str> = line.split('\t').collect();
            let parsed = (parts.len() == 3 && parts[0] == FEATURE_NAMES.get(n - 1).copied().unwrap_or(""))
                .then(|| Some((parts[1].parse::<f64>().ok()?, parts[2].parse::<f64>().ok()?)))
                .flatten();
            let (m, s) = parsed.ok_or_else(|| Error::Data(format!("feature stats line {}: malformed", n + 1)))?;
            mean.push(m);
            std.push(s);
        }
        if mean.len() != NUM_ONSET && mean.len() != NUM_ONSET + NUM_CAUSES {
            return Err(Error::Data(format!("feature stats have {} dimensions", mean.len())));
        }
        Ok(StandardizationStats { mean, std })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        StandardizationStats::parse_tsv(&std::fs::read_to_string(path)?)
    }
}

fn check_dim(v: &FeatureVector, dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::invalid(format!(
            "feature vector has {} dimensions, expected {dim}",
            v.len()
        )));
    }
    Ok(())
}

/// Feature subsets used to compare initial predictors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    None,
    Time,
    Weather,
    TimeWeather,
    AllOnset,
    CauseOnly,
    CauseOnset,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 7] = [
        FeatureSet::None,
        FeatureSet::Weather,
        FeatureSet::Time,
        FeatureSet::TimeWeather,
        FeatureSet::AllOnset,
        FeatureSet::CauseOnly,
        FeatureSet::CauseOnset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::None => "none",
            FeatureSet::Time => "time",
            FeatureSet::Weather => "weather",
            FeatureSet::TimeWeather => "time+weather",
            FeatureSet::AllOnset => "onset",
            FeatureSet::CauseOnly => "cause",
            FeatureSet::CauseOnset => "cause+onset",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature set {s:?}")))
    }

    pub fn needs_cause(self) -> bool {
        matches!(self, FeatureSet::CauseOnly | FeatureSet::CauseOnset)
    }

    pub fn indices(self) -> Vec<usize> {
        let causes = NUM_ONSET..NUM_ONSET + NUM_CAUSES;
        match self {
            FeatureSet::None => vec![],
            FeatureSet::Time => (0..5).collect(),
            FeatureSet::Weather => (5..14).collect(),
            FeatureSet::TimeWeather => (0..14).collect(),
            FeatureSet::AllOnset => (0..NUM_ONSET).collect(),
            FeatureSet::CauseOnly => causes.collect(),
            FeatureSet::CauseOnset => (0..NUM_ONSET + NUM_CAUSES).collect(),
        }
    }

    pub fn select(self, v: &FeatureVector) -> Result<Vec<f64>> {
        if self.needs_cause() && !v.has_cause() {
            return Err(Error::invalid(format!(
                "feature set {} needs the cause block",
                self.name()
            )));
        }
        Ok(self.indices().into_iter().map(|i| v.values[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    fn outage(id: u64, feeder: u32, start: NaiveDateTime, minutes: i64, customers: i64) -> OutageRecord {
        OutageRecord {
            id,
            start,
            end: start + Duration::minutes(minutes),
            feeder,
            line_type: LineType::Overhead,
            cause: Cause::TreeWind,
            customers,
            planned: false,
        }
    }

    fn weather(t: NaiveDateTime) -> WeatherRow {
        WeatherRow {
            time: t,
            temperature: 10.0,
            apparent_temperature: 8.0,
            cloud_cover: 0.5,
            dew_point: 5.0,
            humidity: 0.7,
            precip_intensity: 0.0,
            precip_probability: 0.2,
            pressure: 1012.0,
            wind_speed: 4.0,
        }
    }

    #[test]
    fn smoothing_formula() {
        let mut train: Vec<OutageRecord> = (0..10).map(|i| outage(i, 7, at(2010, 1, 1, 0), 240, 1)).collect();
        // 30 outages of 80 minutes bring the global mean to 2 hours
        train.extend((0..30).map(|i| outage(100 + i, 8, at(2010, 1, 1, 0), 80, 1)));
        let stats = FeederStats::from_outages(&train).unwrap();
        assert!((stats.global_mean() - 2.0).abs() < 1e-12);
        assert!((stats.smoothed_mean(7) - 3.0).abs() < 1e-12);
        assert_eq!(stats.smoothed_mean(12345), stats.global_mean());
        assert_eq!(FeederStats::parse(&stats.to_text()).unwrap(), stats);
    }

    #[test]
    fn worked_example_and_flags() {
        // 2009-07-25 is a Saturday
        let o = outage(1, 2184, at(2009, 7, 25, 13), 180, 113);
        let stats = FeederStats::from_outages(std::slice::from_ref(&o)).unwrap();
        let w = weather(at(2009, 7, 25, 13));
        let f = extract(&o, Some(&w), &RecentIndex::default(), &stats, false).unwrap();
        assert_eq!(f.len(), NUM_ONSET);
        assert_eq!(f.values[4], 1.0);
        assert_eq!(f.values[14], 1.0);
        assert!((f.values[16] - 114f64.ln()).abs() < 1e-12);
        assert!((f.values[16] - 4.736).abs() < 1e-3);
        let zero = outage(2, 2184, at(2009, 7, 27, 13), 180, 0);
        assert_eq!(extract(&zero, Some(&w), &RecentIndex::default(), &stats, false).unwrap().values[16], 0.0);
        let with_cause = extract(&o, Some(&w), &RecentIndex::default(), &stats, true).unwrap();
        assert_eq!(&with_cause.values[NUM_ONSET..], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn extraction_errors() {
        let o = outage(9, 1, at(2010, 1, 1, 0), 60, 5);
        let stats = FeederStats::from_outages(std::slice::from_ref(&o)).unwrap();
        let err = extract(&o, None, &RecentIndex::default(), &stats, false).unwrap_err();
        assert!(err.to_string().contains('9'));
        let neg = outage(10, 1, at(2010, 1, 1, 0), 60, -3);
        let w = weather(at(2010, 1, 1, 0));
        assert!(extract(&neg, Some(&w), &RecentIndex::default(), &stats, false).is_err());
    }

    #[test]
    fn recent_counts_use_open_windows() {
        let t = at(2012, 5, 5, 12);
        let idx = RecentIndex::new(vec![
            t - Duration::hours(8),
            t - Duration::hours(5),
            t - Duration::hours(3),
            t - Duration::minutes(1),
            t,
            t + Duration::hours(1),
        ]);
        assert_eq!(idx.count_before(t, 3), 1);
        assert_eq!(idx.count_before(t, 8), 3);
    }

    #[test]
    fn nearest_weather_prefers_earlier_on_ties() {
        let idx = WeatherIndex::new(vec![weather(at(2012, 1, 1, 1)), weather(at(2012, 1, 1, 3))]);
        assert_eq!(idx.nearest(at(2012, 1, 1, 2)).unwrap().time, at(2012, 1, 1, 1));
        let later = at(2012, 1, 1, 2) + Duration::minutes(1);
        assert_eq!(idx.nearest(later).unwrap().time, at(2012, 1, 1, 3));
        assert!(idx.nearest(at(2012, 1, 2, 12)).is_none());
    }

    #[test]
    fn feature_sets() {
        assert_eq!(FeatureSet::AllOnset.indices().len(), 19);
        assert_eq!(FeatureSet::TimeWeather.indices().len(), 14);
        assert_eq!(FeatureSet::CauseOnset.indices().len(), 25);
        let v = FeatureVector {
            values: vec![0.0; NUM_ONSET],
        };
        assert!(FeatureSet::CauseOnly.select(&v).is_err());
        assert_eq!(FeatureSet::parse("time+weather").unwrap(), FeatureSet::TimeWeather);
    }
}
