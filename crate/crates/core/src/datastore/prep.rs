use std::collections::HashMap;

use chrono::NaiveDateTime;

use super::records::{hours_between, OutageRecord, RepairLog, SplitSpec};

pub const MIN_DURATION_HOURS: f64 = 5.0 / 60.0;
pub const MAX_DURATION_HOURS: f64 = 24.0;
/// Logs later than this fraction of the outage duration are dropped.
pub const TAIL_FRACTION: f64 = 0.975;

/// Keeps unplanned outages lasting more than 5 minutes and at most 24 hours.
pub fn filter_outages(records: &[OutageRecord]) -> Vec<OutageRecord> {
    records
        .iter()
        .filter(|r| {
            let d = r.duration_hours();
            !r.planned && d > MIN_DURATION_HOURS && d <= MAX_DURATION_HOURS
        })
        .cloned()
        .collect()
}

/// A log attached to an outage, with elapsed hours since outage start.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedLog {
    pub elapsed_hours: f64,
    pub log: RepairLog,
}

/// Attach logs to outages on the same feeder whose `[start, end]` window
/// contains them. When windows overlap, the outage with the latest start not
/// after the log wins. Logs past [`TAIL_FRACTION`] of the duration are then
/// dropped. Result is parallel to `outages`, each list time-ordered.
pub fn align_logs(outages: &[OutageRecord], logs: &[RepairLog]) -> Vec<Vec<AlignedLog>> {
    let mut by_feeder: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, o) in outages.iter().enumerate() {
        by_feeder.entry(o.feeder).or_default().push(i);
    }
    let mut out: Vec<Vec<AlignedLog>> = vec![Vec::new(); outages.len()];
    for log in logs {
        let Some(candidates) = by_feeder.get(&log.feeder) else {
            continue;
        };
        let owner = candidates
            .iter()
            .copied()
            .filter(|&i| outages[i].start <= log.time && log.time <= outages[i].end)
            .max_by(|&a, &b| {
                outages[a]
                    .start
                    .cmp(&outages[b].start)
                    .then_with(|| outages[b].id.cmp(&outages[a].id))
            });
        let Some(i) = owner else { continue };
        let o = &outages[i];
        let elapsed = hours_between(o.start, log.time);
        if elapsed / o.duration_hours() > TAIL_FRACTION {
            continue;
        }
        out[i].push(AlignedLog {
            elapsed_hours: elapsed,
            log: log.clone(),
        });
    }
    for list in &mut out {
        list.sort_by(|a, b| a.log.time.cmp(&b.log.time));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    pub fn counts(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Splits<U> {
        Splits {
            train: self.train.into_iter().map(&mut f).collect(),
            validation: self.validation.into_iter().map(&mut f).collect(),
            test: self.test.into_iter().map(&mut f).collect(),
        }
    }
}

/// Partition items by start time. Empty partitions are logged, not rejected.
pub fn split_by<T>(items: Vec<T>, spec: &SplitSpec, start: impl Fn(&T) -> NaiveDateTime) -> Splits<T> {
    let train_end = spec.train_end.and_hms_opt(0, 0, 0).unwrap();
    let valid_end = spec.valid_end.and_hms_opt(0, 0, 0).unwrap();
    let mut s = Splits {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for item in items {
        let t = start(&item);
        if t < train_end {
            s.train.push(item);
        } else if t < valid_end {
            s.validation.push(item);
        } else {
            s.test.push(item);
        }
    }
    for (name, n) in ["train", "validation", "test"].iter().zip(s.counts()) {
        if n == 0 {
            log::warn!("{name} split is empty");
        }
    }
    s
}

pub fn split_by_date(records: &[OutageRecord], spec: &SplitSpec) -> Splits<OutageRecord> {
    split_by(records.to_vec(), spec, |r| r.start)
}
