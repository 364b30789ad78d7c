//! Line-delimited JSON record files.
//!
//! Line 1 is a header `{"format":"<name>","version":1}`; each further
//! non-blank line is one record. Timestamps are `YYYY-MM-DDTHH:MM:SS`.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::records::{OutageRecord, RepairLog, WeatherRow};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;

pub const FORMAT_VERSION: u32 = 1;
/// Loading aborts when more than this fraction of record lines is malformed.
pub const MAX_BAD_FRACTION: f64 = 0.10;

pub const OUTAGES_FILE: &str = "outages.jsonl";
pub const LOGS_FILE: &str = "logs.jsonl";
pub const WEATHER_FILE: &str = "weather.jsonl";

pub trait RecordKind: Serialize + DeserializeOwned {
    const FORMAT: &'static str;
    fn check(&self) -> std::result::Result<(), (&'static str, String)>;
}

impl RecordKind for OutageRecord {
    const FORMAT: &'static str = "outages";
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        self.validate()
    }
}

impl RecordKind for RepairLog {
    const FORMAT: &'static str = "repair_logs";
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        Ok(())
    }
}

impl RecordKind for WeatherRow {
    const FORMAT: &'static str = "weather";
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        self.validate()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.field, self.reason)
    }
}

#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

pub fn write_records<T: RecordKind>(records: &[T]) -> String {
    let mut out = serde_json::to_string(&Header {
        format: T::FORMAT.into(),
        version: FORMAT_VERSION,
    })
    .unwrap();
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn field_of(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("record").to_string()
}

pub fn read_records<T: RecordKind>(text: &str) -> Result<Loaded<T>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("empty {} file: missing header line", T::FORMAT)))?;
    let header: Header = serde_json::from_str(header.1)
        .map_err(|e| Error::Data(format!("{} file: bad header line: {e}", T::FORMAT)))?;
    if header.format != T::FORMAT {
        return Err(Error::Data(format!(
            "expected a {} file, header says {:?}",
            T::FORMAT,
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{} file has unsupported version {}",
            T::FORMAT,
            header.version
        )));
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut total = 0usize;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let line_no = i + 1;
        match serde_json::from_str::<T>(line) {
            Ok(r) => match r.check() {
                Ok(()) => records.push(r),
                Err((field, reason)) => errors.push(LineError {
                    line: line_no,
                    field: field.to_string(),
                    reason,
                }),
            },
            Err(e) => {
                let msg = e.to_string();
                errors.push(LineError {
                    line: line_no,
                    field: field_of(&msg),
                    reason: msg,
                });
            }
        }
    }
    if total > 0 && errors.len() as f64 > MAX_BAD_FRACTION * total as f64 {
        let shown: Vec<String> = errors.iter().take(5).map(ToString::to_string).collect();
        return Err(Error::Data(format!(
            "{} of {} {} records malformed (limit {:.0}%): {}",
            errors.len(),
            total,
            T::FORMAT,
            MAX_BAD_FRACTION * 100.0,
            shown.join("; ")
        )));
    }
    for e in &errors {
        log::warn!("{} {e}", T::FORMAT);
    }
    Ok(Loaded { records, errors })
}

pub fn load_file<T: RecordKind>(path: &Path) -> Result<Loaded<T>> {
    let text = std::fs::read(path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    read_records(&String::from_utf8_lossy(&text))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn save_file<T: RecordKind>(path: &Path, records: &[T]) -> Result<()> {
    write_atomic(path, write_records(records).as_bytes())
}

/// Outages, repair logs and weather as loaded from or written to disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub outages: Vec<OutageRecord>,
    pub logs: Vec<RepairLog>,
    pub weather: Vec<WeatherRow>,
}

/// Per-file line errors that were tolerated during loading.
#[derive(Clone, Debug, Default)]
pub struct LoadReport {
    pub outage_errors: Vec<LineError>,
    pub log_errors: Vec<LineError>,
    pub weather_errors: Vec<LineError>,
}

pub fn load(outages: &Path, logs: &Path, weather: &Path) -> Result<(Corpus, LoadReport)> {
    let o = load_file::<OutageRecord>(outages)?;
    let l = load_file::<RepairLog>(logs)?;
    let w = load_file::<WeatherRow>(weather)?;
    Ok((
        Corpus {
            outages: o.records,
            logs: l.records,
            weather: w.records,
        },
        LoadReport {
            outage_errors: o.errors,
            log_errors: l.errors,
            weather_errors: w.errors,
        },
    ))
}

impl Corpus {
    pub fn load_dir(dir: &Path) -> Result<(Corpus, LoadReport)> {
        load(&dir.join(OUTAGES_FILE), &dir.join(LOGS_FILE), &dir.join(WEATHER_FILE))
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        save_file(&dir.join(OUTAGES_FILE), &self.outages)?;
        save_file(&dir.join(LOGS_FILE), &self.logs)?;
        save_file(&dir.join(WEATHER_FILE), &self.weather)
    }
}
