use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineType {
    Overhead,
    Underground,
}

/// Outage cause taxonomy used by the oracle feature and the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    EquipmentFailure,
    BirdAnimal,
    TreeWind,
    Vehicle,
    DigIn,
    Other,
}

impl Cause {
    pub const ALL: [Cause; 6] = [
        Cause::EquipmentFailure,
        Cause::BirdAnimal,
        Cause::TreeWind,
        Cause::Vehicle,
        Cause::DigIn,
        Cause::Other,
    ];

    pub fn index(self) -> usize {
        Cause::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Cause::EquipmentFailure => "equipment_failure",
            Cause::BirdAnimal => "bird_animal",
            Cause::TreeWind => "tree_wind",
            Cause::Vehicle => "vehicle",
            Cause::DigIn => "dig_in",
            Cause::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Cause> {
        Cause::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    pub id: u64,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub feeder: u32,
    pub line_type: LineType,
    pub cause: Cause,
    pub customers: i64,
    pub planned: bool,
}

impl OutageRecord {
    pub fn duration_hours(&self) -> f64 {
        hours_between(self.start, self.end)
    }

    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.end <= self.start {
            return Err(("end", format!("end {} is not after start {}", self.end, self.start)));
        }
        if self.customers < 0 {
            return Err(("customers", format!("negative customer count {}", self.customers)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairLog {
    pub feeder: u32,
    pub time: NaiveDateTime,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherRow {
    pub time: NaiveDateTime,
    /// degrees C
    pub temperature: f64,
    /// degrees C
    pub apparent_temperature: f64,
    /// fraction 0..1
    pub cloud_cover: f64,
    /// degrees C
    pub dew_point: f64,
    /// fraction 0..1
    pub humidity: f64,
    /// mm per hour
    pub precip_intensity: f64,
    /// fraction 0..1
    pub precip_probability: f64,
    /// hPa
    pub pressure: f64,
    /// m/s
    pub wind_speed: f64,
}

impl WeatherRow {
    pub const FIELDS: [&'static str; 9] = [
        "temperature",
        "apparent_temperature",
        "cloud_cover",
        "dew_point",
        "humidity",
        "precip_intensity",
        "precip_probability",
        "pressure",
        "wind_speed",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.temperature,
            self.apparent_temperature,
            self.cloud_cover,
            self.dew_point,
            self.humidity,
            self.precip_intensity,
            self.precip_probability,
            self.pressure,
            self.wind_speed,
        ]
    }

    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        for (name, v) in Self::FIELDS.iter().zip(self.values()) {
            if !v.is_finite() {
                return Err((name, format!("non-finite value {v}")));
            }
        }
        Ok(())
    }
}

/// Date boundaries: train is before `train_end`, validation before `valid_end`, test after.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: NaiveDate,
    pub valid_end: NaiveDate,
}

impl SplitSpec {
    pub fn new(train_end: NaiveDate, valid_end: NaiveDate) -> Result<Self> {
        if train_end >= valid_end {
            return Err(Error::invalid(format!(
                "train end {train_end} must precede validation end {valid_end}"
            )));
        }
        Ok(SplitSpec { train_end, valid_end })
    }

    /// March 15, 2014 and March 15, 2015.
    pub fn standard() -> Self {
        SplitSpec {
            train_end: NaiveDate::from_ymd_opt(2014, 3, 15).unwrap(),
            valid_end: NaiveDate::from_ymd_opt(2015, 3, 15).unwrap(),
        }
    }

    /// Parses `YYYY-MM-DD,YYYY-MM-DD`.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("split spec {s:?} must be 'train_end,valid_end'")))?;
        let date = |x: &str| {
            NaiveDate::parse_from_str(x.trim(), "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("bad date {x:?} in split spec: {e}")))
        };
        SplitSpec::new(date(a)?, date(b)?)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::standard()
    }
}

pub fn hours_between(a: NaiveDateTime, b: NaiveDateTime) -> f64 {
    (b - a).num_milliseconds() as f64 / 3_600_000.0
}
