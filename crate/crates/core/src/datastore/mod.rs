//! Outage, repair-log and weather records: files, filtering, alignment,
//! date splits and the synthetic generator.

mod io;
mod prep;
mod records;
mod synth;

pub use io::{
    load, load_file, read_records, save_file, write_records, Corpus, LineError, LoadReport, Loaded, RecordKind,
    FORMAT_VERSION, LOGS_FILE, MAX_BAD_FRACTION, OUTAGES_FILE, WEATHER_FILE,
};
pub use prep::{
    align_logs, filter_outages, split_by, split_by_date, AlignedLog, Splits, MAX_DURATION_HOURS, MIN_DURATION_HOURS,
    TAIL_FRACTION,
};
pub use records::{hours_between, Cause, LineType, OutageRecord, RepairLog, SplitSpec, WeatherRow};
pub use synth::{cause_keyword, generate_synthetic, GenConfig};
