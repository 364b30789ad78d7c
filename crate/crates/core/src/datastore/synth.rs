//! Seeded synthetic outage corpus: hourly weather, outages with
//! cause-dependent timing and durations, and templated repair logs.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::io::Corpus;
use super::records::{Cause, LineType, OutageRecord, RepairLog, WeatherRow};
use crate::error::{Error, Result};
use crate::gammadist::GammaParams;
use crate::kv::{parse_value, KvFile};

/// Generator settings. Multiplicative duration effects are normalized to
/// mean one, so `cause_shape * cause_scale` is the per-cause mean before
/// feeder, line, customer, severity and crew-load effects.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n_outages: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub n_feeders: usize,
    pub p_overhead: f64,
    pub p_planned: f64,
    pub cause_prior: [f64; 6],
    pub cause_shape: [f64; 6],
    /// hours
    pub cause_scale: [f64; 6],
    pub feeder_sigma: f64,
    pub severity_sigma: f64,
    pub overhead_factor: f64,
    pub underground_factor: f64,
    pub customers_median: f64,
    pub customers_sigma: f64,
    pub customers_exponent: f64,
    /// fractional duration increase per outage in the preceding 8 hours
    pub busy_factor: f64,
    pub storms_per_year: f64,
    pub p_no_logs: f64,
    pub max_logs: usize,
    pub p_keyword: f64,
    pub p_severity_hint: f64,
    pub p_closing_log: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_outages: 850,
            start: NaiveDate::from_ymd_opt(2005, 9, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2016, 3, 15).unwrap(),
            n_feeders: 120,
            p_overhead: 0.6,
            p_planned: 0.04,
            cause_prior: [0.44, 0.14, 0.18, 0.07, 0.05, 0.12],
            cause_shape: [1.6, 1.3, 2.0, 2.6, 2.2, 1.1],
            cause_scale: [2.8, 0.9, 3.2, 1.9, 2.3, 2.2],
            feeder_sigma: 0.35,
            severity_sigma: 0.45,
            overhead_factor: 0.85,
            underground_factor: 1.3,
            customers_median: 80.0,
            customers_sigma: 1.2,
            customers_exponent: 0.12,
            busy_factor: 0.03,
            storms_per_year: 9.0,
            p_no_logs: 0.2,
            max_logs: 6,
            p_keyword: 0.6,
            p_severity_hint: 0.7,
            p_closing_log: 0.3,
        }
    }
}

fn cause_key(prefix: &str, c: Cause) -> String {
    format!("{prefix}.{}", c.name())
}

impl GenConfig {
    /// Defaults overridden by the keys present in `kv`; unknown keys are errors.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut c = GenConfig::default();
        for (k, v) in kv.iter() {
            match k {
                "n_outages" => c.n_outages = parse_value(k, v)?,
                "start" => c.start = parse_date(k, v)?,
                "end" => c.end = parse_date(k, v)?,
                "n_feeders" => c.n_feeders = parse_value(k, v)?,
                "p_overhead" => c.p_overhead = parse_value(k, v)?,
                "p_planned" => c.p_planned = parse_value(k, v)?,
                "feeder_sigma" => c.feeder_sigma = parse_value(k, v)?,
                "severity_sigma" => c.severity_sigma = parse_value(k, v)?,
                "overhead_factor" => c.overhead_factor = parse_value(k, v)?,
                "underground_factor" => c.underground_factor = parse_value(k, v)?,
                "customers_median" => c.customers_median = parse_value(k, v)?,
                "customers_sigma" => c.customers_sigma = parse_value(k, v)?,
                "customers_exponent" => c.customers_exponent = parse_value(k, v)?,
                "busy_factor" => c.busy_factor = parse_value(k, v)?,
                "storms_per_year" => c.storms_per_year = parse_value(k, v)?,
                "p_no_logs" => c.p_no_logs = parse_value(k, v)?,
                "max_logs" => c.max_logs = parse_value(k, v)?,
                "p_keyword" => c.p_keyword = parse_value(k, v)?,
                "p_severity_hint" => c.p_severity_hint = parse_value(k, v)?,
                "p_closing_log" => c.p_closing_log = parse_value(k, v)?,
                _ => {
                    let hit = Cause::ALL.iter().find_map(|&cause| {
                        if k == cause_key("cause_prior", cause) {
                            Some((0, cause.index()))
                        } else if k == cause_key("cause_shape", cause) {
                            Some((1, cause.index()))
                        } else if k == cause_key("cause_scale", cause) {
                            Some((2, cause.index()))
                        } else {
                            None
                        }
                    });
                    match hit {
                        Some((0, i)) => c.cause_prior[i] = parse_value(k, v)?,
                        Some((1, i)) => c.cause_shape[i] = parse_value(k, v)?,
                        Some((_, i)) => c.cause_scale[i] = parse_value(k, v)?,
                        None => return Err(Error::Config(format!("unknown generator key {k}"))),
                    }
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::from_pairs([
            ("n_outages", self.n_outages.to_string()),
            ("start", self.start.to_string()),
            ("end", self.end.to_string()),
            ("n_feeders", self.n_feeders.to_string()),
            ("p_overhead", self.p_overhead.to_string()),
            ("p_planned", self.p_planned.to_string()),
            ("feeder_sigma", self.feeder_sigma.to_string()),
            ("severity_sigma", self.severity_sigma.to_string()),
            ("overhead_factor", self.overhead_factor.to_string()),
            ("underground_factor", self.underground_factor.to_string()),
            ("customers_median", self.customers_median.to_string()),
            ("customers_sigma", self.customers_sigma.to_string()),
            ("customers_exponent", self.customers_exponent.to_string()),
            ("busy_factor", self.busy_factor.to_string()),
            ("storms_per_year", self.storms_per_year.to_string()),
            ("p_no_logs", self.p_no_logs.to_string()),
            ("max_logs", self.max_logs.to_string()),
            ("p_keyword", self.p_keyword.to_string()),
            ("p_severity_hint", self.p_severity_hint.to_string()),
            ("p_closing_log", self.p_closing_log.to_string()),
        ]);
        for c in Cause::ALL {
            kv.set(cause_key("cause_prior", c), self.cause_prior[c.index()].to_string());
            kv.set(cause_key("cause_shape", c), self.cause_shape[c.index()].to_string());
            kv.set(cause_key("cause_scale", c), self.cause_scale[c.index()].to_string());
        }
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let total: f64 = self.cause_prior.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("cause priors must sum to 1, got {total}"));
        }
        if self.cause_prior.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("cause priors must lie in [0, 1]".into());
        }
        for (name, p) in [
            ("p_overhead", self.p_overhead),
            ("p_planned", self.p_planned),
            ("p_no_logs", self.p_no_logs),
            ("p_keyword", self.p_keyword),
            ("p_severity_hint", self.p_severity_hint),
            ("p_closing_log", self.p_closing_log),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        if self.cause_shape.iter().chain(&self.cause_scale).any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("cause shapes and scales must be positive".into());
        }
        for (name, x) in [
            ("feeder_sigma", self.feeder_sigma),
            ("severity_sigma", self.severity_sigma),
            ("customers_sigma", self.customers_sigma),
            ("customers_exponent", self.customers_exponent),
            ("busy_factor", self.busy_factor),
            ("storms_per_year", self.storms_per_year),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be non-negative, got {x}"));
            }
        }
        if !(self.overhead_factor > 0.0 && self.underground_factor > 0.0 && self.customers_median > 0.0) {
            return bad("line factors and customers_median must be positive".into());
        }
        if self.n_outages == 0 || self.n_feeders == 0 {
            return bad("n_outages and n_feeders must be at least 1".into());
        }
        if !(1..=6).contains(&self.max_logs) {
            return bad(format!("max_logs must be in 1..=6, got {}", self.max_logs));
        }
        if self.start >= self.end {
            return bad(format!("start {} must precede end {}", self.start, self.end));
        }
        Ok(())
    }
}

fn parse_date(key: &str, v: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| Error::Config(format!("bad date {v:?} for {key}: {e}")))
}

/// The single token that marks each cause in generated logs.
pub fn cause_keyword(c: Cause) -> &'static str {
    match c {
        Cause::EquipmentFailure => "arrestor",
        Cause::BirdAnimal => "crow",
        Cause::TreeWind => "tree",
        Cause::Vehicle => "car",
        Cause::DigIn => "dig-in",
        Cause::Other => "unknown",
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn winter(doy: u32) -> f64 {
    0.5 * (1.0 + (2.0 * std::f64::consts::PI * (doy as f64 - 15.0) / 365.25).cos())
}

fn generate_weather(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<WeatherRow> {
    let t0 = cfg.start.and_hms_opt(0, 0, 0).unwrap();
    let hours = (cfg.end.and_hms_opt(0, 0, 0).unwrap() - t0).num_hours() as usize + 1;
    let mut rows = Vec::with_capacity(hours);
    let (mut lw, mut temp_ar, mut cloud_ar, mut press_ar) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    // active storms as (start hour, length, peak wind)
    let mut storms: Vec<(usize, f64, f64)> = Vec::new();
    let tau = 2.0 * std::f64::consts::PI;
    for h in 0..hours {
        let time = t0 + Duration::hours(h as i64);
        let doy = time.ordinal();
        let hour = time.hour() as f64;
        let w = winter(doy);
        if rng.random::<f64>() < cfg.storms_per_year / 8766.0 * 2.0 * w {
            storms.push((h, rng.random_range(8.0..36.0), rng.random_range(10.0..24.0)));
        }
        storms.retain(|&(s, len, _)| ((h - s) as f64) < len);
        let bump = storms
            .iter()
            .map(|&(s, len, peak)| peak * (std::f64::consts::PI * (h - s) as f64 / len).sin())
            .fold(0.0, f64::max);
        let storm = (bump / 20.0).min(1.0);

        lw = 0.95 * lw + 0.1 * normal(rng);
        temp_ar = 0.97 * temp_ar + 0.5 * normal(rng);
        cloud_ar = 0.95 * cloud_ar + 0.3 * normal(rng);
        press_ar = 0.98 * press_ar + 1.2 * normal(rng);
        let wind = 3.5 * (lw + 0.2 * w).exp() + bump;
        let temperature = 11.0 + 7.0 * (tau * (doy as f64 - 110.0) / 365.25).sin()
            + 4.0 * (tau * (hour - 9.0) / 24.0).sin()
            + temp_ar
            - 2.0 * storm;
        let cloud = 1.0 / (1.0 + (-(cloud_ar + 0.8 * w - 0.2 + 2.5 * storm)).exp());
        let precip_probability = (0.7 * cloud * cloud + 0.3 * storm).clamp(0.0, 1.0);
        let precip_intensity = if rng.random::<f64>() < 0.5 * precip_probability {
            (-0.5 + 0.8 * normal(rng)).exp() * (1.0 + 2.0 * storm)
        } else {
            0.0
        };
        let humidity = (0.55 + 0.35 * cloud + 0.05 * normal(rng)).clamp(0.2, 1.0);
        let dew_point = temperature - 20.0 * (1.0 - humidity);
        let pressure = 1016.0 + press_ar - 25.0 * storm;
        let apparent_temperature = temperature - 0.5 * (wind - 2.0).max(0.0);
        rows.push(WeatherRow {
            time,
            temperature: round2(temperature),
            apparent_temperature: round2(apparent_temperature),
            cloud_cover: round2(cloud),
            dew_point: round2(dew_point),
            humidity: round2(humidity),
            precip_intensity: round2(precip_intensity),
            precip_probability: round2(precip_probability),
            pressure: round2(pressure),
            wind_speed: round2(wind),
        });
    }
    rows
}

/// Relative hourly intensity of each cause before prior weighting.
fn cause_modulation(row: &WeatherRow) -> [f64; 6] {
    let doy = row.time.ordinal() as f64;
    let hour = row.time.hour();
    let weekend = matches!(row.time.weekday(), Weekday::Sat | Weekday::Sun);
    let bird_season = 0.15 + 3.0 * (-((doy - 190.0) / 35.0).powi(2)).exp();
    let bird_hour = match hour {
        5..=8 | 16..=19 => 3.0,
        9..=15 => 0.8,
        _ => 0.1,
    };
    let tree = (0.4 + 0.6 * winter(row.time.ordinal())) * (0.35 * (row.wind_speed - 6.0)).exp().min(60.0);
    let night = hour >= 22 || hour <= 4;
    let vehicle = match (night, weekend) {
        (true, true) => 5.0,
        (true, false) => 2.0,
        _ => 0.4,
    };
    let dig = if !weekend && (8..=16).contains(&hour) { 4.0 } else { 0.15 };
    let other = 1.0 + 0.5 * row.precip_intensity;
    [1.0, bird_season * bird_hour, tree, vehicle, dig, other]
}

fn overhead_affinity(c: Cause, line: LineType) -> f64 {
    match (c, line) {
        (Cause::BirdAnimal | Cause::TreeWind | Cause::Vehicle, LineType::Overhead) => 3.0,
        (Cause::BirdAnimal | Cause::TreeWind | Cause::Vehicle, LineType::Underground) => 0.3,
        (Cause::DigIn, LineType::Underground) => 2.0,
        _ => 1.0,
    }
}

/// Index of the first cumulative weight exceeding `u * total`.
fn pick(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

fn cumsum(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

struct Feeder {
    id: u32,
    line: LineType,
    factor: f64,
    weight: f64,
}

const CREWS: &[&str] = &[
    "slsvc", "nas", "sfd", "j smith", "k lee", "duty supervisor", "ems", "crew 4", "crew 7", "dispatch", "r diaz",
];
const STREETS: &[&str] = &["cherry", "main", "pine", "union", "jackson", "madison", "alder", "spruce", "yesler", "marion"];
const SUFFIXES: &[&str] = &["st", "av", "ave", "way", "pl"];
const DIRS: &[&str] = &["n", "s", "e", "w"];

fn location<R: Rng>(rng: &mut R) -> String {
    let street = STREETS.choose(rng).unwrap();
    let suffix = SUFFIXES.choose(rng).unwrap();
    let dir = DIRS.choose(rng).unwrap();
    match rng.random_range(0..5) {
        0 => format!("@ {} {dir} {street} {suffix}", rng.random_range(100..4000)),
        1 => format!("@ s/s of {dir} {street} {suffix}"),
        2 => format!("at tp {}", rng.random_range(10..999)),
        3 => format!("on p-{}", rng.random_range(100..9999)),
        _ => format!("near {} {street} {suffix}", rng.random_range(100..4000)),
    }
}

fn status_phrase<R: Rng>(rng: &mut R, feeder: u32) -> String {
    match rng.random_range(0..7) {
        0 => "reports lights out".into(),
        1 => "reports power out".into(),
        2 => format!("breaker trip fdr {feeder} relayed out"),
        3 => "ems urgent alarm and breaker trip".into(),
        4 => "customers calling in lights out".into(),
        5 => "reports partial power".into(),
        _ => format!("{feeder} has cycled lights out"),
    }
}

/// Every frame is shared across causes, so the keyword is the only token
/// that identifies the cause.
fn keyword_phrase<R: Rng>(rng: &mut R, cause: Cause) -> String {
    let kw = cause_keyword(cause);
    let loc = location(rng);
    match rng.random_range(0..6) {
        0 => format!("found {kw} {loc}"),
        1 => format!("{kw} damage on p-{}", rng.random_range(100..9999)),
        2 => format!("suspect {kw} {loc}"),
        3 => format!("{kw} problem need urd"),
        4 => format!("confirmed {kw} at tp {}", rng.random_range(10..999)),
        _ => format!("{kw} related {loc}"),
    }
}

fn progress_phrase<R: Rng>(rng: &mut R, feeder: u32) -> String {
    match rng.random_range(0..10) {
        0 => "crew on site investigating".into(),
        1 => "duty supervisor notified".into(),
        2 => format!("to investigate {}", location(rng)),
        3 => "to respond".into(),
        4 => "need nurd".into(),
        5 => "requests clearance".into(),
        6 => "waiting for materials".into(),
        7 => "switching to restore".into(),
        8 => format!("patrolling fdr {feeder}"),
        _ => "part out awaiting repair".into(),
    }
}

fn severity_phrase<R: Rng>(rng: &mut R, severity: f64, sigma: f64) -> Option<&'static str> {
    let (lo, hi) = ((-0.5 * sigma).exp(), (0.5 * sigma).exp());
    let opts: &[&str] = if severity < lo {
        &["minor damage", "fuse only", "single customer side"]
    } else if severity > hi {
        &["major damage", "multiple spans down", "extensive damage"]
    } else {
        return None;
    };
    opts.choose(rng).copied()
}

/// Generate a corpus; identical `(cfg, seed)` give identical output.
pub fn generate_synthetic(cfg: &GenConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weather = generate_weather(cfg, &mut rng);

    let feeder_ids = rand::seq::index::sample(&mut rng, 9000, cfg.n_feeders);
    let feeders: Vec<Feeder> = feeder_ids
        .iter()
        .map(|i| {
            let line = if rng.random::<f64>() < cfg.p_overhead {
                LineType::Overhead
            } else {
                LineType::Underground
            };
            let s = cfg.feeder_sigma;
            Feeder {
                id: 1000 + i as u32,
                line,
                factor: (s * normal(&mut rng) - 0.5 * s * s).exp(),
                weight: (0.8 * normal(&mut rng)).exp(),
            }
        })
        .collect();
    let feeder_cum: Vec<Vec<f64>> = Cause::ALL
        .iter()
        .map(|&c| cumsum(feeders.iter().map(|f| f.weight * overhead_affinity(c, f.line))))
        .collect();

    // per-cause intensity normalized so each cause's share matches its prior
    let mods: Vec<[f64; 6]> = weather.iter().map(cause_modulation).collect();
    let mut mean_mod = [0.0; 6];
    for m in &mods {
        for c in 0..6 {
            mean_mod[c] += m[c] / mods.len() as f64;
        }
    }
    let intensity = |m: &[f64; 6], c: usize| cfg.cause_prior[c] * m[c] / mean_mod[c];
    // the final hour row is the end boundary, not a start slot
    let hour_cum = cumsum(mods[..mods.len() - 1].iter().map(|m| (0..6).map(|c| intensity(m, c)).sum()));

    struct Draft {
        start: NaiveDateTime,
        cause: Cause,
        feeder: usize,
        customers: i64,
        planned: bool,
    }
    let mut drafts: Vec<Draft> = (0..cfg.n_outages)
        .map(|_| {
            let h = pick(&hour_cum, rng.random());
            let cause_cum = cumsum((0..6).map(|c| intensity(&mods[h], c)));
            let cause = Cause::ALL[pick(&cause_cum, rng.random())];
            let feeder = pick(&feeder_cum[cause.index()], rng.random());
            let customers = (cfg.customers_median * (cfg.customers_sigma * normal(&mut rng)).exp())
                .round()
                .min(20_000.0) as i64;
            Draft {
                start: weather[h].time + Duration::minutes(rng.random_range(0..60)),
                cause,
                feeder,
                customers,
                planned: rng.random::<f64>() < cfg.p_planned,
            }
        })
        .collect();
    drafts.sort_by_key(|d| d.start);

    let cust_norm = |c: i64| ((1.0 + c as f64) / (1.0 + cfg.customers_median)).powf(cfg.customers_exponent);
    let mut outages = Vec::with_capacity(drafts.len());
    let mut logs = Vec::new();
    let mut window_start = 0;
    for (i, d) in drafts.iter().enumerate() {
        while drafts[window_start].start <= d.start - Duration::hours(8) {
            window_start += 1;
        }
        let busy = drafts[window_start..i].iter().filter(|x| !x.planned).count() as f64;
        let feeder = &feeders[d.feeder];
        let c = d.cause.index();
        let s = cfg.severity_sigma;
        let severity = (s * normal(&mut rng) - 0.5 * s * s).exp();
        let line_f = match feeder.line {
            LineType::Overhead => cfg.overhead_factor,
            LineType::Underground => cfg.underground_factor,
        };
        let base = GammaParams::new(cfg.cause_shape[c], cfg.cause_scale[c])?.sample(&mut rng);
        let hours = base * feeder.factor * line_f * cust_norm(d.customers) * severity * (1.0 + cfg.busy_factor * busy);
        let minutes = ((hours * 60.0).round() as i64).max(1);
        let record = OutageRecord {
            id: i as u64 + 1,
            start: d.start,
            end: d.start + Duration::minutes(minutes),
            feeder: feeder.id,
            line_type: feeder.line,
            cause: d.cause,
            customers: d.customers,
            planned: d.planned,
        };
        if !d.planned && rng.random::<f64>() >= cfg.p_no_logs {
            let dur_h = minutes as f64 / 60.0;
            let p = (0.3 + 0.05 * dur_h).min(0.9);
            let n = 1 + (0..cfg.max_logs - 1).filter(|_| rng.random::<f64>() < p).count();
            let mut fracs: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.975)).collect();
            fracs.sort_by(f64::total_cmp);
            for (j, frac) in fracs.iter().enumerate() {
                let crew = CREWS.choose(&mut rng).unwrap();
                let mut text = if j == 0 {
                    let mut t = format!("{crew} {}", status_phrase(&mut rng, feeder.id));
                    if rng.random::<f64>() < 0.5 {
                        t.push(' ');
                        t.push_str(&location(&mut rng));
                    }
                    if rng.random::<f64>() < cfg.p_severity_hint {
                        if let Some(sev) = severity_phrase(&mut rng, severity, s) {
                            t.push_str(". ");
                            t.push_str(sev);
                        }
                    }
                    t
                } else if rng.random::<f64>() < cfg.p_keyword {
                    format!("{crew} reports {}", keyword_phrase(&mut rng, d.cause))
                } else {
                    format!("{crew} {}", progress_phrase(&mut rng, feeder.id))
                };
                if rng.random::<f64>() < 0.25 {
                    text.push_str(". ");
                    text.push_str(&progress_phrase(&mut rng, feeder.id));
                }
                let secs = (frac * minutes as f64 * 60.0).floor() as i64;
                logs.push(RepairLog {
                    feeder: feeder.id,
                    time: d.start + Duration::seconds(secs),
                    text: capitalize_some(&text, &mut rng),
                });
            }
            if rng.random::<f64>() < cfg.p_closing_log {
                let frac = rng.random_range(0.985..1.0);
                let secs = (frac * minutes as f64 * 60.0).floor() as i64;
                let cl = rng.random_range(10_000..99_999);
                let text = match rng.random_range(0..3) {
                    0 => format!("CL #{cl} all customers restored"),
                    1 => format!("{} closed CL {cl}", CREWS.choose(&mut rng).unwrap()),
                    _ => format!("restored, CL {cl}"),
                };
                logs.push(RepairLog {
                    feeder: feeder.id,
                    time: d.start + Duration::seconds(secs),
                    text,
                });
            }
        }
        outages.push(record);
    }
    logs.sort_by(|a, b| a.time.cmp(&b.time).then(a.feeder.cmp(&b.feeder)));
    Ok(Corpus {
        outages,
        logs,
        weather,
    })
}

/// Field reports are typed inconsistently; upper-case some words.
fn capitalize_some<R: Rng>(text: &str, rng: &mut R) -> String {
    text.split(' ')
        .map(|w| {
            if rng.random::<f64>() < 0.15 {
                w.to_uppercase()
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
