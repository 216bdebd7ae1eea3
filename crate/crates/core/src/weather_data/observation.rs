use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::conditions::normalize_text;
use crate::{Error, Features, Result};

/// One hourly weather record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub city: String,
    pub date: String,
    /// 0..=23
    pub hour: u8,
    /// Degrees Celsius.
    pub temp: f64,
    pub wind: f64,
    /// Fraction in [0, 1].
    pub humidity: f64,
    /// hPa.
    pub barometer: f64,
    /// km.
    pub visibility: f64,
    pub condition: String,
}

impl WeatherObservation {
    /// Model inputs in fixed order: temp, wind, humidity, hour, visibility, barometer.
    pub fn features(&self) -> Features {
        [
            self.temp,
            self.wind,
            self.humidity,
            f64::from(self.hour),
            self.visibility,
            self.barometer,
        ]
    }

    /// Checks the record invariants, returning the name of the first offending field.
    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        if self.hour > 23 {
            return Err("hour");
        }
        if !self.temp.is_finite() {
            return Err("temp");
        }
        if !self.wind.is_finite() || self.wind < 0.0 {
            return Err("wind");
        }
        if !(0.0..=1.0).contains(&self.humidity) {
            return Err("humidity");
        }
        if !self.barometer.is_finite() || self.barometer <= 0.0 {
            return Err("barometer");
        }
        if !self.visibility.is_finite() || self.visibility < 0.0 {
            return Err("visibility");
        }
        if self.condition.trim().is_empty() {
            return Err("weather");
        }
        Ok(())
    }
}

/// Row accounting for [`parse_dataset`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections keyed by the first offending column.
    pub rejected_by_field: BTreeMap<String, usize>,
}

impl ParseReport {
    fn reject(&mut self, field: &str) {
        self.rejected += 1;
        *self.rejected_by_field.entry(field.to_string()).or_default() += 1;
    }
}

const REQUIRED: [&str; 8] = [
    "city",
    "date",
    "temp",
    "wind",
    "humidity",
    "barometer",
    "visibility",
    "weather",
];

struct Columns {
    city: usize,
    date: usize,
    time: Option<usize>,
    hour: Option<usize>,
    temp: usize,
    wind: usize,
    humidity: usize,
    barometer: usize,
    visibility: usize,
    weather: usize,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| {
            headers.iter().position(|h| {
                h.trim()
                    .trim_start_matches('\u{feff}')
                    .eq_ignore_ascii_case(name)
            })
        };
        for name in REQUIRED {
            if find(name).is_none() {
                return Err(Error::MissingColumn(name.to_string()));
            }
        }
        let time = find("time");
        let hour = find("hour");
        if time.is_none() && hour.is_none() {
            return Err(Error::MissingColumn("time".to_string()));
        }
        let get = |name: &str| find(name).expect("checked above");
        Ok(Self {
            city: get("city"),
            date: get("date"),
            time,
            hour,
            temp: get("temp"),
            wind: get("wind"),
            humidity: get("humidity"),
            barometer: get("barometer"),
            visibility: get("visibility"),
            weather: get("weather"),
        })
    }
}

const UNIT_SUFFIXES: [&str; 9] = ["%", "°c", "°", "c", "km/h", "kmh", "km", "mbar", "hpa"];

/// Parses a numeric cell, tolerating a trailing unit ("21 °c", "33%", "16 km").
fn parse_number(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    let end = cell
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.')))
        .map_or(cell.len(), |(i, _)| i);
    let (number, rest) = cell.split_at(end);
    let rest = rest.trim().to_lowercase();
    if !rest.is_empty() && !UNIT_SUFFIXES.contains(&rest.as_str()) {
        return None;
    }
    number.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Humidity arrives either as a fraction (0.33) or a percentage ("33%", 33).
fn parse_humidity(cell: &str) -> Option<f64> {
    let value = parse_number(cell)?;
    if cell.contains('%') || value > 1.0 {
        Some(value / 100.0)
    } else {
        Some(value)
    }
}

fn canonical_hour(h: u32) -> Option<u8> {
    match h {
        0..=23 => Some(h as u8),
        24 => Some(0),
        _ => None,
    }
}

/// Extracts the hour from `HH:MM`, `HH:MM:SS` or `h:MM AM/PM`.
fn parse_time_hour(cell: &str) -> Option<u8> {
    let cell = cell.trim();
    let lower = cell.to_ascii_lowercase();
    let (clock, meridiem) = if let Some(rest) = lower.strip_suffix("am") {
        (rest.trim(), Some(false))
    } else if let Some(rest) = lower.strip_suffix("pm") {
        (rest.trim(), Some(true))
    } else {
        (lower.as_str(), None)
    };
    let mut parts = clock.split(':');
    let hour: u32 = parts.next()?.trim().parse().ok()?;
    let minute: u32 = parts.next()?.trim().parse().ok()?;
    if minute > 59 {
        return None;
    }
    let hour = match meridiem {
        None => hour,
        Some(pm) => {
            if !(1..=12).contains(&hour) {
                return None;
            }
            (hour % 12) + if pm { 12 } else { 0 }
        }
    };
    canonical_hour(hour)
}

fn parse_hour_cell(cell: &str) -> Option<u8> {
    let v = parse_number(cell)?;
    if v.fract() != 0.0 || v < 0.0 {
        return None;
    }
    canonical_hour(v as u32)
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &Columns,
) -> std::result::Result<WeatherObservation, &'static str> {
    let cell = |idx: usize| record.get(idx).map(str::trim).filter(|s| !s.is_empty());

    let city = cell(cols.city).ok_or("city")?.to_string();
    let date = cell(cols.date).ok_or("date")?.to_string();
    let hour = match (cols.time, cols.hour) {
        (Some(t), _) => cell(t).and_then(parse_time_hour).ok_or("time")?,
        (None, Some(h)) => cell(h).and_then(parse_hour_cell).ok_or("hour")?,
        (None, None) => unreachable!("column resolution requires time or hour"),
    };
    let obs = WeatherObservation {
        city,
        date,
        hour,
        temp: cell(cols.temp).and_then(parse_number).ok_or("temp")?,
        wind: cell(cols.wind).and_then(parse_number).ok_or("wind")?,
        humidity: cell(cols.humidity)
            .and_then(parse_humidity)
            .ok_or("humidity")?,
        barometer: cell(cols.barometer)
            .and_then(parse_number)
            .ok_or("barometer")?,
        visibility: cell(cols.visibility)
            .and_then(parse_number)
            .ok_or("visibility")?,
        condition: cell(cols.weather).ok_or("weather")?.to_string(),
    };
    obs.validate()?;
    Ok(obs)
}

/// Parses the raw weather CSV. Malformed rows are dropped and counted; only
/// header problems are fatal.
pub fn parse_dataset<R: Read>(reader: R) -> Result<(Vec<WeatherObservation>, ParseReport)> {
    let (rows, report) = parse_with_extra(reader, &[], |_| Ok(()))?;
    Ok((rows.into_iter().map(|(obs, ())| obs).collect(), report))
}

/// Like [`parse_dataset`], but also requires the `extra` columns and converts
/// their cells with `convert`. A conversion failure rejects the row under the
/// returned column name.
pub(crate) fn parse_with_extra<R, T, F>(
    reader: R,
    extra: &[&str],
    convert: F,
) -> Result<(Vec<(WeatherObservation, T)>, ParseReport)>
where
    R: Read,
    F: Fn(&[&str]) -> std::result::Result<T, &'static str>,
{
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers)?;
    let extra_cols = extra
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for record in rdr.records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                report.reject("record");
                continue;
            }
        };
        let parsed = parse_row(&record, &cols).and_then(|obs| {
            let cells: Vec<&str> = extra_cols
                .iter()
                .map(|&c| record.get(c).map_or("", str::trim))
                .collect();
            convert(&cells).map(|extra| (obs, extra))
        });
        match parsed {
            Ok(row) => {
                report.accepted += 1;
                out.push(row);
            }
            Err(field) => report.reject(field),
        }
    }
    Ok((out, report))
}

/// Keeps observations whose city matches `city` case-insensitively.
pub fn filter_city(observations: &[WeatherObservation], city: &str) -> Vec<WeatherObservation> {
    let wanted = normalize_text(city);
    let kept: Vec<_> = observations
        .iter()
        .filter(|o| normalize_text(&o.city) == wanted)
        .cloned()
        .collect();
    if kept.is_empty() {
        log::warn!("no observations for city `{city}`");
    }
    kept
}
