use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::conditions::{condition_flag, ConditionTable};
use super::observation::WeatherObservation;
use crate::{DomeState, Error, Features, Result, FEATURE_NAMES};

/// Open interval of comfortable outside temperatures. Both bounds close the dome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureGate {
    pub lower: f64,
    pub upper: f64,
}

impl TemperatureGate {
    pub const DEFAULT: TemperatureGate = TemperatureGate {
        lower: 16.0,
        upper: 27.0,
    };

    pub fn allows_open(&self, temp: f64) -> bool {
        self.lower < temp && temp < self.upper
    }
}

impl Default for TemperatureGate {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Dome label: open only when the weather permits it and the temperature is
/// strictly inside (16, 27) °C.
pub fn derive_state(flag: DomeState, temp: f64) -> DomeState {
    derive_state_with(flag, temp, &TemperatureGate::DEFAULT)
}

pub fn derive_state_with(flag: DomeState, temp: f64, gate: &TemperatureGate) -> DomeState {
    DomeState::from_bool(flag.is_open() && gate.allows_open(temp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Features,
    pub label: DomeState,
}

impl LabeledSample {
    pub fn new(features: Features, label: DomeState) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelReport {
    pub labeled: usize,
    pub unmapped: usize,
    pub unmapped_conditions: BTreeMap<String, usize>,
    pub open: usize,
}

pub fn to_samples(
    observations: &[WeatherObservation],
    table: &ConditionTable,
) -> (Vec<LabeledSample>, LabelReport) {
    to_samples_with_gate(observations, table, &TemperatureGate::DEFAULT)
}

/// Labels observations. Rows whose condition is not in `table` are dropped
/// and tallied in the report.
pub fn to_samples_with_gate(
    observations: &[WeatherObservation],
    table: &ConditionTable,
    gate: &TemperatureGate,
) -> (Vec<LabeledSample>, LabelReport) {
    let mut report = LabelReport::default();
    let mut samples = Vec::with_capacity(observations.len());
    for obs in observations {
        match condition_flag(&obs.condition, table) {
            Ok(flag) => {
                let label = derive_state_with(flag, obs.temp, gate);
                if label.is_open() {
                    report.open += 1;
                }
                samples.push(LabeledSample::new(obs.features(), label));
            }
            Err(_) => {
                report.unmapped += 1;
                *report
                    .unmapped_conditions
                    .entry(obs.condition.trim().to_string())
                    .or_default() += 1;
            }
        }
    }
    report.labeled = samples.len();
    (samples, report)
}

/// Writes `temp,wind,humidity,hour,visibility,barometer,state`.
pub fn write_labeled_csv<W: Write>(writer: W, samples: &[LabeledSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push("state");
    wtr.write_record(&header)?;
    for s in samples {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(s.label.as_u8().to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the labeled layout produced by [`write_labeled_csv`]. Strict: any bad
/// row is an error.
pub fn read_labeled_csv<R: Read>(reader: R) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let mut feature_cols = [0usize; FEATURE_NAMES.len()];
    for (slot, name) in feature_cols.iter_mut().zip(FEATURE_NAMES) {
        *slot = find(name)?;
    }
    let state_col = find("state")?;

    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let bad =
            |what: &str| Error::InvalidConfig(format!("labeled data row {}: bad {what}", row + 1));
        let mut features = [0.0; FEATURE_NAMES.len()];
        for (i, &col) in feature_cols.iter().enumerate() {
            features[i] = record
                .get(col)
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(FEATURE_NAMES[i]))?;
        }
        let label = match record.get(state_col) {
            Some("0") => DomeState::Close,
            Some("1") => DomeState::Open,
            _ => return Err(bad("state")),
        };
        out.push(LabeledSample::new(features, label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use DomeState::{Close, Open};

    fn obs(condition: &str, temp: f64) -> WeatherObservation {
        WeatherObservation {
            city: "Al Madina".into(),
            date: "2017-01-01".into(),
            hour: 0,
            temp,
            wind: 0.0,
            humidity: 0.33,
            barometer: 1020.0,
            visibility: 16.0,
            condition: condition.into(),
        }
    }

    #[test]
    fn derive_state_examples() {
        assert_eq!(derive_state(Open, 21.0), Open);
        assert_eq!(derive_state(Open, 30.0), Close);
        assert_eq!(derive_state(Close, 20.0), Close);
        assert_eq!(derive_state(Open, 16.0), Close);
        assert_eq!(derive_state(Open, 27.0), Close);
        assert_eq!(derive_state(Open, 16.5), Open);
    }

    #[test]
    fn derive_state_sweep() {
        for step in 0..=120 {
            let t = -10.0 + 0.5 * step as f64;
            let inside = t > 16.0 && t < 27.0;
            assert_eq!(derive_state(Open, t), DomeState::from_bool(inside), "t={t}");
            assert_eq!(derive_state(Close, t), Close, "t={t}");
        }
    }

    #[test]
    fn configurable_gate() {
        let gate = TemperatureGate {
            lower: 10.0,
            upper: 20.0,
        };
        assert_eq!(derive_state_with(Open, 15.0, &gate), Open);
        assert_eq!(derive_state_with(Open, 21.0, &gate), Close);
    }

    #[test]
    fn samples_from_observations() {
        let table = ConditionTable::builtin();
        let input = vec![
            obs("Clear", 21.0),
            obs("Sandstorm", 20.0),
            obs("Tornado", 20.0),
        ];
        let (samples, report) = to_samples(&input, &table);
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].features, [21.0, 0.0, 0.33, 0.0, 16.0, 1020.0]);
        assert_eq!(samples[0].label, Open);
        assert_eq!(samples[1].label, Close);
        assert_eq!(report.unmapped, 1);
        assert_eq!(report.unmapped_conditions["Tornado"], 1);
        assert_eq!(samples.len() + report.unmapped, input.len());

        let (empty, report) = to_samples(&[], &table);
        assert!(empty.is_empty());
        assert_eq!(report, LabelReport::default());
    }

    #[test]
    fn labeled_csv_layout() {
        let samples = vec![LabeledSample::new(
            [21.0, 0.0, 0.33, 0.0, 16.0, 1020.0],
            Open,
        )];
        let mut buf = Vec::new();
        write_labeled_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "temp,wind,humidity,hour,visibility,barometer,state\n21,0,0.33,0,16,1020,1\n"
        );
        assert_eq!(read_labeled_csv(buf.as_slice()).unwrap(), samples);
    }

    #[test]
    fn labeled_csv_rejects_bad_state() {
        let text = "temp,wind,humidity,hour,visibility,barometer,state\n21,0,0.33,0,16,1020,2\n";
        assert!(read_labeled_csv(text.as_bytes()).is_err());
    }
}
