//! Dome controller: model prediction plus live sensors in, actuator signals out.
//!
//! Per frame the order is sense, predict, gate, override, actuate. The rain
//! sensor always wins, an unrecognised weather description closes the dome,
//! the temperature gate is re-checked, and only then does the model decide.
//! The air conditioner runs exactly when the dome is closed.

use std::io::{Read, Write};
use std::sync::mpsc::Receiver;

use serde::{Deserialize, Serialize};

use crate::model::Classifier;
use crate::weather_data::{
    condition_flag, parse_with_extra, ConditionTable, ParseReport, TemperatureGate,
    WeatherObservation,
};
use crate::{DomeState, Error, Features, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum AcState {
    Off = 0,
    On = 1,
}

impl From<AcState> for u8 {
    fn from(a: AcState) -> u8 {
        a as u8
    }
}

impl TryFrom<u8> for AcState {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(AcState::Off),
            1 => Ok(AcState::On),
            other => Err(format!("ac state must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Model,
    RainOverride,
    TempGate,
    UnmappedCondition,
}

/// A dome/AC command. The AC state is derived from the dome state, so a
/// command with both open and AC on cannot be built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomeCommand {
    dome: DomeState,
    cause: Cause,
}

impl DomeCommand {
    pub fn new(dome: DomeState, cause: Cause) -> Self {
        Self { dome, cause }
    }

    pub fn close(cause: Cause) -> Self {
        Self::new(DomeState::Close, cause)
    }

    pub fn dome(&self) -> DomeState {
        self.dome
    }

    pub fn ac(&self) -> AcState {
        match self.dome {
            DomeState::Open => AcState::Off,
            DomeState::Close => AcState::On,
        }
    }

    pub fn cause(&self) -> Cause {
        self.cause
    }

    pub fn signal(&self) -> ActuatorSignal {
        ActuatorSignal { dome: self.dome }
    }
}

/// What actually goes over the wire: `D:<0|1> A:<0|1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActuatorSignal {
    dome: DomeState,
}

impl ActuatorSignal {
    pub fn dome(&self) -> DomeState {
        self.dome
    }

    pub fn ac(&self) -> AcState {
        DomeCommand::new(self.dome, Cause::Model).ac()
    }

    pub fn to_line(&self) -> String {
        format!("D:{} A:{}\n", self.dome.as_u8(), u8::from(self.ac()))
    }

    /// Parses one protocol line (trailing newline optional). Lines that
    /// violate the AC interlock are rejected.
    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::BadSignal(line.to_string());
        let body = line.strip_suffix('\n').unwrap_or(line);
        let dome = match body {
            "D:1 A:0" => DomeState::Open,
            "D:0 A:1" => DomeState::Close,
            _ => return Err(bad()),
        };
        Ok(Self { dome })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub observation: WeatherObservation,
    pub rain_detected: bool,
    pub tick: u64,
}

/// Decision from raw readings, for callers without a full observation.
pub fn decide_reading(
    prediction: DomeState,
    temp: f64,
    rain_detected: bool,
    gate: &TemperatureGate,
) -> DomeCommand {
    if rain_detected {
        DomeCommand::close(Cause::RainOverride)
    } else if !gate.allows_open(temp) {
        DomeCommand::close(Cause::TempGate)
    } else {
        DomeCommand::new(prediction, Cause::Model)
    }
}

pub fn decide(prediction: DomeState, frame: &SensorFrame, gate: &TemperatureGate) -> DomeCommand {
    decide_reading(
        prediction,
        frame.observation.temp,
        frame.rain_detected,
        gate,
    )
}

/// Delivery receipt from [`emit_signal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub bytes: usize,
}

/// Writes and flushes one protocol line for `command`.
pub fn emit_signal<W: Write + ?Sized>(command: &DomeCommand, sink: &mut W) -> Result<Ack> {
    let line = command.signal().to_line();
    sink.write_all(line.as_bytes()).map_err(Error::Sink)?;
    sink.flush().map_err(Error::Sink)?;
    Ok(Ack { bytes: line.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionEntry {
    pub frame: SensorFrame,
    pub command: DomeCommand,
    /// `None` when the frame could not be featurized.
    pub prediction: Option<DomeState>,
}

/// One JSON-lines record of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub tick: u64,
    pub features: Features,
    pub prediction: Option<DomeState>,
    pub dome: DomeState,
    pub ac: AcState,
    pub cause: Cause,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionLog {
    pub entries: Vec<DecisionEntry>,
}

impl DecisionLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn commands(&self) -> impl Iterator<Item = &DomeCommand> {
        self.entries.iter().map(|e| &e.command)
    }

    pub fn extend(&mut self, other: DecisionLog) {
        self.entries.extend(other.entries);
    }

    pub fn records(&self) -> impl Iterator<Item = DecisionRecord> + '_ {
        self.entries.iter().map(|e| DecisionRecord {
            tick: e.frame.tick,
            features: e.frame.observation.features(),
            prediction: e.prediction,
            dome: e.command.dome(),
            ac: e.command.ac(),
            cause: e.command.cause(),
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for record in self.records() {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Everything needed to turn a frame into a command.
pub struct DecisionPolicy<'a, M: Classifier + ?Sized> {
    pub model: &'a M,
    pub table: &'a ConditionTable,
    pub gate: TemperatureGate,
}

impl<M: Classifier + ?Sized> DecisionPolicy<'_, M> {
    pub fn evaluate(&self, frame: &SensorFrame) -> Result<DecisionEntry> {
        let known = condition_flag(&frame.observation.condition, self.table).is_ok();
        let prediction = if known {
            Some(self.model.predict(&frame.observation.features())?)
        } else {
            None
        };
        let command = match prediction {
            _ if frame.rain_detected => DomeCommand::close(Cause::RainOverride),
            None => DomeCommand::close(Cause::UnmappedCondition),
            Some(p) => decide(p, frame, &self.gate),
        };
        if !known {
            log::warn!(
                "tick {}: unmapped condition `{}`, closing",
                frame.tick,
                frame.observation.condition
            );
        }
        Ok(DecisionEntry {
            frame: frame.clone(),
            command,
            prediction,
        })
    }
}

fn check_tick(previous: Option<u64>, tick: u64) -> Result<()> {
    match previous {
        Some(prev) if tick <= prev => Err(Error::NonMonotonicTick {
            previous: prev,
            got: tick,
        }),
        _ => Ok(()),
    }
}

/// Offline run of the decision loop over recorded frames. Pure: no sink.
pub fn replay<M: Classifier + ?Sized>(
    policy: &DecisionPolicy<'_, M>,
    frames: &[SensorFrame],
) -> Result<DecisionLog> {
    let mut log = DecisionLog::default();
    let mut previous = None;
    for frame in frames {
        check_tick(previous, frame.tick)?;
        previous = Some(frame.tick);
        log.entries.push(policy.evaluate(frame)?);
    }
    Ok(log)
}

/// Single-writer controller that decides and actuates frame by frame.
pub struct DomeController<'a, M: Classifier + ?Sized, W: Write> {
    policy: DecisionPolicy<'a, M>,
    sink: W,
    last_tick: Option<u64>,
    last_delivered: Option<DomeCommand>,
}

impl<'a, M: Classifier + ?Sized, W: Write> DomeController<'a, M, W> {
    pub fn new(policy: DecisionPolicy<'a, M>, sink: W) -> Self {
        Self {
            policy,
            sink,
            last_tick: None,
            last_delivered: None,
        }
    }

    pub fn last_delivered(&self) -> Option<&DomeCommand> {
        self.last_delivered.as_ref()
    }

    pub fn into_sink(self) -> W {
        self.sink
    }

    /// Decides one frame and sends the signal. On a sink failure the error
    /// is returned and the controller state is left untouched, so the next
    /// frame simply tries again.
    pub fn step(&mut self, frame: &SensorFrame) -> Result<DecisionEntry> {
        check_tick(self.last_tick, frame.tick)?;
        let entry = self.policy.evaluate(frame)?;
        emit_signal(&entry.command, &mut self.sink)?;
        self.last_tick = Some(frame.tick);
        self.last_delivered = Some(entry.command);
        Ok(entry)
    }

    /// Consumes frames from a producer queue until it closes. Frames whose
    /// signal could not be delivered are still logged; the count of failed
    /// deliveries is returned alongside the log.
    pub fn run_queue(&mut self, frames: Receiver<SensorFrame>) -> Result<(DecisionLog, usize)> {
        let mut log = DecisionLog::default();
        let mut failed = 0;
        for frame in frames {
            match self.step(&frame) {
                Ok(entry) => log.entries.push(entry),
                Err(e) if e.is_retriable() => {
                    log::warn!("tick {}: {e}", frame.tick);
                    failed += 1;
                    log.entries.push(self.policy.evaluate(&frame)?);
                }
                Err(e) => return Err(e),
            }
        }
        Ok((log, failed))
    }
}

fn parse_rain(cell: &str) -> Option<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "0" | "false" | "no" => Some(false),
        "1" | "true" | "yes" => Some(true),
        _ => None,
    }
}

/// Reads replay frames: the raw weather schema plus a `rain` column.
/// Ticks are assigned from accepted-row order.
pub fn read_frames<R: Read>(reader: R) -> Result<(Vec<SensorFrame>, ParseReport)> {
    let (rows, report) = parse_with_extra(reader, &["rain"], |cells| {
        parse_rain(cells[0]).ok_or("rain")
    })?;
    let frames = rows
        .into_iter()
        .enumerate()
        .map(|(i, (observation, rain_detected))| SensorFrame {
            observation,
            rain_detected,
            tick: i as u64,
        })
        .collect();
    Ok((frames, report))
}
