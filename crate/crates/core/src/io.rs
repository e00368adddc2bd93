//! Trace and impulse-log files.
//!
//! Traces are long-format tables `time,signal,left,right`, one row per
//! signal per committed step; impulse logs are `time,signal,order,coefficient`.
//! Reals are written with 17 significant digits so files read back exactly.
//! The JSON variants are arrays of objects with the same fields.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ImpulseEvent, Trace};

pub const TRACE_HEADER: [&str; 4] = ["time", "signal", "left", "right"];
pub const IMPULSE_HEADER: [&str; 4] = ["time", "signal", "order", "coefficient"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    time: f64,
    signal: String,
    left: f64,
    right: f64,
}

/// 17 significant digits; negative zero is written as zero.
pub fn real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

fn rows(trace: &Trace) -> Vec<Row> {
    let mut out = Vec::with_capacity(trace.len() * trace.signals.len());
    for (step, &time) in trace.times.iter().enumerate() {
        for (k, name) in trace.signals.iter().enumerate() {
            let s = &trace.samples[k][step];
            out.push(Row {
                time,
                signal: name.clone(),
                left: s.left,
                right: s.right,
            });
        }
    }
    out
}

pub fn write_trace<W: Write>(trace: &Trace, format: Format, out: W) -> Result<(), IoError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TRACE_HEADER)?;
            for r in rows(trace) {
                w.write_record([real(r.time), r.signal, real(r.left), real(r.right)])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer(&mut out, &rows(trace))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_impulses<W: Write>(
    events: &[ImpulseEvent],
    format: Format,
    out: W,
) -> Result<(), IoError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(IMPULSE_HEADER)?;
            for e in events {
                w.write_record([
                    real(e.time),
                    e.signal.clone(),
                    e.order.to_string(),
                    real(e.coefficient),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer(&mut out, events)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('[')
}

fn read_csv<T: for<'de> Deserialize<'de>>(
    text: &str,
    header: [&str; 4],
) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(IoError::Format(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.join(",")
        )));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Reads an impulse log in either format.
pub fn read_impulses<R: Read>(mut input: R) -> Result<Vec<ImpulseEvent>, IoError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if is_json(&text) {
        Ok(serde_json::from_str(&text)?)
    } else {
        read_csv(&text, IMPULSE_HEADER)
    }
}

/// Reads a trace in either format and attaches `impulses` to it.
pub fn read_trace<R: Read>(mut input: R, impulses: Vec<ImpulseEvent>) -> Result<Trace, IoError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let rows: Vec<Row> = if is_json(&text) {
        serde_json::from_str(&text)?
    } else {
        read_csv(&text, TRACE_HEADER)?
    };

    let mut signals: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for r in &rows {
        if !index.contains_key(&r.signal) {
            index.insert(r.signal.clone(), signals.len());
            signals.push(r.signal.clone());
        }
    }
    let n = signals.len();
    if n == 0 {
        return Ok(Trace::new(Vec::new()));
    }
    if !rows.len().is_multiple_of(n) {
        return Err(IoError::Format(
            "every step must list every signal once".into(),
        ));
    }
    let mut times = Vec::with_capacity(rows.len() / n);
    let mut limits = vec![Vec::with_capacity(rows.len() / n); n];
    for (step, chunk) in rows.chunks(n).enumerate() {
        let t = chunk[0].time;
        if times.last().is_some_and(|&p| p >= t) {
            return Err(IoError::Format(format!(
                "time {t} at step {step} is not increasing"
            )));
        }
        let mut seen = vec![false; n];
        for r in chunk {
            let k = index[&r.signal];
            if r.time != t || seen[k] {
                return Err(IoError::Format(format!(
                    "step {step} (t={t}) is malformed at signal `{}`",
                    r.signal
                )));
            }
            seen[k] = true;
            limits[k].push((r.left, r.right));
        }
        times.push(t);
    }
    Trace::from_parts(signals, times, limits, impulses).map_err(IoError::Format)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrow {
    pub t: f64,
    pub order: u32,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalPlot {
    pub signal: String,
    /// Polylines of `[t, value]` points, broken at every jump.
    pub segments: Vec<Vec<[f64; 2]>>,
    pub arrows: Vec<Arrow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub signals: Vec<SignalPlot>,
}

/// Continuous pieces and impulse arrows of every signal. A jump ends the
/// current polyline at the left limit and starts the next at the right
/// limit.
pub fn plot_data(trace: &Trace) -> PlotData {
    let signals = trace
        .signals
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut segments = Vec::new();
            let mut current: Vec<[f64; 2]> = Vec::new();
            let mut arrows = Vec::new();
            for (step, s) in trace.samples[k].iter().enumerate() {
                let t = trace.times[step];
                current.push([t, s.left]);
                if s.is_discontinuous() {
                    segments.push(std::mem::take(&mut current));
                    current.push([t, s.right]);
                }
                for (order, coefficient) in s.impulses.iter() {
                    arrows.push(Arrow {
                        t,
                        order,
                        coefficient,
                    });
                }
            }
            if !current.is_empty() {
                segments.push(current);
            }
            SignalPlot {
                signal: name.clone(),
                segments,
                arrows,
            }
        })
        .collect();
    PlotData { signals }
}
