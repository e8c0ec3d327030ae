//! Trajectory CSV: one row per vehicle per frame.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{tick_of, Label, TrajectorySample, VehicleState};
use crate::error::{Error, Result};

pub const TRAJECTORY_CSV_HEADER: [&str; 13] = [
    "sample_id",
    "label",
    "subject_id",
    "t",
    "vehicle_id",
    "x",
    "y",
    "speed",
    "accel",
    "heading",
    "lane",
    "length",
    "width",
];

fn num(x: f64) -> String {
    // Six decimals keeps files compact and byte-stable across runs.
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn write_trajectory_csv<W: Write>(out: W, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_CSV_HEADER)?;
    for s in samples {
        for (tick, frame) in &s.frames {
            let mut vs: Vec<&VehicleState> = frame.iter().collect();
            vs.sort_by_key(|v| v.vehicle_id);
            for v in vs {
                w.write_record([
                    s.sample_id.clone(),
                    s.label.as_str().to_string(),
                    s.subject_id.to_string(),
                    format!("{:.1}", *tick as f64 * super::TAU),
                    v.vehicle_id.to_string(),
                    num(v.x),
                    num(v.y),
                    num(v.speed),
                    num(v.accel),
                    num(v.heading),
                    v.lane.to_string(),
                    num(v.length),
                    num(v.width),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, name: &str, line: u64) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: bad {name} {field:?}")))
}

/// Reads samples in order of first appearance. Crash samples get
/// `crash_time = Some(0.0)`.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectorySample>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_CSV_HEADER {
        return Err(Error::Data(format!("unexpected header {header:?}")));
    }
    let mut order: Vec<String> = Vec::new();
    let mut samples: BTreeMap<String, TrajectorySample> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != TRAJECTORY_CSV_HEADER.len() {
            return Err(Error::Data(format!("line {line}: expected 13 fields")));
        }
        let sample_id = rec[0].to_string();
        let label: Label = rec[1].trim().parse()?;
        let subject_id = parse(&rec[2], "subject_id", line)?;
        let t: f64 = parse(&rec[3], "t", line)?;
        let v = VehicleState {
            vehicle_id: parse(&rec[4], "vehicle_id", line)?,
            t,
            x: parse(&rec[5], "x", line)?,
            y: parse(&rec[6], "y", line)?,
            speed: parse(&rec[7], "speed", line)?,
            accel: parse(&rec[8], "accel", line)?,
            heading: parse(&rec[9], "heading", line)?,
            lane: parse(&rec[10], "lane", line)?,
            length: parse(&rec[11], "length", line)?,
            width: parse(&rec[12], "width", line)?,
        };
        if v.speed < 0.0 || v.length <= 0.0 || v.width <= 0.0 {
            return Err(Error::Data(format!("line {line}: invalid vehicle state")));
        }
        let entry = samples.entry(sample_id.clone()).or_insert_with(|| {
            order.push(sample_id.clone());
            TrajectorySample {
                sample_id: sample_id.clone(),
                label,
                subject_id,
                crash_time: (label == Label::Crash).then_some(0.0),
                frames: BTreeMap::new(),
            }
        });
        if entry.label != label || entry.subject_id != subject_id {
            return Err(Error::Data(format!(
                "line {line}: sample {sample_id} changes label or subject"
            )));
        }
        entry.frames.entry(tick_of(t)).or_default().push(v);
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let s = samples.remove(&id).expect("recorded id");
        let ticks: Vec<i64> = s.frames.keys().copied().collect();
        if ticks.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Data(format!("sample {id}: frame grid has gaps")));
        }
        if s.frames.values().any(|f| f.iter().all(|v| v.vehicle_id != s.subject_id)) {
            return Err(Error::Data(format!("sample {id}: subject missing from a frame")));
        }
        out.push(s);
    }
    Ok(out)
}
