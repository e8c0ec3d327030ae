//! Trajectory episodes, danger series and block-maxima extraction.
//!
//! Time is kept on an integer grid of ticks (`t = tick * TAU`) so that frame
//! lookups never depend on floating-point equality. The danger measure is the
//! negated minimum remaining distance (MRD): larger values are more dangerous
//! and a crash sits at `0`.

mod geometry;
mod io;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use geometry::{compute_mrd, rectangle_corners, rectangle_gap};
pub use io::{read_trajectory_csv, write_trajectory_csv, TRAJECTORY_CSV_HEADER};

/// Sampling interval of every trajectory, in seconds.
pub const TAU: f64 = 0.1;

pub type VehicleId = u64;

/// Converts a time in seconds to the nearest tick.
pub fn tick_of(t: f64) -> i64 {
    (t / TAU).round() as i64
}

pub fn time_of(tick: i64) -> f64 {
    tick as f64 * TAU
}

/// Converts a duration in seconds to a whole number of ticks, rejecting
/// durations that are not on the grid.
pub fn ticks_in(seconds: f64) -> Result<usize> {
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(Error::InvalidArgument(format!("duration {seconds} s")));
    }
    let n = (seconds / TAU).round();
    if (n * TAU - seconds).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{seconds} s is not a multiple of {TAU} s"
        )));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: VehicleId,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
    pub heading: f64,
    pub lane: u32,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Crash,
    NonCrash,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Crash => "crash",
            Label::NonCrash => "non_crash",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crash" => Ok(Label::Crash),
            "non_crash" => Ok(Label::NonCrash),
            other => Err(Error::Data(format!("unknown label {other:?}"))),
        }
    }
}

/// One labeled episode. Crash episodes are indexed so that the crash moment
/// is `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub sample_id: String,
    pub label: Label,
    pub subject_id: VehicleId,
    pub crash_time: Option<f64>,
    pub frames: BTreeMap<i64, Vec<VehicleState>>,
}

impl TrajectorySample {
    pub fn subject_at(&self, tick: i64) -> Option<&VehicleState> {
        self.frames
            .get(&tick)?
            .iter()
            .find(|v| v.vehicle_id == self.subject_id)
    }

    pub fn first_tick(&self) -> Option<i64> {
        self.frames.keys().next().copied()
    }

    pub fn last_tick(&self) -> Option<i64> {
        self.frames.keys().next_back().copied()
    }
}

/// Neighbor roles, in the node order used by the scene graph (after the
/// subject, which is node 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    LeadLeft,
    LeadSame,
    LeadRight,
    LagLeft,
    LagSame,
    LagRight,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::LeadLeft,
        Role::LeadSame,
        Role::LeadRight,
        Role::LagLeft,
        Role::LagSame,
        Role::LagRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn lane_offset(self) -> i64 {
        match self {
            Role::LeadLeft | Role::LagLeft => -1,
            Role::LeadSame | Role::LagSame => 0,
            Role::LeadRight | Role::LagRight => 1,
        }
    }

    fn is_lead(self) -> bool {
        matches!(self, Role::LeadLeft | Role::LeadSame | Role::LeadRight)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub roles: [Option<VehicleId>; 6],
}

impl NeighborSet {
    pub fn get(&self, role: Role) -> Option<VehicleId> {
        self.roles[role.index()]
    }

    pub fn count(&self) -> usize {
        self.roles.iter().filter(|r| r.is_some()).count()
    }

    pub fn ids(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.roles.iter().flatten().copied()
    }
}

fn find_subject(frame: &[VehicleState], subject_id: VehicleId) -> Result<&VehicleState> {
    frame
        .iter()
        .find(|v| v.vehicle_id == subject_id)
        .ok_or(Error::SubjectMissing)
}

/// Finds the nearest vehicle ahead and behind in the subject's lane and the
/// two adjacent lanes. Lane 1 is the leftmost lane; lane indices below 1 do
/// not exist. A vehicle at exactly the subject's `x` counts as lagging.
pub fn identify_neighbors(frame: &[VehicleState], subject_id: VehicleId) -> Result<NeighborSet> {
    let subject = find_subject(frame, subject_id)?;
    let mut best: [Option<(f64, VehicleId)>; 6] = [None; 6];
    for v in frame.iter().filter(|v| v.vehicle_id != subject_id) {
        let offset = v.lane as i64 - subject.lane as i64;
        if !(-1..=1).contains(&offset) {
            continue;
        }
        let dx = v.x - subject.x;
        let role = Role::ALL
            .into_iter()
            .find(|r| r.lane_offset() == offset && r.is_lead() == (dx > 0.0))
            .expect("every offset/direction pair has a role");
        let cand = (dx.abs(), v.vehicle_id);
        let slot = &mut best[role.index()];
        let better = match slot {
            None => true,
            Some((d, id)) => cand.0 < *d || (cand.0 == *d && cand.1 < *id),
        };
        if better {
            *slot = Some(cand);
        }
    }
    let mut set = NeighborSet::default();
    for (slot, b) in set.roles.iter_mut().zip(best) {
        *slot = b.map(|(_, id)| id);
    }
    Ok(set)
}

/// MRD between the subject and its identified neighbors in one frame.
pub fn frame_mrd(frame: &[VehicleState], subject_id: VehicleId) -> Result<Option<f64>> {
    let subject = find_subject(frame, subject_id)?;
    let neighbors = identify_neighbors(frame, subject_id)?;
    let states: Vec<&VehicleState> = neighbors
        .ids()
        .filter_map(|id| frame.iter().find(|v| v.vehicle_id == id))
        .collect();
    Ok(compute_mrd(subject, &states))
}

/// A contiguous span of the tick grid: `len + 1` frames starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub len: usize,
}

impl Window {
    /// `[-T, 0]`, the pre-crash window of a crash episode.
    pub fn crash(lead_time: f64) -> Result<Self> {
        let len = ticks_in(lead_time)?;
        Ok(Self {
            start: -(len as i64),
            len,
        })
    }

    pub fn starting_at(t0: f64, span: f64) -> Result<Self> {
        Ok(Self {
            start: tick_of(t0),
            len: ticks_in(span)?,
        })
    }

    pub fn ticks(&self) -> impl Iterator<Item = i64> {
        self.start..=self.start + self.len as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DangerPoint {
    pub tick: i64,
    /// `-MRD`, or `-inf` when the subject has no neighbor.
    pub value: f64,
}

impl DangerPoint {
    pub fn t(&self) -> f64 {
        time_of(self.tick)
    }
}

/// The negated-MRD series over a window, one value per frame.
pub fn danger_series(sample: &TrajectorySample, window: Window) -> Result<Vec<DangerPoint>> {
    window
        .ticks()
        .map(|tick| {
            let frame = sample
                .frames
                .get(&tick)
                .ok_or(Error::WindowNotCovered(time_of(tick)))?;
            let value = match frame_mrd(frame, sample.subject_id)? {
                Some(mrd) => -mrd,
                None => f64::NEG_INFINITY,
            };
            Ok(DangerPoint { tick, value })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMax {
    pub block_index: usize,
    pub tick: i64,
    pub value: f64,
}

/// Number of samples per block for a block size in seconds (at least two).
pub fn block_len(w: f64) -> Result<usize> {
    let n = ticks_in(w)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "block size {w} s holds fewer than two samples"
        )));
    }
    Ok(n)
}

/// Maximum of each consecutive, non-overlapping block of `len` samples.
///
/// Ties go to the earliest frame. The trailing partial block is dropped, as is
/// any block whose frames all lack neighbors.
pub fn block_maxima(series: &[DangerPoint], len: usize) -> Vec<BlockMax> {
    if len == 0 {
        return Vec::new();
    }
    series
        .chunks_exact(len)
        .enumerate()
        .filter_map(|(block_index, block)| {
            let mut best = block[0];
            for p in &block[1..] {
                if p.value > best.value {
                    best = *p;
                }
            }
            (best.value != f64::NEG_INFINITY).then_some(BlockMax {
                block_index,
                tick: best.tick,
                value: best.value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEvent {
    pub sample_id: String,
    pub t: f64,
    pub z: f64,
    pub block_index: usize,
}

impl ExtremeEvent {
    pub fn tick(&self) -> i64 {
        tick_of(self.t)
    }
}

/// Keeps block maxima with `z > -q` (MRD below `q`) and pools them across
/// samples, in input order.
pub fn filter_and_pool<'a, I>(per_sample: I, q: f64) -> Vec<ExtremeEvent>
where
    I: IntoIterator<Item = (&'a str, &'a [BlockMax])>,
{
    per_sample
        .into_iter()
        .flat_map(|(sample_id, maxima)| {
            maxima.iter().filter(move |m| m.value > -q).map(move |m| ExtremeEvent {
                sample_id: sample_id.to_string(),
                t: time_of(m.tick),
                z: m.value,
                block_index: m.block_index,
            })
        })
        .collect()
}

/// Runs the whole extraction for one sample: danger series over `window`,
/// block maxima of `block` samples, threshold `q`.
pub fn extract_events(
    sample: &TrajectorySample,
    window: Window,
    block: usize,
    q: f64,
) -> Result<Vec<ExtremeEvent>> {
    let series = danger_series(sample, window)?;
    let maxima = block_maxima(&series, block);
    Ok(filter_and_pool([(sample.sample_id.as_str(), maxima.as_slice())], q))
}
