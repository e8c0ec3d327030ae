//! Seeded synthetic traffic episodes.
//!
//! A small microsimulation around one subject vehicle on a straight
//! multi-lane segment. Longitudinal motion follows the intelligent driver
//! model with acceleration noise; lane changes follow a half-cosine lateral
//! profile. Crashes are injected in two ways:
//!
//! * rear-end: the subject's leader brakes hard while the subject is
//!   inattentive, then the subject brakes too late;
//! * sideswipe: the subject (or the adjacent vehicle) changes lanes into an
//!   occupied gap.
//!
//! Each scene is drawn from either a dense (slow, short headway) or a sparse
//! (fast, long headway) regime so that the pooled data are heterogeneous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{
    frame_mrd, rectangle_gap, ticks_in, time_of, Label, TrajectorySample, VehicleId, VehicleState, TAU,
};

/// Hard bound on |acceleration| in the simulator, m/s².
pub const A_MAX: f64 = 9.0;

const SUBJECT_ID: VehicleId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..self.max)
        } else {
            self.min
        }
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min <= self.max
    }
}

/// Relative weights of the two crash types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashMix {
    pub rear_end: f64,
    pub sideswipe: f64,
}

impl Default for CrashMix {
    fn default() -> Self {
        // roughly the 15 : 55 split of the field data
        Self {
            rear_end: 0.3,
            sideswipe: 0.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub speed: Range,
    /// Desired time headway, s.
    pub headway: Range,
    /// Vehicles per lane ahead of and behind the subject.
    pub vehicles_per_side: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub lanes: u32,
    pub lane_width: f64,
    pub segment_length: f64,
    pub n_crash: usize,
    pub n_noncrash: usize,
    pub crash_mix: CrashMix,
    /// Probability that a scene uses the dense regime.
    pub dense_fraction: f64,
    pub dense: Regime,
    pub sparse: Regime,
    /// Probability that a non-crash subject attempts a (safe) lane change.
    pub lane_change_rate: f64,
    pub lane_change_duration: Range,
    /// Recorded history before each crash, s.
    pub pre_crash: f64,
    /// Recorded length of each non-crash episode, s.
    pub noncrash_duration: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.5,
            segment_length: 400.0,
            n_crash: 40,
            n_noncrash: 200,
            crash_mix: CrashMix::default(),
            dense_fraction: 0.5,
            dense: Regime {
                speed: Range::new(6.0, 14.0),
                headway: Range::new(0.8, 1.4),
                vehicles_per_side: Range::new(2.0, 4.0),
            },
            sparse: Regime {
                speed: Range::new(20.0, 28.0),
                headway: Range::new(1.6, 2.8),
                vehicles_per_side: Range::new(1.0, 3.0),
            },
            lane_change_rate: 0.4,
            lane_change_duration: Range::new(2.5, 4.5),
            pre_crash: 6.0,
            noncrash_duration: 5.0,
            max_attempts: 200,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.lanes < 2 {
            return bad("at least two lanes are required");
        }
        if !(self.lane_width > 2.0) || !(self.segment_length > 100.0) {
            return bad("lane width must exceed 2 m and the segment 100 m");
        }
        let mix = &self.crash_mix;
        if !(mix.rear_end >= 0.0 && mix.sideswipe >= 0.0 && mix.rear_end + mix.sideswipe > 0.0) {
            return bad("crash mix weights must be nonnegative with a positive sum");
        }
        if !(0.0..=1.0).contains(&self.dense_fraction) || !(0.0..=1.0).contains(&self.lane_change_rate) {
            return bad("fractions must lie in [0, 1]");
        }
        for regime in [&self.dense, &self.sparse] {
            if !(regime.speed.is_valid() && regime.headway.is_valid() && regime.vehicles_per_side.is_valid())
                || regime.speed.min <= 0.0
                || regime.headway.min <= 0.0
                || regime.vehicles_per_side.min < 0.0
            {
                return bad("invalid regime ranges");
            }
        }
        if !self.lane_change_duration.is_valid() || self.lane_change_duration.min < 1.0 {
            return bad("lane changes must last at least 1 s");
        }
        ticks_in(self.pre_crash)?;
        ticks_in(self.noncrash_duration)?;
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CrashKind {
    RearEnd,
    Sideswipe,
}

#[derive(Debug, Clone, Copy)]
struct LaneChange {
    from_y: f64,
    to_y: f64,
    start: f64,
    duration: f64,
}

impl LaneChange {
    fn progress(&self, t: f64) -> f64 {
        ((t - self.start) / self.duration).clamp(0.0, 1.0)
    }

    fn y(&self, t: f64) -> f64 {
        let u = self.progress(t);
        self.from_y + (self.to_y - self.from_y) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
    }

    fn vy(&self, t: f64) -> f64 {
        let u = self.progress(t);
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        (self.to_y - self.from_y) * 0.5 * std::f64::consts::PI / self.duration * (std::f64::consts::PI * u).sin()
    }
}

#[derive(Debug, Clone, Copy)]
enum Control {
    Idm,
    /// Holds speed (no reaction to the leader) until the given time, then brakes.
    Inattentive { until: f64, brake: f64 },
    /// Brakes at a fixed rate until stopped or the given time.
    Brake { decel: f64, until: f64 },
}

#[derive(Debug, Clone)]
struct Agent {
    id: VehicleId,
    length: f64,
    width: f64,
    x: f64,
    y: f64,
    v: f64,
    a: f64,
    v0: f64,
    headway: f64,
    control: Control,
    lane_change: Option<LaneChange>,
    /// Ignores vehicles in the target lane while changing lanes.
    reckless: bool,
    /// Lane-keeping wander: amplitude (m), angular frequency (rad/s), phase.
    wander: (f64, f64, f64),
    /// Lateral position without wander.
    base_y: f64,
}

impl Agent {
    fn wander_y(&self, t: f64) -> f64 {
        let (amp, omega, phase) = self.wander;
        amp * (omega * t + phase).sin()
    }

    fn wander_vy(&self, t: f64) -> f64 {
        let (amp, omega, phase) = self.wander;
        amp * omega * (omega * t + phase).cos()
    }
}

struct Sim<'a> {
    cfg: &'a SynthConfig,
    agents: Vec<Agent>,
    t: f64,
    noise: Normal<f64>,
}

const IDM_A: f64 = 1.5;
const IDM_B: f64 = 2.0;
const IDM_S0: f64 = 2.0;

impl<'a> Sim<'a> {
    fn lane_of(&self, y: f64) -> u32 {
        ((y / self.cfg.lane_width).floor() as i64 + 1).clamp(1, self.cfg.lanes as i64) as u32
    }

    fn lane_center(&self, lane: u32) -> f64 {
        (lane as f64 - 0.5) * self.cfg.lane_width
    }

    /// Nearest vehicle ahead whose footprint shares the agent's lateral corridor.
    fn leader(&self, i: usize) -> Option<(f64, f64)> {
        let me = &self.agents[i];
        let corridor = 0.5 * (me.width + 2.2);
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && o.x > me.x && (o.y - me.y).abs() < corridor)
            .map(|(_, o)| (o.x - me.x - 0.5 * (o.length + me.length), o.v))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    fn idm(&self, i: usize) -> f64 {
        let me = &self.agents[i];
        let free = 1.0 - (me.v / me.v0).powi(4);
        let interaction = match self.leader(i) {
            Some((gap, vl)) => {
                let s_star = IDM_S0 + (me.v * me.headway + me.v * (me.v - vl) / (2.0 * (IDM_A * IDM_B).sqrt())).max(0.0);
                (s_star / gap.max(0.1)).powi(2)
            }
            None => 0.0,
        };
        IDM_A * (free - interaction)
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let dt = TAU;
        let accels: Vec<f64> = (0..self.agents.len())
            .map(|i| {
                let me = &self.agents[i];
                let a = match me.control {
                    Control::Idm => self.idm(i),
                    Control::Inattentive { until, brake } => {
                        if self.t < until {
                            0.0
                        } else {
                            -brake
                        }
                    }
                    Control::Brake { decel, until } => {
                        if self.t < until {
                            -decel
                        } else {
                            self.idm(i)
                        }
                    }
                };
                (a + self.noise.sample(rng)).clamp(-A_MAX, IDM_A + 1.0)
            })
            .collect();
        let t_next = self.t + dt;
        for (agent, mut a) in self.agents.iter_mut().zip(accels) {
            // never reverse
            if agent.v + a * dt < 0.0 {
                a = -agent.v / dt;
            }
            agent.a = a;
            agent.x += agent.v * dt + 0.5 * a * dt * dt;
            agent.v += a * dt;
            if let Some(lc) = agent.lane_change {
                agent.base_y = lc.y(t_next);
                if lc.progress(t_next) >= 1.0 {
                    agent.lane_change = None;
                    agent.reckless = false;
                }
            }
            agent.y = agent.base_y + agent.wander_y(t_next);
        }
        self.t = t_next;
    }

    /// Snapshot of the current state. The recorded acceleration is the one
    /// applied over the following step.
    fn snapshot(&self) -> Vec<VehicleState> {
        let mut frame: Vec<VehicleState> = self
            .agents
            .iter()
            .map(|a| {
                let vy = a.lane_change.map_or(0.0, |lc| lc.vy(self.t)) + a.wander_vy(self.t);
                VehicleState {
                    vehicle_id: a.id,
                    t: 0.0,
                    x: a.x,
                    y: a.y,
                    speed: a.v,
                    accel: a.a,
                    heading: vy.atan2(a.v.max(0.1)),
                    lane: self.lane_of(a.y),
                    length: a.length,
                    width: a.width,
                }
            })
            .collect();
        frame.sort_by_key(|v| v.vehicle_id);
        frame
    }

    fn subject_overlaps(&self, frame: &[VehicleState]) -> bool {
        let s = &frame[0];
        frame[1..].iter().any(|o| rectangle_gap(s, o) == 0.0)
    }

    fn others_overlap(frame: &[VehicleState]) -> bool {
        for i in 1..frame.len() {
            for j in i + 1..frame.len() {
                if rectangle_gap(&frame[i], &frame[j]) == 0.0 {
                    return true;
                }
            }
        }
        false
    }

    /// Starts a lane change for agent `i` towards `dir` (±1 lanes).
    fn start_lane_change(&mut self, i: usize, dir: i64, duration: f64, reckless: bool) -> bool {
        let lane = self.lane_of(self.agents[i].y) as i64 + dir;
        if lane < 1 || lane > self.cfg.lanes as i64 {
            return false;
        }
        let to_y = self.lane_center(lane as u32);
        let a = &mut self.agents[i];
        a.lane_change = Some(LaneChange {
            from_y: a.base_y,
            to_y,
            start: self.t,
            duration,
        });
        a.reckless = reckless;
        true
    }

    /// Longitudinal clearance between agent `i` and every vehicle in the lane at `lane`.
    fn target_lane_clearance(&self, i: usize, lane: u32) -> f64 {
        let me = &self.agents[i];
        self.agents
            .iter()
            .enumerate()
            .filter(|&(j, o)| j != i && self.lane_of(o.y) == lane)
            .map(|(_, o)| (o.x - me.x).abs() - 0.5 * (o.length + me.length))
            .fold(f64::INFINITY, f64::min)
    }
}

fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Scene {
    subject_lane: u32,
    speed: f64,
}

fn populate(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Vec<Agent>, Scene) {
    let regime = if rng.gen_bool(cfg.dense_fraction) { cfg.dense } else { cfg.sparse };
    let speed = regime.speed.draw(rng);
    let subject_lane = rng.gen_range(1..=cfg.lanes);
    let subject_x = cfg.segment_length * rng.gen_range(0.15..0.3);
    let mut next_id = SUBJECT_ID;
    let mut agents = Vec::new();
    let mut new_agent = |x: f64, lane: u32, v: f64, rng: &mut ChaCha8Rng| {
        let base_y = (lane as f64 - 0.5) * cfg.lane_width;
        let wander = (
            rng.gen_range(0.0..0.3),
            std::f64::consts::TAU / rng.gen_range(4.0..12.0),
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let a = Agent {
            id: next_id,
            length: rng.gen_range(4.0..5.2),
            width: rng.gen_range(1.7..2.0),
            x,
            y: base_y + wander.0 * wander.2.sin(),
            base_y,
            wander,
            v,
            a: 0.0,
            v0: v * rng.gen_range(1.02..1.15),
            headway: regime.headway.draw(rng),
            control: Control::Idm,
            lane_change: None,
            reckless: false,
        };
        next_id += 1;
        a
    };
    agents.push(new_agent(subject_x, subject_lane, speed, rng));
    for lane in 1..=cfg.lanes {
        let lane_speed = speed * rng.gen_range(0.92..1.08);
        let n_side = regime.vehicles_per_side.draw(rng).round() as usize;
        // offset so that the first vehicle in a neighboring lane may sit alongside the subject
        let start = if lane == subject_lane { 0.0 } else { rng.gen_range(-6.0..6.0) };
        for dir in [1.0, -1.0] {
            let mut x = subject_x + start;
            let mut placed_center = lane != subject_lane && dir > 0.0;
            for _ in 0..n_side {
                if placed_center {
                    placed_center = false;
                } else {
                    let gap = IDM_S0 + lane_speed * regime.headway.draw(rng) * rng.gen_range(0.9..1.8);
                    x += dir * (gap + 4.6);
                }
                if x < 0.0 || x > cfg.segment_length {
                    break;
                }
                agents.push(new_agent(x, lane, lane_speed, rng));
            }
        }
    }
    (agents, Scene { subject_lane, speed })
}

/// Removes vehicles that overlap at placement.
fn prune_initial_overlaps(agents: &mut Vec<Agent>, sim_cfg: &SynthConfig) {
    let mut keep: Vec<Agent> = Vec::with_capacity(agents.len());
    for a in agents.drain(..) {
        let clear = keep.iter().all(|k| {
            let same_lane = ((k.y - a.y).abs()) < 0.5 * sim_cfg.lane_width;
            !same_lane || (k.x - a.x).abs() > 0.5 * (k.length + a.length) + IDM_S0
        });
        if clear {
            keep.push(a);
        }
    }
    *agents = keep;
}

fn build_sim<'a>(cfg: &'a SynthConfig, rng: &mut ChaCha8Rng) -> (Sim<'a>, Scene) {
    let (mut agents, scene) = populate(cfg, rng);
    prune_initial_overlaps(&mut agents, cfg);
    let sim = Sim {
        cfg,
        agents,
        t: 0.0,
        noise: Normal::new(0.0, 0.15).expect("valid std"),
    };
    (sim, scene)
}

fn record(frames: &[Vec<VehicleState>], first: usize, last: usize, tick0: i64) -> std::collections::BTreeMap<i64, Vec<VehicleState>> {
    (first..=last)
        .map(|k| {
            let tick = tick0 + (k - first) as i64;
            let frame = frames[k]
                .iter()
                .map(|v| VehicleState { t: time_of(tick), ..v.clone() })
                .collect();
            (tick, frame)
        })
        .collect()
}

fn try_crash(cfg: &SynthConfig, kind: CrashKind, rng: &mut ChaCha8Rng) -> Option<std::collections::BTreeMap<i64, Vec<VehicleState>>> {
    let (mut sim, scene) = build_sim(cfg, rng);
    let pre_ticks = ticks_in(cfg.pre_crash).ok()?;
    let event_time = cfg.pre_crash + rng.gen_range(0.5..2.5);
    let horizon = event_time + 8.0;

    match kind {
        CrashKind::RearEnd => {
            let subject_x = sim.agents[0].x;
            let lead = sim
                .agents
                .iter()
                .enumerate()
                .filter(|(_, a)| a.id != SUBJECT_ID && sim.lane_of(a.y) == scene.subject_lane && a.x > subject_x)
                .min_by(|a, b| a.1.x.total_cmp(&b.1.x))
                .map(|(i, _)| i)?;
            let decel = rng.gen_range(3.0..7.0);
            let brake_for = rng.gen_range(1.5..3.5);
            let delay = rng.gen_range(0.8..2.2);
            let late_brake = rng.gen_range(1.0..4.0);
            let mut armed = false;
            let mut frames = Vec::new();
            while sim.t < horizon {
                if !armed && sim.t >= event_time {
                    armed = true;
                    sim.agents[lead].control = Control::Brake { decel, until: sim.t + brake_for };
                    sim.agents[0].control = Control::Inattentive { until: sim.t + delay, brake: late_brake };
                }
                let frame = sim.snapshot();
                if Sim::others_overlap(&frame) {
                    return None;
                }
                let hit = sim.subject_overlaps(&frame);
                frames.push(frame);
                if hit {
                    break;
                }
                sim.step(rng);
            }
            finish_crash(&sim, frames, pre_ticks)
        }
        CrashKind::Sideswipe => {
            let dir: i64 = if scene.subject_lane == 1 {
                1
            } else if scene.subject_lane == cfg.lanes {
                -1
            } else if rng.gen_bool(0.5) {
                1
            } else {
                -1
            };
            let target_lane = (scene.subject_lane as i64 + dir) as u32;
            // the adjacent vehicle closest to alongside; tune it to stay near the subject
            let subject_x = sim.agents[0].x;
            let other = sim
                .agents
                .iter()
                .enumerate()
                .filter(|(_, a)| a.id != SUBJECT_ID && sim.lane_of(a.y) == target_lane)
                .min_by(|a, b| (a.1.x - subject_x).abs().total_cmp(&(b.1.x - subject_x).abs()))
                .map(|(i, _)| i)?;
            let rel: f64 = rng.gen_range(-2.0..2.5);
            sim.agents[other].x = subject_x + rng.gen_range(-10.0..4.0);
            sim.agents[other].v = scene.speed + rel.max(0.0) * 0.5;
            sim.agents[other].v0 = sim.agents[0].v0 + rel;
            let other_id = sim.agents[other].id;
            prune_around(&mut sim, other);
            let subject_changes = rng.gen_bool(0.5);
            let duration = cfg.lane_change_duration.draw(rng);
            let mut armed = false;
            let mut frames = Vec::new();
            while sim.t < horizon {
                if !armed && sim.t >= event_time {
                    armed = true;
                    if subject_changes {
                        sim.start_lane_change(0, dir, duration, true);
                    } else {
                        let other_idx = sim.agents.iter().position(|a| a.id == other_id)?;
                        sim.start_lane_change(other_idx, -dir, duration, true);
                    }
                }
                let frame = sim.snapshot();
                if Sim::others_overlap(&frame) {
                    return None;
                }
                let hit = sim.subject_overlaps(&frame);
                frames.push(frame);
                if hit {
                    break;
                }
                sim.step(rng);
            }
            finish_crash(&sim, frames, pre_ticks)
        }
    }
}

/// Drops target-lane vehicles that would overlap the repositioned agent.
fn prune_around(sim: &mut Sim<'_>, keep: usize) {
    let anchor = sim.agents[keep].clone();
    let lane = sim.lane_of(anchor.y);
    let ids: Vec<VehicleId> = sim
        .agents
        .iter()
        .filter(|a| {
            a.id != anchor.id
                && a.id != SUBJECT_ID
                && sim.lane_of(a.y) == lane
                && (a.x - anchor.x).abs() < 0.5 * (a.length + anchor.length) + IDM_S0 + anchor.v * 0.8
        })
        .map(|a| a.id)
        .collect();
    sim.agents.retain(|a| !ids.contains(&a.id));
}

fn finish_crash(
    sim: &Sim<'_>,
    frames: Vec<Vec<VehicleState>>,
    pre_ticks: usize,
) -> Option<std::collections::BTreeMap<i64, Vec<VehicleState>>> {
    let last = frames.len().checked_sub(1)?;
    if !sim.subject_overlaps(&frames[last]) || last < pre_ticks {
        return None;
    }
    let first = last - pre_ticks;
    // the subject must have had at least one neighbor-free-of-contact frame before
    Some(record(&frames, first, last, -(pre_ticks as i64)))
}

fn try_noncrash(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Option<std::collections::BTreeMap<i64, Vec<VehicleState>>> {
    let (mut sim, scene) = build_sim(cfg, rng);
    let ticks = ticks_in(cfg.noncrash_duration).ok()?;
    let warmup = ticks_in(2.0).ok()? + rng.gen_range(0..20);
    let lane_change_at = if rng.gen_bool(cfg.lane_change_rate) {
        Some(rng.gen_range(0..warmup + ticks))
    } else {
        None
    };
    let mut frames = Vec::with_capacity(warmup + ticks + 1);
    for k in 0..=warmup + ticks {
        if Some(k) == lane_change_at {
            let dirs: Vec<i64> = [-1i64, 1]
                .into_iter()
                .filter(|d| {
                    let lane = scene.subject_lane as i64 + d;
                    lane >= 1 && lane <= cfg.lanes as i64
                })
                .collect();
            let dir = dirs[rng.gen_range(0..dirs.len())];
            let lane = (scene.subject_lane as i64 + dir) as u32;
            let needed = 8.0 + sim.agents[0].v * 0.8;
            if sim.target_lane_clearance(0, lane) > needed {
                let duration = cfg.lane_change_duration.draw(rng);
                sim.start_lane_change(0, dir, duration, false);
            }
        }
        let frame = sim.snapshot();
        if Sim::others_overlap(&frame) || sim.subject_overlaps(&frame) {
            return None;
        }
        if k >= warmup {
            match frame_mrd(&frame, SUBJECT_ID) {
                Ok(Some(mrd)) if mrd <= 1.0 => return None,
                Err(_) => return None,
                _ => {}
            }
        }
        frames.push(frame);
        sim.step(rng);
    }
    Some(record(&frames, warmup, warmup + ticks, 0))
}

/// Generates `n_crash` crash samples followed by `n_noncrash` non-crash samples.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<TrajectorySample>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.n_crash + cfg.n_noncrash);
    let total = cfg.crash_mix.rear_end + cfg.crash_mix.sideswipe;
    for i in 0..cfg.n_crash {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1, i as u64));
        let kind = if rng.gen::<f64>() * total < cfg.crash_mix.rear_end {
            CrashKind::RearEnd
        } else {
            CrashKind::Sideswipe
        };
        let frames = (0..cfg.max_attempts)
            .find_map(|_| try_crash(cfg, kind, &mut rng))
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "no {kind:?} crash after {} attempts for crash sample {i}",
                    cfg.max_attempts
                ))
            })?;
        out.push(TrajectorySample {
            sample_id: format!("crash_{i:04}"),
            label: Label::Crash,
            subject_id: SUBJECT_ID,
            crash_time: Some(0.0),
            frames,
        });
    }
    for i in 0..cfg.n_noncrash {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2, i as u64));
        let frames = (0..cfg.max_attempts)
            .find_map(|_| try_noncrash(cfg, &mut rng))
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "no safe episode after {} attempts for non-crash sample {i}",
                    cfg.max_attempts
                ))
            })?;
        out.push(TrajectorySample {
            sample_id: format!("noncrash_{i:04}"),
            label: Label::NonCrash,
            subject_id: SUBJECT_ID,
            crash_time: None,
            frames,
        });
    }
    Ok(out)
}
