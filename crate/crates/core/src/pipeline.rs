//! End-to-end experiment pipeline over a run directory.
//!
//! Layout of a run:
//!
//! ```text
//! <run>/config.toml
//! <run>/data/trajectories.csv
//! <run>/data/events_noncrash.json, events_crash_T<T>.json
//! <run>/models/nsbm_noncrash.json, nsbm_crash_T<T>.json, sbm_noncrash.json, sbm_crash_T<T>.json
//! <run>/calib/nsbm_T<T>.json, sbm_T<T>.json
//! <run>/eval/report_T<T>.json, pp_T<T>.csv, roc_T<T>.csv
//! <run>/eval/report.json, ap.csv, pp.csv, summary.csv
//! ```
//!
//! Every stage reads only files and the configuration, and every stage either
//! writes all of its outputs or none of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{
    ap, ap_flags, pp_points, roc_auc, sample_controls, ssm_scores, t_key, write_ap_csv, write_pp_csv,
    write_roc_csv, EvalReport, ModelReport, RocCurve, SsmScores,
};
use crate::gev::{crps_mean, fit_stationary, FitConfig, GevParams, StationaryFit};
use crate::nsbm_gat::{train, TrainConfig, TrainItem, TrainedModel};
use crate::risk::{calibrate_threshold, risk_value, RiskGrid, ThresholdCalibration};
use crate::scene_graph::{graph_for_frame, SceneGraph};
use crate::synth::{generate_dataset, SynthConfig};
use crate::trajectory::{
    block_len, extract_events, frame_mrd, identify_neighbors, read_trajectory_csv, tick_of, ticks_in,
    time_of, write_trajectory_csv, ExtremeEvent, Label, Role, TrajectorySample, Window, TAU,
};

pub const SBM_FORMAT: &str = "sbm-gev";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub tau: f64,
    /// Block size, s.
    pub block: f64,
    /// Extreme-event threshold for crash windows, m.
    pub q: f64,
    /// Extreme-event threshold for non-crash episodes, m.
    pub q_noncrash: f64,
    pub lead_times: Vec<f64>,
    pub m_step: f64,
    pub grid_points: usize,
    /// Controls per case for calibration and ROC analysis.
    pub control_ratio: usize,
    /// Fraction of samples of each label held out for evaluation.
    pub test_fraction: f64,
    pub train: TrainConfig,
    pub sbm: FitConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tau: TAU,
            block: 0.2,
            q: 1.0,
            q_noncrash: 10.0,
            lead_times: (0..24).map(|k| (4 + 2 * k) as f64 / 10.0).collect(),
            m_step: 0.05,
            grid_points: 200,
            control_ratio: 5,
            test_fraction: 0.3,
            train: TrainConfig::default(),
            sbm: FitConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.tau - TAU).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("tau is fixed at {TAU} s")));
        }
        block_len(self.block)?;
        if !(self.q > 0.0) || !(self.q_noncrash > 0.0) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        if self.lead_times.is_empty() {
            return Err(Error::InvalidArgument("no lead times".into()));
        }
        for &t in &self.lead_times {
            if ticks_in(t)? == 0 {
                return Err(Error::InvalidArgument("lead times must be positive".into()));
            }
            if t > self.synth.pre_crash + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "lead time {t} s exceeds the recorded pre-crash history"
                )));
            }
        }
        if !(self.m_step > 0.0 && self.m_step <= 2.0) || self.grid_points < 2 || self.control_ratio == 0 {
            return Err(Error::InvalidArgument("invalid calibration grid".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidArgument("test_fraction must lie in (0, 1)".into()));
        }
        self.synth.validate()
    }

    /// Copy with the master seed propagated into the sub-configurations.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.synth.seed = c.seed;
        c.train.seed = c.seed;
        c
    }

    /// SHA-256 of the canonical TOML rendering of the resolved configuration.
    pub fn hash(&self) -> Result<String> {
        let text = self.resolved().to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    fn grid(&self) -> RiskGrid {
        RiskGrid {
            floor: -self.q,
            points: self.grid_points,
        }
    }
}

pub fn default_run_id(cfg: &PipelineConfig) -> Result<String> {
    Ok(format!("seed{}-{}", cfg.seed, &cfg.hash()?[..8]))
}

/// File-name tag of a lead time, e.g. `T1.0`.
pub fn lead_tag(t: f64) -> String {
    format!("T{}", t_key(t))
}

/// A set of files committed together: either all are written or none remain.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done: Vec<PathBuf> = Vec::new();
        let result = (|| -> Result<()> {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)?;
                }
                let tmp = path.with_extension("partial");
                fs::write(&tmp, bytes)?;
                fs::rename(&tmp, path)?;
                done.push(path.clone());
            }
            Ok(())
        })();
        if let Err(e) = result {
            for p in &done {
                let _ = fs::remove_file(p);
            }
            for (path, _) in &self.files {
                let _ = fs::remove_file(path.with_extension("partial"));
            }
            return Err(e);
        }
        Ok(done)
    }
}

pub struct Run {
    pub root: PathBuf,
    pub cfg: PipelineConfig,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: ExtremeEventRecord,
    pub graph: SceneGraph<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeEventRecord {
    pub sample_id: String,
    pub split: Split,
    pub t: f64,
    pub z: f64,
    pub block_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFile {
    pub label: Label,
    pub lead_time: Option<f64>,
    pub q: f64,
    pub config_hash: String,
    pub events: Vec<EventRecord>,
}

/// Stationary GEV baseline for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmModel {
    pub format: String,
    pub tag: Label,
    pub lead_time: Option<f64>,
    pub fit: StationaryFit<f64>,
    pub n_events: usize,
    pub config_hash: String,
}

impl SbmModel {
    pub fn params(&self) -> GevParams<f64> {
        self.fit.params
    }
}

/// One scored frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRisk {
    pub t: f64,
    pub z: f64,
    pub m: f64,
    pub warn: bool,
    pub crash_params: GevParams<f64>,
    pub noncrash_params: GevParams<f64>,
}

/// Deterministic held-out assignment, independent of sample order.
pub fn split_of(sample_id: &str, seed: u64, test_fraction: f64) -> Split {
    let digest = Sha256::digest(format!("{seed}:{sample_id}").as_bytes());
    let word = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    if (word as f64 / u64::MAX as f64) < test_fraction {
        Split::Test
    } else {
        Split::Train
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Danger value and scene graph of one frame.
pub fn frame_state(sample: &TrajectorySample, tick: i64) -> Result<(f64, SceneGraph<f64>)> {
    let frame = sample
        .frames
        .get(&tick)
        .ok_or(Error::WindowNotCovered(time_of(tick)))?;
    let z = frame_mrd(frame, sample.subject_id)?.map_or(f64::NEG_INFINITY, |d| -d);
    let graph = graph_for_frame(frame, sample.subject_id, &sample.sample_id, time_of(tick))?;
    Ok((z, graph))
}

/// Surrogate safety measures against the same-lane leader. `None` without a
/// leader; overlapping vehicles give zero times and infinite DRAC.
pub fn frame_ssm(sample: &TrajectorySample, tick: i64) -> Result<Option<SsmScores>> {
    let frame = sample
        .frames
        .get(&tick)
        .ok_or(Error::WindowNotCovered(time_of(tick)))?;
    let subject = sample.subject_at(tick).ok_or(Error::SubjectMissing)?;
    let Some(lead_id) = identify_neighbors(frame, sample.subject_id)?.get(Role::LeadSame) else {
        return Ok(None);
    };
    let lead = frame.iter().find(|v| v.vehicle_id == lead_id).expect("neighbor in frame");
    match ssm_scores(subject, lead) {
        Ok(s) => Ok(Some(s)),
        Err(Error::VehiclesOverlapping) => Ok(Some(SsmScores {
            gap: 0.0,
            ttc: 0.0,
            mttc: 0.0,
            drac: f64::INFINITY,
            flags: crate::evaluation::SsmFlags {
                ttc: true,
                mttc: true,
                drac: true,
            },
        })),
        Err(e) => Err(e),
    }
}

fn sample_window(sample: &TrajectorySample, label: Label, lead_time: f64) -> Result<Window> {
    match label {
        Label::Crash => Window::crash(lead_time),
        Label::NonCrash => {
            let first = sample.first_tick().ok_or_else(|| Error::Data(format!("{} has no frames", sample.sample_id)))?;
            let last = sample.last_tick().expect("nonempty");
            Ok(Window {
                start: first,
                len: (last - first) as usize,
            })
        }
    }
}

/// Risk of one frame under a pair of GEV parameter sets.
pub fn frame_risk(z: f64, crash: GevParams<f64>, noncrash: GevParams<f64>, grid: RiskGrid) -> f64 {
    risk_value(z, crash, noncrash, grid)
}

/// The models needed to score frames at one lead time.
pub struct Scorers {
    pub nsbm_crash: TrainedModel<f64>,
    pub nsbm_noncrash: TrainedModel<f64>,
    pub sbm_crash: SbmModel,
    pub sbm_noncrash: SbmModel,
}

impl Scorers {
    pub fn nsbm(&self, z: f64, graph: &SceneGraph<f64>, grid: RiskGrid) -> Result<(f64, GevParams<f64>, GevParams<f64>)> {
        let c = self.nsbm_crash.predict(graph)?;
        let n = self.nsbm_noncrash.predict(graph)?;
        Ok((frame_risk(z, c, n, grid), c, n))
    }

    pub fn sbm(&self, z: f64, grid: RiskGrid) -> f64 {
        frame_risk(z, self.sbm_crash.params(), self.sbm_noncrash.params(), grid)
    }
}

/// Frames scored by every model.
#[derive(Debug, Clone, Default)]
struct ScoreTable {
    nsbm: Vec<f64>,
    sbm: Vec<f64>,
    ttc: Vec<f64>,
    mttc: Vec<f64>,
    drac: Vec<f64>,
    flags: Vec<[bool; 3]>,
}

impl ScoreTable {
    fn push(&mut self, sample: &TrajectorySample, tick: i64, scorers: &Scorers, grid: RiskGrid) -> Result<()> {
        let (z, graph) = frame_state(sample, tick)?;
        self.nsbm.push(scorers.nsbm(z, &graph, grid)?.0);
        self.sbm.push(scorers.sbm(z, grid));
        let ssm = frame_ssm(sample, tick)?;
        self.ttc.push(ssm.map_or(0.0, |s| if s.ttc == 0.0 { f64::INFINITY } else { s.inverse_ttc() }));
        self.mttc.push(ssm.map_or(0.0, |s| if s.mttc == 0.0 { f64::INFINITY } else { s.inverse_mttc() }));
        self.drac.push(ssm.map_or(0.0, |s| s.drac));
        self.flags.push(ssm.map_or([false; 3], |s| [s.flags.ttc, s.flags.mttc, s.flags.drac]));
        Ok(())
    }

    fn by_model(&self) -> [(&'static str, &Vec<f64>); 5] {
        [
            ("nsbm_gat", &self.nsbm),
            ("sbm", &self.sbm),
            ("ttc", &self.ttc),
            ("mttc", &self.mttc),
            ("drac", &self.drac),
        ]
    }
}

impl Run {
    pub fn new(root: impl Into<PathBuf>, cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.resolved();
        let config_hash = cfg.hash()?;
        Ok(Self {
            root: root.into(),
            cfg,
            config_hash,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn trajectories_path(&self) -> PathBuf {
        self.path("data/trajectories.csv")
    }

    pub fn load_samples(&self) -> Result<Vec<TrajectorySample>> {
        let path = self.trajectories_path();
        let file = fs::File::open(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        read_trajectory_csv(std::io::BufReader::new(file))
    }

    fn split(&self, sample_id: &str) -> Split {
        split_of(sample_id, self.cfg.seed, self.cfg.test_fraction)
    }

    /// Writes the synthetic dataset and the resolved configuration.
    pub fn synth(&self) -> Result<Vec<PathBuf>> {
        let samples = generate_dataset(&self.cfg.synth)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &samples)?;
        let mut out = Outputs::default();
        out.add(self.trajectories_path(), buf);
        out.add(self.path("config.toml"), self.cfg.to_toml()?);
        out.commit()
    }

    fn events_for(&self, samples: &[TrajectorySample], label: Label, lead_time: f64) -> Result<EventFile> {
        let q = match label {
            Label::Crash => self.cfg.q,
            Label::NonCrash => self.cfg.q_noncrash,
        };
        let block = block_len(self.cfg.block)?;
        let mut events = Vec::new();
        for sample in samples.iter().filter(|s| s.label == label) {
            let window = sample_window(sample, label, lead_time)?;
            let found: Vec<ExtremeEvent> = extract_events(sample, window, block, q)?;
            for e in found {
                let (_, graph) = frame_state(sample, tick_of(e.t))?;
                events.push(EventRecord {
                    event: ExtremeEventRecord {
                        split: self.split(&e.sample_id),
                        sample_id: e.sample_id,
                        t: e.t,
                        z: e.z,
                        block_index: e.block_index,
                    },
                    graph,
                });
            }
        }
        Ok(EventFile {
            label,
            lead_time: (label == Label::Crash).then_some(lead_time),
            q,
            config_hash: self.config_hash.clone(),
            events,
        })
    }

    fn crash_events_path(&self, t: f64) -> PathBuf {
        self.path(&format!("data/events_crash_{}.json", lead_tag(t)))
    }

    fn noncrash_events_path(&self) -> PathBuf {
        self.path("data/events_noncrash.json")
    }

    /// Extreme events (with graphs) for the given lead times. Non-crash
    /// events do not depend on the lead time and are written once.
    pub fn extract(&self, lead_times: &[f64]) -> Result<Vec<PathBuf>> {
        let samples = self.load_samples()?;
        let mut out = Outputs::default();
        out.add(
            self.noncrash_events_path(),
            json_bytes(&self.events_for(&samples, Label::NonCrash, 0.0)?)?,
        );
        for &t in lead_times {
            out.add(self.crash_events_path(t), json_bytes(&self.events_for(&samples, Label::Crash, t)?)?);
        }
        out.commit()
    }

    fn train_pair(&self, file: &EventFile, tag: Label, lead_time: Option<f64>) -> Result<(TrainedModel<f64>, SbmModel)> {
        let items: Vec<TrainItem<f64>> = file
            .events
            .iter()
            .filter(|e| e.event.split == Split::Train)
            .map(|e| TrainItem {
                graph: e.graph.clone(),
                z: e.event.z,
            })
            .collect();
        if items.is_empty() {
            return Err(Error::Data(format!("no {} training events", tag.as_str())));
        }
        let mut model = train(&items, &self.cfg.train, tag)?;
        model.meta.config_hash = self.config_hash.clone();
        let z: Vec<f64> = items.iter().map(|it| it.z).collect();
        let fit = fit_stationary(&z, &self.cfg.sbm)?;
        let sbm = SbmModel {
            format: SBM_FORMAT.into(),
            tag,
            lead_time,
            fit,
            n_events: z.len(),
            config_hash: self.config_hash.clone(),
        };
        Ok((model, sbm))
    }

    /// Trains the non-crash pair once and a crash pair per lead time.
    pub fn train(&self, lead_times: &[f64]) -> Result<Vec<PathBuf>> {
        let mut out = Outputs::default();
        let noncrash: EventFile = read_json(&self.noncrash_events_path())?;
        let (model, sbm) = self.train_pair(&noncrash, Label::NonCrash, None)?;
        out.add(self.path("models/nsbm_noncrash.json"), json_bytes(&model)?);
        out.add(self.path("models/sbm_noncrash.json"), json_bytes(&sbm)?);
        for &t in lead_times {
            let crash: EventFile = read_json(&self.crash_events_path(t))?;
            let (model, sbm) = self.train_pair(&crash, Label::Crash, Some(t))?;
            out.add(self.path(&format!("models/nsbm_crash_{}.json", lead_tag(t))), json_bytes(&model)?);
            out.add(self.path(&format!("models/sbm_crash_{}.json", lead_tag(t))), json_bytes(&sbm)?);
        }
        out.commit()
    }

    pub fn scorers(&self, lead_time: f64) -> Result<Scorers> {
        let load_model = |rel: String| -> Result<TrainedModel<f64>> {
            let path = self.path(&rel);
            let text = fs::read_to_string(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            TrainedModel::from_json(&text)
        };
        let tag = lead_tag(lead_time);
        Ok(Scorers {
            nsbm_crash: load_model(format!("models/nsbm_crash_{tag}.json"))?,
            nsbm_noncrash: load_model("models/nsbm_noncrash.json".into())?,
            sbm_crash: read_json(&self.path(&format!("models/sbm_crash_{tag}.json")))?,
            sbm_noncrash: read_json(&self.path("models/sbm_noncrash.json"))?,
        })
    }

    /// Cases (every frame in `[-T, 0]` of each crash sample) and seeded
    /// controls (`control_ratio` per case) from the non-crash frames of one split.
    fn case_control_frames<'a>(
        &self,
        samples: &'a [TrajectorySample],
        split: Split,
        lead_time: f64,
        salt: u64,
    ) -> Result<(Vec<(&'a TrajectorySample, i64)>, Vec<(&'a TrajectorySample, i64)>)> {
        let window = Window::crash(lead_time)?;
        let mut cases = Vec::new();
        for s in samples.iter().filter(|s| s.label == Label::Crash && self.split(&s.sample_id) == split) {
            for tick in window.ticks() {
                cases.push((s, tick));
            }
        }
        let pool: Vec<(&TrajectorySample, i64)> = samples
            .iter()
            .filter(|s| s.label == Label::NonCrash && self.split(&s.sample_id) == split)
            .flat_map(|s| s.frames.keys().map(move |&tick| (s, tick)))
            .collect();
        if cases.is_empty() || pool.is_empty() {
            return Err(Error::Data(format!("{split:?} split lacks crash or non-crash samples")));
        }
        let seed = self.cfg.seed ^ salt ^ (ticks_in(lead_time)? as u64).wrapping_mul(0x100_0001);
        let controls = sample_controls(pool.len(), cases.len(), self.cfg.control_ratio, seed)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        Ok((cases, controls))
    }

    /// Warning thresholds from the training split.
    pub fn calibrate(&self, lead_times: &[f64]) -> Result<Vec<PathBuf>> {
        let samples = self.load_samples()?;
        let grid = self.cfg.grid();
        let mut out = Outputs::default();
        for &t in lead_times {
            let scorers = self.scorers(t)?;
            let (cases, controls) = self.case_control_frames(&samples, Split::Train, t, 0xca11)?;
            let score = |frames: &[(&TrajectorySample, i64)]| -> Result<(Vec<f64>, Vec<f64>)> {
                let mut nsbm = Vec::with_capacity(frames.len());
                let mut sbm = Vec::with_capacity(frames.len());
                for &(s, tick) in frames {
                    let (z, graph) = frame_state(s, tick)?;
                    nsbm.push(scorers.nsbm(z, &graph, grid)?.0);
                    sbm.push(scorers.sbm(z, grid));
                }
                Ok((nsbm, sbm))
            };
            let (case_n, case_s) = score(&cases)?;
            let (ctrl_n, ctrl_s) = score(&controls)?;
            for (name, c, n) in [("nsbm", &case_n, &ctrl_n), ("sbm", &case_s, &ctrl_s)] {
                let mut cal = calibrate_threshold(c, n, self.cfg.m_step, t)?;
                cal.config_hash = self.config_hash.clone();
                out.add(self.path(&format!("calib/{name}_{}.json", lead_tag(t))), json_bytes(&cal)?);
            }
        }
        out.commit()
    }

    pub fn calibration(&self, name: &str, lead_time: f64) -> Result<ThresholdCalibration> {
        read_json(&self.path(&format!("calib/{name}_{}.json", lead_tag(lead_time))))
    }

    /// Per-frame NsBM-GAT risk for every sample of a trajectory file.
    pub fn predict(&self, input: &Path, lead_time: f64, output: &Path) -> Result<Vec<PathBuf>> {
        let file = fs::File::open(input).map_err(|e| Error::Data(format!("{}: {e}", input.display())))?;
        let samples = read_trajectory_csv(std::io::BufReader::new(file))?;
        let scorers = self.scorers(lead_time)?;
        let m_star = self.calibration("nsbm", lead_time)?.m_star;
        let grid = self.cfg.grid();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "sample_id", "t", "z", "m", "warn", "crash_xi", "crash_sigma", "crash_mu", "noncrash_xi",
            "noncrash_sigma", "noncrash_mu",
        ])?;
        for s in &samples {
            for &tick in s.frames.keys() {
                let r = self.frame_risk_record(s, tick, &scorers, m_star, grid)?;
                let f = |x: f64| format!("{x:.9}");
                w.write_record([
                    s.sample_id.clone(),
                    format!("{:.1}", r.t),
                    f(r.z),
                    f(r.m),
                    r.warn.to_string(),
                    f(r.crash_params.xi),
                    f(r.crash_params.sigma),
                    f(r.crash_params.mu),
                    f(r.noncrash_params.xi),
                    f(r.noncrash_params.sigma),
                    f(r.noncrash_params.mu),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let mut out = Outputs::default();
        out.add(output.to_path_buf(), bytes);
        out.commit()
    }

    pub fn frame_risk_record(
        &self,
        sample: &TrajectorySample,
        tick: i64,
        scorers: &Scorers,
        m_star: f64,
        grid: RiskGrid,
    ) -> Result<FrameRisk> {
        let (z, graph) = frame_state(sample, tick)?;
        let (m, c, n) = scorers.nsbm(z, &graph, grid)?;
        Ok(FrameRisk {
            t: time_of(tick),
            z,
            m,
            warn: m >= m_star,
            crash_params: c,
            noncrash_params: n,
        })
    }

    /// Held-out metrics at one lead time.
    pub fn evaluate_lead_time(&self, samples: &[TrajectorySample], t: f64) -> Result<(EvalReport, Vec<(PathBuf, Vec<u8>)>)> {
        let grid = self.cfg.grid();
        let scorers = self.scorers(t)?;
        let key = t_key(t);
        let mut report = EvalReport {
            config_hash: self.config_hash.clone(),
            seed: self.cfg.seed,
            models: BTreeMap::new(),
        };
        let mut files = Vec::new();

        // distribution fit on held-out extremes
        let test_events = |f: &EventFile| -> Vec<(f64, SceneGraph<f64>)> {
            f.events
                .iter()
                .filter(|e| e.event.split == Split::Test)
                .map(|e| (e.event.z, e.graph.clone()))
                .collect()
        };
        let crash_file: EventFile = read_json(&self.crash_events_path(t))?;
        let noncrash_file: EventFile = read_json(&self.noncrash_events_path())?;
        let crash_test = test_events(&crash_file);
        let noncrash_test = test_events(&noncrash_file);
        let paired = |events: &[(f64, SceneGraph<f64>)], model: &TrainedModel<f64>| -> Result<Vec<(f64, GevParams<f64>)>> {
            events.iter().map(|(z, g)| Ok((*z, model.predict(g)?))).collect()
        };
        let fixed = |events: &[(f64, SceneGraph<f64>)], p: GevParams<f64>| -> Vec<(f64, GevParams<f64>)> {
            events.iter().map(|(z, _)| (*z, p)).collect()
        };
        let nsbm_c = paired(&crash_test, &scorers.nsbm_crash)?;
        let nsbm_n = paired(&noncrash_test, &scorers.nsbm_noncrash)?;
        let sbm_c = fixed(&crash_test, scorers.sbm_crash.params());
        let sbm_n = fixed(&noncrash_test, scorers.sbm_noncrash.params());

        let mut pp_csv = Vec::new();
        for (name, c, n) in [("nsbm_gat", &nsbm_c, &nsbm_n), ("sbm", &sbm_c, &sbm_n)] {
            let entry = report.models.entry(name.to_string()).or_default();
            if !c.is_empty() {
                entry.crps_avg = Some(crps_mean(c));
                entry.pp_points = pp_points(c);
            }
            if !n.is_empty() {
                entry.crps_noncrash = Some(crps_mean(n));
            }
            let mut buf = Vec::new();
            write_pp_csv(&mut buf, name, &entry.pp_points)?;
            if pp_csv.is_empty() {
                pp_csv = buf;
            } else {
                // drop the repeated header
                let body = buf.iter().position(|&b| b == b'\n').map_or(&buf[..], |i| &buf[i + 1..]);
                pp_csv.extend_from_slice(body);
            }
        }
        files.push((self.path(&format!("eval/pp_{}.csv", lead_tag(t))), pp_csv));

        // warning accuracy on held-out crash samples
        let window = Window::crash(t)?;
        let nsbm_star = self.calibration("nsbm", t)?.m_star;
        let sbm_star = self.calibration("sbm", t)?.m_star;
        let mut series: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
        let mut flag_series: [Vec<Vec<bool>>; 3] = Default::default();
        for s in samples.iter().filter(|s| s.label == Label::Crash && self.split(&s.sample_id) == Split::Test) {
            let mut table = ScoreTable::default();
            for tick in window.ticks() {
                table.push(s, tick, &scorers, grid)?;
            }
            series.entry("nsbm_gat").or_default().push(table.nsbm.clone());
            series.entry("sbm").or_default().push(table.sbm.clone());
            for (k, fs) in flag_series.iter_mut().enumerate() {
                fs.push(table.flags.iter().map(|f| f[k]).collect());
            }
        }
        if series.is_empty() {
            return Err(Error::Data("no held-out crash samples".into()));
        }
        report.models.entry("nsbm_gat".into()).or_default().ap_by_t.insert(key.clone(), ap(&series["nsbm_gat"], nsbm_star));
        report.models.entry("sbm".into()).or_default().ap_by_t.insert(key.clone(), ap(&series["sbm"], sbm_star));
        for (name, fs) in ["ttc", "mttc", "drac"].into_iter().zip(&flag_series) {
            report.models.entry(name.into()).or_default().ap_by_t.insert(key.clone(), ap_flags(fs));
        }

        // discrimination against seeded held-out controls
        let (cases, controls) = self.case_control_frames(samples, Split::Test, t, 0xe7a1)?;
        let mut case_table = ScoreTable::default();
        for &(s, tick) in &cases {
            case_table.push(s, tick, &scorers, grid)?;
        }
        let mut control_table = ScoreTable::default();
        for &(s, tick) in &controls {
            control_table.push(s, tick, &scorers, grid)?;
        }
        let mut curves: BTreeMap<String, RocCurve> = BTreeMap::new();
        for ((name, c), (_, n)) in case_table.by_model().into_iter().zip(control_table.by_model()) {
            let curve = roc_auc(c, n)?;
            report.models.entry(name.into()).or_default().auc_by_t.insert(key.clone(), curve.auc);
            curves.insert(name.into(), curve);
        }
        let mut roc = Vec::new();
        write_roc_csv(&mut roc, &curves)?;
        files.push((self.path(&format!("eval/roc_{}.csv", lead_tag(t))), roc));
        files.push((self.path(&format!("eval/report_{}.json", lead_tag(t))), json_bytes(&report)?));
        Ok((report, files))
    }

    pub fn evaluate(&self, lead_times: &[f64]) -> Result<Vec<PathBuf>> {
        let samples = self.load_samples()?;
        let mut out = Outputs::default();
        for &t in lead_times {
            let (_, files) = self.evaluate_lead_time(&samples, t)?;
            for (p, b) in files {
                out.add(p, b);
            }
        }
        out.commit()
    }

    /// Merges every per-lead-time report into summary tables.
    pub fn report(&self) -> Result<Vec<PathBuf>> {
        let eval_dir = self.path("eval");
        let mut names: Vec<PathBuf> = fs::read_dir(&eval_dir)
            .map_err(|e| Error::Data(format!("{}: {e}", eval_dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("report_T") && n.ends_with(".json"))
            })
            .collect();
        if names.is_empty() {
            return Err(Error::Data("no evaluation reports to summarize".into()));
        }
        names.sort();
        let mut merged = EvalReport {
            config_hash: self.config_hash.clone(),
            seed: self.cfg.seed,
            models: BTreeMap::new(),
        };
        let mut crps_rows: Vec<(String, String, Option<f64>)> = Vec::new();
        let mut pp_rows = csv::Writer::from_writer(Vec::new());
        pp_rows.write_record(["model", "lead_time", "empirical", "theoretical"])?;
        for path in &names {
            let r: EvalReport = read_json(path)?;
            for (model, m) in r.models {
                let entry = merged.models.entry(model.clone()).or_insert_with(ModelReport::default);
                for (t, v) in &m.ap_by_t {
                    entry.ap_by_t.insert(t.clone(), *v);
                    crps_rows.push((model.clone(), t.clone(), m.crps_avg));
                    for p in &m.pp_points {
                        pp_rows.write_record([model.clone(), t.clone(), format!("{:.9}", p.empirical), format!("{:.9}", p.theoretical)])?;
                    }
                }
                for (t, v) in m.auc_by_t {
                    entry.auc_by_t.insert(t, v);
                }
                if let Some(c) = m.crps_avg {
                    entry.crps_by_t.insert(m.ap_by_t.keys().next().cloned().unwrap_or_default(), c);
                }
            }
        }
        crps_rows.sort_by(|a, b| a.0.cmp(&b.0).then(lead_key(&a.1).total_cmp(&lead_key(&b.1))));
        let mut summary = csv::Writer::from_writer(Vec::new());
        summary.write_record(["model", "lead_time", "crps", "ap", "auc"])?;
        for (model, t, crps) in &crps_rows {
            let m = &merged.models[model];
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.9}")).unwrap_or_default();
            summary.write_record([
                model.clone(),
                t.clone(),
                fmt(*crps),
                fmt(m.ap_by_t.get(t).copied()),
                fmt(m.auc_by_t.get(t).copied()),
            ])?;
        }
        let mut ap_csv = Vec::new();
        write_ap_csv(&mut ap_csv, &merged)?;
        let mut out = Outputs::default();
        out.add(self.path("eval/report.json"), json_bytes(&merged)?);
        out.add(self.path("eval/ap.csv"), ap_csv);
        out.add(self.path("eval/pp.csv"), pp_rows.into_inner().map_err(|e| Error::Io(e.into_error()))?);
        out.add(self.path("eval/summary.csv"), summary.into_inner().map_err(|e| Error::Io(e.into_error()))?);
        out.commit()
    }

    /// synth → extract → train → calibrate → evaluate → report.
    pub fn run_all(&self) -> Result<EvalReport> {
        let ts = self.cfg.lead_times.clone();
        self.synth()?;
        self.extract(&ts)?;
        self.train(&ts)?;
        self.calibrate(&ts)?;
        self.evaluate(&ts)?;
        self.report()?;
        read_json(&self.path("eval/report.json"))
    }
}

fn lead_key(t: &str) -> f64 {
    t.parse().unwrap_or(f64::NAN)
}
