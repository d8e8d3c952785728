//! Closed-loop episodes.
//!
//! Each control step (50 Hz) reads the pose and the wrench sensor, scores the
//! wrench against the policy's prediction, then holds one command for 20
//! physics steps of the impedance-controlled body. A base episode runs the
//! policy until success, jam or timeout. A TER episode pauses on the first
//! detector trigger: stiffness drops to zero and a simulated hand drags the
//! peg to the approach point above the true socket. The straight-in
//! demonstration from there is aligned, the transition is optimized, residual
//! samples are generated, and the rest of the corrected trajectory (the
//! demonstration) is replayed with stiffness restored. A corrector episode
//! adds looked-up residuals to every base action and never intervenes.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::corrector::LookupCorrector;
use super::policy::{PolicyConfig, ScriptedBasePolicy};
use super::scene::{contact_wrench, SceneConfig, Socket};
use crate::alignment::AlignmentWeights;
use crate::detector::{force_error, position_error, DetectorConfig, StreamingDetector};
use crate::editor::{correct, Correction, EditConfig};
use crate::error::{Error, Result};
use crate::geometry::{rotation, rotation_vector, slerp, Pose, Trajectory, Twist, Wrench, DEFAULT_DT};
use crate::impedance::{impedance_wrench, pose_error, step_task_body, BodyParams, ImpedanceParams, TaskSpaceBody};
use crate::residual::{compose_action, generate_samples, BasePolicy, EditRecord, ResidualSample, SampleConfig, EXECUTED_HORIZON, PREDICTION_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub k_trans: f64,
    pub k_rot: f64,
    pub mass: f64,
    pub inertia: [f64; 3],
    pub physics_dt: f64,
    pub command_dt: f64,
    /// Feed the command velocity forward as the desired twist.
    pub feedforward: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            k_trans: 1000.0,
            k_rot: 30.0,
            mass: 1.0,
            inertia: [0.005; 3],
            physics_dt: 0.001,
            command_dt: DEFAULT_DT,
            feedforward: true,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        self.body().validate()?;
        self.impedance()?;
        if !(self.physics_dt > 0.0 && self.command_dt >= self.physics_dt) {
            return Err(Error::invalid("control periods must satisfy 0 < physics_dt <= command_dt"));
        }
        Ok(())
    }

    pub fn body(&self) -> BodyParams {
        BodyParams {
            mass: self.mass,
            inertia: self.inertia,
        }
    }

    /// Diagonal gains, critically damped for the body.
    pub fn impedance(&self) -> Result<ImpedanceParams> {
        ImpedanceParams::critically_damped(self.k_trans, self.k_rot, self.mass, Vector3::from(self.inertia))
    }

    pub fn substeps(&self) -> usize {
        (self.command_dt / self.physics_dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailureConfig {
    pub max_steps: usize,
    /// Contact force magnitude that counts as pushing.
    pub jam_force: f64,
    /// Control steps of sustained force checked for progress.
    pub jam_window: usize,
    /// Minimum descent over the window.
    pub jam_progress: f64,
}

impl Default for FailureConfig {
    fn default() -> Self {
        FailureConfig {
            max_steps: 1000,
            jam_force: 8.0,
            jam_window: 50,
            jam_progress: 5e-4,
        }
    }
}

/// The simulated human: how the peg is dragged back and how the corrective
/// insertion is demonstrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    /// Height above the true socket where the demonstration starts.
    pub retreat_height: f64,
    pub final_depth: f64,
    /// Path length per demonstration sample.
    pub step_length: f64,
    /// Sampling period of the recorded demonstration.
    pub dt: f64,
    /// Standard deviation of position noise on demonstration poses after the first.
    pub noise_std: f64,
    pub hand_stiffness: f64,
    pub hand_speed: f64,
    pub settle_tol: f64,
    pub max_pause_steps: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            retreat_height: 0.08,
            final_depth: 0.02,
            step_length: 0.001,
            dt: DEFAULT_DT,
            noise_std: 0.0,
            hand_stiffness: 2000.0,
            hand_speed: 0.002,
            settle_tol: 2e-4,
            max_pause_steps: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeConfig {
    pub scene: SceneConfig,
    pub policy: PolicyConfig,
    pub detector: DetectorConfig,
    pub alignment: AlignmentWeights,
    pub edit: EditConfig,
    pub samples: SampleConfig,
    pub control: ControlConfig,
    pub failure: FailureConfig,
    pub demo: DemoConfig,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.policy.validate()?;
        self.detector.validate()?;
        self.alignment.validate()?;
        self.edit.validate()?;
        self.control.validate()?;
        if self.failure.jam_window == 0 || self.failure.max_steps == 0 {
            return Err(Error::invalid("failure.max_steps and failure.jam_window must be >= 1"));
        }
        let d = &self.demo;
        for (name, v) in [
            ("retreat_height", d.retreat_height),
            ("final_depth", d.final_depth),
            ("step_length", d.step_length),
            ("dt", d.dt),
            ("hand_stiffness", d.hand_stiffness),
            ("hand_speed", d.hand_speed),
            ("settle_tol", d.settle_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("demo.{name} must be > 0, got {v}")));
            }
        }
        if !(d.noise_std.is_finite() && d.noise_std >= 0.0) {
            return Err(Error::invalid("demo.noise_std must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Auto,
    Paused,
    Corrected,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Auto => "auto",
            Mode::Paused => "paused",
            Mode::Corrected => "corrected",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "paused" => Ok(Mode::Paused),
            "corrected" => Ok(Mode::Corrected),
            other => Err(Error::invalid(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Jam,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Jam => "jam",
            Outcome::Timeout => "timeout",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "success" => Ok(Outcome::Success),
            "jam" => Ok(Outcome::Jam),
            "timeout" => Ok(Outcome::Timeout),
            other => Err(Error::invalid(format!("unknown outcome '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub mode: Mode,
    pub commanded: Pose,
    pub measured: Pose,
    pub predicted_wrench: Wrench,
    pub measured_wrench: Wrench,
    /// Force prediction error.
    pub score: f64,
    /// Distance between the base action and the measured pose.
    pub position_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intervention {
    pub trigger_step: usize,
    pub resume_step: usize,
    pub k_star: usize,
    pub n_points: usize,
    pub junction_max_step: f64,
    pub base_median_step: f64,
}

impl Intervention {
    pub fn junction_ratio(&self) -> f64 {
        self.junction_max_step / self.base_median_step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub seed: u64,
    pub socket: Vector3<f64>,
    pub believed_socket: Vector3<f64>,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    /// First step at which the detector fired, whether or not it caused an intervention.
    pub detector_trigger: Option<usize>,
    pub intervention: Option<Intervention>,
}

impl EpisodeLog {
    pub fn max_score(&self) -> f64 {
        self.records.iter().map(|r| r.score).fold(0.0, f64::max)
    }

    pub fn max_position_score(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.mode == Mode::Auto)
            .map(|r| r.position_score)
            .fold(0.0, f64::max)
    }

    /// Modes only ever advance auto, paused, corrected.
    pub fn modes_are_ordered(&self) -> bool {
        self.records.windows(2).all(|w| w[0].mode <= w[1].mode)
    }
}

#[derive(Clone, Copy)]
pub enum RunMode<'a> {
    Base,
    Ter,
    Corrector(&'a LookupCorrector),
}

impl RunMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Base => "base",
            RunMode::Ter => "ter",
            RunMode::Corrector(_) => "corrector",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub config: EpisodeConfig,
    pub log: EpisodeLog,
    pub samples: Vec<ResidualSample>,
    /// Base rollout up to the trigger, the demonstration and the correction.
    pub base_rollout: Option<Trajectory>,
    pub demo: Option<Trajectory>,
    pub correction: Option<Correction>,
}

impl Episode {
    pub fn succeeded(&self) -> bool {
        self.log.outcome == Outcome::Success
    }
}

struct Physics<'a> {
    cfg: &'a EpisodeConfig,
    socket: Socket,
    body: TaskSpaceBody,
    gains: ImpedanceParams,
}

impl Physics<'_> {
    fn sensed(&self) -> Wrench {
        contact_wrench(&self.body.pose, &self.body.twist, &self.socket, &self.cfg.scene)
    }

    /// Holds `cmd` for one control period. `hand` is an optional
    /// `(target, stiffness)` pulling the body.
    fn advance(&mut self, cmd: &Pose, twist_d: &Twist, stiff: bool, hand: Option<(&Pose, f64)>) -> Result<Wrench> {
        let gains = if stiff { self.gains } else { self.gains.without_stiffness() };
        let dt = self.cfg.control.physics_dt;
        for _ in 0..self.cfg.control.substeps() {
            let contact = self.sensed();
            let human = match hand {
                Some((target, k)) => {
                    let m = self.cfg.control.mass;
                    let e = pose_error(target, &self.body.pose);
                    let (kr, i) = (k * 0.01, self.cfg.control.inertia[0]);
                    let mut f = Twist::zeros();
                    for a in 0..3 {
                        f[a] = k * e[a] - 2.0 * (k * m).sqrt() * self.body.twist[a];
                        f[a + 3] = kr * e[a + 3] - 2.0 * (kr * i).sqrt() * self.body.twist[a + 3];
                    }
                    Wrench::from_vector(&f)
                }
                None => Wrench::zero(),
            };
            let external = contact + human;
            let command = impedance_wrench(cmd, twist_d, &self.body.pose, &self.body.twist, &gains);
            self.body = step_task_body(&self.body, &command, &external, dt)?;
        }
        Ok(self.sensed())
    }
}

fn command_twist(prev: &Pose, next: &Pose, dt: f64) -> Twist {
    let v = (next.position() - prev.position()) / dt;
    let w = rotation_vector(&(next.orientation() * prev.orientation().inverse())) / dt;
    Twist::new(v.x, v.y, v.z, w.x, w.y, w.z)
}

/// Straight-in demonstration from `start` to the final depth in the true socket.
fn synthesize_demo<R: Rng>(start: &Pose, socket: &Socket, d: &DemoConfig, rng: &mut R) -> Result<Trajectory> {
    let end = Pose::from_position(socket.center - Vector3::new(0.0, 0.0, d.final_depth));
    let length = (end.position() - start.position()).norm();
    let n = (length / d.step_length).ceil().max(1.0) as usize;
    let noise = Normal::new(0.0, d.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut poses = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut p = slerp(start, &end, i as f64 / n as f64);
        if i > 0 && d.noise_std > 0.0 {
            let jitter = Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            p = p.translated(&jitter);
        }
        poses.push(p);
    }
    Trajectory::new(d.dt, poses)
}

/// Runs one seeded episode.
pub fn run_episode(seed: u64, cfg: &EpisodeConfig, mode: RunMode<'_>) -> Result<Episode> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let socket = Socket::new(cfg.scene.sample_socket(&mut rng));
    let belief_noise = Normal::new(0.0, cfg.policy.belief_noise).map_err(|e| Error::invalid(e.to_string()))?;
    let believed = Socket::new(
        socket.center
            + Vector3::from(cfg.policy.belief_bias)
            + Vector3::new(belief_noise.sample(&mut rng), belief_noise.sample(&mut rng), 0.0),
    );
    let start = Pose::new(
        Vector3::from(cfg.scene.socket_center) + Vector3::new(0.0, 0.0, cfg.scene.start_height),
        rotation(Vector3::z(), cfg.policy.start_yaw_deg.to_radians()),
    );
    let policy = ScriptedBasePolicy::new(&start, believed, &cfg.policy, &cfg.scene)?;
    let mut physics = Physics {
        cfg,
        socket,
        body: TaskSpaceBody::new(cfg.control.body(), start)?,
        gains: cfg.control.impedance()?,
    };

    let mut detector = StreamingDetector::new(cfg.detector);
    let mut records: Vec<StepRecord> = Vec::new();
    let mut sensed = physics.sensed();
    let mut current = Mode::Auto;
    let mut chunk: Vec<Pose> = Vec::new();
    let mut chunk_start = 0;
    let mut last_command = start;
    let mut last_base_action = start;
    let mut outcome = Outcome::Timeout;
    let mut detector_trigger = None;
    let mut intervention = None;
    let mut samples = Vec::new();
    let (mut base_rollout, mut demo, mut correction) = (None, None, None);
    let mut hand_path: Vec<Pose> = Vec::new();
    let mut paused_for = 0;
    let mut replay: Vec<Pose> = Vec::new();
    let mut replay_at = 0;
    let dt = cfg.control.command_dt;

    for step in 0..cfg.failure.max_steps {
        let x = physics.body.pose;
        let predicted = policy.query_wrench(&x, step);
        let score = force_error(&predicted, &sensed);

        if current == Mode::Auto && (step % EXECUTED_HORIZON == 0 || chunk.is_empty()) {
            let from = if step == 0 { x } else { last_base_action };
            chunk = policy.chunk(&from, step, PREDICTION_HORIZON);
            chunk_start = step;
        }
        let base_action = if current == Mode::Auto { chunk[step - chunk_start] } else { last_base_action };

        let fired = detector.push(score);
        if fired && detector_trigger.is_none() {
            detector_trigger = Some(step);
            if matches!(mode, RunMode::Ter) && current == Mode::Auto {
                current = Mode::Paused;
                let mut rollout: Vec<Pose> = records.iter().map(|r| r.measured).collect();
                rollout.push(x);
                base_rollout = Some(Trajectory::new(dt, rollout)?);
                let h = Pose::from_position(socket.center + Vector3::new(0.0, 0.0, cfg.demo.retreat_height));
                let n = ((h.position() - x.position()).norm() / cfg.demo.hand_speed).ceil().max(1.0) as usize;
                hand_path = (1..=n).map(|i| slerp(&x, &h, i as f64 / n as f64)).collect();
            }
        }

        if socket.inserted(&x, &cfg.scene) {
            outcome = Outcome::Success;
        }

        if current == Mode::Paused && paused_for >= hand_path.len() {
            let h = *hand_path.last().expect("hand path is never empty");
            let settled = pose_error(&h, &x).fixed_rows::<3>(0).norm() < cfg.demo.settle_tol
                && physics.body.twist.fixed_rows::<3>(0).norm() < 1e-3;
            if settled || paused_for >= hand_path.len() + cfg.demo.max_pause_steps {
                let trigger = detector_trigger.expect("paused only after a trigger");
                let base = base_rollout.as_ref().expect("rollout recorded at trigger");
                let d = synthesize_demo(&h, &socket, &cfg.demo, &mut rng)?;
                let c = correct(base, &d, &cfg.alignment, &cfg.edit)?;
                let record = EditRecord::from_correction(base, &c);
                samples = generate_samples(&record, &policy, &cfg.samples)?;
                replay = c.corrected.poses()[c.k_star()..].to_vec();
                replay_at = 0;
                intervention = Some(Intervention {
                    trigger_step: trigger,
                    resume_step: step,
                    k_star: c.k_star(),
                    n_points: c.n_effective(),
                    junction_max_step: c.junction_max_step(),
                    base_median_step: base.median_step(),
                });
                demo = Some(c.demo.clone());
                correction = Some(c);
                current = Mode::Corrected;
                last_command = x;
            }
        }

        let command = match current {
            Mode::Auto => match mode {
                RunMode::Corrector(c) => compose_action(&base_action, &c.lookup(&x).residual),
                _ => base_action,
            },
            Mode::Paused => x,
            Mode::Corrected => {
                replay_at = (replay_at + 1).min(replay.len() - 1);
                replay[replay_at]
            }
        };

        records.push(StepRecord {
            step,
            time: step as f64 * dt,
            mode: current,
            commanded: command,
            measured: x,
            predicted_wrench: predicted,
            measured_wrench: sensed,
            score,
            position_score: position_error(&base_action, &x),
        });
        if outcome == Outcome::Success {
            break;
        }
        if current != Mode::Paused && jammed(&records, &cfg.failure) {
            outcome = Outcome::Jam;
            break;
        }

        sensed = match current {
            Mode::Paused => {
                let target = hand_path[paused_for.min(hand_path.len() - 1)];
                paused_for += 1;
                physics.advance(&x, &Twist::zeros(), false, Some((&target, cfg.demo.hand_stiffness)))?
            }
            _ => {
                let twist_d = if cfg.control.feedforward && step > 0 {
                    command_twist(&last_command, &command, dt)
                } else {
                    Twist::zeros()
                };
                physics.advance(&command, &twist_d, true, None)?
            }
        };
        last_command = command;
        if current == Mode::Auto {
            last_base_action = base_action;
        }
    }

    Ok(Episode {
        config: *cfg,
        log: EpisodeLog {
            seed,
            socket: socket.center,
            believed_socket: believed.center,
            records,
            outcome,
            detector_trigger,
            intervention,
        },
        samples,
        base_rollout,
        demo,
        correction,
    })
}

/// Sustained contact force over the window with too little descent.
fn jammed(records: &[StepRecord], f: &FailureConfig) -> bool {
    if records.len() <= f.jam_window {
        return false;
    }
    let window = &records[records.len() - 1 - f.jam_window..];
    let pushing = window[1..].iter().all(|r| r.measured_wrench.force.norm() >= f.jam_force);
    let descent = window[0].measured.position().z - window[f.jam_window].measured.position().z;
    pushing && descent < f.jam_progress
}
