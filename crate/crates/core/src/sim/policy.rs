//! Scripted stand-in for the learned base policy.
//!
//! The plan is a polyline: start pose, a point above the believed socket,
//! then straight down into the believed hole. A query projects the state
//! onto the plan and returns the plan pose one step further along it. The
//! orientation turns from the start orientation to identity over the first
//! leg. The predicted wrench is the contact wrench the plan pose would feel if
//! the socket were where the policy believes it is.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::scene::{contact_wrench, SceneConfig, Socket};
use crate::error::{Error, Result};
use crate::geometry::{slerp_quat, Pose, Twist, Wrench};
use crate::residual::BasePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Systematic error of the believed socket position.
    pub belief_bias: [f64; 3],
    /// Standard deviation of per-episode belief noise in x and y.
    pub belief_noise: f64,
    pub approach_height: f64,
    /// Depth below the socket top at which the plan ends.
    pub final_depth: f64,
    /// Path length advanced per control step.
    pub step_length: f64,
    /// Yaw of the start orientation.
    pub start_yaw_deg: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            belief_bias: [0.0; 3],
            belief_noise: 2e-4,
            approach_height: 0.08,
            final_depth: 0.02,
            step_length: 0.001,
            start_yaw_deg: 10.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.belief_bias.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("policy.belief_bias must be finite"));
        }
        if !(self.belief_noise.is_finite() && self.belief_noise >= 0.0) {
            return Err(Error::invalid("policy.belief_noise must be >= 0"));
        }
        for (name, v) in [
            ("approach_height", self.approach_height),
            ("final_depth", self.final_depth),
            ("step_length", self.step_length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("policy.{name} must be > 0, got {v}")));
            }
        }
        if !self.start_yaw_deg.is_finite() {
            return Err(Error::invalid("policy.start_yaw_deg must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBasePolicy {
    points: [Vector3<f64>; 3],
    /// Arc length at each polyline vertex.
    arc: [f64; 3],
    start_q: UnitQuaternion<f64>,
    step_length: f64,
    believed: Socket,
    scene: SceneConfig,
}

impl ScriptedBasePolicy {
    pub fn new(start: &Pose, believed: Socket, cfg: &PolicyConfig, scene: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let approach = believed.center + Vector3::new(0.0, 0.0, cfg.approach_height);
        let end = believed.center - Vector3::new(0.0, 0.0, cfg.final_depth);
        let points = [*start.position(), approach, end];
        let l1 = (approach - start.position()).norm();
        let l2 = (end - approach).norm();
        Ok(ScriptedBasePolicy {
            points,
            arc: [0.0, l1, l1 + l2],
            start_q: *start.orientation(),
            step_length: cfg.step_length,
            believed,
            scene: *scene,
        })
    }

    pub fn believed_socket(&self) -> &Socket {
        &self.believed
    }

    pub fn path_length(&self) -> f64 {
        self.arc[2]
    }

    /// Arc length of the plan point closest to `p`; ties go to the earlier point.
    pub fn project(&self, p: &Vector3<f64>) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..2 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let len = self.arc[i + 1] - self.arc[i];
            let t = if len > 0.0 {
                ((p - a).dot(&(b - a)) / (len * len)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = (a + (b - a) * t - p).norm();
            if d < best.0 {
                best = (d, self.arc[i] + t * len);
            }
        }
        best.1
    }

    /// Plan pose at arc length `s`, clamped to the plan.
    pub fn pose_at(&self, s: f64) -> Pose {
        let s = s.clamp(0.0, self.arc[2]);
        let (i, t) = if s <= self.arc[1] {
            let len = self.arc[1];
            (0, if len > 0.0 { s / len } else { 1.0 })
        } else {
            let len = self.arc[2] - self.arc[1];
            (1, if len > 0.0 { (s - self.arc[1]) / len } else { 1.0 })
        };
        let p = self.points[i] + (self.points[i + 1] - self.points[i]) * t;
        let q = if i == 0 {
            slerp_quat(&self.start_q, &UnitQuaternion::identity(), t)
        } else {
            UnitQuaternion::identity()
        };
        Pose::new(p, q)
    }

    /// `n` actions from `from`, each one query after the previous.
    pub fn chunk(&self, from: &Pose, step: usize, n: usize) -> Vec<Pose> {
        let mut out = Vec::with_capacity(n);
        let mut cur = *from;
        for i in 0..n {
            cur = self.query(&cur, step + i);
            out.push(cur);
        }
        out
    }
}

impl BasePolicy for ScriptedBasePolicy {
    fn query(&self, state: &Pose, _step: usize) -> Pose {
        self.pose_at(self.project(state.position()) + self.step_length)
    }

    fn query_wrench(&self, state: &Pose, _step: usize) -> Wrench {
        let planned = self.pose_at(self.project(state.position()));
        contact_wrench(&planned, &Twist::zeros(), &self.believed, &self.scene)
    }
}
