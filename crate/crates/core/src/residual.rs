//! Residual labels built from a corrected trajectory.
//!
//! A residual is a position offset plus a relative rotation. Composition adds
//! the offset and left-multiplies the rotation, `q = dq * q_base`, which makes
//! [`compose_action`] and [`residual_between`] exact inverses of each other.
//!
//! Four regions of samples come out of one correction:
//!
//! | region       | steps `t`             | state       | target              |
//! |--------------|-----------------------|-------------|---------------------|
//! | `PreEdit`    | `0 ..= k*-N-1`        | `base[t]`   | zero residual       |
//! | `Transition` | `k*-N ..= k*-1`       | `base[t]`   | `segment[t+1]`      |
//! | `HumanDemo`  | `0 ..= n_h-2`         | `human[t]`  | `human[t+1]`        |
//! | `PostEdit`   | `k* ..= n_b-2`        | `base[t]`   | closest human pose  |

use std::fmt;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::editor::{Correction, JUNCTION_TOL};
use crate::error::{Error, Result};
use crate::geometry::{canonical_unit, position_distance, quaternion_distance, Pose, Trajectory, Wrench};

/// Poses predicted per base-policy inference.
pub const PREDICTION_HORIZON: usize = 100;
/// Poses executed before the base policy replans.
pub const EXECUTED_HORIZON: usize = 50;

/// The base policy as seen by the data generator.
///
/// `step` is the control-step index on the corrected timeline; a policy that
/// replans in chunks starts a new chunk whenever `step % EXECUTED_HORIZON == 0`.
/// Implementations must be deterministic.
pub trait BasePolicy {
    /// Next action `A_{t+1}` predicted at `state`.
    fn query(&self, state: &Pose, step: usize) -> Pose;
    /// Wrench the policy expects to measure at `state`.
    fn query_wrench(&self, state: &Pose, step: usize) -> Wrench;
}

impl<P: BasePolicy + ?Sized> BasePolicy for &P {
    fn query(&self, state: &Pose, step: usize) -> Pose {
        (**self).query(state, step)
    }
    fn query_wrench(&self, state: &Pose, step: usize) -> Wrench {
        (**self).query_wrench(state, step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub dp: Vector3<f64>,
    pub dq: UnitQuaternion<f64>,
}

impl Residual {
    pub fn zero() -> Self {
        Residual {
            dp: Vector3::zeros(),
            dq: UnitQuaternion::identity(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dp == Vector3::zeros() && self.dq == UnitQuaternion::identity()
    }

    /// Scalar-first components of the rotation part.
    pub fn dq_wxyz(&self) -> [f64; 4] {
        [self.dq.w, self.dq.i, self.dq.j, self.dq.k]
    }
}

impl Default for Residual {
    fn default() -> Self {
        Residual::zero()
    }
}

/// Executed action: base position plus offset, residual rotation applied on the left.
pub fn compose_action(base_action: &Pose, residual: &Residual) -> Pose {
    if residual.is_zero() {
        return *base_action;
    }
    let q = residual.dq.into_inner() * base_action.orientation().into_inner();
    Pose::new(base_action.position() + residual.dp, canonical_unit(q))
}

/// The residual that takes `base_action` to `target`.
pub fn residual_between(target: &Pose, base_action: &Pose) -> Residual {
    let dq = target.orientation().into_inner() * base_action.orientation().into_inner().conjugate();
    Residual {
        dp: target.position() - base_action.position(),
        dq: canonical_unit(dq),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    PreEdit,
    Transition,
    HumanDemo,
    PostEdit,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::PreEdit, Region::Transition, Region::HumanDemo, Region::PostEdit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::PreEdit => "pre",
            Region::Transition => "transition",
            Region::HumanDemo => "demo",
            Region::PostEdit => "post",
        }
    }

    fn bit(&self) -> u8 {
        1 << (*self as u8)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pre" => Ok(Region::PreEdit),
            "transition" => Ok(Region::Transition),
            "demo" => Ok(Region::HumanDemo),
            "post" => Ok(Region::PostEdit),
            other => Err(Error::invalid(format!(
                "unknown region '{other}' (expected pre, transition, demo or post)"
            ))),
        }
    }
}

/// Subset of [`Region`]s; parsed from and printed as a comma list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionSet(u8);

impl RegionSet {
    pub fn all() -> Self {
        RegionSet(0b1111)
    }

    pub fn empty() -> Self {
        RegionSet(0)
    }

    pub fn only(regions: &[Region]) -> Self {
        RegionSet(regions.iter().fold(0, |m, r| m | r.bit()))
    }

    pub fn contains(&self, r: Region) -> bool {
        self.0 & r.bit() != 0
    }

    pub fn with(self, r: Region) -> Self {
        RegionSet(self.0 | r.bit())
    }

    pub fn without(self, r: Region) -> Self {
        RegionSet(self.0 & !r.bit())
    }

    pub fn iter(&self) -> impl Iterator<Item = Region> + '_ {
        Region::ALL.into_iter().filter(|r| self.contains(*r))
    }
}

impl Default for RegionSet {
    fn default() -> Self {
        RegionSet::all()
    }
}

impl fmt::Display for RegionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(|r| r.as_str()).collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

impl FromStr for RegionSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" || s.is_empty() {
            return Ok(RegionSet::empty());
        }
        if s == "all" {
            return Ok(RegionSet::all());
        }
        s.split([',', '+'])
            .try_fold(RegionSet::empty(), |set, part| Ok(set.with(part.parse()?)))
    }
}

impl Serialize for RegionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RegionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One supervised tuple. Image observations are not modeled; `attachment`
/// carries an opaque observation payload for downstream learners and is not
/// written by the text formats.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub region: Region,
    pub step_index: usize,
    pub state: Pose,
    pub base_action: Pose,
    pub residual: Residual,
    pub attachment: Option<Vec<u8>>,
}

impl ResidualSample {
    /// The action the label asks for.
    pub fn target(&self) -> Pose {
        compose_action(&self.base_action, &self.residual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub regions: RegionSet,
    /// Orientation weight of the post-edit matcher `d_p + w * d_q`.
    pub post_edit_q_weight: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            regions: RegionSet::all(),
            post_edit_q_weight: 0.5,
        }
    }
}

/// Borrowed view of one edit: the base rollout, the demonstration (at the
/// base period), the optimized segment and the assembled corrected trajectory.
#[derive(Debug, Clone, Copy)]
pub struct EditRecord<'a> {
    pub base: &'a Trajectory,
    pub corrected: &'a Trajectory,
    pub segment: &'a Trajectory,
    pub human: &'a Trajectory,
    pub k_star: usize,
    pub n: usize,
}

impl<'a> EditRecord<'a> {
    pub fn from_correction(base: &'a Trajectory, c: &'a Correction) -> Self {
        EditRecord {
            base,
            corrected: &c.corrected,
            segment: &c.edit.segment,
            human: &c.demo,
            k_star: c.k_star(),
            n: c.n_effective(),
        }
    }

    fn check(&self) -> Result<()> {
        let (k, n) = (self.k_star, self.n);
        if n > k {
            return Err(Error::inconsistent(format!("N = {n} exceeds k* = {k}")));
        }
        if k >= self.base.len() {
            return Err(Error::inconsistent(format!(
                "k* = {k} out of range for base of length {}",
                self.base.len()
            )));
        }
        if self.segment.len() != n + 1 {
            return Err(Error::inconsistent(format!(
                "segment has {} poses, expected {}",
                self.segment.len(),
                n + 1
            )));
        }
        let gap = position_distance(self.segment.last(), self.human.first());
        if gap > JUNCTION_TOL {
            return Err(Error::inconsistent(format!(
                "segment ends {gap:.3e} m from the demonstration start"
            )));
        }
        if self.corrected.len() != k + self.human.len() {
            return Err(Error::inconsistent(format!(
                "corrected trajectory has {} poses, expected k* + n_h = {}",
                self.corrected.len(),
                k + self.human.len()
            )));
        }
        let same = |a: &Pose, b: &Pose| position_distance(a, b) <= 1e-9 && quaternion_distance(a, b) <= 1e-9;
        let c = self.corrected.poses();
        let prefix_ok = c[..k - n].iter().zip(self.base.poses()).all(|(a, b)| same(a, b));
        let segment_ok = c[k - n..=k].iter().zip(self.segment.poses()).all(|(a, b)| same(a, b));
        if !(prefix_ok && segment_ok) {
            return Err(Error::inconsistent("corrected trajectory is not base prefix ++ segment ++ demo"));
        }
        Ok(())
    }
}

/// Index of the human pose closest to `action` under `d_p + w_q * d_q`,
/// ties to the earliest pose.
pub fn match_human_pose(human: &[Pose], action: &Pose, w_q: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, h) in human.iter().enumerate() {
        let d = position_distance(h, action) + w_q * quaternion_distance(h, action);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Builds the residual samples of every enabled region, in region order
/// and increasing step within each region.
pub fn generate_samples<P: BasePolicy + ?Sized>(
    record: &EditRecord<'_>,
    policy: &P,
    cfg: &SampleConfig,
) -> Result<Vec<ResidualSample>> {
    record.check()?;
    let base = record.base.poses();
    let human = record.human.poses();
    let segment = record.segment.poses();
    let (k, n) = (record.k_star, record.n);
    let start = k - n;
    let mut out = Vec::new();

    let mut push = |region, t: usize, state: Pose, base_action: Pose, residual: Residual| {
        out.push(ResidualSample {
            region,
            step_index: t,
            state,
            base_action,
            residual,
            attachment: None,
        })
    };

    if cfg.regions.contains(Region::PreEdit) {
        for t in 0..start {
            let a = policy.query(&base[t], t);
            push(Region::PreEdit, t, base[t], a, Residual::zero());
        }
    }
    if cfg.regions.contains(Region::Transition) {
        for t in start..k {
            let a = policy.query(&base[t], t);
            let target = segment[t + 1 - start];
            push(Region::Transition, t, base[t], a, residual_between(&target, &a));
        }
    }
    if cfg.regions.contains(Region::HumanDemo) {
        for t in 0..human.len().saturating_sub(1) {
            // the demonstration occupies steps k*.. of the corrected timeline
            let a = policy.query(&human[t], k + t);
            push(Region::HumanDemo, t, human[t], a, residual_between(&human[t + 1], &a));
        }
    }
    if cfg.regions.contains(Region::PostEdit) {
        for t in k..base.len().saturating_sub(1) {
            let a = policy.query(&base[t], t);
            let matched = human[match_human_pose(human, &a, cfg.post_edit_q_weight)];
            push(Region::PostEdit, t, base[t], a, residual_between(&matched, &a));
        }
    }
    Ok(out)
}

/// Follows a recorded trajectory: the prediction at a state is the recorded
/// pose after the closest recorded pose. Used when only trajectory files are
/// available (no live policy). Ties go to the index closest to `step`.
#[derive(Debug, Clone)]
pub struct TrajectoryPolicy {
    traj: Trajectory,
    q_weight: f64,
}

impl TrajectoryPolicy {
    pub fn new(traj: Trajectory) -> Self {
        TrajectoryPolicy { traj, q_weight: 0.5 }
    }

    fn nearest(&self, state: &Pose, step: usize) -> usize {
        let mut best = (f64::INFINITY, usize::MAX, 0);
        for (i, p) in self.traj.poses().iter().enumerate() {
            let d = position_distance(p, state) + self.q_weight * quaternion_distance(p, state);
            let gap = i.abs_diff(step);
            if d < best.0 || (d == best.0 && gap < best.1) {
                best = (d, gap, i);
            }
        }
        best.2
    }
}

impl BasePolicy for TrajectoryPolicy {
    fn query(&self, state: &Pose, step: usize) -> Pose {
        let i = self.nearest(state, step);
        self.traj.poses()[(i + 1).min(self.traj.len() - 1)]
    }

    fn query_wrench(&self, state: &Pose, step: usize) -> Wrench {
        let i = self.nearest(state, step);
        self.traj.wrenches().map(|w| w[i]).unwrap_or_default()
    }
}
