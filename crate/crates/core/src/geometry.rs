//! Poses, wrenches and uniformly sampled trajectories.
//!
//! Quaternions are stored scalar-first `(w, x, y, z)` and kept on the
//! `w >= 0` hemisphere. Distances follow the conventions used by the
//! alignment and editing code: Euclidean distance for positions and
//! `1 - |<qa, qb>|` for orientations.

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};

/// Nominal control period (50 Hz).
pub const DEFAULT_DT: f64 = 0.02;

/// Linear velocity followed by angular velocity, both in the world frame.
pub type Twist = Vector6<f64>;

// Squared-norm deviation tolerated before a quaternion is renormalized.
// Large enough to absorb a few ulps of product round-off, small enough that
// stored values stay unit within 1e-9.
const RENORM_TOL: f64 = 1e-14;

/// Brings a quaternion to unit norm and onto the `w >= 0` hemisphere.
///
/// When `w == 0` the first nonzero vector component is made nonnegative.
pub fn canonicalize(q: Quaternion<f64>) -> Result<UnitQuaternion<f64>> {
    let n2 = q.norm_squared();
    if !n2.is_finite() || n2 < 1e-300 {
        return Err(Error::DegenerateQuaternion {
            w: q.w,
            x: q.i,
            y: q.j,
            z: q.k,
        });
    }
    let mut q = if (n2 - 1.0).abs() > RENORM_TOL {
        q / n2.sqrt()
    } else {
        q
    };
    if needs_flip(&q) {
        q = -q;
    }
    Ok(UnitQuaternion::new_unchecked(q))
}

fn needs_flip(q: &Quaternion<f64>) -> bool {
    if q.w != 0.0 {
        return q.w < 0.0;
    }
    for c in [q.i, q.j, q.k] {
        if c != 0.0 {
            return c < 0.0;
        }
    }
    false
}

/// Canonicalizes a quaternion that is known to be close to unit norm.
pub(crate) fn canonical_unit(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    canonicalize(q).expect("quaternion built from unit factors")
}

/// End-effector pose: position in meters and a canonical unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation: canonical_unit(orientation.into_inner()),
        }
    }

    /// Builds a pose from a raw scalar-first quaternion, normalizing it.
    pub fn from_wxyz(position: Vector3<f64>, wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Ok(Pose {
            position,
            orientation: canonicalize(q)?,
        })
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Pose {
            position,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn identity() -> Self {
        Pose::from_position(Vector3::zeros())
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    /// Scalar-first quaternion components.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn with_position(&self, position: Vector3<f64>) -> Self {
        Pose {
            position,
            orientation: self.orientation,
        }
    }

    pub fn with_orientation(&self, orientation: UnitQuaternion<f64>) -> Self {
        Pose::new(self.position, orientation)
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Self {
        self.with_position(self.position + delta)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

/// Force (N) and torque (N·m) at the end effector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Wrench { force, torque }
    }

    pub fn zero() -> Self {
        Wrench::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Wrench {
            force: Vector3::new(v[0], v[1], v[2]),
            torque: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force + rhs.force, self.torque + rhs.torque)
    }
}

impl std::ops::Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.force - rhs.force, self.torque - rhs.torque)
    }
}

/// Uniformly time-stamped pose sequence with optional per-step wrenches.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    poses: Vec<Pose>,
    wrenches: Option<Vec<Wrench>>,
}

impl Trajectory {
    pub fn new(dt: f64, poses: Vec<Pose>) -> Result<Self> {
        Self::with_wrenches(dt, poses, None)
    }

    pub fn with_wrenches(dt: f64, poses: Vec<Pose>, wrenches: Option<Vec<Wrench>>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTimeStep(dt));
        }
        if poses.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if let Some(w) = &wrenches {
            if w.len() != poses.len() {
                return Err(Error::LengthMismatch {
                    poses: poses.len(),
                    wrenches: w.len(),
                });
            }
        }
        Ok(Trajectory { dt, poses, wrenches })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn wrenches(&self) -> Option<&[Wrench]> {
        self.wrenches.as_deref()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> &Pose {
        &self.poses[0]
    }

    pub fn last(&self) -> &Pose {
        &self.poses[self.poses.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        (self.poses.len() - 1) as f64 * self.dt
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    /// Sub-trajectory over `range`; wrenches are sliced alongside poses.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Trajectory> {
        if range.end > self.len() || range.start >= range.end {
            return Err(Error::invalid(format!(
                "slice {}..{} out of bounds for trajectory of length {}",
                range.start,
                range.end,
                self.len()
            )));
        }
        Trajectory::with_wrenches(
            self.dt,
            self.poses[range.clone()].to_vec(),
            self.wrenches.as_ref().map(|w| w[range].to_vec()),
        )
    }

    /// Largest position step between consecutive poses.
    pub fn max_step(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| position_distance(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }

    /// Median position step between consecutive poses (zero for one pose).
    pub fn median_step(&self) -> f64 {
        let mut steps: Vec<f64> = self
            .poses
            .windows(2)
            .map(|w| position_distance(&w[0], &w[1]))
            .collect();
        if steps.is_empty() {
            return 0.0;
        }
        steps.sort_by(f64::total_cmp);
        let m = steps.len();
        if m % 2 == 1 {
            steps[m / 2]
        } else {
            0.5 * (steps[m / 2 - 1] + steps[m / 2])
        }
    }
}

/// `||pa - pb||_2` in meters.
pub fn position_distance(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm()
}

/// `1 - |<qa, qb>|`, in `[0, 1]`; insensitive to quaternion sign.
pub fn quaternion_distance(a: &Pose, b: &Pose) -> f64 {
    quat_distance(&a.orientation, &b.orientation)
}

pub(crate) fn quat_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // stored quaternions may sit up to 1e-14 off unit norm
    if a == b {
        return 0.0;
    }
    let d = a.coords.dot(&b.coords).abs().min(1.0);
    1.0 - d
}

/// Spherical interpolation along the shorter arc.
pub(crate) fn slerp_quat(
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    t: f64,
) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let mut qb = b.into_inner();
    let mut dot = qa.coords.dot(&qb.coords);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let q = if dot > 1.0 - 1e-12 {
        let q = qa * (1.0 - t) + qb * t;
        q / q.norm()
    } else {
        let theta = dot.min(1.0).acos();
        let s = theta.sin();
        qa * (((1.0 - t) * theta).sin() / s) + qb * ((t * theta).sin() / s)
    };
    canonical_unit(q)
}

/// Linear interpolation of position, shortest-arc slerp of orientation.
pub fn slerp(a: &Pose, b: &Pose, t: f64) -> Pose {
    let position = a.position * (1.0 - t) + b.position * t;
    Pose {
        position,
        orientation: slerp_quat(&a.orientation, &b.orientation, t),
    }
}

fn lerp_wrench(a: &Wrench, b: &Wrench, t: f64) -> Wrench {
    Wrench::new(
        a.force * (1.0 - t) + b.force * t,
        a.torque * (1.0 - t) + b.torque * t,
    )
}

/// Resamples to a new uniform period.
///
/// Sample `j` sits at time `j * new_dt`; the number of intervals is
/// `round(duration / new_dt)` and the final sample is always the original
/// final pose, so both endpoints are preserved exactly. When the duration is
/// not a multiple of `new_dt` the last interval absorbs the remainder
/// (at most half a period).
pub fn resample(traj: &Trajectory, new_dt: f64) -> Result<Trajectory> {
    if !(new_dt.is_finite() && new_dt > 0.0) {
        return Err(Error::InvalidTimeStep(new_dt));
    }
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = traj.len();
    let intervals = (traj.duration() / new_dt).round() as usize;
    let mut poses = Vec::with_capacity(intervals + 1);
    let mut wrenches = traj.wrenches.as_ref().map(|_| Vec::with_capacity(intervals + 1));
    for j in 0..=intervals {
        let (lo, frac) = if j == intervals {
            (n - 1, 0.0)
        } else {
            let s = j as f64 * new_dt / traj.dt;
            let nearest = s.round();
            // snap samples that land on an original index
            let s = if (s - nearest).abs() < 1e-9 { nearest } else { s };
            let lo = (s.floor() as usize).min(n - 1);
            (lo, s - lo as f64)
        };
        let (pose, wrench) = if frac == 0.0 || lo + 1 >= n {
            (traj.poses[lo], traj.wrenches.as_ref().map(|w| w[lo]))
        } else {
            (
                slerp(&traj.poses[lo], &traj.poses[lo + 1], frac),
                traj.wrenches
                    .as_ref()
                    .map(|w| lerp_wrench(&w[lo], &w[lo + 1], frac)),
            )
        };
        poses.push(pose);
        if let (Some(ws), Some(w)) = (wrenches.as_mut(), wrench) {
            ws.push(w);
        }
    }
    Trajectory::with_wrenches(new_dt, poses, wrenches)
}

/// Rotation of `angle` radians about the unit `axis`.
pub fn rotation(axis: Vector3<f64>, angle: f64) -> UnitQuaternion<f64> {
    let q = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    canonical_unit(q.into_inner())
}

/// Rotation vector (axis * angle, angle in `[0, pi]`) of a unit quaternion.
pub fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = canonical_unit(q.into_inner());
    let v = q.imag();
    let s = v.norm();
    if s < 1e-12 {
        // small-angle limit of 2 * atan2(s, w) / s
        return v * 2.0 / q.w.max(1e-300);
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Quaternion of the rotation vector `w` (inverse of [`rotation_vector`]).
pub fn exp_rotation(w: &Vector3<f64>) -> UnitQuaternion<f64> {
    let angle = w.norm();
    let half = 0.5 * angle;
    let (s, c) = half.sin_cos();
    let k = if angle < 1e-12 { 0.5 } else { s / angle };
    canonical_unit(Quaternion::new(c, w.x * k, w.y * k, w.z * k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn at(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_position(Vector3::new(x, y, z))
    }

    fn yaw(deg: f64) -> Pose {
        Pose::identity().with_orientation(rotation(Vector3::z(), deg.to_radians()))
    }

    #[test]
    fn position_distance_examples() {
        assert_eq!(position_distance(&at(0., 0., 0.), &at(0., 0., 0.)), 0.0);
        assert_eq!(position_distance(&at(0., 0., 0.), &at(3., 4., 0.)), 5.0);
        let d = position_distance(&at(0.1, 0.2, 0.3), &at(0.4, 0.6, 0.3));
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quaternion_distance_examples() {
        assert_eq!(quaternion_distance(&yaw(0.0), &yaw(0.0)), 0.0);
        let half_turn = Pose::from_wxyz(Vector3::zeros(), [0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((quaternion_distance(&yaw(0.0), &half_turn) - 1.0).abs() < 1e-15);
        let d = quaternion_distance(&yaw(0.0), &yaw(90.0));
        assert!((d - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!((d - 0.29289).abs() < 1e-5);
    }

    #[test]
    fn canonicalization_keeps_w_nonnegative() {
        let p = Pose::from_wxyz(Vector3::zeros(), [-0.5, 0.5, -0.5, 0.5]).unwrap();
        assert_eq!(p.wxyz(), [0.5, -0.5, 0.5, -0.5]);
        let p = Pose::from_wxyz(Vector3::zeros(), [0.0, 0.0, -1.0, 0.0]).unwrap();
        assert_eq!(p.wxyz(), [0.0, 0.0, 1.0, 0.0]);
        assert!(Pose::from_wxyz(Vector3::zeros(), [0.0; 4]).is_err());
    }

    #[test]
    fn slerp_examples() {
        let a = at(0.1, -0.2, 0.3).with_orientation(rotation(Vector3::x(), 0.3));
        let b = at(1.0, 2.0, -1.0).with_orientation(rotation(Vector3::y(), -1.1));
        assert_eq!(slerp(&a, &b, 0.0), a);
        assert_eq!(slerp(&a, &b, 1.0), b);
        let mid = slerp(&a, &a, 0.5);
        assert!(position_distance(&mid, &a) < 1e-15 && quaternion_distance(&mid, &a) < 1e-15);

        let half = slerp(&yaw(0.0), &yaw(90.0), 0.5);
        let expected = rotation(Vector3::z(), FRAC_PI_4);
        assert!(quat_distance(half.orientation(), &expected) < 1e-14);
    }

    #[test]
    fn slerp_takes_short_arc() {
        // 350 degrees about z is -10 degrees; the midpoint must be -5, not 175.
        let a = yaw(0.0);
        let b = yaw(350.0);
        let mid = slerp(&a, &b, 0.5);
        assert!(quat_distance(mid.orientation(), &rotation(Vector3::z(), (-5.0f64).to_radians())) < 1e-12);
    }

    #[test]
    fn resample_examples() {
        let a = at(0., 0., 0.);
        let b = at(1., 0., 0.).with_orientation(rotation(Vector3::z(), FRAC_PI_2));
        let t = Trajectory::new(1.0, vec![a, b]).unwrap();
        let r = resample(&t, 0.5).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.poses()[0], a);
        assert_eq!(r.poses()[1], slerp(&a, &b, 0.5));
        assert_eq!(r.poses()[2], b);

        assert_eq!(resample(&t, 1.0).unwrap(), t);

        let poses: Vec<Pose> = (0..101)
            .map(|i| at(i as f64 * 0.001, (i as f64 * 0.1).sin(), 0.0).with_orientation(rotation(Vector3::z(), i as f64 * 0.01)))
            .collect();
        let t = Trajectory::new(0.02, poses.clone()).unwrap();
        let r = resample(&t, 0.04).unwrap();
        assert_eq!(r.len(), 51);
        for (j, p) in r.poses().iter().enumerate() {
            assert_eq!(*p, poses[2 * j]);
        }
    }

    #[test]
    fn resample_rejects_bad_period() {
        let t = Trajectory::new(0.02, vec![Pose::identity()]).unwrap();
        assert!(resample(&t, 0.0).is_err());
        assert_eq!(resample(&t, 0.5).unwrap().len(), 1);
    }

    #[test]
    fn trajectory_invariants() {
        assert_eq!(Trajectory::new(0.02, vec![]), Err(Error::EmptyTrajectory));
        assert!(matches!(Trajectory::new(0.0, vec![Pose::identity()]), Err(Error::InvalidTimeStep(_))));
        let err = Trajectory::with_wrenches(0.02, vec![Pose::identity(); 2], Some(vec![Wrench::zero()]));
        assert_eq!(err, Err(Error::LengthMismatch { poses: 2, wrenches: 1 }));
    }

    #[test]
    fn rotation_vector_round_trip() {
        for (axis, angle) in [(Vector3::z(), 0.0), (Vector3::x(), 1e-9), (Vector3::new(1., 2., 3.), 2.0), (Vector3::y(), PI - 1e-6)] {
            let q = rotation(axis, angle);
            let w = rotation_vector(&q);
            assert!((w.norm() - angle).abs() < 1e-9);
            assert!(quat_distance(&exp_rotation(&w), &q) < 1e-15);
        }
    }

    fn unit_quat() -> impl Strategy<Value = UnitQuaternion<f64>> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z)))
    }

    proptest! {
        #[test]
        fn quaternion_distance_symmetric_and_sign_invariant(a in unit_quat(), b in unit_quat()) {
            let pa = Pose::new(Vector3::zeros(), a);
            let pb = Pose::new(Vector3::zeros(), b);
            let d = quaternion_distance(&pa, &pb);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, quaternion_distance(&pb, &pa));
            let neg = UnitQuaternion::new_unchecked(-b.into_inner());
            prop_assert!((quat_distance(&a, &neg) - d).abs() < 1e-15);
        }

        #[test]
        fn canonicalization_preserves_rotation(q in unit_quat(), v in prop::array::uniform3(-10.0f64..10.0)) {
            let v = Vector3::from(v);
            let c = canonicalize(q.into_inner()).unwrap();
            prop_assert!(c.w >= 0.0);
            prop_assert!((c * v - q * v).norm() < 1e-12);
        }

        #[test]
        fn slerp_stays_unit(a in unit_quat(), b in unit_quat(), t in 0.0f64..=1.0) {
            let p = slerp(&Pose::new(Vector3::zeros(), a), &Pose::new(Vector3::x(), b), t);
            prop_assert!((p.orientation().norm() - 1.0).abs() < 1e-9);
        }
    }
}
