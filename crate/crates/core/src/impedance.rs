//! Cartesian impedance control.
//!
//! The wrench is `K e + D (twist_d - twist)` with `e = (p_d - p, log(q_d q^-1))`.
//! Twists are `(v, omega)` with the angular velocity in the world frame.
//!
//! [`PlanarArm`] is a two-link arm moving in the world x-y plane, used to check
//! the torque mapping `tau = J^T F + g(theta)` and the wrench estimate
//! `F = (J^T)^+ tau`. It can only exert the in-plane force `(fx, fy)`, so its
//! Jacobian has nonzero rows 0 and 1 only.
//!
//! [`TaskSpaceBody`] is the free 6-DoF body driven by the simulator.

use nalgebra::{Matrix2, Matrix6, Matrix6x2, SymmetricEigen, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_unit, exp_rotation, rotation_vector, Pose, Twist, Wrench};

/// Physics rate of the simulated controller.
pub const CONTROL_DT: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceParams {
    k: Matrix6<f64>,
    d: Matrix6<f64>,
}

impl ImpedanceParams {
    pub fn new(k: Matrix6<f64>, d: Matrix6<f64>) -> Result<Self> {
        check_spsd(&k, "stiffness")?;
        check_spsd(&d, "damping")?;
        Ok(ImpedanceParams { k, d })
    }

    pub fn diagonal(k: [f64; 6], d: [f64; 6]) -> Result<Self> {
        Self::new(
            Matrix6::from_diagonal(&Vector6::from(k)),
            Matrix6::from_diagonal(&Vector6::from(d)),
        )
    }

    /// Diagonal gains with `d = 2 sqrt(k m)` per axis for the given body.
    pub fn critically_damped(k_trans: f64, k_rot: f64, mass: f64, inertia: Vector3<f64>) -> Result<Self> {
        let k = [k_trans, k_trans, k_trans, k_rot, k_rot, k_rot];
        let m = [mass, mass, mass, inertia.x, inertia.y, inertia.z];
        let mut d = [0.0; 6];
        for i in 0..6 {
            d[i] = 2.0 * (k[i].max(0.0) * m[i].max(0.0)).sqrt();
        }
        Self::diagonal(k, d)
    }

    pub fn stiffness(&self) -> &Matrix6<f64> {
        &self.k
    }

    pub fn damping(&self) -> &Matrix6<f64> {
        &self.d
    }

    /// Same damping, zero stiffness: the compliant mode used while a human
    /// guides the robot.
    pub fn without_stiffness(&self) -> Self {
        ImpedanceParams {
            k: Matrix6::zeros(),
            d: self.d,
        }
    }
}

fn check_spsd(m: &Matrix6<f64>, what: &str) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid(format!("{what} matrix is not finite")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 {
        return Err(Error::invalid(format!("{what} matrix is not symmetric (max deviation {asym:e})")));
    }
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let min = eig.min();
    if min < -1e-12 * (1.0 + eig.amax()) {
        return Err(Error::invalid(format!("{what} matrix has negative eigenvalue {min}")));
    }
    Ok(())
}

/// Pose error `(p_d - p, rotation vector of q_d q^-1)`.
pub fn pose_error(x_d: &Pose, x: &Pose) -> Vector6<f64> {
    let dp = x_d.position() - x.position();
    let dq = canonical_unit(x_d.orientation().into_inner() * x.orientation().into_inner().conjugate());
    let r = rotation_vector(&dq);
    Vector6::new(dp.x, dp.y, dp.z, r.x, r.y, r.z)
}

pub fn impedance_wrench(x_d: &Pose, xdot_d: &Twist, x: &Pose, xdot: &Twist, p: &ImpedanceParams) -> Wrench {
    Wrench::from_vector(&(p.k * pose_error(x_d, x) + p.d * (xdot_d - xdot)))
}

/// Two-link planar arm in the world x-y plane, links with point masses at
/// their midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarArm {
    lengths: [f64; 2],
    masses: [f64; 2],
    gravity: Vector3<f64>,
    pub theta: Vector2<f64>,
    pub theta_dot: Vector2<f64>,
}

impl PlanarArm {
    pub fn new(lengths: [f64; 2], masses: [f64; 2], gravity: Vector3<f64>) -> Result<Self> {
        if !lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
            return Err(Error::invalid(format!("link lengths must be > 0, got {lengths:?}")));
        }
        if !masses.iter().all(|m| m.is_finite() && *m >= 0.0) {
            return Err(Error::invalid(format!("link masses must be >= 0, got {masses:?}")));
        }
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("gravity must be finite"));
        }
        Ok(PlanarArm {
            lengths,
            masses,
            gravity,
            theta: Vector2::zeros(),
            theta_dot: Vector2::zeros(),
        })
    }

    pub fn with_state(mut self, theta: Vector2<f64>, theta_dot: Vector2<f64>) -> Self {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    /// Tip pose: position in the plane, orientation `theta1 + theta2` about z.
    pub fn forward_kinematics(&self) -> Pose {
        let [l1, l2] = self.lengths;
        let (t1, t12) = (self.theta[0], self.theta[0] + self.theta[1]);
        let p = Vector3::new(l1 * t1.cos() + l2 * t12.cos(), l1 * t1.sin() + l2 * t12.sin(), 0.0);
        Pose::new(p, crate::geometry::rotation(Vector3::z(), t12))
    }

    /// In-plane position Jacobian `d(x, y) / d theta`.
    pub fn planar_jacobian(&self) -> Matrix2<f64> {
        let [l1, l2] = self.lengths;
        let (t1, t12) = (self.theta[0], self.theta[0] + self.theta[1]);
        Matrix2::new(
            -l1 * t1.sin() - l2 * t12.sin(),
            -l2 * t12.sin(),
            l1 * t1.cos() + l2 * t12.cos(),
            l2 * t12.cos(),
        )
    }

    /// 6x2 Jacobian onto the wrench space; rows other than x and y are zero.
    pub fn jacobian(&self) -> Matrix6x2<f64> {
        let jp = self.planar_jacobian();
        let mut j = Matrix6x2::zeros();
        j.fixed_view_mut::<2, 2>(0, 0).copy_from(&jp);
        j
    }

    pub fn tip_twist(&self) -> Twist {
        self.jacobian() * self.theta_dot
    }

    /// Gravity torque `dU/dtheta` with `U = -sum m_i g . c_i`.
    pub fn gravity_torque(&self) -> Vector2<f64> {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        let (t1, t12) = (self.theta[0], self.theta[0] + self.theta[1]);
        let (gx, gy) = (self.gravity.x, self.gravity.y);
        // d c1/d t1 = l1/2 (-s1, c1); d c2/d t1 = (-l1 s1 - l2/2 s12, l1 c1 + l2/2 c12); d c2/d t2 = l2/2 (-s12, c12)
        let dot = |dx: f64, dy: f64| gx * dx + gy * dy;
        let c1_t1 = dot(-0.5 * l1 * t1.sin(), 0.5 * l1 * t1.cos());
        let c2_t1 = dot(-l1 * t1.sin() - 0.5 * l2 * t12.sin(), l1 * t1.cos() + 0.5 * l2 * t12.cos());
        let c2_t2 = dot(-0.5 * l2 * t12.sin(), 0.5 * l2 * t12.cos());
        -Vector2::new(m1 * c1_t1 + m2 * c2_t1, m2 * c2_t2)
    }

    pub fn potential_energy(&self) -> f64 {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        let (t1, t12) = (self.theta[0], self.theta[0] + self.theta[1]);
        let c1 = Vector3::new(0.5 * l1 * t1.cos(), 0.5 * l1 * t1.sin(), 0.0);
        let c2 = Vector3::new(l1 * t1.cos() + 0.5 * l2 * t12.cos(), l1 * t1.sin() + 0.5 * l2 * t12.sin(), 0.0);
        -(m1 * self.gravity.dot(&c1) + m2 * self.gravity.dot(&c2))
    }
}

/// `tau = J^T F_imp + g(theta)` for the arm's current state.
pub fn joint_torque_command(arm: &PlanarArm, x_d: &Pose, xdot_d: &Twist, p: &ImpedanceParams) -> Vector2<f64> {
    let f = impedance_wrench(x_d, xdot_d, &arm.forward_kinematics(), &arm.tip_twist(), p);
    arm.jacobian().transpose() * f.to_vector() + arm.gravity_torque()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrenchEstimate {
    pub wrench: Wrench,
    /// Singular values of the in-plane Jacobian, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Relative singular-value cutoff for the rank decision.
pub const RANK_TOL: f64 = 1e-9;

/// Minimum-norm least-squares `F = (J^T)^+ tau_ext`.
pub fn estimate_external_wrench(arm: &PlanarArm, tau_ext: &Vector2<f64>) -> WrenchEstimate {
    let jt = arm.planar_jacobian().transpose();
    let svd = jt.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let cutoff = RANK_TOL * sv[0].max(f64::MIN_POSITIVE);
    let rank = sv.iter().filter(|s| **s > cutoff).count();
    let f = svd.solve(tau_ext, cutoff).unwrap_or_else(|_| Vector2::zeros());
    WrenchEstimate {
        wrench: Wrench::new(Vector3::new(f.x, f.y, 0.0), Vector3::zeros()),
        singular_values: sv,
        rank,
        rank_deficient: rank < 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyParams {
    pub mass: f64,
    pub inertia: [f64; 3],
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid(format!("mass must be > 0, got {}", self.mass)));
        }
        if !self.inertia.iter().all(|i| i.is_finite() && *i > 0.0) {
            return Err(Error::invalid(format!("inertia must be > 0, got {:?}", self.inertia)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpaceBody {
    params: BodyParams,
    pub pose: Pose,
    pub twist: Twist,
}

impl TaskSpaceBody {
    pub fn new(params: BodyParams, pose: Pose) -> Result<Self> {
        params.validate()?;
        Ok(TaskSpaceBody {
            params,
            pose,
            twist: Twist::zeros(),
        })
    }

    pub fn params(&self) -> &BodyParams {
        &self.params
    }

    fn inverse_mass(&self) -> Vector6<f64> {
        let [ix, iy, iz] = self.params.inertia;
        let m = self.params.mass;
        Vector6::new(1.0 / m, 1.0 / m, 1.0 / m, 1.0 / ix, 1.0 / iy, 1.0 / iz)
    }

    /// `0.5 twist^T M twist`.
    pub fn kinetic_energy(&self) -> f64 {
        let inv = self.inverse_mass();
        0.5 * self.twist.iter().zip(inv.iter()).map(|(v, mi)| v * v / mi).sum::<f64>()
    }
}

/// Semi-implicit Euler: velocity first, then the pose with the new velocity.
/// Diagonal world-frame inertia; gyroscopic terms are ignored.
pub fn step_task_body(body: &TaskSpaceBody, command: &Wrench, external: &Wrench, dt: f64) -> Result<TaskSpaceBody> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let accel = (command.to_vector() + external.to_vector()).component_mul(&body.inverse_mass());
    let twist = body.twist + accel * dt;
    let v = twist.fixed_rows::<3>(0).into_owned();
    let w = twist.fixed_rows::<3>(3).into_owned();
    let position = body.pose.position() + v * dt;
    let q = if w == Vector3::zeros() {
        *body.pose.orientation()
    } else {
        canonical_unit(exp_rotation(&(w * dt)).into_inner() * body.pose.orientation().into_inner())
    };
    Ok(TaskSpaceBody {
        params: body.params,
        pose: Pose::new(position, q),
        twist,
    })
}

/// `0.5 e^T K e + 0.5 twist^T M twist` for regulation towards `x_d`.
pub fn storage(body: &TaskSpaceBody, x_d: &Pose, p: &ImpedanceParams) -> f64 {
    let e = pose_error(x_d, &body.pose);
    0.5 * e.dot(&(p.k * e)) + body.kinetic_energy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{position_distance, quaternion_distance, rotation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn body(mass: f64, inertia: f64) -> TaskSpaceBody {
        TaskSpaceBody::new(BodyParams { mass, inertia: [inertia; 3] }, Pose::identity()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ImpedanceParams::diagonal([1.0; 6], [0.0; 6]).is_ok());
        assert!(ImpedanceParams::diagonal([-1.0, 1.0, 1.0, 1.0, 1.0, 1.0], [0.0; 6]).is_err());
        let mut k = Matrix6::identity();
        k[(0, 1)] = 0.5;
        assert!(ImpedanceParams::new(k, Matrix6::zeros()).is_err());
        k[(1, 0)] = 0.5;
        assert!(ImpedanceParams::new(k, Matrix6::zeros()).is_ok());
        k[(0, 1)] = 2.0;
        k[(1, 0)] = 2.0;
        assert!(ImpedanceParams::new(k, Matrix6::zeros()).is_err());
    }

    #[test]
    fn impedance_wrench_examples() {
        let p = ImpedanceParams::diagonal([100.0, 100.0, 100.0, 10.0, 10.0, 10.0], [5.0; 6]).unwrap();
        let x = Pose::identity();
        let zero = Twist::zeros();
        assert_eq!(impedance_wrench(&x, &zero, &x, &zero, &p).to_vector(), Vector6::zeros());

        let xd = x.translated(&Vector3::new(0.01, 0.0, 0.0));
        let f = impedance_wrench(&xd, &zero, &x, &zero, &p);
        assert!((f.force - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(f.torque, Vector3::zeros());

        let v = Twist::new(0.1, 0.0, -0.2, 0.0, 0.3, 0.0);
        let f = impedance_wrench(&xd, &zero, &x, &v, &p.without_stiffness());
        assert!((f.to_vector() + 5.0 * v).norm() < 1e-12);

        let xd = x.with_orientation(rotation(Vector3::z(), 0.1));
        let f = impedance_wrench(&xd, &zero, &x, &zero, &p);
        assert!((f.torque - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    fn arm(theta: [f64; 2], gravity: Vector3<f64>) -> PlanarArm {
        PlanarArm::new([1.0, 1.0], [2.0, 1.5], gravity)
            .unwrap()
            .with_state(Vector2::from(theta), Vector2::zeros())
    }

    fn fd_jacobian(a: &PlanarArm) -> Matrix2<f64> {
        let h = 1e-6;
        let mut j = Matrix2::zeros();
        for c in 0..2 {
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus.theta[c] += h;
            minus.theta[c] -= h;
            let d = (plus.forward_kinematics().position() - minus.forward_kinematics().position()) / (2.0 * h);
            j[(0, c)] = d.x;
            j[(1, c)] = d.y;
        }
        j
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = arm([rng.random_range(-3.2..3.2), rng.random_range(-3.2..3.2)], Vector3::zeros());
            assert!((a.planar_jacobian() - fd_jacobian(&a)).amax() < 1e-6);
        }
    }

    #[test]
    fn gravity_torque_is_potential_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Vector3::new(0.0, -9.81, 0.0);
        for _ in 0..200 {
            let a = arm([rng.random_range(-3.2..3.2), rng.random_range(-3.2..3.2)], g);
            let h = 1e-6;
            for c in 0..2 {
                let mut plus = a.clone();
                let mut minus = a.clone();
                plus.theta[c] += h;
                minus.theta[c] -= h;
                let fd = (plus.potential_energy() - minus.potential_energy()) / (2.0 * h);
                assert!((a.gravity_torque()[c] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn torque_command_examples() {
        let p = ImpedanceParams::diagonal([300.0; 6], [20.0; 6]).unwrap();
        let a = arm([0.3, 0.7], Vector3::zeros());
        let xd = a.forward_kinematics();
        assert_eq!(joint_torque_command(&a, &xd, &Twist::zeros(), &p), Vector2::zeros());

        let a = arm([0.3, 0.7], Vector3::new(0.0, -9.81, 0.0));
        let tau = joint_torque_command(&a, &a.forward_kinematics(), &Twist::zeros(), &p);
        assert_eq!(tau, a.gravity_torque());

        // unit force along +x at theta = (0, 90 deg)
        let a = arm([0.0, FRAC_PI_2], Vector3::new(0.0, -9.81, 0.0));
        let kx = ImpedanceParams::diagonal([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0; 6]).unwrap();
        let xd = a.forward_kinematics().translated(&Vector3::new(1.0, 0.0, 0.0));
        let tau = joint_torque_command(&a, &xd, &Twist::zeros(), &kx) - a.gravity_torque();
        let expected = fd_jacobian(&a).transpose() * Vector2::new(1.0, 0.0);
        assert!((tau - expected).amax() < 1e-6);
        assert!((tau - Vector2::new(-1.0, -1.0)).amax() < 1e-12);
    }

    #[test]
    fn wrench_estimation() {
        let a = arm([0.4, 1.1], Vector3::zeros());
        let e = estimate_external_wrench(&a, &Vector2::zeros());
        assert_eq!(e.wrench.to_vector(), Vector6::zeros());
        assert_eq!(e.rank, 2);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let a = arm([rng.random_range(-3.0..3.0), rng.random_range(0.2..2.9)], Vector3::zeros());
            let f = Vector2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let tau = a.planar_jacobian().transpose() * f;
            let e = estimate_external_wrench(&a, &tau);
            assert!(!e.rank_deficient);
            assert!((e.wrench.force.xy() - f).amax() < 1e-8);
        }

        // stretched arm: J^T = [[0, 2], [0, 1]], force along x is invisible
        let a = arm([0.0, 0.0], Vector3::zeros());
        let tau = Vector2::new(2.0, 1.0);
        let e = estimate_external_wrench(&a, &tau);
        assert!(e.rank_deficient);
        assert_eq!(e.rank, 1);
        assert!(e.singular_values[1] < 1e-12);
        assert!((e.wrench.force - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        // an inconsistent torque gets the least-squares, minimum-norm answer
        let e = estimate_external_wrench(&a, &Vector2::new(1.0, 0.0));
        assert!((e.wrench.force - Vector3::new(0.0, 0.4, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn body_examples() {
        let b = body(2.0, 0.01);
        let z = Wrench::zero();
        assert_eq!(step_task_body(&b, &z, &z, 1e-3).unwrap(), b);
        assert!(step_task_body(&b, &z, &z, 0.0).is_err());

        let f = Wrench::new(Vector3::new(3.0, 0.0, -1.0), Vector3::zeros());
        let mut s = b;
        for _ in 0..250 {
            s = step_task_body(&s, &f, &z, 1e-3).unwrap();
        }
        let expected = f.force * 250.0 * 1e-3 / 2.0;
        assert!((s.twist.fixed_rows::<3>(0) - expected).norm() < 1e-12);

        let t = Wrench::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1e-4));
        let mut s = b;
        for _ in 0..100_000 {
            s = step_task_body(&s, &t, &z, 1e-3).unwrap();
        }
        assert!((s.pose.orientation().into_inner().norm() - 1.0).abs() < 1e-9);
        assert!(s.twist[0] == 0.0 && s.twist[3] == 0.0 && s.twist[4] == 0.0);
    }

    // Storage decrease for semi-implicit Euler needs roughly dt < 2 d / k and
    // dt < 2 sqrt(m / k) per axis; CONTROL_DT is far inside both for these gains.
    fn regulated(seed: u64, dt: f64, steps: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = BodyParams { mass: 1.0, inertia: [0.01; 3] };
        let p = ImpedanceParams::critically_damped(
            rng.random_range(100.0..2000.0),
            rng.random_range(5.0..50.0),
            params.mass,
            Vector3::from(params.inertia),
        )
        .unwrap();
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0));
        let xd = Pose::new(
            Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)),
            rotation(axis, rng.random_range(-0.6..0.6)),
        );
        let mut b = TaskSpaceBody::new(params, Pose::identity()).unwrap();
        b.twist = Twist::from_fn(|_, _| rng.random_range(-0.2..0.2));
        let mut v = vec![storage(&b, &xd, &p)];
        for _ in 0..steps {
            let f = impedance_wrench(&xd, &Twist::zeros(), &b.pose, &b.twist, &p);
            b = step_task_body(&b, &f, &Wrench::zero(), dt).unwrap();
            v.push(storage(&b, &xd, &p));
        }
        v
    }

    #[test]
    fn storage_never_increases() {
        for seed in 0..20 {
            let v = regulated(seed, CONTROL_DT, 3000);
            for w in v.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1e-12), "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn setpoint_regulation() {
        let params = BodyParams { mass: 1.0, inertia: [0.01; 3] };
        let p = ImpedanceParams::critically_damped(500.0, 20.0, 1.0, Vector3::from(params.inertia)).unwrap();
        let xd = Pose::identity();
        let start = Pose::new(Vector3::new(0.03, -0.04, 0.0), rotation(Vector3::new(1.0, 2.0, 3.0), 10f64.to_radians()));
        let mut b = TaskSpaceBody::new(params, start).unwrap();
        for _ in 0..5000 {
            let f = impedance_wrench(&xd, &Twist::zeros(), &b.pose, &b.twist, &p);
            b = step_task_body(&b, &f, &Wrench::zero(), CONTROL_DT).unwrap();
        }
        assert!(position_distance(&b.pose, &xd) < 1e-4);
        assert!(b.pose.orientation().angle_to(xd.orientation()) < 0.01f64.to_radians());
        assert!(quaternion_distance(&b.pose, &xd) < 1e-8);
    }

    proptest! {
        #[test]
        fn pose_error_is_zero_only_at_target(p in prop::array::uniform3(-1.0f64..1.0), a in -3.0f64..3.0) {
            let x = Pose::new(Vector3::from(p), rotation(Vector3::new(0.3, -0.2, 1.0), a));
            prop_assert!(pose_error(&x, &x).amax() < 1e-12);
        }
    }
}
