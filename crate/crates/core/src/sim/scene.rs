//! Square peg over a square hole with a chamfered rim, penalty contact.
//!
//! Contact is computed per hole side from the cross-section through that
//! side. In the side's cross-section the socket material is the convex region
//! below the top plane, outside the wall and behind the 45 degree chamfer; the
//! peg is the quadrant above its tip and inside its outer face. Their overlap
//! along each of the three face normals is `a_f`, the penetration is
//! `d = min a_f`, and each face pushes with weight `max(0, 2d - a_f)`, so the
//! force is continuous where the closest face changes. The bore floor is one
//! more plane. Peg orientation does not change the footprint.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Twist, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    /// Nominal centre of the hole opening (top plane height in z).
    pub socket_center: [f64; 3],
    /// Range of the uniform socket offset along y.
    pub socket_offset_range: [f64; 2],
    pub hole_half_width: f64,
    pub peg_half_width: f64,
    pub chamfer_depth: f64,
    pub bore_depth: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    /// Penetration over which contact damping ramps in.
    pub damping_ramp: f64,
    pub insertion_depth_success: f64,
    /// Peg tip height above the socket at the start of an episode.
    pub start_height: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            socket_center: [0.5, 0.0, 0.0],
            socket_offset_range: [-0.05, 0.05],
            hole_half_width: 0.0055,
            peg_half_width: 0.005,
            chamfer_depth: 0.001,
            bore_depth: 0.03,
            contact_stiffness: 1e5,
            contact_damping: 200.0,
            damping_ramp: 1e-4,
            insertion_depth_success: 0.01,
            start_height: 0.30,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hole_half_width", self.hole_half_width),
            ("peg_half_width", self.peg_half_width),
            ("bore_depth", self.bore_depth),
            ("contact_stiffness", self.contact_stiffness),
            ("damping_ramp", self.damping_ramp),
            ("insertion_depth_success", self.insertion_depth_success),
            ("start_height", self.start_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("scene.{name} must be > 0, got {v}")));
            }
        }
        if !(self.chamfer_depth.is_finite() && self.chamfer_depth >= 0.0) {
            return Err(Error::invalid("scene.chamfer_depth must be >= 0"));
        }
        if !(self.contact_damping.is_finite() && self.contact_damping >= 0.0) {
            return Err(Error::invalid("scene.contact_damping must be >= 0"));
        }
        if self.clearance() <= 0.0 {
            return Err(Error::invalid(format!(
                "hole half-width {} must exceed peg half-width {}",
                self.hole_half_width, self.peg_half_width
            )));
        }
        if self.insertion_depth_success >= self.bore_depth {
            return Err(Error::invalid("success depth must be shallower than the bore"));
        }
        let [lo, hi] = self.socket_offset_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("bad socket offset range [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn clearance(&self) -> f64 {
        self.hole_half_width - self.peg_half_width
    }

    /// Draws the socket offset.
    pub fn sample_socket<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        let [lo, hi] = self.socket_offset_range;
        let dy = if lo < hi { rng.random_range(lo..hi) } else { lo };
        Vector3::from(self.socket_center) + Vector3::new(0.0, dy, 0.0)
    }

    /// Lipschitz constant of the contact wrench in position at zero velocity
    /// (Euclidean norms). Each face weight is 3-Lipschitz; four sides with
    /// three faces plus the floor give `37 k` on the force, and torque arms
    /// are at most the peg half-width.
    pub fn lipschitz_bound(&self) -> f64 {
        37.0 * self.contact_stiffness * (1.0 + self.peg_half_width * self.peg_half_width).sqrt()
    }
}

/// A socket placed in the world: the hole opening centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Socket {
    pub center: Vector3<f64>,
}

impl Socket {
    pub fn new(center: Vector3<f64>) -> Self {
        Socket { center }
    }

    /// How far the peg tip is below the top plane.
    pub fn depth(&self, peg: &Pose) -> f64 {
        self.center.z - peg.position().z
    }

    /// Tip below the success depth and laterally inside the hole.
    pub fn inserted(&self, peg: &Pose, cfg: &SceneConfig) -> bool {
        let d = peg.position() - self.center;
        let inside = d.x.abs() <= cfg.hole_half_width && d.y.abs() <= cfg.hole_half_width;
        inside && self.depth(peg) >= cfg.insertion_depth_success
    }
}

const SIDES: [(f64, f64); 4] = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];

/// Penetrations `[top, wall, chamfer]` of the peg into one side's material.
fn side_overlaps(u_face: f64, depth: f64, cfg: &SceneConfig) -> [f64; 3] {
    let wall = u_face - cfg.hole_half_width;
    [
        depth,
        wall,
        (wall - cfg.chamfer_depth + depth) * std::f64::consts::FRAC_1_SQRT_2,
    ]
}

/// Wrench on the peg about its tip. `twist` is the peg velocity; damping only
/// resists approach and never pulls.
pub fn contact_wrench(peg: &Pose, twist: &Twist, socket: &Socket, cfg: &SceneConfig) -> Wrench {
    let rel = peg.position() - socket.center;
    let depth = -rel.z;
    let v = Vector3::new(twist[0], twist[1], twist[2]);
    let (k, c) = (cfg.contact_stiffness, cfg.contact_damping);
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();

    let mut push = |n: Vector3<f64>, w: f64, arm: Vector3<f64>, force: &mut Vector3<f64>| {
        let ramp = (w / cfg.damping_ramp).min(1.0);
        let magnitude = (k * w - c * v.dot(&n) * ramp).max(0.0);
        let f = n * magnitude;
        *force += f;
        torque += arm.cross(&f);
    };

    for (ex, ey) in SIDES {
        let e = Vector3::new(ex, ey, 0.0);
        let u_face = e.dot(&rel) + cfg.peg_half_width;
        let a = side_overlaps(u_face, depth, cfg);
        let d = a[0].min(a[1]).min(a[2]);
        if d <= 0.0 {
            continue;
        }
        let normals = [
            Vector3::z(),
            -e,
            (Vector3::z() - e) * std::f64::consts::FRAC_1_SQRT_2,
        ];
        let arm = e * cfg.peg_half_width;
        for (n, a_f) in normals.iter().zip(a) {
            let w = 2.0 * d - a_f;
            if w > 0.0 {
                push(*n, w, arm, &mut force);
            }
        }
    }
    let floor = depth - cfg.bore_depth;
    if floor > 0.0 {
        push(Vector3::z(), floor, Vector3::zeros(), &mut force);
    }
    Wrench::new(force, torque)
}
