//! Local trajectory editing.
//!
//! Given a base rollout, the index `k*` where a corrective demonstration
//! attaches, and the demonstration's first pose, the `N + 1` poses
//! `base[k*-N ..= k*]` are re-optimized against three terms: fidelity to the
//! base poses, smoothness between neighbours, and agreement of the last pose
//! with the demonstration start. The objective separates into
//!
//! * a convex quadratic in the positions, solved exactly with a tridiagonal
//!   (banded SPD) system, and
//! * a problem on the product of unit 3-spheres in the orientations, solved
//!   by preconditioned Riemannian gradient descent with backtracking, so the
//!   recorded objective never increases.
//!
//! With `hard_endpoint` the last pose is pinned to the demonstration start by
//! elimination; otherwise only the weighted endpoint term pulls it there.

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::alignment::{nearest_point, AlignmentResult, AlignmentWeights};
use crate::error::{Error, Result};
use crate::geometry::{canonical_unit, position_distance, quaternion_distance, resample, slerp_quat, Pose, Trajectory};

/// Reference motion the smoothness term compares consecutive poses against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessForm {
    /// Penalize deviation of each step from the corresponding base step:
    /// `||(p_i - p_{i-1}) - (b_i - b_{i-1})||^2` and the matching relative
    /// rotation. Zero on the unedited base segment.
    #[default]
    Relative,
    /// Penalize the raw step `||p_i - p_{i-1}||^2` and `1 - |<q_i, q_{i-1}>|`.
    Absolute,
}

impl std::str::FromStr for SmoothnessForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(SmoothnessForm::Relative),
            "absolute" => Ok(SmoothnessForm::Absolute),
            other => Err(Error::invalid(format!("unknown smoothness form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditWeights {
    pub lambda_s: f64,
    pub lambda_e: f64,
    pub lambda_qf: f64,
    pub lambda_qs: f64,
    pub lambda_qe: f64,
}

impl Default for EditWeights {
    fn default() -> Self {
        EditWeights {
            lambda_s: 1.0,
            lambda_e: 1000.0,
            lambda_qf: 0.5,
            lambda_qs: 0.5,
            lambda_qe: 0.5,
        }
    }
}

impl EditWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("lambda_e", self.lambda_e),
            ("lambda_qf", self.lambda_qf),
            ("lambda_qs", self.lambda_qs),
            ("lambda_qe", self.lambda_qe),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.lambda_e <= 0.0 {
            return Err(Error::invalid("lambda_e must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditConfig {
    /// Segment length `N`; the edited segment holds `N + 1` poses.
    pub n_points: usize,
    pub weights: EditWeights,
    pub hard_endpoint: bool,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub smoothness: SmoothnessForm,
}

impl Default for EditConfig {
    fn default() -> Self {
        EditConfig {
            n_points: 20,
            weights: EditWeights::default(),
            hard_endpoint: true,
            max_iters: 200,
            grad_tol: 1e-8,
            smoothness: SmoothnessForm::default(),
        }
    }
}

impl EditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::invalid(format!("n_points must be >= 2, got {}", self.n_points)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 0.0) {
            return Err(Error::invalid("grad_tol must be finite and >= 0"));
        }
        self.weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditResult {
    /// Optimized poses for base indices `start_index ..= start_index + n_effective`.
    pub segment: Trajectory,
    pub start_index: usize,
    /// `N` after clamping to `k*` when the base prefix is too short.
    pub n_effective: usize,
    /// Full objective before the first and after every accepted iteration.
    pub objective_trace: Vec<f64>,
    /// Position error (m) and quaternion distance of the last pose vs. the target.
    pub endpoint_error: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the Riemannian orientation gradient at exit.
    pub grad_norm: f64,
}

impl EditResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

/// Everything the orientation solver and objective need about one instance.
struct Problem<'a> {
    base: &'a [Pose],
    target: &'a Pose,
    weights: EditWeights,
    hard: bool,
    /// Reference step `v_i` for `i = 1..=N` (index 0 unused).
    ref_steps: Vec<Vector3<f64>>,
    /// Reference relative rotation `R_i` for `i = 1..=N` (index 0 unused).
    ref_rots: Vec<Quaternion<f64>>,
}

impl<'a> Problem<'a> {
    fn new(base: &'a [Pose], target: &'a Pose, cfg: &EditConfig) -> Self {
        let n = base.len() - 1;
        let mut ref_steps = vec![Vector3::zeros(); n + 1];
        let mut ref_rots = vec![Quaternion::identity(); n + 1];
        if cfg.smoothness == SmoothnessForm::Relative {
            for i in 1..=n {
                ref_steps[i] = base[i].position() - base[i - 1].position();
                ref_rots[i] = base[i].orientation().into_inner() * base[i - 1].orientation().into_inner().conjugate();
            }
        }
        Problem {
            base,
            target,
            weights: cfg.weights,
            hard: cfg.hard_endpoint,
            ref_steps,
            ref_rots,
        }
    }

    fn n(&self) -> usize {
        self.base.len() - 1
    }

    fn position_objective(&self, p: &[Vector3<f64>]) -> f64 {
        let w = &self.weights;
        let n = self.n();
        let fid: f64 = (0..=n).map(|i| (p[i] - self.base[i].position()).norm_squared()).sum();
        let smooth: f64 = (1..=n)
            .map(|i| (p[i] - p[i - 1] - self.ref_steps[i]).norm_squared())
            .sum();
        let end = (p[n] - self.target.position()).norm_squared();
        fid + w.lambda_s * smooth + w.lambda_e * end
    }

    fn orientation_objective(&self, q: &[Quaternion<f64>]) -> f64 {
        let w = &self.weights;
        let n = self.n();
        let fid: f64 = (0..=n)
            .map(|i| 1.0 - dot(&q[i], self.base[i].orientation()).abs().min(1.0))
            .sum();
        let smooth: f64 = (1..=n)
            .map(|i| 1.0 - q[i].coords.dot(&(self.ref_rots[i] * q[i - 1]).coords).abs().min(1.0))
            .sum();
        let end = 1.0 - dot(&q[n], self.target.orientation()).abs().min(1.0);
        w.lambda_qf * fid + w.lambda_s * w.lambda_qs * smooth + w.lambda_e * w.lambda_qe * end
    }

    fn free_orientations(&self) -> usize {
        if self.hard {
            self.n()
        } else {
            self.n() + 1
        }
    }

    /// Riemannian gradient for the free orientations, plus per-node curvature
    /// estimates used as a diagonal preconditioner.
    fn orientation_gradient(&self, q: &[Quaternion<f64>]) -> (Vec<Quaternion<f64>>, Vec<f64>) {
        let w = &self.weights;
        let n = self.n();
        let m = self.free_orientations();
        let cs = w.lambda_s * w.lambda_qs;
        let ce = w.lambda_e * w.lambda_qe;
        let mut grad = vec![Quaternion::new(0.0, 0.0, 0.0, 0.0); m];
        let mut curv = vec![0.0; m];
        for i in 0..m {
            let b = self.base[i].orientation().into_inner();
            grad[i] -= b * (w.lambda_qf * sgn(q[i].coords.dot(&b.coords)));
            curv[i] += w.lambda_qf;
            if i >= 1 {
                let r = self.ref_rots[i] * q[i - 1];
                grad[i] -= r * (cs * sgn(q[i].coords.dot(&r.coords)));
                curv[i] += cs;
            }
            if i < n {
                let r = self.ref_rots[i + 1].conjugate() * q[i + 1];
                grad[i] -= r * (cs * sgn(q[i].coords.dot(&r.coords)));
                curv[i] += cs;
            }
            if i == n {
                let h = self.target.orientation().into_inner();
                grad[i] -= h * (ce * sgn(q[i].coords.dot(&h.coords)));
                curv[i] += ce;
            }
            // project onto the tangent space at q_i
            let g = grad[i];
            grad[i] = g - q[i] * g.coords.dot(&q[i].coords);
        }
        (grad, curv)
    }
}

fn dot(q: &Quaternion<f64>, u: &nalgebra::UnitQuaternion<f64>) -> f64 {
    q.coords.dot(&u.coords)
}

// Subgradient choice at <q, r> = 0: treat it as positive.
fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Solves the position subproblem exactly. Returns all `N + 1` positions.
fn solve_positions(pb: &Problem<'_>) -> Vec<Vector3<f64>> {
    let n = pb.n();
    let w = &pb.weights;
    let ls = w.lambda_s;
    let h = *pb.target.position();
    let m = if pb.hard { n } else { n + 1 };
    let mut diag = vec![0.0; m];
    let off = vec![-ls; m.saturating_sub(1)];
    let mut rhs = vec![Vector3::zeros(); m];
    for i in 0..m {
        diag[i] = 1.0;
        rhs[i] = *pb.base[i].position();
        if i >= 1 {
            diag[i] += ls;
            rhs[i] += pb.ref_steps[i] * ls;
        }
        if i < n {
            diag[i] += ls;
            rhs[i] -= pb.ref_steps[i + 1] * ls;
        }
        if pb.hard && i + 1 == n {
            // p_N is fixed at the target; its coupling moves to the right-hand side
            rhs[i] += h * ls;
        }
        if !pb.hard && i == n {
            diag[i] += w.lambda_e;
            rhs[i] += h * w.lambda_e;
        }
    }
    let mut p = solve_tridiagonal(&diag, &off, &rhs);
    if pb.hard {
        p.push(h);
    }
    p
}

/// Thomas algorithm for a symmetric tridiagonal system; `off[i]` couples
/// unknowns `i` and `i + 1`. Diagonal dominance makes pivoting unnecessary.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let m = diag.len();
    let mut upper = vec![0.0; m];
    let mut x = rhs.to_vec();
    let mut prev_denom = 0.0;
    for i in 0..m {
        let mut denom = diag[i];
        if i > 0 {
            denom -= off[i - 1] * upper[i - 1];
            let carry = x[i - 1] * off[i - 1];
            x[i] -= carry;
        }
        if i + 1 < m {
            upper[i] = off[i] / denom;
        }
        x[i] /= denom;
        prev_denom = denom;
    }
    debug_assert!(m == 0 || prev_denom > 0.0);
    for i in (0..m.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= next * upper[i];
    }
    x
}

/// Optimizes `base[k*-N ..= k*]` toward `human_start`.
///
/// `N` is clamped to `k*` when the base prefix is shorter than the segment.
pub fn optimize_segment(base: &Trajectory, k_star: usize, human_start: &Pose, cfg: &EditConfig) -> Result<EditResult> {
    cfg.validate()?;
    if base.len() < 2 {
        return Err(Error::invalid("base trajectory needs at least 2 poses"));
    }
    if k_star >= base.len() {
        return Err(Error::invalid(format!(
            "k* = {k_star} out of range for base of length {}",
            base.len()
        )));
    }
    let n = cfg.n_points.min(k_star);
    let start = k_star - n;
    let seg_base = &base.poses()[start..=k_star];
    let pb = Problem::new(seg_base, human_start, cfg);

    let positions = solve_positions(&pb);
    let pos_obj = pb.position_objective(&positions);

    let mut q: Vec<Quaternion<f64>> = (0..=n)
        .map(|i| {
            let t = if n == 0 { 1.0 } else { i as f64 / n as f64 };
            slerp_quat(seg_base[0].orientation(), human_start.orientation(), t).into_inner()
        })
        .collect();
    if pb.hard {
        q[n] = human_start.orientation().into_inner();
    }

    let mut value = pb.orientation_objective(&q);
    let mut trace = vec![pos_obj + value];
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = 0.0;
    let mut alpha: f64 = 1.0;
    let free = pb.free_orientations();

    loop {
        if free == 0 {
            converged = true;
            break;
        }
        let (grad, curv) = pb.orientation_gradient(&q);
        grad_norm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if grad_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        // preconditioned descent direction and its directional derivative
        let dirs: Vec<Quaternion<f64>> = grad
            .iter()
            .zip(&curv)
            .map(|(g, c)| if *c > 0.0 { -*g / *c } else { Quaternion::new(0.0, 0.0, 0.0, 0.0) })
            .collect();
        let slope: f64 = grad.iter().zip(&dirs).map(|(g, d)| g.coords.dot(&d.coords)).sum();

        alpha = (alpha * 2.0).min(1.0);
        let mut accepted = None;
        while alpha > 1e-12 {
            let mut trial = q.clone();
            for i in 0..free {
                let moved = trial[i] + dirs[i] * alpha;
                trial[i] = moved / moved.norm();
            }
            let v = pb.orientation_objective(&trial);
            if v <= value + 1e-4 * alpha * slope {
                accepted = Some((trial, v));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, v)) => {
                q = trial;
                value = v;
                iterations += 1;
                trace.push(pos_obj + value);
            }
            // no decrease is representable any more
            None => break,
        }
    }
    let poses: Vec<Pose> = positions
        .iter()
        .zip(&q)
        .map(|(p, q)| Pose::new(*p, canonical_unit(*q)))
        .collect();
    let last = poses[n];
    let endpoint_error = (
        position_distance(&last, human_start),
        quaternion_distance(&last, human_start),
    );
    Ok(EditResult {
        segment: Trajectory::new(base.dt(), poses)?,
        start_index: start,
        n_effective: n,
        objective_trace: trace,
        endpoint_error,
        iterations,
        converged,
        grad_norm,
    })
}

/// Tolerance on the segment/demonstration junction when assembling.
pub const JUNCTION_TOL: f64 = 1e-6;

/// `base[..k*-N] ++ segment ++ human[1..]`.
///
/// `n` is the effective segment length (`segment.len() == n + 1`). The
/// demonstration is resampled to the base period first if needed.
pub fn assemble_corrected(
    base: &Trajectory,
    k_star: usize,
    segment: &Trajectory,
    human: &Trajectory,
    n: usize,
) -> Result<Trajectory> {
    if n > k_star {
        return Err(Error::inconsistent(format!("segment length N = {n} exceeds k* = {k_star}")));
    }
    if k_star >= base.len() {
        return Err(Error::inconsistent(format!(
            "k* = {k_star} out of range for base of length {}",
            base.len()
        )));
    }
    if segment.len() != n + 1 {
        return Err(Error::inconsistent(format!(
            "segment has {} poses, expected N + 1 = {}",
            segment.len(),
            n + 1
        )));
    }
    let human = align_period(human, base.dt())?;
    let gap = position_distance(segment.last(), human.first());
    if gap > JUNCTION_TOL {
        return Err(Error::inconsistent(format!(
            "segment ends {gap:.3e} m away from the demonstration start"
        )));
    }
    let mut poses = Vec::with_capacity(k_star + human.len());
    poses.extend_from_slice(&base.poses()[..k_star - n]);
    poses.extend_from_slice(segment.poses());
    poses.extend_from_slice(&human.poses()[1..]);
    Trajectory::new(base.dt(), poses)
}

pub(crate) fn align_period(traj: &Trajectory, dt: f64) -> Result<Trajectory> {
    if (traj.dt() - dt).abs() <= 1e-12 * dt {
        Ok(traj.clone())
    } else {
        resample(traj, dt)
    }
}

/// Output of the align → optimize → assemble pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub alignment: AlignmentResult,
    /// Demonstration at the base period.
    pub demo: Trajectory,
    pub edit: EditResult,
    pub corrected: Trajectory,
}

impl Correction {
    pub fn k_star(&self) -> usize {
        self.alignment.k_star
    }

    pub fn n_effective(&self) -> usize {
        self.edit.n_effective
    }

    /// Largest position step over the edited region including both junctions
    /// (`corrected[k*-N-1] -> corrected[k*-N]` and `corrected[k*] -> corrected[k*+1]`).
    pub fn junction_max_step(&self) -> f64 {
        let poses = self.corrected.poses();
        let lo = self.edit.start_index.saturating_sub(1);
        let hi = (self.k_star() + 1).min(poses.len() - 1);
        poses[lo..=hi]
            .windows(2)
            .map(|w| position_distance(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }
}

/// Aligns the demonstration onto the base, edits the transition segment and
/// assembles the corrected trajectory.
pub fn correct(base: &Trajectory, demo: &Trajectory, weights: &AlignmentWeights, cfg: &EditConfig) -> Result<Correction> {
    let demo = align_period(demo, base.dt())?;
    let alignment = nearest_point(base.poses(), demo.first(), weights)?;
    let edit = optimize_segment(base, alignment.k_star, demo.first(), cfg)?;
    let corrected = assemble_corrected(base, alignment.k_star, &edit.segment, &demo, edit.n_effective)?;
    Ok(Correction {
        alignment,
        demo,
        edit,
        corrected,
    })
}
