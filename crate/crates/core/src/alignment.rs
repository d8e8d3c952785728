//! Nearest-pose alignment of a corrective demonstration onto a base rollout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{position_distance, quaternion_distance, Pose};

/// Weights of the combined pose distance `D = omega_p * d_p + omega_q * d_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentWeights {
    pub omega_p: f64,
    pub omega_q: f64,
}

impl Default for AlignmentWeights {
    fn default() -> Self {
        AlignmentWeights {
            omega_p: 1.0,
            omega_q: 0.5,
        }
    }
}

impl AlignmentWeights {
    pub fn new(omega_p: f64, omega_q: f64) -> Result<Self> {
        let w = AlignmentWeights { omega_p, omega_q };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p.is_finite() && self.omega_p > 0.0) {
            return Err(Error::invalid(format!("omega_p must be > 0, got {}", self.omega_p)));
        }
        if !(self.omega_q.is_finite() && self.omega_q >= 0.0) {
            return Err(Error::invalid(format!("omega_q must be >= 0, got {}", self.omega_q)));
        }
        Ok(())
    }

    pub fn distance(&self, a: &Pose, b: &Pose) -> f64 {
        self.omega_p * position_distance(a, b) + self.omega_q * quaternion_distance(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub k_star: usize,
    pub distance: f64,
}

/// Index of the pose in `base` closest to `human_start`; ties go to the
/// smallest index.
pub fn nearest_point(base: &[Pose], human_start: &Pose, w: &AlignmentWeights) -> Result<AlignmentResult> {
    w.validate()?;
    let mut best: Option<AlignmentResult> = None;
    for (k, pose) in base.iter().enumerate() {
        let distance = w.distance(pose, human_start);
        if best.is_none_or(|b| distance < b.distance) {
            best = Some(AlignmentResult { k_star: k, distance });
        }
    }
    best.ok_or(Error::EmptyTrajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn line() -> Vec<Pose> {
        (0..11)
            .map(|i| Pose::from_position(Vector3::new(i as f64 * 0.1, 0.0, 0.0)))
            .collect()
    }

    // Independent re-implementation: collect every distance, then take the
    // first index attaining the minimum.
    fn scan(base: &[Pose], h: &Pose, wp: f64, wq: f64) -> usize {
        let d: Vec<f64> = base
            .iter()
            .map(|b| {
                let dp = ((b.position() - h.position()).norm_squared()).sqrt();
                let qb = b.wxyz();
                let qh = h.wxyz();
                let dot: f64 = (0..4).map(|i| qb[i] * qh[i]).sum();
                wp * dp + wq * (1.0 - dot.abs())
            })
            .collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        d.iter().position(|&v| v == min).unwrap()
    }

    #[test]
    fn exact_match_gives_zero_distance() {
        let base = line();
        let r = nearest_point(&base, &base[7], &AlignmentWeights::default()).unwrap();
        assert_eq!(r.k_star, 7);
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn straight_line_example() {
        let h = Pose::from_position(Vector3::new(0.52, 0.0, 0.0));
        let r = nearest_point(&line(), &h, &AlignmentWeights::default()).unwrap();
        assert_eq!(r.k_star, 5);
        assert_eq!(r.k_star, scan(&line(), &h, 1.0, 0.5));
    }

    #[test]
    fn rotating_orientation_example() {
        let base: Vec<Pose> = (0..11)
            .map(|i| Pose::identity().with_orientation(rotation(Vector3::z(), (10.0 * i as f64).to_radians())))
            .collect();
        let h = Pose::identity().with_orientation(rotation(Vector3::z(), 42f64.to_radians()));
        let r = nearest_point(&base, &h, &AlignmentWeights::default()).unwrap();
        assert_eq!(r.k_star, 4);
        assert_eq!(scan(&base, &h, 1.0, 0.5), 4);
    }

    #[test]
    fn ties_break_to_smallest_index() {
        let p = Pose::from_position(Vector3::new(1.0, 0.0, 0.0));
        let base = vec![p, p, p];
        assert_eq!(nearest_point(&base, &Pose::identity(), &AlignmentWeights::default()).unwrap().k_star, 0);
    }

    #[test]
    fn empty_base_is_an_error() {
        assert_eq!(
            nearest_point(&[], &Pose::identity(), &AlignmentWeights::default()),
            Err(Error::EmptyTrajectory)
        );
        assert!(AlignmentWeights::new(0.0, 0.5).is_err());
        assert!(AlignmentWeights::new(1.0, -0.5).is_err());
    }

    fn pose() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-1.0f64..1.0), prop::array::uniform4(-1.0f64..1.0))
            .prop_filter("nonzero quaternion", |(_, q)| q.iter().map(|v| v * v).sum::<f64>() > 1e-2)
            .prop_map(|(p, q)| Pose::from_wxyz(Vector3::from(p), q).unwrap())
    }

    proptest! {
        #[test]
        fn matches_linear_scan(base in prop::collection::vec(pose(), 1..40), h in pose(), wp in 0.1f64..5.0, wq in 0.0f64..5.0) {
            let w = AlignmentWeights::new(wp, wq).unwrap();
            let r = nearest_point(&base, &h, &w).unwrap();
            prop_assert_eq!(r.k_star, scan(&base, &h, wp, wq));
        }

        #[test]
        fn invariant_to_weight_scaling(base in prop::collection::vec(pose(), 1..40), h in pose(), s in 0.01f64..100.0) {
            let a = nearest_point(&base, &h, &AlignmentWeights::new(1.0, 0.5).unwrap()).unwrap();
            let b = nearest_point(&base, &h, &AlignmentWeights::new(s, 0.5 * s).unwrap()).unwrap();
            // exact floating ties can be reordered by scaling; compare distances
            prop_assert!((a.distance * s - b.distance).abs() <= 1e-12 * (1.0 + b.distance));
            prop_assert!((w_dist(&base[b.k_star], &h) - w_dist(&base[a.k_star], &h)).abs() <= 1e-12);
        }

        #[test]
        fn member_has_zero_distance(base in prop::collection::vec(pose(), 1..40), j in 0usize..40) {
            let j = j % base.len();
            let r = nearest_point(&base, &base[j], &AlignmentWeights::default()).unwrap();
            prop_assert_eq!(r.distance, 0.0);
        }
    }

    fn w_dist(a: &Pose, b: &Pose) -> f64 {
        AlignmentWeights::default().distance(a, b)
    }
}
