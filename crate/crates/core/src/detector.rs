//! Failure detection from the discrepancy between predicted and measured
//! wrenches, plus the position-error baseline.
//!
//! An episode counts as predicted-failed when [`detect`] fires anywhere in its
//! score stream; with `debounce_k = 1` that is `max(scores) > c`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{position_distance, Pose, Wrench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// L1 distance between predicted and measured wrench.
    ForcePredictionError,
    /// Distance between the predicted action and the current pose.
    PositionPredictionError,
    // KL-divergence and reconstruction-loss scores need the trained
    // generative policy and are not provided here.
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::ForcePredictionError => "force",
            Metric::PositionPredictionError => "position",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "force" | "force_prediction_error" => Ok(Metric::ForcePredictionError),
            "position" | "position_prediction_error" => Ok(Metric::PositionPredictionError),
            other => Err(Error::invalid(format!("unknown metric '{other}' (expected force or position)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub metric: Metric,
    pub threshold_c: f64,
    /// Consecutive exceedances required before triggering.
    pub debounce_k: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            metric: Metric::ForcePredictionError,
            threshold_c: 11.0,
            debounce_k: 1,
        }
    }
}

impl DetectorConfig {
    pub fn new(metric: Metric, threshold_c: f64, debounce_k: usize) -> Result<Self> {
        let cfg = DetectorConfig {
            metric,
            threshold_c,
            debounce_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_c.is_finite() && self.threshold_c > 0.0) {
            return Err(Error::invalid(format!("threshold must be > 0, got {}", self.threshold_c)));
        }
        if self.debounce_k == 0 {
            return Err(Error::invalid("debounce must be at least 1"));
        }
        Ok(())
    }
}

/// `|| predicted - measured ||_1` over all six components.
pub fn force_error(predicted: &Wrench, measured: &Wrench) -> f64 {
    (predicted.to_vector() - measured.to_vector()).abs().sum()
}

pub fn position_error(predicted_action: &Pose, current: &Pose) -> f64 {
    position_distance(predicted_action, current)
}

/// First index `t` where the last `debounce_k` scores all exceed the threshold.
pub fn detect(scores: impl IntoIterator<Item = f64>, cfg: &DetectorConfig) -> Option<usize> {
    let mut s = StreamingDetector::new(*cfg);
    scores.into_iter().position(|e| s.push(e))
}

/// Online form of [`detect`]. Once triggered it stays triggered until [`reset`](Self::reset).
#[derive(Debug, Clone)]
pub struct StreamingDetector {
    cfg: DetectorConfig,
    run: usize,
    seen: usize,
    triggered_at: Option<usize>,
}

impl StreamingDetector {
    pub fn new(cfg: DetectorConfig) -> Self {
        StreamingDetector {
            cfg,
            run: 0,
            seen: 0,
            triggered_at: None,
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Feeds one score; returns true on the step that triggers and afterwards.
    pub fn push(&mut self, score: f64) -> bool {
        if self.triggered_at.is_none() {
            self.run = if score > self.cfg.threshold_c { self.run + 1 } else { 0 };
            if self.run >= self.cfg.debounce_k.max(1) {
                self.triggered_at = Some(self.seen);
            }
        }
        self.seen += 1;
        self.triggered_at.is_some()
    }

    pub fn triggered_at(&self) -> Option<usize> {
        self.triggered_at
    }

    pub fn reset(&mut self) {
        self.run = 0;
        self.seen = 0;
        self.triggered_at = None;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpisode {
    pub scores: Vec<f64>,
    pub failed: bool,
}

impl LabeledEpisode {
    pub fn new(scores: Vec<f64>, failed: bool) -> Result<Self> {
        let e = LabeledEpisode { scores, failed };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::invalid("episode has no scores"));
        }
        if let Some(i) = self.scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("score {i} is not finite")));
        }
        Ok(())
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Largest threshold that still flags every failed episode.
///
/// With `m_f` the smallest per-episode maximum among failed episodes, the
/// threshold is the midpoint between `m_f` and the largest successful maximum
/// below it, or `m_f * (1 - 1e-9)` when no successful maximum lies below.
pub fn calibrate(episodes: &[LabeledEpisode]) -> Result<f64> {
    for e in episodes {
        e.validate()?;
    }
    let m_f = episodes
        .iter()
        .filter(|e| e.failed)
        .map(LabeledEpisode::max_score)
        .fold(f64::INFINITY, f64::min);
    if m_f == f64::INFINITY {
        return Err(Error::Calibration("no failed episodes to calibrate against".into()));
    }
    if m_f <= 0.0 {
        return Err(Error::Calibration(format!(
            "a failed episode never scores above {m_f}; no positive threshold flags it"
        )));
    }
    let below = episodes
        .iter()
        .filter(|e| !e.failed)
        .map(LabeledEpisode::max_score)
        .filter(|&m| m < m_f)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = if below > 0.0 {
        below + 0.5 * (m_f - below)
    } else {
        m_f * (1.0 - 1e-9)
    };
    if !(c < m_f && c > 0.0) {
        return Err(Error::Calibration(format!("no representable threshold below {m_f}")));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl Confusion {
    /// 1.0 when nothing is flagged and nothing failed, 0.0 when nothing is
    /// flagged but failures exist.
    pub fn precision(&self) -> f64 {
        let flagged = self.true_pos + self.false_pos;
        if flagged == 0 {
            if self.false_neg == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.true_pos as f64 / flagged as f64
        }
    }

    /// 1.0 when there are no failed episodes.
    pub fn recall(&self) -> f64 {
        let failed = self.true_pos + self.false_neg;
        if failed == 0 {
            1.0
        } else {
            self.true_pos as f64 / failed as f64
        }
    }
}

pub fn confusion(episodes: &[LabeledEpisode], cfg: &DetectorConfig) -> Confusion {
    let mut c = Confusion::default();
    for e in episodes {
        let flagged = detect(e.scores.iter().copied(), cfg).is_some();
        match (flagged, e.failed) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    c
}

/// `(precision, recall)` of the episode-level detector.
pub fn evaluate(episodes: &[LabeledEpisode], cfg: &DetectorConfig) -> (f64, f64) {
    let c = confusion(episodes, cfg);
    (c.precision(), c.recall())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector3, Vector6};
    use proptest::prelude::*;

    fn cfg(c: f64, k: usize) -> DetectorConfig {
        DetectorConfig::new(Metric::ForcePredictionError, c, k).unwrap()
    }

    fn episodes(failed: &[f64], ok: &[f64]) -> Vec<LabeledEpisode> {
        failed
            .iter()
            .map(|&m| LabeledEpisode::new(vec![0.5 * m, m, 0.25 * m], true).unwrap())
            .chain(ok.iter().map(|&m| LabeledEpisode::new(vec![m, 0.1 * m], false).unwrap()))
            .collect()
    }

    #[test]
    fn force_error_examples() {
        let w = Wrench::new(Vector3::new(1.0, -2.0, 3.0), Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(force_error(&w, &w), 0.0);
        let p = Wrench::new(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let m = Wrench::new(Vector3::new(0.0, 2.0, 0.0), Vector3::new(0.0, 0.0, 0.5));
        assert_eq!(force_error(&p, &m), 3.5);
        let eps = 1e-3;
        let shifted = Wrench::from_vector(&(w.to_vector() + Vector6::repeat(eps)));
        assert!((force_error(&w, &shifted) - 6.0 * eps).abs() < 1e-12);
    }

    #[test]
    fn position_error_examples() {
        let a = Pose::identity();
        assert_eq!(position_error(&a, &a), 0.0);
        assert_eq!(position_error(&a.translated(&Vector3::new(0.012, 0.0, 0.0)), &a), 0.012);
        assert!((position_error(&a.translated(&Vector3::new(0.003, 0.004, 0.0)), &a) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn detect_examples() {
        assert_eq!(detect([1.0, 11.0, 2.0], &cfg(11.0, 1)), None);
        assert_eq!(detect([3.0, 9.0, 12.0, 5.0], &cfg(11.0, 1)), Some(2));
        assert_eq!(detect([12.0, 12.0, 5.0, 12.0, 12.0, 12.0], &cfg(11.0, 3)), Some(5));
        assert!(DetectorConfig::new(Metric::ForcePredictionError, 0.0, 1).is_err());
        assert!(DetectorConfig::new(Metric::ForcePredictionError, 1.0, 0).is_err());
    }

    #[test]
    fn streaming_matches_batch_and_latches() {
        let mut s = StreamingDetector::new(cfg(11.0, 2));
        let out: Vec<bool> = [12.0, 3.0, 12.0, 13.0, 1.0].iter().map(|&e| s.push(e)).collect();
        assert_eq!(out, [false, false, false, true, true]);
        assert_eq!(s.triggered_at(), Some(3));
        s.reset();
        assert_eq!(s.triggered_at(), None);
    }

    #[test]
    fn calibrate_examples() {
        let eps = episodes(&[14.0, 18.0], &[6.0, 9.0]);
        let c = calibrate(&eps).unwrap();
        assert!(c < 14.0 && c > 9.0);
        assert_eq!(evaluate(&eps, &cfg(c, 1)), (1.0, 1.0));

        let all_failed = episodes(&[5.0, 7.0], &[]);
        let c = calibrate(&all_failed).unwrap();
        assert!(c < 5.0 && c > 5.0 * (1.0 - 1e-8));
        assert_eq!(evaluate(&all_failed, &cfg(c, 1)), (1.0, 1.0));

        let mixed = episodes(&[10.0], &[12.0, 13.0]);
        let c = calibrate(&mixed).unwrap();
        assert!(c < 10.0 && c > 10.0 * (1.0 - 1e-8));
        let (p, r) = evaluate(&mixed, &cfg(c, 1));
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn calibrate_errors() {
        assert!(matches!(calibrate(&episodes(&[], &[3.0])), Err(Error::Calibration(_))));
        let zero = vec![LabeledEpisode::new(vec![0.0, 0.0], true).unwrap(), LabeledEpisode::new(vec![1.0], false).unwrap()];
        assert!(matches!(calibrate(&zero), Err(Error::Calibration(_))));
        assert!(LabeledEpisode::new(vec![], true).is_err());
        assert!(LabeledEpisode::new(vec![f64::NAN], true).is_err());
    }

    #[test]
    fn evaluate_conventions() {
        let eps = episodes(&[14.0], &[6.0]);
        assert_eq!(evaluate(&eps, &cfg(1.0, 1)), (0.5, 1.0));
        assert_eq!(evaluate(&eps, &cfg(100.0, 1)), (0.0, 0.0));
        let ok_only = episodes(&[], &[6.0]);
        assert_eq!(evaluate(&ok_only, &cfg(100.0, 1)), (1.0, 1.0));
        assert_eq!(evaluate(&ok_only, &cfg(1.0, 1)), (0.0, 1.0));
    }

    fn scored_set() -> impl Strategy<Value = Vec<LabeledEpisode>> {
        (
            prop::collection::vec((prop::collection::vec(0.5f64..30.0, 1..6), any::<bool>()), 1..25),
            prop::collection::vec(0.5f64..30.0, 1..6),
        )
            .prop_map(|(mut v, forced)| {
                v.push((forced, true));
                v.into_iter().map(|(s, f)| LabeledEpisode::new(s, f).unwrap()).collect()
            })
    }

    proptest! {
        #[test]
        fn calibration_gives_full_recall_and_best_precision(eps in scored_set()) {
            let c = calibrate(&eps).unwrap();
            let (p, r) = evaluate(&eps, &cfg(c, 1));
            prop_assert_eq!(r, 1.0);
            // exhaustive sweep: just below every distinct max and above the largest
            let mut candidates: Vec<f64> = eps.iter().map(|e| e.max_score() * (1.0 - 1e-12)).collect();
            candidates.push(eps.iter().map(|e| e.max_score()).fold(0.0, f64::max) + 1.0);
            for t in candidates {
                let (pt, rt) = evaluate(&eps, &cfg(t, 1));
                if rt == 1.0 {
                    prop_assert!(pt <= p + 1e-15, "threshold {} beats calibrated {} ({} > {})", t, c, pt, p);
                }
            }
        }

        #[test]
        fn detect_monotone_in_threshold(scores in prop::collection::vec(0.0f64..20.0, 0..30), c1 in 0.1f64..20.0, dc in 0.0f64..10.0, k in 1usize..4) {
            let lo = detect(scores.iter().copied(), &cfg(c1, k));
            let hi = detect(scores.iter().copied(), &cfg(c1 + dc, k));
            match (lo, hi) {
                (None, Some(_)) => prop_assert!(false, "raising the threshold created a trigger"),
                (Some(a), Some(b)) => prop_assert!(b >= a),
                _ => {}
            }
        }

        #[test]
        fn force_error_is_a_norm_distance(a in prop::array::uniform6(-50.0f64..50.0), b in prop::array::uniform6(-50.0f64..50.0), c in prop::array::uniform6(-50.0f64..50.0), s in -10.0f64..10.0) {
            let w = |v: [f64; 6]| Wrench::from_vector(&Vector6::from(v));
            let (wa, wb, wc) = (w(a), w(b), w(c));
            prop_assert!(force_error(&wa, &wc) <= force_error(&wa, &wb) + force_error(&wb, &wc) + 1e-9);
            let scaled = |x: &Wrench| Wrench::from_vector(&(x.to_vector() * s));
            let lhs = force_error(&scaled(&wa), &scaled(&wb));
            prop_assert!((lhs - s.abs() * force_error(&wa, &wb)).abs() <= 1e-9 * (1.0 + lhs));
        }
    }
}
