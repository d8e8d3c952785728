//! Nearest-state residual lookup over aggregated samples.
//!
//! The distance is `d_p + w_q d_q`. Since `d_q >= 0`, every sample closer
//! than the nearest-by-position candidate lies inside a position ball of that
//! candidate's distance, so a position k-d tree gives the exact answer.

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use crate::error::{Error, Result};
use crate::geometry::{position_distance, quaternion_distance, Pose};
use crate::residual::{Residual, ResidualSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub index: usize,
    pub distance: f64,
    pub residual: Residual,
}

pub struct LookupCorrector {
    states: Vec<Pose>,
    residuals: Vec<Residual>,
    tree: ImmutableKdTree<f64, 3>,
    q_weight: f64,
}

impl std::fmt::Debug for LookupCorrector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LookupCorrector")
            .field("samples", &self.states.len())
            .field("q_weight", &self.q_weight)
            .finish()
    }
}

impl LookupCorrector {
    pub fn new(samples: &[ResidualSample], q_weight: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("corrector needs at least one sample"));
        }
        if samples.len() > u32::MAX as usize {
            return Err(Error::invalid("too many samples for the lookup index"));
        }
        if !(q_weight.is_finite() && q_weight >= 0.0) {
            return Err(Error::invalid(format!("orientation weight must be >= 0, got {q_weight}")));
        }
        let points: Vec<[f64; 3]> = samples
            .iter()
            .map(|s| {
                let p = s.state.position();
                [p.x, p.y, p.z]
            })
            .collect();
        let tree = ImmutableKdTree::new_from_slice(&points)
            .map_err(|e| Error::invalid(format!("cannot index samples: {e:?}")))?;
        Ok(LookupCorrector {
            states: samples.iter().map(|s| s.state).collect(),
            residuals: samples.iter().map(|s| s.residual).collect(),
            tree,
            q_weight,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn distance(&self, i: usize, state: &Pose) -> f64 {
        let s = &self.states[i];
        position_distance(s, state) + self.q_weight * quaternion_distance(s, state)
    }

    /// Closest sample; ties go to the earliest sample.
    pub fn lookup(&self, state: &Pose) -> Lookup {
        let p = state.position();
        let q = [p.x, p.y, p.z];
        let first = self.tree.query(&q).nearest_one::<SquaredEuclidean<f64>>().execute();
        let mut best = (self.distance(first.item as usize, state), first.item as usize);
        // pad the radius so rounding in the squared distance cannot drop a tie
        let r = best.0 * (1.0 + 1e-9) + 1e-15;
        for hit in self.tree.query(&q).within::<SquaredEuclidean<f64>>(r * r).unsorted().execute() {
            let i = hit.item as usize;
            let d = self.distance(i, state);
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
        }
        Lookup {
            index: best.1,
            distance: best.0,
            residual: self.residuals[best.1],
        }
    }
}
