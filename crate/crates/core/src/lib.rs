//! Data machinery for trajectory-editing residual DAgger on contact-rich
//! insertion tasks.
//!
//! * [`geometry`]: poses, wrenches, trajectories, distances, slerp.
//! * [`alignment`]: locate where a corrective demonstration attaches to a rollout.
//! * [`editor`]: optimize the transition segment and assemble the corrected trajectory.
//! * [`residual`]: turn a correction into supervised residual samples.
//! * [`detector`]: force-discrepancy failure detection and threshold calibration.
//! * [`impedance`]: Cartesian impedance law, planar arm and task-space body.
//! * [`sim`]: toy peg-in-hole environment and the closed-loop episode runner.
//! * [`io`]: text formats and run configuration.

pub mod alignment;
pub mod detector;
pub mod editor;
pub mod error;
pub mod geometry;
pub mod impedance;
pub mod io;
pub mod residual;
pub mod sim;

pub use error::{Error, Result};
