//! `# samples fields=region,t,state(7),base_action(7),dp(3),dq(4)`; `t` is
//! the step index and `dq` is scalar-first.

use nalgebra::Vector3;

use super::trajectory::{parse_pose, parse_unit_quaternion, pose_values};
use super::{join_f64, parse_field, record, split_lines, FormatError};
use crate::error::Result;
use crate::residual::{Residual, ResidualSample};

pub const SAMPLE_FIELDS: [&str; 23] = [
    "region", "t", "sx", "sy", "sz", "sqw", "sqx", "sqy", "sqz", "bx", "by", "bz", "bqw", "bqx", "bqy", "bqz", "dpx",
    "dpy", "dpz", "dqw", "dqx", "dqy", "dqz",
];

pub fn write_samples(samples: &[ResidualSample]) -> String {
    let mut out = format!("# samples count={} fields={}\n", samples.len(), SAMPLE_FIELDS.join(","));
    for s in samples {
        let dp = s.residual.dp;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.region,
            s.step_index,
            join_f64(pose_values(&s.state)),
            join_f64(pose_values(&s.base_action)),
            join_f64([dp.x, dp.y, dp.z]),
            join_f64(s.residual.dq_wxyz()),
        ));
    }
    out
}

pub fn parse_samples(text: &str) -> Result<Vec<ResidualSample>> {
    let (header, lines) = split_lines(text)?;
    if header.kind != "samples" {
        return Err(FormatError::new(1, "header", format!("expected a samples file, found '{}'", header.kind)).into());
    }
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(lines.len());
    for (ln, text) in lines {
        let raw = record(ln, text, &SAMPLE_FIELDS)?;
        let region = raw[0]
            .parse()
            .map_err(|e: crate::error::Error| FormatError::new(ln, "region", e.to_string()))?;
        let step_index = raw[1]
            .parse()
            .map_err(|_| FormatError::new(ln, "t", format!("'{}' is not a step index", raw[1])))?;
        let state = parse_pose(ln, &SAMPLE_FIELDS[2..9], &raw[2..9], &mut warnings)?;
        let base_action = parse_pose(ln, &SAMPLE_FIELDS[9..16], &raw[9..16], &mut warnings)?;
        let mut dp = [0.0; 3];
        for k in 0..3 {
            dp[k] = parse_field(ln, SAMPLE_FIELDS[16 + k], raw[16 + k])?;
        }
        let dq = parse_unit_quaternion(ln, &SAMPLE_FIELDS[19..23], &raw[19..23], &mut warnings)?;
        out.push(ResidualSample {
            region,
            step_index,
            state,
            base_action,
            residual: Residual {
                dp: Vector3::from(dp),
                dq,
            },
            attachment: None,
        });
    }
    if let Some(n) = header.values.get("count") {
        if n.parse::<usize>().ok() != Some(out.len()) {
            return Err(FormatError::new(1, "count", format!("header says {n}, file holds {}", out.len())).into());
        }
    }
    Ok(out)
}
