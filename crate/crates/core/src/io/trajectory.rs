//! `# trajectory dt=0.02 fields=t,px,py,pz,qw,qx,qy,qz[,fx,fy,fz,tx,ty,tz]`

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{fmt_f64, join_f64, parse_field, read_text, record, split_lines, write_text, FormatError, ParseWarning};
use crate::error::Result;
use crate::geometry::{canonicalize, Pose, Trajectory, Wrench};

pub const POSE_FIELDS: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];
pub const WRENCH_FIELDS: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

/// Quaternions further than this from unit norm are rejected.
pub const NORM_REJECT: f64 = 1e-6;
/// Quaternions further than this from unit norm are renormalized with a warning.
pub const NORM_WARN: f64 = 1e-9;

/// Four scalar-first fields into a canonical unit quaternion, checking the norm.
pub(crate) fn parse_unit_quaternion(
    line: usize,
    names: &[&str],
    raw: &[&str],
    warnings: &mut Vec<ParseWarning>,
) -> std::result::Result<UnitQuaternion<f64>, FormatError> {
    let mut q = [0.0; 4];
    for i in 0..4 {
        q[i] = parse_field(line, names[i], raw[i])?;
    }
    let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let dev = (norm - 1.0).abs();
    if dev > NORM_REJECT {
        return Err(FormatError::new(
            line,
            names[0],
            format!("quaternion norm {norm} is not unit within {NORM_REJECT:e}"),
        ));
    }
    if dev > NORM_WARN {
        warnings.push(ParseWarning {
            line,
            message: format!("quaternion norm {norm} renormalized"),
        });
    }
    canonicalize(Quaternion::new(q[0], q[1], q[2], q[3])).map_err(|e| FormatError::new(line, names[0], e.to_string()))
}

/// Seven fields `px, py, pz, qw, qx, qy, qz` into a pose.
pub(crate) fn parse_pose(
    line: usize,
    names: &[&str],
    raw: &[&str],
    warnings: &mut Vec<ParseWarning>,
) -> std::result::Result<Pose, FormatError> {
    let mut p = [0.0; 3];
    for i in 0..3 {
        p[i] = parse_field(line, names[i], raw[i])?;
    }
    let q = parse_unit_quaternion(line, &names[3..7], &raw[3..7], warnings)?;
    Ok(Pose::new(Vector3::from(p), q))
}

pub(crate) fn pose_values(p: &Pose) -> [f64; 7] {
    let x = p.position();
    let q = p.wxyz();
    [x.x, x.y, x.z, q[0], q[1], q[2], q[3]]
}

pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut fields: Vec<&str> = POSE_FIELDS.to_vec();
    if traj.wrenches().is_some() {
        fields.extend(WRENCH_FIELDS);
    }
    let mut out = format!("# trajectory dt={} fields={}\n", fmt_f64(traj.dt()), fields.join(","));
    for (i, p) in traj.poses().iter().enumerate() {
        out.push_str(&fmt_f64(i as f64 * traj.dt()));
        out.push(',');
        out.push_str(&join_f64(pose_values(p)));
        if let Some(w) = traj.wrenches() {
            out.push(',');
            out.push_str(&join_f64(w[i].to_vector().iter().copied()));
        }
        out.push('\n');
    }
    out
}

/// Parses a trajectory; the warnings list renormalized quaternions.
pub fn parse_trajectory(text: &str) -> Result<(Trajectory, Vec<ParseWarning>)> {
    let (header, lines) = split_lines(text)?;
    let dt = header.get_f64("dt")?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FormatError::new(1, "dt", format!("must be > 0, got {dt}")).into());
    }
    let fields: Vec<&str> = header.get("fields")?.split(',').collect();
    let with_wrench = if fields == POSE_FIELDS {
        false
    } else if fields.len() == 14 && fields[..8] == POSE_FIELDS && fields[8..] == WRENCH_FIELDS {
        true
    } else {
        return Err(FormatError::new(1, "fields", format!("unsupported field list '{}'", fields.join(","))).into());
    };
    if lines.is_empty() {
        return Err(FormatError::new(1, "t", "no steps").into());
    }
    let mut warnings = Vec::new();
    let mut poses = Vec::with_capacity(lines.len());
    let mut wrenches = Vec::new();
    for (i, (ln, text)) in lines.iter().enumerate() {
        let raw = record(*ln, text, &fields)?;
        let t = parse_field(*ln, "t", raw[0])?;
        let expected = i as f64 * dt;
        if (t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            return Err(FormatError::new(*ln, "t", format!("expected {expected}, found {t}")).into());
        }
        poses.push(parse_pose(*ln, &fields[1..8], &raw[1..8], &mut warnings)?);
        if with_wrench {
            let mut w = [0.0; 6];
            for k in 0..6 {
                w[k] = parse_field(*ln, fields[8 + k], raw[8 + k])?;
            }
            wrenches.push(Wrench::new(Vector3::new(w[0], w[1], w[2]), Vector3::new(w[3], w[4], w[5])));
        }
    }
    let traj = Trajectory::with_wrenches(dt, poses, with_wrench.then_some(wrenches))?;
    Ok((traj, warnings))
}

pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Vec<ParseWarning>)> {
    parse_trajectory(&read_text(path)?)
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_text(path, &write_trajectory(traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    const HEADER: &str = "# trajectory dt=0.02 fields=t,px,py,pz,qw,qx,qy,qz\n";

    #[test]
    fn three_line_file() {
        let text = format!("{HEADER}0,0,0,0,1,0,0,0\n0.02,0.1,0,0,1,0,0,0\n0.04,0.2,0,0,1,0,0,0\n");
        let (t, w) = parse_trajectory(&text).unwrap();
        assert_eq!(t.len(), 3);
        assert!(w.is_empty());
        assert_eq!(t.poses()[2].position().x, 0.2);
    }

    #[test]
    fn empty_body_is_rejected() {
        let err = parse_trajectory(HEADER).unwrap_err();
        assert!(err.to_string().contains("no steps"), "{err}");
    }

    #[test]
    fn norm_tolerance_bands() {
        let q = 1.0 + 1e-7;
        let (t, w) = parse_trajectory(&format!("{HEADER}0,0,0,0,{q},0,0,0\n")).unwrap();
        assert_eq!(w.len(), 1);
        assert!((t.poses()[0].orientation().norm() - 1.0).abs() < 1e-12);
        let (_, w) = parse_trajectory(&format!("{HEADER}0,0,0,0,{},0,0,0\n", 1.0 + 1e-12)).unwrap();
        assert!(w.is_empty());
        let err = parse_trajectory(&format!("{HEADER}0,0,0,0,1.00001,0,0,0\n")).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError { line: 2, ref field, .. }) if field == "qw"));
    }

    #[test]
    fn malformed_lines_name_line_and_field() {
        let err = parse_trajectory(&format!("{HEADER}0,0,0,0,1,0,0,0\n0.02,0.1,abc,0,1,0,0,0\n")).unwrap_err();
        assert_eq!(err, Error::Format(FormatError::new(3, "py", "'abc' is not a number")));
        let err = parse_trajectory(&format!("{HEADER}0,0,0,0,1,0,0\n")).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError { line: 2, .. })));
        let err = parse_trajectory(&format!("{HEADER}0.5,0,0,0,1,0,0,0\n")).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError { ref field, .. }) if field == "t"));
        assert!(parse_trajectory("0,0,0,0,1,0,0,0\n").is_err());
    }
}
