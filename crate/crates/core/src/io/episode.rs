//! Episode logs: a per-step record file plus an event sidecar.
//!
//! The record file header carries the seed, outcome, socket positions and the
//! controller gains in force for the run. Vector values in the header are
//! `;`-separated. The sidecar (`<log>.events`) holds one event per line:
//! `detector_trigger,<step>`, `mode,<mode>,<step>` for every mode change, and
//! `intervention,<trigger>,<resume>,<k*>,<N>,<junction_max_step>,<base_median_step>`.

use nalgebra::Vector3;

use super::trajectory::{parse_pose, pose_values};
use super::{fmt_f64, join_f64, parse_field, record, split_lines, FormatError, Header};
use crate::error::Result;
use crate::geometry::Wrench;
use crate::sim::{EpisodeConfig, EpisodeLog, Mode, StepRecord};
use crate::sim::episode::Intervention;

pub const EVENTS_SUFFIX: &str = ".events";

const LOG_FIELDS: [&str; 31] = [
    "step", "t", "mode", "cx", "cy", "cz", "cqw", "cqx", "cqy", "cqz", "mx", "my", "mz", "mqw", "mqx", "mqy", "mqz",
    "pfx", "pfy", "pfz", "ptx", "pty", "ptz", "mfx", "mfy", "mfz", "mtx", "mty", "mtz", "score", "position_score",
];

fn vec3(v: &Vector3<f64>) -> String {
    [v.x, v.y, v.z].map(fmt_f64).join(";")
}

fn header_vec3(h: &Header, key: &str) -> std::result::Result<Vector3<f64>, FormatError> {
    let raw = h.get(key)?;
    let parts: Vec<&str> = raw.split(';').collect();
    if parts.len() != 3 {
        return Err(FormatError::new(1, key, format!("expected 3 components, found {}", parts.len())));
    }
    let mut v = [0.0; 3];
    for i in 0..3 {
        v[i] = parse_field(1, key, parts[i])?;
    }
    Ok(Vector3::from(v))
}

fn wrench_values(w: &Wrench) -> impl Iterator<Item = f64> {
    w.to_vector().into_iter().copied().collect::<Vec<_>>().into_iter()
}

/// Returns the record file and the event sidecar.
pub fn write_episode_log(log: &EpisodeLog, cfg: &EpisodeConfig) -> (String, String) {
    let c = &cfg.control;
    let mut main = format!(
        "# episode seed={} outcome={} socket={} believed={} command_dt={} physics_dt={} k_trans={} k_rot={}",
        log.seed,
        log.outcome.as_str(),
        vec3(&log.socket),
        vec3(&log.believed_socket),
        fmt_f64(c.command_dt),
        fmt_f64(c.physics_dt),
        fmt_f64(c.k_trans),
        fmt_f64(c.k_rot),
    );
    if let Ok(p) = c.impedance() {
        let d = p.damping();
        main.push_str(&format!(" d_trans={} d_rot={}", fmt_f64(d[(0, 0)]), fmt_f64(d[(3, 3)])));
    }
    main.push_str(&format!(
        " mass={} inertia={} threshold_c={} debounce_k={} fields={}\n",
        fmt_f64(c.mass),
        c.inertia.map(fmt_f64).join(";"),
        fmt_f64(cfg.detector.threshold_c),
        cfg.detector.debounce_k,
        LOG_FIELDS.join(","),
    ));
    for r in &log.records {
        main.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.step,
            fmt_f64(r.time),
            r.mode.as_str(),
            join_f64(pose_values(&r.commanded)),
            join_f64(pose_values(&r.measured)),
            join_f64(wrench_values(&r.predicted_wrench)),
            join_f64(wrench_values(&r.measured_wrench)),
            fmt_f64(r.score),
            fmt_f64(r.position_score),
        ));
    }

    let mut events = format!("# events seed={}\n", log.seed);
    if let Some(s) = log.detector_trigger {
        events.push_str(&format!("detector_trigger,{s}\n"));
    }
    for w in log.records.windows(2) {
        if w[0].mode != w[1].mode {
            events.push_str(&format!("mode,{},{}\n", w[1].mode.as_str(), w[1].step));
        }
    }
    if let Some(i) = log.intervention {
        events.push_str(&format!(
            "intervention,{},{},{},{},{},{}\n",
            i.trigger_step,
            i.resume_step,
            i.k_star,
            i.n_points,
            fmt_f64(i.junction_max_step),
            fmt_f64(i.base_median_step),
        ));
    }
    (main, events)
}

fn index(line: usize, field: &str, raw: &str) -> std::result::Result<usize, FormatError> {
    raw.trim()
        .parse()
        .map_err(|_| FormatError::new(line, field, format!("'{}' is not a step index", raw.trim())))
}

fn wrench(line: usize, names: &[&str], raw: &[&str]) -> std::result::Result<Wrench, FormatError> {
    let mut v = [0.0; 6];
    for i in 0..6 {
        v[i] = parse_field(line, names[i], raw[i])?;
    }
    Ok(Wrench::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5])))
}

pub fn parse_episode_log(main: &str, events: &str) -> Result<EpisodeLog> {
    let (header, lines) = split_lines(main)?;
    if header.kind != "episode" {
        return Err(FormatError::new(1, "header", format!("expected an episode log, found '{}'", header.kind)).into());
    }
    let seed = header
        .get("seed")?
        .parse()
        .map_err(|_| FormatError::new(1, "seed", "not an integer"))?;
    let outcome = header
        .get("outcome")?
        .parse()
        .map_err(|e: crate::error::Error| FormatError::new(1, "outcome", e.to_string()))?;
    let socket = header_vec3(&header, "socket")?;
    let believed_socket = header_vec3(&header, "believed")?;

    let mut warnings = Vec::new();
    let mut records = Vec::with_capacity(lines.len());
    for (ln, text) in lines {
        let f = record(ln, text, &LOG_FIELDS)?;
        let mode: Mode = f[2]
            .parse()
            .map_err(|e: crate::error::Error| FormatError::new(ln, "mode", e.to_string()))?;
        records.push(StepRecord {
            step: index(ln, "step", f[0])?,
            time: parse_field(ln, "t", f[1])?,
            mode,
            commanded: parse_pose(ln, &LOG_FIELDS[3..10], &f[3..10], &mut warnings)?,
            measured: parse_pose(ln, &LOG_FIELDS[10..17], &f[10..17], &mut warnings)?,
            predicted_wrench: wrench(ln, &LOG_FIELDS[17..23], &f[17..23])?,
            measured_wrench: wrench(ln, &LOG_FIELDS[23..29], &f[23..29])?,
            score: parse_field(ln, "score", f[29])?,
            position_score: parse_field(ln, "position_score", f[30])?,
        });
    }

    let (eh, event_lines) = split_lines(events)?;
    if eh.kind != "events" {
        return Err(FormatError::new(1, "header", format!("expected an event sidecar, found '{}'", eh.kind)).into());
    }
    if eh.get("seed")? != header.get("seed")? {
        return Err(FormatError::new(1, "seed", "sidecar belongs to a different episode").into());
    }
    let mut detector_trigger = None;
    let mut intervention = None;
    for (ln, text) in event_lines {
        let f: Vec<&str> = text.split(',').map(str::trim).collect();
        match f[0] {
            "detector_trigger" => {
                let f = record(ln, text, &["event", "step"])?;
                detector_trigger = Some(index(ln, "step", f[1])?);
            }
            "mode" => {
                let f = record(ln, text, &["event", "mode", "step"])?;
                let mode: Mode = f[1]
                    .parse()
                    .map_err(|e: crate::error::Error| FormatError::new(ln, "mode", e.to_string()))?;
                let step = index(ln, "step", f[2])?;
                if !records.iter().any(|r| r.step == step && r.mode == mode) {
                    return Err(FormatError::new(ln, "mode", format!("no {mode:?} record at step {step}")).into());
                }
            }
            "intervention" => {
                let names = ["event", "trigger_step", "resume_step", "k_star", "n_points", "junction_max_step", "base_median_step"];
                let f = record(ln, text, &names)?;
                intervention = Some(Intervention {
                    trigger_step: index(ln, names[1], f[1])?,
                    resume_step: index(ln, names[2], f[2])?,
                    k_star: index(ln, names[3], f[3])?,
                    n_points: index(ln, names[4], f[4])?,
                    junction_max_step: parse_field(ln, names[5], f[5])?,
                    base_median_step: parse_field(ln, names[6], f[6])?,
                });
            }
            other => return Err(FormatError::new(ln, "event", format!("unknown event '{other}'")).into()),
        }
    }
    Ok(EpisodeLog {
        seed,
        socket,
        believed_socket,
        records,
        outcome,
        detector_trigger,
        intervention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_episode, RunMode};

    #[test]
    fn ter_episode_round_trips() {
        let mut cfg = EpisodeConfig::default();
        cfg.policy.belief_bias = [0.0, 0.004, 0.0];
        let ep = run_episode(3, &cfg, RunMode::Ter).unwrap();
        assert!(ep.log.intervention.is_some());
        let (main, events) = write_episode_log(&ep.log, &cfg);
        assert!(main.lines().next().unwrap().contains("k_trans="));
        assert!(events.contains("mode,paused,"));
        assert_eq!(parse_episode_log(&main, &events).unwrap(), ep.log);
    }
}
