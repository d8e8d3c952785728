//! One episode of detector scores: `# scores label=failed|success [metric=force|position]`
//! followed by one score per line.

use super::{fmt_f64, parse_field, split_lines, FormatError};
use crate::detector::{LabeledEpisode, Metric};
use crate::error::Result;

pub fn write_scores(episode: &LabeledEpisode, metric: Option<Metric>) -> String {
    let label = if episode.failed { "failed" } else { "success" };
    let mut out = format!("# scores label={label}");
    if let Some(m) = metric {
        out.push_str(&format!(" metric={m}"));
    }
    out.push('\n');
    for s in &episode.scores {
        out.push_str(&fmt_f64(*s));
        out.push('\n');
    }
    out
}

pub fn parse_scores(text: &str) -> Result<(LabeledEpisode, Option<Metric>)> {
    let (header, lines) = split_lines(text)?;
    if header.kind != "scores" {
        return Err(FormatError::new(1, "header", format!("expected a scores file, found '{}'", header.kind)).into());
    }
    let failed = match header.get("label")? {
        "failed" | "failure" | "1" => true,
        "success" | "ok" | "0" => false,
        other => return Err(FormatError::new(1, "label", format!("'{other}' is neither failed nor success")).into()),
    };
    let metric = match header.values.get("metric") {
        Some(m) => Some(m.parse().map_err(|e: crate::error::Error| FormatError::new(1, "metric", e.to_string()))?),
        None => None,
    };
    if lines.is_empty() {
        return Err(FormatError::new(1, "score", "no steps").into());
    }
    let scores = lines
        .iter()
        .map(|(ln, l)| parse_field(*ln, "score", l))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((LabeledEpisode::new(scores, failed)?, metric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_and_metric_are_read() {
        let (e, m) = parse_scores("# scores label=failed metric=force\n1.5\n\n20\n").unwrap();
        assert!(e.failed);
        assert_eq!(e.scores, vec![1.5, 20.0]);
        assert_eq!(m, Some(Metric::ForcePredictionError));
        let err = parse_scores("# scores label=maybe\n1\n").unwrap_err();
        assert!(err.to_string().contains("label"));
        let err = parse_scores("# scores label=success\n1\nx\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
