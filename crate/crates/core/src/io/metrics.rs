//! Benchmark metrics as plain CSV: one header row of column names, then one
//! row per configuration. Region sets are joined with `+`; metrics with no
//! data are written as `NaN`. Labels must not contain commas.

use super::FormatError;
use crate::error::Result;
use crate::residual::RegionSet;
use crate::sim::MetricsRow;

pub fn write_metrics(rows: &[MetricsRow]) -> String {
    let mut out = MetricsRow::HEADER.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            r.label.clone(),
            r.n_points.to_string(),
            r.regions.to_string().replace(',', "+"),
            r.episodes.to_string(),
            r.base_success.to_string(),
            r.ter_success.to_string(),
            r.ter_interventions.to_string(),
            r.corrector_success.to_string(),
            r.corrector_interventions.to_string(),
            r.force_precision.to_string(),
            r.force_recall.to_string(),
            r.position_precision.to_string(),
            r.position_recall.to_string(),
            r.junction_ratio_mean.to_string(),
            r.junction_ratio_max.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn float(line: usize, field: &str, raw: &str) -> std::result::Result<f64, FormatError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| FormatError::new(line, field, format!("'{raw}' is not a number")))?;
    if v.is_infinite() {
        return Err(FormatError::new(line, field, "value is infinite"));
    }
    Ok(v)
}

fn count(line: usize, field: &str, raw: &str) -> std::result::Result<usize, FormatError> {
    raw.parse()
        .map_err(|_| FormatError::new(line, field, format!("'{raw}' is not a count")))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| FormatError::new(1, "header", "empty file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != MetricsRow::HEADER {
        return Err(FormatError::new(hl, "header", format!("expected columns {}", MetricsRow::HEADER.join(","))).into());
    }
    let h = &MetricsRow::HEADER;
    let mut rows = Vec::new();
    for (ln, l) in lines {
        let f = super::record(ln, l, h)?;
        let regions: RegionSet = f[2]
            .parse()
            .map_err(|e: crate::error::Error| FormatError::new(ln, h[2], e.to_string()))?;
        rows.push(MetricsRow {
            label: f[0].to_string(),
            n_points: count(ln, h[1], f[1])?,
            regions,
            episodes: count(ln, h[3], f[3])?,
            base_success: float(ln, h[4], f[4])?,
            ter_success: float(ln, h[5], f[5])?,
            ter_interventions: float(ln, h[6], f[6])?,
            corrector_success: float(ln, h[7], f[7])?,
            corrector_interventions: float(ln, h[8], f[8])?,
            force_precision: float(ln, h[9], f[9])?,
            force_recall: float(ln, h[10], f[10])?,
            position_precision: float(ln, h[11], f[11])?,
            position_recall: float(ln, h[12], f[12])?,
            junction_ratio_mean: float(ln, h[13], f[13])?,
            junction_ratio_max: float(ln, h[14], f[14])?,
        });
    }
    Ok(rows)
}
