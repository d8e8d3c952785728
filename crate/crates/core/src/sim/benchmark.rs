//! Seeded episode batches over a grid of edit sizes and residual regions.
//!
//! For every edit size `N` a batch of TER episodes is run on the training
//! seeds. Their samples, filtered to a region subset, build a lookup
//! corrector that is then run on fresh seeds. Base-only runs on the training
//! seeds give the reference success rate, and a separate base-only batch
//! alternating unbiased and biased beliefs scores the detector. Episodes run
//! in parallel; results are gathered in seed order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corrector::LookupCorrector;
use super::episode::{run_episode, Episode, EpisodeConfig, Mode, RunMode};
use crate::detector::{evaluate, DetectorConfig, LabeledEpisode, Metric};
use crate::error::{Error, Result};
use crate::residual::{Region, RegionSet, ResidualSample};

/// Evaluation seeds start here, offset from the training seeds.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;
/// Detector-batch seeds start here.
pub const DETECTOR_SEED_OFFSET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    /// Training episodes per configuration.
    pub episodes: usize,
    /// Fresh episodes per corrector evaluation.
    pub eval_episodes: usize,
    /// Base-only episodes scored by the detector.
    pub detector_episodes: usize,
    pub bias: [f64; 3],
    pub n_grid: Vec<usize>,
    pub region_grid: Vec<RegionSet>,
    /// Edit size used for the region rows.
    pub region_n: usize,
    pub position_threshold: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            episodes: 50,
            eval_episodes: 50,
            detector_episodes: 50,
            bias: [0.0, 0.004, 0.0],
            n_grid: vec![10, 20, 30, 40],
            region_grid: default_region_grid(),
            region_n: 20,
            position_threshold: 0.012,
            seed: 0,
        }
    }
}

/// Base (pre-edit only), each of transition, demo and post alone, the three
/// pairs, and all regions. Pre-edit samples are in every row.
pub fn default_region_grid() -> Vec<RegionSet> {
    let pre = RegionSet::only(&[Region::PreEdit]);
    let (t, d, p) = (Region::Transition, Region::HumanDemo, Region::PostEdit);
    vec![
        pre,
        pre.with(t),
        pre.with(d),
        pre.with(p),
        pre.with(t).with(d),
        pre.with(t).with(p),
        pre.with(d).with(p),
        RegionSet::all(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub label: String,
    pub n_points: usize,
    pub regions: RegionSet,
    pub episodes: usize,
    pub base_success: f64,
    pub ter_success: f64,
    pub ter_interventions: f64,
    pub corrector_success: f64,
    pub corrector_interventions: f64,
    pub force_precision: f64,
    pub force_recall: f64,
    pub position_precision: f64,
    pub position_recall: f64,
    pub junction_ratio_mean: f64,
    pub junction_ratio_max: f64,
}

impl MetricsRow {
    pub const HEADER: [&'static str; 15] = [
        "label",
        "n_points",
        "regions",
        "episodes",
        "base_success",
        "ter_success",
        "ter_interventions",
        "corrector_success",
        "corrector_interventions",
        "force_precision",
        "force_recall",
        "position_precision",
        "position_recall",
        "junction_ratio_mean",
        "junction_ratio_max",
    ];
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

fn run_batch(seeds: impl IntoParallelIterator<Item = u64>, cfg: &EpisodeConfig, mode: RunMode<'_>) -> Result<Vec<Episode>> {
    seeds.into_par_iter().map(|s| run_episode(s, cfg, mode)).collect()
}

/// Success rate and detector firings of corrector runs on fresh seeds. A run
/// only counts as a success if the detector never fired.
pub fn evaluate_corrector(samples: &[ResidualSample], cfg: &EpisodeConfig, seeds: std::ops::Range<u64>) -> Result<(f64, f64)> {
    let n = seeds.end.saturating_sub(seeds.start) as usize;
    if samples.is_empty() {
        let runs = run_batch(seeds, cfg, RunMode::Base)?;
        return Ok(summarize_corrector(&runs, n));
    }
    let corrector = LookupCorrector::new(samples, cfg.samples.post_edit_q_weight)?;
    let runs = run_batch(seeds, cfg, RunMode::Corrector(&corrector))?;
    Ok(summarize_corrector(&runs, n))
}

fn summarize_corrector(runs: &[Episode], n: usize) -> (f64, f64) {
    let ok = runs.iter().filter(|e| e.succeeded() && e.log.detector_trigger.is_none()).count();
    let fired = runs.iter().filter(|e| e.log.detector_trigger.is_some()).count();
    (rate(ok, n), rate(fired, n))
}

pub fn filter_regions(samples: &[ResidualSample], regions: RegionSet) -> Vec<ResidualSample> {
    samples.iter().filter(|s| regions.contains(s.region)).cloned().collect()
}

/// Runs the whole grid; rows for `n_grid` first, then `region_grid`.
pub fn run_benchmark(base: &EpisodeConfig, bench: &BenchmarkConfig) -> Result<Vec<MetricsRow>> {
    if bench.episodes == 0 {
        return Err(Error::invalid("benchmark needs at least one episode"));
    }
    let mut cfg = *base;
    cfg.policy.belief_bias = bench.bias;
    cfg.validate()?;
    let train = bench.seed..bench.seed + bench.episodes as u64;
    let eval = bench.seed + EVAL_SEED_OFFSET..bench.seed + EVAL_SEED_OFFSET + bench.eval_episodes as u64;

    let base_runs = run_batch(train.clone(), &cfg, RunMode::Base)?;
    let base_success = rate(base_runs.iter().filter(|e| e.succeeded()).count(), bench.episodes);
    let (force_pr, position_pr) = detector_scores(base, bench)?;

    let mut edit_sizes: Vec<usize> = bench.n_grid.clone();
    if !bench.region_grid.is_empty() && !edit_sizes.contains(&bench.region_n) {
        edit_sizes.push(bench.region_n);
    }
    let mut ter_batches = Vec::new();
    for &n in &edit_sizes {
        let mut c = cfg;
        c.edit.n_points = n;
        c.samples.regions = RegionSet::all();
        ter_batches.push((n, c, run_batch(train.clone(), &c, RunMode::Ter)?));
    }

    let mut grid: Vec<(String, usize, RegionSet)> = bench
        .n_grid
        .iter()
        .map(|&n| (format!("n={n}"), n, cfg.samples.regions))
        .collect();
    grid.extend(
        bench
            .region_grid
            .iter()
            .map(|&r| (format!("regions={}", r.to_string().replace(',', "+")), bench.region_n, r)),
    );

    let mut rows = Vec::new();
    for (label, n, regions) in grid {
        let (_, c, runs) = ter_batches.iter().find(|(m, _, _)| *m == n).expect("batch for every edit size");
        let ratios: Vec<f64> = runs
            .iter()
            .filter_map(|e| e.log.intervention.map(|i| i.junction_ratio()))
            .collect();
        let all: Vec<ResidualSample> = runs.iter().flat_map(|e| e.samples.iter().cloned()).collect();
        let mut eval_cfg = *c;
        eval_cfg.samples.regions = regions;
        let (corrector_success, corrector_interventions) =
            evaluate_corrector(&filter_regions(&all, regions), &eval_cfg, eval.clone())?;
        rows.push(MetricsRow {
            label,
            n_points: n,
            regions,
            episodes: bench.episodes,
            base_success,
            ter_success: rate(runs.iter().filter(|e| e.succeeded()).count(), bench.episodes),
            ter_interventions: rate(ratios.len(), bench.episodes),
            corrector_success,
            corrector_interventions,
            force_precision: force_pr.0,
            force_recall: force_pr.1,
            position_precision: position_pr.0,
            position_recall: position_pr.1,
            junction_ratio_mean: if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
            junction_ratio_max: ratios.iter().cloned().fold(f64::NAN, f64::max),
        });
    }
    Ok(rows)
}

/// Base-only episodes alternating unbiased and biased beliefs, labelled by
/// outcome, scored by both metrics at their thresholds.
pub fn detector_batch(base: &EpisodeConfig, bench: &BenchmarkConfig) -> Result<Vec<Episode>> {
    let seeds: Vec<u64> = (0..bench.detector_episodes as u64).map(|i| bench.seed + DETECTOR_SEED_OFFSET + i).collect();
    seeds
        .into_par_iter()
        .map(|s| {
            let mut c = *base;
            c.policy.belief_bias = if s % 2 == 0 { [0.0; 3] } else { bench.bias };
            run_episode(s, &c, RunMode::Base)
        })
        .collect()
}

fn detector_scores(base: &EpisodeConfig, bench: &BenchmarkConfig) -> Result<((f64, f64), (f64, f64))> {
    if bench.detector_episodes == 0 {
        return Ok(((f64::NAN, f64::NAN), (f64::NAN, f64::NAN)));
    }
    let runs = detector_batch(base, bench)?;
    let label = |e: &Episode, position: bool| {
        let scores = e
            .log
            .records
            .iter()
            .filter(|r| r.mode == Mode::Auto)
            .map(|r| if position { r.position_score } else { r.score })
            .collect();
        LabeledEpisode::new(scores, !e.succeeded())
    };
    let force: Vec<LabeledEpisode> = runs.iter().map(|e| label(e, false)).collect::<Result<_>>()?;
    let position: Vec<LabeledEpisode> = runs.iter().map(|e| label(e, true)).collect::<Result<_>>()?;
    let position_cfg = DetectorConfig::new(Metric::PositionPredictionError, bench.position_threshold, base.detector.debounce_k)?;
    Ok((evaluate(&force, &base.detector), evaluate(&position, &position_cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchmarkConfig {
        BenchmarkConfig {
            episodes: 3,
            eval_episodes: 3,
            detector_episodes: 4,
            n_grid: vec![20],
            region_grid: vec![],
            ..Default::default()
        }
    }

    #[test]
    fn single_configuration_gives_one_row() {
        let rows = run_benchmark(&EpisodeConfig::default(), &tiny()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].label, "n=20");
    }

    #[test]
    fn region_grid_has_eight_rows() {
        let g = default_region_grid();
        assert_eq!(g.len(), 8);
        assert!(g.iter().all(|r| r.contains(Region::PreEdit)));
        let mut labels: Vec<String> = g.iter().map(|r| r.to_string()).collect();
        labels.dedup();
        assert_eq!(labels.len(), 8);
    }

    #[test]
    fn reruns_are_identical() {
        let a = run_benchmark(&EpisodeConfig::default(), &tiny()).unwrap();
        let b = run_benchmark(&EpisodeConfig::default(), &tiny()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
