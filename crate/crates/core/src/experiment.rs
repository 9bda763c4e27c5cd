//! Configuration-driven training runs: a flat `key = value` config dialect,
//! seeded realization streams that make sequential and parallel execution
//! byte-identical, CSV learning curves, and segment-averaged summaries.

use crate::attention::{GridMask, SensorMode};
use crate::grid::{GridConfig, GridError};
use crate::learning::{
    run_episode, AgentConfig, EpsilonSchedule, Learner, LearnerConfig, LearningError,
    ReplayConfig, StepSize, UpdateRule, Variant,
};
use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Learning(#[from] LearningError),
}

fn bad(field: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { field: field.into(), message: message.into() }
}

/// A full experiment: domain, agent, learner, and run sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub variant: Variant,
    pub sensor: SensorMode,
    pub mask: GridMask,
    pub learner: LearnerConfig,
    pub realizations: u32,
    pub episodes: u32,
    pub seed: u64,
    /// Output directory for `run` artifacts.
    pub output: String,
}

impl ExperimentConfig {
    /// Parses the flat `key = value` dialect; `#` opens a comment line.
    /// Unknown keys and malformed values are named in the error.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut m: Option<u32> = None;
        let mut n: Option<usize> = None;
        let mut t_max: Option<u32> = None;
        let mut variant = Variant::Standard;
        let mut sensor = SensorMode::Normal;
        let mut mask = GridMask::TWO;
        let mut rule = UpdateRule::Sarsa;
        let mut alpha = StepSize::Constant(0.1);
        let mut epsilon = EpsilonSchedule::Constant(0.0);
        let mut q0 = 1.0f64;
        let mut replay: Option<ReplayConfig> = None;
        let mut train_every = 1u64;
        let mut max_experiences = 100_000usize;
        let mut realizations = 1u32;
        let mut episodes: Option<u32> = None;
        let mut seed = 0u64;
        let mut output = String::from("out");

        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "m" => m = Some(parse_num(key, value)?),
                "n" => n = Some(parse_num(key, value)?),
                "t_max" => t_max = Some(parse_num(key, value)?),
                "variant" => {
                    variant = match value {
                        "standard" => Variant::Standard,
                        "lookahead" => Variant::Lookahead,
                        "deictic" => Variant::Deictic,
                        other => return Err(bad(key, format!("unknown variant `{other}`"))),
                    }
                }
                "sensor" => {
                    sensor = match value {
                        "normal" => SensorMode::Normal,
                        "faulty" => SensorMode::Faulty,
                        other => return Err(bad(key, format!("unknown sensor mode `{other}`"))),
                    }
                }
                "grids" => {
                    mask = match value {
                        "two" => GridMask::TWO,
                        "four" => GridMask::FOUR,
                        other => return Err(bad(key, format!("unknown grid set `{other}`"))),
                    }
                }
                "rule" => {
                    rule = match value {
                        "sarsa" => UpdateRule::Sarsa,
                        "q-learning" => UpdateRule::QLearning,
                        "stage-return" => UpdateRule::StageReturn,
                        other => return Err(bad(key, format!("unknown rule `{other}`"))),
                    }
                }
                "alpha" => {
                    alpha = if value == "visit-count" {
                        StepSize::VisitCount
                    } else {
                        let a: f64 = parse_num(key, value)?;
                        if !(a > 0.0 && a <= 1.0) {
                            return Err(bad(key, "step size must lie in (0, 1]"));
                        }
                        StepSize::Constant(a)
                    }
                }
                "epsilon" => {
                    epsilon = match value.split_whitespace().collect::<Vec<_>>().as_slice() {
                        ["constant", v] => EpsilonSchedule::Constant(parse_num(key, v)?),
                        ["inverse", c] => EpsilonSchedule::InverseCount { c: parse_num(key, c)? },
                        _ => return Err(bad(key, "expected `constant <v>` or `inverse <c>`")),
                    };
                    let e0 = match epsilon {
                        EpsilonSchedule::Constant(v) => v,
                        EpsilonSchedule::InverseCount { .. } => 1.0,
                    };
                    if !(0.0..=1.0).contains(&e0) {
                        return Err(bad(key, "epsilon must lie in [0, 1]"));
                    }
                }
                "q0" => q0 = parse_num(key, value)?,
                "replay" => match value {
                    "on" => {
                        replay = Some(ReplayConfig { train_every, max_experiences });
                    }
                    "off" => replay = None,
                    other => return Err(bad(key, format!("expected on/off, got `{other}`"))),
                },
                "train_every" => train_every = parse_num(key, value)?,
                "max_experiences" => max_experiences = parse_num(key, value)?,
                "realizations" => realizations = parse_num(key, value)?,
                "episodes" => episodes = Some(parse_num(key, value)?),
                "seed" => seed = parse_num(key, value)?,
                "output" => output = value.to_string(),
                other => return Err(bad(other, "unknown key")),
            }
        }

        let m = m.ok_or_else(|| bad("m", "missing"))?;
        let n = n.ok_or_else(|| bad("n", "missing"))?;
        let episodes = episodes.ok_or_else(|| bad("episodes", "missing"))?;
        if episodes == 0 {
            return Err(bad("episodes", "must be at least 1"));
        }
        if realizations == 0 {
            return Err(bad("realizations", "must be at least 1"));
        }
        let grid = match t_max {
            Some(t) => GridConfig::new(m, n, t),
            None => GridConfig::with_default_horizon(m, n),
        }?;
        if let Some(r) = replay.as_mut() {
            r.train_every = train_every;
            r.max_experiences = max_experiences;
        }
        Ok(ExperimentConfig {
            grid,
            variant,
            sensor,
            mask,
            learner: LearnerConfig { rule, alpha, epsilon, q0, replay },
            realizations,
            episodes,
            seed,
            output,
        })
    }

    pub fn agent(&self) -> AgentConfig {
        AgentConfig::new(&self.grid, self.variant, self.sensor, self.mask)
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ExperimentError> {
    value.parse::<T>().map_err(|_| bad(field, format!("cannot parse `{value}`")))
}

/// One measured episode of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub realization: u32,
    pub episode: u32,
    pub episode_return: f64,
    pub placed: u32,
    pub epsilon: f64,
}

/// All curve points of a finished experiment, ordered by (realization,
/// episode), plus the evaluation counts observed per overt stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub points: Vec<CurvePoint>,
    /// Distinct per-stage action-evaluation counts seen across the run.
    pub evaluation_counts: Vec<u64>,
}

/// The per-realization random stream: one master seed, one independent
/// stream per realization index. Episode scenes, tie-breaking, and
/// exploration all draw from it sequentially.
pub fn realization_rng(master_seed: u64, realization: u32) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(realization as u64 + 1);
    rng
}

/// Runs one realization to completion.
pub fn run_realization(
    cfg: &ExperimentConfig,
    realization: u32,
) -> Result<(Vec<CurvePoint>, Vec<u64>), ExperimentError> {
    let agent = cfg.agent();
    let mut learner = Learner::new(cfg.learner.clone());
    let mut rng = realization_rng(cfg.seed, realization);
    let mut points = Vec::with_capacity(cfg.episodes as usize);
    let mut eval_counts: Vec<u64> = Vec::new();
    for episode in 1..=cfg.episodes {
        let log = run_episode(&cfg.grid, &agent, &mut learner, &mut rng)?;
        for &e in &log.evaluations_per_stage {
            if !eval_counts.contains(&e) {
                eval_counts.push(e);
            }
        }
        points.push(CurvePoint {
            realization,
            episode,
            episode_return: log.episode_return,
            placed: log.placed,
            epsilon: log.epsilon_end,
        });
    }
    Ok((points, eval_counts))
}

/// Runs all realizations. `threads` caps the worker count; 0 or 1 runs
/// sequentially. Output order never depends on scheduling: realizations are
/// computed independently and merged in index order.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult, ExperimentError> {
    let indices: Vec<u32> = (0..cfg.realizations).collect();
    let per_realization: Vec<Result<(Vec<CurvePoint>, Vec<u64>), ExperimentError>> =
        run_indexed(cfg, &indices, threads);
    let mut points = Vec::new();
    let mut evaluation_counts: Vec<u64> = Vec::new();
    for result in per_realization {
        let (mut p, evals) = result?;
        points.append(&mut p);
        for e in evals {
            if !evaluation_counts.contains(&e) {
                evaluation_counts.push(e);
            }
        }
    }
    evaluation_counts.sort_unstable();
    Ok(ExperimentResult { points, evaluation_counts })
}

#[cfg(feature = "parallel")]
fn run_indexed(
    cfg: &ExperimentConfig,
    indices: &[u32],
    threads: usize,
) -> Vec<Result<(Vec<CurvePoint>, Vec<u64>), ExperimentError>> {
    use rayon::prelude::*;
    if threads <= 1 {
        indices.iter().map(|&r| run_realization(cfg, r)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| indices.par_iter().map(|&r| run_realization(cfg, r)).collect())
    }
}

#[cfg(not(feature = "parallel"))]
fn run_indexed(
    cfg: &ExperimentConfig,
    indices: &[u32],
    _threads: usize,
) -> Vec<Result<(Vec<CurvePoint>, Vec<u64>), ExperimentError>> {
    indices.iter().map(|&r| run_realization(cfg, r)).collect()
}

impl ExperimentResult {
    /// Stable CSV schema: `realization,episode,return,placed,epsilon`, rows
    /// ordered by (realization, episode).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("realization,episode,return,placed,epsilon\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.realization, p.episode, p.episode_return, p.placed, p.epsilon
            );
        }
        out
    }

    pub fn episodes(&self) -> u32 {
        self.points.iter().map(|p| p.episode).max().unwrap_or(0)
    }

    pub fn realizations(&self) -> u32 {
        self.points.iter().map(|p| p.realization + 1).max().unwrap_or(0)
    }

    fn placed_by_episode(&self, realization: u32) -> Vec<f64> {
        let mut v: Vec<(u32, f64)> = self
            .points
            .iter()
            .filter(|p| p.realization == realization)
            .map(|p| (p.episode, p.placed as f64))
            .collect();
        v.sort_unstable_by_key(|(e, _)| *e);
        v.into_iter().map(|(_, x)| x).collect()
    }

    /// Mean placed objects per realization over the final `window` episodes.
    pub fn final_window_mean(&self, window: u32) -> Vec<f64> {
        (0..self.realizations())
            .map(|r| {
                let placed = self.placed_by_episode(r);
                let w = (window as usize).min(placed.len());
                placed[placed.len() - w..].iter().sum::<f64>() / w as f64
            })
            .collect()
    }

    /// First episode at which the trailing `window`-episode mean of placed
    /// objects reaches `threshold`, per realization.
    pub fn episodes_to_reach(&self, window: u32, threshold: f64) -> Vec<Option<u32>> {
        (0..self.realizations())
            .map(|r| {
                let placed = self.placed_by_episode(r);
                let w = window as usize;
                if placed.len() < w {
                    return None;
                }
                let mut sum: f64 = placed[..w].iter().sum();
                if sum / w as f64 >= threshold {
                    return Some(w as u32);
                }
                for i in w..placed.len() {
                    sum += placed[i] - placed[i - w];
                    if sum / w as f64 >= threshold {
                        return Some(i as u32 + 1);
                    }
                }
                None
            })
            .collect()
    }

    /// Plain-text summary: per-episode mean and sigma over realizations,
    /// averaged over `segment`-episode segments, plus the final-window tally.
    /// Smoothing happens here at report time; the CSV stays raw.
    pub fn summary(&self, segment: u32) -> String {
        let realizations = self.realizations();
        let episodes = self.episodes();
        let mut out = String::new();
        let _ = writeln!(out, "realizations = {realizations}");
        let _ = writeln!(out, "episodes = {episodes}");
        let _ = writeln!(out, "segment = {segment}");
        let per_real: Vec<Vec<f64>> =
            (0..realizations).map(|r| self.placed_by_episode(r)).collect();
        let _ = writeln!(out, "segment_start,segment_end,mean_placed,sigma_placed");
        let mut start = 0usize;
        while start < episodes as usize {
            let end = (start + segment as usize).min(episodes as usize);
            // Mean and sigma across realizations of each episode, then
            // averaged across the segment.
            let mut seg_mean = 0.0;
            let mut seg_sigma = 0.0;
            for e in start..end {
                let vals: Vec<f64> = per_real.iter().map(|v| v[e]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / vals.len() as f64;
                seg_mean += mean;
                seg_sigma += var.sqrt();
            }
            let len = (end - start) as f64;
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4}",
                start + 1,
                end,
                seg_mean / len,
                seg_sigma / len
            );
            start = end;
        }
        let finals = self.final_window_mean(segment);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / finals.len() as f64;
        let _ = writeln!(out, "final_window_mean_placed = {:.4}", mean);
        let _ = writeln!(out, "final_window_sigma_placed = {:.4}", var.sqrt());
        out
    }
}

/// Action values evaluated per overt stage: 8 per level for octant-indexed
/// and view-encoded agents, one per grid cell for the single-level deictic
/// agent.
pub fn count_evaluations(variant: Variant, m: u32) -> u64 {
    match variant {
        Variant::Standard | Variant::Lookahead => 8 * m.trailing_zeros() as u64,
        Variant::Deictic => (m as u64).pow(3),
    }
}
