//! Suite evaluation: parallel episodes, per-level aggregates, few-shot curves.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::engine::{run_episode_with, text::TEMPLATE_VERSION};
use crate::model::GameSpec;
use crate::policy::{PolicyFactory, PromptBundle};
use crate::rng::RNG_ALGORITHM;
use crate::tips::{run_trials, LearningMode, TipSet, TrialOptions, TrialRun};

/// Maps `f` over `items` on up to `workers` threads. Results keep input order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every item evaluated"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub game_id: String,
    pub level: u8,
    pub seed: u64,
    /// 1 in zero-shot runs.
    pub trial: u32,
    pub points: u32,
    pub max_score: u32,
    pub normalized: f64,
    pub success: bool,
    pub turns: u32,
    pub policy_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: u8,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean of points / max score.
    pub normalized_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub level: u8,
    pub trial: u32,
    pub games: usize,
    /// Share of games solved within the first `trial` trials.
    pub success_rate: f64,
    /// Mean best normalized score within the first `trial` trials.
    pub normalized_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub backend: String,
    /// `zero_shot`, or the learning mode of a few-shot run.
    pub scenario: String,
    pub tip_source: Option<String>,
    /// Few-shot curves count a game as solved at trial k if any trial up to
    /// k won.
    pub cumulative_curve: bool,
    pub template_version: String,
    pub rng_algorithm: String,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: EvalMetadata,
    pub per_level: Vec<LevelSummary>,
    /// Few-shot runs only.
    pub per_trial_curve: Vec<CurvePoint>,
    pub episodes: Vec<EpisodeSummary>,
    /// Episodes whose policy failed; they count as 0 points.
    pub backend_failures: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flat CSV: one row per level and trial index. Zero-shot reports
    /// have a single trial per level.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        if self.per_trial_curve.is_empty() {
            for l in &self.per_level {
                w.serialize(CurvePoint {
                    level: l.level,
                    trial: 1,
                    games: l.episodes,
                    success_rate: l.success_rate,
                    normalized_points: l.normalized_points,
                })?;
            }
        } else {
            for point in &self.per_trial_curve {
                w.serialize(point)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One CSV row per episode.
    pub fn write_episodes_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.episodes {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn level(&self, level: u8) -> Option<&LevelSummary> {
        self.per_level.iter().find(|l| l.level == level)
    }
}

pub fn summarize_levels(episodes: &[EpisodeSummary]) -> Vec<LevelSummary> {
    let mut by_level: BTreeMap<u8, Vec<&EpisodeSummary>> = BTreeMap::new();
    for e in episodes {
        by_level.entry(e.level).or_default().push(e);
    }
    by_level
        .into_iter()
        .map(|(level, eps)| {
            let n = eps.len();
            let successes = eps.iter().filter(|e| e.success).count();
            LevelSummary {
                level,
                episodes: n,
                successes,
                success_rate: successes as f64 / n as f64,
                normalized_points: eps.iter().map(|e| e.normalized).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

/// Plays every spec once with a fresh policy, optionally with tips in the
/// prompt.
pub fn evaluate_suite(
    specs: &[GameSpec],
    factory: &dyn PolicyFactory,
    tips: Option<&TipSet>,
    workers: usize,
) -> EvalReport {
    let base = PromptBundle::for_game().with_tips(tips.cloned());
    let episodes = par_map(specs, workers, |spec| {
        let (result, turns) = match factory.make(spec) {
            Ok(mut policy) => {
                let outcome = run_episode_with(spec, &mut *policy, &base);
                (outcome.result, outcome.trajectory.turns.len() as u32)
            }
            Err(e) => {
                tracing::warn!(game = %spec.game_id(), "could not build policy: {e}");
                (
                    crate::engine::EpisodeResult {
                        points: 0,
                        max_score: spec.max_score,
                        normalized: 0.0,
                        success: false,
                        turns: 0,
                        policy_error: Some(e.to_string()),
                    },
                    0,
                )
            }
        };
        EpisodeSummary {
            game_id: spec.game_id(),
            level: spec.level,
            seed: spec.seed,
            trial: 1,
            points: result.points,
            max_score: result.max_score,
            normalized: result.normalized,
            success: result.success,
            turns,
            policy_error: result.policy_error,
        }
    });
    let backend_failures = episodes.iter().filter(|e| e.policy_error.is_some()).count();
    EvalReport {
        metadata: EvalMetadata {
            backend: factory.describe(),
            scenario: "zero_shot".into(),
            tip_source: tips.map(tip_source),
            cumulative_curve: false,
            template_version: TEMPLATE_VERSION.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            seeds: specs.iter().map(|s| s.seed).collect(),
            workers,
        },
        per_level: summarize_levels(&episodes),
        per_trial_curve: Vec::new(),
        episodes,
        backend_failures,
    }
}

fn tip_source(tips: &TipSet) -> String {
    match &tips.provenance.game_id {
        Some(id) => id.clone(),
        None => format!("{:?}", tips.provenance.scenario).to_lowercase(),
    }
}

/// Runs the trial loop on every spec, one fresh policy per game.
pub fn run_trials_suite(
    specs: &[GameSpec],
    factory: &dyn PolicyFactory,
    mode: LearningMode,
    options: TrialOptions,
    workers: usize,
) -> Vec<TrialRun> {
    par_map(specs, workers, |spec| match factory.make(spec) {
        Ok(mut policy) => run_trials(spec, &mut *policy, mode, options),
        Err(e) => TrialRun {
            game_id: spec.game_id(),
            level: spec.level,
            mode,
            records: Vec::new(),
            final_tips: None,
            error: Some(e.to_string()),
        },
    })
}

/// Few-shot protocol over a suite: the trial loop on every game, then the
/// cumulative curve. `per_level` holds the values at the last trial index.
pub fn evaluate_few_shot(
    specs: &[GameSpec],
    factory: &dyn PolicyFactory,
    mode: LearningMode,
    options: TrialOptions,
    workers: usize,
) -> (EvalReport, Vec<TrialRun>) {
    let runs = run_trials_suite(specs, factory, mode, options, workers);
    let curve = few_shot_curve(&runs, options.max_trials);
    let per_level = curve
        .iter()
        .filter(|p| p.trial == options.max_trials)
        .map(|p| LevelSummary {
            level: p.level,
            episodes: p.games,
            successes: (p.success_rate * p.games as f64).round() as usize,
            success_rate: p.success_rate,
            normalized_points: p.normalized_points,
        })
        .collect();
    let episodes: Vec<EpisodeSummary> = specs
        .iter()
        .zip(&runs)
        .flat_map(|(spec, run)| {
            run.records.iter().map(move |r| EpisodeSummary {
                game_id: run.game_id.clone(),
                level: spec.level,
                seed: spec.seed,
                trial: r.trial_index,
                points: r.result.points,
                max_score: r.result.max_score,
                normalized: r.result.normalized,
                success: r.result.success,
                turns: r.result.turns,
                policy_error: r.result.policy_error.clone(),
            })
        })
        .collect();
    let backend_failures = runs.iter().filter(|r| r.error.is_some()).count();
    let report = EvalReport {
        metadata: EvalMetadata {
            backend: factory.describe(),
            scenario: mode.as_str().into(),
            tip_source: None,
            cumulative_curve: true,
            template_version: TEMPLATE_VERSION.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            seeds: specs.iter().map(|s| s.seed).collect(),
            workers,
        },
        per_level,
        per_trial_curve: curve,
        episodes,
        backend_failures,
    };
    (report, runs)
}

/// Cumulative per-level curve for trials `1..=max_trials`. A game counts as
/// solved at `k` if any of its first `k` trials won; its points at `k` are
/// the best normalized score among those trials.
pub fn few_shot_curve(runs: &[TrialRun], max_trials: u32) -> Vec<CurvePoint> {
    let mut by_level: BTreeMap<u8, Vec<&TrialRun>> = BTreeMap::new();
    for r in runs {
        by_level.entry(r.level).or_default().push(r);
    }
    let mut curve = Vec::new();
    for (level, games) in by_level {
        let n = games.len() as f64;
        for k in 1..=max_trials {
            let solved = games.iter().filter(|g| g.solved_at().is_some_and(|t| t <= k)).count();
            let points: f64 = games.iter().map(|g| g.best_points_through(k)).sum();
            curve.push(CurvePoint {
                level,
                trial: k,
                games: games.len(),
                success_rate: solved as f64 / n,
                normalized_points: points / n,
            });
        }
    }
    curve
}
