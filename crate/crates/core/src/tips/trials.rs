use serde::{Deserialize, Serialize};

use crate::engine::{new_episode, run_episode_with, EpisodeResult, Trajectory};
use crate::model::GameSpec;
use crate::parser::render;
use crate::policy::{
    game_preamble, ActionList, Message, Policy, PromptBundle, Role, TranscriptEntry,
};

use super::{extract_tips, render_tips, Provenance, TipScenario, TipSet, TipsError, TIPS_MARKER};

pub const DEFAULT_MAX_TRIALS: u32 = 6;
/// Upper bound on tips requested from the model.
pub const MAX_REQUESTED_TIPS: usize = 8;
/// Raw trajectories kept in the prompt by the replay baseline.
pub const REPLAY_CAP: usize = 3;

/// How a game is learned across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    /// Tips from the agent's own failed actions.
    SelfHistory,
    /// Tips from contrasting failed actions with the walkthrough.
    ExpertContrast,
    /// Baseline: earlier trajectories pasted raw into the prompt.
    PureReplay,
}

impl LearningMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LearningMode::SelfHistory => "self_history",
            LearningMode::ExpertContrast => "expert_contrast",
            LearningMode::PureReplay => "pure_replay",
        }
    }

    pub fn from_name(name: &str) -> Option<LearningMode> {
        [LearningMode::SelfHistory, LearningMode::ExpertContrast, LearningMode::PureReplay]
            .into_iter()
            .find(|m| m.as_str() == name)
    }

    fn tip_scenario(self) -> Option<TipScenario> {
        match self {
            LearningMode::SelfHistory => Some(TipScenario::SelfHistory),
            LearningMode::ExpertContrast => Some(TipScenario::ExpertContrast),
            LearningMode::PureReplay => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub max_trials: u32,
    /// Also ask for tips after a successful trial.
    pub distill_successes: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions { max_trials: DEFAULT_MAX_TRIALS, distill_successes: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    pub tips_in: Option<TipSet>,
    /// Messages the policy saw on the trial's first turn.
    pub opening_prompt: Vec<Message>,
    pub trajectory: Trajectory,
    pub result: EpisodeResult,
    /// Raw reflection reply, when one was requested.
    pub reflection: Option<String>,
    pub tips_out: Option<TipSet>,
    /// This trial succeeded and its `tips_in` are the game's final tips.
    pub is_final: bool,
}

/// All trials on one game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRun {
    pub game_id: String,
    pub level: u8,
    pub mode: LearningMode,
    pub records: Vec<TrialRecord>,
    pub final_tips: Option<TipSet>,
    /// Backend failure that stopped the loop early.
    pub error: Option<String>,
}

impl TrialRun {
    /// 1-based index of the first successful trial.
    pub fn solved_at(&self) -> Option<u32> {
        self.records.iter().find(|r| r.result.success).map(|r| r.trial_index)
    }

    /// Best normalized points over trials `1..=k`.
    pub fn best_points_through(&self, k: u32) -> f64 {
        self.records
            .iter()
            .filter(|r| r.trial_index <= k)
            .map(|r| r.result.normalized)
            .fold(0.0, f64::max)
    }
}

fn trial_label(record: &TrialRecord, won: bool) -> String {
    format!(
        "Your actions in {} trial {} (score {}/{})",
        if won { "winning" } else { "failed" },
        record.trial_index,
        record.trajectory.score,
        record.result.max_score
    )
}

fn tip_request(opening: &str) -> String {
    format!(
        "{opening} Write at most {MAX_REQUESTED_TIPS} short, numbered tips. Start your answer with \
         the line \"{TIPS_MARKER}\" and put one tip per numbered item."
    )
}

/// Reflection prompt after failed trials. Only action texts of past trials
/// go in, never their feedback transcripts.
pub fn build_reflection_prompt(
    scenario: TipScenario,
    observation: &str,
    failed_trials: &[TrialRecord],
    expert: Option<&[String]>,
) -> Result<PromptBundle, TipsError> {
    let Some(latest) = failed_trials.last() else {
        return Err(TipsError::ScenarioMismatch("reflection needs at least one failed trial".into()));
    };
    let prior = latest.tips_in.clone().filter(|t| !t.is_empty());
    let mut bundle = PromptBundle {
        system_preamble: game_preamble(),
        tips: prior.clone(),
        failed_actions: failed_trials
            .iter()
            .map(|r| ActionList { label: trial_label(r, false), actions: r.trajectory.actions() })
            .collect(),
        transcript: vec![TranscriptEntry::Observation(observation.to_string())],
        ..Default::default()
    };
    let opening = match (scenario, prior.is_some()) {
        (TipScenario::SelfHistory, false) => {
            "You failed the game. Analyze your previous actions that led to failure and think \
             about what you should do differently."
        }
        (TipScenario::SelfHistory, true) => {
            "You failed the game again even with the tips above. Reflect on the given tips and on \
             all of your previous actions that led to failure, and generate more effective tips."
        }
        (TipScenario::ExpertContrast, with_tips) => {
            let Some(expert) = expert.filter(|e| !e.is_empty()) else {
                return Err(TipsError::ScenarioMismatch(
                    "expert contrast needs the expert's actions".into(),
                ));
            };
            bundle.expert_walkthrough = expert.to_vec();
            if with_tips {
                "You failed the game again even with the tips above. Contrast the actions that made \
                 you fail with the expert's actions that win the game, reflect on the given tips, \
                 and generate more effective tips."
            } else {
                "You failed the game. Contrast the actions that made you fail with the expert's \
                 actions that win the game, and find where your choices went wrong."
            }
        }
        (other, _) => {
            return Err(TipsError::ScenarioMismatch(format!(
                "{other:?} tips are not produced by reflecting on a trial"
            )))
        }
    };
    bundle.request = Some(tip_request(opening));
    Ok(bundle)
}

/// Prompt for distilling tips from a successful trial.
pub fn build_success_prompt(observation: &str, record: &TrialRecord) -> PromptBundle {
    PromptBundle {
        system_preamble: game_preamble(),
        tips: record.tips_in.clone(),
        failed_actions: vec![ActionList {
            label: trial_label(record, true),
            actions: record.trajectory.actions(),
        }],
        transcript: vec![TranscriptEntry::Observation(observation.to_string())],
        request: Some(tip_request(
            "You won the game. Summarize what made this attempt succeed so that you can win \
             similar games quickly.",
        )),
        ..Default::default()
    }
}

fn trajectory_text(t: &Trajectory) -> String {
    let mut out = t.observation.clone();
    for turn in &t.turns {
        out.push_str(&format!("\n> {}\n{}", turn.action, turn.feedback));
    }
    out
}

/// Plays up to `max_trials` episodes of one game, learning tips after each
/// failure, and stops at the first success. The tips in effect during that
/// success are the game's final tips.
pub fn run_trials(
    spec: &GameSpec,
    policy: &mut dyn Policy,
    mode: LearningMode,
    options: TrialOptions,
) -> TrialRun {
    let game_id = spec.game_id();
    let (_, observation) = new_episode(spec);
    let expert: Vec<String> = spec.walkthrough.iter().map(render).collect();
    let mut run = TrialRun {
        game_id: game_id.clone(),
        level: spec.level,
        mode,
        records: Vec::new(),
        final_tips: None,
        error: None,
    };
    let mut tips: Option<TipSet> = None;

    for trial in 1..=options.max_trials.max(1) {
        let mut base = PromptBundle::for_game().with_tips(tips.clone());
        if mode == LearningMode::PureReplay {
            let skip = run.records.len().saturating_sub(REPLAY_CAP);
            base.past_trajectories = run.records[skip..]
                .iter()
                .map(|r| trajectory_text(&r.trajectory))
                .collect();
        }
        let mut opening = base.clone();
        opening.transcript.push(TranscriptEntry::Observation(observation.clone()));

        let outcome = run_episode_with(spec, policy, &base);
        let mut record = TrialRecord {
            trial_index: trial,
            tips_in: base.tips.clone(),
            opening_prompt: opening.messages(),
            trajectory: outcome.trajectory,
            result: outcome.result,
            reflection: None,
            tips_out: None,
            is_final: false,
        };
        if let Some(err) = record.result.policy_error.clone() {
            run.records.push(record);
            run.error = Some(err);
            return run;
        }

        let won = record.result.success;
        let reflection = match (won, mode.tip_scenario()) {
            (true, Some(scenario)) if options.distill_successes => {
                Some((scenario, Ok(build_success_prompt(&observation, &record))))
            }
            (false, Some(scenario)) => {
                let mut failed = run.records.clone();
                failed.push(record.clone());
                Some((scenario, build_reflection_prompt(scenario, &observation, &failed, Some(&expert))))
            }
            _ => None,
        };
        if let Some((scenario, bundle)) = reflection {
            let generated = bundle.and_then(|b| {
                let reply = policy.complete(&b.messages())?;
                record.reflection = Some(reply.clone());
                extract_tips(&reply, Provenance::trial(scenario, &game_id, trial))
            });
            match generated {
                Ok(set) => record.tips_out = Some(set),
                Err(e) => {
                    run.records.push(record);
                    run.error = Some(e.to_string());
                    return run;
                }
            }
        }

        if won {
            record.is_final = record.tips_in.is_some();
            run.final_tips = record.tips_in.clone();
            run.records.push(record);
            return run;
        }
        tips = record.tips_out.clone();
        run.records.push(record);
    }
    run
}

/// Summarizes final tips from several games into one general set.
pub fn aggregate_tips(final_tipsets: &[TipSet], policy: &mut dyn Policy) -> Result<TipSet, TipsError> {
    let inputs: Vec<&TipSet> = final_tipsets.iter().filter(|t| !t.is_empty()).collect();
    if inputs.is_empty() {
        return Err(TipsError::NoInput);
    }
    let mut body = String::from(
        "Each tip list below led an agent to win a different text-based cooking game. The games \
         share a theme, commands and kinds of objects, but their cookbooks and maps differ.\n",
    );
    let mut sources = Vec::new();
    for (i, set) in inputs.iter().enumerate() {
        let label = set.provenance.game_id.clone().unwrap_or_else(|| format!("game {}", i + 1));
        body.push_str(&format!("\nTips from {label}:\n{}\n", render_tips(set)));
        sources.push(label);
    }
    body.push_str(&format!(
        "\nGeneralize these into at most {MAX_REQUESTED_TIPS} tips that help an agent become an \
         expert across all such games. Start your answer with the line \"{TIPS_MARKER}\" followed \
         by a numbered list."
    ));
    let messages = vec![
        Message::new(
            Role::System,
            "You summarize advice for agents that play text-based games.",
        ),
        Message::new(Role::User, body),
    ];
    let reply = policy.complete(&messages)?;
    let mut provenance = Provenance::new(TipScenario::Aggregated);
    provenance.sources = sources;
    extract_tips(&reply, provenance)
}
