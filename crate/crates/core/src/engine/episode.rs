//! Episode loop, trajectory records and replay verification.

use serde::{Deserialize, Serialize};

use crate::model::GameSpec;
use crate::parser::first_command_line;
use crate::policy::{Policy, PromptBundle, TranscriptEntry};

use super::{new_episode, step_text, text, Status};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u32,
    /// The command line that was parsed (first non-empty line of the reply).
    pub action: String,
    pub feedback: String,
    pub score_delta: u32,
    pub score: u32,
    pub status: Status,
}

/// One episode, turn by turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: GameSpec,
    pub observation: String,
    pub turns: Vec<TurnRecord>,
    pub status: Status,
    pub score: u32,
    /// Why the episode was cut short by its policy, if it was.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Start {
        template_version: String,
        spec: Box<GameSpec>,
        observation: String,
    },
    Turn(TurnRecord),
    End {
        status: Status,
        score: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagnostic: Option<String>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trajectory file is missing its {0} record")]
    Missing(&'static str),
    #[error("trajectory written with feedback templates {0:?}, this build uses {1:?}")]
    TemplateVersion(String, String),
    #[error("trajectory records out of order at line {0}")]
    Order(usize),
}

impl Trajectory {
    pub fn actions(&self) -> Vec<String> {
        self.turns.iter().map(|t| t.action.clone()).collect()
    }

    /// Canonical JSON lines: a start record with the full spec, one record
    /// per turn, an end record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &Line| {
            out.push_str(&serde_json::to_string(line).expect("trajectory serializes"));
            out.push('\n');
        };
        push(&Line::Start {
            template_version: text::TEMPLATE_VERSION.to_string(),
            spec: Box::new(self.spec.clone()),
            observation: self.observation.clone(),
        });
        for turn in &self.turns {
            push(&Line::Turn(turn.clone()));
        }
        push(&Line::End {
            status: self.status,
            score: self.score,
            diagnostic: self.diagnostic.clone(),
        });
        out
    }

    pub fn from_jsonl(input: &str) -> Result<Trajectory, TrajectoryError> {
        let mut start = None;
        let mut turns = Vec::new();
        let mut end = None;
        for (i, raw) in input.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw)
                .map_err(|source| TrajectoryError::Json { line: i + 1, source })?;
            match line {
                Line::Start { template_version, spec, observation } if start.is_none() => {
                    if template_version != text::TEMPLATE_VERSION {
                        return Err(TrajectoryError::TemplateVersion(
                            template_version,
                            text::TEMPLATE_VERSION.into(),
                        ));
                    }
                    start = Some((*spec, observation));
                }
                Line::Turn(t) if start.is_some() && end.is_none() => turns.push(t),
                Line::End { status, score, diagnostic } if start.is_some() && end.is_none() => {
                    end = Some((status, score, diagnostic))
                }
                _ => return Err(TrajectoryError::Order(i + 1)),
            }
        }
        let (spec, observation) = start.ok_or(TrajectoryError::Missing("start"))?;
        let (status, score, diagnostic) = end.ok_or(TrajectoryError::Missing("end"))?;
        Ok(Trajectory { spec, observation, turns, status, score, diagnostic })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub points: u32,
    pub max_score: u32,
    pub normalized: f64,
    pub success: bool,
    pub turns: u32,
    /// Set when the policy failed; such episodes count as lost with 0 points.
    pub policy_error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub trajectory: Trajectory,
    pub result: EpisodeResult,
}

/// Plays one episode in the basic setting (preamble only).
pub fn run_episode(spec: &GameSpec, policy: &mut dyn Policy) -> EpisodeOutcome {
    run_episode_with(spec, policy, &PromptBundle::for_game())
}

/// Plays one episode; `base` supplies the preamble, tips and other blocks,
/// and the transcript is appended turn by turn.
pub fn run_episode_with(spec: &GameSpec, policy: &mut dyn Policy, base: &PromptBundle) -> EpisodeOutcome {
    let (mut state, observation) = new_episode(spec);
    let mut bundle = base.clone();
    bundle.transcript.push(TranscriptEntry::Observation(observation.clone()));
    let mut turns = Vec::new();
    let mut diagnostic = None;

    while state.status == Status::Running {
        let reply = match policy.next_action(&bundle) {
            Ok(reply) => reply,
            Err(e) => {
                tracing::warn!(game = %spec.game_id(), "policy failed: {e}");
                diagnostic = Some(e.to_string());
                state.status = Status::Lost;
                break;
            }
        };
        let line = first_command_line(&reply);
        if let Some(rest) = line.discarded {
            tracing::debug!(game = %spec.game_id(), discarded = rest, "ignoring extra reply lines");
        }
        let (next, feedback) = step_text(spec, &state, line.command).expect("episode is running");
        turns.push(TurnRecord {
            turn: next.turn,
            action: line.command.to_string(),
            feedback: feedback.text.clone(),
            score_delta: feedback.score_delta,
            score: next.score,
            status: next.status,
        });
        bundle.transcript.push(TranscriptEntry::Action(line.command.to_string()));
        bundle.transcript.push(TranscriptEntry::Observation(feedback.text));
        state = next;
    }

    let points = if diagnostic.is_some() { 0 } else { state.score };
    let result = EpisodeResult {
        points,
        max_score: spec.max_score,
        normalized: points as f64 / spec.max_score as f64,
        success: state.status == Status::Won && diagnostic.is_none(),
        turns: state.turn,
        policy_error: diagnostic.clone(),
    };
    let trajectory = Trajectory {
        spec: spec.clone(),
        observation,
        turns,
        status: state.status,
        score: state.score,
        diagnostic,
    };
    EpisodeOutcome { trajectory, result }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayMismatch {
    /// 0 for the opening observation, otherwise the turn number.
    pub turn: u32,
    pub field: &'static str,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("turn {}: {} differs (recorded {:?}, replayed {:?})", .0.turn, .0.field, .0.expected, .0.actual)]
    Mismatch(Box<ReplayMismatch>),
    #[error("recorded turn {0} continues after the game ended")]
    PastEnd(u32),
}

/// Re-executes a trajectory from its embedded spec and checks every
/// feedback byte, score and status.
pub fn replay(trajectory: &Trajectory) -> Result<(), ReplayError> {
    let spec = &trajectory.spec;
    let mismatch = |turn: u32, field: &'static str, expected: String, actual: String| {
        ReplayError::Mismatch(Box::new(ReplayMismatch { turn, field, expected, actual }))
    };
    let (mut state, observation) = new_episode(spec);
    if observation != trajectory.observation {
        return Err(mismatch(0, "observation", trajectory.observation.clone(), observation));
    }
    for record in &trajectory.turns {
        let (next, fb) =
            step_text(spec, &state, &record.action).map_err(|_| ReplayError::PastEnd(record.turn))?;
        if fb.text != record.feedback {
            return Err(mismatch(record.turn, "feedback", record.feedback.clone(), fb.text));
        }
        if fb.score_delta != record.score_delta || next.score != record.score {
            return Err(mismatch(
                record.turn,
                "score",
                format!("{}+{}", record.score, record.score_delta),
                format!("{}+{}", next.score, fb.score_delta),
            ));
        }
        if next.status != record.status || next.turn != record.turn {
            return Err(mismatch(
                record.turn,
                "status",
                format!("{:?}@{}", record.status, record.turn),
                format!("{:?}@{}", next.status, next.turn),
            ));
        }
        state = next;
    }
    if trajectory.diagnostic.is_none() && state.status != trajectory.status {
        return Err(mismatch(
            state.turn,
            "final status",
            format!("{:?}", trajectory.status),
            format!("{:?}", state.status),
        ));
    }
    Ok(())
}
