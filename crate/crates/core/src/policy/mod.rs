//! The policy interface: one action text per turn from a [`PromptBundle`],
//! with remote chat, expert, replay, random, scripted and human backends.

mod backends;
pub mod remote;

pub use backends::{
    ExpertPolicy, HumanPolicy, RandomValidPolicy, ReplayPolicy, ScriptedPolicy,
};
pub use remote::{InFlightLimiter, RemoteChatPolicy};

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::model::GameSpec;
use crate::parser::ActionForm;
use crate::tips::{render_tips, TipSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Message {
        Message { role, content: content.into() }
    }
}

/// Compact JSON of a message list; equal lists give equal bytes.
pub fn serialize_messages(messages: &[Message]) -> String {
    serde_json::to_string(messages).expect("messages serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "text")]
pub enum TranscriptEntry {
    /// Room description or feedback shown to the agent.
    Observation(String),
    Action(String),
}

/// A labelled list of action texts, e.g. one failed trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionList {
    pub label: String,
    pub actions: Vec<String>,
}

/// Everything a policy sees on one turn, in serialization order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_preamble: String,
    pub tips: Option<TipSet>,
    /// Raw earlier trajectories (replay baseline only).
    pub past_trajectories: Vec<String>,
    pub failed_actions: Vec<ActionList>,
    pub expert_walkthrough: Vec<String>,
    pub transcript: Vec<TranscriptEntry>,
    /// Closing instruction, used by reflection and aggregation prompts.
    pub request: Option<String>,
}

pub const TIPS_HEADER: &str = "Here are some tips to help you win the game:";
pub const EXPERT_HEADER: &str = "An expert player won this game with these actions:";

fn quote_actions(actions: &[String]) -> String {
    actions.iter().map(|a| format!("> {a}")).collect::<Vec<_>>().join("\n")
}

impl PromptBundle {
    /// Basic-setting bundle: preamble only.
    pub fn for_game() -> PromptBundle {
        PromptBundle { system_preamble: game_preamble(), ..Default::default() }
    }

    pub fn with_tips(mut self, tips: Option<TipSet>) -> PromptBundle {
        self.tips = tips.filter(|t| !t.tips.is_empty());
        self
    }

    /// Number of agent actions so far in the current episode.
    pub fn actions_taken(&self) -> usize {
        self.transcript
            .iter()
            .filter(|e| matches!(e, TranscriptEntry::Action(_)))
            .count()
    }

    pub fn latest_observation(&self) -> Option<&str> {
        self.transcript.iter().rev().find_map(|e| match e {
            TranscriptEntry::Observation(text) => Some(text.as_str()),
            TranscriptEntry::Action(_) => None,
        })
    }

    fn head_messages(&self) -> Vec<Message> {
        let mut out = vec![Message::new(Role::System, self.system_preamble.clone())];
        if let Some(tips) = self.tips.as_ref().filter(|t| !t.tips.is_empty()) {
            out.push(Message::new(Role::System, format!("{TIPS_HEADER}\n{}", render_tips(tips))));
        }
        for (i, past) in self.past_trajectories.iter().enumerate() {
            out.push(Message::new(Role::System, format!("Previous attempt {}:\n{past}", i + 1)));
        }
        for list in &self.failed_actions {
            out.push(Message::new(
                Role::System,
                format!("{}:\n{}", list.label, quote_actions(&list.actions)),
            ));
        }
        if !self.expert_walkthrough.is_empty() {
            out.push(Message::new(
                Role::System,
                format!("{EXPERT_HEADER}\n{}", quote_actions(&self.expert_walkthrough)),
            ));
        }
        out
    }

    fn transcript_messages(entries: &[TranscriptEntry]) -> Vec<Message> {
        entries
            .iter()
            .map(|e| match e {
                TranscriptEntry::Observation(t) => Message::new(Role::User, t.clone()),
                TranscriptEntry::Action(t) => Message::new(Role::Assistant, t.clone()),
            })
            .collect()
    }

    /// Full ordered message list: preamble, tips, failure and expert blocks,
    /// transcript, request.
    pub fn messages(&self) -> Vec<Message> {
        self.messages_within(usize::MAX)
    }

    /// Like [`messages`](Self::messages), dropping the oldest transcript
    /// turns until the total content fits `char_budget`. The preamble, tips
    /// and the latest observation are never dropped.
    pub fn messages_within(&self, char_budget: usize) -> Vec<Message> {
        let head = self.head_messages();
        let tail: Vec<Message> = self
            .request
            .iter()
            .map(|r| Message::new(Role::User, r.clone()))
            .collect();
        let chars = |ms: &[Message]| ms.iter().map(|m| m.content.chars().count()).sum::<usize>();
        let fixed = chars(&head) + chars(&tail);
        let transcript = Self::transcript_messages(&self.transcript);
        let lengths: Vec<usize> = transcript.iter().map(|m| m.content.chars().count()).collect();
        let mut used: usize = fixed + lengths.iter().sum::<usize>();
        let mut first = 0;
        while used > char_budget && transcript.len() - first > 1 {
            // Drop one observation/action pair at a time.
            let n = 2.min(transcript.len() - first - 1);
            used -= lengths[first..first + n].iter().sum::<usize>();
            first += n;
        }
        head.into_iter()
            .chain(transcript.into_iter().skip(first))
            .chain(tail)
            .collect()
    }

    pub fn serialize(&self) -> String {
        serialize_messages(&self.messages())
    }
}

/// Role statement, action list and turn protocol shown before every game.
pub fn game_preamble() -> String {
    let actions: Vec<String> = ActionForm::ALL
        .iter()
        .map(|f| {
            let (name, params, help) = f.signature();
            format!("{name}({}) # {help}", params.join(", "))
        })
        .collect();
    format!(
        "You are an agent playing in a text-based game. All of your available actions are in the \
         ActionList:\n{}\nBased on the game's description that I give you, provide me with only \
         one action per step in the action list and wait for my response. (Following is the \
         description of the first state in a TextWorld game.)",
        actions.join("\n")
    )
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("backend transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("backend call exceeded its time budget after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("{0}")]
    Exhausted(String),
    #[error("the {0} backend cannot generate free text")]
    Unsupported(&'static str),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("backend i/o: {0}")]
    Io(String),
}

/// A policy. Backends may keep state across calls (scripts, counters).
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Raw reply for the next turn; the harness parses it.
    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError>;

    /// Free-form completion used for reflection and tip aggregation.
    fn complete(&mut self, messages: &[Message]) -> Result<String, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError> {
        (**self).next_action(bundle)
    }
    fn complete(&mut self, messages: &[Message]) -> Result<String, PolicyError> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteChat,
    Expert,
    Replay,
    RandomValid,
    HumanRepl,
    Scripted,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::RemoteChat => "remote_chat",
            BackendKind::Expert => "expert",
            BackendKind::Replay => "replay",
            BackendKind::RandomValid => "random_valid",
            BackendKind::HumanRepl => "human_repl",
            BackendKind::Scripted => "scripted",
        }
    }

    pub fn from_name(name: &str) -> Option<BackendKind> {
        [
            BackendKind::RemoteChat,
            BackendKind::Expert,
            BackendKind::Replay,
            BackendKind::RandomValid,
            BackendKind::HumanRepl,
            BackendKind::Scripted,
        ]
        .into_iter()
        .find(|k| k.as_str() == name)
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "COOKWORLD_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub temperature: f64,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub max_retries: u32,
    pub api_key_env_var: String,
    /// Base delay of the exponential retry backoff.
    pub backoff_base_ms: u64,
    /// Character budget for serialized prompts before transcript truncation.
    pub char_budget: usize,
    /// Cap on concurrent remote requests.
    pub max_in_flight: usize,
    /// Response script for the scripted backend (JSON array of strings).
    pub script: Option<PathBuf>,
    /// Stored trajectory for the replay backend.
    pub trajectory: Option<PathBuf>,
    pub random_seed: u64,
    /// Where remote request logs go.
    pub log_dir: Option<PathBuf>,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> BackendConfig {
        BackendConfig {
            kind,
            endpoint: None,
            model_name: None,
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            api_key_env_var: DEFAULT_API_KEY_ENV.to_string(),
            backoff_base_ms: 500,
            char_budget: 24_000,
            max_in_flight: 4,
            script: None,
            trajectory: None,
            random_seed: 0,
            log_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let missing = |what: &str| Err(PolicyError::Config(format!("{} backend needs {what}", self.kind.as_str())));
        match self.kind {
            BackendKind::RemoteChat if self.endpoint.is_none() => missing("an endpoint"),
            BackendKind::RemoteChat if self.model_name.is_none() => missing("a model name"),
            BackendKind::Scripted if self.script.is_none() => missing("a script file"),
            BackendKind::Replay if self.trajectory.is_none() => missing("a trajectory file"),
            _ if self.max_in_flight == 0 => Err(PolicyError::Config("max_in_flight must be >= 1".into())),
            _ => Ok(()),
        }
    }
}

/// Hands out one policy per episode or per game.
pub trait PolicyFactory: Sync {
    fn make(&self, spec: &GameSpec) -> Result<Box<dyn Policy>, PolicyError>;

    fn describe(&self) -> String;
}

impl<F> PolicyFactory for F
where
    F: Fn(&GameSpec) -> Result<Box<dyn Policy>, PolicyError> + Sync,
{
    fn make(&self, spec: &GameSpec) -> Result<Box<dyn Policy>, PolicyError> {
        self(spec)
    }

    fn describe(&self) -> String {
        "custom".into()
    }
}

/// Builds backends from a [`BackendConfig`]. Files are read once; the remote
/// in-flight limiter is shared by every policy it makes.
pub struct BackendFactory {
    config: BackendConfig,
    script: Vec<String>,
    replay: Vec<String>,
    limiter: Arc<InFlightLimiter>,
}

impl BackendFactory {
    pub fn new(config: BackendConfig) -> Result<BackendFactory, PolicyError> {
        config.validate()?;
        let io = |e: std::io::Error, p: &PathBuf| PolicyError::Io(format!("{}: {e}", p.display()));
        let script = match (&config.kind, &config.script) {
            (BackendKind::Scripted, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| io(e, path))?;
                serde_json::from_str(&text)
                    .map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?
            }
            _ => Vec::new(),
        };
        let replay = match (&config.kind, &config.trajectory) {
            (BackendKind::Replay, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| io(e, path))?;
                let trajectory = Trajectory::from_jsonl(&text)
                    .map_err(|e| PolicyError::Config(format!("{}: {e}", path.display())))?;
                trajectory.actions()
            }
            _ => Vec::new(),
        };
        let limiter = Arc::new(InFlightLimiter::new(config.max_in_flight));
        Ok(BackendFactory { config, script, replay, limiter })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// A policy that is not tied to a particular game, for aggregation.
    pub fn make_unbound(&self) -> Result<Box<dyn Policy>, PolicyError> {
        match self.config.kind {
            BackendKind::RemoteChat => Ok(Box::new(RemoteChatPolicy::new(
                self.config.clone(),
                self.limiter.clone(),
            )?)),
            BackendKind::Scripted => Ok(Box::new(ScriptedPolicy::new(self.script.clone()))),
            BackendKind::HumanRepl => Ok(Box::new(HumanPolicy::stdio())),
            BackendKind::Replay => Ok(Box::new(ReplayPolicy::new(self.replay.clone()))),
            BackendKind::Expert | BackendKind::RandomValid => Err(PolicyError::Config(format!(
                "the {} backend needs a game",
                self.config.kind.as_str()
            ))),
        }
    }
}

impl PolicyFactory for BackendFactory {
    fn make(&self, spec: &GameSpec) -> Result<Box<dyn Policy>, PolicyError> {
        match self.config.kind {
            BackendKind::Expert => Ok(Box::new(ExpertPolicy::new(spec))),
            BackendKind::RandomValid => Ok(Box::new(RandomValidPolicy::new(spec, self.config.random_seed))),
            _ => self.make_unbound(),
        }
    }

    fn describe(&self) -> String {
        match (&self.config.kind, &self.config.model_name) {
            (BackendKind::RemoteChat, Some(model)) => format!("remote_chat:{model}"),
            (kind, _) => kind.as_str().to_string(),
        }
    }
}
