//! Tips: extraction from model output, persistence, bundled tip sets, and
//! the trial loop that learns them.

mod trials;

pub use trials::{
    aggregate_tips, build_reflection_prompt, build_success_prompt, run_trials, LearningMode,
    TrialOptions, TrialRecord, TrialRun, DEFAULT_MAX_TRIALS, MAX_REQUESTED_TIPS, REPLAY_CAP,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::policy::PolicyError;

/// Marker line preceding a numbered tip list in model output.
pub const TIPS_MARKER: &str = "Tips to win the game next time:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipScenario {
    SelfHistory,
    ExpertContrast,
    Aggregated,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: TipScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_index: Option<u32>,
    /// Games whose final tips were aggregated into this set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
}

impl Provenance {
    pub fn new(scenario: TipScenario) -> Provenance {
        Provenance { scenario, game_id: None, trial_index: None, sources: Vec::new() }
    }

    pub fn trial(scenario: TipScenario, game_id: &str, trial_index: u32) -> Provenance {
        Provenance {
            scenario,
            game_id: Some(game_id.to_string()),
            trial_index: Some(trial_index),
            sources: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tip {
    pub index: u32,
    pub text: String,
}

/// Ordered tips, indexed 1..n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TipSet {
    pub tips: Vec<Tip>,
    pub provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum TipsError {
    #[error("no numbered tips found in model output")]
    NoTipsFound,
    #[error("{0}")]
    ScenarioMismatch(String),
    #[error("no final tip sets to aggregate")]
    NoInput,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("unknown built-in tip set {0:?} (expected builtin:human or builtin:general)")]
    UnknownBuiltin(String),
}

impl TipSet {
    pub fn from_texts<I, S>(texts: I, provenance: Provenance) -> TipSet
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tips = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Tip { index: i as u32 + 1, text: t.into() })
            .collect();
        TipSet { tips, provenance }
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tips.iter().map(|t| t.text.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.tips.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tips serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), TipsError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| TipsError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<TipSet, TipsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TipsError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| TipsError::Json { path: path.display().to_string(), source })
    }
}

/// Parses `1.` / `2)` / `3;` / `4:` item starts.
fn numbered_item(line: &str) -> Option<&str> {
    let line = line.trim_start();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 3 {
        return None;
    }
    let rest = line[digits..].trim_start();
    let rest = rest.strip_prefix(['.', ')', ';', ':'])?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let text = rest.trim();
    (!text.is_empty()).then_some(text)
}

/// Pulls a numbered tip list out of free text. The list after the marker
/// line wins; without a marker, the first numbered list is used. Wrapped
/// lines are joined into one paragraph; a blank line followed by other text
/// ends the list. Tips are renumbered 1..n.
pub fn extract_tips(output: &str, provenance: Provenance) -> Result<TipSet, TipsError> {
    let marker = TIPS_MARKER.to_ascii_lowercase();
    let mut lines: Vec<&str> = output.lines().collect();
    if let Some(pos) = lines.iter().position(|l| l.to_ascii_lowercase().contains(&marker)) {
        let line = lines[pos];
        let at = line.to_ascii_lowercase().find(&marker).expect("marker present") + marker.len();
        let same_line = line[at..].trim();
        lines = lines.split_off(pos + 1);
        if !same_line.is_empty() {
            lines.insert(0, same_line);
        }
    }

    let mut tips: Vec<String> = Vec::new();
    let mut gap = false;
    for line in lines {
        if let Some(text) = numbered_item(line) {
            tips.push(text.to_string());
            gap = false;
        } else if line.trim().is_empty() {
            gap = !tips.is_empty();
        } else if let Some(last) = tips.last_mut() {
            if gap {
                break;
            }
            last.push(' ');
            last.push_str(line.trim());
        }
    }
    if tips.is_empty() {
        return Err(TipsError::NoTipsFound);
    }
    Ok(TipSet::from_texts(tips, provenance))
}

/// `1. text` lines.
pub fn render_tips(tips: &TipSet) -> String {
    tips.tips
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, t.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Hand-written tips shipped with the crate.
pub fn builtin_human() -> TipSet {
    extract_tips(include_str!("../../data/tips_human.txt"), Provenance::new(TipScenario::Human))
        .expect("bundled human tips")
}

/// General tips distilled from ten training games, shipped with the crate.
pub fn builtin_general() -> TipSet {
    let mut p = Provenance::new(TipScenario::Aggregated);
    p.game_id = Some("builtin:general".into());
    extract_tips(include_str!("../../data/tips_general.txt"), p).expect("bundled general tips")
}

/// Resolves `builtin:human`, `builtin:general` or a path to a tip-store file.
pub fn load_tips(source: &str) -> Result<TipSet, TipsError> {
    match source.strip_prefix("builtin:") {
        Some("human") => Ok(builtin_human()),
        Some("general") | Some("model") => Ok(builtin_general()),
        Some(other) => Err(TipsError::UnknownBuiltin(other.to_string())),
        None => TipSet::load(Path::new(source)),
    }
}
