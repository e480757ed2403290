use std::collections::VecDeque;
use std::io::{self, BufRead, Write};

use crate::model::{Direction, GameSpec};
use crate::parser::{render, Action, ActionForm};
use crate::rng::DetRng;

use super::{Message, Policy, PolicyError, PromptBundle};

/// Plays the game's walkthrough: turn `k` gets `render(walkthrough[k])`.
pub struct ExpertPolicy {
    actions: Vec<String>,
}

impl ExpertPolicy {
    pub fn new(spec: &GameSpec) -> ExpertPolicy {
        ExpertPolicy { actions: spec.walkthrough.iter().map(render).collect() }
    }
}

impl Policy for ExpertPolicy {
    fn name(&self) -> &'static str {
        "expert"
    }

    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError> {
        let k = bundle.actions_taken();
        self.actions
            .get(k)
            .cloned()
            .ok_or_else(|| PolicyError::Exhausted(format!("walkthrough has no action {}", k + 1)))
    }

    fn complete(&mut self, _: &[Message]) -> Result<String, PolicyError> {
        Err(PolicyError::Unsupported("expert"))
    }
}

/// Re-issues a stored action sequence, indexed by turn.
pub struct ReplayPolicy {
    actions: Vec<String>,
}

impl ReplayPolicy {
    pub fn new(actions: Vec<String>) -> ReplayPolicy {
        ReplayPolicy { actions }
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError> {
        let k = bundle.actions_taken();
        self.actions
            .get(k)
            .cloned()
            .ok_or_else(|| PolicyError::Exhausted(format!("replay ran out of actions at turn {}", k + 1)))
    }

    fn complete(&mut self, _: &[Message]) -> Result<String, PolicyError> {
        Err(PolicyError::Unsupported("replay"))
    }
}

/// Answers every call, action or free text, from a fixed queue.
pub struct ScriptedPolicy {
    responses: VecDeque<String>,
    served: usize,
}

impl ScriptedPolicy {
    pub fn new<I, S>(responses: I) -> ScriptedPolicy
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedPolicy {
            responses: responses.into_iter().map(Into::into).collect(),
            served: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }

    fn pop(&mut self) -> Result<String, PolicyError> {
        let next = self.responses.pop_front().ok_or_else(|| {
            PolicyError::Exhausted(format!("script exhausted after {} responses", self.served))
        })?;
        self.served += 1;
        Ok(next)
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn next_action(&mut self, _: &PromptBundle) -> Result<String, PolicyError> {
        self.pop()
    }

    fn complete(&mut self, _: &[Message]) -> Result<String, PolicyError> {
        self.pop()
    }
}

/// Grammar-valid actions over the game's vocabulary. Validity is against the
/// grammar only; most picks are refused by the world.
pub struct RandomValidPolicy {
    rng: DetRng,
    names: Vec<String>,
}

impl RandomValidPolicy {
    pub fn new(spec: &GameSpec, seed: u64) -> RandomValidPolicy {
        let mut names: Vec<String> = spec.entities.iter().map(|e| e.name.clone()).collect();
        names.extend(spec.map.doors.iter().map(|d| d.name.clone()));
        names.extend(Direction::ALL.iter().map(|d| d.as_str().to_string()));
        RandomValidPolicy {
            rng: DetRng::new(seed, spec.seed.rotate_left(8) ^ spec.level as u64),
            names,
        }
    }

    pub fn sample(&mut self) -> Action {
        let form = *self.rng.pick(&ActionForm::ALL);
        let args = (0..form.arity())
            .map(|_| self.rng.pick(&self.names).clone())
            .collect();
        Action::new(form, args).expect("vocabulary names are valid arguments")
    }
}

impl Policy for RandomValidPolicy {
    fn name(&self) -> &'static str {
        "random_valid"
    }

    fn next_action(&mut self, _: &PromptBundle) -> Result<String, PolicyError> {
        Ok(render(&self.sample()))
    }

    fn complete(&mut self, _: &[Message]) -> Result<String, PolicyError> {
        Err(PolicyError::Unsupported("random_valid"))
    }
}

/// Interactive player: shows the latest observation, reads one line.
pub struct HumanPolicy {
    input: Box<dyn BufRead + Send>,
    output: Box<dyn Write + Send>,
}

impl HumanPolicy {
    pub fn new(input: Box<dyn BufRead + Send>, output: Box<dyn Write + Send>) -> HumanPolicy {
        HumanPolicy { input, output }
    }

    pub fn stdio() -> HumanPolicy {
        HumanPolicy::new(Box::new(io::BufReader::new(io::stdin())), Box::new(io::stdout()))
    }

    fn io_err(e: io::Error) -> PolicyError {
        PolicyError::Io(e.to_string())
    }

    fn read_line(&mut self) -> Result<Option<String>, PolicyError> {
        let mut line = String::new();
        let n = self.input.read_line(&mut line).map_err(Self::io_err)?;
        Ok((n > 0).then(|| line.trim_end_matches(['\n', '\r']).to_string()))
    }
}

impl Policy for HumanPolicy {
    fn name(&self) -> &'static str {
        "human_repl"
    }

    fn next_action(&mut self, bundle: &PromptBundle) -> Result<String, PolicyError> {
        if let Some(obs) = bundle.latest_observation() {
            writeln!(self.output, "\n{obs}").map_err(Self::io_err)?;
        }
        write!(self.output, "> ").map_err(Self::io_err)?;
        self.output.flush().map_err(Self::io_err)?;
        self.read_line()?
            .ok_or_else(|| PolicyError::Exhausted("input closed".into()))
    }

    /// Prints the last message and reads lines up to a blank line.
    fn complete(&mut self, messages: &[Message]) -> Result<String, PolicyError> {
        if let Some(last) = messages.last() {
            writeln!(self.output, "\n{}\n(finish with an empty line)", last.content)
                .map_err(Self::io_err)?;
        }
        let mut lines = Vec::new();
        while let Some(line) = self.read_line()? {
            if line.trim().is_empty() {
                break;
            }
            lines.push(line);
        }
        if lines.is_empty() {
            return Err(PolicyError::Exhausted("no text entered".into()));
        }
        Ok(lines.join("\n"))
    }
}
