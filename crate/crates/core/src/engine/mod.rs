//! Game state transitions, feedback text, scoring and win/loss detection.

mod episode;
pub mod text;

pub use episode::{
    replay, run_episode, run_episode_with, EpisodeOutcome, EpisodeResult, ReplayError,
    ReplayMismatch, Trajectory, TrajectoryError, TurnRecord,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{
    CookState, CutState, Direction, EntityId, EntityKind, GameSpec, Location, RoomId, ScoredStep,
};
use crate::parser::{first_command_line, parse, Action, ActionForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Won,
    Lost,
}

/// Mutable episode state. Per-entity vectors are indexed like
/// [`GameSpec::entities`]; `open` only matters for containers and
/// `cut`/`cook` only for food.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub player_room: RoomId,
    pub locations: Vec<Location>,
    pub open: Vec<bool>,
    pub door_open: Vec<bool>,
    pub cut: Vec<CutState>,
    pub cook: Vec<CookState>,
    pub recipe_revealed: bool,
    pub scored_steps: BTreeSet<ScoredStep>,
    pub score: u32,
    pub turn: u32,
    pub status: Status,
    pub meal_prepared: bool,
}

impl WorldState {
    /// Carried entities in entity order.
    pub fn inventory(&self) -> Vec<EntityId> {
        (0..self.locations.len())
            .filter(|&i| self.locations[i] == Location::Inventory)
            .collect()
    }

    /// Whether the player can currently touch the entity: carried, or in the
    /// current room and not shut inside a closed container.
    pub fn reachable(&self, entity: EntityId) -> bool {
        let mut cur = entity;
        for _ in 0..=self.locations.len() {
            match self.locations[cur] {
                Location::Inventory => return true,
                Location::Room(r) => return r == self.player_room,
                Location::On(h) => cur = h,
                Location::In(h) => {
                    if !self.open[h] {
                        return false;
                    }
                    cur = h;
                }
                Location::Nowhere => return false,
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub text: String,
    pub score_delta: u32,
    pub status_after: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("episode already ended ({0:?})")]
    GameOver(Status),
}

/// Initial state and the description of the starting room.
pub fn new_episode(spec: &GameSpec) -> (WorldState, String) {
    let n = spec.entities.len();
    let state = WorldState {
        player_room: spec.map.start,
        locations: spec.entities.iter().map(|e| e.location).collect(),
        open: spec.entities.iter().map(|e| e.open).collect(),
        door_open: vec![false; spec.map.doors.len()],
        cut: vec![CutState::Uncut; n],
        cook: vec![CookState::Raw; n],
        recipe_revealed: false,
        scored_steps: BTreeSet::new(),
        score: 0,
        turn: 0,
        status: Status::Running,
        meal_prepared: false,
    };
    let observation = text::room_description(spec, &state, state.player_room);
    (state, observation)
}

/// One turn. Refused actions still consume the turn.
pub fn step(
    spec: &GameSpec,
    state: &WorldState,
    action: &Action,
) -> Result<(WorldState, Feedback), EngineError> {
    if state.status != Status::Running {
        return Err(EngineError::GameOver(state.status));
    }
    let mut turn = Turn { spec, st: state.clone(), delta: 0 };
    let message = turn.apply(action);
    Ok(turn.finish(message))
}

/// One turn from raw policy text. Only the first non-empty line is parsed;
/// anything outside the grammar yields [`text::INVALID_ACTION`].
pub fn step_text(
    spec: &GameSpec,
    state: &WorldState,
    reply: &str,
) -> Result<(WorldState, Feedback), EngineError> {
    if state.status != Status::Running {
        return Err(EngineError::GameOver(state.status));
    }
    match parse(first_command_line(reply).command) {
        Ok(action) => step(spec, state, &action),
        Err(_) => {
            let turn = Turn { spec, st: state.clone(), delta: 0 };
            Ok(turn.finish(text::INVALID_ACTION.to_string()))
        }
    }
}

struct Turn<'a> {
    spec: &'a GameSpec,
    st: WorldState,
    delta: u32,
}

impl Turn<'_> {
    fn finish(mut self, mut message: String) -> (WorldState, Feedback) {
        if self.delta > 0 {
            message.push('\n');
            message.push_str(text::SCORE_UP);
        }
        self.st.turn += 1;
        if self.st.status == Status::Running && self.irrecoverable() {
            self.st.status = Status::Lost;
        }
        if self.st.status == Status::Running && self.st.turn >= self.spec.max_turns {
            self.st.status = Status::Lost;
        }
        let feedback = Feedback {
            text: message,
            score_delta: self.delta,
            status_after: self.st.status,
        };
        (self.st, feedback)
    }

    /// A required ingredient can no longer end up in the meal.
    fn irrecoverable(&self) -> bool {
        if self.st.meal_prepared {
            return false;
        }
        self.spec.recipe.ingredients.iter().any(|item| {
            let e = item.entity;
            self.st.locations[e] == Location::Nowhere
                || (self.st.cut[e] != CutState::Uncut && self.st.cut[e] != item.target_cut())
                || (self.st.cook[e] != CookState::Raw && self.st.cook[e] != item.target_cook())
        })
    }

    fn award(&mut self, step: ScoredStep) {
        if self.st.scored_steps.insert(step) {
            self.st.score += 1;
            self.delta += 1;
        }
    }

    fn name(&self, e: EntityId) -> &str {
        &self.spec.entities[e].name
    }

    fn resolve(&self, name: &str) -> Option<EntityId> {
        self.spec
            .entities
            .iter()
            .enumerate()
            .find(|(i, e)| e.name.eq_ignore_ascii_case(name.trim()) && self.st.reachable(*i))
            .map(|(i, _)| i)
    }

    fn resolve_door(&self, name: &str) -> Option<usize> {
        self.spec.map.rooms[self.st.player_room]
            .exits
            .values()
            .filter_map(|x| x.door)
            .find(|&d| self.spec.map.doors[d].name.eq_ignore_ascii_case(name.trim()))
    }

    fn carried(&self, e: EntityId) -> bool {
        self.st.locations[e] == Location::Inventory
    }

    /// Resolves an entity the player must be holding.
    fn held(&self, name: &str) -> Result<EntityId, String> {
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        if self.carried(e) {
            Ok(e)
        } else {
            Err(format!("You need to take the {} first.", self.name(e)))
        }
    }

    fn apply(&mut self, action: &Action) -> String {
        let result = match action.form() {
            ActionForm::Look => Ok(text::room_description(self.spec, &self.st, self.st.player_room)),
            ActionForm::Goal => Ok(text::GOAL.to_string()),
            ActionForm::Inventory => Ok(text::inventory(self.spec, &self.st)),
            ActionForm::Go => self.go(action.arg(0)),
            ActionForm::Examine => self.examine(action.arg(0)),
            ActionForm::Eat => self.eat(action.arg(0)),
            ActionForm::Open => self.set_open(action.arg(0), true),
            ActionForm::Close => self.set_open(action.arg(0), false),
            ActionForm::Drop => self.drop(action.arg(0)),
            ActionForm::Take => self.take(action.arg(0)),
            ActionForm::TakeFrom => self.take_from(action.arg(0), action.arg(1)),
            ActionForm::Put => self.place(action.arg(0), action.arg(1), false),
            ActionForm::Insert => self.place(action.arg(0), action.arg(1), true),
            ActionForm::Lock | ActionForm::Unlock => self.lock(action.arg(0), action.arg(1)),
            ActionForm::Cook => self.cook(action.arg(0), action.arg(1)),
            ActionForm::Slice => self.cut(action.arg(0), action.arg(1), CutState::Sliced),
            ActionForm::Chop => self.cut(action.arg(0), action.arg(1), CutState::Chopped),
            ActionForm::Dice => self.cut(action.arg(0), action.arg(1), CutState::Diced),
            ActionForm::PrepareMeal => self.prepare_meal(),
        };
        result.unwrap_or_else(|refusal| refusal)
    }

    fn go(&mut self, dir: &str) -> Result<String, String> {
        let Some(dir) = Direction::from_name(dir) else {
            return Err("You can't go that way.".into());
        };
        let exit = self.spec.map.rooms[self.st.player_room]
            .exits
            .get(&dir)
            .ok_or_else(|| text::cannot_go(dir))?;
        if let Some(d) = exit.door {
            if !self.st.door_open[d] {
                return Err(format!("You have to open the {} first.", self.spec.map.doors[d].name));
            }
        }
        self.st.player_room = exit.to;
        Ok(text::room_description(self.spec, &self.st, exit.to))
    }

    fn examine(&mut self, name: &str) -> Result<String, String> {
        if let Some(d) = self.resolve_door(name) {
            let state = if self.st.door_open[d] { "open" } else { "closed" };
            return Ok(format!("The {} is {state}.", self.spec.map.doors[d].name));
        }
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        if self.spec.entities[e].kind == EntityKind::Cookbook {
            self.st.recipe_revealed = true;
            return Ok(text::recipe(self.spec));
        }
        Ok(text::describe_entity(self.spec, &self.st, e))
    }

    fn eat(&mut self, name: &str) -> Result<String, String> {
        let e = self.held(name)?;
        let kind = self.spec.entities[e].kind;
        if !kind.edible() {
            return Err("That's not edible.".into());
        }
        let food = text::noun(self.spec, &self.st, e);
        self.st.locations[e] = Location::Nowhere;
        if kind == EntityKind::Meal {
            self.award(ScoredStep::EatMeal);
            self.st.status = Status::Won;
        }
        Ok(format!("You eat the {food}. Not bad."))
    }

    fn set_open(&mut self, name: &str, open: bool) -> Result<String, String> {
        let verb = if open { "open" } else { "close" };
        if let Some(d) = self.resolve_door(name) {
            if self.st.door_open[d] == open {
                return Err(format!("That is already {}.", if open { "open" } else { "closed" }));
            }
            self.st.door_open[d] = open;
            return Ok(format!("You {verb} the {}.", self.spec.map.doors[d].name));
        }
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        if !self.spec.entities[e].kind.is_container() {
            return Err(format!("You can't {verb} that."));
        }
        if self.st.open[e] == open {
            return Err(format!("That is already {}.", if open { "open" } else { "closed" }));
        }
        self.st.open[e] = open;
        let name = self.name(e).to_string();
        if open {
            let inside: Vec<String> = (0..self.spec.entities.len())
                .filter(|&i| self.st.locations[i] == Location::In(e))
                .map(|i| text::with_article(&text::noun(self.spec, &self.st, i)))
                .collect();
            if !inside.is_empty() {
                return Ok(format!("You open the {name}, revealing {}.", text::join_list(&inside)));
            }
        }
        Ok(format!("You {verb} the {name}."))
    }

    fn drop(&mut self, name: &str) -> Result<String, String> {
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        if !self.carried(e) {
            return Err(text::NOT_CARRIED.into());
        }
        self.st.locations[e] = Location::Room(self.st.player_room);
        Ok(format!("You drop the {} on the floor.", text::noun(self.spec, &self.st, e)))
    }

    fn pick_up(&mut self, e: EntityId) -> Result<(), String> {
        if self.carried(e) {
            return Err("You already have that.".into());
        }
        if !self.spec.entities[e].kind.portable() {
            return Err("You can't take that.".into());
        }
        self.st.locations[e] = Location::Inventory;
        if let Some(idx) = self.spec.recipe_index(e) {
            self.award(ScoredStep::Take(idx));
        }
        Ok(())
    }

    fn take(&mut self, name: &str) -> Result<String, String> {
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        self.pick_up(e)?;
        Ok(format!("You take the {}.", text::noun(self.spec, &self.st, e)))
    }

    fn take_from(&mut self, name: &str, holder: &str) -> Result<String, String> {
        let h = self.resolve(holder).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        let kind = self.spec.entities[h].kind;
        if !kind.is_container() && !kind.is_supporter() {
            return Err("You can't take things from that.".into());
        }
        if kind.is_container() && !self.st.open[h] {
            return Err(format!("You have to open the {} first.", self.name(h)));
        }
        let e = self
            .resolve(name)
            .filter(|&e| matches!(self.st.locations[e], Location::In(x) | Location::On(x) if x == h))
            .ok_or_else(|| format!("There is no {} there.", name.trim()))?;
        self.pick_up(e)?;
        Ok(format!(
            "You take the {} from the {}.",
            text::noun(self.spec, &self.st, e),
            self.name(h)
        ))
    }

    fn place(&mut self, name: &str, target: &str, into: bool) -> Result<String, String> {
        let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        if !self.carried(e) {
            return Err(text::NOT_CARRIED.into());
        }
        let t = self.resolve(target).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        let kind = self.spec.entities[t].kind;
        if into {
            if !kind.is_container() {
                return Err("You can't put things into that.".into());
            }
            if !self.st.open[t] {
                return Err(format!("You have to open the {} first.", self.name(t)));
            }
            self.st.locations[e] = Location::In(t);
        } else {
            if !kind.is_supporter() {
                return Err("You can't put things on that.".into());
            }
            self.st.locations[e] = Location::On(t);
        }
        Ok(format!(
            "You put the {} {} the {}.",
            text::noun(self.spec, &self.st, e),
            if into { "into" } else { "on" },
            self.name(t)
        ))
    }

    fn lock(&mut self, name: &str, key: &str) -> Result<String, String> {
        let target = match self.resolve_door(name) {
            Some(d) => self.spec.map.doors[d].name.clone(),
            None => {
                let e = self.resolve(name).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
                self.name(e).to_string()
            }
        };
        self.held(key)?;
        Err(format!("The {target} has no lock."))
    }

    fn cook(&mut self, food: &str, source: &str) -> Result<String, String> {
        let f = self.held(food)?;
        let h = self.resolve(source).ok_or_else(|| text::NOT_VISIBLE.to_string())?;
        let Some(heat) = self.spec.entities[h].kind.heat() else {
            return Err(format!("You can't cook with the {}.", self.name(h)));
        };
        if self.spec.entities[f].kind != EntityKind::Ingredient {
            return Err("You can't cook that.".into());
        }
        let next = self.st.cook[f].heated_by(heat);
        self.st.cook[f] = next;
        if let Some(idx) = self.spec.recipe_index(f) {
            let item = &self.spec.recipe.ingredients[idx];
            if item.cook.is_some() && next == item.target_cook() {
                self.award(ScoredStep::Cook(idx));
            }
        }
        let verb = match next {
            CookState::Fried => "fried",
            CookState::Roasted => "roasted",
            _ => "burned",
        };
        Ok(format!("You {verb} the {}.", self.name(f)))
    }

    fn cut(&mut self, food: &str, tool: &str, how: CutState) -> Result<String, String> {
        let f = self.held(food)?;
        let k = self.held(tool)?;
        if self.spec.entities[k].kind != EntityKind::SharpTool {
            return Err(format!("You can't cut with the {}.", self.name(k)));
        }
        if self.spec.entities[f].kind != EntityKind::Ingredient {
            return Err("You can't cut that.".into());
        }
        if !self.st.cut[f].can_become(how) {
            let already = self.st.cut[f].adjective().unwrap_or("cut");
            return Err(format!("The {} is already {already}.", self.name(f)));
        }
        self.st.cut[f] = how;
        if let Some(idx) = self.spec.recipe_index(f) {
            if self.spec.recipe.ingredients[idx].cut == Some(how) {
                self.award(ScoredStep::Cut(idx));
            }
        }
        let verb = match how {
            CutState::Sliced => "slice",
            CutState::Chopped => "chop",
            _ => "dice",
        };
        Ok(format!("You {verb} the {}.", self.name(f)))
    }

    fn prepare_meal(&mut self) -> Result<String, String> {
        if self.st.player_room != self.spec.map.kitchen {
            return Err("You can only prepare the meal in the kitchen.".into());
        }
        if self.st.meal_prepared {
            return Err("You have already prepared the meal.".into());
        }
        if !self.st.recipe_revealed {
            return Err("You don't know the recipe yet. Read the cookbook first.".into());
        }
        for item in &self.spec.recipe.ingredients {
            let e = item.entity;
            if !self.carried(e) {
                return Err(format!("You still need the {}.", item.name));
            }
            if self.st.cut[e] != item.target_cut() || self.st.cook[e] != item.target_cook() {
                return Err(format!("The {} is not prepared as the recipe directs.", item.name));
            }
        }
        for item in &self.spec.recipe.ingredients {
            self.st.locations[item.entity] = Location::Nowhere;
        }
        let meal = self.spec.meal().expect("spec has a meal");
        self.st.locations[meal] = Location::Inventory;
        self.st.meal_prepared = true;
        self.award(ScoredStep::PrepareMeal);
        Ok("Adding the meal to your inventory.".into())
    }
}
