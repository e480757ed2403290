//! Domain vocabulary for the cooking games: rooms, entities, ingredient
//! state machines, recipes and the scored steps derived from a recipe.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::Action;

pub type RoomId = usize;
pub type EntityId = usize;
pub type DoorId = usize;

/// Version tag written into every serialized [`GameSpec`].
pub const SPEC_FORMAT: &str = "cookworld-spec/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutState {
    Uncut,
    Sliced,
    Diced,
    Chopped,
}

impl CutState {
    pub const CUTS: [CutState; 3] = [CutState::Sliced, CutState::Diced, CutState::Chopped];

    pub fn adjective(self) -> Option<&'static str> {
        match self {
            CutState::Uncut => None,
            CutState::Sliced => Some("sliced"),
            CutState::Diced => Some("diced"),
            CutState::Chopped => Some("chopped"),
        }
    }

    /// Cut states are terminal once reached.
    pub fn can_become(self, next: CutState) -> bool {
        self == CutState::Uncut && next != CutState::Uncut
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CookState {
    Raw,
    Fried,
    Roasted,
    Burned,
}

impl CookState {
    pub const COOKS: [CookState; 2] = [CookState::Fried, CookState::Roasted];

    pub fn adjective(self) -> Option<&'static str> {
        match self {
            CookState::Raw => None,
            CookState::Fried => Some("fried"),
            CookState::Roasted => Some("roasted"),
            CookState::Burned => Some("burned"),
        }
    }

    /// Result of applying heat to food in this state.
    pub fn heated_by(self, heat: Heat) -> CookState {
        match self {
            CookState::Raw => heat.produces(),
            CookState::Fried | CookState::Roasted | CookState::Burned => CookState::Burned,
        }
    }
}

/// Kind of heat an appliance provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heat {
    /// Stove.
    Fry,
    /// Oven.
    Roast,
}

impl Heat {
    pub fn produces(self) -> CookState {
        match self {
            Heat::Fry => CookState::Fried,
            Heat::Roast => CookState::Roasted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
        }
    }

    pub fn from_name(name: &str) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exit {
    pub to: RoomId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door: Option<DoorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub exits: BTreeMap<Direction, Exit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Door {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomMap {
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub kitchen: RoomId,
    pub start: RoomId,
}

impl RoomMap {
    /// Breadth-first shortest route between two rooms, as the directions to
    /// walk. Exits are scanned in [`Direction::ALL`] order so the route is
    /// deterministic.
    pub fn route(&self, from: RoomId, to: RoomId) -> Option<Vec<Direction>> {
        let mut prev: Vec<Option<(RoomId, Direction)>> = vec![None; self.rooms.len()];
        let mut seen = vec![false; self.rooms.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(room) = queue.pop_front() {
            if room == to {
                let mut path = Vec::new();
                let mut cur = to;
                while let Some((p, d)) = prev[cur] {
                    path.push(d);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for (dir, exit) in &self.rooms[room].exits {
                if !seen[exit.to] {
                    seen[exit.to] = true;
                    prev[exit.to] = Some((room, *dir));
                    queue.push_back(exit.to);
                }
            }
        }
        None
    }

    pub fn is_connected(&self) -> bool {
        (0..self.rooms.len()).all(|r| self.route(self.start, r).is_some())
    }

    pub fn exits_symmetric(&self) -> bool {
        self.rooms.iter().enumerate().all(|(id, room)| {
            room.exits.iter().all(|(dir, exit)| {
                self.rooms
                    .get(exit.to)
                    .and_then(|other| other.exits.get(&dir.opposite()))
                    .is_some_and(|back| back.to == id && back.door == exit.door)
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Ingredient,
    Cookbook,
    /// Something sharp enough to cut food with.
    SharpTool,
    Container {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heat: Option<Heat>,
    },
    Supporter {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heat: Option<Heat>,
    },
    Meal,
}

impl EntityKind {
    pub fn portable(self) -> bool {
        matches!(
            self,
            EntityKind::Ingredient | EntityKind::Cookbook | EntityKind::SharpTool | EntityKind::Meal
        )
    }

    pub fn edible(self) -> bool {
        matches!(self, EntityKind::Ingredient | EntityKind::Meal)
    }

    pub fn heat(self) -> Option<Heat> {
        match self {
            EntityKind::Container { heat } | EntityKind::Supporter { heat } => heat,
            _ => None,
        }
    }

    pub fn is_container(self) -> bool {
        matches!(self, EntityKind::Container { .. })
    }

    pub fn is_supporter(self) -> bool {
        matches!(self, EntityKind::Supporter { .. })
    }
}

/// Where an entity is. Every entity has exactly one location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// On the floor of a room (fixtures also live here).
    Room(RoomId),
    In(EntityId),
    On(EntityId),
    Inventory,
    /// Not in the world: the meal before it is prepared, consumed food.
    Nowhere,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub kind: EntityKind,
    /// Initial location.
    pub location: Location,
    /// Initial open flag; only meaningful for containers.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeItem {
    pub name: String,
    /// Index of the ingredient in [`GameSpec::entities`].
    pub entity: EntityId,
    pub cut: Option<CutState>,
    pub cook: Option<CookState>,
}

impl RecipeItem {
    /// Cut state the meal needs; uncut when the recipe says nothing.
    pub fn target_cut(&self) -> CutState {
        self.cut.unwrap_or(CutState::Uncut)
    }

    pub fn target_cook(&self) -> CookState {
        self.cook.unwrap_or(CookState::Raw)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub ingredients: Vec<RecipeItem>,
}

/// A scored recipe step. Each is worth exactly one point and scores once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoredStep {
    /// Recipe ingredient (by recipe index) entered the inventory.
    Take(usize),
    Cut(usize),
    Cook(usize),
    PrepareMeal,
    EatMeal,
}

/// Scored steps of a recipe in canonical order: per ingredient take, cut,
/// cook, then prepare and eat the meal.
pub fn required_steps(recipe: &Recipe) -> Vec<ScoredStep> {
    let mut steps = Vec::new();
    for (i, item) in recipe.ingredients.iter().enumerate() {
        steps.push(ScoredStep::Take(i));
        if item.cut.is_some() {
            steps.push(ScoredStep::Cut(i));
        }
        if item.cook.is_some() {
            steps.push(ScoredStep::Cook(i));
        }
    }
    steps.push(ScoredStep::PrepareMeal);
    steps.push(ScoredStep::EatMeal);
    steps
}

/// Per-level game statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    pub ingredients: usize,
    pub locations: usize,
    pub points: u32,
    pub cook: bool,
    pub cut: bool,
    pub open: bool,
}

pub const LEVELS: [LevelStats; 5] = [
    LevelStats { ingredients: 1, locations: 1, points: 3, cook: false, cut: false, open: true },
    LevelStats { ingredients: 1, locations: 1, points: 4, cook: false, cut: true, open: true },
    LevelStats { ingredients: 1, locations: 1, points: 5, cook: true, cut: true, open: true },
    LevelStats { ingredients: 1, locations: 9, points: 3, cook: false, cut: false, open: true },
    LevelStats { ingredients: 3, locations: 6, points: 11, cook: true, cut: true, open: true },
];

pub fn level_stats(level: u8) -> Option<LevelStats> {
    LEVELS.get(level as usize).copied()
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("unsupported spec format {0:?}")]
    Format(String),
    #[error("invalid game spec: {0}")]
    Invalid(String),
    #[error("malformed spec JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Immutable description of one game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub format: String,
    pub rng_algorithm: String,
    pub level: u8,
    pub seed: u64,
    pub map: RoomMap,
    pub entities: Vec<Entity>,
    pub recipe: Recipe,
    pub max_score: u32,
    pub max_turns: u32,
    pub walkthrough: Vec<Action>,
}

impl GameSpec {
    /// Stable identifier used in file names and tip provenance.
    pub fn game_id(&self) -> String {
        format!("L{}-S{}", self.level, self.seed)
    }

    pub fn entity_named(&self, name: &str) -> Option<EntityId> {
        self.entities
            .iter()
            .position(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn entity_of_kind(&self, pred: impl Fn(EntityKind) -> bool) -> Option<EntityId> {
        self.entities.iter().position(|e| pred(e.kind))
    }

    pub fn meal(&self) -> Option<EntityId> {
        self.entity_of_kind(|k| k == EntityKind::Meal)
    }

    /// Recipe index of an ingredient entity.
    pub fn recipe_index(&self, entity: EntityId) -> Option<usize> {
        self.recipe.ingredients.iter().position(|i| i.entity == entity)
    }

    /// Room an entity initially sits in, following container/supporter links.
    pub fn room_of(&self, entity: EntityId) -> Option<RoomId> {
        let mut cur = entity;
        for _ in 0..=self.entities.len() {
            match self.entities[cur].location {
                Location::Room(r) => return Some(r),
                Location::In(p) | Location::On(p) => cur = p,
                Location::Inventory | Location::Nowhere => return None,
            }
        }
        None
    }

    /// Canonical JSON: fixed field order, pretty-printed, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<GameSpec, SpecError> {
        let spec: GameSpec = serde_json::from_str(text)?;
        if spec.format != SPEC_FORMAT {
            return Err(SpecError::Format(spec.format));
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Structural invariants of a spec loaded from disk or freshly generated.
    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        let Some(stats) = level_stats(self.level) else {
            return bad(format!("level {} out of range 0-4", self.level));
        };
        let map = &self.map;
        if map.rooms.len() != stats.locations {
            return bad(format!("{} rooms, level needs {}", map.rooms.len(), stats.locations));
        }
        if map.kitchen >= map.rooms.len() || map.start >= map.rooms.len() {
            return bad("kitchen or start room out of range".into());
        }
        for room in &map.rooms {
            for exit in room.exits.values() {
                if exit.to >= map.rooms.len() || exit.door.is_some_and(|d| d >= map.doors.len()) {
                    return bad(format!("dangling exit in {}", room.name));
                }
            }
        }
        if !map.exits_symmetric() {
            return bad("exits are not symmetric".into());
        }
        if !map.is_connected() {
            return bad("map is not connected".into());
        }
        let n = self.entities.len();
        for e in &self.entities {
            let ok = match e.location {
                Location::Room(r) => r < map.rooms.len(),
                Location::In(p) => p < n && self.entities[p].kind.is_container(),
                Location::On(p) => p < n && self.entities[p].kind.is_supporter(),
                Location::Inventory => true,
                Location::Nowhere => e.kind == EntityKind::Meal,
            };
            if !ok {
                return bad(format!("bad location for {}", e.name));
            }
        }
        let mut names = BTreeSet::new();
        for e in &self.entities {
            if !names.insert(e.name.to_ascii_lowercase()) {
                return bad(format!("duplicate entity name {}", e.name));
            }
        }
        for (i, e) in self.entities.iter().enumerate() {
            if self.room_of(i).is_none() && e.kind != EntityKind::Meal {
                return bad(format!("{} is not placed in any room", e.name));
            }
        }
        let kitchen_has = |pred: &dyn Fn(&Entity) -> bool| {
            self.entities
                .iter()
                .enumerate()
                .any(|(i, e)| pred(e) && self.room_of(i) == Some(map.kitchen))
        };
        let required: [(&str, &dyn Fn(&Entity) -> bool); 6] = [
            ("cookbook", &|e| e.kind == EntityKind::Cookbook),
            ("knife", &|e| e.kind == EntityKind::SharpTool),
            ("fridge", &|e| e.name == "fridge" && e.kind.is_container()),
            ("counter", &|e| e.name == "counter" && e.kind.is_supporter()),
            ("stove", &|e| e.kind.heat() == Some(Heat::Fry)),
            ("oven", &|e| e.kind.heat() == Some(Heat::Roast)),
        ];
        for (what, pred) in required {
            if !kitchen_has(pred) {
                return bad(format!("kitchen has no {what}"));
            }
        }
        if self.meal().is_none() {
            return bad("no meal entity".into());
        }
        if self.recipe.ingredients.len() != stats.ingredients {
            return bad(format!(
                "{} recipe ingredients, level needs {}",
                self.recipe.ingredients.len(),
                stats.ingredients
            ));
        }
        for item in &self.recipe.ingredients {
            let Some(e) = self.entities.get(item.entity) else {
                return bad(format!("recipe item {} has no entity", item.name));
            };
            if e.kind != EntityKind::Ingredient || e.name != item.name {
                return bad(format!("recipe item {} does not match its entity", item.name));
            }
            if matches!(item.cook, Some(CookState::Raw | CookState::Burned))
                || item.cut == Some(CutState::Uncut)
            {
                return bad(format!("recipe item {} has an impossible target", item.name));
            }
        }
        let points = required_steps(&self.recipe).len() as u32;
        if points != self.max_score {
            return bad(format!("max_score {} but recipe has {points} steps", self.max_score));
        }
        Ok(())
    }
}
