//! Seeded level generation and the expert walkthrough.
//!
//! Multi-room maps are uniform spanning trees over a small grid (Wilson's
//! algorithm), labelled from the bundled vocabulary. The kitchen always holds
//! the fridge, oven, stove, counter, cookbook and knife; the first recipe
//! ingredient always starts in the closed fridge.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::Deserialize;

use crate::model::{
    level_stats, CookState, CutState, Direction, Door, Entity, EntityKind, Exit, GameSpec, Heat,
    Location, Recipe, RecipeItem, Room, RoomId, RoomMap, SPEC_FORMAT,
};
use crate::parser::{Action, ActionForm};
use crate::rng::{DetRng, RNG_ALGORITHM};

#[derive(Debug, Deserialize)]
struct Vocabulary {
    ingredients: Vec<String>,
    rooms: Vec<RoomKind>,
    doors: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RoomKind {
    name: String,
    furniture: String,
    container: bool,
}

fn vocabulary() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| {
        serde_json::from_str(include_str!("../data/vocabulary.json")).expect("bundled vocabulary")
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub level: u8,
    pub seed: u64,
    pub rng_algorithm: String,
}

impl GeneratorConfig {
    pub fn new(level: u8, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            level,
            seed,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("level {0} out of range (expected 0-4)")]
    LevelOutOfRange(u8),
    #[error("unsupported rng algorithm {0:?}")]
    UnknownRng(String),
}

// Fixed kitchen layout.
const FRIDGE: usize = 0;
const COUNTER: usize = 3;

pub fn generate(config: &GeneratorConfig) -> Result<GameSpec, GenerateError> {
    let stats = level_stats(config.level).ok_or(GenerateError::LevelOutOfRange(config.level))?;
    if config.rng_algorithm != RNG_ALGORITHM {
        return Err(GenerateError::UnknownRng(config.rng_algorithm.clone()));
    }
    let vocab = vocabulary();
    let mut rng = DetRng::new(config.seed, config.level as u64);

    let (rows, cols) = match stats.locations {
        1 => (1, 1),
        6 => (2, 3),
        9 => (3, 3),
        n => unreachable!("no grid layout for {n} rooms"),
    };
    let edges = spanning_tree(rows, cols, &mut rng);
    let n_rooms = rows * cols;
    let kitchen = rng.below(n_rooms);
    let mut kinds = vocab.rooms.clone();
    rng.shuffle(&mut kinds);
    let mut kinds = kinds.into_iter();
    let room_kinds: Vec<Option<RoomKind>> = (0..n_rooms)
        .map(|r| if r == kitchen { None } else { kinds.next() })
        .collect();

    let mut rooms: Vec<Room> = room_kinds
        .iter()
        .map(|k| Room {
            name: k.as_ref().map_or("kitchen".to_string(), |k| k.name.clone()),
            exits: BTreeMap::new(),
        })
        .collect();
    let mut door_names = vocab.doors.clone();
    rng.shuffle(&mut door_names);
    let mut door_names = door_names.into_iter();
    let mut doors = Vec::new();
    for &(a, dir, b) in &edges {
        let door = if rng.chance(1, 2) {
            doors.push(Door { name: door_names.next().expect("enough door names") });
            Some(doors.len() - 1)
        } else {
            None
        };
        rooms[a].exits.insert(dir, Exit { to: b, door });
        rooms[b].exits.insert(dir.opposite(), Exit { to: a, door });
    }
    let start = if stats.locations == 1 {
        kitchen
    } else {
        let mut s = rng.below(n_rooms - 1);
        if s >= kitchen {
            s += 1;
        }
        s
    };

    let mut entities = vec![
        fixture("fridge", EntityKind::Container { heat: None }, kitchen),
        fixture("oven", EntityKind::Container { heat: Some(Heat::Roast) }, kitchen),
        fixture("stove", EntityKind::Supporter { heat: Some(Heat::Fry) }, kitchen),
        fixture("counter", EntityKind::Supporter { heat: None }, kitchen),
        portable("cookbook", EntityKind::Cookbook, Location::On(COUNTER)),
        portable("knife", EntityKind::SharpTool, Location::On(COUNTER)),
    ];
    let mut furniture: Vec<Option<usize>> = vec![None; n_rooms];
    for (room, kind) in room_kinds.iter().enumerate() {
        if let Some(kind) = kind {
            let ek = if kind.container {
                EntityKind::Container { heat: None }
            } else {
                EntityKind::Supporter { heat: None }
            };
            furniture[room] = Some(entities.len());
            entities.push(fixture(&kind.furniture, ek, room));
        }
    }

    let mut names = vocab.ingredients.clone();
    rng.shuffle(&mut names);
    let mut recipe = Recipe { ingredients: Vec::new() };
    for (i, name) in names.into_iter().take(stats.ingredients).enumerate() {
        let cut = stats.cut.then(|| *rng.pick(&CutState::CUTS));
        let cook = stats.cook.then(|| *rng.pick(&CookState::COOKS));
        let location = if i == 0 {
            Location::In(FRIDGE)
        } else {
            let room = rng.below(n_rooms);
            let holder = furniture[room].unwrap_or(if rng.chance(1, 2) { FRIDGE } else { COUNTER });
            if entities[holder].kind.is_container() {
                Location::In(holder)
            } else {
                Location::On(holder)
            }
        };
        recipe.ingredients.push(RecipeItem {
            name: name.clone(),
            entity: entities.len(),
            cut,
            cook,
        });
        entities.push(portable(&name, EntityKind::Ingredient, location));
    }
    entities.push(portable("meal", EntityKind::Meal, Location::Nowhere));

    let mut spec = GameSpec {
        format: SPEC_FORMAT.to_string(),
        rng_algorithm: config.rng_algorithm.clone(),
        level: config.level,
        seed: config.seed,
        map: RoomMap { rooms, doors, kitchen, start },
        entities,
        recipe,
        max_score: stats.points,
        max_turns: 0,
        walkthrough: Vec::new(),
    };
    spec.walkthrough = walkthrough(&spec);
    spec.max_turns = (5 * spec.walkthrough.len() as u32).max(30);
    debug_assert!(spec.validate().is_ok(), "{:?}", spec.validate());
    Ok(spec)
}

/// `count` games with seeds `seed_base + i`.
pub fn generate_suite(level: u8, count: usize, seed_base: u64) -> Result<Vec<GameSpec>, GenerateError> {
    (0..count as u64)
        .map(|i| generate(&GeneratorConfig::new(level, seed_base + i)))
        .collect()
}

fn fixture(name: &str, kind: EntityKind, room: RoomId) -> Entity {
    Entity { name: name.to_string(), kind, location: Location::Room(room), open: false }
}

fn portable(name: &str, kind: EntityKind, location: Location) -> Entity {
    Entity { name: name.to_string(), kind, location, open: false }
}

/// Uniform spanning tree over a `rows x cols` grid via loop-erased random
/// walks. Edges come back as `(cell, direction, neighbour)`.
fn spanning_tree(rows: usize, cols: usize, rng: &mut DetRng) -> Vec<(usize, Direction, usize)> {
    let n = rows * cols;
    let neighbour = |cell: usize, dir: Direction| -> Option<usize> {
        let (r, c) = (cell / cols, cell % cols);
        match dir {
            Direction::North if r > 0 => Some(cell - cols),
            Direction::South if r + 1 < rows => Some(cell + cols),
            Direction::West if c > 0 => Some(cell - 1),
            Direction::East if c + 1 < cols => Some(cell + 1),
            _ => None,
        }
    };
    let mut in_tree = vec![false; n];
    let mut next: Vec<Option<(Direction, usize)>> = vec![None; n];
    in_tree[rng.below(n)] = true;
    let mut edges = Vec::new();
    for start in 0..n {
        let mut cell = start;
        while !in_tree[cell] {
            let options: Vec<(Direction, usize)> = Direction::ALL
                .into_iter()
                .filter_map(|d| neighbour(cell, d).map(|nb| (d, nb)))
                .collect();
            let step = *rng.pick(&options);
            next[cell] = Some(step);
            cell = step.1;
        }
        let mut cell = start;
        while !in_tree[cell] {
            in_tree[cell] = true;
            let (dir, nb) = next[cell].expect("walk recorded");
            edges.push((cell, dir, nb));
            cell = nb;
        }
    }
    edges
}

fn cut_form(cut: CutState) -> ActionForm {
    match cut {
        CutState::Sliced => ActionForm::Slice,
        CutState::Diced => ActionForm::Dice,
        CutState::Chopped => ActionForm::Chop,
        CutState::Uncut => unreachable!("recipes never ask for uncut"),
    }
}

fn permutations(items: &[RoomId]) -> Vec<Vec<RoomId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Winning action sequence: fetch every ingredient outside the kitchen along
/// the cheapest visiting order, then read the cookbook, gather, cut, cook,
/// prepare and eat in the kitchen.
pub fn walkthrough(spec: &GameSpec) -> Vec<Action> {
    let map = &spec.map;
    let items = &spec.recipe.ingredients;
    let item_room: Vec<RoomId> = items
        .iter()
        .map(|i| spec.room_of(i.entity).expect("ingredient placed"))
        .collect();
    let away: Vec<RoomId> = item_room
        .iter()
        .copied()
        .filter(|&r| r != map.kitchen)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Cost of a visiting order: moves plus doors opened on the way.
    let tour_cost = |order: &[RoomId]| -> usize {
        let mut opened = BTreeSet::new();
        let mut moves = 0;
        let mut at = map.start;
        for &target in order.iter().chain(std::iter::once(&map.kitchen)) {
            for dir in map.route(at, target).expect("connected map") {
                let exit = &map.rooms[at].exits[&dir];
                if let Some(d) = exit.door {
                    opened.insert(d);
                }
                moves += 1;
                at = exit.to;
            }
        }
        moves + opened.len()
    };
    let order = permutations(&away)
        .into_iter()
        .min_by_key(|p| tour_cost(p))
        .unwrap_or_default();

    let mut actions = Vec::new();
    let mut doors_open: BTreeSet<usize> = BTreeSet::new();
    let mut containers_open: BTreeSet<usize> = spec
        .entities
        .iter()
        .enumerate()
        .filter(|(_, e)| e.open)
        .map(|(i, _)| i)
        .collect();
    let mut at = map.start;

    let collect = |room: RoomId, actions: &mut Vec<Action>, containers_open: &mut BTreeSet<usize>| {
        for (idx, item) in items.iter().enumerate() {
            if item_room[idx] != room {
                continue;
            }
            if let Location::In(holder) = spec.entities[item.entity].location {
                if containers_open.insert(holder) {
                    actions.push(Action::of(ActionForm::Open, &[&spec.entities[holder].name]));
                }
            }
            actions.push(Action::of(ActionForm::Take, &[&item.name]));
        }
    };

    for &target in order.iter().chain(std::iter::once(&map.kitchen)) {
        for dir in map.route(at, target).expect("connected map") {
            let exit = &map.rooms[at].exits[&dir];
            if let Some(d) = exit.door {
                if doors_open.insert(d) {
                    actions.push(Action::of(ActionForm::Open, &[&map.doors[d].name]));
                }
            }
            actions.push(Action::of(ActionForm::Go, &[dir.as_str()]));
            at = exit.to;
        }
        if target == map.kitchen {
            let cookbook = spec.entity_of_kind(|k| k == EntityKind::Cookbook).expect("cookbook");
            actions.push(Action::of(ActionForm::Examine, &[&spec.entities[cookbook].name]));
        }
        collect(target, &mut actions, &mut containers_open);
    }

    let knife = spec.entity_of_kind(|k| k == EntityKind::SharpTool).expect("knife");
    let knife = spec.entities[knife].name.as_str();
    if items.iter().any(|i| i.cut.is_some()) {
        actions.push(Action::of(ActionForm::Take, &[knife]));
    }
    for item in items {
        if let Some(cut) = item.cut {
            actions.push(Action::of(cut_form(cut), &[&item.name, knife]));
        }
        if let Some(cook) = item.cook {
            let heat = if cook == CookState::Fried { Heat::Fry } else { Heat::Roast };
            let source = spec
                .entities
                .iter()
                .enumerate()
                .find(|(i, e)| e.kind.heat() == Some(heat) && spec.room_of(*i) == Some(map.kitchen))
                .map(|(_, e)| e.name.as_str())
                .expect("kitchen heat source");
            actions.push(Action::of(ActionForm::Cook, &[&item.name, source]));
        }
    }
    actions.push(Action::of(ActionForm::PrepareMeal, &[]));
    actions.push(Action::of(ActionForm::Eat, &["meal"]));
    actions
}
