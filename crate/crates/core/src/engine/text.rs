//! Frozen feedback templates. Any wording change must bump
//! [`TEMPLATE_VERSION`]; golden transcripts depend on these bytes.

use crate::model::{CookState, CutState, Direction, EntityKind, GameSpec, Location, RoomId};

use super::WorldState;

pub const TEMPLATE_VERSION: &str = "feedback/1";

pub const INVALID_ACTION: &str = "Invalid action.";
pub const SCORE_UP: &str = "Your score has just gone up by one point.";
pub const NOT_VISIBLE: &str = "You can't see any such thing.";
pub const NOT_CARRIED: &str = "You are not carrying that.";
pub const GAME_OVER: &str = "The game is over.";

pub const GOAL: &str = "Welcome to the cooking game! Find the cookbook in the kitchen, read the \
recipe, gather and prepare the ingredients it lists, then prepare the meal and eat it.";

pub fn with_article(phrase: &str) -> String {
    let vowel = phrase
        .chars()
        .next()
        .is_some_and(|c| "aeiouAEIOU".contains(c));
    format!("{} {phrase}", if vowel { "an" } else { "a" })
}

/// Noun phrase with state adjectives for food, e.g. `diced roasted purple potato`.
pub fn noun(spec: &GameSpec, state: &WorldState, entity: usize) -> String {
    let e = &spec.entities[entity];
    if e.kind != EntityKind::Ingredient {
        return e.name.clone();
    }
    let mut parts: Vec<&str> = Vec::new();
    parts.extend(state.cut[entity].adjective());
    parts.extend(state.cook[entity].adjective());
    parts.push(&e.name);
    parts.join(" ")
}

pub fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn title(name: &str) -> String {
    name.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn contents(spec: &GameSpec, state: &WorldState, holder: usize) -> Vec<String> {
    (0..spec.entities.len())
        .filter(|&i| matches!(state.locations[i], Location::In(h) | Location::On(h) if h == holder))
        .map(|i| with_article(&noun(spec, state, i)))
        .collect()
}

pub fn room_description(spec: &GameSpec, state: &WorldState, room: RoomId) -> String {
    let r = &spec.map.rooms[room];
    let mut out = format!("-= {} =-\nYou are in the {}.", title(&r.name), r.name);
    let here: Vec<usize> = (0..spec.entities.len())
        .filter(|&i| state.locations[i] == Location::Room(room))
        .collect();

    let fixtures: Vec<String> = here
        .iter()
        .filter(|&&i| !spec.entities[i].kind.portable())
        .map(|&i| {
            let e = &spec.entities[i];
            if e.kind.is_container() && !state.open[i] {
                with_article(&format!("closed {}", e.name))
            } else {
                with_article(&e.name)
            }
        })
        .collect();
    if !fixtures.is_empty() {
        out.push_str(&format!(" You see {}.", join_list(&fixtures)));
    }
    for &i in &here {
        let e = &spec.entities[i];
        if e.kind.portable() || (e.kind.is_container() && !state.open[i]) {
            continue;
        }
        let items = contents(spec, state, i);
        if items.is_empty() {
            continue;
        }
        let prep = if e.kind.is_container() { "In" } else { "On" };
        out.push_str(&format!(" {prep} the {} you see {}.", e.name, join_list(&items)));
    }
    let loose: Vec<String> = here
        .iter()
        .filter(|&&i| spec.entities[i].kind.portable())
        .map(|&i| with_article(&noun(spec, state, i)))
        .collect();
    if !loose.is_empty() {
        out.push_str(&format!(" On the floor you see {}.", join_list(&loose)));
    }

    let exits: Vec<String> = r
        .exits
        .iter()
        .map(|(dir, exit)| match exit.door {
            Some(d) => {
                let adj = if state.door_open[d] { "open" } else { "closed" };
                format!(
                    "There is {} leading {dir}.",
                    with_article(&format!("{adj} {}", spec.map.doors[d].name))
                )
            }
            None => format!("There is an exit leading {dir}."),
        })
        .collect();
    if !exits.is_empty() {
        out.push('\n');
        out.push_str(&exits.join(" "));
    }
    out
}

pub fn inventory(spec: &GameSpec, state: &WorldState) -> String {
    let carried = state.inventory();
    if carried.is_empty() {
        return "You are carrying nothing.".into();
    }
    let lines: Vec<String> = carried
        .iter()
        .map(|&i| format!("  {}", with_article(&noun(spec, state, i))))
        .collect();
    format!("You are carrying:\n{}", lines.join("\n"))
}

pub fn recipe(spec: &GameSpec) -> String {
    let mut out = String::from(
        "You open the copy of \"Cooking: A Modern Approach (3rd Ed.)\" and start reading:\n\n\
         Recipe #1\n---------\n\
         Gather all following ingredients and follow the directions to prepare this tasty meal.\n\n\
         Ingredients:\n",
    );
    for item in &spec.recipe.ingredients {
        out.push_str(&format!("  {}\n", item.name));
    }
    out.push_str("\nDirections:\n");
    for item in &spec.recipe.ingredients {
        if let Some(cut) = item.cut {
            let verb = match cut {
                CutState::Sliced => "slice",
                CutState::Diced => "dice",
                CutState::Chopped => "chop",
                CutState::Uncut => unreachable!(),
            };
            out.push_str(&format!("  {verb} the {}\n", item.name));
        }
        if let Some(cook) = item.cook {
            let verb = match cook {
                CookState::Fried => "fry",
                CookState::Roasted => "roast",
                _ => unreachable!(),
            };
            out.push_str(&format!("  {verb} the {}\n", item.name));
        }
    }
    out.push_str("  prepare meal");
    out
}

pub fn describe_entity(spec: &GameSpec, state: &WorldState, entity: usize) -> String {
    let e = &spec.entities[entity];
    match e.kind {
        EntityKind::Ingredient => {
            let cut = state.cut[entity].adjective().unwrap_or("uncut");
            let cook = state.cook[entity].adjective().unwrap_or("raw");
            format!("The {} is {cut} and {cook}.", e.name)
        }
        EntityKind::SharpTool => format!("The {} is sharp enough to cut food with.", e.name),
        EntityKind::Meal => "A meal, ready to be eaten.".into(),
        EntityKind::Container { heat } => {
            let what = match heat {
                Some(_) => format!("The {} provides heat for roasting.", e.name),
                None => format!("The {} is a container.", e.name),
            };
            if !state.open[entity] {
                return format!("{what} It is closed.");
            }
            let items = contents(spec, state, entity);
            if items.is_empty() {
                format!("{what} It is open and empty.")
            } else {
                format!("{what} It is open. In it you see {}.", join_list(&items))
            }
        }
        EntityKind::Supporter { heat } => {
            let what = match heat {
                Some(_) => format!("The {} provides heat for frying.", e.name),
                None => format!("The {} is a solid surface.", e.name),
            };
            let items = contents(spec, state, entity);
            if items.is_empty() {
                format!("{what} There is nothing on it.")
            } else {
                format!("{what} On it you see {}.", join_list(&items))
            }
        }
        EntityKind::Cookbook => unreachable!("cookbook examination prints the recipe"),
    }
}

pub fn cannot_go(dir: Direction) -> String {
    format!("You can't go {dir}.")
}
