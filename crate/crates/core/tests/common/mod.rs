#![allow(dead_code)]

use std::collections::HashSet;

use cookworld::engine::{new_episode, step, Status, WorldState};
use cookworld::model::{CookState, CutState, Direction, GameSpec};
use cookworld::parser::{Action, ActionForm};
use cookworld::{generate, GeneratorConfig};

/// Level 2, seed 2: a single purple potato to dice and roast.
pub fn potato_game() -> GameSpec {
    let spec = generate(&GeneratorConfig::new(2, 2)).unwrap();
    let item = &spec.recipe.ingredients[0];
    assert_eq!(item.name, "purple potato");
    assert_eq!((item.cut, item.cook), (Some(CutState::Diced), Some(CookState::Roasted)));
    spec
}

pub const PREP: [&str; 5] = [
    "examine(cookbook)",
    "open(fridge)",
    "take(purple potato)",
    "take(knife)",
    "dice(purple potato, knife)",
];

/// The tips written after each of the three failed potato trials.
pub const TRIAL_TIPS: [&str; 3] = [
    "You should try roast the potato next time instead of cook purple potato with stove after dicing the purple potato;",
    "You should try  cook purple potato with stove  next time after you have dicing the purple potato, but make sure to use a different heat setting or method to avoid frying the purple potato;",
    "You should try cook purple potato with oven next time instead of cook purple potato with stove, as the recipe suggests roasting the purple potato rather than frying it;",
];

/// Replies for four potato trials: three fries (the second after an
/// off-grammar "roast the potato"), each followed by a reflection, then a
/// roast that wins.
pub fn four_trial_script() -> Vec<String> {
    let mut script: Vec<String> = Vec::new();
    for (trial, tip) in TRIAL_TIPS.iter().enumerate() {
        script.extend(PREP.iter().map(|s| s.to_string()));
        if trial == 1 {
            script.push("roast the potato".into());
        }
        script.push("cook(purple potato, stove)".into());
        script.push(format!("Tips to win the game next time:\n1. {tip}"));
    }
    script.extend(PREP.iter().map(|s| s.to_string()));
    script.extend(["cook(purple potato, oven)", "prepare_meal()", "eat(meal)"].map(String::from));
    script
}

/// General tips, one per line, as a summarizing model might return them.
pub const GENERAL_REPLY: &str = include_str!("../../data/tips_general.txt");

/// Every grammatical command whose arguments name something in the game.
/// Other names never resolve, so they cannot change the state.
pub fn command_space(spec: &GameSpec) -> Vec<Action> {
    let mut names: Vec<String> = spec.entities.iter().map(|e| e.name.clone()).collect();
    names.extend(spec.map.doors.iter().map(|d| d.name.clone()));
    names.extend(Direction::ALL.iter().map(|d| d.as_str().to_string()));
    let mut out = Vec::new();
    for form in ActionForm::ALL {
        match form.arity() {
            0 => out.push(Action::new(form, vec![]).unwrap()),
            1 => out.extend(names.iter().map(|a| Action::new(form, vec![a.clone()]).unwrap())),
            _ => {
                for a in &names {
                    for b in &names {
                        out.push(Action::new(form, vec![a.clone(), b.clone()]).unwrap());
                    }
                }
            }
        }
    }
    out
}

fn key(state: &WorldState) -> WorldState {
    let mut k = state.clone();
    k.turn = 0;
    k
}

/// Length of the shortest winning command sequence, searching no deeper
/// than `limit`.
pub fn shortest_win(spec: &GameSpec, limit: usize) -> Option<usize> {
    let actions = command_space(spec);
    let (start, _) = new_episode(spec);
    let mut seen = HashSet::from([key(&start)]);
    let mut frontier = vec![start];
    for depth in 1..=limit {
        let mut next = Vec::new();
        for state in &frontier {
            for action in &actions {
                let (after, _) = step(spec, state, action).unwrap();
                match after.status {
                    Status::Won => return Some(depth),
                    Status::Lost => continue,
                    Status::Running => {
                        if seen.insert(key(&after)) {
                            next.push(after);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    None
}
