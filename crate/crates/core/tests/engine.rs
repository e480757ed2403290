use cookworld::engine::{new_episode, replay, run_episode, step, ReplayError, Status, Trajectory};
use cookworld::model::{Direction, EntityKind, GameSpec, Location};
use cookworld::parser::{Action, ActionForm};
use cookworld::policy::{RandomValidPolicy, ScriptedPolicy};
use cookworld::{generate, ExpertPolicy, GeneratorConfig};
use proptest::prelude::*;

fn names(spec: &GameSpec) -> Vec<String> {
    let mut names: Vec<String> = spec.entities.iter().map(|e| e.name.clone()).collect();
    names.extend(spec.map.doors.iter().map(|d| d.name.clone()));
    names.extend(Direction::ALL.iter().map(|d| d.as_str().to_string()));
    names
}

/// Commands drawn from the game's own vocabulary, with the walkthrough mixed
/// in so that episodes get deep enough to matter.
fn commands(spec: &GameSpec, picks: &[(usize, usize, usize, bool)]) -> Vec<Action> {
    let names = names(spec);
    picks
        .iter()
        .enumerate()
        .map(|(i, &(f, a, b, expert))| {
            if expert && i < spec.walkthrough.len() {
                return spec.walkthrough[i].clone();
            }
            let form = ActionForm::ALL[f % ActionForm::ALL.len()];
            let args = [&names[a % names.len()], &names[b % names.len()]];
            Action::new(form, args[..form.arity()].iter().map(|s| s.to_string()).collect()).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn state_invariants_hold(
        level in 0u8..=4,
        seed in 0u64..1000,
        picks in prop::collection::vec((0usize..20, 0usize..64, 0usize..64, any::<bool>()), 1..80),
    ) {
        let spec = generate(&GeneratorConfig::new(level, seed)).unwrap();
        let (mut state, _) = new_episode(&spec);
        let meal = spec.meal().unwrap();
        for action in commands(&spec, &picks) {
            if state.status != Status::Running {
                prop_assert!(step(&spec, &state, &action).is_err());
                break;
            }
            let (next, fb) = step(&spec, &state, &action).unwrap();
            prop_assert_eq!(&step(&spec, &state, &action).unwrap(), &(next.clone(), fb.clone()));
            prop_assert_eq!(next.turn, state.turn + 1);
            prop_assert!(next.score >= state.score);
            prop_assert_eq!(next.score - state.score, fb.score_delta);
            prop_assert!(fb.score_delta <= 1);
            prop_assert!(next.score <= spec.max_score);
            prop_assert_eq!(next.score as usize, next.scored_steps.len());
            prop_assert_eq!(fb.status_after, next.status);
            prop_assert!(next.turn <= spec.max_turns);
            prop_assert_eq!(next.locations.len(), spec.entities.len());
            for (i, loc) in next.locations.iter().enumerate() {
                match *loc {
                    Location::In(h) => prop_assert!(spec.entities[h].kind.is_container() && h != i),
                    Location::On(h) => prop_assert!(spec.entities[h].kind.is_supporter() && h != i),
                    Location::Room(r) => prop_assert!(r < spec.map.rooms.len()),
                    Location::Inventory => prop_assert!(spec.entities[i].kind.portable()),
                    Location::Nowhere => prop_assert!(spec.entities[i].kind.edible()),
                }
                if !spec.entities[i].kind.portable() {
                    prop_assert_eq!(*loc, spec.entities[i].location);
                }
            }
            prop_assert_eq!(next.locations[meal] != Location::Nowhere, next.meal_prepared
                && next.status != Status::Won);
            if next.status == Status::Won {
                prop_assert_eq!(next.score, spec.max_score);
            }
            state = next;
        }
    }
}

#[test]
fn every_episode_terminates_by_the_turn_cap() {
    for level in 0..=4u8 {
        let spec = generate(&GeneratorConfig::new(level, 9)).unwrap();
        let out = run_episode(&spec, &mut RandomValidPolicy::new(&spec, 1));
        assert!(out.trajectory.turns.len() <= spec.max_turns as usize);
        assert_ne!(out.trajectory.status, Status::Running);
        assert!((0.0..=1.0).contains(&out.result.normalized));
    }
    let spec = generate(&GeneratorConfig::new(4, 9)).unwrap();
    let out = run_episode(&spec, &mut ScriptedPolicy::new(vec!["look()"; 500]));
    assert_eq!(out.trajectory.turns.len(), spec.max_turns as usize);
    assert!(!out.result.success);
}

#[test]
fn stored_trajectories_replay_bitwise() {
    for level in 0..=4u8 {
        for seed in 0..10 {
            let spec = generate(&GeneratorConfig::new(level, seed)).unwrap();
            for out in [
                run_episode(&spec, &mut ExpertPolicy::new(&spec)),
                run_episode(&spec, &mut RandomValidPolicy::new(&spec, seed)),
            ] {
                let stored = out.trajectory.to_jsonl();
                let loaded = Trajectory::from_jsonl(&stored).unwrap();
                assert_eq!(loaded, out.trajectory);
                replay(&loaded).unwrap();
                assert_eq!(loaded.to_jsonl(), stored);
            }
        }
    }
}

#[test]
fn tampered_feedback_is_caught() {
    let spec = generate(&GeneratorConfig::new(2, 2)).unwrap();
    let mut t = run_episode(&spec, &mut ExpertPolicy::new(&spec)).trajectory;
    assert_eq!(t.status, Status::Won);
    t.turns[5].feedback = t.turns[5].feedback.replace("roasted", "fried");
    match replay(&t) {
        Err(ReplayError::Mismatch(m)) => {
            assert_eq!((m.turn, m.field), (6, "feedback"));
        }
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn policy_failure_is_a_zero_point_loss() {
    let spec = generate(&GeneratorConfig::new(0, 0)).unwrap();
    let out = run_episode(&spec, &mut ScriptedPolicy::new(["examine(cookbook)", "open(fridge)"]));
    assert_eq!(out.trajectory.turns.len(), 2);
    assert_eq!(out.trajectory.status, Status::Lost);
    assert_eq!(out.result.points, 0);
    assert!(out.result.policy_error.unwrap().contains("exhausted"));
    let stored = Trajectory::from_jsonl(&out.trajectory.to_jsonl()).unwrap();
    replay(&stored).unwrap();
}

#[test]
fn extra_reply_lines_are_ignored() {
    let spec = generate(&GeneratorConfig::new(0, 0)).unwrap();
    let mut replies: Vec<String> = spec
        .walkthrough
        .iter()
        .map(|a| format!("\n  {a}\nbecause I want to win"))
        .collect();
    replies[0].insert_str(0, "   \n");
    let out = run_episode(&spec, &mut ScriptedPolicy::new(replies));
    assert!(out.result.success);
    assert_eq!(out.trajectory.turns[0].action, "examine(cookbook)");
}

#[test]
fn kitchen_fixtures_never_move() {
    let spec = generate(&GeneratorConfig::new(4, 0)).unwrap();
    for (i, e) in spec.entities.iter().enumerate() {
        if matches!(e.kind, EntityKind::Container { .. } | EntityKind::Supporter { .. }) {
            assert!(!e.kind.portable(), "{i}");
        }
    }
}
