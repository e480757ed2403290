mod common;

use common::*;
use cookworld::engine::Status;
use cookworld::policy::{serialize_messages, ExpertPolicy, ScriptedPolicy};
use cookworld::tips::{
    aggregate_tips, build_reflection_prompt, builtin_human, extract_tips, load_tips, render_tips,
    run_trials, LearningMode, Provenance, TipScenario, TipSet, TipsError, TrialOptions, REPLAY_CAP,
};
use proptest::prelude::*;

#[test]
fn four_potato_trials() {
    let spec = potato_game();
    let mut policy = ScriptedPolicy::new(four_trial_script());
    let run = run_trials(&spec, &mut policy, LearningMode::SelfHistory, TrialOptions::default());
    assert!(run.error.is_none(), "{:?}", run.error);
    assert_eq!(policy.remaining(), 0);
    assert_eq!(run.records.len(), 4);
    let wins: Vec<bool> = run.records.iter().map(|r| r.result.success).collect();
    assert_eq!(wins, [false, false, false, true]);
    assert_eq!(run.solved_at(), Some(4));

    let fried = |k: usize| run.records[k].trajectory.turns.last().unwrap().feedback.clone();
    for k in 0..3 {
        assert_eq!(fried(k), "You fried the purple potato.");
        assert_eq!(run.records[k].trajectory.status, Status::Lost);
        let tips = run.records[k].tips_out.as_ref().unwrap();
        assert_eq!(tips.texts().collect::<Vec<_>>(), [TRIAL_TIPS[k]]);
        assert_eq!(tips.provenance.trial_index, Some(k as u32 + 1));
    }
    assert_eq!(run.records[1].trajectory.turns[5].feedback, "Invalid action.");
    assert!(run.records[3].trajectory.turns[5]
        .feedback
        .starts_with("You roasted the purple potato.\nYour score has just gone up by one point."));

    assert!(run.records[0].tips_in.is_none());
    for k in 1..4 {
        assert_eq!(run.records[k].tips_in, run.records[k - 1].tips_out);
    }
    let last = &run.records[3];
    assert!(last.is_final);
    assert!(last.tips_out.is_none());
    assert_eq!(run.final_tips, run.records[2].tips_out);

    for record in &run.records {
        let prompt = serialize_messages(&record.opening_prompt);
        for tip in record.tips_in.iter().flat_map(|t| t.texts()) {
            assert!(prompt.contains(tip), "trial {} prompt lacks {tip:?}", record.trial_index);
        }
    }
}

#[test]
fn reflection_prompts_carry_actions_not_transcripts() {
    let spec = potato_game();
    let mut policy = ScriptedPolicy::new(four_trial_script());
    let run = run_trials(&spec, &mut policy, LearningMode::SelfHistory, TrialOptions::default());
    let failed = &run.records[..3];
    let obs = &run.records[0].trajectory.observation;

    let first = build_reflection_prompt(TipScenario::SelfHistory, obs, &failed[..1], None).unwrap();
    assert_eq!(first.failed_actions.len(), 1);
    assert!(first.tips.is_none());
    assert!(first.request.as_deref().unwrap().contains("numbered"));

    let third = build_reflection_prompt(TipScenario::SelfHistory, obs, failed, None).unwrap();
    assert_eq!(third.failed_actions.len(), 3);
    assert_eq!(third.tips, failed[2].tips_in);
    assert!(third.request.as_deref().unwrap().contains("more effective tips"));
    let text = third.serialize();
    for r in failed {
        for a in r.trajectory.actions() {
            assert!(text.contains(&a));
        }
    }
    assert!(!text.contains("You fried the purple potato."));
    assert!(!text.contains("You take the knife."));

    // Growth comes from action lists and tips; the transcript stays at the
    // opening observation and is far smaller than replaying the trials.
    assert_eq!(third.transcript, first.transcript);
    let replayed: usize = failed[1..]
        .iter()
        .map(|r| r.trajectory.turns.iter().map(|t| t.action.len() + t.feedback.len()).sum::<usize>())
        .sum();
    let growth = text.len() - first.serialize().len();
    assert!(growth > 0);
    assert!(growth < replayed + render_tips(failed[2].tips_in.as_ref().unwrap()).len() + 200);

    let expert: Vec<String> = spec.walkthrough.iter().map(|a| a.to_string()).collect();
    let contrast =
        build_reflection_prompt(TipScenario::ExpertContrast, obs, &failed[..1], Some(&expert)).unwrap();
    assert_eq!(contrast.expert_walkthrough, expert);
    let text = contrast.serialize();
    let mut at = 0;
    for a in &expert {
        at += text[at..].find(a.as_str()).expect("expert action present in order");
    }
    assert!(contrast.request.unwrap().contains("Contrast"));
    assert!(matches!(
        build_reflection_prompt(TipScenario::ExpertContrast, obs, &failed[..1], None),
        Err(TipsError::ScenarioMismatch(_))
    ));
}

#[test]
fn expert_contrast_loop_learns_from_walkthrough() {
    let spec = potato_game();
    let mut script = PREP.map(String::from).to_vec();
    script.push("cook(purple potato, stove)".into());
    script.push("Tips to win the game next time:\n1. Use the oven to roast.".into());
    script.extend(spec.walkthrough.iter().map(|a| a.to_string()));
    let mut policy = ScriptedPolicy::new(script);
    let run = run_trials(&spec, &mut policy, LearningMode::ExpertContrast, TrialOptions::default());
    assert_eq!(run.solved_at(), Some(2));
    assert_eq!(run.final_tips.unwrap().provenance.scenario, TipScenario::ExpertContrast);
}

#[test]
fn pure_replay_pastes_at_most_three_trajectories() {
    let spec = potato_game();
    let fail: Vec<String> = PREP.iter().map(|s| s.to_string()).chain(["cook(purple potato, stove)".to_string()]).collect();
    let mut script = Vec::new();
    for _ in 0..5 {
        script.extend(fail.clone());
    }
    script.extend(spec.walkthrough.iter().map(|a| a.to_string()));
    let mut policy = ScriptedPolicy::new(script);
    let run = run_trials(&spec, &mut policy, LearningMode::PureReplay, TrialOptions::default());
    assert_eq!(run.records.len(), 6);
    assert_eq!(run.solved_at(), Some(6));
    assert!(run.records.iter().all(|r| r.tips_out.is_none() && r.tips_in.is_none()));
    let pasted = |k: usize| {
        serialize_messages(&run.records[k].opening_prompt)
            .matches("You fried the purple potato.")
            .count()
    };
    assert_eq!(pasted(0), 0);
    assert_eq!(pasted(1), 1);
    assert_eq!(pasted(5), REPLAY_CAP);
}

#[test]
fn backend_failure_keeps_partial_records() {
    let spec = potato_game();
    let mut script = four_trial_script();
    script.truncate(10);
    let mut policy = ScriptedPolicy::new(script);
    let run = run_trials(&spec, &mut policy, LearningMode::SelfHistory, TrialOptions::default());
    assert_eq!(run.records.len(), 2);
    assert!(run.records[1].result.policy_error.is_some());
    assert!(run.error.is_some());
}

#[test]
fn aggregation_of_final_tips() {
    let a = TipSet::from_texts(["Use the oven."], Provenance::trial(TipScenario::SelfHistory, "L4-S1", 3));
    let b = TipSet::from_texts(["Read the cookbook."], Provenance::trial(TipScenario::SelfHistory, "L4-S2", 2));
    let mut stub = ScriptedPolicy::new([GENERAL_REPLY]);
    let general = aggregate_tips(&[a.clone(), b], &mut stub).unwrap();
    assert_eq!(general.tips.len(), 8);
    assert_eq!(general.provenance.scenario, TipScenario::Aggregated);
    assert_eq!(general.provenance.sources, ["L4-S1", "L4-S2"]);

    let mut stub = ScriptedPolicy::new(["Tips to win the game next time:\n1. Use the oven."]);
    assert_eq!(aggregate_tips(&[a], &mut stub).unwrap().tips.len(), 1);

    let mut stub = ScriptedPolicy::new(["nothing useful"]);
    let one = TipSet::from_texts(["x"], Provenance::new(TipScenario::SelfHistory));
    assert!(matches!(aggregate_tips(&[one], &mut stub), Err(TipsError::NoTipsFound)));
    assert!(matches!(aggregate_tips(&[], &mut stub), Err(TipsError::NoInput)));
    let mut expert = ExpertPolicy::new(&potato_game());
    let one = TipSet::from_texts(["x"], Provenance::new(TipScenario::SelfHistory));
    assert!(matches!(aggregate_tips(&[one], &mut expert), Err(TipsError::Policy(_))));
}

#[test]
fn human_tips_load() {
    let human = load_tips("builtin:human").unwrap();
    assert_eq!(human, builtin_human());
    assert_eq!(human.tips.len(), 8);
    assert_eq!(human.provenance.scenario, TipScenario::Human);
    assert!(human.texts().any(|t| t.contains("Oven is for roasting")));
}

fn tip_text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.'()_-]{0,60}[A-Za-z.;)]"
}

proptest! {
    #[test]
    fn tips_survive_render_and_extract(texts in prop::collection::vec(tip_text(), 1..9)) {
        let texts: Vec<String> = texts.iter().map(|t| t.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
        let set = TipSet::from_texts(texts.clone(), Provenance::new(TipScenario::SelfHistory));
        let reply = format!("Some thoughts first.\n\nTips to win the game next time:\n{}\n", render_tips(&set));
        let back = extract_tips(&reply, Provenance::new(TipScenario::SelfHistory)).unwrap();
        prop_assert_eq!(&back, &set);
    }

    #[test]
    fn tips_survive_the_store(texts in prop::collection::vec(tip_text(), 0..9), game in "L[0-4]-S[0-9]{1,4}") {
        let set = TipSet::from_texts(texts, Provenance::trial(TipScenario::ExpertContrast, &game, 2));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        set.save(&path).unwrap();
        prop_assert_eq!(TipSet::load(&path).unwrap(), set);
    }
}
