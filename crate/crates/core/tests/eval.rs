mod common;

use cookworld::eval::{evaluate_few_shot, evaluate_suite, few_shot_curve, run_trials_suite};
use cookworld::model::GameSpec;
use cookworld::policy::{
    BackendConfig, BackendFactory, BackendKind, ExpertPolicy, Policy, PolicyError, ScriptedPolicy,
};
use cookworld::tips::{builtin_human, LearningMode, TrialOptions};
use cookworld::generate_suite;

fn expert_factory() -> BackendFactory {
    BackendFactory::new(BackendConfig::new(BackendKind::Expert)).unwrap()
}

#[test]
fn expert_scores_everything() {
    for level in 0..=4u8 {
        let suite = generate_suite(level, 20, 100).unwrap();
        let report = evaluate_suite(&suite, &expert_factory(), None, 3);
        let l = report.level(level).unwrap();
        assert_eq!((l.normalized_points, l.success_rate, l.episodes, l.successes), (1.0, 1.0, 20, 20));
        assert_eq!(report.backend_failures, 0);
        assert_eq!(report.metadata.seeds, (100..120).collect::<Vec<u64>>());
    }
}

/// Reads the cookbook, takes the ingredient and prepares the meal but never
/// eats it: 2 of 3 points at level 0.
fn two_of_three(spec: &GameSpec) -> Result<Box<dyn Policy>, PolicyError> {
    let w: Vec<String> = spec.walkthrough.iter().map(|a| a.to_string()).collect();
    let mut script = w[..3].to_vec();
    script.extend(std::iter::repeat_n("look()".to_string(), spec.max_turns as usize));
    script[3] = "prepare_meal()".into();
    Ok(Box::new(ScriptedPolicy::new(script)))
}

#[test]
fn partial_policy_arithmetic() {
    let suite = generate_suite(0, 20, 0).unwrap();
    let report = evaluate_suite(&suite, &two_of_three, None, 1);
    let l = report.level(0).unwrap();
    assert!((l.normalized_points - 2.0 / 3.0).abs() < 1e-12, "{}", l.normalized_points);
    assert_eq!(l.success_rate, 0.0);
    assert!(report.episodes.iter().all(|e| e.points == 2 && !e.success));
}

#[test]
fn tips_change_only_the_prompt() {
    let suite = generate_suite(2, 5, 0).unwrap();
    let plain = evaluate_suite(&suite, &expert_factory(), None, 2);
    let human = builtin_human();
    let tipped = evaluate_suite(&suite, &expert_factory(), Some(&human), 2);
    assert_eq!(plain.episodes, tipped.episodes);
    assert_eq!(plain.metadata.seeds, tipped.metadata.seeds);
    assert_eq!(plain.metadata.tip_source, None);
    assert_eq!(tipped.metadata.tip_source.as_deref(), Some("human"));
}

#[test]
fn backend_failures_are_flagged() {
    let suite = generate_suite(1, 4, 0).unwrap();
    let failing = |spec: &GameSpec| -> Result<Box<dyn Policy>, PolicyError> {
        if spec.seed % 2 == 0 {
            Err(PolicyError::Transport { attempts: 4, message: "connection refused".into() })
        } else {
            Ok(Box::new(ExpertPolicy::new(spec)))
        }
    };
    let report = evaluate_suite(&suite, &failing, None, 2);
    assert_eq!(report.backend_failures, 2);
    let l = report.level(1).unwrap();
    assert_eq!((l.success_rate, l.normalized_points), (0.5, 0.5));
    assert!(report.episodes[0].policy_error.as_deref().unwrap().contains("refused"));
}

#[test]
fn reports_are_deterministic_across_worker_counts() {
    let suite = generate_suite(4, 8, 3).unwrap();
    let random = BackendFactory::new({
        let mut c = BackendConfig::new(BackendKind::RandomValid);
        c.random_seed = 5;
        c
    })
    .unwrap();
    let a = evaluate_suite(&suite, &random, None, 1);
    let mut b = evaluate_suite(&suite, &random, None, 4);
    b.metadata.workers = 1;
    assert_eq!(a.to_json(), b.to_json());
    for e in &a.episodes {
        assert!((0.0..=1.0).contains(&e.normalized));
        assert!(!e.success || e.normalized == 1.0);
    }
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "level,trial,games,success_rate,normalized_points");
    assert_eq!(csv.lines().count(), 2);
}

/// Fails trial 1 by eating the ingredient, reflects, then plays the walkthrough.
fn solves_on_trial_two(spec: &GameSpec) -> Result<Box<dyn Policy>, PolicyError> {
    let w: Vec<String> = spec.walkthrough.iter().map(|a| a.to_string()).collect();
    let name = &spec.recipe.ingredients[0].name;
    let mut script = vec![
        "open(fridge)".to_string(),
        format!("take({name})"),
        format!("eat({name})"),
        "Tips to win the game next time:\n1. Do not eat the ingredients.".into(),
    ];
    script.extend(w);
    Ok(Box::new(ScriptedPolicy::new(script)))
}

#[test]
fn cumulative_curve() {
    let suite = generate_suite(0, 6, 0).unwrap();
    let options = TrialOptions { max_trials: 4, distill_successes: false };
    let (report, runs) = evaluate_few_shot(&suite, &solves_on_trial_two, LearningMode::SelfHistory, options, 2);
    assert!(runs.iter().all(|r| r.solved_at() == Some(2)));
    let curve: Vec<(u32, f64)> = report.per_trial_curve.iter().map(|p| (p.trial, p.success_rate)).collect();
    assert_eq!(curve, [(1, 0.0), (2, 1.0), (3, 1.0), (4, 1.0)]);
    assert!((report.per_trial_curve[0].normalized_points - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(report.per_level[0].success_rate, 1.0);
    assert!(report.metadata.cumulative_curve);
    assert_eq!(report.episodes.len(), 12);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
}

#[test]
fn expert_contrast_with_expert_solves_at_once() {
    let suite = generate_suite(4, 5, 0).unwrap();
    let runs = run_trials_suite(&suite, &expert_factory(), LearningMode::ExpertContrast, TrialOptions::default(), 2);
    assert!(runs.iter().all(|r| r.solved_at() == Some(1)));
    let curve = few_shot_curve(&runs, 3);
    assert!(curve.iter().all(|p| p.success_rate == 1.0 && p.normalized_points == 1.0));
}

#[test]
fn potato_curve_steps_up_at_trial_four() {
    let spec = common::potato_game();
    let script = common::four_trial_script();
    let factory = move |_: &GameSpec| -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(ScriptedPolicy::new(script.clone())))
    };
    let (report, _) =
        evaluate_few_shot(&[spec], &factory, LearningMode::SelfHistory, TrialOptions::default(), 1);
    let success: Vec<f64> = report.per_trial_curve.iter().map(|p| p.success_rate).collect();
    assert_eq!(success, [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
}
