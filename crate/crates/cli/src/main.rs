mod config;

use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use cookworld::engine::{replay, run_episode_with, text, Status, Trajectory};
use cookworld::eval::{evaluate_few_shot, evaluate_suite, EvalReport};
use cookworld::model::GameSpec;
use cookworld::policy::{BackendConfig, BackendFactory, BackendKind, ExpertPolicy, PolicyError, PromptBundle};
use cookworld::rng::RNG_ALGORITHM;
use cookworld::tips::{aggregate_tips, load_tips, LearningMode, TipSet, TrialOptions, DEFAULT_MAX_TRIALS};
use cookworld::{generate, generate_suite, GeneratorConfig};
use serde_json::json;

use config::{BackendArgs, FileConfig};

#[derive(Debug, Parser)]
#[command(name = "cookworld", version, about = "Cooking text games and tip-learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one game, or a numbered suite with --suite
    Gen(GenArgs),
    /// Play one game (interactive by default)
    Play(PlayArgs),
    /// Repeated trials per game, learning tips between them
    Fewshot(FewshotArgs),
    /// Summarize final tips from several games into one general set
    Aggregate(AggregateArgs),
    /// One episode per game with a fixed tip set
    Eval(EvalArgs),
    /// Check a stored trajectory, or play a spec's walkthrough
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// TOML file with defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for timestamped run directories [default: runs]
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    level: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `count` games with seeds seed-base, seed-base+1, ...
    #[arg(long)]
    suite: bool,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Spec file, or a directory with --suite
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
struct GameArgs {
    #[arg(long)]
    level: Option<u8>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Play this spec file instead of generating one
    #[arg(long, conflicts_with = "level")]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlayArgs {
    #[command(flatten)]
    game: GameArgs,
    /// builtin:human, builtin:general or a tip file
    #[arg(long)]
    tips: Option<String>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
struct SuiteArgs {
    /// Level to generate, or to select from --suite
    #[arg(long)]
    level: Option<u8>,
    /// Directory of spec files written by `gen --suite`
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Episodes run in parallel [default: 1]
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct FewshotArgs {
    /// self_history, expert_contrast or pure_replay [default: self_history]
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    max_trials: Option<u32>,
    /// Also distill tips from successful trials
    #[arg(long)]
    distill_successes: bool,
    #[command(flatten)]
    suite: SuiteArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// Tip files, or directories of them (a fewshot run directory works)
    #[arg(long = "from", required = true, num_args = 1..)]
    from: Vec<PathBuf>,
    /// Where to write the general tip set
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// builtin:human, builtin:general or a tip file; omit for no tips
    #[arg(long)]
    tips: Option<String>,
    #[command(flatten)]
    suite: SuiteArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Trajectory file to verify feedback against
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    trajectory: Option<PathBuf>,
    /// Spec whose walkthrough is played
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
    Backend(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn backend_failure(e: PolicyError) -> Failure {
    match e {
        PolicyError::Config(_) | PolicyError::MissingApiKey(_) => Failure::Usage(e.to_string()),
        PolicyError::Io(_) => Failure::Runtime(e.into()),
        other => Failure::Backend(other.to_string()),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

struct Run {
    dir: PathBuf,
}

impl Run {
    /// Creates `<parent>/<timestamp>-<name>` and writes its manifest.
    fn start(common: &CommonArgs, file: &FileConfig, name: &str, config: serde_json::Value) -> anyhow::Result<Run> {
        let parent = common
            .run_dir
            .clone()
            .or_else(|| file.run_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs"));
        let now = chrono::Local::now();
        let stamp = now.format("%Y%m%d-%H%M%S").to_string();
        let mut dir = parent.join(format!("{stamp}-{name}"));
        let mut n = 2;
        while dir.exists() {
            dir = parent.join(format!("{stamp}-{name}-{n}"));
            n += 1;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let manifest = json!({
            "tool": "cookworld",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": name,
            "argv": std::env::args().collect::<Vec<_>>(),
            "started_at": now.to_rfc3339(),
            "template_version": text::TEMPLATE_VERSION,
            "rng_algorithm": RNG_ALGORITHM,
            "config": config,
        });
        let run = Run { dir };
        run.write("manifest.json", &format!("{}\n", serde_json::to_string_pretty(&manifest)?))?;
        Ok(run)
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn file_config(common: &CommonArgs) -> Result<FileConfig, Failure> {
    match &common.config {
        Some(path) => FileConfig::load(path).map_err(|e| usage(format!("{e:#}"))),
        None => Ok(FileConfig::default()),
    }
}

fn resolve_backend(args: &BackendArgs, file: &FileConfig, default: BackendKind) -> Result<(BackendConfig, BackendFactory), Failure> {
    let mut config = args.resolve(file, default).map_err(|e| usage(format!("{e:#}")))?;
    if config.kind == BackendKind::RemoteChat && config.log_dir.is_none() {
        // Filled in by the caller once the run directory exists.
        config.log_dir = Some(PathBuf::new());
    }
    let probe = BackendConfig { log_dir: None, ..config.clone() };
    let factory = BackendFactory::new(probe).map_err(backend_failure)?;
    Ok((config, factory))
}

/// Rebuilds the factory so remote request logs land in the run directory.
fn bind_logs(config: &mut BackendConfig, run: &Run, factory: BackendFactory) -> Result<BackendFactory, Failure> {
    if config.log_dir.is_none() {
        return Ok(factory);
    }
    config.log_dir = Some(run.dir.clone());
    BackendFactory::new(config.clone()).map_err(backend_failure)
}

fn read_spec(path: &Path) -> anyhow::Result<GameSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    GameSpec::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn load_suite(args: &SuiteArgs) -> Result<Vec<GameSpec>, Failure> {
    let specs = match (&args.suite, args.level) {
        (Some(dir), level) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .with_context(|| format!("reading suite directory {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            paths.sort();
            let mut specs = Vec::new();
            for p in paths {
                let spec = read_spec(&p)?;
                if level.is_none_or(|l| l == spec.level) {
                    specs.push(spec);
                }
            }
            specs
        }
        (None, Some(level)) => generate_suite(level, args.count, args.seed_base).map_err(|e| usage(e.to_string()))?,
        (None, None) => return Err(usage("give --level (to generate a suite) or --suite DIR")),
    };
    if specs.is_empty() {
        return Err(usage("the suite is empty"));
    }
    Ok(specs)
}

fn resolve_tips(flag: &Option<String>, file: &FileConfig) -> Result<Option<TipSet>, Failure> {
    match flag.as_ref().or(file.tips.as_ref()) {
        Some(src) => load_tips(src).map(Some).map_err(|e| usage(e.to_string())),
        None => Ok(None),
    }
}

fn print_levels(report: &EvalReport) {
    println!("{:<6} {:>8} {:>10} {:>8}", "level", "episodes", "points", "success");
    for l in &report.per_level {
        println!(
            "{:<6} {:>8} {:>10.3} {:>8.3}",
            l.level, l.episodes, l.normalized_points, l.success_rate
        );
    }
}

fn write_report(run: &Run, report: &EvalReport) -> anyhow::Result<()> {
    run.write("report.json", &report.to_json())?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    run.write("report.csv", &String::from_utf8(csv)?)?;
    let mut csv = Vec::new();
    report.write_episodes_csv(&mut csv)?;
    run.write("episodes.csv", &String::from_utf8(csv)?)?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let config = json!({
        "level": args.level, "seed": args.seed, "suite": args.suite,
        "count": args.count, "seed_base": args.seed_base, "out": args.out,
    });
    let specs = if args.suite {
        generate_suite(args.level, args.count, args.seed_base)
    } else {
        generate(&GeneratorConfig::new(args.level, args.seed)).map(|s| vec![s])
    }
    .map_err(|e| usage(e.to_string()))?;
    let run = Run::start(&args.common, &file, "gen", config)?;
    if args.suite {
        fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        for (i, spec) in specs.iter().enumerate() {
            let path = args.out.join(format!("{i:03}-{}.json", spec.game_id()));
            fs::write(&path, spec.to_canonical_json()).with_context(|| format!("writing {}", path.display()))?;
        }
        println!("wrote {} games to {}", specs.len(), args.out.display());
    } else {
        let spec = &specs[0];
        fs::write(&args.out, spec.to_canonical_json()).with_context(|| format!("writing {}", args.out.display()))?;
        println!(
            "wrote {} ({} points, {}-step walkthrough) to {}",
            spec.game_id(),
            spec.max_score,
            spec.walkthrough.len(),
            args.out.display()
        );
    }
    eprintln!("run directory: {}", run.dir.display());
    Ok(())
}

fn cmd_play(args: PlayArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let spec = match (&args.game.spec, args.game.level) {
        (Some(path), _) => read_spec(path)?,
        (None, Some(level)) => generate(&GeneratorConfig::new(level, args.game.seed)).map_err(|e| usage(e.to_string()))?,
        (None, None) => return Err(usage("give --level and --seed, or --spec FILE")),
    };
    let tips = resolve_tips(&args.tips, &file)?;
    let (mut backend, factory) = resolve_backend(&args.backend, &file, BackendKind::HumanRepl)?;
    let run = Run::start(
        &args.common,
        &file,
        "play",
        json!({ "game": spec.game_id(), "tips": args.tips, "backend": backend }),
    )?;
    let factory = bind_logs(&mut backend, &run, factory)?;
    let human = backend.kind == BackendKind::HumanRepl;
    if human {
        println!("{}\nType commands such as look() or open(fridge). Ctrl-D quits.", text::GOAL);
    }
    let mut policy = cookworld::policy::PolicyFactory::make(&factory, &spec).map_err(backend_failure)?;
    let base = PromptBundle::for_game().with_tips(tips);
    let outcome = run_episode_with(&spec, &mut *policy, &base);
    let t = &outcome.trajectory;
    if human {
        // The prompt shows each feedback before reading; the last one has no prompt.
        if let (Some(last), None) = (t.turns.last(), &t.diagnostic) {
            println!("{}", last.feedback);
        }
    } else {
        println!("{}", t.observation);
        for turn in &t.turns {
            println!("\n> {}\n{}", turn.action, turn.feedback);
        }
    }
    run.write("trajectory.jsonl", &t.to_jsonl())?;
    let banner = match (t.status, &t.diagnostic) {
        (Status::Won, _) => "*** You won! ***",
        (_, Some(_)) if human => "*** Game abandoned. ***",
        _ => "*** You lost. ***",
    };
    println!("\n{banner}\nScore: {}/{} in {} turns", t.score, spec.max_score, t.turns.len());
    eprintln!("run directory: {}", run.dir.display());
    match &t.diagnostic {
        Some(why) if !human => Err(Failure::Backend(why.clone())),
        _ => Ok(()),
    }
}

fn cmd_fewshot(args: FewshotArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let mode_name = args.scenario.clone().or_else(|| file.scenario.clone()).unwrap_or_else(|| "self_history".into());
    let mode = LearningMode::from_name(&mode_name).ok_or_else(|| {
        usage(format!("unknown scenario {mode_name:?} (expected self_history, expert_contrast or pure_replay)"))
    })?;
    let options = TrialOptions {
        max_trials: args.max_trials.or(file.max_trials).unwrap_or(DEFAULT_MAX_TRIALS),
        distill_successes: args.distill_successes,
    };
    if options.max_trials == 0 {
        return Err(usage("--max-trials must be at least 1"));
    }
    let workers = args.suite.workers.or(file.workers).unwrap_or(1);
    let specs = load_suite(&args.suite)?;
    let (mut backend, factory) = resolve_backend(&args.backend, &file, BackendKind::Expert)?;
    let run = Run::start(
        &args.common,
        &file,
        "fewshot",
        json!({
            "scenario": mode.as_str(), "options": options, "workers": workers,
            "games": specs.iter().map(|s| s.game_id()).collect::<Vec<_>>(), "backend": backend,
        }),
    )?;
    let factory = bind_logs(&mut backend, &run, factory)?;
    let (report, runs) = evaluate_few_shot(&specs, &factory, mode, options, workers);
    write_report(&run, &report)?;
    for trial_run in &runs {
        let id = &trial_run.game_id;
        run.write(&format!("trials/{id}.json"), &serde_json::to_string_pretty(trial_run).context("serializing trials")?)?;
        for r in &trial_run.records {
            run.write(&format!("trajectories/{id}-t{}.jsonl", r.trial_index), &r.trajectory.to_jsonl())?;
        }
        if let Some(tips) = &trial_run.final_tips {
            run.write(&format!("tips/{id}.json"), &tips.to_json())?;
        }
    }
    println!("{:<6} {:>6} {:>10} {:>8}", "level", "trial", "points", "success");
    for p in &report.per_trial_curve {
        println!("{:<6} {:>6} {:>10.3} {:>8.3}", p.level, p.trial, p.normalized_points, p.success_rate);
    }
    eprintln!("run directory: {}", run.dir.display());
    let errors: Vec<String> = runs.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.game_id))).collect();
    if !errors.is_empty() {
        return Err(Failure::Backend(format!("{} game(s) stopped early; first: {}", errors.len(), errors[0])));
    }
    Ok(())
}

fn collect_tip_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let dir = if input.join("tips").is_dir() { input.join("tips") } else { input.clone() };
            let mut found: Vec<PathBuf> = fs::read_dir(&dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

fn cmd_aggregate(args: AggregateArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let paths = collect_tip_files(&args.from)?;
    let mut sets = Vec::new();
    for p in &paths {
        sets.push(TipSet::load(p).map_err(|e| Failure::Runtime(e.into()))?);
    }
    if sets.iter().all(|s| s.is_empty()) {
        return Err(usage("no final tips found in the given inputs"));
    }
    let (mut backend, factory) = resolve_backend(&args.backend, &file, BackendKind::Scripted)?;
    let run = Run::start(
        &args.common,
        &file,
        "aggregate",
        json!({ "inputs": paths, "out": args.out, "backend": backend }),
    )?;
    let factory = bind_logs(&mut backend, &run, factory)?;
    let mut policy = factory.make_unbound().map_err(backend_failure)?;
    let general = aggregate_tips(&sets, &mut *policy).map_err(|e| match e {
        cookworld::tips::TipsError::Policy(p) => backend_failure(p),
        other => Failure::Runtime(other.into()),
    })?;
    general.save(&args.out).map_err(|e| Failure::Runtime(e.into()))?;
    run.write("tips.json", &general.to_json())?;
    println!("{} tips from {} games:", general.tips.len(), sets.len());
    println!("{}", cookworld::tips::render_tips(&general));
    eprintln!("run directory: {}", run.dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let tips = resolve_tips(&args.tips, &file)?;
    let workers = args.suite.workers.or(file.workers).unwrap_or(1);
    let specs = load_suite(&args.suite)?;
    let (mut backend, factory) = resolve_backend(&args.backend, &file, BackendKind::Expert)?;
    let run = Run::start(
        &args.common,
        &file,
        "eval",
        json!({
            "tips": args.tips.clone().or(file.tips.clone()), "workers": workers,
            "games": specs.iter().map(|s| s.game_id()).collect::<Vec<_>>(), "backend": backend,
        }),
    )?;
    let factory = bind_logs(&mut backend, &run, factory)?;
    let report = evaluate_suite(&specs, &factory, tips.as_ref(), workers);
    write_report(&run, &report)?;
    print_levels(&report);
    eprintln!("run directory: {}", run.dir.display());
    if report.backend_failures > 0 {
        let first = report.episodes.iter().find_map(|e| e.policy_error.clone()).unwrap_or_default();
        return Err(Failure::Backend(format!(
            "{} episode(s) failed in the backend; first: {first}",
            report.backend_failures
        )));
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<(), Failure> {
    let file = file_config(&args.common)?;
    let (trajectory, source) = match (&args.trajectory, &args.spec) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let t = Trajectory::from_jsonl(&text).with_context(|| format!("loading {}", path.display()))?;
            (t, path.clone())
        }
        (None, Some(path)) => {
            let spec = read_spec(path)?;
            let outcome = run_episode_with(&spec, &mut ExpertPolicy::new(&spec), &PromptBundle::for_game());
            (outcome.trajectory, path.clone())
        }
        (None, None) => return Err(usage("give --trajectory FILE or --spec FILE")),
    };
    let run = Run::start(&args.common, &file, "replay", json!({ "source": source }))?;
    replay(&trajectory).with_context(|| format!("replaying {}", source.display()))?;
    run.write("trajectory.jsonl", &trajectory.to_jsonl())?;
    println!(
        "{}: {:?}, score {}/{} in {} turns; feedback reproduced exactly",
        trajectory.spec.game_id(),
        trajectory.status,
        trajectory.score,
        trajectory.spec.max_score,
        trajectory.turns.len()
    );
    eprintln!("run directory: {}", run.dir.display());
    if args.spec.is_some() && trajectory.status != Status::Won {
        return Err(Failure::Runtime(anyhow!("the walkthrough did not win")));
    }
    Ok(())
}

/// Joins an error chain, skipping causes already spelled out by their parent.
fn chain_message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !prev.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        prev = text;
    }
    out
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Play(a) => cmd_play(a),
        Command::Fewshot(a) => cmd_fewshot(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", chain_message(&e));
            ExitCode::from(2)
        }
        Err(Failure::Backend(msg)) => {
            eprintln!("backend error: {msg}");
            ExitCode::from(3)
        }
    }
}
