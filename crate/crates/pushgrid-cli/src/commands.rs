//! Subcommand implementations. Every command writes its artifacts into a
//! fresh directory under the output root and never mutates its input files.

use crate::config::RunConfig;
use clap::Args;
use pushgrid::env::{named_scenario, PushEnv, ScenarioSpec, EVAL_SCENARIOS};
use pushgrid::evalbench::{replay, run_episode, run_suite, Trajectory};
use pushgrid::extractors::ExtractorKind;
use pushgrid::ppo::{checkpoint, Trainer};
use pushgrid::rng::indexed_seed;
use pushgrid::scene::write_pgm;
use pushgrid::{Error, Result};
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Output root: the `PUSHGRID_OUT_DIR` environment variable overrides the
/// default `./runs`.
pub fn out_root() -> PathBuf {
    std::env::var_os("PUSHGRID_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Create a fresh run directory under the output root. When the preferred
/// name is taken, a numeric suffix is added so no run ever overwrites
/// another's artifacts.
fn create_run_dir(base: &str) -> Result<PathBuf> {
    let root = out_root();
    fs::create_dir_all(&root)?;
    let mut candidate = root.join(base);
    let mut k = 1;
    while candidate.exists() {
        k += 1;
        candidate = root.join(format!("{base}-{k}"));
    }
    fs::create_dir(&candidate)?;
    Ok(candidate)
}

/// Read an input file, folding I/O problems into a configuration error that
/// names the path (missing inputs are a usage problem, not a runtime fault).
fn read_input(path: &Path, what: &str) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Config(format!("cannot read {what} '{}': {e}", path.display())))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} '{}' does not exist",
            path.display()
        )))
    }
}

fn parse_extractor(s: &str) -> Result<ExtractorKind> {
    s.parse::<ExtractorKind>()
        .map_err(|_| Error::Config(format!("unknown extractor '{s}' (choose attention, cnn, or mlp)")))
}

/// Expand `--scenarios` into a list of names (`all` = every evaluation suite).
fn resolve_scenario_names(arg: &str) -> Result<Vec<String>> {
    if arg == "all" {
        return Ok(EVAL_SCENARIOS.iter().map(|s| s.to_string()).collect());
    }
    let names: Vec<String> = arg
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::Config("no scenarios requested".into()));
    }
    Ok(names)
}

/// Resolved run description written to `config.json` before execution.
#[derive(Serialize)]
struct Snapshot<'a> {
    command: &'a str,
    source_checkpoint: Option<String>,
    run: &'a RunConfig,
    scenario_spec: &'a ScenarioSpec,
}

fn write_snapshot(
    dir: &Path,
    command: &str,
    run: &RunConfig,
    scenario_spec: &ScenarioSpec,
    source_checkpoint: Option<&Path>,
) -> Result<()> {
    let snap = Snapshot {
        command,
        source_checkpoint: source_checkpoint.map(|p| p.display().to_string()),
        run,
        scenario_spec,
    };
    let mut text = serde_json::to_string_pretty(&snap)?;
    text.push('\n');
    fs::write(dir.join("config.json"), text)?;
    Ok(())
}

/// Shared training loop: metrics NDJSON per update, a rolling checkpoint
/// every `checkpoint_every_updates`, a final checkpoint on completion, and a
/// post-mortem checkpoint if the run faults.
fn run_training(mut trainer: Trainer, run: &RunConfig, dir: &Path) -> Result<()> {
    let mut metrics = BufWriter::new(fs::File::create(dir.join("metrics.ndjson"))?);
    let every = run.checkpoint_every_updates.max(1);
    let latest = dir.join("checkpoint-latest.ckpt");
    let outcome = trainer.train_steps(run.total_env_steps, |tr, m| {
        serde_json::to_writer(&mut metrics, m)?;
        metrics.write_all(b"\n")?;
        println!(
            "update {:>5}  steps {:>9}  lr {:.2e}  kl {:+.5}  clip {:.3}  pi {:+.5}  v {:.5}  ret {}  success {}",
            m.update,
            m.env_steps,
            m.learning_rate,
            m.approx_kl,
            m.clip_fraction,
            m.policy_loss,
            m.value_loss,
            m.episode_return_mean
                .map_or_else(|| "   --".into(), |r| format!("{r:+.2}")),
            m.success_rate
                .map_or_else(|| "  --".into(), |s| format!("{:.0}%", s * 100.0)),
        );
        if m.update % every == 0 {
            metrics.flush()?;
            checkpoint::save(tr, &latest)?;
        }
        Ok(())
    });
    metrics.flush()?;
    if let Err(e) = outcome {
        // Keep what we can for post-mortem before reporting the fault.
        if matches!(e, Error::TrainingFault(_)) {
            let _ = checkpoint::save(&trainer, &dir.join("checkpoint-fault.ckpt"));
        }
        return Err(e);
    }
    let final_path = dir.join("checkpoint-final.ckpt");
    checkpoint::save(&trainer, &final_path)?;
    println!(
        "done: {} env steps, {} updates, {} episodes; final checkpoint {}",
        trainer.env_steps,
        trainer.updates,
        trainer.episodes_completed,
        final_path.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid feature extractor override: attention, cnn, or mlp.
    #[arg(long)]
    pub extractor: Option<String>,
    /// Stop after this many environment steps (overrides the config).
    #[arg(long)]
    pub max_env_steps: Option<u64>,
    /// Scenario to train on (single name; overrides the config).
    #[arg(long)]
    pub scenarios: Option<String>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut run = match &args.config {
        Some(path) => {
            let bytes = read_input(path, "config file")?;
            serde_json::from_slice::<RunConfig>(&bytes)
                .map_err(|e| Error::Config(format!("invalid config '{}': {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        run.ppo.seed = seed;
    }
    if let Some(kind) = &args.extractor {
        run.ppo.extractor = parse_extractor(kind)?;
    }
    if let Some(total) = args.max_env_steps {
        run.total_env_steps = total;
    }
    if let Some(name) = &args.scenarios {
        if name.contains(',') {
            return Err(Error::Config("train takes a single scenario".into()));
        }
        run.scenario = name.clone();
    }
    run.ppo.validate()?;
    let scenario = named_scenario(&run.scenario)?.for_training();

    let dir = create_run_dir(&format!(
        "train-{}-{}-seed{}",
        run.scenario, run.ppo.extractor, run.ppo.seed
    ))?;
    println!("run directory: {}", dir.display());
    write_snapshot(&dir, "train", &run, &scenario, None)?;

    let trainer = Trainer::new(run.ppo.clone(), scenario)?;
    run_training(trainer, &run, &dir)
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Source checkpoint to continue from (networks and optimizer state).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Target scenario (single name; defaults to the checkpoint's scenario).
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Master seed for the new environments (defaults to the checkpoint's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extractor the checkpoint must carry; a different kind is an error.
    #[arg(long)]
    pub extractor: Option<String>,
    /// Additional environment steps to train for.
    #[arg(long, default_value_t = 0)]
    pub max_env_steps: u64,
}

pub fn cmd_finetune(args: &FinetuneArgs) -> Result<()> {
    require_file(&args.checkpoint, "checkpoint")?;
    let (mut config, old_scenario, nets, opt) = checkpoint::load_nets_and_optimizer(&args.checkpoint)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(kind) = &args.extractor {
        config.extractor = parse_extractor(kind)?;
    }
    let name = args
        .scenarios
        .clone()
        .unwrap_or_else(|| old_scenario.name.clone());
    if name.contains(',') {
        return Err(Error::Config("finetune takes a single scenario".into()));
    }
    let scenario = named_scenario(&name)?.for_training();

    let run = RunConfig {
        ppo: config.clone(),
        scenario: name.clone(),
        total_env_steps: args.max_env_steps,
        ..RunConfig::default()
    };
    let trainer = Trainer::fine_tune(config, scenario.clone(), nets, opt)?;

    let dir = create_run_dir(&format!(
        "finetune-{}-{}-seed{}",
        name, run.ppo.extractor, run.ppo.seed
    ))?;
    println!("run directory: {}", dir.display());
    write_snapshot(&dir, "finetune", &run, &scenario, Some(&args.checkpoint))?;
    run_training(trainer, &run, &dir)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint whose networks are evaluated.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated scenario names, or `all` for every suite.
    #[arg(long, default_value = "all")]
    pub scenarios: String,
    /// Episodes per scenario.
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    /// Master evaluation seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use mode actions (`true`) or sample from the policy (`false`).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, value_name = "BOOL")]
    pub deterministic: bool,
    /// Additionally export this many trajectories per scenario as NDJSON.
    #[arg(long, default_value_t = 0)]
    pub record_trajectories: usize,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    require_file(&args.checkpoint, "checkpoint")?;
    let (_, _, nets) = checkpoint::load_nets(&args.checkpoint)?;
    let names = resolve_scenario_names(&args.scenarios)?;
    let specs: Vec<ScenarioSpec> = names
        .iter()
        .map(|n| named_scenario(n))
        .collect::<Result<_>>()?;

    let report = run_suite(&nets, &specs, args.episodes, args.seed, args.deterministic)?;

    let stem = args
        .checkpoint
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("checkpoint");
    let dir = create_run_dir(&format!("eval-{stem}-seed{}", args.seed))?;
    fs::write(dir.join("report.csv"), report.to_csv())?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;

    // Recorded episodes reuse the suite's per-episode seed derivation, so an
    // exported trajectory is exactly the episode the report counted.
    for spec in &specs {
        for i in 0..args.record_trajectories {
            let seed = indexed_seed(args.seed, &format!("eval-{}", spec.name), i as u64);
            let outcome = run_episode(&nets, spec.clone(), seed, args.deterministic, true)?;
            let trajectory = outcome
                .trajectory
                .ok_or_else(|| Error::TrainingFault("recording produced no trajectory".into()))?;
            fs::write(
                dir.join(format!("trajectory-{}-{i}.ndjson", spec.name)),
                trajectory.to_ndjson()?,
            )?;
        }
    }

    print!("{}", report.to_table());
    println!("report written to {}", dir.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// NDJSON trajectory produced by `eval --record-trajectories`.
    #[arg(long)]
    pub trajectory: PathBuf,
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let bytes = read_input(&args.trajectory, "trajectory file")?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::TrajectoryFormat("trajectory is not valid UTF-8".into()))?;
    let trajectory = Trajectory::from_ndjson(&text)?;
    let report = replay(&trajectory)?;

    let stem = args
        .trajectory
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    let dir = create_run_dir(&format!("replay-{stem}"))?;
    fs::write(dir.join("trajectory.csv"), trajectory.to_csv())?;

    let (env, _) = PushEnv::new(trajectory.scenario.clone(), trajectory.seed)?;
    let mut pgm = Vec::new();
    write_pgm(env.grid(), &mut pgm)?;
    fs::write(dir.join("grid.pgm"), &pgm)?;

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    println!(
        "replayed {} steps: max position divergence {:.3e} m, max angle divergence {:.3e} rad, outcome {}",
        report.steps,
        report.max_position_divergence,
        report.max_angle_divergence,
        if report.outcome_matches { "matches" } else { "DIVERGED" }
    );
    println!("artifacts written to {}", dir.display());
    Ok(())
}
