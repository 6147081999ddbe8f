//! Command-line entry point: scenario generation, rollouts, training,
//! evaluation, comparison tables, and SVG rendering behind one binary.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, missing inputs),
//! 2 runtime error. Every run writes a `manifest.json` into its output
//! directory recording the resolved parameters, so the run can be
//! repeated bit-exactly; results never depend on `--workers`.

use crate::evalharness::{
    self, compare, evaluate, render_trajectory, suite_from_json, suite_to_json, EvalConfig,
    EvalSuite,
};
use crate::perception::EgoGrid;
use crate::qpolicy::{GreedyQPolicy, Policy, QNet, RandomPolicy, Variant, VgmPolicy};
use crate::rollouts::{dense_rollout, run_episode, write_dense_trajectory};
use crate::training::{train, TrainConfig};
use crate::worldgen::{fixtures, save_environment, Environment};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const MANIFEST_FORMAT: &str = "divis-manifest/1";

/// Environment variable naming an extra root for suite files.
pub const DATA_DIR_VAR: &str = "DIVIS_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "divis", version, about = "2D goal-reaching navigation harness")]
struct Cli {
    /// Worker threads (default: available parallelism). Results are
    /// identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Random,
    Vgm,
    VgmCollision,
    Reactive,
    Recurrent,
    RecurrentFlow,
}

impl PolicyKind {
    fn variant(self) -> Option<Variant> {
        match self {
            PolicyKind::Reactive => Some(Variant::Reactive),
            PolicyKind::Recurrent => Some(Variant::Recurrent),
            PolicyKind::RecurrentFlow => Some(Variant::RecurrentFlow),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::Vgm => "vgm",
            PolicyKind::VgmCollision => "vgm_collision",
            PolicyKind::Reactive => "reactive",
            PolicyKind::Recurrent => "recurrent",
            PolicyKind::RecurrentFlow => "recurrent_flow",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write the built-in environment fixtures as JSON files.
    GenEnvFixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a named scenario suite and write it as JSON.
    GenScenarios {
        /// seen | unseen | occlusion | open_field | obstacle_between
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run dense multi-step rollouts over a suite; one trajectory log
    /// per scenario.
    Rollout {
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only the first N scenarios of the suite.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the batch RL training loop.
    Train {
        /// JSON training configuration.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one policy on a suite; writes metrics.json.
    Evaluate {
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Success-rate table: baselines plus one row per checkpoint,
    /// over one or more suites.
    Compare {
        /// Repeatable; suite name or file per use.
        #[arg(long, required = true)]
        suite: Vec<String>,
        /// Repeatable; one trained-policy row per checkpoint.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render episode trajectories over a suite as SVG files.
    Render {
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only the first N scenarios of the suite.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Serialize)]
struct Manifest {
    format: String,
    version: String,
    command: String,
    policy: Option<String>,
    checkpoints: Vec<String>,
    suites: Vec<String>,
    seed: Option<u64>,
    config: Option<serde_json::Value>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str) -> Manifest {
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            policy: None,
            checkpoints: Vec::new(),
            suites: Vec::new(),
            seed: None,
            config: None,
            outputs: Vec::new(),
        }
    }

    fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let s = serde_json::to_string_pretty(self).map_err(runtime)?;
        std::fs::write(out_dir.join("manifest.json"), s).map_err(runtime)
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(runtime)
}

/// Resolve a `--suite` argument: an existing file path, a built-in
/// suite name, or `<name>.json` under `$DIVIS_DATA_DIR/suites`.
fn resolve_suite(arg: &str) -> Result<EvalSuite, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let s = std::fs::read_to_string(path).map_err(runtime)?;
        return suite_from_json(&s).map_err(|e| CliError::Usage(e.to_string()));
    }
    match arg {
        "seen" => return Ok(evalharness::build_seen_suite()),
        "unseen" => return Ok(evalharness::build_unseen_suite()),
        "occlusion" => return Ok(evalharness::build_occlusion_suite()),
        "open_field" => return Ok(evalharness::build_open_field_suite()),
        "obstacle_between" => return Ok(evalharness::build_obstacle_between_suite()),
        _ => {}
    }
    if let Ok(root) = std::env::var(DATA_DIR_VAR) {
        let candidate = Path::new(&root).join("suites").join(format!("{arg}.json"));
        if candidate.is_file() {
            let s = std::fs::read_to_string(&candidate).map_err(runtime)?;
            return suite_from_json(&s).map_err(|e| CliError::Usage(e.to_string()));
        }
    }
    Err(CliError::Usage(format!("unknown suite {arg:?}")))
}

enum BuiltPolicy {
    Random(RandomPolicy),
    Vgm(VgmPolicy),
    Net(QNet),
}

impl Policy for BuiltPolicy {
    fn initial_state(&self) -> crate::qpolicy::HiddenState {
        match self {
            BuiltPolicy::Random(p) => p.initial_state(),
            BuiltPolicy::Vgm(p) => p.initial_state(),
            BuiltPolicy::Net(net) => net.initial_hidden(),
        }
    }

    fn act(
        &self,
        obs: &crate::perception::ObservationStack,
        state: &mut crate::qpolicy::HiddenState,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> usize {
        match self {
            BuiltPolicy::Random(p) => p.act(obs, state, rng),
            BuiltPolicy::Vgm(p) => p.act(obs, state, rng),
            BuiltPolicy::Net(net) => GreedyQPolicy { net, epsilon: 0.0 }.act(obs, state, rng),
        }
    }

    fn name(&self) -> String {
        match self {
            BuiltPolicy::Random(p) => p.name(),
            BuiltPolicy::Vgm(p) => p.name(),
            BuiltPolicy::Net(net) => GreedyQPolicy { net, epsilon: 0.0 }.name(),
        }
    }
}

fn build_policy(kind: PolicyKind, checkpoint: Option<&Path>) -> Result<BuiltPolicy, CliError> {
    let space = crate::dynamics::ActionSpace::default();
    match kind {
        PolicyKind::Random => Ok(BuiltPolicy::Random(RandomPolicy { k: space.k })),
        PolicyKind::Vgm | PolicyKind::VgmCollision => Ok(BuiltPolicy::Vgm(VgmPolicy {
            grid: EgoGrid::default(),
            space,
            use_collision: kind == PolicyKind::VgmCollision,
        })),
        _ => {
            let variant = kind.variant().unwrap();
            let path = checkpoint.ok_or_else(|| {
                CliError::Usage(format!("--checkpoint required for policy {}", kind.name()))
            })?;
            if !path.is_file() {
                return Err(CliError::Usage(format!(
                    "checkpoint not found: {}",
                    path.display()
                )));
            }
            let net = QNet::load(path).map_err(|e| CliError::Usage(e.to_string()))?;
            if net.variant != variant {
                return Err(CliError::Usage(format!(
                    "checkpoint holds a {} network, but --policy is {}",
                    net.variant.name(),
                    kind.name()
                )));
            }
            Ok(BuiltPolicy::Net(net))
        }
    }
}

fn all_envs() -> Vec<Environment> {
    fixtures::all()
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // best-effort: a later duplicate init (tests in one process)
        // keeps the first pool, which is fine for correctness
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.cmd {
        Cmd::GenEnvFixtures { out } => {
            ensure_out_dir(&out)?;
            let mut manifest = Manifest::new("gen-env-fixtures");
            for env in all_envs() {
                let path = out.join(format!("{}.json", env.id));
                save_environment(&env, &path).map_err(runtime)?;
                manifest.outputs.push(format!("{}.json", env.id));
            }
            manifest.write(&out)
        }
        Cmd::GenScenarios { suite, out } => {
            let built = resolve_suite(&suite)?;
            ensure_out_dir(&out)?;
            let file = format!("{}.json", built.name);
            std::fs::write(out.join(&file), suite_to_json(&built)).map_err(runtime)?;
            let mut manifest = Manifest::new("gen-scenarios");
            manifest.suites.push(suite);
            manifest.outputs.push(file);
            manifest.write(&out)
        }
        Cmd::Rollout {
            policy,
            checkpoint,
            suite,
            seed,
            limit,
            out,
        } => {
            let mut built_suite = resolve_suite(&suite)?;
            if let Some(n) = limit {
                built_suite.scenarios.truncate(n);
            }
            let built = build_policy(policy, checkpoint.as_deref())?;
            ensure_out_dir(&out)?;
            let envs = all_envs();
            let cfg = EvalConfig::default();
            let mut manifest = Manifest::new("rollout");
            manifest.policy = Some(policy.name().to_string());
            manifest.seed = Some(seed);
            manifest.suites.push(suite);
            if let Some(c) = &checkpoint {
                manifest.checkpoints.push(c.display().to_string());
            }
            for scenario in &built_suite.scenarios {
                let env = envs
                    .iter()
                    .find(|e| e.id == scenario.env_id)
                    .ok_or_else(|| {
                        CliError::Usage(format!("unknown environment {}", scenario.env_id))
                    })?;
                let dense = dense_rollout(
                    env,
                    scenario,
                    &built,
                    &cfg.rollout,
                    &cfg.perception_base,
                    seed ^ scenario.seed,
                )
                .map_err(runtime)?;
                let file = format!("traj_{}_{:016x}.ndjson", scenario.env_id, scenario.seed);
                let mut w = std::fs::File::create(out.join(&file)).map_err(runtime)?;
                write_dense_trajectory(&mut w, &dense, false).map_err(runtime)?;
                manifest.outputs.push(file);
            }
            manifest.write(&out)
        }
        Cmd::Train { config, seed, out } => {
            if !config.is_file() {
                return Err(CliError::Usage(format!(
                    "config not found: {}",
                    config.display()
                )));
            }
            let text = std::fs::read_to_string(&config).map_err(runtime)?;
            let mut cfg: TrainConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config: {e}")))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            ensure_out_dir(&out)?;
            let mut manifest = Manifest::new("train");
            manifest.seed = Some(cfg.seed);
            manifest.config = Some(serde_json::to_value(&cfg).map_err(runtime)?);
            manifest.outputs.push("train_report.ndjson".to_string());
            manifest.write(&out)?;
            train(&fixtures::seen(), &cfg, &out).map_err(runtime)?;
            Ok(())
        }
        Cmd::Evaluate {
            policy,
            checkpoint,
            suite,
            seed,
            out,
        } => {
            let built_suite = resolve_suite(&suite)?;
            let built = build_policy(policy, checkpoint.as_deref())?;
            ensure_out_dir(&out)?;
            let cfg = EvalConfig::default();
            let metrics =
                evaluate(&built, &all_envs(), &built_suite, &cfg).map_err(runtime)?;
            let s = serde_json::to_string_pretty(&metrics).map_err(runtime)?;
            std::fs::write(out.join("metrics.json"), s).map_err(runtime)?;
            let mut manifest = Manifest::new("evaluate");
            manifest.policy = Some(policy.name().to_string());
            manifest.seed = Some(seed);
            manifest.suites.push(suite);
            if let Some(c) = &checkpoint {
                manifest.checkpoints.push(c.display().to_string());
            }
            manifest.outputs.push("metrics.json".to_string());
            manifest.write(&out)
        }
        Cmd::Compare {
            suite,
            checkpoint,
            out,
        } => {
            let suites: Vec<EvalSuite> = suite
                .iter()
                .map(|s| resolve_suite(s))
                .collect::<Result<_, _>>()?;
            let suite_refs: Vec<&EvalSuite> = suites.iter().collect();
            let space = crate::dynamics::ActionSpace::default();
            let random = RandomPolicy { k: space.k };
            let vgm = VgmPolicy {
                grid: EgoGrid::default(),
                space: space.clone(),
                use_collision: false,
            };
            let vgm_c = VgmPolicy {
                grid: EgoGrid::default(),
                space,
                use_collision: true,
            };
            let mut nets = Vec::new();
            for path in &checkpoint {
                if !path.is_file() {
                    return Err(CliError::Usage(format!(
                        "checkpoint not found: {}",
                        path.display()
                    )));
                }
                nets.push(QNet::load(path).map_err(|e| CliError::Usage(e.to_string()))?);
            }
            let greedy: Vec<GreedyQPolicy> = nets
                .iter()
                .map(|net| GreedyQPolicy { net, epsilon: 0.0 })
                .collect();
            let mut policies: Vec<&dyn Policy> = vec![&random, &vgm, &vgm_c];
            for g in &greedy {
                policies.push(g);
            }
            ensure_out_dir(&out)?;
            let table = compare(&policies, &all_envs(), &suite_refs, &EvalConfig::default())
                .map_err(runtime)?;
            let json = serde_json::to_string_pretty(&table).map_err(runtime)?;
            std::fs::write(out.join("comparison.json"), json).map_err(runtime)?;
            std::fs::write(out.join("comparison.txt"), table.to_text()).map_err(runtime)?;
            let mut manifest = Manifest::new("compare");
            manifest.suites = suite;
            manifest.checkpoints = checkpoint.iter().map(|c| c.display().to_string()).collect();
            manifest.outputs = vec!["comparison.json".into(), "comparison.txt".into()];
            manifest.write(&out)
        }
        Cmd::Render {
            policy,
            checkpoint,
            suite,
            seed,
            limit,
            out,
        } => {
            let mut built_suite = resolve_suite(&suite)?;
            if let Some(n) = limit {
                built_suite.scenarios.truncate(n);
            }
            let built = build_policy(policy, checkpoint.as_deref())?;
            ensure_out_dir(&out)?;
            let envs = all_envs();
            let cfg = EvalConfig::default();
            let mut manifest = Manifest::new("render");
            manifest.policy = Some(policy.name().to_string());
            manifest.seed = Some(seed);
            manifest.suites.push(suite);
            if let Some(c) = &checkpoint {
                manifest.checkpoints.push(c.display().to_string());
            }
            for scenario in &built_suite.scenarios {
                let env = envs
                    .iter()
                    .find(|e| e.id == scenario.env_id)
                    .ok_or_else(|| {
                        CliError::Usage(format!("unknown environment {}", scenario.env_id))
                    })?;
                let traj = run_episode(
                    env,
                    scenario,
                    &built,
                    &cfg.rollout,
                    &cfg.perception_base,
                    seed ^ scenario.seed,
                )
                .map_err(runtime)?;
                let file = format!("traj_{}_{:016x}.svg", scenario.env_id, scenario.seed);
                render_trajectory(env, &traj, &out.join(&file)).map_err(runtime)?;
                manifest.outputs.push(file);
            }
            manifest.write(&out)
        }
    }
}

/// Parse and execute; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // --help/--version print to stdout and are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("divis").chain(args.iter().copied()))
    }

    #[test]
    fn missing_config_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = run_args(&[
            "train",
            "--config",
            "missing.json",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn unknown_flag_rejected() {
        assert_eq!(run_args(&["evaluate", "--bogus"]), 1);
        assert_eq!(run_args(&["no-such-command"]), 1);
    }

    #[test]
    fn unknown_suite_and_missing_checkpoint_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = run_args(&[
            "evaluate",
            "--policy",
            "random",
            "--suite",
            "nonexistent_suite",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
        let code = run_args(&[
            "evaluate",
            "--policy",
            "recurrent-flow",
            "--suite",
            "open_field",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn gen_env_fixtures_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("envs");
        assert_eq!(
            run_args(&["gen-env-fixtures", "--out", out.to_str().unwrap()]),
            0
        );
        assert!(out.join("manifest.json").is_file());
        for env in fixtures::all() {
            let loaded =
                crate::worldgen::load_environment(&out.join(format!("{}.json", env.id))).unwrap();
            assert_eq!(loaded.id, env.id);
            assert_eq!(loaded.goal_objects.len(), env.goal_objects.len());
        }
    }

    #[test]
    fn gen_scenarios_then_evaluate_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scen");
        assert_eq!(
            run_args(&[
                "gen-scenarios",
                "--suite",
                "open_field",
                "--out",
                out.to_str().unwrap()
            ]),
            0
        );
        let suite_file = out.join("open_field.json");
        assert!(suite_file.is_file());
        let eval_out = dir.path().join("eval");
        let code = run_args(&[
            "evaluate",
            "--policy",
            "vgm",
            "--suite",
            suite_file.to_str().unwrap(),
            "--out",
            eval_out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let metrics: crate::evalharness::Metrics = serde_json::from_str(
            &std::fs::read_to_string(eval_out.join("metrics.json")).unwrap(),
        )
        .unwrap();
        // The point here is file-path suite resolution, not VGM
        // quality under the default (noisy, miss-prone) perception.
        assert_eq!(metrics.outcomes.len(), 24);
        assert!(metrics.success_rate > 20.0);
        assert!(eval_out.join("manifest.json").is_file());
    }

    #[test]
    fn render_writes_svgs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("render");
        let code = run_args(&[
            "render",
            "--policy",
            "vgm",
            "--suite",
            "open_field",
            "--limit",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let svgs: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| {
                let p = e.unwrap().path();
                (p.extension().map(|x| x == "svg") == Some(true)).then_some(p)
            })
            .collect();
        assert_eq!(svgs.len(), 2);
        let text = std::fs::read_to_string(&svgs[0]).unwrap();
        assert!(text.starts_with("<svg"));
    }

    #[test]
    fn rollout_writes_trajectory_logs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("roll");
        let code = run_args(&[
            "rollout",
            "--policy",
            "vgm-collision",
            "--suite",
            "open_field",
            "--limit",
            "1",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let logs: Vec<_> = std::fs::read_dir(&out)
            .unwrap()
            .filter_map(|e| {
                let p = e.unwrap().path();
                (p.extension().map(|x| x == "ndjson") == Some(true)).then_some(p)
            })
            .collect();
        assert_eq!(logs.len(), 1);
        let text = std::fs::read_to_string(&logs[0]).unwrap();
        let dense =
            crate::rollouts::read_dense_trajectory(&mut text.as_bytes()).unwrap();
        assert!(!dense.base.steps.is_empty());
        assert!(dense.mask.iter().all(|row| row.iter().all(|m| *m)));
    }

    #[test]
    fn data_dir_suite_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let suites = dir.path().join("suites");
        std::fs::create_dir_all(&suites).unwrap();
        let mut suite = evalharness::build_open_field_suite();
        suite.name = "custom".to_string();
        suite.scenarios.truncate(3);
        std::fs::write(suites.join("custom.json"), suite_to_json(&suite)).unwrap();
        // resolve via the environment variable
        std::env::set_var(DATA_DIR_VAR, dir.path());
        let loaded = resolve_suite("custom").unwrap();
        std::env::remove_var(DATA_DIR_VAR);
        assert_eq!(loaded, suite);
    }
}
