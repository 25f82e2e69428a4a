//! Command-line front end. Results go to stdout (or `--out`); failures print
//! `{"error":{"kind":...,"message":...}}` on stderr and exit nonzero.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rmab_learn::experiment::{
    compare_policies, evaluate_policies, oracle_policy, run_index_learning, run_single_mdp, write_policy_csv, ExperimentConfig,
    ExperimentError, IndexReport, PolicyRow, SimulationSettings,
};
use rmab_learn::experiment::trace::format_value;
use rmab_learn::oracle::{solve_q, whittle_indices, OracleReport, DEFAULT_INDEX_TOLERANCE};
use rmab_learn::rmab_sim::{truncation_horizon, PolicySpec, RmabInstance};
use rmab_learn::TabularMdp;

#[derive(Parser)]
#[command(name = "rmab", version, about = "Q-learning variants and Whittle index learning for restless bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an arm fixture and print its dimensions.
    Validate { fixture: PathBuf },
    /// Solve for Q* at subsidy λ by value iteration.
    Solve {
        fixture: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Exact Whittle index of every state by bisection.
    Index {
        fixture: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INDEX_TOLERANCE)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Single-arm learner comparison; writes `<experiment>.csv` and a summary.
    LearnQ(RunArgs),
    /// Two-timescale index learning; writes `<experiment>.csv` and learned indices.
    LearnIndex(RunArgs),
    /// Monte-Carlo value of an index policy on an N-arm instance.
    ///
    /// POLICY is `oracle`, `random`, a learned-index JSON from `learn-index`
    /// (compares learned, oracle and random), or a policy JSON such as
    /// `{"whittle-index": [[...], ...]}`.
    Simulate {
        instance: PathBuf,
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// Truncation tolerance of the discounted sum.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled config: paper-single-mdp, paper-index-learning or desk-ci.
    #[arg(long)]
    preset: Option<String>,
    /// Run this single seed instead of the config's list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => unreachable!("clap requires one of them"),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg = cfg.with_output_dir(out);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", &e.to_string(), 2),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message.trim() } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn run(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Validate { fixture } => {
            let mdp = TabularMdp::load(&fixture)?;
            print_json(&json!({
                "fixture": fixture,
                "valid": true,
                "states": mdp.num_states,
                "actions": mdp.num_actions,
                "discount": mdp.discount,
            }))
        }
        Command::Solve {
            fixture,
            lambda,
            tol,
            out,
            force,
        } => {
            let mdp = TabularMdp::load(&fixture)?;
            let sol = solve_q(&mdp, lambda, tol)?;
            emit(out.as_deref(), force, &pretty(&OracleReport::from_solution(&sol, lambda)))
        }
        Command::Index {
            fixture,
            tol,
            out,
            force,
        } => {
            let mdp = TabularMdp::load(&fixture)?;
            emit(out.as_deref(), force, &pretty(&whittle_indices(&mdp, tol)?))
        }
        Command::LearnQ(args) => {
            let summary = run_single_mdp(&args.resolve()?, args.force)?;
            let finals: Vec<_> = summary
                .algorithms
                .iter()
                .map(|a| json!({ "algorithm": a.algorithm, "final_mean_error": a.final_mean_error }))
                .collect();
            print_json(&json!({ "csv": summary.csv, "algorithms": finals }))
        }
        Command::LearnIndex(args) => {
            let cfg = args.resolve()?;
            let report = run_index_learning(&cfg, args.force)?;
            let runs: Vec<_> = report
                .runs
                .iter()
                .map(|r| {
                    json!({
                        "algorithm": r.algorithm,
                        "seed": r.seed,
                        "converged": r.converged,
                        "phases": r.phases,
                        "max_abs_error": r.max_abs_error,
                    })
                })
                .collect();
            print_json(&json!({
                "csv": report.csv,
                "indices": cfg.output_dir.join(format!("{}_indices.json", cfg.experiment)),
                "oracle": report.oracle,
                "runs": runs,
            }))
        }
        Command::Simulate {
            instance,
            policy,
            seed,
            replications,
            tolerance,
            out,
            force,
        } => simulate(&instance, &policy, seed, replications, tolerance, out.as_deref(), force),
    }
}

fn simulate(
    instance_path: &Path,
    policy: &str,
    seed: u64,
    replications: usize,
    tolerance: f64,
    out: Option<&Path>,
    force: bool,
) -> Result<(), ExperimentError> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(ExperimentError::Config(format!("tolerance {tolerance} must be positive")));
    }
    let instance = RmabInstance::load(instance_path)?;
    let settings = SimulationSettings {
        arms: instance.num_arms(),
        plays_per_slot: instance.plays_per_slot(),
        replications,
        tolerance,
    };
    let rows = match policy {
        "oracle" => {
            let spec = oracle_policy(&instance)?;
            single_policy(&instance, "oracle", spec, &settings, seed)?
        }
        "random" => single_policy(&instance, "random", PolicySpec::RandomM, &settings, seed)?,
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentError::MissingIndex(format!("{path}: {e}")))?;
            if let Ok(spec) = serde_json::from_str::<PolicySpec>(&text) {
                single_policy(&instance, spec.name(), spec, &settings, seed)?
            } else {
                let report = IndexReport::load(path)?;
                compare_policies(&instance, Some(&report), &settings, seed)?
            }
        }
    };
    let run_info = json!({
        "instance": instance_path,
        "policy": policy,
        "seed": seed,
        "replications": replications,
        "tolerance": tolerance,
        "horizon": truncation_horizon(instance.discount(), instance.max_abs_reward(), tolerance),
    });
    let mut buf = Vec::new();
    write_policy_csv(&mut buf, &run_info.to_string(), &rows).expect("writing to memory");
    emit(out, force, &String::from_utf8(buf).expect("CSV is UTF-8"))?;
    if out.is_some() {
        for r in &rows {
            eprintln!(
                "{}: {} ± {}",
                r.policy,
                format_value(r.evaluation.mean),
                format_value(r.evaluation.half_width)
            );
        }
    }
    Ok(())
}

fn single_policy(
    instance: &RmabInstance,
    name: &str,
    spec: PolicySpec,
    settings: &SimulationSettings,
    seed: u64,
) -> Result<Vec<PolicyRow>, ExperimentError> {
    evaluate_policies(instance, &[(name.to_string(), spec)], settings, seed)
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn print_json(value: &serde_json::Value) -> Result<(), ExperimentError> {
    emit(None, false, &pretty(value))
}

/// Writes `text` to `out`, or stdout when `out` is `None`.
fn emit(out: Option<&Path>, force: bool, text: &str) -> Result<(), ExperimentError> {
    let io_err = |p: &Path, e: io::Error| ExperimentError::Io(format!("{}: {e}", p.display()));
    match out {
        Some(path) => {
            if path.exists() && !force {
                return Err(ExperimentError::OutputExists(path.to_path_buf()));
            }
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            }
            let mut f = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
            f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| io_err(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}
