//! Command-line interface: compile specifications, evaluate traces, train
//! policies, and produce sample-complexity reports.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use taskmon::ars::RewardMode;
use taskmon::bench::{self, TrainJob};
use taskmon::compile::{compile_with, CompileOptions};
use taskmon::config::RunConfig;
use taskmon::env::EnvKind;
use taskmon::parser::parse_spec_named;
use taskmon::policy::save_checkpoint;
use taskmon::printer::print_spec;
use taskmon::semantics::{eval_bool, eval_quant, Rollout};
use taskmon::trace::parse_states_trace;

#[derive(Parser)]
#[command(name = "taskmon", version, about = "Task monitors for specification-driven control")]
struct Cli {
    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a specification file into a task monitor.
    Compile {
        spec_file: PathBuf,
        /// Environment whose predicates the specification uses.
        #[arg(long, default_value = "point")]
        env: String,
        /// Output format: `summary` or `dot`.
        #[arg(long, default_value = "summary")]
        emit: String,
    },
    /// Evaluate the Boolean and quantitative semantics of a specification
    /// on a recorded state trace.
    Eval {
        spec_file: PathBuf,
        trace_file: PathBuf,
        #[arg(long, default_value = "point")]
        env: String,
    },
    /// Train a policy for a named benchmark or a specification file.
    Train {
        /// Benchmark name (see `report --list`) or path to a `.spec` file.
        target: String,
        #[arg(long, default_value = "shaped")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training-rollout budget (overrides the benchmark's).
        #[arg(long)]
        budget: Option<u64>,
        /// Output directory for learning-curve CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Environment for `.spec` targets.
        #[arg(long, default_value = "point")]
        env: String,
        /// Write the trained policy checkpoint here.
        #[arg(long)]
        save_policy: Option<PathBuf>,
        /// Dump one rollout of the trained policy as a tab-separated trace.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Samples-to-threshold table over the nested-sequencing benchmarks.
    Report {
        /// Comma-separated satisfaction thresholds in (0,1).
        #[arg(long, default_value = "0.3,0.5,0.7,0.9")]
        thresholds: String,
        /// Comma-separated training seeds.
        #[arg(long, default_value = "0,1,2")]
        seeds: String,
        /// List available benchmarks and exit.
        #[arg(long, default_value_t = false)]
        list: bool,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text)?;
    }

    match cli.command {
        Command::Compile {
            spec_file,
            env,
            emit,
        } => {
            let kind = parse_env(&env)?;
            let (ast, _) = load_spec(&spec_file, kind)?;
            let opts = CompileOptions {
                split_conjuncts: cfg.split_conjuncts,
                sentinel: cfg.sentinel,
            };
            let monitor = compile_with(&ast, &opts);
            let violations = monitor.validate();
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                bail!("compiled monitor failed structural validation");
            }
            match emit.as_str() {
                "dot" => print!("{}", monitor.to_dot()),
                "summary" => {
                    println!("specification: {}", print_spec(&ast));
                    println!(
                        "states: {} (initial q0, finals: {})",
                        monitor.n_states(),
                        monitor
                            .finals()
                            .iter()
                            .map(|q| q.to_string())
                            .collect::<Vec<_>>()
                            .join(", ")
                    );
                    println!(
                        "registers: {} ({})",
                        monitor.n_registers(),
                        monitor
                            .registers()
                            .iter()
                            .map(|r| r.name.clone())
                            .collect::<Vec<_>>()
                            .join(", ")
                    );
                    println!("transitions: {}", monitor.transitions().len());
                    let (depths, max_depth) = monitor.longest_path_depths()?;
                    println!("depths: {depths:?} (D = {max_depth})");
                    for (q, r) in monitor.rewards() {
                        println!("reward at {q}: {r}");
                    }
                }
                other => bail!("unknown emit format `{other}` (expected summary or dot)"),
            }
        }
        Command::Eval {
            spec_file,
            trace_file,
            env,
        } => {
            let kind = parse_env(&env)?;
            let (ast, registry) = load_spec(&spec_file, kind)?;
            let text = std::fs::read_to_string(&trace_file)
                .with_context(|| format!("reading trace {}", trace_file.display()))?;
            let states = parse_states_trace(&text)?;
            let rollout = Rollout::from_states(states)?;
            let sat = eval_bool(&ast, &rollout, &registry);
            println!("satisfied: {sat}");
            match eval_quant(&ast, &rollout, &registry) {
                Ok(q) => println!("robustness: {q}"),
                Err(e) => println!("robustness: undefined ({e})"),
            }
        }
        Command::Train {
            target,
            mode,
            seed,
            budget,
            out,
            env,
            save_policy,
            dump_trace,
        } => {
            let mode = RewardMode::parse(&mode)
                .ok_or_else(|| anyhow!("unknown mode `{mode}` (shaped, unshaped, tltl)"))?;
            if let Some(b) = budget {
                cfg.budget = Some(b);
            }
            let out_dir = out.unwrap_or_else(|| cfg.resolve_out_dir());
            let job = resolve_job(&target, &env, &cfg)?;
            let run = bench::run_job(&job, &cfg, seed, mode, None, Some(&out_dir))?;
            println!(
                "{} [{}] seed {}: {} training rollouts",
                run.name,
                run.mode.name(),
                run.seed,
                run.samples
            );
            println!(
                "final satisfaction estimate: {:.3} over {} rollouts (mean reward {:.4})",
                run.final_satisfaction, cfg.eval_rollouts, run.final_mean_reward
            );
            if let Some(path) = &run.csv_path {
                println!("learning curve: {}", path.display());
            }
            if run.diagnostics.clamped_actions > 0 {
                println!("clamped actions: {}", run.diagnostics.clamped_actions);
            }
            if let Some(path) = save_policy {
                save_checkpoint(&run.policy, &path)?;
                println!("policy checkpoint: {}", path.display());
            }
            if let Some(path) = dump_trace {
                match &run.sample_trace {
                    Some(trace) => {
                        let mut file = std::fs::File::create(&path)?;
                        taskmon::trace::write_augmented_trace(&mut file, trace)?;
                        println!("rollout trace: {}", path.display());
                    }
                    None => eprintln!("no augmented trace to dump in {} mode", run.mode.name()),
                }
            }
        }
        Command::Report {
            thresholds,
            seeds,
            list,
        } => {
            if list {
                for name in bench::benchmark_names() {
                    println!("{name}");
                }
                return Ok(());
            }
            let thresholds = parse_list::<f64>(&thresholds).context("parsing --thresholds")?;
            if thresholds.iter().any(|t| *t <= 0.0 || *t >= 1.0) {
                bail!("thresholds must lie strictly between 0 and 1");
            }
            let seeds = parse_list::<u64>(&seeds).context("parsing --seeds")?;
            let report = bench::sample_complexity_report(&cfg, &thresholds, &seeds)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn parse_env(name: &str) -> Result<EnvKind> {
    EnvKind::parse(name).ok_or_else(|| anyhow!("unknown environment `{name}` (point, cartpole, grid)"))
}

fn load_spec(path: &Path, kind: EnvKind) -> Result<(taskmon::ast::SpecAst, taskmon::predicate::PredicateRegistry)> {
    let registry = kind.registry();
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading specification {}", path.display()))?;
    let name = path.to_string_lossy();
    let ast = parse_spec_named(&text, &name, &registry)?;
    Ok((ast, registry))
}

fn resolve_job(target: &str, env: &str, cfg: &RunConfig) -> Result<TrainJob> {
    if let Some(entry) = bench::find(target) {
        return Ok(TrainJob::from(entry));
    }
    let path = Path::new(target);
    if !path.exists() {
        bail!(
            "`{target}` is neither a benchmark ({}) nor a file",
            bench::benchmark_names().join(", ")
        );
    }
    let kind = parse_env(env)?;
    let (ast, _) = load_spec(path, kind)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spec".to_string());
    // the canonical printed text keeps reruns reproducible regardless of
    // comments or whitespace in the source file
    Ok(TrainJob {
        name,
        spec_text: print_spec(&ast),
        env: kind,
        budget: cfg.budget.unwrap_or(200_000),
        threshold: 0.9,
    })
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow!("bad entry `{s}`: {e}"))
        })
        .collect()
}
