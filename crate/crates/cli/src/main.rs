use anyhow::{bail, Context, Result};
use barnbench::bench::{
    configure_threads, evaluate, report, run_episode, run_experiment, ConstantController, ControllerFactory,
    DwaController, EvalPlan, ExperimentConfig, RunOptions,
};
use barnbench::envgen::{generate_benchmark_set, load_catalog, load_env, save_catalog, EnvKind, EnvironmentSpec};
use barnbench::nn::Checkpoint;
use barnbench::planners::DWAConfig;
use barnbench::rl::TrainedPolicy;
use barnbench::sim::trace::{replay, EpisodeTrace};
use barnbench::sim::{Action, SimConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "barnbench", version, about = "Navigation benchmark: environments, simulator, planners and RL training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the environment catalog and its manifest.
    Generate {
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one episode and optionally store its trace.
    Simulate {
        #[command(flatten)]
        env: EnvArgs,
        #[command(flatten)]
        controller: ControllerArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the episode trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Train and evaluate as described by an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's catalog directory.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Continue a run directory, skipping completed seeds.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a planner or checkpoint on an environment set.
    Evaluate {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        set: String,
        #[command(flatten)]
        controller: ControllerArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        static_episodes: Option<u32>,
        #[arg(long)]
        dynamic_episodes: Option<u32>,
        /// Write the metrics CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-episode records.
        #[arg(long)]
        episodes_out: Option<PathBuf>,
    },
    /// Aggregate run directories into tables and plots.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate a stored trace and check every step.
    Replay { trace: PathBuf },
}

#[derive(Args)]
struct EnvArgs {
    /// Catalog directory (with --env).
    #[arg(long, requires = "env")]
    catalog: Option<PathBuf>,
    /// Environment id within the catalog, or `empty` for an obstacle-free field.
    #[arg(long)]
    env: Option<String>,
    /// A single environment file.
    #[arg(long, conflicts_with_all = ["catalog", "env"])]
    env_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Planner {
    Dwa,
    /// Full speed straight ahead.
    Straight,
}

#[derive(Args)]
struct ControllerArgs {
    #[arg(long, value_enum, conflicts_with = "checkpoint")]
    planner: Option<Planner>,
    /// A policy checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl ControllerArgs {
    fn factory(&self, sim: &SimConfig) -> Result<Box<dyn ControllerFactory>> {
        Ok(match (&self.checkpoint, self.planner) {
            (Some(path), _) => {
                let ck = Checkpoint::load(path)?;
                Box::new(TrainedPolicy::from_checkpoint(&ck).with_context(|| format!("loading {}", path.display()))?)
            }
            (None, Some(Planner::Straight)) => Box::new(ConstantController(Action::new(sim.action_bounds.v_max, 0.0))),
            (None, Some(Planner::Dwa)) | (None, None) => Box::new(DwaController::new(DWAConfig::default())),
        })
    }
}

fn resolve_env(args: &EnvArgs) -> Result<EnvironmentSpec> {
    if let Some(path) = &args.env_file {
        return Ok(load_env(path)?);
    }
    match (&args.catalog, args.env.as_deref()) {
        (_, Some("empty")) | (None, None) => Ok(EnvironmentSpec::empty_field("empty")),
        (Some(dir), Some(id)) => {
            let catalog = load_catalog(dir)?;
            catalog
                .environment(id)
                .cloned()
                .with_context(|| format!("no environment `{id}` in {}", dir.display()))
        }
        (None, Some(id)) => bail!("environment `{id}` needs --catalog"),
        (Some(_), None) => bail!("--catalog needs --env"),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { master_seed, out } => {
            let t = Instant::now();
            let catalog = generate_benchmark_set(master_seed)?;
            let manifest = save_catalog(&out, &catalog)?;
            println!(
                "generated {} static, {} box and {} wall environments in {:.1}s",
                catalog.count(EnvKind::Static),
                catalog.count(EnvKind::DynamicBox),
                catalog.count(EnvKind::DynamicWall),
                t.elapsed().as_secs_f64()
            );
            println!("catalog hash {}", manifest.catalog_hash);
        }
        Command::Simulate {
            env,
            controller,
            seed,
            trace,
        } => {
            let env = resolve_env(&env)?;
            let sim = SimConfig::default();
            let mut c = controller.factory(&sim)?.build(&sim);
            let (rec, tr) = run_episode(&env, c.as_mut(), &sim, seed, EvalPlan::default().gamma, trace.is_some())?;
            println!(
                "{}: {} after {} steps ({:.1} s), return {:.3}",
                env.id, rec.outcome, rec.steps, rec.sim_time, rec.total_reward
            );
            if let (Some(path), Some(tr)) = (trace, tr) {
                let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                tr.write_jsonl(std::io::BufWriter::new(f))?;
                println!("trace written to {}", path.display());
            }
        }
        Command::Train {
            config,
            out,
            catalog,
            resume,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = run_experiment(&cfg, &out, &RunOptions { catalog, resume })?;
            println!("metrics written to {}", dir.join("metrics.csv").display());
        }
        Command::Evaluate {
            catalog,
            set,
            controller,
            seed,
            static_episodes,
            dynamic_episodes,
            out,
            episodes_out,
        } => {
            let cat = load_catalog(&catalog)?;
            let envs = cat.resolve(&set)?;
            let sim = SimConfig::default();
            let mut plan = EvalPlan {
                seed,
                ..EvalPlan::default()
            };
            plan.static_episodes = static_episodes.unwrap_or(plan.static_episodes);
            plan.dynamic_episodes = dynamic_episodes.unwrap_or(plan.dynamic_episodes);
            let factory = controller.factory(&sim)?;
            let (m, records) = evaluate(&envs, factory.as_ref(), &plan, &sim)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "controller", "set", "episodes", "successes", "collisions", "timeouts", "success_rate",
                "mean_survival_time", "mean_traversal_time", "mean_cost_return",
            ])?;
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            w.write_record([
                factory.name(),
                set.clone(),
                m.episodes.to_string(),
                m.successes.to_string(),
                m.collisions.to_string(),
                m.timeouts.to_string(),
                m.success_rate.to_string(),
                opt(m.mean_survival_time),
                opt(m.mean_traversal_time),
                m.mean_cost_return.to_string(),
            ])?;
            write_output(out.as_deref(), &String::from_utf8(w.into_inner()?)?)?;
            if let Some(path) = episodes_out {
                let mut w = csv::Writer::from_path(&path)?;
                for r in &records {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
        }
        Command::Report { runs, out } => {
            let s = report(&runs, &out)?;
            println!("{} cells from {} runs", s.cells, runs.len());
            for f in s.files {
                println!("  {}", f.display());
            }
        }
        Command::Replay { trace } => {
            let f = fs::File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let tr = EpisodeTrace::read_jsonl(BufReader::new(f))?;
            let n = replay(&tr)?;
            println!("OK, {n} steps verified");
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
