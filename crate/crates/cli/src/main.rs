use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use grepctx::bench::{run_bench, DEFAULT_BENCH_SEED};
use grepctx::eval::{load_gold, load_predictions, run_eval, run_sweep, EvalInputs, SweepParam, TaskFile};
use grepctx::{CompletionTask, Mode, Pipeline, PipelineConfig, GENERATOR_ENV};

#[derive(Parser)]
#[command(name = "grepctx", version, about = "Index-free lexical retrieval for repository-level code completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file; keys match the pipeline parameter names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured mode.
    #[arg(long)]
    mode: Option<Mode>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        Ok(cfg)
    }
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    repo_root: PathBuf,
    /// Task JSONL file.
    #[arg(long)]
    tasks: PathBuf,
    /// Golden-context JSONL file.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predictions JSONL file (`task_id`, `prediction`).
    #[arg(long)]
    predictions: Option<PathBuf>,
}

impl EvalArgs {
    fn inputs(&self) -> Result<EvalInputs> {
        Ok(EvalInputs {
            repo_root: self.repo_root.clone(),
            tasks: TaskFile::load(&self.tasks)?,
            gold: self.gold.as_deref().map(load_gold).transpose()?,
            predictions: self.predictions.as_deref().map(load_predictions).transpose()?,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Retrieve a context pack for one completion task.
    Retrieve {
        #[arg(long)]
        repo: PathBuf,
        /// Task as inline JSON, a path to a JSON file, or `-` for stdin.
        #[arg(long)]
        task: String,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a task file; writes results.jsonl, latency.jsonl and
    /// summary.json to `--out`, or results to stdout and the summary to stderr.
    Eval {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Time retrieval on generated repositories of the given line counts.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_BENCH_SEED)]
        seed: u64,
        /// Repetitions of the fixed task set per size.
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-run evaluation once per parameter value; prints one JSON summary row per value.
    Sweep {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn env_endpoint() -> Option<String> {
    std::env::var(GENERATOR_ENV).ok()
}

fn read_task(arg: &str) -> Result<CompletionTask> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading task from stdin")?;
        s
    } else if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading task file {arg}"))?
    };
    serde_json::from_str(text.trim()).context("parsing task JSON")
}

fn retrieve(repo: &Path, task: &str, format: Format, cfg: PipelineConfig) -> Result<()> {
    let task = read_task(task)?;
    let generator = cfg.query_generator(env_endpoint().as_deref())?;
    let pipeline = Pipeline::new(cfg, generator)?;
    let (_, outcome) = pipeline.retrieve_from_disk(repo, &task)?;
    let mut stdout = std::io::stdout().lock();
    match format {
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&outcome)?)?,
        Format::Text => {
            if outcome.retrieval_empty {
                eprintln!("retrieval_empty: no queries or no matches");
            }
            write!(stdout, "{}", outcome.pack.rendered)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Retrieve { repo, task, format, config } => retrieve(&repo, &task, format, config.load()?),
        Command::Eval { eval, out, config } => {
            let cfg = config.load()?;
            let generator = cfg.query_generator(env_endpoint().as_deref())?;
            let run = run_eval(&eval.inputs()?, &cfg, generator)?;
            match out {
                Some(dir) => run.write_to(&dir)?,
                None => {
                    print!("{}", run.results_jsonl());
                    eprintln!("{}", serde_json::to_string_pretty(&run.summary)?);
                }
            }
            Ok(())
        }
        Command::Bench { sizes, seed, rounds, json, config } => {
            let rows = run_bench(&sizes, &config.load()?, seed, rounds)?;
            if json {
                for row in &rows {
                    println!("{}", serde_json::to_string(row)?);
                }
            } else {
                println!("{:>10} {:>10} {:>14} {:>14}", "lines", "tasks", "retrieval_s", "querygen_s");
                for r in &rows {
                    println!(
                        "{:>10} {:>10} {:>14.4} {:>14.6}",
                        r.lines, r.tasks, r.mean_retrieval_seconds, r.mean_generation_seconds
                    );
                }
            }
            Ok(())
        }
        Command::Sweep { eval, param, values, config } => {
            if values.is_empty() {
                bail!("--values is empty");
            }
            let cfg = config.load()?;
            let generator = cfg.query_generator(env_endpoint().as_deref())?;
            for row in run_sweep(&eval.inputs()?, &cfg, generator, param, &values)? {
                println!("{}", serde_json::to_string(&row)?);
            }
            Ok(())
        }
    }
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(2)
        }
    }
}
