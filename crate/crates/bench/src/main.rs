use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use lop_bench::spec::load_sources;
use lop_bench::{bench, read_rows, render, BenchError, ExperimentSpec, Format, Metric, Result, RunOptions};
use lop_core::io::{load_dataset, read_lolib_file, save_dataset, Dataset, GeneratorSpec};
use lop_core::solvers::{becker_construct, exact_dp, vns, Budget};
use lop_core::LopInstance;
use lop_model::{Model, RolloutMode};
use lop_train::{active_search, train, ActiveSearchConfig, LogRow, TrainConfig, TrainOptions};
use serde_json::json;

/// Linear ordering problem: classic solvers, neural policy training and
/// benchmark reports.
#[derive(Parser)]
#[command(name = "lop", version)]
struct Cli {
    /// Seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded, bit-reproducible execution.
    #[arg(long, global = true)]
    serial: bool,
    /// Config file (training config or experiment spec, JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (or file, for `report`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Becker,
    Vns,
    Gnn,
    GnnAs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Markdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Gap,
    Time,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory of seeded instances.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Resample weights from this LOLIB file or dataset instead of
        /// drawing uniform weights.
        #[arg(long)]
        subsample: Option<PathBuf>,
    },
    /// Solve one LOLIB instance and print the result as JSON. The printed
    /// ordering uses 1-based item numbers.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverArg,
        /// Model checkpoint for the neural solvers.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// VNS evaluation budget as a multiple of n^2.
        #[arg(long, default_value_t = 1000.0)]
        budget_factor: f64,
        /// VNS wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Active-search epochs for gnn-as.
        #[arg(long, default_value_t = 100)]
        epochs: usize,
    },
    /// Train a policy from a JSON training config (--config).
    Train {
        /// Continue from the last checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Fine-tune a checkpoint on a dataset and keep the best solutions.
    ActiveSearch {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-4)]
        learning_rate: f64,
    },
    /// Run an experiment spec (--config) and write reports into --out.
    Bench,
    /// Render the aggregate table of a report.csv, report.json or run
    /// directory.
    Report {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "gap")]
        metric: MetricArg,
    },
}

fn need<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| BenchError::Spec(format!("--{what} is required")))
}

fn load_instances(path: &Path) -> Result<Vec<LopInstance>> {
    if path.is_dir() {
        Ok(load_dataset(path)?.instances)
    } else {
        Ok(vec![read_lolib_file(path)?])
    }
}

fn cmd_generate(cli: &Cli, n: usize, count: usize, subsample: &Option<PathBuf>) -> Result<i32> {
    let out = need(&cli.out, "out")?;
    let seed = cli.seed.unwrap_or(0);
    let (spec, sources) = match subsample {
        Some(p) => (GeneratorSpec::subsample(n, seed, p.display().to_string()), load_sources(p)?),
        None => (GeneratorSpec::uniform(n, seed), Vec::new()),
    };
    let ds = Dataset::generated(&spec, &sources, count)?;
    save_dataset(&ds, out)?;
    println!("wrote {} instances to {}", ds.len(), out.display());
    Ok(lop_bench::EXIT_OK)
}

fn cmd_solve(cli: &Cli, cmd: &Command) -> Result<i32> {
    let Command::Solve {
        instance,
        solver,
        checkpoint,
        budget_factor,
        time_limit,
        epochs,
    } = cmd
    else {
        unreachable!()
    };
    let inst = read_lolib_file(instance)?;
    let seed = cli.seed.unwrap_or(0);
    let model = || -> Result<Model> { Ok(Model::load(need(checkpoint, "checkpoint")?)?) };
    let started = Instant::now();
    let (label, solution, value, evaluations) = match solver {
        SolverArg::Exact | SolverArg::Becker | SolverArg::Vns => {
            let res = match solver {
                SolverArg::Exact => exact_dp(&inst)?,
                SolverArg::Becker => becker_construct(&inst)?,
                _ => {
                    let n = inst.n() as f64;
                    let budget = Budget::new(
                        Some(budget_factor * n * n),
                        time_limit.map(std::time::Duration::from_secs_f64),
                    )?;
                    vns(&inst, &budget, seed)?
                }
            };
            (res.solver, res.solution, res.value, res.evaluations_used)
        }
        SolverArg::Gnn => {
            let t = model()?.rollout(&inst, RolloutMode::Greedy, 0)?;
            ("GNN".to_string(), t.solution, t.reward, 1.0)
        }
        SolverArg::GnnAs => {
            let cfg = ActiveSearchConfig {
                epochs: *epochs,
                seed,
                ..ActiveSearchConfig::default()
            };
            let res = active_search(model()?, std::slice::from_ref(&inst), &cfg)?;
            let (sol, v) = res.best.into_iter().next().expect("one target");
            ("GNN-AS".to_string(), sol, v, res.rollouts[0] as f64)
        }
    };
    let out = json!({
        "instance": inst.name(),
        "n": inst.n(),
        "solver": label,
        "value": value,
        "evaluations": evaluations,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "solution_one_based": solution.to_one_based(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(lop_bench::EXIT_OK)
}

fn cmd_train(cli: &Cli, resume: bool) -> Result<i32> {
    let path = need(&cli.config, "config")?;
    let out = need(&cli.out, "out")?;
    let text = fs::read_to_string(path)
        .map_err(|e| BenchError::Spec(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: TrainConfig = serde_json::from_str(&text).map_err(|e| BenchError::Spec(e.to_string()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| BenchError::Spec(e.to_string()))?;
    let sources = match &cfg.generator.source {
        Some(p) => load_sources(Path::new(p))?,
        None => Vec::new(),
    };
    let mut progress = |row: &LogRow, valid: f64| {
        eprintln!(
            "epoch {:>4}  reward {:.4}  advantage {:+.4}  loss {:+.5}  validation {:.4}  {:.0}s",
            row.epoch, row.mean_reward, row.mean_advantage, row.loss, valid, row.wall_time_s
        );
    };
    let res = train(
        &cfg,
        out,
        &sources,
        TrainOptions {
            resume,
            progress: Some(&mut progress),
        },
    )?;
    println!(
        "best validation reward {:.4} at epoch {}; checkpoints in {}",
        res.best_validation_reward,
        res.best_epoch,
        out.display()
    );
    Ok(lop_bench::EXIT_OK)
}

fn cmd_active_search(cli: &Cli, cmd: &Command) -> Result<i32> {
    let Command::ActiveSearch {
        checkpoint,
        dataset,
        epochs,
        batch_size,
        learning_rate,
    } = cmd
    else {
        unreachable!()
    };
    let out = need(&cli.out, "out")?;
    let targets = load_instances(dataset)?;
    let cfg = ActiveSearchConfig {
        epochs: *epochs,
        batch_size: *batch_size,
        learning_rate: *learning_rate,
        seed: cli.seed.unwrap_or(0),
        ..ActiveSearchConfig::default()
    };
    let res = active_search(Model::load(checkpoint)?, &targets, &cfg)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("solutions.csv"))?;
    w.write_record(["instance", "n", "greedy_value", "best_value", "solution_one_based"])?;
    for ((inst, (sol, v)), g) in targets.iter().zip(&res.best).zip(&res.initial_greedy) {
        let order: Vec<String> = sol.to_one_based().iter().map(|i| i.to_string()).collect();
        w.write_record([
            inst.name().to_string(),
            inst.n().to_string(),
            g.to_string(),
            v.to_string(),
            order.join(" "),
        ])?;
    }
    w.flush()?;
    res.model.save(out.join("tuned.ckpt"))?;
    let improved = res.best.iter().zip(&res.initial_greedy).filter(|((_, v), g)| v > g).count();
    println!(
        "{} targets, {} improved over greedy; results in {}",
        targets.len(),
        improved,
        out.display()
    );
    Ok(lop_bench::EXIT_OK)
}

fn cmd_bench(cli: &Cli) -> Result<i32> {
    let mut spec = ExperimentSpec::load(need(&cli.config, "config")?)?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let out = need(&cli.out, "out")?;
    let report = bench(spec, out, RunOptions { serial: cli.serial })?;
    print!("{}", lop_bench::render_markdown(&report.rows, Metric::Gap));
    let failures = report.failures();
    if failures > 0 {
        eprintln!("{failures} solver runs failed; see {}", out.join("report.json").display());
        return Ok(lop_bench::EXIT_PARTIAL);
    }
    Ok(lop_bench::EXIT_OK)
}

fn cmd_report(cli: &Cli, path: &Path, format: FormatArg, metric: MetricArg) -> Result<i32> {
    let rows = read_rows(path)?;
    let format = match format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
        FormatArg::Markdown => Format::Markdown,
    };
    let metric = match metric {
        MetricArg::Gap => Metric::Gap,
        MetricArg::Time => Metric::Time,
    };
    let text = render(&rows, format, metric)?;
    match &cli.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(lop_bench::EXIT_OK)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Generate { n, count, subsample } => cmd_generate(cli, *n, *count, subsample),
        cmd @ Command::Solve { .. } => cmd_solve(cli, cmd),
        Command::Train { resume } => cmd_train(cli, *resume),
        cmd @ Command::ActiveSearch { .. } => cmd_active_search(cli, cmd),
        Command::Bench => cmd_bench(cli),
        Command::Report { path, format, metric } => cmd_report(cli, path, *format, *metric),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
