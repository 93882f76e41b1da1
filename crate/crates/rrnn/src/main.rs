use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrnn::config::RunConfig;
use rrnn::experiment::{aggregate_runs, init_model, resolve_lambda, run_search, sibling, DataBundle, RunSummary};
use rrnn::model_io::{load_model, read_json, save_model, write_json};
use rrnn::render::{emit_tradeoff_csv, render_pattern_table, render_pattern_tsv};
use rrnn::synth::synth_generate;
use rrnn::{Error, Result};
use rrnn_core::phrases::{orient_by_classifier, top_bottom_phrases};
use rrnn_core::prune::{count_transitions, prune, PruneReport};
use rrnn_core::search::SearchStep;
use rrnn_core::train::{
    accuracy, three_stage_pipeline_with_clock, train_with_clock, PipelineOutcome, TrainHistory,
};
use rrnn_core::{PrunedStructure, RationalModel};
use serde::Serialize;

/// Train, prune and inspect sparse rational RNNs.
#[derive(Parser)]
#[command(name = "rrnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for data generation, initialization and training.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DataArgs {
    /// Directory with train.tsv, dev.tsv, optional test.tsv and embeddings.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Embedding file, if not the one inside the data directory.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-pattern dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage 1: train with the group-lasso penalty.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Penalty strength; defaults to the configured value, else the balanced one.
        #[arg(long)]
        lambda: Option<f64>,
        /// Model file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage 2: remove states whose group norm is below epsilon.
    Prune {
        #[command(flatten)]
        common: Common,
        /// Model file to read.
        #[arg(long)]
        model: PathBuf,
        /// Group-norm threshold below which a state is removed.
        #[arg(long)]
        epsilon: Option<f64>,
        /// File to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage 3: retrain a pruned model without the penalty.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Model file to read.
        #[arg(long)]
        model: PathBuf,
        /// File to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All three stages.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Penalty strength; defaults to the configured value, else the balanced one.
        #[arg(long)]
        lambda: Option<f64>,
        /// Group-norm threshold below which a state is removed.
        #[arg(long)]
        epsilon: Option<f64>,
        /// File to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search the penalty strength for a target number of transitions, then finetune.
    Search {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Target number of surviving transitions.
        #[arg(long)]
        goal_transitions: Option<usize>,
        /// Starting strength; defaults to the configured or balanced one.
        #[arg(long)]
        lambda: Option<f64>,
        /// Group-norm threshold below which a state is removed.
        #[arg(long)]
        epsilon: Option<f64>,
        /// File to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the top and bottom scoring phrases of every WFSA.
    Visualize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Model file to read.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        #[arg(long, value_enum, default_value_t = SplitName::Train)]
        split: SplitName,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        /// Keep raw WFSA score signs instead of orienting every WFSA so
        /// that its top phrases favor the positive class.
        #[arg(long)]
        raw: bool,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate run summaries into accuracy-versus-transitions CSV.
    Tradeoff {
        /// Summary files written by `pipeline` or `search`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// File to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Dev,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Tsv,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.train.seed = seed;
        config.synth.seed = seed;
    }
    Ok(config)
}

fn data_dir(config: &RunConfig, args: &DataArgs) -> Result<PathBuf> {
    args.data
        .clone()
        .or_else(|| config.paths.data.clone())
        .ok_or_else(|| Error::Config("no data directory given (--data or paths.data)".into()))
}

fn load_data(config: &RunConfig, args: &DataArgs) -> Result<DataBundle> {
    let dir = data_dir(config, args)?;
    let embeddings = args.embeddings.clone().or_else(|| config.paths.embeddings.clone());
    DataBundle::load(&dir, embeddings.as_deref(), config.data.min_tokens)
}

fn out_path(config: &RunConfig, out: Option<PathBuf>, default: &str) -> PathBuf {
    out.or_else(|| config.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn clock() -> impl Fn() -> f64 {
    let start = Instant::now();
    move || start.elapsed().as_secs_f64()
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct PruneFile<'a> {
    structure: &'a PrunedStructure,
    report: &'a PruneReport,
}

#[derive(Serialize)]
struct PipelineHistory<'a> {
    regularized: &'a TrainHistory,
    finetune: Option<&'a TrainHistory>,
}

#[derive(Serialize)]
struct SearchLog {
    goal_transitions: usize,
    tolerance: usize,
    converged: bool,
    lambda: Option<f64>,
    draw: Option<usize>,
    steps: Vec<SearchStep>,
    failures: Vec<(usize, String)>,
}

fn summary(
    method: &str,
    setting: String,
    config: &RunConfig,
    lambda: f64,
    structure: &PrunedStructure,
    model: &RationalModel,
    data: &DataBundle,
) -> Result<RunSummary> {
    let dev_accuracy = accuracy(model, &data.dev.examples)?;
    Ok(RunSummary {
        method: method.into(),
        setting,
        seed: config.train.seed,
        lambda,
        epsilon: config.penalty.epsilon,
        structure: structure.clone(),
        transitions: count_transitions(structure),
        dev_accuracy,
        test_accuracy: data.test_accuracy(model)?,
    })
}

fn finetune_model(
    config: &RunConfig,
    data: &DataBundle,
    model: RationalModel,
) -> Result<(RationalModel, Option<TrainHistory>)> {
    if model.num_wfsas() == 0 {
        log::warn!("every WFSA was removed; nothing to finetune");
        return Ok((model, None));
    }
    let (model, history) = train_with_clock(
        model,
        &data.train.examples,
        &data.dev.examples,
        &config.train,
        0.0,
        &clock(),
    )?;
    Ok((model, Some(history)))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, out } => {
            let config = load_config(&common)?;
            let data = synth_generate(&config.synth)?;
            data.write_to_dir(&out)?;
            println!(
                "wrote {} train, {} dev, {} test documents and {} embeddings to {}",
                data.train.len(),
                data.dev.len(),
                data.test.len(),
                data.embeddings.len(),
                out.display()
            );
        }
        Command::Train {
            common,
            data,
            lambda,
            out,
        } => {
            let mut config = load_config(&common)?;
            config.penalty.lambda = lambda.or(config.penalty.lambda);
            let data = load_data(&config, &data)?;
            let initial = init_model(&config, data.embeddings.dim())?;
            let lambda = resolve_lambda(&config, &initial, &data.train.examples)?;
            let (model, history) = train_with_clock(
                initial,
                &data.train.examples,
                &data.dev.examples,
                &config.train,
                lambda,
                &clock(),
            )?;
            let out = out_path(&config, out, "model.json");
            ensure_parent(&out)?;
            save_model(&out, &model)?;
            write_json(&sibling(&out, "history"), &history)?;
            let best = history.best().expect("at least one epoch");
            println!(
                "lambda={lambda:e} best_epoch={} dev_accuracy={:.4} transitions={}",
                best.epoch, best.dev_accuracy, best.surviving_transitions
            );
        }
        Command::Prune {
            common,
            model,
            epsilon,
            out,
        } => {
            let config = load_config(&common)?;
            let epsilon = epsilon.unwrap_or(config.penalty.epsilon);
            let fitted = load_model(&model)?;
            let (structure, compact, report) = prune(&fitted, epsilon);
            let out = out_path(&config, out, "pruned.json");
            ensure_parent(&out)?;
            save_model(&out, &compact)?;
            write_json(
                &sibling(&out, "report"),
                &PruneFile {
                    structure: &structure,
                    report: &report,
                },
            )?;
            println!(
                "epsilon={epsilon} transitions {} -> {} structure={:?}",
                report.transitions_before, report.transitions_after, structure.surviving_states
            );
        }
        Command::Finetune {
            common,
            data,
            model,
            out,
        } => {
            let config = load_config(&common)?;
            let data = load_data(&config, &data)?;
            let model = load_model(&model)?;
            data.check_model(&model)?;
            let (model, history) = finetune_model(&config, &data, model)?;
            let out = out_path(&config, out, "finetuned.json");
            ensure_parent(&out)?;
            save_model(&out, &model)?;
            if let Some(history) = &history {
                write_json(&sibling(&out, "history"), history)?;
            }
            println!("dev_accuracy={:.4}", accuracy(&model, &data.dev.examples)?);
        }
        Command::Pipeline {
            common,
            data,
            lambda,
            epsilon,
            out,
        } => {
            let mut config = load_config(&common)?;
            config.penalty.lambda = lambda.or(config.penalty.lambda);
            config.penalty.epsilon = epsilon.unwrap_or(config.penalty.epsilon);
            let data = load_data(&config, &data)?;
            let initial = init_model(&config, data.embeddings.dim())?;
            let lambda = resolve_lambda(&config, &initial, &data.train.examples)?;
            let result = three_stage_pipeline_with_clock(
                initial,
                &data.train.examples,
                &data.dev.examples,
                &config.train,
                lambda,
                config.penalty.epsilon,
                &clock(),
            )?;
            if result.outcome == PipelineOutcome::AllStatesRemoved {
                log::warn!("every WFSA was removed at lambda={lambda:e}");
            }
            let out = out_path(&config, out, "model.json");
            ensure_parent(&out)?;
            save_model(&out, &result.model)?;
            write_json(
                &sibling(&out, "history"),
                &PipelineHistory {
                    regularized: &result.regularized,
                    finetune: result.finetune.as_ref(),
                },
            )?;
            write_json(
                &sibling(&out, "report"),
                &PruneFile {
                    structure: &result.structure,
                    report: &result.report,
                },
            )?;
            let summary = summary(
                "sparse",
                format!("lambda={lambda:e}"),
                &config,
                lambda,
                &result.structure,
                &result.model,
                &data,
            )?;
            write_json(&sibling(&out, "summary"), &summary)?;
            print_summary(&summary);
        }
        Command::Search {
            common,
            data,
            goal_transitions,
            lambda,
            epsilon,
            out,
        } => {
            let mut config = load_config(&common)?;
            config.penalty.lambda = lambda.or(config.penalty.lambda);
            config.penalty.epsilon = epsilon.unwrap_or(config.penalty.epsilon);
            if let Some(goal) = goal_transitions {
                config.search.goal_transitions = goal;
            }
            config.validate()?;
            let data = load_data(&config, &data)?;
            let initial = init_model(&config, data.embeddings.dim())?;
            let lambda = resolve_lambda(&config, &initial, &data.train.examples)?;
            let out = out_path(&config, out, "model.json");
            ensure_parent(&out)?;
            let log_path = sibling(&out, "search");
            let outcome = match run_search(&config, &data, &initial, lambda) {
                Ok(outcome) => outcome,
                Err(Error::Search(failure)) => {
                    write_json(
                        &log_path,
                        &SearchLog {
                            goal_transitions: failure.goal,
                            tolerance: failure.tolerance,
                            converged: false,
                            lambda: None,
                            draw: None,
                            steps: failure.steps.clone(),
                            failures: failure.failures.iter().map(|(d, f)| (*d, format!("{f:?}"))).collect(),
                        },
                    )?;
                    return Err(Error::Search(failure));
                }
                Err(e) => return Err(e),
            };
            write_json(
                &log_path,
                &SearchLog {
                    goal_transitions: config.search.goal_transitions,
                    tolerance: config.search.tolerance,
                    converged: true,
                    lambda: Some(outcome.lambda),
                    draw: Some(outcome.draw),
                    steps: outcome.steps.clone(),
                    failures: outcome.failures.iter().map(|(d, f)| (*d, format!("{f:?}"))).collect(),
                },
            )?;
            let mut final_config = config.clone();
            final_config.train = outcome.model.config.clone();
            let (model, finetune) = finetune_model(&final_config, &data, outcome.model.compact.clone())?;
            save_model(&out, &model)?;
            write_json(
                &sibling(&out, "history"),
                &PipelineHistory {
                    regularized: &outcome.model.history,
                    finetune: finetune.as_ref(),
                },
            )?;
            write_json(
                &sibling(&out, "report"),
                &PruneFile {
                    structure: &outcome.structure,
                    report: &outcome.model.report,
                },
            )?;
            let summary = summary(
                "sparse",
                format!("goal={}", config.search.goal_transitions),
                &final_config,
                outcome.lambda,
                &outcome.structure,
                &model,
                &data,
            )?;
            write_json(&sibling(&out, "summary"), &summary)?;
            print_summary(&summary);
        }
        Command::Visualize {
            common,
            data,
            model,
            top_n,
            split,
            format,
            raw,
            out,
        } => {
            let config = load_config(&common)?;
            let data = load_data(&config, &data)?;
            let mut model = load_model(&model)?;
            data.check_model(&model)?;
            if !raw {
                model = orient_by_classifier(&model);
            }
            let split = match split {
                SplitName::Train => &data.train,
                SplitName::Dev => &data.dev,
                SplitName::Test => data
                    .test
                    .as_ref()
                    .ok_or_else(|| Error::Config("the data directory has no test.tsv".into()))?,
            };
            let phrases = top_bottom_phrases(&model, &split.inputs(), top_n)?;
            let docs = split.tokens();
            let table = match format {
                TableFormat::Text => render_pattern_table(model.lengths(), &phrases, &docs),
                TableFormat::Tsv => render_pattern_tsv(model.lengths(), &phrases, &docs),
            };
            emit(out.as_deref(), &table)?;
        }
        Command::Tradeoff { runs, out } => {
            let summaries = runs
                .iter()
                .map(|p| read_json::<RunSummary>(p))
                .collect::<Result<Vec<_>>>()?;
            emit(out.as_deref(), &emit_tradeoff_csv(&aggregate_runs(&summaries)))?;
        }
    }
    Ok(())
}

fn print_summary(s: &RunSummary) {
    let test = s.test_accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    println!(
        "lambda={:e} transitions={} structure={:?} dev_accuracy={:.4} test_accuracy={test}",
        s.lambda, s.transitions, s.structure.surviving_states, s.dev_accuracy
    );
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            ensure_parent(path)?;
            std::fs::write(path, text).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RRNN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
