use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ttrules::bdd::BddStore;
use ttrules::config::PipelineConfig;
use ttrules::data::{binarize, fit_binarizer, load_csv, Schema, Task};
use ttrules::eval::cross_validate;
use ttrules::io::{read_artifact, write_artifact, ModelBody, RuleSetBody};
use ttrules::net::{
    build_model, collect_patch_support, ternarize_head, train, validation_metric, HeadMode,
};
use ttrules::rules::extract_rules;
use ttrules::ruleset::{optimize_ruleset, verify_exactness};
use ttrules::Error;

#[derive(Parser)]
#[command(
    name = "ttrules",
    version,
    about = "Train truth-table networks on tabular data and extract exactly equivalent rule sets"
)]
struct Cli {
    /// Worker threads for per-filter extraction and per-fold evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,

    /// Override the config's seed (model init, folds, training).
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the correlation-pruning threshold in (0, 1].
    #[arg(long)]
    corr_threshold: Option<f64>,

    /// Also mark training-unseen patches as don't-cares (trades universal
    /// exactness for smaller rules).
    #[arg(long)]
    unseen_dontcare: bool,

    /// Quantize the head to {-1,0,+1} weights after training.
    #[arg(long)]
    ternary_head: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Load, binarize, train; write model.json and binarizer.json.
    Train(ConfigArgs),
    /// Extract, optimize, and verify the rule set of a trained model.
    Extract {
        /// model.json written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corr_threshold: Option<f64>,
        #[arg(long)]
        unseen_dontcare: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-fold cross validation of the whole pipeline.
    Eval {
        #[command(flatten)]
        args: ConfigArgs,
        /// Number of folds.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Render a rule set as text or DOT decision diagrams.
    Export {
        /// ruleset.json written by `extract`.
        #[arg(long)]
        ruleset: PathBuf,
        /// One line per rule.
        #[arg(long)]
        text: bool,
        /// One DOT file per rule plus a combined graph.
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_overrides(config: &mut PipelineConfig, args: &ConfigArgs) {
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.training.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(t) = args.corr_threshold {
        config.corr_threshold = t;
    }
    if args.unseen_dontcare {
        config.dont_care.unseen_patterns = true;
    }
    if args.ternary_head {
        config.head = HeadMode::Ternary;
    }
}

fn display_metric(task: Task, higher_better: f64) -> f64 {
    match task {
        Task::Regression => -higher_better,
        _ => higher_better,
    }
}

fn cmd_train(args: &ConfigArgs) -> Result<(), Error> {
    let mut config = PipelineConfig::from_json_file(&args.config)?;
    apply_overrides(&mut config, args);
    config.validate()?;

    let schema = Schema::from_json_file(&config.schema)?;
    let raw = load_csv(&config.dataset, &schema)?;
    let map = fit_binarizer(&raw)?;
    for warning in &map.warnings {
        log::warn!("{warning}");
    }
    let ds = binarize(&raw, &map, config.task)?;
    log::info!("{} rows, {} bits", ds.n_rows(), ds.total_bits());

    let model = build_model(
        map.total_bits,
        config.architecture.n_filters,
        config.architecture.k,
        config.architecture.hidden_width,
        ds.task,
        config.seed,
    )?;
    let trained = train(&model, &ds, &ds, &config.training)?;
    let model = if config.head == HeadMode::Ternary {
        ternarize_head(&trained.model, &ds)?
    } else {
        trained.model
    };
    let metric = validation_metric(&model, &ds)?;
    println!(
        "val_metric={:.6} ({}) best_epoch={}",
        display_metric(ds.task, metric),
        ttrules::eval::metric_name(ds.task),
        trained.best_epoch
    );

    let config_hash = config.sha256();
    let out_dir = config.out_dir.clone();
    let body = ModelBody {
        config: config.clone(),
        binarizer: map.clone(),
        model,
        best_epoch: trained.best_epoch,
        val_metric: metric,
    };
    write_artifact(
        &out_dir.join("model.json"),
        config.seed,
        &config_hash,
        body,
        None,
    )?;
    write_artifact(
        &out_dir.join("binarizer.json"),
        config.seed,
        &config_hash,
        map,
        None,
    )?;
    println!("wrote {}", out_dir.join("model.json").display());
    Ok(())
}

fn cmd_extract(
    model_path: &Path,
    corr_threshold: Option<f64>,
    unseen_dontcare: bool,
    out: &Option<PathBuf>,
) -> Result<(), Error> {
    let artifact = read_artifact::<ModelBody>(model_path)?;
    let mut config = artifact.body.config.clone();
    if let Some(t) = corr_threshold {
        config.corr_threshold = t;
    }
    if unseen_dontcare {
        config.dont_care.unseen_patterns = true;
    }
    if let Some(dir) = out {
        config.out_dir = dir.clone();
    }
    config.validate()?;

    let schema = Schema::from_json_file(&config.schema)?;
    let raw = load_csv(&config.dataset, &schema)?;
    let map = artifact.body.binarizer.clone();
    let ds = binarize(&raw, &map, config.task)?;
    let model = &artifact.body.model;

    let support = collect_patch_support(model, &ds);
    let ruleset = extract_rules(model, &map, &support, config.dont_care)?;
    let before = ruleset.rules.len();
    let (ruleset, report) = optimize_ruleset(&ruleset, &ds, config.corr_threshold)?;
    let check = verify_exactness(&ruleset, model, &ds)?;

    println!("rules={before} -> {}", ruleset.rules.len());
    println!("agreement={:.6}", check.agreement);
    let lossless = !config.dont_care.unseen_patterns;
    if lossless && check.agreement < 1.0 {
        return Err(Error::Exactness(format!(
            "agreement {:.6} under lossless settings; first mismatch row {:?}, rule {:?}",
            check.agreement, check.first_mismatch_row, check.offending_rule
        )));
    }

    let config_hash = config.sha256();
    let out_dir = config.out_dir.clone();
    write_artifact(
        &out_dir.join("ruleset.json"),
        config.seed,
        &config_hash,
        RuleSetBody::from_ruleset(&ruleset),
        None,
    )?;
    write_artifact(
        &out_dir.join("extract_report.json"),
        config.seed,
        &config_hash,
        serde_json::json!({ "optimization": report, "agreement": check }),
        None,
    )?;
    println!("wrote {}", out_dir.join("ruleset.json").display());
    Ok(())
}

fn cmd_eval(args: &ConfigArgs, k: usize) -> Result<(), Error> {
    let mut config = PipelineConfig::from_json_file(&args.config)?;
    apply_overrides(&mut config, args);
    config.validate()?;

    let schema = Schema::from_json_file(&config.schema)?;
    let raw = load_csv(&config.dataset, &schema)?;
    let summary = cross_validate(&config, &raw, k, config.seed)?;

    let dataset_name = config
        .dataset
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let row = summary.table_row(&dataset_name);
    println!("{row}");

    let config_hash = config.sha256();
    let out_dir = config.out_dir.clone();
    let mut stable = summary.clone();
    stable.fold_seconds = Vec::new();
    write_artifact(
        &out_dir.join("results.json"),
        config.seed,
        &config_hash,
        stable,
        Some(serde_json::json!({ "fold_seconds": summary.fold_seconds })),
    )?;
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("results_table.txt"), format!("{row}\n"))?;
    println!("wrote {}", out_dir.join("results.json").display());
    Ok(())
}

fn cmd_export(
    ruleset_path: &Path,
    text: bool,
    dot: bool,
    out: &Option<PathBuf>,
) -> Result<(), Error> {
    if !text && !dot {
        return Err(Error::Config("export needs --text and/or --dot".into()));
    }
    let artifact = read_artifact::<RuleSetBody>(ruleset_path)?;
    let ruleset = artifact.body.into_ruleset()?;
    let out_dir = out
        .clone()
        .or_else(|| ruleset_path.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    if text {
        let path = out_dir.join("rules.txt");
        std::fs::write(&path, ruleset.to_text())?;
        println!("wrote {} ({} rules)", path.display(), ruleset.rules.len());
    }
    if dot {
        let mut store = BddStore::for_ruleset(&ruleset)?;
        let mut roots = Vec::new();
        for rule in &ruleset.rules {
            let root = store.build_from_dnf(&rule.formula)?;
            let weights = rule
                .weights
                .iter()
                .map(|w| format!("{w:+.4}"))
                .collect::<Vec<_>>()
                .join(",");
            roots.push((format!("{} ({weights})", rule.name), root));
            let dot_text = store.to_dot(root, &rule.name)?;
            std::fs::write(out_dir.join(format!("rule_{}.dot", rule.name)), dot_text)?;
        }
        let combined = store.to_dot_combined(&roots)?;
        std::fs::write(out_dir.join("rules.dot"), combined)?;
        println!(
            "wrote {} DOT files under {}",
            ruleset.rules.len() + 1,
            out_dir.display()
        );
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Param(_) => 2,
        Error::Schema(_)
        | Error::Parse { .. }
        | Error::Value(_)
        | Error::Stratification(_)
        | Error::Metric(_)
        | Error::Integrity(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 3,
        Error::Exactness(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Extract {
            model,
            corr_threshold,
            unseen_dontcare,
            out,
        } => cmd_extract(model, *corr_threshold, *unseen_dontcare, out),
        Command::Eval { args, k } => cmd_eval(args, *k),
        Command::Export {
            ruleset,
            text,
            dot,
            out,
        } => cmd_export(ruleset, *text, *dot, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
