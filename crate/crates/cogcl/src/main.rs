//! Command-line driver for the training engine.
//!
//! Subcommands: `prepare`, `train`, `evaluate`, `export-embeddings`,
//! `export-codes`, `analyze`, `dump-graph`. Exit codes: 0 ok, 1 runtime
//! failure, 2 usage error. `COGCL_THREADS` caps worker threads.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use cogcl::config::{AnalysisVariant, Mode, TrainConfig};
use cogcl::data::{self, InputFormat, Split};
use cogcl::error::Error;
use cogcl::graph::{self, AugmentOp};
use cogcl::quantizer::{self, Side};
use cogcl::{compute, eval, trainer};

#[derive(Parser)]
#[command(name = "cogcl", version, about = "Discrete-code graph contrastive learning for collaborative filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a raw interaction log: k-core filter, split, persist.
    Prepare(PrepareArgs),
    /// Train a model on a prepared dataset.
    Train(TrainArgs),
    /// Full-ranking evaluation of a checkpoint.
    Evaluate(EvaluateArgs),
    /// Write base-view user/item embeddings as TSV.
    ExportEmbeddings(ExportArgs),
    /// Write per-entity discrete codes as TSV.
    ExportCodes(ExportArgs),
    /// Train a gradient-stop ablation variant alongside the unmodified run.
    Analyze(AnalyzeArgs),
    /// Dump the base or an augmented graph as an edge-list TSV.
    DumpGraph(DumpGraphArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Raw interaction log (TSV or CSV).
    #[arg(long)]
    input: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// k-core threshold applied to users and items.
    #[arg(long, default_value_t = 5)]
    k_core: usize,
    /// Train fraction.
    #[arg(long, default_value_t = 0.8)]
    train_ratio: f64,
    /// Validation fraction.
    #[arg(long, default_value_t = 0.1)]
    valid_ratio: f64,
    /// Test fraction.
    #[arg(long, default_value_t = 0.1)]
    test_ratio: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Clone)]
struct ConfigOverrides {
    /// TOML config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    num_levels: Option<usize>,
    #[arg(long)]
    codebook_size: Option<usize>,
    /// Quantization scheme: rq or pq.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    p_replace: Option<f64>,
    #[arg(long)]
    p_add: Option<f64>,
    #[arg(long)]
    dropout_rate: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training mode: cogcl or lightgcn_baseline.
    #[arg(long)]
    mode: Option<String>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<TrainConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::from_toml_file(path)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            epochs, batch_size, embed_dim, num_layers, num_levels, codebook_size, tau, lambda,
            mu, eta, p_replace, p_add, dropout_rate, lr, weight_decay, patience, seed
        );
        if let Some(s) = &self.scheme {
            cfg.scheme = match s.as_str() {
                "rq" => quantizer::QuantScheme::Rq,
                "pq" => quantizer::QuantScheme::Pq,
                other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
            };
        }
        if let Some(m) = &self.mode {
            cfg.mode = Mode::from_str(m)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Prepared dataset directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Run directory for logs, config echo and checkpoints.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Split to evaluate: valid or test.
    #[arg(long, default_value = "test")]
    split: String,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Run directory; the variant and baseline land in subdirectories.
    #[arg(long)]
    out: PathBuf,
    /// One of: wo_A, wo_U, wo_AA, wo_AU, wo_SA, wo_SU.
    #[arg(long)]
    variant: String,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct DumpGraphArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint to derive codes from; omitting it dumps the base graph.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Augmentation operator: replace or add.
    #[arg(long, default_value = "replace")]
    operator: String,
    /// Sampling probability for the chosen operator.
    #[arg(long, default_value_t = 0.3)]
    probability: f64,
    /// Epoch stamp mixed into the sampling seed.
    #[arg(long, default_value_t = 0)]
    epoch: u64,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

/// Errors that indicate misuse of the command line rather than a runtime
/// failure.
fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn require_exists(path: &Path, what: &str) -> Result<(), String> {
    if path.exists() {
        Ok(())
    } else {
        Err(format!("{what} not found: {}", path.display()))
    }
}

fn run_prepare(args: &PrepareArgs) -> Result<(), Error> {
    let format = match args.format.as_deref() {
        None => InputFormat::from_path(&args.input),
        Some("tsv") => InputFormat::Tsv,
        Some("csv") => InputFormat::Csv,
        Some(other) => return Err(Error::Config(format!("unknown format `{other}`"))),
    };
    let raw = data::load_interactions(&args.input, format)?;
    println!(
        "loaded {} records ({} malformed lines skipped)",
        raw.len(),
        raw.malformed_lines
    );
    let filtered = data::k_core_filter(raw, args.k_core, args.k_core)?;
    let ds = data::split_dataset(
        &filtered,
        (args.train_ratio, args.valid_ratio, args.test_ratio),
        args.seed,
    )?;
    data::save_dataset(&ds, &args.out)?;
    println!("dataset statistics:");
    println!("  #Users        {:>12}", ds.num_users);
    println!("  #Items        {:>12}", ds.num_items);
    println!("  #Interactions {:>12}", ds.num_interactions());
    println!("  Sparsity      {:>11.3}%", ds.sparsity() * 100.0);
    println!(
        "  splits: {} train / {} valid / {} test",
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );
    println!("saved to {}", args.out.display());
    Ok(())
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let cfg = args.overrides.resolve()?;
    let ds = data::load_dataset(&args.dataset)?;
    let outcome = trainer::train(&ds, &cfg, Some(&args.out))?;
    match outcome.best_epoch {
        Some(e) => println!(
            "best epoch {e}: valid NDCG@10 = {:.4}",
            outcome.best_valid_ndcg10
        ),
        None => println!("no epochs ran"),
    }
    println!("checkpoints and logs in {}", args.out.display());
    Ok(())
}

fn load_eval_inputs(
    dataset: &Path,
    checkpoint: &Path,
    overrides: &ConfigOverrides,
) -> Result<(data::InteractionDataset, compute::ParameterStore<f32>, TrainConfig), Error> {
    let ds = data::load_dataset(dataset)?;
    let store = compute::load_checkpoint::<f32>(checkpoint)?;
    // Default the config to the one echoed next to the checkpoint.
    let mut overrides = overrides.clone();
    if overrides.config.is_none() {
        if let Some(dir) = checkpoint.parent() {
            let echoed = dir.join("config.toml");
            if echoed.exists() {
                overrides.config = Some(echoed);
            }
        }
    }
    let cfg = overrides.resolve()?;
    Ok((ds, store, cfg))
}

fn run_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let split = match args.split.as_str() {
        "valid" => Split::Valid,
        "test" => Split::Test,
        other => return Err(Error::Config(format!("unknown split `{other}`"))),
    };
    let (ds, store, cfg) = load_eval_inputs(&args.dataset, &args.checkpoint, &args.overrides)?;
    let base_graph = graph::build_base_graph(&ds);
    let (users_m, items_m) = trainer::base_view_embeddings(&store, &base_graph, cfg.num_layers)?;
    let metrics = eval::full_rank_evaluate(&users_m, &items_m, &ds, split, &trainer::EVAL_CUTOFFS)?;
    for &n in &metrics.cutoffs {
        for (metric, value) in [("recall", metrics.recall_at(n)), ("ndcg", metrics.ndcg_at(n))] {
            println!(
                "{}",
                serde_json::json!({
                    "split": split.name(), "metric": metric, "n": n, "value": value
                })
            );
        }
    }
    let groups = eval::sparsity_group_report(&metrics, 5)?;
    for g in &groups {
        println!(
            "{}",
            serde_json::json!({
                "split": split.name(), "metric": "ndcg", "n": 10,
                "value": g.ndcg[&10], "group": g.group,
                "users": g.num_users, "degrees": [g.min_degree, g.max_degree]
            })
        );
    }
    Ok(())
}

fn run_export_embeddings(args: &ExportArgs) -> Result<(), Error> {
    use std::io::Write;
    let (ds, store, cfg) = load_eval_inputs(&args.dataset, &args.checkpoint, &args.overrides)?;
    let base_graph = graph::build_base_graph(&ds);
    let (users_m, items_m) = trainer::base_view_embeddings(&store, &base_graph, cfg.num_layers)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (name, m) in [("user_embeddings.tsv", &users_m), ("item_embeddings.tsv", &items_m)] {
        let path = args.out.join(name);
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?,
        );
        for (idx, row) in m.rows().into_iter().enumerate() {
            write!(f, "{idx}").map_err(|e| Error::io(&path, e))?;
            for v in row {
                write!(f, "\t{v}").map_err(|e| Error::io(&path, e))?;
            }
            writeln!(f).map_err(|e| Error::io(&path, e))?;
        }
    }
    println!("wrote embeddings to {}", args.out.display());
    Ok(())
}

fn run_export_codes(args: &ExportArgs) -> Result<(), Error> {
    use std::io::Write;
    let (ds, store, cfg) = load_eval_inputs(&args.dataset, &args.checkpoint, &args.overrides)?;
    if !store.contains(&quantizer::codebook_name(Side::User, 0)) {
        return Err(Error::Config(
            "checkpoint carries no codebooks (trained in baseline mode?)".into(),
        ));
    }
    let base_graph = graph::build_base_graph(&ds);
    let codes = quantizer::refresh_codes(
        &store,
        &base_graph,
        &cfg.encoder_config(),
        &cfg.quantizer_config(),
        0,
    )?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (name, m) in [("user_codes.tsv", &codes.user_codes), ("item_codes.tsv", &codes.item_codes)] {
        let path = args.out.join(name);
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?,
        );
        for (idx, row) in m.rows().into_iter().enumerate() {
            write!(f, "{idx}").map_err(|e| Error::io(&path, e))?;
            for v in row {
                write!(f, "\t{v}").map_err(|e| Error::io(&path, e))?;
            }
            writeln!(f).map_err(|e| Error::io(&path, e))?;
        }
    }
    println!("wrote codes to {}", args.out.display());
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let variant = AnalysisVariant::from_str(&args.variant)?;
    let ds = data::load_dataset(&args.dataset)?;
    let base_cfg = args.overrides.resolve()?;
    let mut variant_cfg = base_cfg.clone();
    variant.apply(&mut variant_cfg);

    println!("training unmodified run...");
    let base_outcome = trainer::train(&ds, &base_cfg, Some(&args.out.join("base")))?;
    println!("training variant {}...", variant.name());
    let var_outcome = trainer::train(&ds, &variant_cfg, Some(&args.out.join(variant.name())))?;

    let report = |label: &str, outcome: &trainer::TrainOutcome| -> Result<(), Error> {
        let base_graph = graph::build_base_graph(&ds);
        let (u, i) =
            trainer::base_view_embeddings(&outcome.store, &base_graph, base_cfg.num_layers)?;
        let m = eval::full_rank_evaluate(&u, &i, &ds, Split::Test, &trainer::EVAL_CUTOFFS)?;
        println!(
            "{}",
            serde_json::json!({
                "run": label,
                "recall@10": m.recall_at(10), "ndcg@10": m.ndcg_at(10),
                "recall@20": m.recall_at(20), "ndcg@20": m.ndcg_at(20),
            })
        );
        Ok(())
    };
    report("base", &base_outcome)?;
    report(variant.name(), &var_outcome)?;
    Ok(())
}

fn run_dump_graph(args: &DumpGraphArgs) -> Result<(), Error> {
    let ds = data::load_dataset(&args.dataset)?;
    match &args.checkpoint {
        None => {
            let g = graph::build_base_graph(&ds);
            g.dump_edge_list(&args.out)?;
            println!("dumped base graph ({} nodes, {} nnz)", g.num_nodes(), g.nnz());
        }
        Some(ckpt) => {
            let operator = match args.operator.as_str() {
                "replace" => AugmentOp::Replace,
                "add" => AugmentOp::Add,
                other => return Err(Error::Config(format!("unknown operator `{other}`"))),
            };
            let (ds, store, cfg) = load_eval_inputs(&args.dataset, ckpt, &args.overrides)?;
            let base_graph = graph::build_base_graph(&ds);
            let codes = quantizer::refresh_codes(
                &store,
                &base_graph,
                &cfg.encoder_config(),
                &cfg.quantizer_config(),
                args.epoch,
            )?;
            let edges = graph::build_augmented_edges(
                &ds,
                &codes,
                args.probability,
                operator,
                compute::mix_seed(cfg.seed, args.epoch),
            );
            let g = graph::edges_to_graph(&ds, &codes, &edges);
            g.dump_edge_list(&args.out)?;
            println!(
                "dumped {} graph ({} nodes, {} nnz)",
                operator.name(),
                g.num_nodes(),
                g.nnz()
            );
        }
    }
    Ok(())
}

fn configure_threads() {
    if let Ok(v) = std::env::var("COGCL_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads();
    let cli = Cli::parse();

    // Up-front input checks map to usage errors (exit 2).
    let precheck = match &cli.command {
        Command::Prepare(a) => require_exists(&a.input, "input file"),
        Command::Train(a) => require_exists(&a.dataset, "dataset directory"),
        Command::Evaluate(a) => require_exists(&a.dataset, "dataset directory")
            .and_then(|_| require_exists(&a.checkpoint, "checkpoint")),
        Command::ExportEmbeddings(a) | Command::ExportCodes(a) => {
            require_exists(&a.dataset, "dataset directory")
                .and_then(|_| require_exists(&a.checkpoint, "checkpoint"))
        }
        Command::Analyze(a) => require_exists(&a.dataset, "dataset directory").and_then(|_| {
            AnalysisVariant::from_str(&a.variant)
                .map(|_| ())
                .map_err(|e| e.to_string())
        }),
        Command::DumpGraph(a) => require_exists(&a.dataset, "dataset directory").and_then(|_| {
            match &a.checkpoint {
                Some(c) => require_exists(c, "checkpoint"),
                None => Ok(()),
            }
        }),
    };
    if let Err(msg) = precheck {
        return usage_error(&msg);
    }

    let result = match &cli.command {
        Command::Prepare(a) => run_prepare(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::ExportEmbeddings(a) => run_export_embeddings(a),
        Command::ExportCodes(a) => run_export_codes(a),
        Command::Analyze(a) => run_analyze(a),
        Command::DumpGraph(a) => run_dump_graph(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => usage_error(&e.to_string()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
