use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use medconsult::bench::{run_bench, BenchError};
use medconsult::chat::{run_chat, ChatError};
use medconsult::config::{Config, ConfigError};
use medconsult::gen_graph::{generate, GraphSpec, SpecError};
use medconsult::generator::HttpGenerator;
use medconsult::loader::{self, LoadError};
use medconsult::service::{self, AppState};
use medconsult::session::{transcript_json, SessionIdGenerator, SnapshotStore, StoreError};
use medconsult_core::dialogue::Generator;
use medconsult_core::kg::{EntityKind, KgError, KnowledgeGraph, LoadOptions};
use medconsult_core::record::RecordError;

#[derive(Parser)]
#[command(name = "medconsult", version, about = "Knowledge-graph grounded medical consultation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Graph directory (CSV tables).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Template table: `en`, `zh` or a file path.
    #[arg(long, global = true)]
    templates: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Consult on stdin/stdout, one patient message per line.
    Chat {
        #[command(flatten)]
        common: Common,
        /// Write the medical record here once the consultation closes.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Write the transcript (JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Echo patient lines into the output (useful when piping a script).
        #[arg(long)]
        echo: bool,
    },
    /// Benchmark symptom selection with simulated patients.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        /// Use a synthetic graph with this many diseases instead of --graph.
        #[arg(long)]
        diseases: Option<usize>,
        #[arg(long, default_value_t = 15)]
        symptoms: usize,
        #[arg(long, default_value_t = 4)]
        per_disease: usize,
        #[arg(long)]
        distinct: bool,
        /// Write the JSON report here (printed to stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic graph directory.
    GenGraph {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        diseases: usize,
        #[arg(long)]
        symptoms: usize,
        #[arg(long)]
        per_disease: usize,
        #[arg(long)]
        distinct: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Listen address, e.g. 127.0.0.1:8080 (port 0 picks a free port).
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Load and validate a graph directory, printing its per-kind counts.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Also require relative drug image paths to exist under the graph directory.
        #[arg(long)]
        check_assets: bool,
    },
}

/// Failure with the exit code it maps to: 2 for bad input, 1 otherwise.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    fn runtime(message: impl ToString) -> Self {
        Self { code: 1, message: message.to_string() }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::input(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::input(e)
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::input(e)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::runtime(e)
    }
}

fn config_for(common: &Common) -> Result<Config, Failure> {
    let mut config = Config::load(common.config.as_deref())?;
    if common.graph.is_some() {
        config.graph = common.graph.clone();
    }
    if common.templates.is_some() {
        config.templates = common.templates.clone();
    }
    if common.seed.is_some() {
        config.seed = common.seed;
    }
    Ok(config)
}

fn require_graph(config: &Config) -> Result<(PathBuf, KnowledgeGraph), Failure> {
    let dir = config.graph.clone().ok_or_else(|| Failure::input("no graph directory given (--graph)"))?;
    let graph = loader::load_graph(&dir)?;
    Ok((dir, graph))
}

fn generator_for(config: &Config) -> Result<Option<HttpGenerator>, Failure> {
    config
        .generator_url
        .as_ref()
        .map(|url| HttpGenerator::new(url.clone(), config.generator_timeout()).map_err(Failure::input))
        .transpose()
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn chat(common: &Common, record: Option<&Path>, out: Option<&Path>, echo: bool) -> Result<(), Failure> {
    let config = config_for(common)?;
    let (_, kg) = require_graph(&config)?;
    let engine = config.engine()?;
    let generator = generator_for(&config)?;
    let session_id = SessionIdGenerator::new(config.seed).next_id();
    let stdin = io::stdin();
    let consultation = run_chat(
        &kg,
        &engine,
        session_id,
        BufReader::new(stdin.lock()),
        io::stdout().lock(),
        generator.as_ref().map(|g| g as &dyn Generator),
        echo,
    )
    .map_err(|e| match e {
        ChatError::Io(e) => Failure::runtime(e),
        ChatError::Dialogue(e) => Failure::runtime(e),
    })?;
    if let Some(path) = out {
        write_file(path, &transcript_json(&kg, &consultation))?;
    }
    if let Some(path) = record {
        let record = engine.record(&kg, &consultation).map_err(|e: RecordError| Failure::runtime(e))?;
        write_file(path, &record.to_json())?;
    }
    Ok(())
}

fn bench(
    common: &Common,
    runs: usize,
    synthetic: Option<(usize, usize, usize, bool)>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let config = config_for(common)?;
    let seed = config.seed.unwrap_or(0);
    let engine = config.engine()?;
    let (source, kg) = match synthetic {
        Some((diseases, symptoms, per_disease, distinct)) => {
            let spec = GraphSpec { diseases, symptoms, symptoms_per_disease: per_disease, seed, distinct };
            let tables = generate(&spec)?;
            let kg = KnowledgeGraph::from_tables(&tables, LoadOptions::default()).map_err(|e: KgError| Failure::runtime(e))?;
            let flag = if distinct { ", distinct" } else { "" };
            (format!("synthetic {diseases}x{symptoms}x{per_disease}{flag}"), kg)
        }
        None => {
            let (dir, kg) = require_graph(&config)?;
            (dir.display().to_string(), kg)
        }
    };
    let report = run_bench(&kg, &engine, &source, runs, seed).map_err(|e| match e {
        BenchError::InvalidSpec(_) => Failure::input(e),
        BenchError::Dialogue { .. } => Failure::runtime(e),
    })?;
    match out {
        Some(path) => {
            write_file(path, &report.to_json())?;
            print!("{}", report.table());
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn gen_graph(spec: GraphSpec, out: &Path) -> Result<(), Failure> {
    let tables = generate(&spec)?;
    let kg = KnowledgeGraph::from_tables(&tables, LoadOptions::default()).map_err(Failure::runtime)?;
    loader::write_tables(out, &tables)?;
    write_file(&out.join(loader::MANIFEST_FILE), &loader::manifest_json(&kg))?;
    println!("wrote {} diseases, {} symptoms to {}", kg.disease_count(), kg.stats().get(EntityKind::Symptom), out.display());
    Ok(())
}

fn serve(common: &Common, listen: Option<String>, store: Option<PathBuf>, static_dir: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = config_for(common)?;
    if listen.is_some() {
        config.listen = listen;
    }
    if store.is_some() {
        config.store_dir = store;
    }
    if static_dir.is_some() {
        config.static_dir = static_dir;
    }
    let (_, kg) = require_graph(&config)?;
    let engine = config.engine()?;
    let store = SnapshotStore::open(config.store_dir())?;
    let mut state = AppState::new(Arc::new(kg), Arc::new(engine), store, config.asset_root(), config.seed);
    if let Some(generator) = generator_for(&config)? {
        state = state.with_generator(generator);
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(Arc::new(state), &config.listen(), config.static_dir.as_deref()))?;
    Ok(())
}

fn validate(common: &Common, check_assets: bool) -> Result<(), Failure> {
    let config = config_for(common)?;
    let dir = config.graph.clone().ok_or_else(|| Failure::input("no graph directory given (--graph)"))?;
    let loaded = loader::load_dir(&dir, LoadOptions::default())?;
    if check_assets {
        let root = config.asset_root().unwrap_or_else(|| dir.clone());
        for drug in loaded.graph.ids_in_table_order(EntityKind::Drug) {
            for image in loaded.graph.drug_images(drug).map_err(Failure::input)? {
                let uri = &image.image_uri;
                if uri.starts_with("http://") || uri.starts_with("https://") {
                    continue;
                }
                if service::resolve_asset(&root, uri).is_none() {
                    return Err(Failure::input(format!("drug `{drug}`: image `{uri}` not found under {}", root.display())));
                }
            }
        }
    }
    print!("{}", loader::manifest_json(&loaded.graph));
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("MEDCONSULT_LOG"))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Chat { common, record, out, echo } => chat(&common, record.as_deref(), out.as_deref(), echo),
        Command::Bench { common, runs, diseases, symptoms, per_disease, distinct, out } => {
            let synthetic = diseases.map(|n| (n, symptoms, per_disease, distinct));
            bench(&common, runs, synthetic, out.as_deref())
        }
        Command::GenGraph { common, diseases, symptoms, per_disease, distinct, out } => {
            let seed = match config_for(&common) {
                Ok(config) => config.seed.unwrap_or(0),
                Err(e) => {
                    eprintln!("error: {}", e.message);
                    return ExitCode::from(e.code);
                }
            };
            let spec = GraphSpec { diseases, symptoms, symptoms_per_disease: per_disease, seed, distinct };
            gen_graph(spec, &out)
        }
        Command::Serve { common, listen, store, static_dir } => serve(&common, listen, store, static_dir),
        Command::Validate { common, check_assets } => validate(&common, check_assets),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
