//! The `facetseg` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use facetseg::concept::{self, ConceptConfig, LinkGraph};
use facetseg::corpus::{
    build_sites, load_sites, read_labels_jsonl, read_pages_jsonl, save_sites, CorpusConfig, PageRecord, SiteCorpus,
};
use facetseg::embed::{load_embeddings, EmbeddingTable};
use facetseg::eval::{run_experiment_1, run_experiment_2, split_by_domain, select_sites, ExperimentConfig};
use facetseg::kg::{read_events_any, KnowledgeGraph};
use facetseg::model::{load_model, save_model, train, Architecture, FacetSpec, ModelConfig};
use facetseg::semisup::{run_rounds, SemiSupConfig};
use facetseg::synth::{LinkGraphConfig, SynthConcepts, SynthConfig, SynthWorld};
use facetseg::{Facet, LabelSource};
use serde::Serialize;

use crate::config::Config;
use crate::service::{Decision, LeadQuery, Service};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Parser)]
#[command(name = "facetseg", version, about = "Faceted company segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build site corpora from page dumps.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Train and apply facet classifiers.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Pseudo-labeling over external sites.
    #[command(subcommand)]
    Semisup(SemisupCmd),
    /// Concept embeddings and the concept graph.
    #[command(subcommand)]
    Concept(ConceptCmd),
    /// Ablation experiments.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Knowledge graph maintenance.
    #[command(subcommand)]
    Kg(KgCmd),
    /// Run the HTTP service.
    #[command(subcommand)]
    Api(ApiCmd),
    /// Ingest a page corpus into the configured knowledge graph.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pages: PathBuf,
    },
    /// Classify one ingested domain.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        facet: String,
    },
    /// Lead search.
    #[command(subcommand)]
    Leads(LeadsCmd),
    /// Company details.
    #[command(subcommand)]
    Company(CompanyCmd),
    /// Concept queries against the running configuration.
    #[command(subcommand)]
    Concepts(ConceptsCmd),
    /// Label-cluster review.
    #[command(subcommand)]
    Clusters(ClustersCmd),
    /// Write a synthetic data set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        internal: usize,
        #[arg(long, default_value_t = 150)]
        external: usize,
        /// Labels replaced by random draws in the external set.
        #[arg(long, value_delimiter = ',')]
        randomize: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Internal,
    Wikipedia,
}

#[derive(Subcommand)]
enum CorpusCmd {
    Build {
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = facetseg::corpus::DEFAULT_MAX_CHUNK_TOKENS)]
        lmax: usize,
        #[arg(long, default_value_t = facetseg::corpus::DEFAULT_MIN_TOKEN_FREQ)]
        min_token_freq: u64,
        #[arg(long, default_value_t = facetseg::corpus::DEFAULT_MIN_PAGE_TOKENS)]
        min_page_tokens: usize,
        /// Label source for sites without label records.
        #[arg(long, value_enum, default_value = "internal")]
        source: SourceArg,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = false)]
    linear: bool,
}

impl TrainArgs {
    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            architecture: if self.linear { Architecture::Linear } else { Architecture::Cnn },
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum ModelCmd {
    Train {
        #[arg(long)]
        sites: PathBuf,
        #[arg(long)]
        facet: Facet,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sites: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SemisupCmd {
    Run {
        #[arg(long)]
        internal: PathBuf,
        #[arg(long)]
        external: PathBuf,
        #[arg(long)]
        facet: Facet,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        #[arg(long, default_value_t = 0.8)]
        tau: f64,
        /// Seeds both the domain split and training.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Also write the final model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ConceptCmd {
    Build {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        text_vectors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        rank: usize,
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        min_support: usize,
    },
    Graph {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        theta: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    internal: PathBuf,
    #[arg(long)]
    external: PathBuf,
    #[arg(long)]
    facet: Facet,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Subcommand)]
enum EvalCmd {
    RunExp1 {
        #[command(flatten)]
        args: ExperimentArgs,
    },
    RunExp2 {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long)]
        class: String,
    },
}

#[derive(Subcommand)]
enum KgCmd {
    /// Rebuild a graph from an event log and write its snapshot.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
}

#[derive(Subcommand)]
enum ApiCmd {
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum LeadsCmd {
    /// Classifies every ingested company, then ranks leads.
    Query {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        industries: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        roles: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        min_prob: f64,
        #[arg(long, default_value_t = 50)]
        limit: usize,
    },
}

#[derive(Subcommand)]
enum CompanyCmd {
    Show {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        domain: String,
    },
}

#[derive(Subcommand)]
enum ConceptsCmd {
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
    },
    Neighbors {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 0.0)]
        min_weight: f64,
    },
}

#[derive(Subcommand)]
enum ClustersCmd {
    List {
        #[arg(long)]
        config: PathBuf,
    },
    Decide {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        status: String,
        #[arg(long)]
        merge_into: Option<String>,
        #[arg(long, default_value = "cli")]
        actor: String,
    },
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(runtime)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(runtime)
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value).map_err(runtime)?);
    Ok(())
}

fn table(path: &Path) -> CliResult<EmbeddingTable> {
    load_embeddings(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn sites(path: &Path) -> CliResult<SiteCorpus> {
    load_sites(open(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn facet_spec(corpus: &SiteCorpus, facet: Facet) -> CliResult<FacetSpec> {
    FacetSpec::new(facet, corpus.label_space(facet).to_vec()).map_err(runtime)
}

fn service(config: &Path) -> CliResult<Service> {
    let config = Config::load(config).map_err(config_err)?;
    Service::from_config(config).map_err(config_err)
}

fn api_err(e: crate::error::ApiError) -> CliError {
    runtime(format!("{} ({})", e.message, e.status))
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> CliResult {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(runtime)?;
        w.write_all(b"\n").map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn write_vectors(path: &Path, vectors: &BTreeMap<String, Vec<f64>>) -> CliResult {
    let mut w = create(path)?;
    for (token, v) in vectors {
        let values: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{token} {}", values.join(" ")).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn corpus_cmd(cmd: CorpusCmd) -> CliResult {
    let CorpusCmd::Build { pages, labels, embeddings, out, lmax, min_token_freq, min_page_tokens, source } = cmd;
    let table = table(&embeddings)?;
    let raw = read_pages_jsonl(open(&pages)?).map_err(runtime)?;
    let labels = match labels {
        Some(p) => read_labels_jsonl(open(&p)?).map_err(runtime)?,
        None => Vec::new(),
    };
    let config = CorpusConfig {
        max_chunk_tokens: lmax,
        min_token_freq,
        min_page_tokens,
        default_source: match source {
            SourceArg::Internal => LabelSource::Internal,
            SourceArg::Wikipedia => LabelSource::Wikipedia,
        },
        ..Default::default()
    };
    let (corpus, report) = build_sites(&raw, &labels, &table, &config).map_err(runtime)?;
    save_sites(&corpus, create(&out)?).map_err(runtime)?;
    print_json(&report)
}

fn model_cmd(cmd: ModelCmd) -> CliResult {
    match cmd {
        ModelCmd::Train { sites: path, facet, embeddings, out, train: args } => {
            let corpus = sites(&path)?;
            let table = table(&embeddings)?;
            let spec = facet_spec(&corpus, facet)?;
            let mut model = train(&corpus.sites, &spec, &table, &args.model_config()).map_err(runtime)?;
            model.vocabulary = Some(corpus.vocabulary.clone());
            let mut w = create(&out)?;
            save_model(&model, &mut w).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            eprintln!("final loss {:.6}", model.loss_history.last().copied().unwrap_or(f64::NAN));
            Ok(())
        }
        ModelCmd::Predict { model, sites: path, embeddings, out } => {
            let model = load_model(open(&model)?).map_err(runtime)?;
            let corpus = sites(&path)?;
            let table = table(&embeddings)?;
            let mut lines = Vec::with_capacity(corpus.sites.len());
            for site in &corpus.sites {
                let pred = model.predict_site(site, &table).map_err(runtime)?;
                let probs: BTreeMap<&str, f64> = model.label_probs(&pred).collect();
                lines.push(serde_json::json!({ "domain": site.domain, "probs": probs }));
            }
            write_lines(&out, lines)
        }
    }
}

fn semisup_cmd(cmd: SemisupCmd) -> CliResult {
    let SemisupCmd::Run { internal, external, facet, embeddings, rounds, tau, seed, report, out } = cmd;
    let internal = sites(&internal)?;
    let external = sites(&external)?;
    let table = table(&embeddings)?;
    let spec = facet_spec(&internal, facet)?;
    let labeled: Vec<String> =
        internal.sites.iter().filter(|s| s.labels_for(facet).is_some()).map(|s| s.domain.clone()).collect();
    let split = split_by_domain(&labeled, seed).map_err(runtime)?;
    let train_sites = select_sites(&internal.sites, &split.train_domains);
    let test_sites = select_sites(&internal.sites, &split.test_domains);
    let config = SemiSupConfig { rounds, tau, model: ModelConfig { seed, ..Default::default() }, ..Default::default() };
    let outcome = run_rounds(&train_sites, &test_sites, &external.sites, &spec, &table, &config).map_err(runtime)?;
    write_json(&report, &outcome.state)?;
    if let Some(out) = out {
        let mut model = outcome.model;
        model.vocabulary = Some(internal.vocabulary.clone());
        let mut w = create(&out)?;
        save_model(&model, &mut w).map_err(runtime)?;
        w.flush().map_err(runtime)?;
    }
    Ok(())
}

fn concept_cmd(cmd: ConceptCmd) -> CliResult {
    match cmd {
        ConceptCmd::Build { graph, text_vectors, out, rank, k, iters, seed, min_support } => {
            let g = LinkGraph::read_jsonl(open(&graph)?).map_err(runtime)?;
            let text: BTreeMap<String, Vec<f64>> = match text_vectors {
                Some(p) => {
                    let t = table(&p)?;
                    t.tokens().map(|tok| (tok.to_string(), t.get(tok).expect("listed token").to_vec())).collect()
                }
                None => BTreeMap::new(),
            };
            let config = ConceptConfig { rank, k, iters, seed, min_support, ..Default::default() };
            let emb = concept::build_embedding(&g, &text, &config).map_err(runtime)?;
            concept::save_embedding(&out, &emb).map_err(runtime)?;
            eprintln!("{} concepts, k = {}", emb.ids.len(), emb.k);
            Ok(())
        }
        ConceptCmd::Graph { emb, theta, out } => {
            let emb = concept::load_embedding(&emb).map_err(runtime)?;
            write_lines(&out, concept::cosine_graph(&emb, theta))
        }
    }
}

fn eval_cmd(cmd: EvalCmd) -> CliResult {
    let (args, class) = match cmd {
        EvalCmd::RunExp1 { args } => (args, None),
        EvalCmd::RunExp2 { args, class } => (args, Some(class)),
    };
    let internal = sites(&args.internal)?;
    let external = sites(&args.external)?;
    let table = table(&args.embeddings)?;
    let spec = facet_spec(&internal, args.facet)?;
    let config = ExperimentConfig {
        split_seed: args.seed,
        semisup: SemiSupConfig { model: ModelConfig { seed: args.seed, ..Default::default() }, ..Default::default() },
    };
    match class {
        None => {
            let r = run_experiment_1(&internal.sites, &external.sites, &spec, &table, &config).map_err(runtime)?;
            eprintln!("micro-F1 {:.4} -> {:.4}", r.without_external.micro_f1, r.with_external.micro_f1);
            write_json(&args.report, &r)
        }
        Some(class) => {
            let r =
                run_experiment_2(&internal.sites, &external.sites, &spec, &class, &table, &config).map_err(runtime)?;
            eprintln!("{class} F1 internal {:.4}, external {:.4}", r.class_f1_internal, r.class_f1_external);
            write_json(&args.report, &r)
        }
    }
}

fn kg_cmd(cmd: KgCmd) -> CliResult {
    let KgCmd::Replay { log, snapshot, workers } = cmd;
    let events = read_events_any(&log).map_err(runtime)?;
    let (kg, report) = KnowledgeGraph::replay(events, workers);
    let mut w = create(&snapshot)?;
    kg.write_snapshot(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    print_json(&report)
}

fn synth_cmd(out: &Path, seed: u64, internal: usize, external: usize, randomize: Vec<String>) -> CliResult {
    std::fs::create_dir_all(out).map_err(runtime)?;
    let config = SynthConfig {
        seed,
        n_internal: internal,
        n_external: external,
        randomized_external: randomize.into_iter().collect::<BTreeSet<_>>(),
        ..Default::default()
    };
    let world = SynthWorld::generate(&config);
    let pages = |p: &[facetseg::corpus::RawPage]| p.iter().cloned().map(PageRecord::from).collect::<Vec<_>>();
    write_lines(&out.join("pages_internal.jsonl"), pages(&world.internal_pages))?;
    write_lines(&out.join("labels_internal.jsonl"), &world.internal_labels)?;
    write_lines(&out.join("pages_external.jsonl"), pages(&world.external_pages))?;
    write_lines(&out.join("labels_external.jsonl"), &world.external_labels)?;
    let mut w = create(&out.join("vectors.txt"))?;
    world.table.write_to(&mut w).and_then(|_| w.flush()).map_err(runtime)?;

    let concepts = SynthConcepts::generate(&LinkGraphConfig { seed, ..Default::default() });
    let mut w = create(&out.join("links.jsonl"))?;
    concepts.graph.write_jsonl(&mut w).map_err(runtime)?;
    w.flush().map_err(runtime)?;
    write_vectors(&out.join("text_vectors.txt"), &concepts.text_vectors)
}

fn parse_status(raw: &str) -> CliResult<facetseg::concept::ClusterStatus> {
    serde_json::from_value(serde_json::Value::String(raw.to_string()))
        .map_err(|_| config_err(format!("unknown status {raw:?}")))
}

fn execute(command: Command) -> CliResult {
    match command {
        Command::Corpus(c) => corpus_cmd(c),
        Command::Model(c) => model_cmd(c),
        Command::Semisup(c) => semisup_cmd(c),
        Command::Concept(c) => concept_cmd(c),
        Command::Eval(c) => eval_cmd(c),
        Command::Kg(c) => kg_cmd(c),
        Command::Api(ApiCmd::Serve { config }) => {
            let svc = Arc::new(service(&config)?);
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(crate::http::serve(svc)).map_err(runtime)
        }
        Command::Ingest { config, pages } => {
            let svc = service(&config)?;
            print_json(&svc.ingest_path(&pages).map_err(api_err)?)
        }
        Command::Classify { config, domain, facet } => {
            let svc = service(&config)?;
            print_json(&svc.classify(&domain, &facet).map_err(api_err)?)
        }
        Command::Leads(LeadsCmd::Query { config, industries, roles, min_prob, limit }) => {
            let svc = service(&config)?;
            let query = LeadQuery {
                industries: industries.into_iter().collect(),
                roles: roles.into_iter().collect(),
                min_prob,
                limit,
            };
            if !query.industries.is_empty() {
                svc.classify_all("industry").map_err(api_err)?;
            }
            if !query.roles.is_empty() {
                svc.classify_all("role").map_err(api_err)?;
            }
            print_json(&svc.leads(&query).map_err(api_err)?)
        }
        Command::Company(CompanyCmd::Show { config, domain }) => {
            let svc = service(&config)?;
            print_json(&svc.company(&domain).map_err(api_err)?)
        }
        Command::Concepts(ConceptsCmd::Graph { config, theta }) => {
            let svc = service(&config)?;
            let theta = theta.unwrap_or(svc.config().concepts.theta);
            print_json(&svc.concept_graph(theta).map_err(api_err)?)
        }
        Command::Concepts(ConceptsCmd::Neighbors { config, id, min_weight }) => {
            let svc = service(&config)?;
            print_json(&svc.concept_neighbors(&id, min_weight).map_err(api_err)?)
        }
        Command::Clusters(ClustersCmd::List { config }) => print_json(&service(&config)?.clusters()),
        Command::Clusters(ClustersCmd::Decide { config, id, status, merge_into, actor }) => {
            let decision = Decision { status: parse_status(&status)?, merge_into };
            let svc = service(&config)?;
            print_json(&svc.decide(&id, &decision, &actor).map_err(api_err)?)
        }
        Command::Synth { out, seed, internal, external, randomize } => {
            synth_cmd(&out, seed, internal, external, randomize)
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
