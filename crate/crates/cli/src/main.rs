//! Command-line frontend wiring the toolkit into reproducible workflows:
//! generate → annotate → evaluate → compare. Exit codes: 0 success, 1 usage
//! error, 2 data or format error, 3 model or resource mismatch. Diagnostics
//! go to standard error; machine-readable output goes to files or stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radner::corpus_io::{read_corpus, write_corpus, CorpusFormat, GOLD_SOURCE};
use radner::datagen::{generate_corpus, GenConfig};
use radner::error::ErrorCategory;
use radner::eval::{aggregate_runs, compare_systems, compute_iaa, score_strict, EvalReport};
use radner::gazetteer::{self, DisambigConfig, DisambiguationModel};
use radner::neural::{self, NeuralTaggerBundle, TrainConfig};
use radner::ruler::{self, RuleSet};
use radner::stats::{corpus_stats, filter_corpus};
use radner::{stock, Corpus, Error};

#[derive(Parser)]
#[command(
    name = "radner",
    about = "Rule-based, neural and gazetteer NER over radiology-style reports",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate a corpus with one of the three systems.
    Annotate(AnnotateArgs),
    /// Train the neural tagger or the gazetteer disambiguator.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Score a system source against a gold source.
    Evaluate(EvaluateArgs),
    /// Inter-annotator agreement between two annotation sources.
    Iaa(IaaArgs),
    /// Render saved evaluation reports side by side.
    Compare(CompareArgs),
    /// Generate a synthetic corpus from a generator config.
    Datagen(DatagenArgs),
    /// Corpus statistics for one annotation source.
    Stats(StatsArgs),
    /// Keep only documents containing one of the keywords.
    Filter(FilterArgs),
}

#[derive(Args)]
struct CorpusInput {
    /// Input corpus path.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Corpus format: conll or jsonl (default: by file extension).
    #[arg(long)]
    format: Option<String>,
}

impl CorpusInput {
    fn format_of(&self, path: &Path) -> Result<CorpusFormat, CliError> {
        match &self.format {
            Some(f) => Ok(f.parse()?),
            None => Ok(CorpusFormat::from_path(path)),
        }
    }

    fn read(&self) -> Result<Corpus, CliError> {
        Ok(read_corpus(&self.input, self.format_of(&self.input)?)?)
    }
}

#[derive(Args)]
struct AnnotateArgs {
    /// Which system to run: ruler, neural or gazetteer.
    #[arg(long)]
    system: String,
    #[command(flatten)]
    corpus: CorpusInput,
    /// Output corpus path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Ruler: lexicon file (default: stock).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Ruler: rule DSL file (default: stock).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Neural: trained model bundle directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Gazetteer: concept dictionary file (default: stock).
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Gazetteer: concept map file (default: stock).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Gazetteer: trained disambiguator model file.
    #[arg(long)]
    disambiguator: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Train the neural tagger.
    Neural(TrainNeuralArgs),
    /// Train the gazetteer disambiguator on gold data.
    Gazetteer(TrainGazetteerArgs),
}

#[derive(Args)]
struct TrainNeuralArgs {
    /// Training corpus.
    #[arg(long)]
    train: PathBuf,
    /// Development corpus for epoch selection.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Training config JSON (mode, dimensions, epochs, seed, ...).
    #[arg(long)]
    config: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Gold annotation source to train on.
    #[arg(long, default_value = GOLD_SOURCE)]
    gold: String,
}

#[derive(Args)]
struct TrainGazetteerArgs {
    /// Training corpus with gold annotations.
    #[arg(long)]
    train: PathBuf,
    /// Disambiguator config JSON (window, learning rate, epochs).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// Gold annotation source to train on.
    #[arg(long, default_value = GOLD_SOURCE)]
    gold: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold annotation source.
    #[arg(long)]
    gold: String,
    /// System annotation source (or system name with --runs).
    #[arg(long)]
    system: String,
    #[command(flatten)]
    corpus: CorpusInput,
    /// Average this many seeded runs (seeds 1..k); requires --train and
    /// --config for a trainable system. A bare --runs means 5.
    #[arg(
        long,
        default_value_t = 1,
        default_missing_value = "5",
        num_args = 0..=1,
        require_equals = false
    )]
    runs: usize,
    /// Training corpus for multi-run evaluation.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Training config for multi-run evaluation.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report as JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the table as TSV instead of aligned text.
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct IaaArgs {
    /// First annotator source (reference orientation A→B).
    #[arg(long)]
    a: String,
    /// Second annotator source.
    #[arg(long)]
    b: String,
    #[command(flatten)]
    corpus: CorpusInput,
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Evaluation report JSON files.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    /// Optional IAA report rendered as the last column group.
    #[arg(long)]
    iaa: Option<PathBuf>,
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct DatagenArgs {
    /// Generator config JSON (default: the stock benchmark config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output corpus path.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusInput,
    /// Annotation source to count.
    #[arg(long, default_value = GOLD_SOURCE)]
    source: String,
}

#[derive(Args)]
struct FilterArgs {
    /// Comma-separated keyword patterns; a trailing * means prefix match.
    #[arg(long)]
    keywords: String,
    #[command(flatten)]
    corpus: CorpusInput,
    #[arg(long)]
    out: PathBuf,
}

/// Usage problems detected after clap parsing (bad flag combinations).
enum CliError {
    Usage(String),
    Tool(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Tool(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // usage error on stderr.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Tool(e)) => {
            eprintln!("error: {e}");
            match e.category() {
                ErrorCategory::Data => ExitCode::from(2),
                ErrorCategory::ModelResource => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Annotate(args) => annotate(args),
        Command::Train(TrainCommand::Neural(args)) => train_neural(args),
        Command::Train(TrainCommand::Gazetteer(args)) => train_gazetteer(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Iaa(args) => iaa(args),
        Command::Compare(args) => compare(args),
        Command::Datagen(args) => datagen(args),
        Command::Stats(args) => stats(args),
        Command::Filter(args) => filter(args),
    }
}

fn load_ruleset(lexicon: &Option<PathBuf>, rules: &Option<PathBuf>) -> Result<RuleSet, CliError> {
    match (lexicon, rules) {
        (Some(lex), Some(rules)) => Ok(ruler::load_ruleset(lex, rules)?),
        (None, None) => Ok(stock::ruleset()),
        _ => Err(CliError::Usage(
            "--lexicon and --rules must be given together".to_string(),
        )),
    }
}

fn load_concepts(
    dict: &Option<PathBuf>,
    map: &Option<PathBuf>,
) -> Result<(gazetteer::ConceptDictionary, gazetteer::ConceptMap), CliError> {
    match (dict, map) {
        (Some(d), Some(m)) => Ok(gazetteer::load_concept_resources(d, m)?),
        (None, None) => Ok(stock::concept_resources()),
        _ => Err(CliError::Usage(
            "--dict and --map must be given together".to_string(),
        )),
    }
}

/// Process documents in parallel chunks, preserving document order.
fn for_each_document<F>(corpus: &mut Corpus, f: F) -> Result<Vec<String>, Error>
where
    F: Fn(&mut radner::Document) -> Result<Vec<String>, Error> + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(corpus.documents.len().max(1));
    if threads <= 1 {
        let mut diagnostics = Vec::new();
        for doc in &mut corpus.documents {
            diagnostics.extend(f(doc)?);
        }
        return Ok(diagnostics);
    }
    let chunk = corpus.documents.len().div_ceil(threads);
    let mut results: Vec<Result<Vec<String>, Error>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for docs in corpus.documents.chunks_mut(chunk) {
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut diagnostics = Vec::new();
                for doc in docs {
                    diagnostics.extend(f(doc)?);
                }
                Ok(diagnostics)
            }));
        }
        for handle in handles {
            results.push(handle.join().expect("annotation thread panicked"));
        }
    });
    let mut diagnostics = Vec::new();
    for r in results {
        diagnostics.extend(r?);
    }
    Ok(diagnostics)
}

fn annotate(args: AnnotateArgs) -> Result<(), CliError> {
    let mut corpus = args.corpus.read()?;
    let diagnostics = match args.system.as_str() {
        "ruler" => {
            let ruleset = load_ruleset(&args.lexicon, &args.rules)?;
            for_each_document(&mut corpus, |doc| Ok(ruler::annotate_document(doc, &ruleset)))?
        }
        "gazetteer" => {
            let (dict, map) = load_concepts(&args.dict, &args.map)?;
            let model = match &args.disambiguator {
                Some(path) => Some(DisambiguationModel::load(path)?),
                None => None,
            };
            for_each_document(&mut corpus, |doc| {
                gazetteer::annotate_document(doc, &dict, &map, model.as_ref())?;
                Ok(Vec::new())
            })?
        }
        "neural" => {
            let model_dir = args.model.as_ref().ok_or_else(|| {
                CliError::Usage("--model is required for the neural system".to_string())
            })?;
            let bundle = NeuralTaggerBundle::load(model_dir)?;
            for_each_document(&mut corpus, |doc| {
                bundle.annotate_document(doc)?;
                Ok(Vec::new())
            })?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown system {other:?} (expected ruler, neural or gazetteer)"
            )))
        }
    };
    for line in &diagnostics {
        eprintln!("note: {line}");
    }
    let format = args.corpus.format_of(&args.out)?;
    write_corpus(&corpus, &args.out, format)?;
    Ok(())
}

fn train_neural(args: TrainNeuralArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Io { path: args.config.display().to_string(), source: e })?;
    let mut config = TrainConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let train = read_corpus(&args.train, CorpusFormat::from_path(&args.train))?;
    let dev = match &args.dev {
        Some(path) => Some(read_corpus(path, CorpusFormat::from_path(path))?),
        None => None,
    };
    let bundle = neural::train_tagger(&train, dev.as_ref(), &config, &args.gold)?;
    for model in &bundle.models {
        let label = model
            .entity_type
            .map(|t| t.to_string())
            .unwrap_or_else(|| "joint".to_string());
        if let (Some(first), Some(last)) =
            (model.epoch_losses.first(), model.epoch_losses.last())
        {
            eprintln!("note: {label}: mean epoch loss {first:.4} -> {last:.4}");
        }
    }
    bundle.save(&args.out)?;
    Ok(())
}

fn train_gazetteer(args: TrainGazetteerArgs) -> Result<(), CliError> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            DisambigConfig::from_json(&text)?
        }
        None => DisambigConfig::default(),
    };
    let (dict, map) = load_concepts(&args.dict, &args.map)?;
    let train = read_corpus(&args.train, CorpusFormat::from_path(&args.train))?;
    let (model, _) = gazetteer::train_disambiguator(&train, &dict, &map, &config, &args.gold)?;
    for concept in &model.untrained {
        eprintln!("note: concept {concept} had no training instances; falls back to map order");
    }
    model.save(&args.out)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".to_string()));
    }
    let corpus = args.corpus.read()?;
    let report = if args.runs == 1 {
        score_strict(&corpus, &args.gold, &args.system)?
    } else {
        let (train_path, config_path) = match (&args.train, &args.config) {
            (Some(t), Some(c)) => (t, c),
            _ => {
                return Err(CliError::Usage(
                    "--runs > 1 requires --train and --config to retrain per seed".to_string(),
                ))
            }
        };
        if args.system != neural::NEURAL_SOURCE {
            return Err(CliError::Usage(format!(
                "multi-run evaluation retrains the neural system; got {:?}",
                args.system
            )));
        }
        let text = std::fs::read_to_string(config_path)
            .map_err(|e| Error::Io { path: config_path.display().to_string(), source: e })?;
        let base = TrainConfig::from_json(&text)?;
        let train = read_corpus(train_path, CorpusFormat::from_path(train_path))?;
        let mut reports = Vec::with_capacity(args.runs);
        for seed in 1..=args.runs as u64 {
            let config = TrainConfig { seed, ..base.clone() };
            let bundle = neural::train_tagger(&train, None, &config, &args.gold)?;
            let mut annotated = corpus.clone();
            bundle.annotate_corpus(&mut annotated)?;
            reports.push(score_strict(&annotated, &args.gold, &args.system)?);
            eprintln!(
                "note: run seed {seed}: F1 {:.4}",
                reports.last().unwrap().all.metrics.f1
            );
        }
        aggregate_runs(&reports)?
    };
    print!("{}", compare_systems(std::slice::from_ref(&report), None, args.tsv)?);
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json())
            .map_err(|e| Error::Io { path: out.display().to_string(), source: e })?;
    }
    Ok(())
}

fn iaa(args: IaaArgs) -> Result<(), CliError> {
    let corpus = args.corpus.read()?;
    let ab = compute_iaa(&corpus, &args.a, &args.b)?;
    let ba = compute_iaa(&corpus, &args.b, &args.a)?;
    print!("{}", compare_systems(&[ab], None, args.tsv)?);
    print!("{}", compare_systems(&[ba], None, args.tsv)?);
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in &args.reports {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        reports.push(EvalReport::from_json(&text)?);
    }
    let iaa_report = match &args.iaa {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            Some(EvalReport::from_json(&text)?)
        }
        None => None,
    };
    print!(
        "{}",
        compare_systems(&reports, iaa_report.as_ref(), args.tsv)?
    );
    Ok(())
}

fn datagen(args: DatagenArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => GenConfig::load(path)?,
        None => stock::benchmark_config(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let corpus = generate_corpus(&config)?;
    let format = match &args.format {
        Some(f) => f.parse()?,
        None => CorpusFormat::from_path(&args.out),
    };
    write_corpus(&corpus, &args.out, format)?;
    eprintln!(
        "note: generated {} reports into {}",
        corpus.documents.len(),
        args.out.display()
    );
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let corpus = args.corpus.read()?;
    let report = corpus_stats(&corpus, &args.source)?;
    print!("{}", report.render());
    Ok(())
}

fn filter(args: FilterArgs) -> Result<(), CliError> {
    let corpus = args.corpus.read()?;
    let keywords: Vec<String> = args
        .keywords
        .split(',')
        .map(|k| k.trim().to_string())
        .collect();
    let kept = filter_corpus(&corpus, &keywords)?;
    eprintln!(
        "note: kept {} of {} documents",
        kept.documents.len(),
        corpus.documents.len()
    );
    let format = args.corpus.format_of(&args.out)?;
    write_corpus(&kept, &args.out, format)?;
    Ok(())
}
