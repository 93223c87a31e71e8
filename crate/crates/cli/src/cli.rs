use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vulntrack_core::corpus::{convert_cve_csv, CsvColumns};
use vulntrack_core::engine::StatsReport;
use vulntrack_core::topics::ExpansionCandidate;
use vulntrack_core::trend::Spike;
use vulntrack_core::{
    Engine, EngineConfig, Granularity, KeywordKind, RankedResult, ResultOrder, Topic, TrendSeries,
};

use crate::{api, views};

#[derive(Debug, Parser)]
#[command(
    name = "vulntrack",
    version,
    about = "Track vulnerability-report topics over time"
)]
pub struct Cli {
    /// Store directory.
    #[arg(
        long,
        global = true,
        env = "VULNTRACK_STORE",
        default_value = "vulntrack-store"
    )]
    pub store: PathBuf,

    /// Output format. Defaults to json, or csv for `trend`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    /// One JSON object per line (query results); same as json elsewhere.
    Jsonl,
    Table,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty store with the given settings.
    Init(InitArgs),
    /// Import a JSONL corpus and index it.
    Import {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Convert a CVE CSV export to corpus JSONL.
    ConvertCveCsv(ConvertArgs),
    /// Rebuild the whole index from the stored documents.
    Index,
    /// Load pretrained vectors for every indexed keyword.
    LoadVectors {
        #[arg(long)]
        file: PathBuf,
    },
    /// Fine-tune keyword vectors on the co-occurrence table.
    Finetune(FinetuneArgs),
    /// Load a word list into the keyword dictionary and/or a correction map.
    DictLoad(DictLoadArgs),
    #[command(subcommand)]
    Topic(TopicCommand),
    /// Recommend keywords similar to a topic's keywords.
    Expand(ExpandArgs),
    /// Rank documents matching a topic.
    Query(QueryArgs),
    /// Documents per period for a topic.
    Trend(TrendArgs),
    /// Periods whose count stands out from the trailing window.
    Spikes(SpikesArgs),
    /// Store summary.
    Stats {
        #[arg(long, default_value_t = views::DEFAULT_TOP)]
        top: usize,
    },
    /// Show a document, with spans of a topic's keywords.
    Doc {
        #[arg(long)]
        id: String,
        #[arg(long)]
        topic: Option<String>,
    },
    /// Write the keyword vectors in plain-text format.
    ExportVectors {
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub id_column: usize,
    #[arg(long, default_value_t = 1)]
    pub date_column: usize,
    #[arg(long, default_value_t = 2)]
    pub description_column: usize,
    /// The first row is data, not a header.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DictLoadArgs {
    /// Word list, one word per line.
    #[arg(long, requires = "kind")]
    pub file: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<KeywordKind>,
    /// Tab-separated misspelling/correction pairs.
    #[arg(long)]
    pub corrections: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<KeywordKind, String> {
    match s {
        "english" => Ok(KeywordKind::English),
        "domain" => Ok(KeywordKind::Domain),
        _ => Err("expected english or domain".into()),
    }
}

#[derive(Debug, Subcommand)]
pub enum TopicCommand {
    /// Create a topic from keywords (comma or space separated).
    Create {
        #[arg(long)]
        name: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        keywords: Vec<String>,
    },
    Show {
        #[arg(long)]
        name: String,
    },
    AddKeywords {
        #[arg(long)]
        name: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        keywords: Vec<String>,
    },
    List,
    /// Write a topic as JSON.
    Export {
        #[arg(long)]
        name: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Read a topic from JSON, replacing any topic with the same name.
    Import {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub topic: String,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Add the recommended keywords to the topic.
    #[arg(long)]
    pub apply: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub topic: String,
    #[arg(long, default_value = "relevance")]
    pub order: ResultOrder,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[arg(long)]
    pub topic: String,
    #[arg(long, default_value = "year")]
    pub granularity: Granularity,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct SpikesArgs {
    #[command(flatten)]
    pub range: TrendArgs,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_ansi(io::IsTerminal::is_terminal(&io::stderr()))
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| {
                match cli.command {
                    Command::Serve { .. } => "info".into(),
                    _ => "warn".into(),
                }
            }),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let store = cli.store.as_path();
    let format = cli.format;
    let out = &mut io::stdout().lock();
    match cli.command {
        Command::Init(args) => {
            let mut config = EngineConfig::default();
            config.seed = args.seed.unwrap_or(config.seed);
            config.theta_default = args.theta.unwrap_or(config.theta_default);
            config.cooccurrence_window = args.window.unwrap_or(config.cooccurrence_window);
            Engine::create(store, config)
                .with_context(|| format!("creating store {}", store.display()))?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", serde_json::json!({ "store": store }))?
                }
                _ => writeln!(out, "created store {}", store.display())?,
            }
        }
        Command::Import { corpus } => {
            let mut engine = open(store)?;
            let report = engine.import_documents(reader(&corpus)?)?;
            engine.save()?;
            for w in &report.warnings {
                eprintln!("warning: {}:{}: {}", corpus.display(), w.line, w.reason);
            }
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::to_json(&report)?)?
                }
                _ => writeln!(out, "imported {}", report.imported)?,
            }
        }
        Command::ConvertCveCsv(args) => {
            let columns = CsvColumns {
                id: args.id_column,
                date: args.date_column,
                description: args.description_column,
            };
            let input = reader(&args.input)?;
            let mut output = BufWriter::new(
                File::create(&args.output)
                    .with_context(|| format!("creating {}", args.output.display()))?,
            );
            let report = convert_cve_csv(input, &mut output, columns, !args.no_header)?;
            output.flush()?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::to_json(&report)?)?
                }
                _ => writeln!(
                    out,
                    "written {}, skipped {}",
                    report.written,
                    report.skipped.len()
                )?,
            }
        }
        Command::Index => {
            let mut engine = open(store)?;
            let report = engine.rebuild_index()?;
            engine.save()?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::to_json(&report)?)?
                }
                _ => writeln!(
                    out,
                    "documents {}, keywords {}, co-occurrence pairs {}",
                    report.documents, report.keywords, report.cooccurrence_pairs
                )?,
            }
        }
        Command::LoadVectors { file } => {
            let mut engine = open(store)?;
            let report = engine.load_vectors(reader(&file)?)?;
            engine.save()?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::to_json(&report)?)?
                }
                _ => writeln!(
                    out,
                    "loaded {}, randomized {}, skipped lines {}",
                    report.loaded, report.randomized, report.skipped_lines
                )?,
            }
        }
        Command::Finetune(args) => {
            let mut engine = open(store)?;
            let mut glove = engine.config().glove;
            glove.epochs = args.epochs.unwrap_or(glove.epochs);
            glove.x_max = args.x_max.unwrap_or(glove.x_max);
            glove.alpha = args.alpha.unwrap_or(glove.alpha);
            glove.learning_rate = args.learning_rate.unwrap_or(glove.learning_rate);
            let report = engine.finetune(Some(glove))?;
            engine.save()?;
            for epoch in &report.epochs {
                match format {
                    Some(Format::Json | Format::Jsonl) | None => {
                        writeln!(out, "{}", views::to_json(epoch)?)?
                    }
                    _ => writeln!(out, "epoch {:>4}  loss {:.6}", epoch.epoch, epoch.loss)?,
                }
            }
        }
        Command::DictLoad(args) => {
            if args.file.is_none() && args.corrections.is_none() {
                bail!("nothing to load: give --file/--kind or --corrections");
            }
            let mut engine = open(store)?;
            let mut added = serde_json::Map::new();
            if let (Some(file), Some(kind)) = (&args.file, args.kind) {
                added.insert(
                    kind.to_string(),
                    engine.load_dictionary(reader(file)?, kind)?.into(),
                );
            }
            if let Some(file) = &args.corrections {
                added.insert(
                    "corrections".into(),
                    engine.load_corrections(reader(file)?)?.into(),
                );
            }
            engine.save()?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", serde_json::Value::Object(added))?
                }
                _ => {
                    for (k, v) in added {
                        writeln!(out, "{k:<12} {v}")?;
                    }
                }
            }
        }
        Command::Topic(cmd) => topic_command(store, format, cmd, out)?,
        Command::Expand(args) => {
            let engine_ro = open_existing(store)?;
            let expansion = engine_ro.expand(&args.topic, args.theta, args.limit)?;
            for k in &expansion.unexpandable {
                eprintln!("warning: no embedding for topic keyword {k:?}");
            }
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::to_json(&expansion.candidates)?)?
                }
                _ => print_candidates(out, &expansion.candidates)?,
            }
            if args.apply {
                let mut engine = engine_ro;
                let keywords: Vec<&str> = expansion
                    .candidates
                    .iter()
                    .map(|c| c.keyword.as_str())
                    .collect();
                engine.add_keywords(&args.topic, &keywords)?;
                engine.save()?;
            }
        }
        Command::Query(args) => {
            let engine = open_existing(store)?;
            match format {
                Some(Format::Json) | None => writeln!(
                    out,
                    "{}",
                    views::results(&engine, &args.topic, args.order, args.limit)?
                )?,
                Some(Format::Jsonl) => {
                    for r in engine.query(&args.topic, args.order, args.limit)? {
                        writeln!(out, "{}", views::to_json(&r)?)?;
                    }
                }
                _ => print_results(out, &engine.query(&args.topic, args.order, args.limit)?)?,
            }
        }
        Command::Trend(args) => {
            let engine = open_existing(store)?;
            let (from, to) = range(&args)?;
            match format {
                Some(Format::Json | Format::Jsonl) => writeln!(
                    out,
                    "{}",
                    views::trend(&engine, &args.topic, args.granularity, from, to)?
                )?,
                Some(Format::Table) => {
                    print_trend(out, &engine.trend(&args.topic, args.granularity, from, to)?)?
                }
                Some(Format::Csv) | None => write!(
                    out,
                    "{}",
                    engine
                        .trend(&args.topic, args.granularity, from, to)?
                        .to_csv()
                )?,
            }
        }
        Command::Spikes(args) => {
            let engine = open_existing(store)?;
            let (from, to) = range(&args.range)?;
            let config = api::spike_config(engine.config().spike, args.window, args.threshold);
            let a = &args.range;
            match format {
                Some(Format::Json | Format::Jsonl) | None => writeln!(
                    out,
                    "{}",
                    views::spikes(&engine, &a.topic, a.granularity, from, to, Some(config))?
                )?,
                _ => print_spikes(
                    out,
                    &engine.spikes(&a.topic, a.granularity, from, to, Some(config))?,
                )?,
            }
        }
        Command::Stats { top } => {
            let engine = open_existing(store)?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::stats(&engine, top)?)?
                }
                _ => print_stats(out, &engine.stats(top)?)?,
            }
        }
        Command::Doc { id, topic } => {
            let engine = open_existing(store)?;
            match format {
                Some(Format::Json | Format::Jsonl) | None => {
                    writeln!(out, "{}", views::document(&engine, &id, topic.as_deref())?)?
                }
                _ => {
                    let view = engine.document_view(&id, topic.as_deref())?;
                    writeln!(
                        out,
                        "{}  {}\n{}",
                        view.doc_id, view.created_date, view.raw_text
                    )?;
                    for m in &view.matched {
                        let spans: Vec<String> = m
                            .spans
                            .iter()
                            .map(|s| format!("{}..{}", s.byte_start, s.byte_end))
                            .collect();
                        writeln!(out, "  {:<20} {}", m.keyword, spans.join(" "))?;
                    }
                }
            }
        }
        Command::ExportVectors { output } => {
            let engine = open_existing(store)?;
            match output {
                Some(path) => {
                    let file = File::create(&path)
                        .with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(file);
                    engine.save_vectors(&mut w)?;
                    w.flush()?;
                }
                None => engine.save_vectors(&mut *out)?,
            }
        }
        Command::Serve { bind } => {
            let engine = open_existing(store)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(api::serve(store, engine, bind))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn topic_command(
    store: &Path,
    format: Option<Format>,
    cmd: TopicCommand,
    out: &mut impl Write,
) -> Result<()> {
    let json = matches!(format, Some(Format::Json | Format::Jsonl) | None);
    let topic = match cmd {
        TopicCommand::Create { name, keywords } => {
            let mut engine = open(store)?;
            let topic = engine.create_topic(&name, &split_keywords(&keywords))?;
            engine.save()?;
            topic
        }
        TopicCommand::Show { name } => open_existing(store)?.topic(&name)?.clone(),
        TopicCommand::AddKeywords { name, keywords } => {
            let mut engine = open(store)?;
            let topic = engine.add_keywords(&name, &split_keywords(&keywords))?;
            engine.save()?;
            topic
        }
        TopicCommand::List => {
            let engine = open_existing(store)?;
            if json {
                writeln!(out, "{}", views::topics(&engine)?)?;
            } else {
                for t in engine.topics() {
                    print_topic(out, t)?;
                }
            }
            return Ok(());
        }
        TopicCommand::Export { name, output } => {
            let engine = open_existing(store)?;
            let body = views::topic(&engine, &name)?;
            match output {
                Some(path) => std::fs::write(&path, body + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(out, "{body}")?,
            }
            return Ok(());
        }
        TopicCommand::Import { file } => {
            let topic: Topic = serde_json::from_reader(reader(&file)?)
                .with_context(|| format!("reading topic from {}", file.display()))?;
            let mut engine = open(store)?;
            let topic = engine.import_topic(topic)?;
            engine.save()?;
            topic
        }
    };
    if json {
        writeln!(out, "{}", views::to_json(&topic)?)?;
    } else {
        print_topic(out, &topic)?;
    }
    Ok(())
}

fn split_keywords(raw: &[String]) -> Vec<&str> {
    raw.iter()
        .flat_map(|k| k.split_whitespace())
        .filter(|k| !k.is_empty())
        .collect()
}

fn open(store: &Path) -> Result<Engine> {
    Engine::open_or_create(store).with_context(|| format!("opening store {}", store.display()))
}

fn open_existing(store: &Path) -> Result<Engine> {
    Engine::open(store).with_context(|| format!("opening store {}", store.display()))
}

fn reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn range(args: &TrendArgs) -> Result<(Option<chrono::NaiveDate>, Option<chrono::NaiveDate>)> {
    Ok((
        views::parse_opt_day(args.from.as_deref())?,
        views::parse_opt_day(args.to.as_deref())?,
    ))
}

fn print_topic(out: &mut impl Write, topic: &Topic) -> io::Result<()> {
    writeln!(out, "{}: {}", topic.name, topic.keywords.join(", "))
}

fn print_candidates(out: &mut impl Write, candidates: &[ExpansionCandidate]) -> io::Result<()> {
    writeln!(out, "{:<24} {:>10} {:>10}", "keyword", "idf", "similarity")?;
    for c in candidates {
        writeln!(
            out,
            "{:<24} {:>10.4} {:>10.4}",
            c.keyword, c.score, c.max_similarity
        )?;
    }
    Ok(())
}

fn print_results(out: &mut impl Write, results: &[RankedResult]) -> io::Result<()> {
    writeln!(
        out,
        "{:<20} {:>10} {:>12}  matched",
        "doc_id", "relevance", "date"
    )?;
    for r in results {
        let matched: Vec<&str> = r.matched.iter().map(|m| m.keyword.as_str()).collect();
        writeln!(
            out,
            "{:<20} {:>10.6} {:>12}  {}",
            r.doc_id,
            r.relevance,
            r.created_date,
            matched.join(",")
        )?;
    }
    Ok(())
}

fn print_trend(out: &mut impl Write, series: &TrendSeries) -> io::Result<()> {
    for b in &series.buckets {
        writeln!(out, "{:<8} {:>6}", b.period.to_string(), b.count)?;
    }
    Ok(())
}

fn print_spikes(out: &mut impl Write, spikes: &[Spike]) -> io::Result<()> {
    writeln!(out, "{:<8} {:>6} {:>8}", "period", "count", "z")?;
    for s in spikes {
        writeln!(
            out,
            "{:<8} {:>6} {:>8.3}",
            s.period.to_string(),
            s.count,
            s.z_score
        )?;
    }
    Ok(())
}

fn print_stats(out: &mut impl Write, stats: &StatsReport) -> io::Result<()> {
    let span = match (stats.corpus.date_min, stats.corpus.date_max) {
        (Some(a), Some(b)) => format!("{a} .. {b}"),
        _ => "-".into(),
    };
    writeln!(out, "documents          {}", stats.corpus.total_documents)?;
    writeln!(out, "dates              {span}")?;
    writeln!(
        out,
        "dictionary         {} (english {}, domain {}, unknown {})",
        stats.dictionary_size,
        stats.dictionary.english,
        stats.dictionary.domain,
        stats.dictionary.unknown
    )?;
    writeln!(out, "indexed keywords   {}", stats.indexed_keywords)?;
    writeln!(out, "occurrences        {}", stats.total_occurrences)?;
    writeln!(out, "co-occurrences     {}", stats.cooccurrence_pairs)?;
    writeln!(out, "vectors            {}", stats.embeddings)?;
    writeln!(out, "topics             {}", stats.topics)?;
    for k in &stats.top_keywords {
        writeln!(
            out,
            "  {:<20} {:>8} {:>6}",
            k.keyword, k.occurrence_total, k.document_frequency
        )?;
    }
    Ok(())
}
