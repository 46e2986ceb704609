use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use esg_clarity::annotation::{import_dataset, make_splits, AnnotationStore, GoldDataset, SplitSet};
use esg_clarity::clarity::{evaluate_clarity, predict_batch, ClarityModel, Encoder};
use esg_clarity::config::{ConfigError, PipelineConfig};
use esg_clarity::eval::{
    comparison_report, error_table, render_document_report, MethodKind, MetricsReport, NamedReport, ReportFormat,
};
use esg_clarity::ingest::{ingest_directory, ingest_document, CorpusIngest, SentenceRecord};
use esg_clarity::io::{read_json, read_jsonl, write_json, write_jsonl, write_meta};
use esg_clarity::pipeline::{
    clarity_counts, classify_clarity, classify_relevance, score_and_report, train_clarity_on_gold, ClarityMethod,
    SentencePrediction,
};
use esg_clarity::relevance::{train_relevance, weak_label_lexicon, LinearRelevanceModel};
use esg_clarity::scoring::{language_score, rank_universe};
use esg_clarity::service::{serve, ServiceState};
use esg_clarity::zeroshot::{
    bundled_fixture, bundled_replay_client, classify_zero_shot, evaluate_zero_shot, GenerativeClient, RemoteClient,
};
use esg_clarity::RelevanceLabel;
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "esg-clarity",
    version,
    about = "Score how specifically ESG funds describe their strategy"
)]
struct Cli {
    /// Pipeline config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract strategy-section sentences from prospectus files.
    Ingest {
        /// A file or a directory of .txt/.md/.pdf files; defaults to paths.corpus_dir.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "sentences.jsonl")]
        out: PathBuf,
    },
    /// Fit the ESG relevance filter.
    TrainRelevance {
        /// Sentences to weak-label with the lexicon.
        #[arg(long, conflicts_with = "labeled")]
        sentences: Option<PathBuf>,
        /// JSON Lines of {text, label} with label ESG or NonESG.
        #[arg(long)]
        labeled: Option<PathBuf>,
        #[arg(long, default_value = "relevance.json")]
        out: PathBuf,
    },
    /// Mark each sentence ESG or NonESG.
    ClassifyRelevance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long, default_value = "relevance.jsonl")]
        out: PathBuf,
    },
    /// Serve the annotation API for the workbench.
    AnnotateServe {
        #[arg(long)]
        sentences: PathBuf,
        /// Store directory; defaults to service.store_dir.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Initial clarity model for weak-label proposals.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Clarity predictions backing /api/ratings and document reports.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Train a clarity classifier on a gold dataset.
    TrainClarity {
        #[arg(long, value_enum)]
        method: TrainMethod,
        #[arg(long)]
        gold: PathBuf,
        /// Start from a saved encoder checkpoint instead of the preset.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long, default_value = "clarity-model")]
        out: PathBuf,
    },
    /// Label every ESG sentence Specific, Ambiguous or Generic.
    ClassifyClarity {
        #[arg(long)]
        model: PathBuf,
        /// Sentences or relevance predictions (JSON Lines).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "clarity.jsonl")]
        out: PathBuf,
    },
    /// Language score, rank and rating per document.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "ratings.csv")]
        out: PathBuf,
    },
    /// Rank documents by language score.
    Rank {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "ranking.csv")]
        out: PathBuf,
    },
    /// Metrics for a trained model or the zero-shot baseline.
    Evaluate {
        #[arg(long, value_enum)]
        method: EvalMethod,
        /// Gold JSON Lines; the zero-shot path defaults to the bundled fixture.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Restrict to the test part of these splits (fine-tuned only).
        #[arg(long)]
        splits: Option<PathBuf>,
        /// Saved clarity model (fine-tuned only).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "replay")]
        client: ClientKind,
        /// Replay transcript; the bundled one when omitted.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Write the MetricsReport here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render document reports, or a comparison table of saved metrics.
    Report {
        #[arg(long, required_unless_present = "compare")]
        predictions: Option<PathBuf>,
        /// NAME=finetuned|zeroshot=METRICS.json, repeatable.
        #[arg(long)]
        compare: Vec<String>,
        #[arg(long, value_enum, default_value = "html")]
        format: Format,
        #[arg(long, default_value = "reports")]
        out_dir: PathBuf,
    },
    /// Load an external labeled dataset as gold.
    ImportDataset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "gold.jsonl")]
        out: PathBuf,
        /// Also write stratified train/validation/test ids.
        #[arg(long)]
        splits_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMethod {
    Contrastive,
    Prompt,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMethod {
    Finetuned,
    Zeroshot,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClientKind {
    Replay,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    Markdown,
}

/// A required input file or directory is absent.
#[derive(Debug)]
struct InputMissing(PathBuf);

impl std::fmt::Display for InputMissing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "input not found: {}", self.0.display())
    }
}

impl std::error::Error for InputMissing {}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(InputMissing(path.to_path_buf()).into())
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.downcast_ref::<ConfigError>().is_some() {
        "ConfigInvalid"
    } else if e.downcast_ref::<InputMissing>().is_some() {
        "InputMissing"
    } else {
        "Failed"
    }
}

/// The error chain joined with ": ", skipping causes a parent already quotes.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let line = serde_json::json!({ "error": error_kind(&e), "message": message(&e) });
        eprintln!("{line}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(p) = &cli.config {
        require(p)?;
    }
    let config = PipelineConfig::load_or_default(cli.config.as_deref())?;
    let digest = config.digest();
    let stamp = |path: &Path, producer: &str, records: usize| -> Result<()> {
        write_meta(path, producer, &digest, records)?;
        Ok(())
    };

    match cli.command {
        Command::Ingest { input, out } => {
            let input = input
                .or_else(|| config.paths.corpus_dir.clone())
                .context("no --input given and paths.corpus_dir is unset")?;
            let (patterns, segmenter) = (config.heading_patterns()?, config.segmenter()?);
            let ingested = if require(&input)?.is_dir() {
                ingest_directory(&input, &patterns, &segmenter)?
            } else {
                let sentences = ingest_document(&input, &patterns, &segmenter)?;
                CorpusIngest {
                    documents: sentences.first().map(|s| s.doc_id.clone()).into_iter().collect(),
                    sentences,
                    skipped: Vec::new(),
                }
            };
            write_jsonl(&out, &ingested.sentences)?;
            stamp(&out, "ingest", ingested.sentences.len())?;
            println!(
                "{} sentences from {} documents ({} skipped) -> {}",
                ingested.sentences.len(),
                ingested.documents.len(),
                ingested.skipped.len(),
                out.display()
            );
        }

        Command::TrainRelevance {
            sentences,
            labeled,
            out,
        } => {
            #[derive(Deserialize)]
            struct Labeled {
                text: String,
                label: RelevanceLabel,
            }
            let data: Vec<(String, RelevanceLabel)> = match (sentences, labeled) {
                (_, Some(p)) => read_jsonl::<Labeled>(require(&p)?)?
                    .into_iter()
                    .map(|r| (r.text, r.label))
                    .collect(),
                (Some(p), None) => {
                    let lexicon = config.lexicon()?;
                    read_jsonl::<SentenceRecord>(require(&p)?)?
                        .into_iter()
                        .map(|s| {
                            let l = weak_label_lexicon(&s.text, &lexicon);
                            (s.text, l)
                        })
                        .collect()
                }
                (None, None) => bail!("give --sentences (lexicon weak labels) or --labeled"),
            };
            let model = train_relevance(&data, &config.relevance.model, config.relevance.seed)?;
            model.save(&out)?;
            stamp(&out, "train-relevance", data.len())?;
            println!(
                "trained on {} sentences, C = {} -> {}",
                data.len(),
                model.training_meta.c,
                out.display()
            );
        }

        Command::ClassifyRelevance { model, sentences, out } => {
            let model = LinearRelevanceModel::load(require(&model)?).map_err(|e| anyhow::anyhow!(e))?;
            let sentences: Vec<SentenceRecord> = read_jsonl(require(&sentences)?)?;
            let rows = classify_relevance(&model, &sentences);
            let esg = rows.iter().filter(|r| r.is_esg()).count();
            write_jsonl(&out, &rows)?;
            stamp(&out, "classify-relevance", rows.len())?;
            println!("{esg} of {} sentences ESG -> {}", rows.len(), out.display());
        }

        Command::AnnotateServe {
            sentences,
            store,
            model,
            predictions,
            port,
        } => {
            let corpus: Vec<SentenceRecord> = read_jsonl(require(&sentences)?)?;
            let store_dir = store.unwrap_or_else(|| config.service.store_dir.clone());
            let store = AnnotationStore::open(&store_dir, corpus)?;
            let state = ServiceState::new(store, &config)?;
            if let Some(m) = model {
                state.set_model(ClarityModel::load(require(&m)?)?, "v0");
            }
            if let Some(p) = predictions {
                let rows: Vec<SentencePrediction> = read_jsonl(require(&p)?)?;
                state.set_universe(&rows, &config.scoring);
            }
            let addr: SocketAddr = format!("{}:{}", config.service.host, port.unwrap_or(config.service.port))
                .parse()
                .context("service.host/port do not form a socket address")?;
            tokio::runtime::Runtime::new()?.block_on(serve(Arc::new(state), addr))?;
        }

        Command::TrainClarity {
            method,
            gold,
            encoder,
            out,
        } => {
            let gold = GoldDataset::read_jsonl(require(&gold)?)?;
            let encoder = match encoder {
                Some(p) => Some(Encoder::load(require(&p)?)?),
                None => None,
            };
            let method = match method {
                TrainMethod::Contrastive => ClarityMethod::Contrastive,
                TrainMethod::Prompt => ClarityMethod::Prompt,
            };
            let run = train_clarity_on_gold(&gold, method, &config, encoder)?;
            run.model.save(&out)?;
            write_json(out.join("splits.json"), &run.splits)?;
            write_json(out.join("metrics.json"), &run.test)?;
            stamp(&out.join("manifest.json"), "train-clarity", run.splits.train.len())?;
            println!(
                "trained on {} items in {:.1}s; test macro F1 {:.4} (n = {}) -> {}",
                run.splits.train.len(),
                run.seconds,
                run.test.macro_f1,
                run.test.n,
                out.display()
            );
        }

        Command::ClassifyClarity { model, input, out } => {
            let model = ClarityModel::load(require(&model)?)?;
            let rows: Vec<SentencePrediction> = read_jsonl(require(&input)?)?;
            let rows = classify_clarity(&model, rows);
            write_jsonl(&out, &rows)?;
            stamp(&out, "classify-clarity", rows.len())?;
            println!("{} sentences -> {}", rows.len(), out.display());
        }

        Command::Score { predictions, out } => {
            let rows: Vec<SentencePrediction> = read_jsonl(require(&predictions)?)?;
            let (scoring, _) = score_and_report(&rows, &config.scoring);
            fs::write(&out, scoring.to_csv()).with_context(|| format!("writing {}", out.display()))?;
            stamp(&out, "score", scoring.rows.len())?;
            let json = out.with_extension("json");
            write_json(&json, &scoring)?;
            stamp(&json, "score", scoring.rows.len())?;
            println!("{} documents scored -> {}", scoring.rows.len(), out.display());
        }

        Command::Rank { predictions, out } => {
            let rows: Vec<SentencePrediction> = read_jsonl(require(&predictions)?)?;
            let scores: Vec<_> = clarity_counts(&rows)
                .iter()
                .map(|c| language_score(c, &config.scoring))
                .collect();
            let mut csv = String::from("doc_id,score,rank\n");
            for r in rank_universe(&scores) {
                csv.push_str(&format!("{},{},{}\n", r.doc_id, r.score, r.rank));
            }
            fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
            stamp(&out, "rank", scores.len())?;
            println!("{} documents ranked -> {}", scores.len(), out.display());
        }

        Command::Evaluate {
            method,
            gold,
            splits,
            model,
            client,
            transcript,
            out,
        } => {
            let report = match method {
                EvalMethod::Finetuned => {
                    let model = ClarityModel::load(require(&model.context("--model is required")?)?)?;
                    let gold = GoldDataset::read_jsonl(require(&gold.context("--gold is required")?)?)?;
                    let items: Vec<(String, _)> = match splits {
                        Some(p) => gold.select(&read_json::<SplitSet>(require(&p)?)?.test),
                        None => gold.items.iter().map(|g| (g.text.clone(), g.label)).collect(),
                    };
                    let report = evaluate_clarity(&model, &items)?;
                    let texts: Vec<&str> = items.iter().map(|(t, _)| t.as_str()).collect();
                    let predicted: Vec<_> = predict_batch(&model, &texts).into_iter().map(|p| p.label).collect();
                    for e in error_table(&items, &predicted) {
                        eprintln!("misclassified [{} -> {}] {}", e.gold, e.predicted, e.sentence);
                    }
                    report
                }
                EvalMethod::Zeroshot => {
                    let items = match &gold {
                        Some(p) => GoldDataset::read_jsonl(require(p)?)?.items,
                        None => bundled_fixture(),
                    };
                    let client = match (client, transcript) {
                        (ClientKind::Replay, Some(p)) => GenerativeClient::replay(require(&p)?)?,
                        (ClientKind::Replay, None) => bundled_replay_client(),
                        (ClientKind::Remote, _) => {
                            GenerativeClient::Remote(RemoteClient::new(config.zeroshot.remote.clone().with_env()?)?)
                        }
                    };
                    let pairs: Vec<(&str, &str)> = items.iter().map(|g| (g.id.as_str(), g.text.as_str())).collect();
                    let verdicts = classify_zero_shot(&client, &config.zeroshot.template()?, &pairs)?;
                    let gold: Vec<_> = items.iter().map(|g| g.label).collect();
                    evaluate_zero_shot(&verdicts, &gold)?
                }
            };
            match out {
                Some(p) => {
                    write_json(&p, &report)?;
                    stamp(&p, "evaluate", report.n)?;
                    println!(
                        "macro F1 {:.4} over {} items -> {}",
                        report.macro_f1,
                        report.n,
                        p.display()
                    );
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }

        Command::Report {
            predictions,
            compare,
            format,
            out_dir,
        } => {
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            if !compare.is_empty() {
                let mut named = Vec::new();
                for spec in &compare {
                    let mut parts = spec.splitn(3, '=');
                    let (Some(name), Some(kind), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
                        bail!("--compare expects NAME=KIND=PATH, got {spec:?}");
                    };
                    let kind = match kind {
                        "finetuned" | "fine_tuned" => MethodKind::FineTuned,
                        "zeroshot" | "zero_shot" => MethodKind::ZeroShot,
                        other => bail!("unknown method kind {other:?}"),
                    };
                    let report: MetricsReport = read_json(require(Path::new(path))?)?;
                    named.push(NamedReport::new(name, kind, report));
                }
                let table = comparison_report(&named);
                fs::write(out_dir.join("comparison.md"), table.to_markdown())?;
                fs::write(out_dir.join("comparison.csv"), table.to_csv())?;
                print!("{}", table.to_markdown());
            }
            if let Some(p) = predictions {
                let rows: Vec<SentencePrediction> = read_jsonl(require(&p)?)?;
                let (_, reports) = score_and_report(&rows, &config.scoring);
                let (fmt, ext) = match format {
                    Format::Html => (ReportFormat::Html, "html"),
                    Format::Markdown => (ReportFormat::Markdown, "md"),
                };
                for r in &reports {
                    let path = out_dir.join(format!("{}.{ext}", sanitize(&r.doc_id)));
                    fs::write(&path, render_document_report(r, fmt))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                println!("{} reports -> {}", reports.len(), out_dir.display());
            }
        }

        Command::ImportDataset { input, out, splits_out } => {
            let report = import_dataset(require(&input)?, &config.annotation.import)?;
            report.dataset.write_jsonl(&out)?;
            stamp(&out, "import-dataset", report.dataset.len())?;
            let [s, a, g] = report.dataset.label_counts();
            println!(
                "{} rows: {} gold (Specific {s}, Ambiguous {a}, Generic {g}), {} Risk and {} NA skipped, {} invalid -> {}",
                report.rows,
                report.dataset.len(),
                report.skipped_risk,
                report.skipped_na,
                report.invalid.len(),
                out.display()
            );
            if let Some(p) = splits_out {
                let splits = make_splits(&report.dataset, config.annotation.splits, config.annotation.split_seed)?;
                write_json(&p, &splits)?;
                println!(
                    "splits train {} / validation {} / test {} -> {}",
                    splits.train.len(),
                    splits.validation.len(),
                    splits.test.len(),
                    p.display()
                );
            }
        }
    }
    Ok(())
}

/// Keep file names portable.
fn sanitize(doc_id: &str) -> String {
    doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}
