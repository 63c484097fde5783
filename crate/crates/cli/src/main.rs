use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bws_core::baseline::{self, EvalProtocol, Example, FeatureConfig, Hyperparameters, KrrModel};
use bws_core::corpus::{self, EmoticonTable, IngestOptions, LengthBounds, RawPost, Tokenizer};
use bws_core::design::{design_tuples, verify_design, DesignConfig, Tuple4};
use bws_core::io::{
    read_intensities_csv, read_jsonl_file, read_scores_csv, write_json_file, write_jsonl_file,
    write_scores_csv,
};
use bws_core::lexicon::{correlate_dimensions, distribution_report, load_lexicon};
use bws_core::popularity::{self, PopularitySeries, Variant};
use bws_core::reliability::{split_half_reliability, ShrConfig};
use bws_core::scoring::{
    aggregate_scores, annotator_profiles, filter_annotators, gold_map, scoring_judgments,
    CountingMode, GoldTuple, Judgment,
};
use bws_core::{metrics, Post};
use bws_service::{Durability, Service, ServiceConfig, ServiceState, SystemClock};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "bws",
    version,
    about = "Best-worst scaling toolkit for complaint intensity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and length-filter raw posts.
    Ingest(IngestArgs),
    /// Generate balanced 4-tuples over a corpus.
    Design(DesignArgs),
    /// Aggregate judgments into intensity scores.
    Score(ScoreArgs),
    /// Split-half reliability of a judgment set.
    Shr(ShrArgs),
    /// Lexicon correlations and score distribution report.
    Analyze(AnalyzeArgs),
    /// Kernel ridge intensity baseline.
    Baseline {
        #[command(subcommand)]
        command: BaselineCommand,
    },
    /// Popularity series and log-linear forecasting.
    Popularity {
        #[command(subcommand)]
        command: PopularityCommand,
    },
    /// Run the annotation service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    Characters,
    Lexicon,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cleaning report; printed to stdout as well.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = corpus::DEFAULT_MIN_TOKENS)]
    min_len: usize,
    #[arg(long, default_value_t = corpus::DEFAULT_MAX_TOKENS)]
    max_len: usize,
    /// JSON object mapping emoticons to text, merged over the built-in table.
    #[arg(long)]
    emoticons: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "characters")]
    tokenizer: TokenizerArg,
    /// Word list for the lexicon tokenizer (lexicon CSV).
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    multiplier: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CountingArg {
    PerJudgment,
    TupleMajority,
}

impl From<CountingArg> for CountingMode {
    fn from(c: CountingArg) -> Self {
        match c {
            CountingArg::PerJudgment => CountingMode::PerJudgment,
            CountingArg::TupleMajority => CountingMode::TupleMajority,
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long, default_value_t = bws_core::scoring::DEFAULT_GOLD_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "per-judgment")]
    counting: CountingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShrArgs {
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "per-judgment")]
    counting: CountingArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Mix,
    Cross,
}

#[derive(Args)]
struct FeatureArgs {
    /// log2 of the hash dimension.
    #[arg(long, default_value_t = 18)]
    hash_bits: u32,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    ngrams: Vec<usize>,
    #[arg(long)]
    binary: bool,
}

impl FeatureArgs {
    fn config(&self) -> Result<FeatureConfig> {
        let config = FeatureConfig {
            ngram_orders: self.ngrams.iter().copied().collect(),
            hash_dim: 1usize
                .checked_shl(self.hash_bits)
                .context("hash bits too large")?,
            binary_counts: self.binary,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum BaselineCommand {
    /// Fit on every scored post and write a model file.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Defaults to 1 / (hash_dim * feature variance).
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Evaluate with mix- or cross-hashtag splits.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_enum, default_value = "mix")]
        mode: ModeArg,
        /// Held-out hashtag for cross mode; every hashtag in turn when absent.
        #[arg(long)]
        held_out: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the dev-split grid search and use fixed hyperparameters.
        #[arg(long, requires = "gamma")]
        lambda: Option<f64>,
        #[arg(long, requires = "lambda")]
        gamma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Predict intensities for a corpus as a `post_id,score` CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// `post_id,score` CSV from annotation or from the baseline.
    #[arg(long)]
    intensities: PathBuf,
    #[arg(long, default_value_t = popularity::DEFAULT_BUCKET_HOURS)]
    bucket_hours: u32,
    /// Restrict to one hashtag.
    #[arg(long)]
    hashtag: Option<String>,
}

#[derive(Subcommand)]
enum PopularityCommand {
    /// Write one `t_index,post_count,density` CSV per hashtag plus index.json.
    Build {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a model per hashtag on the full series.
    Fit {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value = "density")]
        variant: Variant,
    },
    /// Chronological train/test evaluation per hashtag.
    Eval {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long, default_value = "density")]
        variant: Variant,
        #[arg(long, default_value_t = popularity::DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
        /// Per-bucket actual vs predicted CSV.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    journal: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 0.1)]
    gold_rate: f64,
    #[arg(long, default_value_t = 3)]
    judgments_per_tuple: u32,
    #[arg(long, default_value_t = 30)]
    ttl_minutes: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = bws_core::scoring::DEFAULT_GOLD_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 5)]
    min_gold: u32,
    /// Flush journal writes without fsync.
    #[arg(long)]
    no_fsync: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Design(a) => design(a),
        Command::Score(a) => score(a),
        Command::Shr(a) => shr(a),
        Command::Analyze(a) => analyze(a),
        Command::Baseline { command } => baseline_cmd(command),
        Command::Popularity { command } => popularity_cmd(command),
        Command::Serve(a) => serve(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>> {
    read_jsonl_file(path).with_context(|| format!("reading {what} from {}", path.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let raws: Vec<RawPost> = load(&a.input, "raw posts")?;
    let mut table = EmoticonTable::builtin();
    if let Some(path) = &a.emoticons {
        let json =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let extra: BTreeMap<String, String> =
            serde_json::from_str(&json).with_context(|| format!("parsing {}", path.display()))?;
        table.extend(extra);
    }
    let lexicon = match (a.tokenizer, &a.lexicon) {
        (TokenizerArg::Lexicon, Some(p)) => Some(load_lexicon(p)?),
        (TokenizerArg::Lexicon, None) => bail!("--tokenizer lexicon needs --lexicon"),
        (TokenizerArg::Characters, _) => None,
    };
    let tokenizer = match &lexicon {
        Some(l) => Tokenizer::LongestMatch(l.words()),
        None => Tokenizer::Characters,
    };
    let options = IngestOptions {
        bounds: LengthBounds {
            min_tokens: a.min_len,
            max_tokens: a.max_len,
        },
        tokenizer,
        emoticons: &table,
    };
    let (posts, report) = corpus::ingest(&raws, &options)?;
    write_jsonl_file(&a.out, &posts)?;
    if let Some(path) = &a.report {
        write_json_file(path, &report)?;
    }
    print_json(&report)
}

fn design(a: DesignArgs) -> Result<()> {
    let posts: Vec<Post> = load(&a.corpus, "corpus")?;
    let n = posts.len();
    if posts.iter().enumerate().any(|(i, p)| p.id != i) {
        bail!("corpus post ids must be dense 0..n in order");
    }
    let config = DesignConfig::new(n, a.seed).with_multiplier(a.multiplier);
    let (tuples, stats) = design_tuples(&config)?;
    if let Err(violations) = verify_design(&tuples, n) {
        for v in &violations {
            eprintln!("{v}");
        }
        bail!("generated design failed verification");
    }
    write_jsonl_file(&a.out, &tuples)?;
    if let Some(path) = &a.stats {
        write_json_file(path, &stats)?;
    }
    print_json(&stats)
}

#[derive(Serialize)]
struct ScoreSummary {
    n_judgments: usize,
    n_used: usize,
    annotators_rejected: Vec<String>,
    annotators_unscreened: Vec<String>,
    n_scored_posts: usize,
    unjudged_posts: Vec<usize>,
}

fn score(a: ScoreArgs) -> Result<()> {
    let tuples: Vec<Tuple4> = load(&a.tuples, "tuples")?;
    let judgments: Vec<Judgment> = load(&a.judgments, "judgments")?;
    let gold: Vec<GoldTuple> = match &a.gold {
        Some(p) => load(p, "gold tuples")?,
        None => Vec::new(),
    };
    let answers = gold_map(&gold);
    let (profiles, unscreened) = annotator_profiles(&judgments, &answers, a.threshold);
    let (_, rejected) = filter_annotators(&profiles, a.threshold);
    let used = scoring_judgments(&judgments, &rejected, &answers);
    let agg = aggregate_scores(&tuples, &used, a.counting.into())?;
    let out = BufWriter::new(
        File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?,
    );
    write_scores_csv(out, &agg.scores)?;
    print_json(&ScoreSummary {
        n_judgments: judgments.len(),
        n_used: used.len(),
        annotators_rejected: rejected.into_iter().collect(),
        annotators_unscreened: unscreened,
        n_scored_posts: agg.scores.len(),
        unjudged_posts: agg.unjudged_posts,
    })
}

fn shr(a: ShrArgs) -> Result<()> {
    let tuples: Vec<Tuple4> = load(&a.tuples, "tuples")?;
    let judgments: Vec<Judgment> = load(&a.judgments, "judgments")?;
    let config = ShrConfig {
        repeats: a.repeats,
        counting: a.counting.into(),
        ..ShrConfig::new(a.seed)
    };
    print_json(&split_half_reliability(&tuples, &judgments, &config)?)
}

fn read_scores(path: &Path) -> Result<Vec<bws_core::IntensityScore>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_scores_csv(BufReader::new(f))?)
}

#[derive(Serialize)]
struct CorrelationRow {
    dimension: String,
    pearson: Option<f64>,
    n_used: Option<usize>,
    n_excluded: Option<usize>,
    error: Option<String>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    correlations: Vec<CorrelationRow>,
    distribution: bws_core::lexicon::DistributionReport,
    modal_bin: u8,
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let posts: Vec<Post> = load(&a.corpus, "corpus")?;
    let scores = read_scores(&a.scores)?;
    let lexicon = load_lexicon(&a.lexicon)?;
    let correlations = correlate_dimensions(&posts, &scores, &lexicon)
        .into_iter()
        .map(|(dimension, result)| match result {
            Ok(c) => CorrelationRow {
                dimension: dimension.to_string(),
                pearson: Some(c.pearson),
                n_used: Some(c.n_used),
                n_excluded: Some(c.n_excluded),
                error: None,
            },
            Err(e) => CorrelationRow {
                dimension: dimension.to_string(),
                pearson: None,
                n_used: None,
                n_excluded: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let distribution = distribution_report(&posts, &scores);
    let report = AnalyzeReport {
        correlations,
        modal_bin: distribution.modal_bin(),
        distribution,
    };
    write_json_file(&a.out, &report)?;
    print_json(&report)
}

fn labelled_examples(corpus: &Path, scores: &Path) -> Result<Vec<Example>> {
    let posts: Vec<Post> = load(corpus, "corpus")?;
    let scores: HashMap<usize, f64> = read_scores(scores)?
        .into_iter()
        .map(|s| (s.post_id, s.score))
        .collect();
    Ok(posts
        .into_iter()
        .filter_map(|p| {
            scores.get(&p.id).map(|&target| Example {
                text: p.text,
                hashtag: p.hashtag,
                target,
            })
        })
        .collect())
}

fn baseline_cmd(command: BaselineCommand) -> Result<()> {
    match command {
        BaselineCommand::Train {
            corpus,
            scores,
            out,
            lambda,
            gamma,
            features,
        } => {
            let config = features.config()?;
            let examples = labelled_examples(&corpus, &scores)?;
            let texts: Vec<&str> = examples.iter().map(|e| e.text.as_str()).collect();
            let x = baseline::extract_all(&texts, &config);
            let y: Vec<f64> = examples.iter().map(|e| e.target).collect();
            let gamma = gamma.unwrap_or_else(|| baseline::scale_gamma(&x, config.hash_dim));
            let model = baseline::train(&config, x, &y, lambda, gamma)?;
            let file = BufWriter::new(
                File::create(&out).with_context(|| format!("creating {}", out.display()))?,
            );
            model.write_to(file)?;
            print_json(&serde_json::json!({
                "n_train": y.len(),
                "lambda": lambda,
                "gamma": gamma,
                "model": out,
            }))
        }
        BaselineCommand::Eval {
            corpus,
            scores,
            mode,
            held_out,
            seed,
            lambda,
            gamma,
            out,
            features,
        } => {
            let config = features.config()?;
            let examples = labelled_examples(&corpus, &scores)?;
            let protocol = match mode {
                ModeArg::Mix => EvalProtocol::mix(seed),
                ModeArg::Cross => EvalProtocol::cross(held_out, seed),
            };
            let hyper = match (lambda, gamma) {
                (Some(lambda), Some(gamma)) => Hyperparameters::Fixed { lambda, gamma },
                _ => Hyperparameters::default(),
            };
            let report = baseline::evaluate(&examples, &protocol, &config, &hyper)?;
            if let Some(path) = &out {
                write_json_file(path, &report)?;
            }
            print_json(&report)
        }
        BaselineCommand::Predict { model, corpus, out } => {
            let file =
                File::open(&model).with_context(|| format!("opening {}", model.display()))?;
            let model = KrrModel::read_from(BufReader::new(file))?;
            let posts: Vec<Post> = load(&corpus, "corpus")?;
            let texts: Vec<&str> = posts.iter().map(|p| p.text.as_str()).collect();
            let predictions = model.predict_texts(&texts);
            let mut w = csv_writer(&out)?;
            writeln!(w, "post_id,score")?;
            for (p, s) in posts.iter().zip(predictions) {
                writeln!(w, "{},{}", p.id, s)?;
            }
            w.flush()?;
            eprintln!("wrote {} predictions to {}", posts.len(), out.display());
            Ok(())
        }
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_series(a: &SeriesArgs) -> Result<BTreeMap<String, PopularitySeries>> {
    let mut posts: Vec<Post> = load(&a.corpus, "corpus")?;
    if let Some(h) = &a.hashtag {
        posts.retain(|p| &p.hashtag == h);
        if posts.is_empty() {
            bail!("no posts under hashtag {h:?}");
        }
    }
    let file = File::open(&a.intensities)
        .with_context(|| format!("opening {}", a.intensities.display()))?;
    let intensities = read_intensities_csv(BufReader::new(file))?;
    Ok(popularity::build_all_series(
        &posts,
        &intensities,
        a.bucket_hours,
    )?)
}

#[derive(Serialize)]
struct SeriesIndexEntry<'a> {
    hashtag: &'a str,
    file: String,
    start_timestamp: i64,
    bucket_hours: u32,
    buckets: usize,
}

#[derive(Serialize)]
struct EvalSummary {
    variant: Variant,
    hashtags: BTreeMap<String, serde_json::Value>,
    rmse_mean: Option<f64>,
    rmse_std: Option<f64>,
    mae_mean: Option<f64>,
    mae_std: Option<f64>,
}

fn popularity_cmd(command: PopularityCommand) -> Result<()> {
    match command {
        PopularityCommand::Build { series, out_dir } => {
            let all = load_series(&series)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut index = Vec::new();
            for (k, (hashtag, s)) in all.iter().enumerate() {
                let file = format!("series_{k:03}.csv");
                s.write_csv(csv_writer(&out_dir.join(&file))?)?;
                index.push(SeriesIndexEntry {
                    hashtag,
                    file,
                    start_timestamp: s.start_timestamp,
                    bucket_hours: s.bucket_hours,
                    buckets: s.buckets.len(),
                });
            }
            write_json_file(out_dir.join("index.json"), &index)?;
            print_json(&index)
        }
        PopularityCommand::Fit { series, variant } => {
            let all = load_series(&series)?;
            let fits: BTreeMap<&String, serde_json::Value> = all
                .iter()
                .map(|(h, s)| {
                    let v = match popularity::fit(s, variant) {
                        Ok(m) => serde_json::to_value(m).expect("model serializes"),
                        Err(e) => serde_json::json!({ "error": e.to_string() }),
                    };
                    (h, v)
                })
                .collect();
            print_json(&fits)
        }
        PopularityCommand::Eval {
            series,
            variant,
            train_fraction,
            predictions,
        } => {
            let all = load_series(&series)?;
            let results = popularity::evaluate_all(&all, variant, train_fraction);
            let mut hashtags = BTreeMap::new();
            let (mut rmses, mut maes) = (Vec::new(), Vec::new());
            let mut pred_out = predictions.as_deref().map(csv_writer).transpose()?;
            if let Some(w) = &mut pred_out {
                writeln!(w, "hashtag,t_index,actual,predicted")?;
            }
            for (h, r) in &results {
                match r {
                    Ok(e) => {
                        rmses.push(e.rmse);
                        maes.push(e.mae);
                        if let Some(w) = &mut pred_out {
                            for b in &e.test {
                                writeln!(
                                    w,
                                    "{},{},{},{}",
                                    csv_field(h),
                                    b.t_index,
                                    b.actual,
                                    b.predicted
                                )?;
                            }
                        }
                        hashtags.insert(
                            h.clone(),
                            serde_json::json!({
                                "rmse": e.rmse,
                                "mae": e.mae,
                                "n_train_buckets": e.n_train_buckets,
                                "n_test_buckets": e.test.len(),
                                "model": e.model,
                            }),
                        );
                    }
                    Err(err) => {
                        hashtags.insert(h.clone(), serde_json::json!({ "error": err.to_string() }));
                    }
                }
            }
            if let Some(mut w) = pred_out {
                w.flush()?;
            }
            let rmse = metrics::mean_and_std(&rmses);
            let mae = metrics::mean_and_std(&maes);
            print_json(&EvalSummary {
                variant,
                hashtags,
                rmse_mean: rmse.map(|m| m.0),
                rmse_std: rmse.map(|m| m.1),
                mae_mean: mae.map(|m| m.0),
                mae_std: mae.map(|m| m.1),
            })
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let posts: Vec<Post> = load(&a.corpus, "corpus")?;
    let tuples: Vec<Tuple4> = load(&a.tuples, "tuples")?;
    let gold: Vec<GoldTuple> = match &a.gold {
        Some(p) => load(p, "gold tuples")?,
        None => Vec::new(),
    };
    let config = ServiceConfig {
        judgments_per_tuple: a.judgments_per_tuple,
        gold_rate: a.gold_rate,
        assignment_ttl_ms: a.ttl_minutes * 60 * 1000,
        seed: a.seed,
        rejection_threshold: a.threshold,
        min_gold_judgments: a.min_gold,
    };
    let state = ServiceState::new(
        config,
        posts.into_iter().map(|p| (p.id, p.text)),
        &tuples,
        &gold,
    )?;
    let durability = if a.no_fsync {
        Durability::Flush
    } else {
        Durability::Sync
    };
    let service = Service::open(state, &a.journal, durability, Arc::new(SystemClock))
        .with_context(|| format!("replaying journal {}", a.journal.display()))?;
    let progress = service.progress();
    eprintln!(
        "replayed journal: {} judgments, {}/{} tuples complete",
        progress.judgments_total, progress.tuples_complete, progress.tuples_total
    );
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        bws_service::http::serve(listener, service.into_shared()).await?;
        Ok(())
    })
}
