//! Command-line front end: argument parsing, configuration resolution,
//! stage orchestration, and artifact writing.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 usage or
//! configuration error, 2 data error (unreadable/malformed inputs).

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::chart::{emit_chart, ChartError, ChartSpec};
use crate::config::{ConfigError, LdaGranularity, PartialConfig, RunConfig};
use crate::ingest::{
    build_corpus, parse_episodes, parse_script_lines, Corpus, IngestError, IngestSummary,
};
use crate::keywords::{
    build_keyword_set, bundled_exclusions, bundled_token_lists, extract_top_terms,
    keyword_rate_series, load_token_list, similarity_matrix, tfidf_vectors, DocumentSet,
    KeywordSet, KeywordsError,
};
use crate::lexstats::{
    entropy, heaps_fit, lexical_diversity, zipf_fit, FrequencyTable, LexStatsError,
};
use crate::normalize::{filter_stopwords, stem, tokenize, NormalizeError, StopList, TokenStream};
use crate::report::{
    emit_tables, fmt_sig, write_json, OutputFormat, ReportError, RunManifest, Table,
};
use crate::sentiment::{yearly_sentiment, SentimentError, ValenceLexicon};
use crate::topics::{
    build_vocabulary, coherence_sweep, fit_lda, top_topic_words, umass_coherence, LdaConfig,
    TopicsError,
};

/// The bundled keyword lists track an event in this year, so year-axis
/// charts carry a dashed reference line there.
const REFERENCE_YEAR_MARKER: f64 = 2001.0;

#[derive(Parser, Debug)]
#[command(
    name = "diachron",
    version,
    about = "Diachronic dialogue-corpus analytics: lexical statistics, sentiment, \
             keyword tracking, and topic modeling over year-partitioned scripts",
    after_help = "Option precedence: command-line flag > config file > \
                  DIACHRON_OUT environment variable (out dir only) > built-in default."
)]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
    #[command(flatten)]
    opts: CliOpts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    /// Parse, clean, and join the script and episode files
    Ingest,
    /// Frequency table, top words (overall and per year), entropy
    Stats,
    /// Rank-frequency power-law fit
    Zipf,
    /// Vocabulary-growth fit
    Heaps,
    /// Per-line valence scoring averaged by year
    Sentiment,
    /// TF-IDF document comparison and keyword-rate tracking
    Keywords,
    /// LDA topic modeling with a coherence sweep
    Topics,
    /// Every stage above, in order
    All,
}

#[derive(Args, Debug, Default)]
struct CliOpts {
    /// INI-style config file (`key = value`); flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Script lines CSV (columns id, episode_id, speaking_line, raw_text)
    #[arg(long = "script", global = true, value_name = "FILE")]
    script_csv: Option<PathBuf>,

    /// Episode metadata CSV (columns id, original_air_date, title)
    #[arg(long = "episodes", global = true, value_name = "FILE")]
    episodes_csv: Option<PathBuf>,

    /// Stop-word list, one word per line [default: bundled list]
    #[arg(long, global = true, value_name = "FILE")]
    stoplist: Option<PathBuf>,

    /// Valence lexicon [default: bundled lexicon]
    #[arg(long, global = true, value_name = "FILE")]
    lexicon: Option<PathBuf>,

    /// Generic contrast text for TF-IDF keyword extraction
    #[arg(long = "reference-text", global = true, value_name = "FILE")]
    reference_text: Option<PathBuf>,

    /// Topic-specific text to extract keywords from (repeatable)
    #[arg(long = "topic-text", global = true, value_name = "FILE", action = ArgAction::Append)]
    topic_texts: Option<Vec<PathBuf>>,

    /// Keyword exclusion list [default: bundled list]
    #[arg(long, global = true, value_name = "FILE")]
    exclusions: Option<PathBuf>,

    /// Output directory [default: $DIACHRON_OUT, else ./out]
    #[arg(long = "out", global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Table format [default: csv]
    #[arg(long, global = true, value_enum, value_name = "FMT")]
    format: Option<FormatArg>,

    /// Rows in top-term tables and extracted keyword lists [default: 50]
    #[arg(long = "top-k", global = true, value_name = "N")]
    top_k: Option<usize>,

    /// Lowest frequency a rank may have and still enter the Zipf fit
    /// [default: 3]
    #[arg(long = "min-freq", global = true, value_name = "N")]
    min_freq: Option<usize>,

    /// Vocabulary-growth sampling stride in tokens [default: 1000]
    #[arg(long = "sample-every", global = true, value_name = "N")]
    sample_every: Option<usize>,

    /// Topic count for a single LDA fit [default: 20]
    #[arg(long = "num-topics", global = true, value_name = "K")]
    num_topics: Option<usize>,

    /// Document-topic smoothing [default: 50/K]
    #[arg(long, global = true, value_name = "X")]
    alpha: Option<f64>,

    /// Topic-word smoothing [default: 0.01]
    #[arg(long, global = true, value_name = "X")]
    beta: Option<f64>,

    /// Gibbs sampling sweeps [default: 1000]
    #[arg(long, global = true, value_name = "N")]
    iterations: Option<usize>,

    /// Drop tokens appearing in fewer than N documents [default: 5]
    #[arg(long = "min-df", global = true, value_name = "N")]
    min_df: Option<usize>,

    /// Drop tokens appearing in more than this fraction of documents
    /// [default: 0.5]
    #[arg(long = "max-df-fraction", global = true, value_name = "X")]
    max_df_fraction: Option<f64>,

    /// Topic counts to sweep with coherence scoring, e.g. 25,50,75
    /// [default: none — fit num-topics only]
    #[arg(long = "k-values", global = true, value_name = "K,K,...", value_delimiter = ',')]
    k_values: Option<Vec<usize>>,

    /// Top words per topic entering the coherence score [default: 10]
    #[arg(long = "coherence-top-n", global = true, value_name = "N")]
    coherence_top_n: Option<usize>,

    /// Sweep plateau tolerance [default: 2% of the best score magnitude]
    #[arg(long = "plateau-epsilon", global = true, value_name = "X")]
    plateau_epsilon: Option<f64>,

    /// Keep stop words in the frequency/entropy/Zipf/Heaps statistics
    #[arg(long = "include-stopwords-in-stats", global = true, action = ArgAction::Count)]
    include_stopwords_in_stats: u8,

    /// One LDA document per episode or per line [default: episode]
    #[arg(long = "lda-granularity", global = true, value_enum, value_name = "UNIT")]
    lda_granularity: Option<GranularityArg>,

    /// Random seed for topic modeling [default: 42]
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum GranularityArg {
    Episode,
    Line,
}

impl CliOpts {
    fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            script_csv: self.script_csv.clone(),
            episodes_csv: self.episodes_csv.clone(),
            stoplist: self.stoplist.clone(),
            lexicon: self.lexicon.clone(),
            reference_text: self.reference_text.clone(),
            topic_texts: self.topic_texts.clone(),
            exclusions: self.exclusions.clone(),
            out_dir: self.out_dir.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            }),
            top_k: self.top_k,
            min_freq: self.min_freq,
            sample_every: self.sample_every,
            num_topics: self.num_topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            min_df: self.min_df,
            max_df_fraction: self.max_df_fraction,
            k_values: self.k_values.clone(),
            coherence_top_n: self.coherence_top_n,
            plateau_epsilon: self.plateau_epsilon,
            include_stopwords_in_stats: (self.include_stopwords_in_stats > 0).then_some(true),
            lda_granularity: self.lda_granularity.map(|g| match g {
                GranularityArg::Episode => LdaGranularity::Episode,
                GranularityArg::Line => LdaGranularity::Line,
            }),
            seed: self.seed,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),+) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )+};
}
data_error_from!(
    IngestError,
    NormalizeError,
    LexStatsError,
    SentimentError,
    KeywordsError,
    TopicsError,
    ReportError,
    ChartError
);

/// Parses `argv` and runs the named stage(s). Returns the process exit
/// code; all diagnostics go to standard error, stage summaries to
/// standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let from_file = match &cli.opts.config {
        Some(path) => PartialConfig::from_ini_file(path)?,
        None => PartialConfig::default(),
    };
    let cfg = cli
        .opts
        .to_partial()
        .merged_over(from_file)
        .resolve(std::env::var("DIACHRON_OUT").ok());
    let mut runner = StageRunner::new(cfg, cli.opts.config.as_deref())?;
    match cli.stage {
        Stage::Ingest => runner.ingest()?,
        Stage::Stats => runner.stats()?,
        Stage::Zipf => runner.zipf()?,
        Stage::Heaps => runner.heaps()?,
        Stage::Sentiment => runner.sentiment()?,
        Stage::Keywords => runner.keywords()?,
        Stage::Topics => runner.topics()?,
        Stage::All => {
            runner.ingest()?;
            runner.stats()?;
            runner.zipf()?;
            runner.heaps()?;
            runner.sentiment()?;
            runner.keywords()?;
            runner.topics()?;
        }
    }
    runner.finish()
}

struct StageRunner {
    cfg: RunConfig,
    stop: StopList,
    lexicon: ValenceLexicon,
    manifest: RunManifest<RunConfig>,
    corpus: Option<Corpus>,
    summary: Option<IngestSummary>,
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("reading {}: {e}", path.display())))
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("reading {}: {e}", path.display())))
}

impl StageRunner {
    /// Validates every configured input path, creates the output
    /// directory, and loads the stop list and lexicon (bundled versions
    /// when no file is given).
    fn new(cfg: RunConfig, config_file: Option<&Path>) -> Result<StageRunner, CliError> {
        let mut inputs: Vec<&Path> = Vec::new();
        inputs.extend(config_file);
        for p in [
            &cfg.script_csv,
            &cfg.episodes_csv,
            &cfg.stoplist,
            &cfg.lexicon,
            &cfg.reference_text,
            &cfg.exclusions,
        ]
        .into_iter()
        .flatten()
        {
            inputs.push(p);
        }
        inputs.extend(cfg.topic_texts.iter().map(PathBuf::as_path));
        for p in &inputs {
            if !p.is_file() {
                return Err(CliError::Data(format!(
                    "input file not found: {}",
                    p.display()
                )));
            }
        }
        if cfg.sample_every == 0 {
            return Err(usage("--sample-every must be at least 1"));
        }
        if cfg.num_topics == 0 {
            return Err(usage("--num-topics must be at least 1"));
        }
        if cfg.coherence_top_n < 2 {
            return Err(usage("--coherence-top-n must be at least 2"));
        }
        if cfg.k_values.iter().any(|&k| k == 0) {
            return Err(usage("--k-values entries must be at least 1"));
        }
        std::fs::create_dir_all(&cfg.out_dir).map_err(|e| {
            CliError::Data(format!("creating {}: {e}", cfg.out_dir.display()))
        })?;

        let stop = match &cfg.stoplist {
            Some(p) => StopList::load(p)?,
            None => StopList::bundled(),
        };
        let lexicon = match &cfg.lexicon {
            Some(p) => ValenceLexicon::load(p)?,
            None => ValenceLexicon::bundled(),
        };
        let mut manifest = RunManifest::new(cfg.clone(), cfg.seed);
        for p in inputs {
            manifest.record_input(p)?;
        }
        Ok(StageRunner {
            cfg,
            stop,
            lexicon,
            manifest,
            corpus: None,
            summary: None,
        })
    }

    fn ensure_corpus(&mut self) -> Result<(), CliError> {
        if self.corpus.is_some() {
            return Ok(());
        }
        let script = self.cfg.script_csv.clone().ok_or_else(|| {
            usage("this stage needs the script CSV: pass --script <FILE> or set script_csv in the config file")
        })?;
        let episodes = self.cfg.episodes_csv.clone().ok_or_else(|| {
            usage("this stage needs the episode CSV: pass --episodes <FILE> or set episodes_csv in the config file")
        })?;
        let parse = parse_script_lines(open(&script)?)?;
        let eps = parse_episodes(open(&episodes)?)?;
        let build = build_corpus(&parse.lines, &eps)?;
        self.summary = Some(IngestSummary::new(&parse, &build));
        self.corpus = Some(build.corpus);
        Ok(())
    }

    fn corpus(&self) -> &Corpus {
        self.corpus.as_ref().expect("corpus loaded by ensure_corpus")
    }

    /// The token stream lexical statistics run on: the whole corpus in
    /// line order, stop-filtered unless configured otherwise, unstemmed.
    fn stats_stream(&mut self) -> Result<TokenStream, CliError> {
        self.ensure_corpus()?;
        let all = TokenStream::from_corpus(self.corpus());
        Ok(if self.cfg.include_stopwords_in_stats {
            all
        } else {
            filter_stopwords(&all, &self.stop)
        })
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn write_tables(&mut self, tables: &[Table]) -> Result<(), CliError> {
        let paths = emit_tables(tables, self.cfg.format, &self.cfg.out_dir)?;
        for p in &paths {
            self.manifest.record_output(p);
        }
        Ok(())
    }

    fn write_json_artifact<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.out_path(name);
        write_json(&path, value)?;
        self.manifest.record_output(&path);
        Ok(())
    }

    fn write_chart(&mut self, spec: &ChartSpec, name: &str) -> Result<(), CliError> {
        let path = self.out_path(name);
        emit_chart(spec, &path)?;
        self.manifest.record_output(&path);
        Ok(())
    }

    fn ingest(&mut self) -> Result<(), CliError> {
        self.ensure_corpus()?;
        let summary = self.summary.clone().expect("summary set with corpus");
        self.write_json_artifact("ingest_summary.json", &summary)?;
        println!(
            "ingest: kept {} lines across {} years ({} speaking of {} read; dropped {} unmatched, {} empty)",
            summary.cleaned_lines,
            summary.years.len(),
            summary.speaking_lines,
            summary.lines_read,
            summary.dropped_unmatched,
            summary.dropped_empty
        );
        Ok(())
    }

    fn stats(&mut self) -> Result<(), CliError> {
        let ts = self.stats_stream()?;
        let ft = FrequencyTable::from_tokens(ts.iter());
        let diversity = lexical_diversity(&ts)?;
        let entropy_bits = entropy(&ft)?;

        let mut frequency = Table::new("frequency", &["rank", "token", "count", "probability"]);
        let total = ft.total() as f64;
        for (i, token) in ft.ranking().iter().enumerate() {
            let count = ft.count(token);
            frequency.push_row(vec![
                (i + 1).to_string(),
                token.clone(),
                count.to_string(),
                fmt_sig(count as f64 / total),
            ]);
        }

        let mut top_words = Table::new("top_words", &["rank", "token", "count"]);
        for (i, (token, count)) in ft.top_k(self.cfg.top_k).into_iter().enumerate() {
            top_words.push_row(vec![(i + 1).to_string(), token.to_string(), count.to_string()]);
        }

        // one row per year: that year's most frequent token and its count
        let mut per_year = Table::new("top_words_per_year", &["year", "token", "count"]);
        let stats_stop = if self.cfg.include_stopwords_in_stats {
            StopList::empty()
        } else {
            self.stop.clone()
        };
        for year in self.corpus().years() {
            let tokens: Vec<String> = self
                .corpus()
                .lines_for_year(year)
                .flat_map(|l| filter_stopwords(&tokenize(&l.text), &stats_stop).tokens)
                .collect();
            let yft = FrequencyTable::from_tokens(tokens.iter().map(String::as_str));
            if let Some(top) = yft.ranking().first() {
                per_year.push_row(vec![year.to_string(), top.clone(), yft.count(top).to_string()]);
            }
        }

        self.write_tables(&[frequency, top_words, per_year])?;
        self.write_json_artifact("entropy.json", &serde_json::json!({ "entropy_bits": entropy_bits }))?;
        println!(
            "stats: {} tokens, {} types, entropy {} bits, lexical diversity {}",
            ft.total(),
            ft.vocab_size(),
            fmt_sig(entropy_bits),
            fmt_sig(diversity)
        );
        Ok(())
    }

    fn zipf(&mut self) -> Result<(), CliError> {
        let ts = self.stats_stream()?;
        let ft = FrequencyTable::from_tokens(ts.iter());
        let fit = zipf_fit(&ft, self.cfg.min_freq as u64)?;
        self.write_json_artifact(
            "zipf.json",
            &serde_json::json!({ "alpha": fit.alpha, "r_squared": fit.r_squared }),
        )?;
        self.write_chart(
            &ChartSpec {
                title: "Rank-frequency (log-log)".into(),
                x_label: "log2 rank".into(),
                y_label: "log2 frequency".into(),
                series: fit.points.clone(),
                markers: vec![],
            },
            "zipf.svg",
        )?;
        println!(
            "zipf: alpha {}, r^2 {} over {} ranks",
            fmt_sig(fit.alpha),
            fmt_sig(fit.r_squared),
            fit.points.len()
        );
        Ok(())
    }

    fn heaps(&mut self) -> Result<(), CliError> {
        let ts = self.stats_stream()?;
        let fit = heaps_fit(&ts, self.cfg.sample_every)?;
        let mut curve = Table::new("heaps_curve", &["n", "V"]);
        for &(n, v) in &fit.curve {
            curve.push_row(vec![n.to_string(), v.to_string()]);
        }
        self.write_tables(&[curve])?;
        self.write_json_artifact(
            "heaps.json",
            &serde_json::json!({ "K": fit.k_param, "beta": fit.beta }),
        )?;
        self.write_chart(
            &ChartSpec {
                title: "Vocabulary growth".into(),
                x_label: "tokens seen".into(),
                y_label: "distinct tokens".into(),
                series: fit
                    .curve
                    .iter()
                    .map(|&(n, v)| (n as f64, v as f64))
                    .collect(),
                markers: vec![],
            },
            "heaps.svg",
        )?;
        println!(
            "heaps: K {}, beta {}, r^2 {} ({} samples)",
            fmt_sig(fit.k_param),
            fmt_sig(fit.beta),
            fmt_sig(fit.r_squared),
            fit.curve.len()
        );
        Ok(())
    }

    fn sentiment(&mut self) -> Result<(), CliError> {
        self.ensure_corpus()?;
        let report = yearly_sentiment(self.corpus(), &self.lexicon);

        let mut by_year = Table::new(
            "sentiment_by_year",
            &["year", "mean_compound", "line_count"],
        );
        for y in &report.years {
            by_year.push_row(vec![
                y.year.to_string(),
                fmt_sig(y.mean_compound),
                y.line_count.to_string(),
            ]);
        }
        self.write_tables(&[by_year])?;
        self.write_json_artifact(
            "sentiment_extremes.json",
            &serde_json::json!({ "min": report.min, "max": report.max }),
        )?;
        if report.years.len() >= 1 {
            self.write_chart(
                &ChartSpec {
                    title: "Mean sentiment per year".into(),
                    x_label: "year".into(),
                    y_label: "mean compound score".into(),
                    series: report
                        .years
                        .iter()
                        .map(|y| (y.year as f64, y.mean_compound))
                        .collect(),
                    markers: vec![REFERENCE_YEAR_MARKER],
                },
                "sentiment_by_year.svg",
            )?;
        }
        let grand_mean = report.years.iter().map(|y| y.mean_compound).sum::<f64>()
            / report.years.len().max(1) as f64;
        println!(
            "sentiment: {} years, grand mean compound {}",
            report.years.len(),
            fmt_sig(grand_mean)
        );
        Ok(())
    }

    /// Builds the keyword set: extracted from supplied texts via TF-IDF
    /// against the reference text when texts are given, otherwise the
    /// bundled lists; the exclusion file (bundled by default) is applied
    /// in both cases.
    fn keyword_set(&mut self) -> Result<(KeywordSet, Option<usize>), CliError> {
        let exclusions: HashSet<String> = match &self.cfg.exclusions {
            Some(p) => load_token_list(open(p)?)?.into_iter().collect(),
            None => bundled_exclusions(),
        };
        if self.cfg.topic_texts.is_empty() {
            return Ok((build_keyword_set(&bundled_token_lists(), &exclusions), None));
        }

        let mut paths: Vec<&PathBuf> = self.cfg.topic_texts.iter().collect();
        let n_topic_docs = paths.len();
        if let Some(r) = &self.cfg.reference_text {
            paths.push(r);
        }
        if paths.len() < 2 {
            return Err(usage(
                "TF-IDF keyword extraction needs at least two documents: \
                 pass more --topic-text files or add --reference-text",
            ));
        }
        let mut docs = Vec::new();
        for p in &paths {
            let raw = read_to_string(p)?;
            let doc_id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            docs.push((doc_id, DocumentSet::clean_text_document(&raw, &self.stop)));
        }
        let ds = DocumentSet::new(docs)?;
        let vectors = tfidf_vectors(&ds)?;

        // similarity matrix over all supplied documents
        let sim = similarity_matrix(&vectors);
        let ids: Vec<String> = vectors.iter().map(|v| v.doc_id.clone()).collect();
        let mut headers = vec!["doc_id".to_string()];
        headers.extend(ids.iter().cloned());
        let mut table = Table {
            name: "similarity".into(),
            headers,
            rows: Vec::new(),
        };
        for (i, row) in sim.iter().enumerate() {
            let mut cells = vec![ids[i].clone()];
            cells.extend(row.iter().map(|&v| fmt_sig(v)));
            table.rows.push(cells);
        }
        self.write_tables(&[table])?;

        // keyword lists come from the topic documents only
        let lists: Vec<Vec<String>> = vectors[..n_topic_docs]
            .iter()
            .map(|v| {
                extract_top_terms(v, self.cfg.top_k)
                    .into_iter()
                    .map(|(t, _)| t)
                    .collect()
            })
            .collect();
        Ok((build_keyword_set(&lists, &exclusions), Some(vectors.len())))
    }

    fn keywords(&mut self) -> Result<(), CliError> {
        self.ensure_corpus()?;
        let (ks, compared_docs) = self.keyword_set()?;
        self.write_json_artifact("keywords.json", &ks)?;

        let series = keyword_rate_series(self.corpus(), &ks, &self.stop);
        let mut by_year = Table::new(
            "keyword_series",
            &["year", "mean_hits_per_line", "total_hits", "line_count"],
        );
        for y in &series.years {
            by_year.push_row(vec![
                y.year.to_string(),
                fmt_sig(y.mean_hits_per_line),
                y.total_hits.to_string(),
                y.line_count.to_string(),
            ]);
        }
        let mut line_hits = Table::new("line_hits", &["line_id", "year", "hits"]);
        for l in &series.lines {
            line_hits.push_row(vec![
                l.line_id.to_string(),
                l.year.to_string(),
                l.hits.to_string(),
            ]);
        }
        self.write_tables(&[by_year, line_hits])?;
        if !series.years.is_empty() {
            self.write_chart(
                &ChartSpec {
                    title: "Keyword rate per year".into(),
                    x_label: "year".into(),
                    y_label: "mean keyword hits per line".into(),
                    series: series
                        .years
                        .iter()
                        .map(|y| (y.year as f64, y.mean_hits_per_line))
                        .collect(),
                    markers: vec![REFERENCE_YEAR_MARKER],
                },
                "keyword_rate.svg",
            )?;
        }
        let peak = series
            .years
            .iter()
            .max_by(|a, b| a.mean_hits_per_line.total_cmp(&b.mean_hits_per_line));
        let mut line = format!(
            "keywords: tracking {} keywords over {} years",
            ks.len(),
            series.years.len()
        );
        if let Some(p) = peak {
            line.push_str(&format!(
                ", peak {} ({} hits/line)",
                p.year,
                fmt_sig(p.mean_hits_per_line)
            ));
        }
        if let Some(n) = compared_docs {
            line.push_str(&format!(", similarity matrix over {n} documents"));
        }
        println!("{line}");
        Ok(())
    }

    /// One LDA document per episode (lines concatenated in corpus order)
    /// or per line; tokens are stop-filtered and stemmed. Documents left
    /// empty after filtering are dropped.
    fn lda_documents(&self) -> (Vec<String>, Vec<TokenStream>) {
        let corpus = self.corpus();
        let raw_docs: Vec<(String, Vec<String>)> = match self.cfg.lda_granularity {
            LdaGranularity::Episode => {
                let mut grouped: BTreeMap<u64, Vec<String>> = BTreeMap::new();
                for line in &corpus.lines {
                    grouped
                        .entry(line.episode_id)
                        .or_default()
                        .extend(tokenize(&line.text).tokens);
                }
                grouped
                    .into_iter()
                    .map(|(id, tokens)| (format!("episode_{id}"), tokens))
                    .collect()
            }
            LdaGranularity::Line => corpus
                .lines
                .iter()
                .map(|l| (format!("line_{}", l.line_id), tokenize(&l.text).tokens))
                .collect(),
        };
        let mut ids = Vec::new();
        let mut docs = Vec::new();
        for (id, tokens) in raw_docs {
            let kept: Vec<String> = tokens
                .into_iter()
                .filter(|t| !self.stop.contains(t))
                .map(|t| stem(&t))
                .collect();
            if !kept.is_empty() {
                ids.push(id);
                docs.push(TokenStream::new(kept));
            }
        }
        (ids, docs)
    }

    fn topics(&mut self) -> Result<(), CliError> {
        self.ensure_corpus()?;
        let (ids, docs) = self.lda_documents();
        let vocab = build_vocabulary(&docs, self.cfg.min_df as u64, self.cfg.max_df_fraction)?;

        // documents can lose every token to vocabulary pruning; model
        // only those with at least one in-vocabulary token
        let keep: Vec<bool> = docs
            .iter()
            .map(|d| d.tokens.iter().any(|t| vocab.id(t).is_some()))
            .collect();
        let ids: Vec<String> = ids
            .into_iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(id, _)| id)
            .collect();
        let docs: Vec<TokenStream> = docs
            .into_iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(d, _)| d)
            .collect();

        let base = LdaConfig {
            num_topics: self.cfg.num_topics,
            alpha: self.cfg.alpha,
            beta_h: self.cfg.beta,
            iterations: self.cfg.iterations,
            seed: self.cfg.seed,
            min_df: self.cfg.min_df as u64,
            max_df_fraction: self.cfg.max_df_fraction,
        };

        let mut k_values: Vec<usize> = self.cfg.k_values.clone();
        k_values.sort_unstable();
        k_values.dedup();

        let (final_cfg, sweep_scores) = if k_values.is_empty() {
            (base.clone(), None)
        } else {
            let sweep = coherence_sweep(
                &docs,
                &vocab,
                &base,
                &k_values,
                self.cfg.coherence_top_n,
                self.cfg.plateau_epsilon,
            )?;
            let selected = sweep.selected;
            (
                LdaConfig {
                    num_topics: selected,
                    seed: base.seed ^ selected as u64,
                    ..base.clone()
                },
                Some(sweep.scores),
            )
        };

        let model = fit_lda(&docs, &vocab, &final_cfg)?;
        let score = umass_coherence(&model, &docs, &vocab, self.cfg.coherence_top_n);

        let mut coherence = Table::new("coherence", &["K", "score"]);
        match &sweep_scores {
            Some(scores) => {
                for &(k, s) in scores {
                    coherence.push_row(vec![k.to_string(), fmt_sig(s)]);
                }
            }
            None => coherence.push_row(vec![final_cfg.num_topics.to_string(), fmt_sig(score)]),
        }

        // per topic, the top-20 words with their probabilities
        let tops = top_topic_words(&model, 20.min(vocab.len()));
        let topics_out: Vec<Vec<serde_json::Value>> = tops
            .iter()
            .enumerate()
            .map(|(k, ids)| {
                ids.iter()
                    .map(|&w| {
                        serde_json::json!({
                            "token": vocab.token(w),
                            "probability": model.phi[k][w],
                        })
                    })
                    .collect()
            })
            .collect();

        let mut doc_topics = Table::new("doc_topics", &["doc_id", "top_topic", "weight"]);
        for (d, id) in ids.iter().enumerate() {
            let (top, weight) = model.theta[d]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .expect("theta rows are nonempty");
            doc_topics.push_row(vec![id.clone(), top.to_string(), fmt_sig(*weight)]);
        }

        self.write_tables(&[coherence, doc_topics])?;
        self.write_json_artifact("topics.json", &topics_out)?;
        if let Some(scores) = &sweep_scores {
            if scores.len() >= 2 {
                self.write_chart(
                    &ChartSpec {
                        title: "Topic coherence by topic count".into(),
                        x_label: "number of topics".into(),
                        y_label: "mean coherence".into(),
                        series: scores.iter().map(|&(k, s)| (k as f64, s)).collect(),
                        markers: vec![final_cfg.num_topics as f64],
                    },
                    "coherence.svg",
                )?;
            }
        }
        println!(
            "topics: K={} coherence {} ({} documents, {} vocabulary{})",
            final_cfg.num_topics,
            fmt_sig(score),
            docs.len(),
            vocab.len(),
            if sweep_scores.is_some() {
                ", selected by sweep"
            } else {
                ""
            }
        );
        Ok(())
    }

    /// Writes the run manifest; called once after all stages.
    fn finish(&self) -> Result<(), CliError> {
        let path = self.manifest.write(&self.cfg.out_dir)?;
        println!("manifest: {}", path.display());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argv_parses_globals_after_subcommand() {
        let cli =
            Cli::try_parse_from(["diachron", "stats", "--script", "a.csv", "--seed", "7"])
                .unwrap();
        assert_eq!(cli.stage, Stage::Stats);
        assert_eq!(cli.opts.script_csv, Some(PathBuf::from("a.csv")));
        assert_eq!(cli.opts.seed, Some(7));
    }

    #[test]
    fn k_values_flag_splits_on_commas() {
        let cli = Cli::try_parse_from(["diachron", "topics", "--k-values", "5,10,20"]).unwrap();
        assert_eq!(cli.opts.k_values, Some(vec![5, 10, 20]));
    }

    #[test]
    fn boolean_flag_is_unset_when_absent() {
        // an absent flag must not shadow a config-file `true`
        let cli = Cli::try_parse_from(["diachron", "stats"]).unwrap();
        assert_eq!(cli.opts.to_partial().include_stopwords_in_stats, None);
        let cli =
            Cli::try_parse_from(["diachron", "stats", "--include-stopwords-in-stats"]).unwrap();
        assert_eq!(
            cli.opts.to_partial().include_stopwords_in_stats,
            Some(true)
        );
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["diachron", "frobnicate"]), 1);
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run(["diachron", "--help"]), 0);
        assert_eq!(run(["diachron", "--version"]), 0);
    }
}
