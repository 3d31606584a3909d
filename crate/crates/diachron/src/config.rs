//! Run configuration: defaults, INI-style config files (`key = value`), and
//! the merge precedence command-line flag > config file > `DIACHRON_OUT`
//! environment variable (out_dir only) > built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::OutputFormat;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("reading config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Whether LDA treats each episode or each line as one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaGranularity {
    Episode,
    Line,
}

/// Fully resolved settings for one run. Serialized into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub script_csv: Option<PathBuf>,
    pub episodes_csv: Option<PathBuf>,
    /// Stop-word list file; `None` uses the bundled list.
    pub stoplist: Option<PathBuf>,
    /// Sentiment lexicon file; `None` uses the bundled lexicon.
    pub lexicon: Option<PathBuf>,
    /// Generic-corpus text for TF-IDF contrast (e.g. a novel).
    pub reference_text: Option<PathBuf>,
    /// Topic-specific texts keywords are extracted from.
    pub topic_texts: Vec<PathBuf>,
    /// Keyword exclusion file; `None` uses the bundled list.
    pub exclusions: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    /// Row count for top-term tables and extracted keyword lists.
    pub top_k: usize,
    /// Minimum frequency for ranks entering the Zipf fit.
    pub min_freq: usize,
    /// Vocabulary-growth sampling stride (tokens) for the Heaps fit.
    pub sample_every: usize,
    pub num_topics: usize,
    /// Document-topic smoothing; `None` means 50 / num_topics.
    pub alpha: Option<f64>,
    /// Topic-word smoothing.
    pub beta: f64,
    pub iterations: usize,
    pub min_df: usize,
    pub max_df_fraction: f64,
    /// Topic counts for the coherence sweep; empty means fit only num_topics.
    pub k_values: Vec<usize>,
    /// Top words per topic entering the coherence score.
    pub coherence_top_n: usize,
    /// Plateau tolerance; `None` means 2% of the best score's magnitude.
    pub plateau_epsilon: Option<f64>,
    pub include_stopwords_in_stats: bool,
    pub lda_granularity: LdaGranularity,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            script_csv: None,
            episodes_csv: None,
            stoplist: None,
            lexicon: None,
            reference_text: None,
            topic_texts: Vec::new(),
            exclusions: None,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            top_k: 50,
            min_freq: 3,
            sample_every: 1000,
            num_topics: 20,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            min_df: 5,
            max_df_fraction: 0.5,
            k_values: Vec::new(),
            coherence_top_n: 10,
            plateau_epsilon: None,
            include_stopwords_in_stats: false,
            lda_granularity: LdaGranularity::Episode,
            seed: 42,
        }
    }
}

/// Settings explicitly provided by one source (flags or a config file).
/// `None` fields fall through to the next source in the precedence chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub script_csv: Option<PathBuf>,
    pub episodes_csv: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub reference_text: Option<PathBuf>,
    pub topic_texts: Option<Vec<PathBuf>>,
    pub exclusions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub top_k: Option<usize>,
    pub min_freq: Option<usize>,
    pub sample_every: Option<usize>,
    pub num_topics: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub iterations: Option<usize>,
    pub min_df: Option<usize>,
    pub max_df_fraction: Option<f64>,
    pub k_values: Option<Vec<usize>>,
    pub coherence_top_n: Option<usize>,
    pub plateau_epsilon: Option<f64>,
    pub include_stopwords_in_stats: Option<bool>,
    pub lda_granularity: Option<LdaGranularity>,
    pub seed: Option<u64>,
}

impl PartialConfig {
    /// Overlays `self` on `base`: fields set here win, everything else
    /// falls through to `base`.
    pub fn merged_over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            script_csv: self.script_csv.or(base.script_csv),
            episodes_csv: self.episodes_csv.or(base.episodes_csv),
            stoplist: self.stoplist.or(base.stoplist),
            lexicon: self.lexicon.or(base.lexicon),
            reference_text: self.reference_text.or(base.reference_text),
            topic_texts: self.topic_texts.or(base.topic_texts),
            exclusions: self.exclusions.or(base.exclusions),
            out_dir: self.out_dir.or(base.out_dir),
            format: self.format.or(base.format),
            top_k: self.top_k.or(base.top_k),
            min_freq: self.min_freq.or(base.min_freq),
            sample_every: self.sample_every.or(base.sample_every),
            num_topics: self.num_topics.or(base.num_topics),
            alpha: self.alpha.or(base.alpha),
            beta: self.beta.or(base.beta),
            iterations: self.iterations.or(base.iterations),
            min_df: self.min_df.or(base.min_df),
            max_df_fraction: self.max_df_fraction.or(base.max_df_fraction),
            k_values: self.k_values.or(base.k_values),
            coherence_top_n: self.coherence_top_n.or(base.coherence_top_n),
            plateau_epsilon: self.plateau_epsilon.or(base.plateau_epsilon),
            include_stopwords_in_stats: self
                .include_stopwords_in_stats
                .or(base.include_stopwords_in_stats),
            lda_granularity: self.lda_granularity.or(base.lda_granularity),
            seed: self.seed.or(base.seed),
        }
    }

    /// Fills unset fields from the environment fallback (`env_out` for
    /// out_dir) and built-in defaults.
    pub fn resolve(self, env_out: Option<String>) -> RunConfig {
        let d = RunConfig::default();
        RunConfig {
            script_csv: self.script_csv,
            episodes_csv: self.episodes_csv,
            stoplist: self.stoplist,
            lexicon: self.lexicon,
            reference_text: self.reference_text,
            topic_texts: self.topic_texts.unwrap_or_default(),
            exclusions: self.exclusions,
            out_dir: self
                .out_dir
                .or(env_out.map(PathBuf::from))
                .unwrap_or(d.out_dir),
            format: self.format.unwrap_or(d.format),
            top_k: self.top_k.unwrap_or(d.top_k),
            min_freq: self.min_freq.unwrap_or(d.min_freq),
            sample_every: self.sample_every.unwrap_or(d.sample_every),
            num_topics: self.num_topics.unwrap_or(d.num_topics),
            alpha: self.alpha,
            beta: self.beta.unwrap_or(d.beta),
            iterations: self.iterations.unwrap_or(d.iterations),
            min_df: self.min_df.unwrap_or(d.min_df),
            max_df_fraction: self.max_df_fraction.unwrap_or(d.max_df_fraction),
            k_values: self.k_values.unwrap_or_default(),
            coherence_top_n: self.coherence_top_n.unwrap_or(d.coherence_top_n),
            plateau_epsilon: self.plateau_epsilon,
            include_stopwords_in_stats: self
                .include_stopwords_in_stats
                .unwrap_or(d.include_stopwords_in_stats),
            lda_granularity: self.lda_granularity.unwrap_or(d.lda_granularity),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    pub fn from_ini_file(path: &Path) -> Result<PartialConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_ini_str(&text)
    }

    /// Parses `key = value` lines. `#` and `;` start full-line comments;
    /// `[section]` headers are tolerated and ignored; keys match the
    /// RunConfig field names.
    pub fn from_ini_str(text: &str) -> Result<PartialConfig, ConfigError> {
        let mut cfg = PartialConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value, lineno)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| ConfigError::Parse {
                line,
                msg: format!("invalid value for `{key}`: {e}"),
            })
        }
        fn boolean(value: &str, line: usize, key: &str) -> Result<bool, ConfigError> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ConfigError::Parse {
                    line,
                    msg: format!("invalid value for `{key}`: expected true or false"),
                }),
            }
        }
        match key {
            "script_csv" => self.script_csv = Some(PathBuf::from(value)),
            "episodes_csv" => self.episodes_csv = Some(PathBuf::from(value)),
            "stoplist" => self.stoplist = Some(PathBuf::from(value)),
            "lexicon" => self.lexicon = Some(PathBuf::from(value)),
            "reference_text" => self.reference_text = Some(PathBuf::from(value)),
            "topic_texts" => {
                self.topic_texts = Some(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(PathBuf::from)
                        .collect(),
                )
            }
            "exclusions" => self.exclusions = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "format" => {
                self.format = Some(match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            msg: format!("invalid value for `format`: expected csv or json"),
                        })
                    }
                })
            }
            "top_k" => self.top_k = Some(num(value, line, key)?),
            "min_freq" => self.min_freq = Some(num(value, line, key)?),
            "sample_every" => self.sample_every = Some(num(value, line, key)?),
            "num_topics" => self.num_topics = Some(num(value, line, key)?),
            "alpha" => self.alpha = Some(num(value, line, key)?),
            "beta" => self.beta = Some(num(value, line, key)?),
            "iterations" => self.iterations = Some(num(value, line, key)?),
            "min_df" => self.min_df = Some(num(value, line, key)?),
            "max_df_fraction" => self.max_df_fraction = Some(num(value, line, key)?),
            "k_values" => {
                let mut ks = Vec::new();
                for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    ks.push(num(part, line, key)?);
                }
                self.k_values = Some(ks);
            }
            "coherence_top_n" => self.coherence_top_n = Some(num(value, line, key)?),
            "plateau_epsilon" => self.plateau_epsilon = Some(num(value, line, key)?),
            "include_stopwords_in_stats" => {
                self.include_stopwords_in_stats = Some(boolean(value, line, key)?)
            }
            "lda_granularity" => {
                self.lda_granularity = Some(match value {
                    "episode" => LdaGranularity::Episode,
                    "line" => LdaGranularity::Line,
                    _ => {
                        return Err(ConfigError::Parse {
                            line,
                            msg: format!(
                                "invalid value for `lda_granularity`: expected episode or line"
                            ),
                        })
                    }
                })
            }
            "seed" => self.seed = Some(num(value, line, key)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let d = RunConfig::default();
        assert_eq!(d.out_dir, PathBuf::from("out"));
        assert_eq!(d.top_k, 50);
        assert_eq!(d.min_freq, 3);
        assert_eq!(d.sample_every, 1000);
        assert_eq!(d.num_topics, 20);
        assert_eq!(d.alpha, None);
        assert_eq!(d.beta, 0.01);
        assert_eq!(d.iterations, 1000);
        assert_eq!(d.seed, 42);
        assert_eq!(d.lda_granularity, LdaGranularity::Episode);
        assert!(!d.include_stopwords_in_stats);
    }

    #[test]
    fn ini_parses_keys_comments_and_sections() {
        let text = "\
# comment
; also a comment
[paths]
script_csv = data/lines.csv
out_dir = results
topic_texts = a.txt , b.txt

[model]
num_topics = 30
alpha = 0.5
k_values = 5, 10, 20
include_stopwords_in_stats = true
lda_granularity = line
format = json
";
        let p = PartialConfig::from_ini_str(text).unwrap();
        assert_eq!(p.script_csv, Some(PathBuf::from("data/lines.csv")));
        assert_eq!(p.out_dir, Some(PathBuf::from("results")));
        assert_eq!(
            p.topic_texts,
            Some(vec![PathBuf::from("a.txt"), PathBuf::from("b.txt")])
        );
        assert_eq!(p.num_topics, Some(30));
        assert_eq!(p.alpha, Some(0.5));
        assert_eq!(p.k_values, Some(vec![5, 10, 20]));
        assert_eq!(p.include_stopwords_in_stats, Some(true));
        assert_eq!(p.lda_granularity, Some(LdaGranularity::Line));
        assert_eq!(p.format, Some(OutputFormat::Json));
    }

    #[test]
    fn ini_rejects_unknown_keys_and_malformed_lines() {
        let err = PartialConfig::from_ini_str("bogus_key = 1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 1, .. }));
        let err = PartialConfig::from_ini_str("\nno equals sign").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
        let err = PartialConfig::from_ini_str("seed = notanumber").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn precedence_flag_beats_file_beats_env_beats_default() {
        let file = PartialConfig::from_ini_str("out_dir = from_file\nseed = 7").unwrap();

        // flag wins over file, env, default
        let mut flags = PartialConfig::default();
        flags.out_dir = Some(PathBuf::from("from_flag"));
        let cfg = flags
            .merged_over(file.clone())
            .resolve(Some("from_env".into()));
        assert_eq!(cfg.out_dir, PathBuf::from("from_flag"));
        assert_eq!(cfg.seed, 7, "file value survives when flag is absent");

        // file wins over env
        let cfg = PartialConfig::default()
            .merged_over(file)
            .resolve(Some("from_env".into()));
        assert_eq!(cfg.out_dir, PathBuf::from("from_file"));

        // env wins over default
        let cfg = PartialConfig::default().resolve(Some("from_env".into()));
        assert_eq!(cfg.out_dir, PathBuf::from("from_env"));

        // default when nothing is set
        let cfg = PartialConfig::default().resolve(None);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = RunConfig::default();
        cfg.script_csv = Some(PathBuf::from("x.csv"));
        cfg.k_values = vec![10, 20];
        cfg.alpha = Some(0.25);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
