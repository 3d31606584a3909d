//! CSV ingestion: parses the script-line and episode files, applies the
//! line-cleaning rules, joins air years, and partitions the corpus by year.
//!
//! Both inputs are RFC 4180 CSV with a header row; extra columns are
//! ignored. Script rows survive only when `speaking_line` is the literal
//! `true` (case-insensitive).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("malformed row {0}: wrong field count or non-numeric id")]
    MalformedRow(u64),
    #[error("row {0}: air date does not start with a plausible 4-digit year")]
    BadDate(u64),
    #[error("row {row}: duplicate id {id}")]
    DuplicateId { row: u64, id: u64 },
    #[error("no lines survived cleaning and joining")]
    EmptyCorpus,
    #[error("csv read error: {0}")]
    Csv(#[from] csv::Error),
}

/// One speaking row of the script file, text preserved byte-for-byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawScriptLine {
    pub line_id: u64,
    pub episode_id: u64,
    pub speaking: bool,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub episode_id: u64,
    pub air_year: i32,
    pub title: String,
}

/// A script line after cleaning: lowercase, speaker prefix removed,
/// punctuation stripped, single-spaced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanLine {
    pub line_id: u64,
    pub episode_id: u64,
    pub air_year: i32,
    pub text: String,
}

/// Cleaned lines in source order with a year partition over their indices.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub lines: Vec<CleanLine>,
    pub by_year: BTreeMap<i32, Vec<usize>>,
}

impl Corpus {
    pub fn years(&self) -> Vec<i32> {
        self.by_year.keys().copied().collect()
    }

    pub fn lines_for_year(&self, year: i32) -> impl Iterator<Item = &CleanLine> {
        self.by_year
            .get(&year)
            .into_iter()
            .flatten()
            .map(|&i| &self.lines[i])
    }
}

/// Result of `parse_script_lines`: the speaking rows plus how many data
/// rows were read in total.
#[derive(Debug, Clone)]
pub struct ScriptParse {
    pub lines: Vec<RawScriptLine>,
    pub rows_read: u64,
}

/// `build_corpus` output: the corpus plus drop counters for the ingest
/// summary.
#[derive(Debug, Clone)]
pub struct CorpusBuild {
    pub corpus: Corpus,
    pub dropped_unmatched: u64,
    pub dropped_empty: u64,
}

/// The JSON ingest summary emitted by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub lines_read: u64,
    pub speaking_lines: u64,
    pub cleaned_lines: u64,
    pub dropped_unmatched: u64,
    pub dropped_empty: u64,
    pub years: Vec<i32>,
}

fn required_column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, row: u64) -> Result<&'a str, IngestError> {
    record.get(idx).ok_or(IngestError::MalformedRow(row))
}

fn parse_id(s: &str, row: u64) -> Result<u64, IngestError> {
    s.trim().parse().map_err(|_| IngestError::MalformedRow(row))
}

fn map_csv_error(err: csv::Error, row: u64) -> IngestError {
    match err.kind() {
        csv::ErrorKind::UnequalLengths { .. } => IngestError::MalformedRow(row),
        _ => IngestError::Csv(err),
    }
}

/// Parses the script file, keeping rows whose `speaking_line` is `true`.
/// Row numbers in errors are 1-based data-record numbers.
pub fn parse_script_lines<R: Read>(reader: R) -> Result<ScriptParse, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_idx = required_column(&headers, "id")?;
    let episode_idx = required_column(&headers, "episode_id")?;
    let speaking_idx = required_column(&headers, "speaking_line")?;
    let text_idx = required_column(&headers, "raw_text")?;

    let mut lines = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut rows_read = 0u64;
    for (i, record) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| map_csv_error(e, row))?;
        rows_read += 1;
        let speaking = field(&record, speaking_idx, row)?
            .trim()
            .eq_ignore_ascii_case("true");
        if !speaking {
            continue;
        }
        let line_id = parse_id(field(&record, id_idx, row)?, row)?;
        let episode_id = parse_id(field(&record, episode_idx, row)?, row)?;
        if !seen_ids.insert(line_id) {
            return Err(IngestError::DuplicateId { row, id: line_id });
        }
        lines.push(RawScriptLine {
            line_id,
            episode_id,
            speaking,
            raw_text: field(&record, text_idx, row)?.to_string(),
        });
    }
    Ok(ScriptParse { lines, rows_read })
}

/// Parses the episode file; the air year is the 4-digit prefix of
/// `original_air_date`.
pub fn parse_episodes<R: Read>(reader: R) -> Result<Vec<Episode>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_idx = required_column(&headers, "id")?;
    let date_idx = required_column(&headers, "original_air_date")?;
    let title_idx = required_column(&headers, "title")?;

    let mut episodes = Vec::new();
    let mut seen_ids = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i as u64 + 1;
        let record = record.map_err(|e| map_csv_error(e, row))?;
        let episode_id = parse_id(field(&record, id_idx, row)?, row)?;
        let date = field(&record, date_idx, row)?.trim();
        let prefix = date.get(..4).unwrap_or("");
        let air_year: i32 = prefix.parse().map_err(|_| IngestError::BadDate(row))?;
        if prefix.len() != 4 || !(1900..=2100).contains(&air_year) {
            return Err(IngestError::BadDate(row));
        }
        if !seen_ids.insert(episode_id) {
            return Err(IngestError::DuplicateId {
                row,
                id: episode_id,
            });
        }
        episodes.push(Episode {
            episode_id,
            air_year,
            title: field(&record, title_idx, row)?.to_string(),
        });
    }
    Ok(episodes)
}

/// Cleans one line of raw script text. In order: drop everything up to and
/// including the first colon, lowercase, delete apostrophes (so "don't"
/// fuses to "dont"), replace every other non-letter non-digit character
/// with a space, and collapse runs of spaces. Returns `None` when nothing
/// is left.
pub fn clean_line(raw_text: &str) -> Option<String> {
    let after_prefix = match raw_text.find(':') {
        Some(i) => &raw_text[i + 1..],
        None => raw_text,
    };
    let mut out = String::with_capacity(after_prefix.len());
    let mut pending_space = false;
    for c in after_prefix.to_lowercase().chars() {
        if c == '\'' || c == '\u{2019}' {
            continue;
        }
        if c.is_alphabetic() || c.is_ascii_digit() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Joins speaking lines with episode air years into a year-partitioned
/// corpus. Lines that clean to nothing and lines whose episode is unknown
/// are dropped and counted.
pub fn build_corpus(
    lines: &[RawScriptLine],
    episodes: &[Episode],
) -> Result<CorpusBuild, IngestError> {
    let year_of: HashMap<u64, i32> = episodes
        .iter()
        .map(|e| (e.episode_id, e.air_year))
        .collect();
    let mut corpus = Corpus::default();
    let mut dropped_unmatched = 0u64;
    let mut dropped_empty = 0u64;
    for line in lines {
        let Some(text) = clean_line(&line.raw_text) else {
            dropped_empty += 1;
            continue;
        };
        let Some(&air_year) = year_of.get(&line.episode_id) else {
            dropped_unmatched += 1;
            continue;
        };
        let idx = corpus.lines.len();
        corpus.lines.push(CleanLine {
            line_id: line.line_id,
            episode_id: line.episode_id,
            air_year,
            text,
        });
        corpus.by_year.entry(air_year).or_default().push(idx);
    }
    if corpus.lines.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    Ok(CorpusBuild {
        corpus,
        dropped_unmatched,
        dropped_empty,
    })
}

impl IngestSummary {
    pub fn new(script: &ScriptParse, build: &CorpusBuild) -> Self {
        IngestSummary {
            lines_read: script.rows_read,
            speaking_lines: script.lines.len() as u64,
            cleaned_lines: build.corpus.lines.len() as u64,
            dropped_unmatched: build.dropped_unmatched,
            dropped_empty: build.dropped_empty,
            years: build.corpus.years(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SCRIPT_HEADER: &str = "id,episode_id,speaking_line,raw_text\n";

    #[test]
    fn parses_quoted_speaking_row() {
        let csv = format!("{SCRIPT_HEADER}9,1,true,\"Homer Simpson: Hey!\"\n");
        let parsed = parse_script_lines(csv.as_bytes()).unwrap();
        assert_eq!(parsed.rows_read, 1);
        assert_eq!(
            parsed.lines,
            vec![RawScriptLine {
                line_id: 9,
                episode_id: 1,
                speaking: true,
                raw_text: "Homer Simpson: Hey!".into(),
            }]
        );
    }

    #[test]
    fn drops_non_speaking_rows() {
        let csv = format!("{SCRIPT_HEADER}9,1,false,\"(set change)\"\n");
        let parsed = parse_script_lines(csv.as_bytes()).unwrap();
        assert!(parsed.lines.is_empty());
        assert_eq!(parsed.rows_read, 1);
    }

    #[test]
    fn header_only_is_empty() {
        let parsed = parse_script_lines(SCRIPT_HEADER.as_bytes()).unwrap();
        assert!(parsed.lines.is_empty());
        assert_eq!(parsed.rows_read, 0);
    }

    #[test]
    fn embedded_commas_and_newlines() {
        let csv = format!("{SCRIPT_HEADER}3,2,TRUE,\"Marge: well,\nok\"\n");
        let parsed = parse_script_lines(csv.as_bytes()).unwrap();
        assert_eq!(parsed.lines[0].raw_text, "Marge: well,\nok");
    }

    #[test]
    fn missing_column_reported_by_name() {
        let csv = "id,episode_id,speaking_line\n1,1,true\n";
        match parse_script_lines(csv.as_bytes()) {
            Err(IngestError::MissingColumn(name)) => assert_eq!(name, "raw_text"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_id_is_malformed() {
        let csv = format!("{SCRIPT_HEADER}x,1,true,hi\n");
        assert!(matches!(
            parse_script_lines(csv.as_bytes()),
            Err(IngestError::MalformedRow(1))
        ));
    }

    #[test]
    fn wrong_field_count_is_malformed() {
        let csv = format!("{SCRIPT_HEADER}1,1,true\n");
        assert!(matches!(
            parse_script_lines(csv.as_bytes()),
            Err(IngestError::MalformedRow(1))
        ));
    }

    #[test]
    fn episode_year_from_date_prefix() {
        let csv = "id,original_air_date,title\n10,1990-03-25,Some Title\n11,2001-11-07,Another\n";
        let eps = parse_episodes(csv.as_bytes()).unwrap();
        assert_eq!(eps[0].air_year, 1990);
        assert_eq!(eps[1].air_year, 2001);
    }

    #[test]
    fn bad_date_rejected() {
        let csv = "id,original_air_date,title\n10,notadate,T\n";
        assert!(matches!(
            parse_episodes(csv.as_bytes()),
            Err(IngestError::BadDate(1))
        ));
    }

    #[test]
    fn clean_line_examples() {
        assert_eq!(
            clean_line("Homer Simpson: (ANNOYED GRUNT) Where's my donut?!"),
            Some("annoyed grunt wheres my donut".into())
        );
        assert_eq!(clean_line("Marge Simpson:   "), None);
        assert_eq!(clean_line("no colon HERE."), Some("no colon here".into()));
    }

    #[test]
    fn clean_line_keeps_digits() {
        assert_eq!(clean_line("Kent: the year 911 story"), Some("the year 911 story".into()));
    }

    #[test]
    fn build_corpus_joins_years() {
        let lines = vec![RawScriptLine {
            line_id: 0,
            episode_id: 10,
            speaking: true,
            raw_text: "Homer: hi".into(),
        }];
        let episodes = vec![Episode {
            episode_id: 10,
            air_year: 1990,
            title: "t".into(),
        }];
        let build = build_corpus(&lines, &episodes).unwrap();
        assert_eq!(build.corpus.by_year[&1990], vec![0]);
        assert_eq!(build.dropped_unmatched, 0);
    }

    #[test]
    fn unmatched_episode_dropped_and_counted() {
        let episodes = vec![Episode {
            episode_id: 10,
            air_year: 1990,
            title: "t".into(),
        }];
        let lines = vec![
            RawScriptLine {
                line_id: 0,
                episode_id: 10,
                speaking: true,
                raw_text: "a: hi".into(),
            },
            RawScriptLine {
                line_id: 1,
                episode_id: 99,
                speaking: true,
                raw_text: "b: ho".into(),
            },
        ];
        let build = build_corpus(&lines, &episodes).unwrap();
        assert_eq!(build.corpus.lines.len(), 1);
        assert_eq!(build.dropped_unmatched, 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let lines = vec![RawScriptLine {
            line_id: 0,
            episode_id: 10,
            speaking: true,
            raw_text: ":!!".into(),
        }];
        assert!(matches!(
            build_corpus(&lines, &[]),
            Err(IngestError::EmptyCorpus)
        ));
    }

    fn is_clean_char(c: char) -> bool {
        c == ' ' || c.is_ascii_digit() || c.is_alphabetic()
    }

    proptest! {
        #[test]
        fn clean_line_idempotent_and_in_alphabet(raw in "\\PC{0,60}") {
            if let Some(cleaned) = clean_line(&raw) {
                prop_assert!(cleaned.chars().all(is_clean_char), "bad char in {cleaned:?}");
                // letters with no lowercase mapping stay put, so the line is
                // a fixed point of lowercasing rather than uppercase-free
                prop_assert_eq!(cleaned.to_lowercase(), cleaned.clone());
                prop_assert!(!cleaned.starts_with(' ') && !cleaned.ends_with(' '));
                prop_assert!(!cleaned.contains("  "));
                prop_assert_eq!(clean_line(&cleaned), Some(cleaned.clone()));
            }
        }

        #[test]
        fn year_partition_is_disjoint_cover(
            rows in proptest::collection::vec((0u64..50, 1u64..6, "[a-z: ]{0,20}"), 1..40)
        ) {
            let episodes: Vec<Episode> = (1..6)
                .map(|id| Episode { episode_id: id, air_year: 1989 + id as i32, title: String::new() })
                .collect();
            let mut lines = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for (id, ep, text) in rows {
                if seen.insert(id) {
                    lines.push(RawScriptLine { line_id: id, episode_id: ep, speaking: true, raw_text: text });
                }
            }
            match build_corpus(&lines, &episodes) {
                Ok(build) => {
                    let mut covered = vec![false; build.corpus.lines.len()];
                    for (year, idxs) in &build.corpus.by_year {
                        for &i in idxs {
                            prop_assert!(!covered[i], "index {i} in two year buckets");
                            covered[i] = true;
                            prop_assert_eq!(build.corpus.lines[i].air_year, *year);
                        }
                    }
                    prop_assert!(covered.iter().all(|&c| c));
                    let cleanable = lines.iter().filter(|l| clean_line(&l.raw_text).is_some()).count() as u64;
                    prop_assert_eq!(build.corpus.lines.len() as u64 + build.dropped_unmatched, cleanable);
                }
                Err(IngestError::EmptyCorpus) => {}
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e:?}"))),
            }
        }
    }
}
